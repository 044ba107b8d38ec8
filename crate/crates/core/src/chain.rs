//! Microscopic dynamics: nearest-neighbour exchange noise at rate `N^2` per
//! bond, interleaved with the linear Hamiltonian flow
//! `d eta(x)/dt = alpha_N N^2 (eta(x+1) - eta(x-1))`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::lattice::{self, DiscreteField};

/// Model parameters: torus size `N`, asymmetry `alpha > 0` and its scaling
/// exponent `kappa`, giving the effective strength `alpha_N = alpha N^-kappa`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    n: usize,
    alpha: f64,
    kappa: f64,
}

impl ChainParams {
    pub fn new(n: usize, alpha: f64, kappa: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("{alpha} is not a positive finite number")));
        }
        Self::build(n, alpha, kappa)
    }

    /// Pure exchange noise (`alpha = 0`); used as a reference dynamics.
    pub fn exchange_only(n: usize) -> Result<Self> {
        Self::build(n, 0.0, 0.0)
    }

    fn build(n: usize, alpha: f64, kappa: f64) -> Result<Self> {
        if n < 5 {
            return Err(Error::StencilWrap { n });
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid("kappa", format!("{kappa} is not a finite number >= 0")));
        }
        let p = Self { n, alpha, kappa };
        if p.alpha_n() >= 1.0 {
            return Err(Error::NegativeRate { alpha_n: p.alpha_n() });
        }
        Ok(p)
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    #[must_use]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[must_use]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    #[must_use]
    pub fn alpha_n(&self) -> f64 {
        self.alpha * (self.n as f64).powf(-self.kappa)
    }

    #[must_use]
    pub fn n_sq(&self) -> f64 {
        (self.n * self.n) as f64
    }

    /// Prefactor `alpha_N N^2` of the Hamiltonian flow.
    #[must_use]
    pub fn flow_strength(&self) -> f64 {
        self.alpha_n() * self.n_sq()
    }

    /// Total swap rate `N^3`.
    #[must_use]
    pub fn swap_rate(&self) -> f64 {
        self.n_sq() * self.n as f64
    }

    /// Lattice velocity `2 alpha_N N^2` of the frame that follows the flow.
    #[must_use]
    pub fn frame_velocity(&self) -> f64 {
        2.0 * self.flow_strength()
    }
}

/// Identifies the random stream of one replica.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaSeed {
    pub master: u64,
    pub replica: u64,
}

impl ReplicaSeed {
    #[must_use]
    pub fn new(master: u64, replica: u64) -> Self {
        Self { master, replica }
    }

    #[must_use]
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.replica);
        rng
    }
}

impl From<u64> for ReplicaSeed {
    fn from(master: u64) -> Self {
        Self::new(master, 0)
    }
}

/// One microscopic configuration together with its clock and random stream.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub eta: DiscreteField,
    pub t: f64,
    pub seed: ReplicaSeed,
    rng: ChaCha8Rng,
}

impl ChainState {
    #[must_use]
    pub fn new(eta: DiscreteField, seed: ReplicaSeed) -> Self {
        Self {
            eta,
            t: 0.0,
            rng: seed.rng(),
            seed,
        }
    }

    #[must_use]
    pub fn volume(&self) -> f64 {
        self.eta.sum()
    }

    #[must_use]
    pub fn energy(&self) -> f64 {
        self.eta.values().iter().map(|v| v * v).sum()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Independent Gaussian sites with given means and standard deviations.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductGaussian {
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl ProductGaussian {
    pub fn gibbs(n: usize, rho: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("{beta} is not positive")));
        }
        Ok(Self {
            mean: vec![rho; n],
            sd: vec![beta.recip().sqrt(); n],
        })
    }

    /// Site `x` gets mean `v0(x/N)` and variance `e0(x/N) - v0(x/N)^2`.
    pub fn from_profiles(n: usize, v0: impl Fn(f64) -> f64, e0: impl Fn(f64) -> f64) -> Result<Self> {
        let mut mean = Vec::with_capacity(n);
        let mut sd = Vec::with_capacity(n);
        for x in 0..n {
            let u = x as f64 / n as f64;
            let v = v0(u);
            let chi = e0(u) - v * v;
            if !(chi > 0.0 && chi.is_finite()) {
                return Err(Error::InvalidProfile { x, chi });
            }
            mean.push(v);
            sd.push(chi.sqrt());
        }
        Ok(Self { mean, sd })
    }

    #[must_use]
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    #[must_use]
    pub fn variance(&self) -> Vec<f64> {
        self.sd.iter().map(|s| s * s).collect()
    }

    #[must_use]
    pub fn sample(&self, seed: ReplicaSeed) -> ChainState {
        let mut rng = seed.rng();
        let eta = self
            .mean
            .iter()
            .zip(&self.sd)
            .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        ChainState {
            eta: DiscreteField::from_vec_unchecked(eta),
            t: 0.0,
            seed,
            rng,
        }
    }
}

/// Gaussian product measure with mean `rho` and variance `1/beta` per site.
pub fn sample_gibbs(params: &ChainParams, rho: f64, beta: f64, seed: ReplicaSeed) -> Result<ChainState> {
    Ok(ProductGaussian::gibbs(params.n(), rho, beta)?.sample(seed))
}

/// Independent Gaussians with local mean `v0(x/N)` and energy `e0(x/N)`.
pub fn sample_profile_measure(
    params: &ChainParams,
    v0: impl Fn(f64) -> f64,
    e0: impl Fn(f64) -> f64,
    seed: ReplicaSeed,
) -> Result<ChainState> {
    Ok(ProductGaussian::from_profiles(params.n(), v0, e0)?.sample(seed))
}

/// Exact Hamiltonian flow for time `tau`, applied mode by mode in Fourier space.
pub fn hamiltonian_flow(state: &mut ChainState, tau: f64, params: &ChainParams) {
    let theta = params.flow_strength() * tau;
    flow_spectral(state.eta.values_mut(), theta, &mut Vec::new());
    state.t += tau;
}

/// Exchanges the values at `x` and `x+1 mod N`.
pub fn apply_swap(state: &mut ChainState, x: usize) {
    let n = state.eta.len();
    state.eta.values_mut().swap(x, (x + 1) % n);
}

/// `eta <- exp(theta C) eta` with `(C eta)(x) = eta(x+1) - eta(x-1)`.
fn flow_spectral(eta: &mut [f64], theta: f64, buf: &mut Vec<Complex64>) {
    if theta == 0.0 {
        return;
    }
    let n = eta.len();
    buf.clear();
    buf.extend(eta.iter().map(|&v| Complex64::new(v, 0.0)));
    lattice::dft_in_place(buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let w = 2.0 * theta * (2.0 * PI * k as f64 / n as f64).sin();
        *c *= Complex64::from_polar(1.0, w);
    }
    lattice::idft_in_place(buf);
    for (e, c) in eta.iter_mut().zip(buf.iter()) {
        *e = c.re;
    }
}

/// Largest `2 theta` handled by the truncated series; longer flows use the DFT.
const SERIES_MAX_ARG: f64 = 0.5;
/// The series is cut once the remaining terms are below this fraction of `max|eta|`.
const SERIES_CUTOFF: f64 = 1e-17;

/// Scratch space for repeated short flows.
struct FlowWork {
    term: Vec<f64>,
    next: Vec<f64>,
    spectral: Vec<Complex64>,
}

impl FlowWork {
    fn new(n: usize) -> Self {
        Self {
            term: vec![0.0; n],
            next: vec![0.0; n],
            spectral: Vec::with_capacity(n),
        }
    }

    /// Exact flow up to rounding. Short flows are summed as the Taylor
    /// series of `exp(theta C)` (`||C||_inf = 2`) with an a priori
    /// truncation bound; long ones go through the DFT.
    fn apply(&mut self, eta: &mut [f64], theta: f64) {
        let arg = 2.0 * theta.abs();
        if arg == 0.0 {
            return;
        }
        if arg > SERIES_MAX_ARG {
            flow_spectral(eta, theta, &mut self.spectral);
            return;
        }
        let n = eta.len();
        self.term.copy_from_slice(eta);
        let mut bound = 1.0;
        let mut j = 1.0;
        loop {
            lattice::centered_difference_into(&self.term, &mut self.next);
            let c = theta / j;
            for ((t, nx), e) in self.term.iter_mut().zip(&self.next).zip(eta.iter_mut()) {
                *t = c * nx;
                *e += *t;
            }
            bound *= arg / j;
            // tail after term j is at most bound * arg / (j + 1) / (1 - arg / (j + 2))
            if bound * arg / (j + 1.0) / (1.0 - arg / (j + 2.0)) < SERIES_CUTOFF {
                break;
            }
            j += 1.0;
            debug_assert!(j < 64.0 && n > 0);
        }
    }
}

/// A quantity recorded along a trajectory.
pub trait Observable: Sync {
    fn name(&self) -> &str;
    fn width(&self, n: usize) -> usize;
    fn record(&self, state: &ChainState, params: &ChainParams, out: &mut Vec<f64>);
}

/// Full configuration snapshot.
pub struct Configuration;

impl Observable for Configuration {
    fn name(&self) -> &str {
        "eta"
    }
    fn width(&self, n: usize) -> usize {
        n
    }
    fn record(&self, state: &ChainState, _: &ChainParams, out: &mut Vec<f64>) {
        out.extend_from_slice(state.eta.values());
    }
}

/// Total volume and total energy.
pub struct Conserved;

impl Observable for Conserved {
    fn name(&self) -> &str {
        "conserved"
    }
    fn width(&self, _: usize) -> usize {
        2
    }
    fn record(&self, state: &ChainState, _: &ChainParams, out: &mut Vec<f64>) {
        out.push(state.volume());
        out.push(state.energy());
    }
}

/// `(1/N) sum_x eta(x)^4`.
pub struct MeanFourthPower;

impl Observable for MeanFourthPower {
    fn name(&self) -> &str {
        "mean_eta4"
    }
    fn width(&self, _: usize) -> usize {
        1
    }
    fn record(&self, state: &ChainState, _: &ChainParams, out: &mut Vec<f64>) {
        let v = state.eta.values();
        out.push(v.iter().map(|e| (e * e) * (e * e)).sum::<f64>() / v.len() as f64);
    }
}

/// Observables sampled at the requested times of one replica.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub seed: ReplicaSeed,
    pub columns: Vec<(String, usize)>,
    /// One row per time; the observables are concatenated in `columns` order.
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    fn new(times: &[f64], seed: ReplicaSeed, observables: &[&dyn Observable], n: usize) -> Self {
        Self {
            times: times.to_vec(),
            seed,
            columns: observables.iter().map(|o| (o.name().to_owned(), o.width(n))).collect(),
            rows: Vec::with_capacity(times.len()),
        }
    }

    fn push(&mut self, state: &ChainState, params: &ChainParams, observables: &[&dyn Observable]) -> Result<()> {
        if !state.eta.values().iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { t: state.t });
        }
        let mut row = Vec::with_capacity(self.columns.iter().map(|c| c.1).sum());
        for o in observables {
            o.record(state, params, &mut row);
        }
        self.rows.push(row);
        Ok(())
    }

    /// Values of observable `obs` at time index `i`.
    #[must_use]
    pub fn get(&self, i: usize, obs: usize) -> &[f64] {
        let start: usize = self.columns[..obs].iter().map(|c| c.1).sum();
        &self.rows[i][start..start + self.columns[obs].1]
    }
}

fn check_schedule(horizon: f64, schedule: &[f64]) -> Result<()> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", format!("{horizon} is not a finite time >= 0")));
    }
    let mut prev = f64::NEG_INFINITY;
    for &s in schedule {
        if !(0.0..=horizon).contains(&s) || s < prev {
            return Err(invalid("schedule", format!("times must be sorted within [0, {horizon}]")));
        }
        prev = s;
    }
    Ok(())
}

/// Event-driven exact simulation over `[0, horizon]` (relative to `state.t`).
/// A single exponential clock of rate `N^3` triggers swaps at uniform bonds;
/// between events the state follows the exact Hamiltonian flow. Observables
/// are recorded after flowing exactly to each schedule time.
pub fn simulate(
    params: &ChainParams,
    state: &mut ChainState,
    horizon: f64,
    schedule: &[f64],
    observables: &[&dyn Observable],
) -> Result<TrajectoryRecord> {
    check_schedule(horizon, schedule)?;
    let n = params.n();
    if state.eta.len() != n {
        return Err(invalid("initial", format!("state has N={} but params N={n}", state.eta.len())));
    }
    let mut record = TrajectoryRecord::new(schedule, state.seed, observables, n);
    let rate = params.swap_rate();
    let strength = params.flow_strength();
    let mut work = FlowWork::new(n);
    let t0 = state.t;
    // elapsed time within the run; `clock` is the time already flowed to
    let mut clock = 0.0;
    let mut next_event = state.rng.sample::<f64, _>(Exp1) / rate;
    let targets = schedule.iter().copied().chain(std::iter::once(horizon));
    for (i, target) in targets.enumerate() {
        while next_event <= target {
            work.apply(state.eta.values_mut(), strength * (next_event - clock));
            clock = next_event;
            let x = state.rng.random_range(0..n);
            state.eta.values_mut().swap(x, if x + 1 == n { 0 } else { x + 1 });
            next_event += state.rng.sample::<f64, _>(Exp1) / rate;
        }
        work.apply(state.eta.values_mut(), strength * (target - clock));
        clock = target;
        state.t = t0 + clock;
        if i < schedule.len() {
            record.push(state, params, observables)?;
        } else if !state.eta.values().iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { t: state.t });
        }
    }
    Ok(record)
}

/// Largest expected number of swaps allowed in one splitting step.
const SPLIT_MAX_SWAPS: f64 = 1e9;

/// Strang splitting with step at most `dt`: half flow, a Poisson number of
/// uniform-bond swaps, half flow. Steps are shortened so that every schedule
/// time is a step boundary.
pub fn simulate_split(
    params: &ChainParams,
    state: &mut ChainState,
    horizon: f64,
    dt: f64,
    schedule: &[f64],
    observables: &[&dyn Observable],
) -> Result<TrajectoryRecord> {
    check_schedule(horizon, schedule)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("{dt} is not positive")));
    }
    if dt * params.swap_rate() > SPLIT_MAX_SWAPS {
        return Err(Error::Resource(format!(
            "dt*N^3 = {:.3e} swaps per step exceeds {SPLIT_MAX_SWAPS:.0e}",
            dt * params.swap_rate()
        )));
    }
    let n = params.n();
    let mut record = TrajectoryRecord::new(schedule, state.seed, observables, n);
    let strength = params.flow_strength();
    let mut work = FlowWork::new(n);
    let t0 = state.t;
    let mut clock = 0.0;
    let targets = schedule.iter().copied().chain(std::iter::once(horizon));
    for (i, target) in targets.enumerate() {
        let span = target - clock;
        let steps = (span / dt).ceil().max(if span > 0.0 { 1.0 } else { 0.0 }) as usize;
        if steps > 0 {
            let h = span / steps as f64;
            let poisson = Poisson::new(h * params.swap_rate()).map_err(|e| invalid("dt", e.to_string()))?;
            for _ in 0..steps {
                work.apply(state.eta.values_mut(), strength * h / 2.0);
                let k = poisson.sample(&mut state.rng) as u64;
                for _ in 0..k {
                    let x = state.rng.random_range(0..n);
                    state.eta.values_mut().swap(x, (x + 1) % n);
                }
                work.apply(state.eta.values_mut(), strength * h / 2.0);
            }
        }
        clock = target;
        state.t = t0 + clock;
        if i < schedule.len() {
            record.push(state, params, observables)?;
        }
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(v: &[f64]) -> ChainState {
        ChainState::new(DiscreteField::new(v.to_vec()).unwrap(), 1.into())
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(ChainParams::new(4, 0.5, 1.0), Err(Error::StencilWrap { .. })));
        assert!(ChainParams::new(16, 0.0, 1.0).is_err());
        assert!(ChainParams::new(16, -1.0, 1.0).is_err());
        assert!(matches!(ChainParams::new(16, 20.0, 1.0), Err(Error::NegativeRate { .. })));
        assert!(ChainParams::new(16, 20.0, 2.0).is_ok());
    }

    #[test]
    fn swap_wraps_and_is_an_involution() {
        let mut s = state(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        apply_swap(&mut s, 4);
        assert_eq!(s.eta.values(), &[5.0, 2.0, 3.0, 4.0, 1.0]);
        apply_swap(&mut s, 4);
        assert_eq!(s.eta.values(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn series_and_spectral_flows_agree() {
        let p = ChainParams::new(12, 0.7, 1.0).unwrap();
        let eta: Vec<f64> = (0..12).map(|x| ((x * 7 % 5) as f64 - 2.0) * 0.3 + 1.0).collect();
        for theta in [1e-5, 3e-3, 0.1, 0.249] {
            let mut a = eta.clone();
            let mut b = eta.clone();
            FlowWork::new(12).apply(&mut a, theta);
            flow_spectral(&mut b, theta, &mut Vec::new());
            let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err < 1e-14, "theta={theta} err={err}");
        }
        let mut s = state(&eta);
        hamiltonian_flow(&mut s, 0.0, &p);
        assert_eq!(s.eta.values(), &eta[..]);
    }

    #[test]
    fn profile_sampler_names_the_bad_site() {
        let p = ChainParams::new(8, 0.5, 1.0).unwrap();
        let err = sample_profile_measure(&p, |_| 0.0, |u| if (u - 0.25).abs() < 1e-12 { 0.0 } else { 1.0 }, 1.into());
        assert!(matches!(err, Err(Error::InvalidProfile { x: 2, .. })));
    }

    #[test]
    fn split_refuses_huge_steps() {
        let p = ChainParams::new(1024, 0.5, 1.0).unwrap();
        let mut s = sample_gibbs(&p, 0.0, 1.0, 3.into()).unwrap();
        let r = simulate_split(&p, &mut s, 10.0, 10.0, &[], &[]);
        assert!(matches!(r, Err(Error::Resource(_))));
    }

    #[test]
    fn schedule_must_lie_in_horizon() {
        let p = ChainParams::new(8, 0.5, 1.0).unwrap();
        let mut s = sample_gibbs(&p, 0.0, 1.0, 3.into()).unwrap();
        assert!(simulate(&p, &mut s, 1.0, &[0.5, 2.0], &[]).is_err());
        assert!(simulate(&p, &mut s, 1.0, &[0.5, 0.2], &[]).is_err());
    }
}
