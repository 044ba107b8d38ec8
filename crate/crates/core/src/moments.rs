//! Closed evolution of the first two moments. The mean `v(x) = E eta(x)`
//! and the matrix `S(x,y) = E eta(x) eta(y)` obey a linear ODE. Its
//! diagonal is the energy profile and its off-diagonal part, minus
//! `v(x) v(y)`, is the two-point correlation.
//!
//! The `(v, S)` system is the one used for results. The `(v, e, phi)`
//! system written in correlation variables is coded separately and used
//! to cross-check it.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::chain::{ChainParams, ProductGaussian};
use crate::error::{invalid, Error, Result};
use crate::lattice::{self, DiscreteField};
use crate::ode::{self, Rhs};
use crate::rw::{self, WalkDistribution2D, WalkRates};

/// Mean profile and second-moment matrix at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub v: DiscreteField,
    /// Row-major `N x N`, symmetric.
    pub s: Vec<f64>,
    pub t: f64,
}

impl MomentState {
    pub fn new(v: DiscreteField, s: Vec<f64>, t: f64) -> Result<Self> {
        let n = v.len();
        if s.len() != n * n {
            return Err(invalid("S", format!("expected {} entries", n * n)));
        }
        for x in 0..n {
            for y in 0..x {
                if (s[x * n + y] - s[y * n + x]).abs() > 1e-12 * (1.0 + s[x * n + y].abs()) {
                    return Err(invalid("S", format!("not symmetric at ({x},{y})")));
                }
            }
        }
        Ok(Self { v, s, t })
    }

    /// Moments of an independent Gaussian product law.
    #[must_use]
    pub fn from_product(law: &ProductGaussian) -> Self {
        let v = law.mean().to_vec();
        let var = law.variance();
        let n = v.len();
        let mut s = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                s[x * n + y] = v[x] * v[y];
            }
            s[x * n + x] += var[x];
        }
        Self {
            v: DiscreteField::from_vec_unchecked(v),
            s,
            t: 0.0,
        }
    }

    pub fn equilibrium(n: usize, rho: f64, beta: f64) -> Result<Self> {
        Ok(Self::from_product(&ProductGaussian::gibbs(n, rho, beta)?))
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.v.len()
    }

    #[must_use]
    pub fn second(&self, x: usize, y: usize) -> f64 {
        self.s[x * self.n() + y]
    }

    #[must_use]
    pub fn energy(&self) -> DiscreteField {
        let n = self.n();
        DiscreteField::from_vec_unchecked((0..n).map(|x| self.s[x * n + x]).collect())
    }

    /// Local variance `e(x) - v(x)^2`.
    #[must_use]
    pub fn compressibility(&self) -> DiscreteField {
        let n = self.n();
        DiscreteField::from_vec_unchecked((0..n).map(|x| self.s[x * n + x] - self.v[x] * self.v[x]).collect())
    }

    /// `S(x,y) - v(x) v(y)` for `x != y`.
    pub fn correlation(&self, x: usize, y: usize) -> Result<f64> {
        let n = self.n();
        if x % n == y % n {
            return Err(Error::DiagonalAccess { x: x % n });
        }
        Ok(self.second(x % n, y % n) - self.v[x % n] * self.v[y % n])
    }

    #[must_use]
    pub fn correlation_field(&self) -> CorrelationField {
        let n = self.n();
        let mut phi = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    phi[x * n + y] = self.s[x * n + y] - self.v[x] * self.v[y];
                }
            }
        }
        CorrelationField { n, phi }
    }

    /// `max_{x != y} |phi(x,y)|`.
    #[must_use]
    pub fn correlation_sup(&self) -> f64 {
        self.correlation_field().sup()
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut y = self.v.values().to_vec();
        y.extend_from_slice(&self.s);
        y
    }

    fn from_slice(n: usize, y: &[f64], t: f64) -> Self {
        Self {
            v: DiscreteField::from_vec_unchecked(y[..n].to_vec()),
            s: y[n..].to_vec(),
            t,
        }
    }
}

/// Two-point function on pairs of distinct sites; diagonal entries are
/// stored as zero and cannot be read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationField {
    n: usize,
    phi: Vec<f64>,
}

impl CorrelationField {
    #[must_use]
    pub fn zeros(n: usize) -> Self {
        Self { n, phi: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut c = Self::zeros(n);
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    c.phi[x * n + y] = f(x, y);
                }
            }
        }
        c
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, y: usize) -> Result<f64> {
        let n = self.n;
        let (x, y) = (x % n, y % n);
        if x == y {
            return Err(Error::DiagonalAccess { x });
        }
        Ok(self.phi[x * n + y])
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) -> Result<()> {
        let n = self.n;
        let (x, y) = (x % n, y % n);
        if x == y {
            return Err(Error::DiagonalAccess { x });
        }
        self.phi[x * n + y] = value;
        Ok(())
    }

    #[must_use]
    pub fn sup(&self) -> f64 {
        self.phi.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm distance over off-diagonal pairs.
    #[must_use]
    pub fn distance(&self, other: &Self) -> f64 {
        self.phi
            .iter()
            .zip(&other.phi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    #[must_use]
    pub fn raw(&self) -> &[f64] {
        &self.phi
    }
}

/// Source term of the correlation equation on the near-diagonal lines:
/// `g(x) = alpha_N N^2 (chi(x+1) - chi(x)) - (grad v(x))^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GSource {
    pub g: DiscreteField,
}

#[must_use]
pub fn g_source(state: &MomentState, params: &ChainParams) -> GSource {
    let e = state.energy();
    g_from_profiles(state.v.values(), e.values(), params)
}

fn g_from_profiles(v: &[f64], e: &[f64], params: &ChainParams) -> GSource {
    let n = v.len();
    let nf = n as f64;
    let a = params.flow_strength();
    let g = (0..n)
        .map(|x| {
            let xp = (x + 1) % n;
            let grad = nf * (v[xp] - v[x]);
            a * (e[xp] - v[xp] * v[xp] - e[x] + v[x] * v[x]) - grad * grad
        })
        .collect();
    GSource {
        g: DiscreteField::from_vec_unchecked(g),
    }
}

/// `dv/dt = lap v + 2 alpha_N N grad~ v`.
#[must_use]
pub fn volume_rhs(v: &DiscreteField, params: &ChainParams) -> DiscreteField {
    let mut out = vec![0.0; v.len()];
    volume_into(v.values(), params, &mut out);
    DiscreteField::from_vec_unchecked(out)
}

fn volume_into(v: &[f64], params: &ChainParams, out: &mut [f64]) {
    let n2 = params.n_sq();
    let a = params.flow_strength();
    let mut c = vec![0.0; v.len()];
    lattice::second_difference_into(v, out);
    lattice::centered_difference_into(v, &mut c);
    for (o, c) in out.iter_mut().zip(&c) {
        *o = n2 * *o + a * c;
    }
}

/// Derivative of `S` (row-major) given the current moments.
pub fn second_moment_rhs(state: &MomentState, params: &ChainParams) -> Result<Vec<f64>> {
    let n = state.n();
    if n < 5 {
        return Err(Error::StencilWrap { n });
    }
    let mut out = vec![0.0; n * n];
    second_moment_into(&state.s, n, params, &mut out);
    Ok(out)
}

/// Writes `dS/dt` into `out`. The bulk stencil is applied to every entry
/// first and then overwritten on the diagonal and the two lines next to it.
fn second_moment_into(s: &[f64], n: usize, params: &ChainParams, out: &mut [f64]) {
    let n2 = params.n_sq();
    let a = params.alpha_n();
    let (up, down, centre) = (n2 * (1.0 + a), n2 * (1.0 - a), 4.0 * n2);
    for x in 0..n {
        let row = &s[x * n..(x + 1) * n];
        let above = &s[((x + 1) % n) * n..((x + 1) % n + 1) * n];
        let below = &s[((x + n - 1) % n) * n..((x + n - 1) % n + 1) * n];
        let o = &mut out[x * n..(x + 1) * n];
        o[0] = up * (above[0] + row[1]) + down * (below[0] + row[n - 1]) - centre * row[0];
        for y in 1..n - 1 {
            o[y] = up * (above[y] + row[y + 1]) + down * (below[y] + row[y - 1]) - centre * row[y];
        }
        o[n - 1] = up * (above[n - 1] + row[0]) + down * (below[n - 1] + row[n - 2]) - centre * row[n - 1];
    }
    let at = |x: usize, y: usize| s[(x % n) * n + y % n];
    let an2 = a * n2;
    for x in 0..n {
        let (xm, xp, xpp) = (x + n - 1, x + 1, x + 2);
        let near = n2 * (at(xm, xp) + at(x, xpp) - 2.0 * at(x, xp))
            + an2 * (at(xp, xp) - at(xm, xp) + at(x, xpp) - at(x, x));
        out[x * n + xp % n] = near;
        out[(xp % n) * n + x] = near;
        out[x * n + x] = n2 * (at(xp, xp) + at(xm, xm) - 2.0 * at(x, x)) + 2.0 * an2 * (at(x, xp) - at(xm, x));
    }
}

/// `d/dt (v, S)` as one linear system.
pub struct SecondMomentSystem {
    params: ChainParams,
}

impl SecondMomentSystem {
    #[must_use]
    pub fn new(params: ChainParams) -> Self {
        Self { params }
    }
}

impl Rhs for SecondMomentSystem {
    fn dim(&self) -> usize {
        let n = self.params.n();
        n + n * n
    }
    fn eval(&self, y: &[f64], out: &mut [f64]) {
        let n = self.params.n();
        let (ov, os) = out.split_at_mut(n);
        volume_into(&y[..n], &self.params, ov);
        second_moment_into(&y[n..], n, &self.params, os);
    }
}

/// Applies the reflected pair generator to `phi` and adds the near-diagonal
/// source `g(x)` at `(x, x+1)` and `g(x-1)` at `(x, x-1)`.
pub fn correlation_rhs(phi: &CorrelationField, g: &GSource, params: &ChainParams) -> Result<CorrelationField> {
    let n = phi.n;
    if n < 5 {
        return Err(Error::StencilWrap { n });
    }
    let mut out = CorrelationField::zeros(n);
    correlation_into(&phi.phi, g.g.values(), n, params, &mut out.phi);
    Ok(out)
}

fn correlation_into(phi: &[f64], g: &[f64], n: usize, params: &ChainParams, out: &mut [f64]) {
    let n2 = params.n_sq();
    let a = params.alpha_n();
    let (up, down) = (n2 * (1.0 + a), n2 * (1.0 - a));
    let f = |x: usize, y: usize| phi[(x % n) * n + y % n];
    for x in 0..n {
        let (xm, xp) = (x + n - 1, x + 1);
        for y in 0..n {
            let here = f(x, y);
            let r = (y + n - x) % n;
            let (ym, yp) = (y + n - 1, y + 1);
            out[x * n + y] = match r {
                0 => 0.0,
                1 => up * (f(x, y + 1) - here) + down * (f(xm, y) - here) + g[x],
                _ if r == n - 1 => up * (f(xp, y) - here) + down * (f(x, y + n - 1) - here) + g[xm % n],
                _ => {
                    up * (f(xp, y) + f(x, yp) - 2.0 * here) + down * (f(xm, y) + f(x, ym) - 2.0 * here)
                }
            };
        }
    }
}

/// `d/dt (v, e, phi)` written directly in correlation variables.
pub struct EnergyCorrelationSystem {
    params: ChainParams,
}

impl EnergyCorrelationSystem {
    #[must_use]
    pub fn new(params: ChainParams) -> Self {
        Self { params }
    }

    fn pack(state: &MomentState) -> Vec<f64> {
        let mut y = state.v.values().to_vec();
        y.extend_from_slice(state.energy().values());
        y.extend_from_slice(&state.correlation_field().phi);
        y
    }

    fn unpack(n: usize, y: &[f64], t: f64) -> MomentState {
        let (v, rest) = y.split_at(n);
        let (e, phi) = rest.split_at(n);
        let mut s = vec![0.0; n * n];
        for x in 0..n {
            for z in 0..n {
                s[x * n + z] = if x == z { e[x] } else { phi[x * n + z] + v[x] * v[z] };
            }
        }
        MomentState {
            v: DiscreteField::from_vec_unchecked(v.to_vec()),
            s,
            t,
        }
    }
}

impl Rhs for EnergyCorrelationSystem {
    fn dim(&self) -> usize {
        let n = self.params.n();
        2 * n + n * n
    }
    fn eval(&self, y: &[f64], out: &mut [f64]) {
        let n = self.params.n();
        let p = &self.params;
        let (v, rest) = y.split_at(n);
        let (e, phi) = rest.split_at(n);
        let (ov, rest) = out.split_at_mut(n);
        let (oe, ophi) = rest.split_at_mut(n);
        volume_into(v, p, ov);
        let a = p.flow_strength();
        let n2 = p.n_sq();
        for x in 0..n {
            let (xm, xp) = ((x + n - 1) % n, (x + 1) % n);
            let flux_right = phi[x * n + xp] + v[x] * v[xp];
            let flux_left = phi[xm * n + x] + v[xm] * v[x];
            oe[x] = n2 * (e[xp] + e[xm] - 2.0 * e[x]) + 2.0 * a * (flux_right - flux_left);
        }
        let g = g_from_profiles(v, e, p);
        correlation_into(phi, g.g.values(), n, p, ophi);
    }
}

/// Integration controls for [`evolve`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Max-norm agreement required between successive step halvings.
    pub tol: f64,
    /// Smallest step tried before giving up.
    pub dt_min: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            dt_min: 1e-12,
        }
    }
}

/// Stability-bounded RK4 step for the moment systems.
#[must_use]
pub fn max_step(params: &ChainParams) -> f64 {
    0.2 / (4.0 * params.n_sq() * (1.0 + params.alpha_n()))
}

/// Moments at the given times (measured from `initial.t`).
pub fn evolve(
    initial: &MomentState,
    params: &ChainParams,
    times: &[f64],
    opts: EvolveOptions,
) -> Result<Vec<MomentState>> {
    let n = params.n();
    if initial.n() != n {
        return Err(invalid("initial", "moment state and params on different tori"));
    }
    let sys = SecondMomentSystem::new(*params);
    let sol = ode::integrate_adaptive(&sys, &initial.to_vec(), times, max_step(params), opts.tol, opts.dt_min)?;
    Ok(sol
        .states
        .iter()
        .zip(times)
        .map(|(y, &t)| MomentState::from_slice(n, y, initial.t + t))
        .collect())
}

/// Same as [`evolve`] but integrating the correlation-variable system.
pub fn evolve_correlation_form(
    initial: &MomentState,
    params: &ChainParams,
    times: &[f64],
    opts: EvolveOptions,
) -> Result<Vec<MomentState>> {
    let n = params.n();
    let sys = EnergyCorrelationSystem::new(*params);
    let sol = ode::integrate_adaptive(
        &sys,
        &EnergyCorrelationSystem::pack(initial),
        times,
        max_step(params),
        opts.tol,
        opts.dt_min,
    )?;
    Ok(sol
        .states
        .iter()
        .zip(times)
        .map(|(y, &t)| EnergyCorrelationSystem::unpack(n, y, initial.t + t))
        .collect())
}

/// Rebuilds `phi_t` from `phi_0` and a source path through the pair walk:
/// `phi_t(x,y) = E[phi_0(X_t)] + int_0^t E[gsrc_{t-s}(X_s)] ds`, where the
/// source lives on the near-diagonal lines. `g_path[j]` must be the source
/// at time `j t / (len - 1)`. The time integral uses the trapezoidal rule
/// on that grid.
pub fn duhamel_reconstruct(
    phi0: &CorrelationField,
    g_path: &[GSource],
    params: &ChainParams,
    t: f64,
) -> Result<CorrelationField> {
    let n = phi0.n;
    if t == 0.0 {
        return Ok(phi0.clone());
    }
    if g_path.len() < 2 {
        return Err(Error::Dependency("source path needs at least two grid points".into()));
    }
    if g_path.iter().any(|g| g.g.len() != n) {
        return Err(Error::Dependency("source path on a different torus".into()));
    }
    let m = g_path.len() - 1;
    let h = t / m as f64;
    let grid: Vec<f64> = (0..=m).map(|j| j as f64 * h).collect();
    let rates = WalkRates::from(params);
    let mut out = CorrelationField::zeros(n);
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let p0 = WalkDistribution2D::point_mass(n, x, y)?;
            let laws = rw::forward_solve_2d(&p0, &rates, &grid, rw::WALK_TOL)?;
            if laws.len() != grid.len() {
                return Err(Error::Dependency("walk laws missing on the source grid".into()));
            }
            let pt = &laws[m];
            let mut value: f64 = (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .filter(|(a, b)| a != b)
                .map(|(a, b)| pt.prob(a, b) * phi0.phi[a * n + b])
                .sum();
            for (j, law) in laws.iter().enumerate() {
                let g = g_path[m - j].g.values();
                let mut src = 0.0;
                for z in 0..n {
                    src += g[z] * law.prob(z, (z + 1) % n) + g[(z + n - 1) % n] * law.prob(z, (z + n - 1) % n);
                }
                let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                value += w * h * src;
            }
            out.phi[x * n + y] = value;
        }
    }
    Ok(out)
}

/// CSV rows `t,x,value` for a site profile over time.
#[must_use]
pub fn profile_csv(times: &[f64], profiles: &[DiscreteField]) -> String {
    let mut s = String::from("t,x,value\n");
    for (t, f) in times.iter().zip(profiles) {
        for (x, v) in f.values().iter().enumerate() {
            let _ = writeln!(s, "{t},{x},{v}");
        }
    }
    s
}

/// CSV rows `t,x,y,value` for the correlation over time.
#[must_use]
pub fn correlation_csv(states: &[MomentState]) -> String {
    let mut s = String::from("t,x,y,value\n");
    for st in states {
        let phi = st.correlation_field();
        let n = phi.n;
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    let _ = writeln!(s, "{},{x},{y},{}", st.t, phi.phi[x * n + y]);
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_is_stationary() {
        let p = ChainParams::new(9, 0.6, 1.0).unwrap();
        let st = MomentState::equilibrium(9, 0.7, 2.0).unwrap();
        assert!(volume_rhs(&st.v, &p).max_abs() < 1e-12);
        assert!(second_moment_rhs(&st, &p).unwrap().iter().all(|d| d.abs() < 1e-9));
        assert!(g_source(&st, &p).g.max_abs() < 1e-12);
    }

    #[test]
    fn alternating_energy_source() {
        let n = 8;
        let alpha = 0.3;
        let p = ChainParams::new(n, alpha, 1.0).unwrap();
        let e: Vec<f64> = (0..n).map(|x| if x % 2 == 0 { 1.0 } else { 2.0 }).collect();
        let mut s = vec![0.0; n * n];
        for x in 0..n {
            s[x * n + x] = e[x];
        }
        let st = MomentState::new(DiscreteField::zeros(n).unwrap(), s, 0.0).unwrap();
        let g = g_source(&st, &p);
        for x in 0..n {
            let expect = alpha * n as f64 * (e[(x + 1) % n] - e[x]);
            assert!((g.g[x] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_is_not_a_correlation() {
        let st = MomentState::equilibrium(6, 0.0, 1.0).unwrap();
        assert!(matches!(st.correlation(2, 2), Err(Error::DiagonalAccess { x: 2 })));
        assert!(matches!(CorrelationField::zeros(6).get(8, 2), Err(Error::DiagonalAccess { .. })));
    }

    #[test]
    fn small_torus_is_rejected() {
        let st = MomentState::equilibrium(4, 0.0, 1.0).unwrap();
        let p = ChainParams::new(5, 0.5, 1.0).unwrap();
        assert!(matches!(second_moment_rhs(&st, &p), Err(Error::StencilWrap { n: 4 })));
    }
}
