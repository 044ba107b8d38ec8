//! Discrete negative Sobolev norms and fluctuation observables.
//!
//! The kernel is the Green function of `1 - lap` on the torus,
//! `K(x) = (1/N) sum_z cos(2 pi z x / N) / a(z)` with
//! `a(z) = 1 + 4 N^2 sin^2(pi z / N)`. The norm is
//! `||f||^2 = (1/N) sum_{x,y} f(x) K(x-y) f(y)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::chain::ChainParams;
use crate::continuum::SpectralProfile;
use crate::error::{invalid, Error, Result};
use crate::lattice::{self, laplacian_symbol, FourierBasisFn};

/// Tolerance for the kernel identities checked at construction.
pub const KERNEL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelKN {
    n: usize,
    values: Vec<f64>,
}

/// Residuals of the kernel identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelIdentities {
    /// `max_x |K(x) - K(-x)|`.
    pub evenness: f64,
    /// `max_x |(1 - lap) K (x) - delta(x)|`.
    pub green: f64,
    /// `N^2 (K(0) - K(1))`, at most 1/2.
    pub gradient_at_origin: f64,
    /// `max_{1 <= x <= N/2} |N^2 (K(x) - K(x+1)) - (1 - K(0))/2 + sum_{j=1}^{x} K(j)|`.
    pub summation: f64,
    /// `|sum_x K(x) - 1|`.
    pub total_mass: f64,
}

impl KernelIdentities {
    #[must_use]
    pub fn holds(&self, tol: f64) -> bool {
        self.evenness <= tol
            && self.green <= tol
            && self.gradient_at_origin <= 0.5 + tol
            && self.summation <= tol
            && self.total_mass <= tol
    }
}

/// `a(z) = 1 + 4 N^2 sin^2(pi z / N)`.
#[must_use]
pub fn kernel_symbol(n: usize, z: i64) -> f64 {
    1.0 + laplacian_symbol(n, z)
}

impl KernelKN {
    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    #[must_use]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[must_use]
    pub fn at(&self, x: i64) -> f64 {
        self.values[lattice::wrap(x, self.n)]
    }

    #[must_use]
    pub fn identities(&self) -> KernelIdentities {
        let n = self.n;
        let nf = n as f64;
        let k = |x: i64| self.at(x);
        let mut evenness = 0.0f64;
        let mut green = 0.0f64;
        for x in 0..n as i64 {
            evenness = evenness.max((k(x) - k(-x)).abs());
            let lap = nf * nf * (k(x + 1) + k(x - 1) - 2.0 * k(x));
            let delta = if x == 0 { 1.0 } else { 0.0 };
            green = green.max((k(x) - lap - delta).abs());
        }
        let mut summation = 0.0f64;
        let mut partial = 0.0;
        for x in 1..=(n / 2) as i64 {
            partial += k(x);
            let lhs = nf * nf * (k(x) - k(x + 1));
            let rhs = (1.0 - k(0)) / 2.0 - partial;
            summation = summation.max((lhs - rhs).abs());
        }
        KernelIdentities {
            evenness,
            green,
            gradient_at_origin: nf * nf * (k(0) - k(1)),
            summation,
            total_mass: (self.values.iter().sum::<f64>() - 1.0).abs(),
        }
    }

    /// `(K * g)(x) = sum_y K(x - y) g(y)`.
    #[must_use]
    pub fn convolve(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|x| (0..n).map(|y| self.values[(x + n - y) % n] * g[y]).sum())
            .collect()
    }
}

/// Builds the kernel by its Fourier sum and verifies the identities.
pub fn kernel_kn(n: usize) -> Result<KernelKN> {
    if n < 2 {
        return Err(invalid("N", "kernel needs N >= 2"));
    }
    let nf = n as f64;
    let inv_a: Vec<f64> = (0..n as i64).map(|z| 1.0 / kernel_symbol(n, z)).collect();
    let values = (0..n)
        .map(|x| {
            (0..n)
                .map(|z| {
                    // reduce z x mod N before taking the cosine
                    let phase = ((z * x) % n) as f64 / nf;
                    (2.0 * PI * phase).cos() * inv_a[z]
                })
                .sum::<f64>()
                / nf
        })
        .collect();
    let kernel = KernelKN { n, values };
    let id = kernel.identities();
    let checks = [
        ("evenness", id.evenness),
        ("green function", id.green),
        ("summation", id.summation),
        ("total mass", id.total_mass),
    ];
    for (what, err) in checks {
        if err > KERNEL_TOL {
            return Err(Error::KernelInvariant { n, what, err });
        }
    }
    if id.gradient_at_origin > 0.5 + KERNEL_TOL {
        return Err(Error::KernelInvariant {
            n,
            what: "gradient at origin",
            err: id.gradient_at_origin - 0.5,
        });
    }
    Ok(kernel)
}

fn check_len(f: &[f64], k: &KernelKN) -> Result<()> {
    if f.len() != k.n {
        return Err(invalid("f", format!("length {} but kernel has N={}", f.len(), k.n)));
    }
    Ok(())
}

/// `||f||^2_{-1,N}` through the spectrum: `(1/N^2) sum_z |f^(z)|^2 / a(z)`.
pub fn hminus1_norm_sq(f: &[f64], k: &KernelKN) -> Result<f64> {
    check_len(f, k)?;
    let n = k.n;
    let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    lattice::dft_in_place(&mut buf);
    let s: f64 = buf
        .iter()
        .enumerate()
        .map(|(z, c)| c.norm_sqr() / kernel_symbol(n, z as i64))
        .sum::<f64>()
        / (n * n) as f64;
    if s < -1e-12 || !s.is_finite() {
        return Err(Error::Consistency {
            what: "negative H^-1 norm",
            residue: s,
        });
    }
    Ok(s.max(0.0))
}

/// Direct double sum `(1/N) sum_{x,y} f(x) K(x-y) f(y)`.
pub fn hminus1_norm_sq_direct(f: &[f64], k: &KernelKN) -> Result<f64> {
    check_len(f, k)?;
    Ok(kernel_pairing(f, f, k))
}

/// `<f, K * g>` with the normalised pairing `(1/N) sum_x`.
#[must_use]
pub fn kernel_pairing(f: &[f64], g: &[f64], k: &KernelKN) -> f64 {
    lattice::riemann_inner(f, &k.convolve(g))
}

/// `((1/N) sum eta^4, ||eta^2||^2_{-1,N})`.
pub fn fourth_moment_functional(eta: &[f64], k: &KernelKN) -> Result<(f64, f64)> {
    check_len(eta, k)?;
    let sq: Vec<f64> = eta.iter().map(|e| e * e).collect();
    let m4 = sq.iter().map(|s| s * s).sum::<f64>() / eta.len() as f64;
    Ok((m4, hminus1_norm_sq(&sq, k)?))
}

/// Direction of the moving frame used for fluctuation fields.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Test function read at `x/N + f_N t / N`: follows the transport of
    /// the flow, which carries profiles towards decreasing `x`.
    #[default]
    WithFlow,
    /// The opposite shift `x/N - f_N t / N`.
    AgainstFlow,
}

impl Frame {
    /// Macroscopic shift of the test function at time `t`.
    #[must_use]
    pub fn shift(self, params: &ChainParams, t: f64) -> f64 {
        let s = params.frame_velocity() * t / params.n() as f64;
        match self {
            Frame::WithFlow => s,
            Frame::AgainstFlow => -s,
        }
    }

    #[must_use]
    pub fn opposite(self) -> Self {
        match self {
            Frame::WithFlow => Frame::AgainstFlow,
            Frame::AgainstFlow => Frame::WithFlow,
        }
    }
}

/// Test function at the lattice points in the moving frame at time `t`.
#[must_use]
pub fn frame_samples(g: &SpectralProfile, params: &ChainParams, t: f64, frame: Frame) -> Vec<f64> {
    g.translated(frame.shift(params, t)).sample(params.n())
}

/// `N^{-1/2} sum_x (eta(x) - v(x)) G(x/N + shift(t))`.
pub fn fluctuation_field(
    eta: &[f64],
    t: f64,
    v: &[f64],
    g: &SpectralProfile,
    params: &ChainParams,
    frame: Frame,
) -> Result<f64> {
    let n = params.n();
    if eta.len() != n || v.len() != n {
        return Err(invalid("eta", "configuration, mean profile and params disagree on N"));
    }
    let h = frame_samples(g, params, t, frame);
    Ok(fluctuation_with_samples(eta, v, &h))
}

#[must_use]
pub fn fluctuation_with_samples(eta: &[f64], v: &[f64], h: &[f64]) -> f64 {
    let n = eta.len() as f64;
    eta.iter()
        .zip(v)
        .zip(h)
        .map(|((e, v), h)| (e - v) * h)
        .sum::<f64>()
        / n.sqrt()
}

/// Equilibrium (`beta = 1`) covariance between the field at time `t` and
/// at time 0, and the same quantity with transport switched off.
fn frame_covariances(g: &SpectralProfile, params: &ChainParams, t: f64, frame: Frame) -> (f64, f64) {
    let n = params.n();
    let h0 = g.sample(n);
    let ht = frame_samples(g, params, t, frame);
    let mut spec: Vec<Complex64> = h0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    lattice::dft_in_place(&mut spec);
    let mut diffusive = spec.clone();
    let a = params.flow_strength();
    for (k, (c, d)) in spec.iter_mut().zip(diffusive.iter_mut()).enumerate() {
        let decay = (-laplacian_symbol(n, k as i64) * t).exp();
        let turn = 2.0 * a * (2.0 * PI * k as f64 / n as f64).sin() * t;
        *c *= Complex64::from_polar(decay, turn);
        *d *= decay;
    }
    lattice::idft_in_place(&mut spec);
    lattice::idft_in_place(&mut diffusive);
    let moved: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let still: Vec<f64> = diffusive.iter().map(|c| c.re).collect();
    (lattice::riemann_inner(&ht, &moved), lattice::riemann_inner(&h0, &still))
}

/// Drift of the equilibrium two-time covariance away from pure diffusion,
/// for each frame direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameCheck {
    pub with_flow: f64,
    pub against_flow: f64,
}

impl FrameCheck {
    #[must_use]
    pub fn preferred(&self) -> Frame {
        if self.with_flow <= self.against_flow {
            Frame::WithFlow
        } else {
            Frame::AgainstFlow
        }
    }
}

#[must_use]
pub fn frame_check(g: &SpectralProfile, params: &ChainParams, t: f64) -> FrameCheck {
    let drift = |f| {
        let (c, reference) = frame_covariances(g, params, t, f);
        (c - reference).abs()
    };
    FrameCheck {
        with_flow: drift(Frame::WithFlow),
        against_flow: drift(Frame::AgainstFlow),
    }
}

/// Squared discrete gradients of the frame-shifted test function, one row
/// per quadrature time.
#[derive(Clone, Debug, PartialEq)]
pub struct QvWeights {
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl QvWeights {
    #[must_use]
    pub fn new(g: &SpectralProfile, params: &ChainParams, times: &[f64], frame: Frame) -> Self {
        let n = params.n();
        let rows = times
            .iter()
            .map(|&t| {
                let h = frame_samples(g, params, t, frame);
                (0..n)
                    .map(|x| {
                        let d = n as f64 * (h[(x + 1) % n] - h[x]);
                        d * d
                    })
                    .collect()
            })
            .collect();
        Self {
            times: times.to_vec(),
            rows,
        }
    }

    /// Keeps every `step`-th quadrature time.
    #[must_use]
    pub fn subsample(&self, step: usize) -> Self {
        Self {
            times: self.times.iter().step_by(step).copied().collect(),
            rows: self.rows.iter().step_by(step).cloned().collect(),
        }
    }
}

/// `(1/N) sum_x (eta(x+1) - eta(x))^2 w(x)`.
#[must_use]
pub fn qv_integrand(eta: &[f64], w: &[f64]) -> f64 {
    let n = eta.len();
    (0..n)
        .map(|x| {
            let d = eta[(x + 1) % n] - eta[x];
            d * d * w[x]
        })
        .sum::<f64>()
        / n as f64
}

/// Cumulative trapezoidal quadratic variation at the weight times.
/// `snapshots[j]` is the configuration at `weights.times[j]`.
pub fn qv_estimator(snapshots: &[&[f64]], weights: &QvWeights) -> Result<Vec<f64>> {
    if snapshots.len() != weights.times.len() {
        return Err(invalid("snapshots", "one configuration per quadrature time is required"));
    }
    let mut out = Vec::with_capacity(snapshots.len());
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for ((eta, w), &t) in snapshots.iter().zip(&weights.rows).zip(&weights.times) {
        let f = qv_integrand(eta, w);
        if let Some((t0, f0)) = prev {
            acc += 0.5 * (t - t0) * (f + f0);
        }
        prev = Some((t, f));
        out.push(acc);
    }
    Ok(out)
}

/// `(1/N) sum_x f(x) h_z(x/N)`.
#[must_use]
pub fn basis_pairing(f: &[f64], z: i64) -> f64 {
    let n = f.len();
    let h = FourierBasisFn::new(z);
    f.iter()
        .enumerate()
        .map(|(x, v)| v * h.eval(x as f64 / n as f64))
        .sum::<f64>()
        / n as f64
}

/// Truncated `H^{-m}` norm and the size of the first omitted term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmNorm {
    pub value: f64,
    pub tail_bound: f64,
}

/// `sum_{|z| <= cutoff} gamma_z^{-m} <field, h_z>^2` from pairings `(z, <field, h_z>)`.
pub fn hminusm_norm_sq(pairings: &[(i64, f64)], m: f64, cutoff: i64) -> Result<HmNorm> {
    if !(m > 0.0) || cutoff < 1 {
        return Err(invalid("m", "need m > 0 and cutoff >= 1"));
    }
    let mut value = 0.0;
    let mut max_pair = 0.0f64;
    for &(z, p) in pairings {
        if z.abs() <= cutoff {
            value += FourierBasisFn::new(z).gamma().powf(-m) * p * p;
            max_pair = max_pair.max(p.abs());
        }
    }
    let tail_bound = FourierBasisFn::new(cutoff).gamma().powf(-m) * max_pair * max_pair;
    Ok(HmNorm { value, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_kernel() {
        let k = kernel_kn(2).unwrap();
        assert!((k.values()[0] - 9.0 / 17.0).abs() < 1e-15);
        assert!((k.values()[1] - 8.0 / 17.0).abs() < 1e-15);
    }

    #[test]
    fn zero_and_constant_norms() {
        let k = kernel_kn(12).unwrap();
        assert_eq!(hminus1_norm_sq(&[0.0; 12], &k).unwrap(), 0.0);
        let c = 1.7;
        let v = hminus1_norm_sq(&[c; 12], &k).unwrap();
        assert!((v - c * c).abs() < 1e-12);
        assert!((hminus1_norm_sq_direct(&[c; 12], &k).unwrap() - c * c).abs() < 1e-12);
    }

    #[test]
    fn hm_norm_of_single_mode() {
        let r = hminusm_norm_sq(&[(0, 0.0), (1, 1.0), (-1, 0.0)], 3.0, 5).unwrap();
        assert!((r.value - FourierBasisFn::new(1).gamma().powi(-3)).abs() < 1e-18);
        assert!(hminusm_norm_sq(&[(1, 1.0)], 0.0, 5).is_err());
    }

    #[test]
    fn qv_of_constant_test_function_vanishes() {
        let p = ChainParams::new(8, 0.5, 1.0).unwrap();
        let g = SpectralProfile::from_series(&crate::continuum::FourierSeries::constant(2.0), 4).unwrap();
        let w = QvWeights::new(&g, &p, &[0.0, 0.1], Frame::WithFlow);
        let eta: Vec<f64> = (0..8).map(|x| x as f64).collect();
        let qv = qv_estimator(&[&eta, &eta], &w).unwrap();
        assert_eq!(qv, vec![0.0, 0.0]);
    }
}
