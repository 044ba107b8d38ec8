//! Limiting equations on the unit torus, solved in Fourier space:
//!
//! ```text
//! v_t   = v_uu + 2 alpha v_u
//! e_t   = e_uu + 2 alpha (v^2)_u
//! chi_t = chi_uu + 2 (v_u)^2
//! ```
//!
//! `v` is exact mode by mode. The quadratic sources are finite sums of
//! exponentials in time, so their Duhamel integrals are evaluated in
//! closed form as well.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

/// Default number of retained modes on each side of zero.
pub const DEFAULT_MODES: usize = 256;

/// Relative coefficient mass allowed beyond `|k| > M/2`.
pub const TAIL_TOL: f64 = 1e-10;

/// Real profile `f(u) = mean + sum_k a_k cos(2 pi k u) + b_k sin(2 pi k u)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSeries {
    #[serde(default)]
    pub mean: f64,
    /// `(k, a_k)` pairs.
    #[serde(default)]
    pub cos: Vec<(u32, f64)>,
    /// `(k, b_k)` pairs.
    #[serde(default)]
    pub sin: Vec<(u32, f64)>,
}

impl FourierSeries {
    #[must_use]
    pub fn constant(c: f64) -> Self {
        Self {
            mean: c,
            ..Self::default()
        }
    }

    #[must_use]
    pub fn eval(&self, u: f64) -> f64 {
        let w = 2.0 * PI * u;
        self.mean
            + self.cos.iter().map(|&(k, a)| a * (w * f64::from(k)).cos()).sum::<f64>()
            + self.sin.iter().map(|&(k, b)| b * (w * f64::from(k)).sin()).sum::<f64>()
    }

    #[must_use]
    pub fn max_mode(&self) -> usize {
        self.cos.iter().chain(&self.sin).map(|&(k, _)| k as usize).max().unwrap_or(0)
    }
}

/// Complex coefficients `c_k`, `|k| <= M`, of a real field
/// `f(u) = sum_k c_k e^{2 pi i k u}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    m: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralProfile {
    #[must_use]
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * m + 1],
        }
    }

    pub fn from_series(series: &FourierSeries, m: usize) -> Result<Self> {
        if series.max_mode() > m {
            return Err(Error::Resolution { tail: 1.0, m });
        }
        let mut p = Self::zeros(m);
        p.coeffs[m] = Complex64::new(series.mean, 0.0);
        for &(k, a) in &series.cos {
            if k == 0 {
                p.coeffs[m] += a;
                continue;
            }
            p.add_real_mode(k as usize, Complex64::new(a / 2.0, 0.0));
        }
        for &(k, b) in &series.sin {
            if k > 0 {
                p.add_real_mode(k as usize, Complex64::new(0.0, -b / 2.0));
            }
        }
        Ok(p)
    }

    /// Adds `c e^{2 pi i k u} + conj(c) e^{-2 pi i k u}`.
    fn add_real_mode(&mut self, k: usize, c: Complex64) {
        self.coeffs[self.m + k] += c;
        self.coeffs[self.m - k] += c.conj();
    }

    #[must_use]
    pub fn modes(&self) -> usize {
        self.m
    }

    #[must_use]
    pub fn coeff(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.m {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(k + self.m as i64) as usize]
    }

    fn nonzero(&self) -> Vec<(i64, Complex64)> {
        let m = self.m as i64;
        (-m..=m).map(|k| (k, self.coeff(k))).filter(|(_, c)| c.norm() > 0.0).collect()
    }

    #[must_use]
    pub fn eval(&self, u: f64) -> f64 {
        let w = 2.0 * PI * u;
        let mut acc = self.coeffs[self.m].re;
        for k in 1..=self.m {
            let c = self.coeffs[self.m + k];
            if c.norm() > 0.0 {
                // c e^{iwk} + conj(c) e^{-iwk} = 2 Re(c e^{iwk})
                acc += 2.0 * (c * Complex64::from_polar(1.0, w * k as f64)).re;
            }
        }
        acc
    }

    /// Values at the lattice points `x/N`.
    #[must_use]
    pub fn sample(&self, n: usize) -> Vec<f64> {
        (0..n).map(|x| self.eval(x as f64 / n as f64)).collect()
    }

    /// `int_0^1 f du`.
    #[must_use]
    pub fn mean(&self) -> f64 {
        self.coeffs[self.m].re
    }

    /// `int_0^1 f g du`.
    #[must_use]
    pub fn inner(&self, other: &Self) -> f64 {
        let m = self.m.min(other.m) as i64;
        (-m..=m).map(|k| (self.coeff(k) * other.coeff(k).conj()).re).sum()
    }

    #[must_use]
    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    #[must_use]
    pub fn derivative(&self) -> Self {
        let m = self.m as i64;
        let coeffs = (-m..=m)
            .map(|k| self.coeff(k) * Complex64::new(0.0, 2.0 * PI * k as f64))
            .collect();
        Self { m: self.m, coeffs }
    }

    /// The translate `u -> f(u + s)`, applied as a phase per mode.
    #[must_use]
    pub fn translated(&self, s: f64) -> Self {
        let s = s.rem_euclid(1.0);
        let m = self.m as i64;
        let coeffs = (-m..=m)
            .map(|k| self.coeff(k) * Complex64::from_polar(1.0, 2.0 * PI * (k as f64) * s))
            .collect();
        Self { m: self.m, coeffs }
    }

    /// Pointwise product, truncated to `m` modes per side.
    #[must_use]
    pub fn product(&self, other: &Self, m: usize) -> Self {
        let mut out = Self::zeros(m);
        let a = self.nonzero();
        let b = other.nonzero();
        for &(j, cj) in &a {
            for &(l, cl) in &b {
                let k = j + l;
                if k.unsigned_abs() as usize <= m {
                    out.coeffs[(k + m as i64) as usize] += cj * cl;
                }
            }
        }
        out
    }

    /// `sum_{|k| > M/2} |c_k| / sum_k |c_k|`.
    #[must_use]
    pub fn tail_fraction(&self) -> f64 {
        let total: f64 = self.coeffs.iter().map(|c| c.norm()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let half = (self.m / 2) as i64;
        let m = self.m as i64;
        let tail: f64 = (-m..=m).filter(|k| k.abs() > half).map(|k| self.coeff(k).norm()).sum();
        tail / total
    }

    fn check_tail(&self) -> Result<()> {
        let tail = self.tail_fraction();
        if tail > TAIL_TOL {
            return Err(Error::Resolution { tail, m: self.m });
        }
        Ok(())
    }

    pub fn linear_combination(a: f64, f: &Self, b: f64, g: &Self) -> Result<Self> {
        if f.m != g.m {
            return Err(invalid("profile", "mode cutoffs differ"));
        }
        Ok(Self {
            m: f.m,
            coeffs: f.coeffs.iter().zip(&g.coeffs).map(|(x, y)| a * x + b * y).collect(),
        })
    }
}

/// Solutions at a list of times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePath {
    pub times: Vec<f64>,
    pub profiles: Vec<SpectralProfile>,
}

impl ProfilePath {
    /// CSV `t,u,value` on the grid `u = i / points`.
    #[must_use]
    pub fn csv(&self, points: usize) -> String {
        let mut s = String::from("t,u,value\n");
        for (t, p) in self.times.iter().zip(&self.profiles) {
            for i in 0..points {
                let u = i as f64 / points as f64;
                let _ = writeln!(s, "{t},{u},{}", p.eval(u));
            }
        }
        s
    }
}

/// Growth rate of mode `k` of the volume: `-4 pi^2 k^2 + 4 pi i alpha k`.
fn volume_rate(k: i64, alpha: f64) -> Complex64 {
    let kf = k as f64;
    Complex64::new(-4.0 * PI * PI * kf * kf, 4.0 * PI * alpha * kf)
}

fn heat_rate(k: i64) -> f64 {
    -4.0 * PI * PI * (k * k) as f64
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(invalid("times", "must be finite and >= 0"));
    }
    Ok(())
}

pub fn solve_volume(v0: &SpectralProfile, alpha: f64, times: &[f64]) -> Result<ProfilePath> {
    check_times(times)?;
    let m = v0.m as i64;
    let profiles = times
        .iter()
        .map(|&t| SpectralProfile {
            m: v0.m,
            coeffs: (-m..=m).map(|k| v0.coeff(k) * (volume_rate(k, alpha) * t).exp()).collect(),
        })
        .collect();
    Ok(ProfilePath {
        times: times.to_vec(),
        profiles,
    })
}

/// `int_0^t e^{mu (t - s)} e^{nu s} ds` for real `mu` and complex `nu`.
fn duhamel_weight(mu: f64, nu: Complex64, t: f64) -> Complex64 {
    let z = (nu - mu) * t;
    if z.norm() < 1e-2 {
        // e^{mu t} t (e^z - 1)/z by its Taylor series
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for j in 2..9 {
            term *= z / j as f64;
            sum += term;
        }
        (mu * t).exp() * t * sum
    } else {
        ((nu * t).exp() - (mu * t).exp()) / (nu - mu)
    }
}

/// Heat flow of `f0` plus the Duhamel integral of a quadratic source
/// `sum_{j,l} w(j,l) c_j c_l e^{(lam_j + lam_l) s}` placed on mode `j + l`.
fn heat_with_quadratic_source(
    f0: &SpectralProfile,
    v0: &SpectralProfile,
    alpha: f64,
    times: &[f64],
    weight: impl Fn(i64, i64) -> Complex64,
) -> Result<ProfilePath> {
    check_times(times)?;
    if f0.m != v0.m {
        return Err(invalid("profile", "mode cutoffs of the two profiles differ"));
    }
    let m = f0.m as i64;
    let vmodes = v0.nonzero();
    let kmax = vmodes.iter().map(|(k, _)| k.abs()).max().unwrap_or(0);
    if 2 * kmax > m {
        let tail = 1.0;
        return Err(Error::Resolution { tail, m: f0.m });
    }
    f0.check_tail()?;
    let mut profiles = Vec::with_capacity(times.len());
    for &t in times {
        let mut out = SpectralProfile::zeros(f0.m);
        for k in -m..=m {
            out.coeffs[(k + m) as usize] = f0.coeff(k) * (heat_rate(k) * t).exp();
        }
        for &(j, cj) in &vmodes {
            for &(l, cl) in &vmodes {
                let k = j + l;
                let w = weight(j, l);
                if w.norm() == 0.0 {
                    continue;
                }
                let nu = volume_rate(j, alpha) + volume_rate(l, alpha);
                out.coeffs[(k + m) as usize] += w * cj * cl * duhamel_weight(heat_rate(k), nu, t);
            }
        }
        out.check_tail()?;
        profiles.push(out);
    }
    Ok(ProfilePath {
        times: times.to_vec(),
        profiles,
    })
}

/// Energy profile driven by the volume started from `v0`.
pub fn solve_energy(e0: &SpectralProfile, v0: &SpectralProfile, alpha: f64, times: &[f64]) -> Result<ProfilePath> {
    // 2 alpha d/du (v^2): mode k = j + l picks up 2 alpha (2 pi i k)
    heat_with_quadratic_source(e0, v0, alpha, times, |j, l| {
        Complex64::new(0.0, 2.0 * alpha * 2.0 * PI * (j + l) as f64)
    })
}

/// Local variance `chi = e - v^2`, driven by `2 (v_u)^2`.
pub fn solve_chi(v0: &SpectralProfile, alpha: f64, chi0: &SpectralProfile, times: &[f64]) -> Result<ProfilePath> {
    // (2 pi i j)(2 pi i l) = -4 pi^2 j l
    heat_with_quadratic_source(chi0, v0, alpha, times, |j, l| {
        Complex64::new(2.0 * (-4.0 * PI * PI * (j * l) as f64), 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_mode(a: f64) -> SpectralProfile {
        SpectralProfile::from_series(
            &FourierSeries {
                mean: 0.0,
                cos: vec![(1, a)],
                sin: vec![],
            },
            16,
        )
        .unwrap()
    }

    #[test]
    fn series_round_trip() {
        let s = FourierSeries {
            mean: 0.3,
            cos: vec![(1, 0.5), (3, -0.2)],
            sin: vec![(2, 0.7)],
        };
        let p = SpectralProfile::from_series(&s, 8).unwrap();
        for u in [0.0, 0.17, 0.5, 0.93] {
            assert!((p.eval(u) - s.eval(u)).abs() < 1e-14);
        }
        assert!((p.mean() - 0.3).abs() < 1e-15);
        assert!(SpectralProfile::from_series(&s, 2).is_err());
    }

    #[test]
    fn travelling_heat_mode() {
        let alpha = 0.7;
        let path = solve_volume(&cos_mode(1.0), alpha, &[0.0, 0.01, 0.05]).unwrap();
        for (t, p) in path.times.iter().zip(&path.profiles) {
            for u in [0.0, 0.3, 0.71] {
                let exact = (-4.0 * PI * PI * t).exp() * (2.0 * PI * (u + 2.0 * alpha * t)).cos();
                assert!((p.eval(u) - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn translation_and_derivative() {
        let p = cos_mode(1.0);
        assert!((p.translated(0.25).eval(0.0) - (2.0 * PI * 0.25).cos()).abs() < 1e-14);
        assert!((p.derivative().eval(0.25) + 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn energy_without_volume_is_heat() {
        let e0 = cos_mode(0.4);
        let v0 = SpectralProfile::zeros(16);
        let p = solve_energy(&e0, &v0, 0.5, &[0.02]).unwrap();
        let expect = 0.4 * (-4.0 * PI * PI * 0.02f64).exp();
        assert!((p.profiles[0].eval(0.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn resolution_is_enforced() {
        let v0 = SpectralProfile::from_series(
            &FourierSeries {
                mean: 0.0,
                cos: vec![(5, 1.0)],
                sin: vec![],
            },
            8,
        )
        .unwrap();
        let e0 = SpectralProfile::from_series(&FourierSeries::constant(1.0), 8).unwrap();
        assert!(matches!(solve_energy(&e0, &v0, 0.5, &[0.1]), Err(Error::Resolution { .. })));
    }
}
