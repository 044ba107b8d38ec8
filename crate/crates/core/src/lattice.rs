//! Periodic lattice `{0, ..., N-1}`: discrete derivatives, Fourier
//! transforms and the trigonometric basis used for test functions.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Real field on the discrete torus of size `N >= 3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscreteField {
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(invalid("N", format!("torus size {} < 3", values.len())));
        }
        if let Some(x) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite entry at x={x}")));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new((0..n).map(f).collect())
    }

    /// Samples a function on the unit torus at the grid points `x/N`.
    pub fn sample(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(n, |x| f(x as f64 / n as f64))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[must_use]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[must_use]
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at a site given by any integer, reduced mod N.
    #[must_use]
    pub fn at(&self, x: i64) -> f64 {
        self.values[wrap(x, self.len())]
    }

    #[must_use]
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    #[must_use]
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<usize> for DiscreteField {
    type Output = f64;
    fn index(&self, x: usize) -> &f64 {
        &self.values[x]
    }
}

/// Reduces an integer site index onto `{0, ..., n-1}`.
#[inline]
#[must_use]
pub fn wrap(x: i64, n: usize) -> usize {
    x.rem_euclid(n as i64) as usize
}

// Slice kernels. Periodic neighbours are handled by splitting the sweep
// into the interior run plus the two wrap-around endpoints.

/// `out[x] = f[x+1] - f[x]`.
pub(crate) fn forward_difference_into(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    for ((o, a), b) in out[..n - 1].iter_mut().zip(&f[..n - 1]).zip(&f[1..]) {
        *o = b - a;
    }
    out[n - 1] = f[0] - f[n - 1];
}

/// `out[x] = f[x+1] - f[x-1]`.
pub(crate) fn centered_difference_into(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    out[0] = f[1] - f[n - 1];
    for ((o, a), b) in out[1..n - 1].iter_mut().zip(&f[..n - 2]).zip(&f[2..]) {
        *o = b - a;
    }
    out[n - 1] = f[0] - f[n - 2];
}

/// `out[x] = f[x+1] + f[x-1] - 2 f[x]`.
pub(crate) fn second_difference_into(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    out[0] = f[1] + f[n - 1] - 2.0 * f[0];
    for (x, o) in out[1..n - 1].iter_mut().enumerate() {
        *o = f[x + 2] + f[x] - 2.0 * f[x + 1];
    }
    out[n - 1] = f[0] + f[n - 2] - 2.0 * f[n - 1];
}

fn map_field(f: &DiscreteField, scale: f64, kernel: fn(&[f64], &mut [f64])) -> DiscreteField {
    let mut out = vec![0.0; f.len()];
    kernel(f.values(), &mut out);
    if scale != 1.0 {
        out.iter_mut().for_each(|o| *o *= scale);
    }
    DiscreteField::from_vec_unchecked(out)
}

/// `N (f(x+1) - f(x))`.
#[must_use]
pub fn grad_forward(f: &DiscreteField) -> DiscreteField {
    map_field(f, f.len() as f64, forward_difference_into)
}

/// `(N/2) (f(x+1) - f(x-1))`.
#[must_use]
pub fn grad_centered(f: &DiscreteField) -> DiscreteField {
    map_field(f, f.len() as f64 / 2.0, centered_difference_into)
}

/// Unscaled backward difference `f(x) - f(x-1)`.
#[must_use]
pub fn backward_difference(f: &DiscreteField) -> DiscreteField {
    let n = f.len();
    DiscreteField::from_vec_unchecked((0..n).map(|x| f[x] - f[(x + n - 1) % n]).collect())
}

/// `N^2 (f(x+1) + f(x-1) - 2 f(x))`.
#[must_use]
pub fn laplacian_1d(f: &DiscreteField) -> DiscreteField {
    let n = f.len() as f64;
    map_field(f, n * n, second_difference_into)
}

/// Eigenvalue of `-laplacian_1d` on the Fourier mode `k`: `4 N^2 sin^2(pi k / N)`.
#[must_use]
pub fn laplacian_symbol(n: usize, k: i64) -> f64 {
    let nf = n as f64;
    let s = (PI * k as f64 / nf).sin();
    4.0 * nf * nf * s * s
}

/// Riemann-sum pairing `(1/N) sum_x f(x) g(x)`.
#[must_use]
pub fn riemann_inner(f: &[f64], g: &[f64]) -> f64 {
    assert_eq!(f.len(), g.len(), "fields on different tori");
    f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / f.len() as f64
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward transform `F(k) = sum_x f(x) e^{-2 pi i k x / N}`.
pub fn dft_in_place(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// In-place inverse transform including the `1/N` factor.
pub fn idft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    fft.process(buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= s);
}

#[must_use]
pub fn dft(f: &DiscreteField) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft_in_place(&mut buf);
    buf
}

/// Inverse of [`dft`]; the imaginary residue of a non-Hermitian input is dropped.
pub fn idft(spectrum: &[Complex64]) -> Result<DiscreteField> {
    let mut buf = spectrum.to_vec();
    idft_in_place(&mut buf);
    DiscreteField::new(buf.into_iter().map(|c| c.re).collect())
}

/// Real trigonometric basis on the unit torus: `h_0 = 1`,
/// `h_z = sqrt2 cos(2 pi z u)` for `z > 0` and `sqrt2 sin(2 pi z u)` for `z < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourierBasisFn {
    pub z: i64,
}

impl FourierBasisFn {
    #[must_use]
    pub fn new(z: i64) -> Self {
        Self { z }
    }

    #[must_use]
    pub fn eval(&self, u: f64) -> f64 {
        let arg = 2.0 * PI * self.z as f64 * u;
        match self.z {
            0 => 1.0,
            z if z > 0 => std::f64::consts::SQRT_2 * arg.cos(),
            _ => std::f64::consts::SQRT_2 * arg.sin(),
        }
    }

    /// Eigenvalue of `1 - d^2/du^2`: `1 + 4 pi^2 z^2`.
    #[must_use]
    pub fn gamma(&self) -> f64 {
        1.0 + 4.0 * PI * PI * (self.z * self.z) as f64
    }

    pub fn sample(&self, n: usize) -> Result<DiscreteField> {
        DiscreteField::sample(n, |u| self.eval(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(v: &[f64]) -> DiscreteField {
        DiscreteField::new(v.to_vec()).unwrap()
    }

    #[test]
    fn stencils_on_a_unit_bump() {
        let f = field(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(grad_forward(&f).values(), &[4.0, -4.0, 0.0, 0.0]);
        assert_eq!(grad_centered(&f).values(), &[2.0, 0.0, -2.0, 0.0]);
        assert_eq!(laplacian_1d(&f).values(), &[16.0, -32.0, 16.0, 0.0]);
    }

    #[test]
    fn constants_are_annihilated() {
        let f = field(&[2.5; 7]);
        for g in [grad_forward(&f), grad_centered(&f), laplacian_1d(&f)] {
            assert!(g.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rejects_tiny_or_nonfinite_fields() {
        assert!(DiscreteField::new(vec![1.0, 2.0]).is_err());
        assert!(DiscreteField::new(vec![1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn dft_of_delta_and_constant() {
        let mut d = vec![0.0; 6];
        d[0] = 1.0;
        for c in dft(&field(&d)) {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let s = dft(&field(&[3.0; 5]));
        assert!((s[0].re - 15.0).abs() < 1e-12);
        assert!(s[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn dft_sign_convention() {
        // f(x) = e^{2 pi i x / N} concentrates on k = 1 under e^{-2 pi i k x / N}.
        let n = 8;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|x| Complex64::from_polar(1.0, 2.0 * PI * x as f64 / n as f64))
            .collect();
        dft_in_place(&mut buf);
        assert!((buf[1].re - n as f64).abs() < 1e-12);
        assert!(buf[n - 1].norm() < 1e-12);
    }

    #[test]
    fn basis_gamma_and_parity() {
        assert_eq!(FourierBasisFn::new(0).eval(0.3), 1.0);
        assert!((FourierBasisFn::new(-2).eval(0.0)).abs() < 1e-15);
        assert!((FourierBasisFn::new(1).gamma() - (1.0 + 4.0 * PI * PI)).abs() < 1e-12);
    }
}
