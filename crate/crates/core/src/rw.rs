//! Random walks behind the correlation estimates: the walk on pairs of
//! distinct sites with reflected moves next to the diagonal, its projection
//! onto the distance `y - x mod N`, occupation times of the near-diagonal
//! lines, and the heat kernel of the symmetric walk on the torus.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::chain::ChainParams;
use crate::error::{invalid, Error, Result};
use crate::lattice::laplacian_symbol;
use crate::ode::{self, Rhs};

/// Jump rates of the pair walk: `N^2 (1 + alpha_N)` up/right and
/// `N^2 (1 - alpha_N)` left/down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkRates {
    n: usize,
    alpha_n: f64,
}

impl WalkRates {
    pub fn new(n: usize, alpha_n: f64) -> Result<Self> {
        if n < 3 {
            return Err(invalid("N", format!("walk needs N >= 3, got {n}")));
        }
        if !(alpha_n >= 0.0) {
            return Err(invalid("alpha_N", format!("{alpha_n} is negative")));
        }
        if alpha_n >= 1.0 {
            return Err(Error::NegativeRate { alpha_n });
        }
        Ok(Self { n, alpha_n })
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    #[must_use]
    pub fn alpha_n(&self) -> f64 {
        self.alpha_n
    }

    fn up(&self) -> f64 {
        (self.n * self.n) as f64 * (1.0 + self.alpha_n)
    }

    fn down(&self) -> f64 {
        (self.n * self.n) as f64 * (1.0 - self.alpha_n)
    }

    /// Largest RK4 step used for the forward equations.
    #[must_use]
    pub fn max_step(&self) -> f64 {
        0.2 / (4.0 * (self.n * self.n) as f64 * (1.0 + self.alpha_n))
    }
}

impl From<&ChainParams> for WalkRates {
    fn from(p: &ChainParams) -> Self {
        Self {
            n: p.n(),
            alpha_n: p.alpha_n(),
        }
    }
}

/// Flat index of the pair `(x, x + r)` with `r` in `1..N`.
#[inline]
#[must_use]
pub fn pair_index(n: usize, x: usize, r: usize) -> usize {
    x * (n - 1) + (r - 1)
}

/// Flat index of the ordered pair `(x, y)`, `x != y mod N`.
#[must_use]
pub fn pair_index_xy(n: usize, x: usize, y: usize) -> Option<usize> {
    let r = (y + n - x % n) % n;
    (r != 0).then(|| pair_index(n, x % n, r))
}

/// Inverse of [`pair_index`]: returns `(x, y)`.
#[must_use]
pub fn pair_from_index(n: usize, i: usize) -> (usize, usize) {
    let x = i / (n - 1);
    let r = i % (n - 1) + 1;
    (x, (x + r) % n)
}

fn check_probability(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if (sum - 1.0).abs() > 1e-9 || min < -1e-12 || !sum.is_finite() {
        return Err(invalid("p", format!("not a probability vector (sum {sum}, min {min})")));
    }
    Ok(())
}

/// Law of the pair walk on `{(x, y): x != y}`, stored by `(x, r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkDistribution2D {
    pub n: usize,
    pub p: Vec<f64>,
    pub t: f64,
}

impl WalkDistribution2D {
    pub fn new(n: usize, p: Vec<f64>, t: f64) -> Result<Self> {
        if n < 3 || p.len() != n * (n - 1) {
            return Err(invalid("p", format!("expected {} entries for N={n}", n * n.saturating_sub(1))));
        }
        check_probability(&p)?;
        Ok(Self { n, p, t })
    }

    pub fn point_mass(n: usize, x: usize, y: usize) -> Result<Self> {
        let i = pair_index_xy(n, x, y).ok_or(Error::DiagonalAccess { x })?;
        let mut p = vec![0.0; n * (n - 1)];
        p[i] = 1.0;
        Self::new(n, p, 0.0)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let m = n * (n - 1);
        Self::new(n, vec![1.0 / m as f64; m], 0.0)
    }

    #[must_use]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        pair_index_xy(self.n, x, y).map_or(0.0, |i| self.p[i])
    }
}

/// Law of the distance walk on `{1, ..., N-1}`; entry `r-1` holds state `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkDistribution1D {
    pub n: usize,
    pub q: Vec<f64>,
    pub t: f64,
}

impl WalkDistribution1D {
    pub fn new(n: usize, q: Vec<f64>, t: f64) -> Result<Self> {
        if n < 3 || q.len() != n - 1 {
            return Err(invalid("q", format!("expected {} entries for N={n}", n.saturating_sub(1))));
        }
        check_probability(&q)?;
        Ok(Self { n, q, t })
    }

    pub fn point_mass(n: usize, r: usize) -> Result<Self> {
        if !(1..n).contains(&r) {
            return Err(invalid("r0", format!("{r} outside 1..{n}")));
        }
        let mut q = vec![0.0; n - 1];
        q[r - 1] = 1.0;
        Self::new(n, q, 0.0)
    }

    /// Mass on the two boundary states `r = 1` and `r = N-1`.
    #[must_use]
    pub fn boundary_mass(&self) -> f64 {
        boundary_mass(&self.q)
    }
}

fn boundary_mass(q: &[f64]) -> f64 {
    if q.len() == 1 {
        q[0]
    } else {
        q[0] + q[q.len() - 1]
    }
}

/// Forward (Kolmogorov) derivative of a pair-walk law, written into `out`.
fn pair_forward(rates: &WalkRates, p: &[f64], out: &mut [f64]) {
    let n = rates.n;
    let (up, down) = (rates.up(), rates.down());
    let total = up + down;
    out.iter_mut().for_each(|o| *o = 0.0);
    for x in 0..n {
        let xp = if x + 1 == n { 0 } else { x + 1 };
        let xm = if x == 0 { n - 1 } else { x - 1 };
        for r in 1..n {
            let m = p[pair_index(n, x, r)];
            if m == 0.0 {
                continue;
            }
            let i = pair_index(n, x, r);
            if r == 1 {
                // (x, x+2) and (x-1, x+1)
                out[i] -= total * m;
                out[pair_index(n, x, 2.min(n - 1))] += up * m;
                out[pair_index(n, xm, 2.min(n - 1))] += down * m;
            } else if r == n - 1 {
                // (x+1, x-1) and (x, x-2)
                out[i] -= total * m;
                out[pair_index(n, xp, n - 2)] += up * m;
                out[pair_index(n, x, n - 2)] += down * m;
            } else {
                out[i] -= 2.0 * total * m;
                out[pair_index(n, xp, r - 1)] += up * m;
                out[pair_index(n, x, r + 1)] += up * m;
                out[pair_index(n, xm, r + 1)] += down * m;
                out[pair_index(n, x, r - 1)] += down * m;
            }
        }
    }
}

struct PairWalk(WalkRates);

impl Rhs for PairWalk {
    fn dim(&self) -> usize {
        self.0.n * (self.0.n - 1)
    }
    fn eval(&self, y: &[f64], out: &mut [f64]) {
        pair_forward(&self.0, y, out);
    }
}

/// Time derivative of the law `p` under the pair walk.
#[must_use]
pub fn generator_2d(p: &WalkDistribution2D, rates: &WalkRates) -> Vec<f64> {
    assert_eq!(p.n, rates.n, "distribution and rates on different tori");
    let mut out = vec![0.0; p.p.len()];
    pair_forward(rates, &p.p, &mut out);
    out
}

/// Default agreement between successive step halvings for walk laws.
pub const WALK_TOL: f64 = 1e-12;

/// Forward equation of the pair walk from `p0`, snapshots at `schedule`
/// (times measured from `p0.t`).
pub fn forward_solve_2d(
    p0: &WalkDistribution2D,
    rates: &WalkRates,
    schedule: &[f64],
    tol: f64,
) -> Result<Vec<WalkDistribution2D>> {
    if p0.n != rates.n {
        return Err(invalid("p0", "distribution and rates on different tori"));
    }
    let sol = ode::integrate_adaptive(&PairWalk(*rates), &p0.p, schedule, rates.max_step(), tol, 1e-12)?;
    Ok(sol
        .states
        .into_iter()
        .zip(schedule)
        .map(|(p, &t)| WalkDistribution2D { n: p0.n, p, t: p0.t + t })
        .collect())
}

/// Law of `y - x mod N` under a pair-walk law.
#[must_use]
pub fn project_to_1d(p: &WalkDistribution2D) -> WalkDistribution1D {
    let n = p.n;
    let mut q = vec![0.0; n - 1];
    for row in p.p.chunks_exact(n - 1) {
        for (acc, v) in q.iter_mut().zip(row) {
            *acc += v;
        }
    }
    WalkDistribution1D { n, q, t: p.t }
}

/// Forward derivative of the distance walk: rate `2N^2` each way in the
/// bulk, pushed inward only from `r = 1` and `r = N-1`.
fn distance_forward(n: usize, q: &[f64], out: &mut [f64]) {
    let c = 2.0 * (n * n) as f64;
    let m = n - 1;
    out.iter_mut().for_each(|o| *o = 0.0);
    if m == 2 {
        out[0] = c * (q[1] - q[0]);
        out[1] = -out[0];
        return;
    }
    for i in 0..m {
        let boundary = i == 0 || i == m - 1;
        out[i] -= if boundary { c } else { 2.0 * c } * q[i];
        if i > 0 {
            out[i - 1] += c * q[i];
        }
        if i + 1 < m {
            out[i + 1] += c * q[i];
        }
    }
}

struct DistanceWalk(usize);

impl Rhs for DistanceWalk {
    fn dim(&self) -> usize {
        self.0 - 1
    }
    fn eval(&self, y: &[f64], out: &mut [f64]) {
        distance_forward(self.0, y, out);
    }
}

#[must_use]
pub fn generator_1d(q: &WalkDistribution1D) -> Vec<f64> {
    let mut out = vec![0.0; q.q.len()];
    distance_forward(q.n, &q.q, &mut out);
    out
}

fn distance_step(n: usize) -> f64 {
    0.2 / (4.0 * (n * n) as f64)
}

pub fn forward_solve_1d(q0: &WalkDistribution1D, schedule: &[f64], tol: f64) -> Result<Vec<WalkDistribution1D>> {
    let sol = ode::integrate_adaptive(&DistanceWalk(q0.n), &q0.q, schedule, distance_step(q0.n), tol, 1e-12)?;
    Ok(sol
        .states
        .into_iter()
        .zip(schedule)
        .map(|(q, &t)| WalkDistribution1D { n: q0.n, q, t: q0.t + t })
        .collect())
}

/// Expected time in `[0, horizon]` that the distance walk started at `r0`
/// spends on `{1, N-1}`, by the trapezoidal rule on the RK4 step grid.
/// The step is halved until the estimate changes by less than `rel_tol`.
pub fn local_time(n: usize, r0: usize, horizon: f64, rel_tol: f64) -> Result<f64> {
    let q0 = WalkDistribution1D::point_mass(n, r0)?;
    if !(horizon >= 0.0) {
        return Err(invalid("horizon", "must be >= 0"));
    }
    if horizon == 0.0 {
        return Ok(0.0);
    }
    let estimate = |dt: f64| -> Result<f64> {
        let mut acc = 0.0;
        let mut last: Option<(f64, f64)> = None;
        ode::integrate(&DistanceWalk(n), &q0.q, &[horizon], dt, |t, q| {
            let b = boundary_mass(q);
            if let Some((t0, b0)) = last {
                acc += 0.5 * (t - t0) * (b + b0);
            }
            last = Some((t, b));
        })?;
        Ok(acc)
    };
    let mut dt = distance_step(n);
    let mut prev = estimate(dt)?;
    loop {
        dt /= 2.0;
        let next = estimate(dt)?;
        let change = (next - prev).abs() / next.abs().max(f64::MIN_POSITIVE);
        if change < rel_tol {
            return Ok(next);
        }
        if dt < 1e-9 {
            return Err(Error::IntegratorFailure {
                achieved: change,
                tol: rel_tol,
                dt,
            });
        }
        prev = next;
    }
}

/// Transition probability `p_t^x(y)` of the symmetric walk on the torus
/// with rate `N^2` to each neighbour, by its Fourier series.
pub fn srw_transition(x: usize, y: usize, t: f64, n: usize) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid("t", "must be >= 0"));
    }
    let d = x as f64 - y as f64;
    let s: Complex64 = (0..n as i64)
        .map(|k| {
            Complex64::from_polar(
                (-laplacian_symbol(n, k) * t).exp(),
                -2.0 * PI * k as f64 * d / n as f64,
            )
        })
        .sum::<Complex64>()
        / n as f64;
    if s.im.abs() > 1e-10 {
        return Err(Error::Consistency {
            what: "imaginary part of a transition probability",
            residue: s.im.abs(),
        });
    }
    Ok(s.re)
}

/// The whole row `y -> p_t^0(y)` (the kernel is translation invariant).
fn srw_row(t: f64, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|y| srw_transition(0, y, t, n)).collect()
}

/// Scaled derivative suprema of the symmetric-walk heat kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub n: usize,
    /// `(t, N t^{3/2} max|lap p_t|, N t max|grad p_t|)` per grid time.
    pub rows: Vec<(f64, f64, f64)>,
    pub laplacian_sup: f64,
    pub gradient_sup: f64,
}

pub fn srw_derivative_bounds(n: usize, t_grid: &[f64]) -> Result<DerivativeBounds> {
    if n < 3 {
        return Err(invalid("N", "need N >= 3"));
    }
    let nf = n as f64;
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(invalid("t_grid", "times must be > 0"));
        }
        let p = srw_row(t, n)?;
        let mut lap = 0.0f64;
        let mut grad = 0.0f64;
        for y in 0..n {
            let (ym, yp) = ((y + n - 1) % n, (y + 1) % n);
            lap = lap.max((nf * nf * (p[yp] + p[ym] - 2.0 * p[y])).abs());
            grad = grad.max((nf * (p[yp] - p[y])).abs());
        }
        rows.push((t, nf * t.powf(1.5) * lap, nf * t * grad));
    }
    let laplacian_sup = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let gradient_sup = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok(DerivativeBounds {
        n,
        rows,
        laplacian_sup,
        gradient_sup,
    })
}

/// `count` log-spaced times from `lo` to `hi` inclusive.
#[must_use]
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_indexing_round_trips() {
        let n = 7;
        for i in 0..n * (n - 1) {
            let (x, y) = pair_from_index(n, i);
            assert_eq!(pair_index_xy(n, x, y), Some(i));
        }
        assert_eq!(pair_index_xy(n, 3, 3), None);
    }

    #[test]
    fn bulk_and_boundary_stencils() {
        let n = 5;
        let rates = WalkRates::new(n, 0.3).unwrap();
        let n2 = 25.0;
        let d = generator_2d(&WalkDistribution2D::point_mass(n, 0, 2).unwrap(), &rates);
        assert!((d[pair_index_xy(n, 0, 2).unwrap()] + 4.0 * n2).abs() < 1e-12);
        assert!((d[pair_index_xy(n, 1, 2).unwrap()] - 1.3 * n2).abs() < 1e-12);
        assert!((d[pair_index_xy(n, 0, 3).unwrap()] - 1.3 * n2).abs() < 1e-12);
        assert!((d[pair_index_xy(n, 4, 2).unwrap()] - 0.7 * n2).abs() < 1e-12);
        assert!((d[pair_index_xy(n, 0, 1).unwrap()] - 0.7 * n2).abs() < 1e-12);

        let d = generator_2d(&WalkDistribution2D::point_mass(n, 0, 1).unwrap(), &rates);
        let support: Vec<usize> = (0..d.len()).filter(|&i| d[i] > 0.0).collect();
        assert_eq!(support.len(), 2);
        assert!((d[pair_index_xy(n, 0, 2).unwrap()] - 1.3 * n2).abs() < 1e-12);
        assert!((d[pair_index_xy(n, 4, 1).unwrap()] - 0.7 * n2).abs() < 1e-12);
        assert!(d.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn rejects_negative_rates() {
        assert!(matches!(WalkRates::new(8, 1.0), Err(Error::NegativeRate { .. })));
    }

    #[test]
    fn three_site_distance_walk() {
        let q = WalkDistribution1D::point_mass(3, 1).unwrap();
        assert_eq!(generator_1d(&q), vec![-18.0, 18.0]);
        let q = forward_solve_1d(&q, &[1.0], WALK_TOL).unwrap();
        assert!((q[0].q[0] - 0.5).abs() < 1e-12);
        let lt = local_time(3, 1, 0.7, 1e-9).unwrap();
        assert!((lt - 0.7).abs() < 1e-12);
    }

    #[test]
    fn heat_kernel_limits() {
        assert!((srw_transition(2, 2, 0.0, 9).unwrap() - 1.0).abs() < 1e-14);
        assert!(srw_transition(2, 3, 0.0, 9).unwrap().abs() < 1e-14);
        assert!((srw_transition(0, 4, 50.0, 9).unwrap() - 1.0 / 9.0).abs() < 1e-10);
    }
}
