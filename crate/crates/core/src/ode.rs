//! Classical RK4 for autonomous systems, with step halving until two
//! successive resolutions agree.

use crate::error::{invalid, Error, Result};

/// Autonomous right-hand side `y' = F(y)`.
pub trait Rhs {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], out: &mut [f64]);
}

/// Snapshots from an accepted integration.
#[derive(Clone, Debug)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Step size of the accepted run.
    pub dt: f64,
    /// Max-norm difference to the run with twice the step.
    pub achieved: f64,
}

struct Stages {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stages {
    fn new(d: usize) -> Self {
        Self {
            k1: vec![0.0; d],
            k2: vec![0.0; d],
            k3: vec![0.0; d],
            k4: vec![0.0; d],
            tmp: vec![0.0; d],
        }
    }

    fn step<R: Rhs + ?Sized>(&mut self, sys: &R, y: &mut [f64], h: f64) {
        sys.eval(y, &mut self.k1);
        axpy_into(&mut self.tmp, y, 0.5 * h, &self.k1);
        sys.eval(&self.tmp, &mut self.k2);
        axpy_into(&mut self.tmp, y, 0.5 * h, &self.k2);
        sys.eval(&self.tmp, &mut self.k3);
        axpy_into(&mut self.tmp, y, h, &self.k3);
        sys.eval(&self.tmp, &mut self.k4);
        let c = h / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += c * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

fn axpy_into(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, y), k) in out.iter_mut().zip(y).zip(k) {
        *o = y + a * k;
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &t in times {
        if !(t >= prev && t.is_finite()) {
            return Err(invalid("times", "snapshot times must be finite, sorted and >= 0"));
        }
        prev = t;
    }
    Ok(())
}

/// Integrates from `t = 0` with steps no longer than `dt`, shortening them
/// so every snapshot time is hit exactly. `on_step` sees `(t, y)` at
/// `t = 0` and after every step.
pub fn integrate<R: Rhs + ?Sized>(
    sys: &R,
    y0: &[f64],
    times: &[f64],
    dt: f64,
    mut on_step: impl FnMut(f64, &[f64]),
) -> Result<Vec<Vec<f64>>> {
    check_times(times)?;
    if y0.len() != sys.dim() {
        return Err(invalid("y0", format!("length {} != system dimension {}", y0.len(), sys.dim())));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "step must be positive"));
    }
    let mut y = y0.to_vec();
    let mut st = Stages::new(y.len());
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    on_step(t, &y);
    for &target in times {
        let span = target - t;
        let steps = (span / dt).ceil() as usize;
        if steps > 0 {
            let h = span / steps as f64;
            for i in 1..=steps {
                st.step(sys, &mut y, h);
                on_step(t + h * i as f64, &y);
            }
        }
        t = target;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegratorFailure {
                achieved: f64::INFINITY,
                tol: 0.0,
                dt,
            });
        }
        out.push(y.clone());
    }
    Ok(out)
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Runs [`integrate`] at `dt`, `dt/2`, ... until two successive runs differ
/// by less than `tol` in max norm over all snapshots.
pub fn integrate_adaptive<R: Rhs + ?Sized>(
    sys: &R,
    y0: &[f64],
    times: &[f64],
    dt: f64,
    tol: f64,
    dt_min: f64,
) -> Result<Solution> {
    let mut h = dt;
    let mut coarse = integrate(sys, y0, times, h, |_, _| {})?;
    loop {
        let fine = integrate(sys, y0, times, h / 2.0, |_, _| {})?;
        let achieved = max_diff(&coarse, &fine);
        h /= 2.0;
        if achieved < tol {
            return Ok(Solution {
                times: times.to_vec(),
                states: fine,
                dt: h,
                achieved,
            });
        }
        if h / 2.0 < dt_min {
            return Err(Error::IntegratorFailure { achieved, tol, dt: h });
        }
        coarse = fine;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);
    impl Rhs for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, y: &[f64], out: &mut [f64]) {
            out[0] = -self.0 * y[0];
        }
    }

    #[test]
    fn exponential_decay_fourth_order() {
        let e1 = integrate(&Decay(1.0), &[1.0], &[1.0], 0.1, |_, _| {}).unwrap()[0][0] - (-1f64).exp();
        let e2 = integrate(&Decay(1.0), &[1.0], &[1.0], 0.05, |_, _| {}).unwrap()[0][0] - (-1f64).exp();
        let order = (e1 / e2).abs().log2();
        assert!((order - 4.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn hits_snapshot_times_and_reports_failure() {
        let sol = integrate_adaptive(&Decay(2.0), &[1.0], &[0.0, 0.3, 1.0], 0.1, 1e-10, 1e-6).unwrap();
        assert_eq!(sol.states[0][0], 1.0);
        assert!((sol.states[2][0] - (-2f64).exp()).abs() < 1e-9);
        let err = integrate_adaptive(&Decay(2.0), &[1.0], &[1.0], 0.1, 1e-30, 0.01);
        assert!(matches!(err, Err(Error::IntegratorFailure { .. })));
    }
}
