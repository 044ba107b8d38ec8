//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every exported function has a plain Rust counterpart in [`ops`] so the
//! numerics can be tested natively.

use wasm_bindgen::prelude::*;

pub mod ops {
    use oscillab::chain::{ChainParams, ProductGaussian};
    use oscillab::continuum::{self, FourierSeries, SpectralProfile, DEFAULT_MODES};
    use oscillab::moments::{evolve, EvolveOptions, MomentState};
    use oscillab::rw;

    /// Largest torus the page may request; keeps the moment ODE interactive.
    pub const MAX_N: usize = 64;

    fn params(n: usize, alpha: f64, kappa: f64) -> Result<ChainParams, String> {
        if n > MAX_N {
            return Err(format!("N = {n} is above the demo limit {MAX_N}"));
        }
        ChainParams::new(n, alpha, kappa).map_err(|e| e.to_string())
    }

    fn initial(amplitude: f64, n: usize) -> Result<(ProductGaussian, FourierSeries, FourierSeries), String> {
        let v0 = FourierSeries {
            mean: 0.0,
            cos: vec![(1, amplitude)],
            sin: vec![],
        };
        let e0 = FourierSeries::constant(1.0);
        let law = ProductGaussian::from_profiles(n, |u| v0.eval(u), |u| e0.eval(u)).map_err(|e| e.to_string())?;
        Ok((law, v0, e0))
    }

    /// Mean volume and energy at time `t` on `N` sites next to the limit
    /// profiles at `x/N`, concatenated as `[v, e, v_limit, e_limit]`.
    pub fn profiles(n: usize, alpha: f64, kappa: f64, amplitude: f64, t: f64) -> Result<Vec<f64>, String> {
        let p = params(n, alpha, kappa)?;
        let (law, v0, e0) = initial(amplitude, n)?;
        let m = &evolve(&MomentState::from_product(&law), &p, &[t], EvolveOptions::default())
            .map_err(|e| e.to_string())?[0];
        let limit_alpha = if kappa == 1.0 { alpha } else { 0.0 };
        let sv = SpectralProfile::from_series(&v0, DEFAULT_MODES).map_err(|e| e.to_string())?;
        let se = SpectralProfile::from_series(&e0, DEFAULT_MODES).map_err(|e| e.to_string())?;
        let vl = continuum::solve_volume(&sv, limit_alpha, &[t]).map_err(|e| e.to_string())?;
        let el = continuum::solve_energy(&se, &sv, limit_alpha, &[t]).map_err(|e| e.to_string())?;
        let mut out = m.v.values().to_vec();
        out.extend_from_slice(m.energy().values());
        out.extend(vl.profiles[0].sample(n));
        out.extend(el.profiles[0].sample(n));
        Ok(out)
    }

    /// Row-major `N x N` two-point correlations at time `t`; the diagonal
    /// is reported as 0.
    pub fn correlations(n: usize, alpha: f64, kappa: f64, amplitude: f64, t: f64) -> Result<Vec<f64>, String> {
        let p = params(n, alpha, kappa)?;
        let (law, _, _) = initial(amplitude, n)?;
        let m = &evolve(&MomentState::from_product(&law), &p, &[t], EvolveOptions::default())
            .map_err(|e| e.to_string())?[0];
        let phi = m.correlation_field();
        Ok((0..n * n)
            .map(|i| {
                let (x, y) = (i / n, i % n);
                if x == y {
                    0.0
                } else {
                    phi.get(x, y).unwrap_or(0.0)
                }
            })
            .collect())
    }

    /// Expected time the distance walk spends next to the diagonal up to
    /// `horizon`, for each start `r0 = 1, ..., N - 1`.
    pub fn local_times(n: usize, horizon: f64) -> Result<Vec<f64>, String> {
        if !(3..=MAX_N).contains(&n) {
            return Err(format!("N must be in 3..={MAX_N}"));
        }
        (1..n)
            .map(|r0| rw::local_time(n, r0, horizon, 1e-4).map_err(|e| e.to_string()))
            .collect()
    }
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn profiles(n: usize, alpha: f64, kappa: f64, amplitude: f64, t: f64) -> Result<Vec<f64>, JsError> {
    js(ops::profiles(n, alpha, kappa, amplitude, t))
}

#[wasm_bindgen]
pub fn correlations(n: usize, alpha: f64, kappa: f64, amplitude: f64, t: f64) -> Result<Vec<f64>, JsError> {
    js(ops::correlations(n, alpha, kappa, amplitude, t))
}

#[wasm_bindgen(js_name = localTimes)]
pub fn local_times(n: usize, horizon: f64) -> Result<Vec<f64>, JsError> {
    js(ops::local_times(n, horizon))
}

#[wasm_bindgen(js_name = maxSites)]
#[must_use]
pub fn max_sites() -> usize {
    ops::MAX_N
}
