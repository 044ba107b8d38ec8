//! Declarative experiment configuration (TOML).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::chain::{ChainParams, ProductGaussian};
use crate::continuum::{FourierSeries, SpectralProfile, DEFAULT_MODES};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
    E9,
    E10,
    E11,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 11] = [
        Self::E1,
        Self::E2,
        Self::E3,
        Self::E4,
        Self::E5,
        Self::E6,
        Self::E7,
        Self::E8,
        Self::E9,
        Self::E10,
        Self::E11,
    ];

    #[must_use]
    pub fn title(self) -> &'static str {
        match self {
            Self::E1 => "conservation of volume and energy along simulated paths",
            Self::E2 => "Monte Carlo moments against the closed moment equations",
            Self::E3 => "second-moment and correlation formulations agree",
            Self::E4 => "two-point correlations decay like 1/N",
            Self::E5 => "energy profile converges to the limit equation",
            Self::E6 => "near-diagonal occupation time of the distance walk is O(1/N)",
            Self::E7 => "Green kernel identities of the discrete H^-1 norm",
            Self::E8 => "time-integrated fourth moment grows at most affinely in 1 + alpha_N N",
            Self::E9 => "derivative bounds for the symmetric-walk heat kernel",
            Self::E10 => "quadratic variation of the volume fluctuation martingale",
            Self::E11 => "hydrodynamic limits of volume and energy",
        }
    }

    /// Whether the experiment runs replica ensembles of the chain.
    #[must_use]
    pub fn is_monte_carlo(self) -> bool {
        matches!(self, Self::E1 | Self::E2 | Self::E8 | Self::E10 | Self::E11)
    }

    #[must_use]
    pub fn builtin_toml(self) -> &'static str {
        match self {
            Self::E1 => include_str!("../../specs/e01_conservation.toml"),
            Self::E2 => include_str!("../../specs/e02_closure.toml"),
            Self::E3 => include_str!("../../specs/e03_formulations.toml"),
            Self::E4 => include_str!("../../specs/e04_correlation_decay.toml"),
            Self::E5 => include_str!("../../specs/e05_energy_rate.toml"),
            Self::E6 => include_str!("../../specs/e06_local_time.toml"),
            Self::E7 => include_str!("../../specs/e07_kernel.toml"),
            Self::E8 => include_str!("../../specs/e08_fourth_moment.toml"),
            Self::E9 => include_str!("../../specs/e09_heat_kernel.toml"),
            Self::E10 => include_str!("../../specs/e10_quadratic_variation.toml"),
            Self::E11 => include_str!("../../specs/e11_hydrodynamics.toml"),
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}", *self as u8 + 1)
    }
}

impl FromStr for ExperimentId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let k: usize = s
            .strip_prefix(['E', 'e'])
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| format!("unknown experiment `{s}` (expected E1..E11)"))?;
        Self::ALL
            .get(k.wrapping_sub(1))
            .copied()
            .ok_or_else(|| format!("unknown experiment `{s}` (expected E1..E11)"))
    }
}

impl TryFrom<String> for ExperimentId {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<ExperimentId> for String {
    fn from(id: ExperimentId) -> String {
        id.to_string()
    }
}

/// Model parameters; `n` and `kappa` are sweep lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    /// A list of sizes or an inclusive range `{ from = 2, to = 256 }`.
    #[serde(deserialize_with = "sizes")]
    pub n: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_kappa")]
    pub kappa: Vec<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Sizes {
    List(Vec<usize>),
    Range { from: usize, to: usize },
}

fn sizes<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    Ok(match Sizes::deserialize(d)? {
        Sizes::List(v) => v,
        Sizes::Range { from, to } => (from..=to).collect(),
    })
}

fn default_alpha() -> f64 {
    0.5
}

fn default_kappa() -> Vec<f64> {
    vec![1.0]
}

/// Initial volume and energy profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub v0: FourierSeries,
    pub e0: FourierSeries,
}

impl InitialSpec {
    /// `v0 = cos(2 pi u) / 2`, `e0 = 1`.
    #[must_use]
    pub fn standard() -> Self {
        Self {
            v0: FourierSeries {
                mean: 0.0,
                cos: vec![(1, 0.5)],
                sin: vec![],
            },
            e0: FourierSeries::constant(1.0),
        }
    }

    pub fn law(&self, n: usize) -> Result<ProductGaussian> {
        ProductGaussian::from_profiles(n, |u| self.v0.eval(u), |u| self.e0.eval(u))
    }

    pub fn spectral(&self, m: usize) -> Result<(SpectralProfile, SpectralProfile)> {
        Ok((
            SpectralProfile::from_series(&self.v0, m)?,
            SpectralProfile::from_series(&self.e0, m)?,
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentId,
    pub params: ParamSpec,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub horizon: f64,
    #[serde(default)]
    pub schedule: Vec<f64>,
    #[serde(default)]
    pub replicas: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Ceiling on projected swap events over the whole run.
    #[serde(default = "default_budget")]
    pub budget: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Test function for pairings, as a real Fourier series.
    #[serde(default)]
    pub test_function: Option<FourierSeries>,
    /// Number of grid points used where the experiment needs a time grid.
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub check_times: Vec<f64>,
    /// Size of a secondary ensemble (equilibrium sanity check, spot checks).
    #[serde(default)]
    pub secondary_replicas: Option<u64>,
    #[serde(default)]
    pub secondary_n: Option<usize>,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_seed() -> u64 {
    7
}

fn default_budget() -> f64 {
    5e9
}

fn default_modes() -> usize {
    DEFAULT_MODES
}

fn spec_err(path: &str, reason: impl Into<String>) -> Error {
    Error::Spec {
        path: path.to_owned(),
        reason: reason.into(),
    }
}

/// Tolerance names understood by each experiment and their defaults.
#[must_use]
pub fn default_tolerances(id: ExperimentId) -> &'static [(&'static str, f64)] {
    match id {
        ExperimentId::E1 => &[("drift", 1e-8)],
        ExperimentId::E2 => &[("max_se", 3.0)],
        ExperimentId::E3 => &[("agreement", 1e-8), ("integrator", 1e-11)],
        ExperimentId::E4 => &[("ratio", 2.0), ("slope_min", -1.3), ("slope_max", -0.8)],
        ExperimentId::E5 => &[("exponent", 0.8)],
        ExperimentId::E6 => &[("ratio", 2.0), ("quadrature", 1e-6)],
        ExperimentId::E7 => &[("identity", 1e-10)],
        ExperimentId::E8 => &[("residual", 0.15), ("max_se", 3.0)],
        ExperimentId::E9 => &[("ratio", 2.0)],
        ExperimentId::E10 => &[("relative", 0.05), ("resolution", 0.01)],
        ExperimentId::E11 => &[("slope", -0.8), ("max_se", 3.0)],
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn builtin(id: ExperimentId) -> Self {
        Self::from_toml(id.builtin_toml()).expect("shipped experiment specs are valid")
    }

    #[must_use]
    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| {
            default_tolerances(self.experiment)
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .expect("tolerance name is known to the experiment")
        })
    }

    #[must_use]
    pub fn initial(&self) -> InitialSpec {
        self.initial.clone().unwrap_or_else(InitialSpec::standard)
    }

    /// Transport speed of the limit equation: `lim alpha_N N`.
    #[must_use]
    pub fn limit_alpha(&self, kappa: f64) -> f64 {
        if kappa == 1.0 {
            self.params.alpha
        } else {
            0.0
        }
    }

    /// `sqrt2 cos(2 pi u)` unless configured.
    #[must_use]
    pub fn test_function(&self) -> FourierSeries {
        self.test_function.clone().unwrap_or(FourierSeries {
            mean: 0.0,
            cos: vec![(1, std::f64::consts::SQRT_2)],
            sin: vec![],
        })
    }

    /// Every `(N, kappa)` pair of the sweep, validated.
    pub fn chain_params(&self) -> Result<Vec<ChainParams>> {
        let mut out = Vec::new();
        for (i, &n) in self.params.n.iter().enumerate() {
            for (j, &kappa) in self.params.kappa.iter().enumerate() {
                let p = ChainParams::new(n, self.params.alpha, kappa).map_err(|e| {
                    spec_err(&format!("params.n[{i}] x params.kappa[{j}]"), e.to_string())
                })?;
                out.push(p);
            }
        }
        Ok(out)
    }

    /// Projected number of swap events of all chain simulations.
    #[must_use]
    pub fn projected_events(&self) -> f64 {
        let cube = |n: usize| (n as f64).powi(3);
        let kappas = self.params.kappa.len() as f64;
        let main: f64 = self.params.n.iter().map(|&n| cube(n)).sum::<f64>() * kappas;
        let r = self.replicas as f64;
        let t = self.horizon;
        let secondary = self.secondary_replicas.unwrap_or(0) as f64;
        match self.experiment {
            ExperimentId::E1 | ExperimentId::E2 => main * t * r,
            ExperimentId::E8 => main * t * r + cube(self.secondary_n.unwrap_or(16)) * t * secondary,
            // equilibrium and non-equilibrium ensembles
            ExperimentId::E10 => 2.0 * main * t * r,
            ExperimentId::E11 => cube(self.secondary_n.unwrap_or(32)) * kappas * t * secondary,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.experiment;
        if self.params.n.is_empty() {
            return Err(spec_err("params.n", "at least one torus size is required"));
        }
        if !(self.params.alpha > 0.0 && self.params.alpha.is_finite()) {
            return Err(spec_err("params.alpha", "must be a positive number"));
        }
        if let Some(beta) = self.params.beta {
            if !(beta > 0.0) {
                return Err(spec_err("params.beta", "must be positive"));
            }
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(spec_err("horizon", "must be a finite time >= 0"));
        }
        for (i, &s) in self.schedule.iter().enumerate() {
            if !(0.0..=self.horizon).contains(&s) || (i > 0 && s < self.schedule[i - 1]) {
                return Err(spec_err(&format!("schedule[{i}]"), "times must be sorted within [0, horizon]"));
            }
        }
        for (i, &s) in self.check_times.iter().enumerate() {
            if !(s > 0.0 && s <= self.horizon) {
                return Err(spec_err(&format!("check_times[{i}]"), "must lie in (0, horizon]"));
            }
        }
        for name in self.tolerances.keys() {
            if !default_tolerances(id).iter().any(|(k, _)| k == name) {
                return Err(spec_err(&format!("tolerances.{name}"), format!("not a tolerance of {id}")));
            }
        }
        match id {
            ExperimentId::E6 | ExperimentId::E9 => {
                if let Some(i) = self.params.n.iter().position(|&n| n < 3) {
                    return Err(spec_err(&format!("params.n[{i}]"), "walks need N >= 3"));
                }
            }
            ExperimentId::E7 => {
                if let Some(i) = self.params.n.iter().position(|&n| n < 2) {
                    return Err(spec_err(&format!("params.n[{i}]"), "kernel needs N >= 2"));
                }
            }
            _ => {
                if matches!(id, ExperimentId::E5 | ExperimentId::E10 | ExperimentId::E11) {
                    if let Some(j) = self.params.kappa.iter().position(|&k| k < 1.0) {
                        return Err(spec_err(
                            &format!("params.kappa[{j}]"),
                            "the limit equation needs kappa >= 1",
                        ));
                    }
                }
                self.chain_params()?;
                let init = self.initial();
                for (i, &n) in self.params.n.iter().enumerate() {
                    init.law(n).map_err(|e| spec_err(&format!("initial (params.n[{i}] = {n})"), e.to_string()))?;
                }
                init.spectral(self.modes).map_err(|e| spec_err("initial", e.to_string()))?;
            }
        }
        if id == ExperimentId::E10 {
            let steps = self.grid.unwrap_or(200);
            if !steps.is_multiple_of(2) {
                return Err(spec_err("grid", "must be even so that the grid can be halved"));
            }
            for (i, &c) in self.check_times.iter().enumerate() {
                let j = c / self.horizon * steps as f64;
                if (j - j.round()).abs() > 1e-9 || !(j.round() as usize).is_multiple_of(2) {
                    return Err(spec_err(&format!("check_times[{i}]"), "must fall on an even grid point"));
                }
            }
        }
        if matches!(id, ExperimentId::E2 | ExperimentId::E8 | ExperimentId::E10) && self.replicas < 2 {
            return Err(spec_err("replicas", "ensembles need at least 2 replicas"));
        }
        if id == ExperimentId::E1 && self.replicas < 1 {
            return Err(spec_err("replicas", "need at least one replica"));
        }
        let projected = self.projected_events();
        if projected > self.budget {
            return Err(Error::Budget {
                projected,
                ceiling: self.budget,
            });
        }
        Ok(())
    }
}
