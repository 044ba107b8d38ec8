//! Replica ensembles with reproducible seeding and fixed-order reduction.
//!
//! Replicas are grouped in blocks of [`BLOCK`]; each block is reduced
//! sequentially and blocks are merged in index order, so results do not
//! depend on the number of workers.

use std::panic::{catch_unwind, AssertUnwindSafe};

use crate::chain::ReplicaSeed;
use crate::error::{Error, Result};
use crate::stats::MomentsVec;

pub const BLOCK: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnsembleConfig {
    pub replicas: u64,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
}

/// Result of an ensemble that may have stopped early.
#[derive(Debug)]
pub struct EnsembleOutcome {
    /// Statistics of the blocks completed before the first failure.
    pub stats: MomentsVec,
    pub completed: u64,
    pub failure: Option<Error>,
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_owned()
    }
}

fn run_block<F>(cfg: &EnsembleConfig, width: usize, block: u64, f: &F) -> Result<MomentsVec>
where
    F: Fn(ReplicaSeed) -> Result<Vec<f64>> + Sync,
{
    let mut acc = MomentsVec::new(width);
    let lo = block * BLOCK;
    let hi = (lo + BLOCK).min(cfg.replicas);
    for r in lo..hi {
        let seed = ReplicaSeed::new(cfg.seed, r);
        let obs = catch_unwind(AssertUnwindSafe(|| f(seed))).map_err(|p| Error::ReplicaPanic {
            replica: r,
            message: panic_message(p.as_ref()),
        })??;
        if obs.len() != width {
            return Err(Error::Dependency(format!(
                "replica {r} produced {} values, expected {width}",
                obs.len()
            )));
        }
        acc.push(&obs);
    }
    Ok(acc)
}

#[cfg(feature = "parallel")]
fn run_blocks<F>(cfg: &EnsembleConfig, width: usize, f: &F) -> Result<Vec<Result<MomentsVec>>>
where
    F: Fn(ReplicaSeed) -> Result<Vec<f64>> + Sync,
{
    use rayon::prelude::*;
    let blocks = cfg.replicas.div_ceil(BLOCK);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Resource(e.to_string()))?;
    Ok(pool.install(|| (0..blocks).into_par_iter().map(|b| run_block(cfg, width, b, f)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_blocks<F>(cfg: &EnsembleConfig, width: usize, f: &F) -> Result<Vec<Result<MomentsVec>>>
where
    F: Fn(ReplicaSeed) -> Result<Vec<f64>> + Sync,
{
    let blocks = cfg.replicas.div_ceil(BLOCK);
    Ok((0..blocks).map(|b| run_block(cfg, width, b, f)).collect())
}

/// Runs `f` for replicas `0..replicas` and accumulates the returned
/// observation vectors (each of length `width`).
pub fn ensemble_outcome<F>(cfg: &EnsembleConfig, width: usize, f: F) -> Result<EnsembleOutcome>
where
    F: Fn(ReplicaSeed) -> Result<Vec<f64>> + Sync,
{
    let mut stats = MomentsVec::new(width);
    let mut completed = 0;
    for (b, res) in run_blocks(cfg, width, &f)?.into_iter().enumerate() {
        match res {
            Ok(m) => {
                stats.merge(&m);
                completed = ((b as u64 + 1) * BLOCK).min(cfg.replicas);
            }
            Err(e) => {
                return Ok(EnsembleOutcome {
                    stats,
                    completed,
                    failure: Some(e),
                })
            }
        }
    }
    Ok(EnsembleOutcome {
        stats,
        completed,
        failure: None,
    })
}

/// [`ensemble_outcome`] that turns an early stop into an error.
pub fn ensemble<F>(cfg: &EnsembleConfig, width: usize, f: F) -> Result<MomentsVec>
where
    F: Fn(ReplicaSeed) -> Result<Vec<f64>> + Sync,
{
    let out = ensemble_outcome(cfg, width, f)?;
    match out.failure {
        Some(e) => Err(e),
        None => Ok(out.stats),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draw(seed: ReplicaSeed) -> Result<Vec<f64>> {
        let mut rng = seed.rng();
        Ok(vec![rng.random::<f64>(), rng.random::<f64>() * 2.0])
    }

    #[test]
    fn independent_of_worker_count() {
        let base = EnsembleConfig {
            replicas: 1000,
            seed: 3,
            workers: 1,
        };
        let a = ensemble(&base, 2, draw).unwrap();
        let b = ensemble(&EnsembleConfig { workers: 4, ..base }, 2, draw).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0[0].count(), 1000);
        assert!((a.0[0].mean() - 0.5).abs() < 4.0 * a.0[0].stderr());
    }

    #[test]
    fn identical_replicas_have_zero_stderr() {
        let cfg = EnsembleConfig {
            replicas: 2,
            seed: 1,
            workers: 1,
        };
        let m = ensemble(&cfg, 1, |_| draw(ReplicaSeed::new(9, 0)).map(|v| vec![v[0]])).unwrap();
        assert_eq!(m.0[0].stderr(), 0.0);
    }

    #[test]
    fn panics_become_errors_with_partials() {
        let cfg = EnsembleConfig {
            replicas: 300,
            seed: 1,
            workers: 2,
        };
        let out = ensemble_outcome(&cfg, 2, |s| {
            if s.replica == 200 {
                panic!("boom");
            }
            draw(s)
        })
        .unwrap();
        match out.failure {
            Some(Error::ReplicaPanic { replica, message }) => {
                assert_eq!(replica, 200);
                assert!(message.contains("boom"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(out.completed, 192);
        assert_eq!(out.stats.0[0].count(), 192);
    }
}
