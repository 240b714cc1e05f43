//! Reproducible simulation of the range `R_n`, the number of distinct values
//! among the first `n` draws.
//!
//! Trial `t` under base seed `s` draws from its own ChaCha8 stream
//! (`seed_from_u64(s)`, stream `t`). Trials run in parallel and are reduced in
//! trial order, so summaries do not depend on the thread count.

mod sampler;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distributions::DistributionSpec;

pub use sampler::{make_sampler, zipflog_surrogate, AtomId, Sampler, SamplerPlan, ZIPFLOG_HEAD};

/// Default cap on distinct values tracked by one trajectory.
pub const DEFAULT_DISTINCT_CAP: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("unsampleable spec: {0}")]
    UnsampleableSpec(String),
    #[error("distinct-value cap of {cap} exceeded")]
    ResourceLimit { cap: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    pub checkpoints: Vec<u64>,
    pub values: Vec<u64>,
    pub seed: u64,
    pub trial_index: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialSummary {
    pub checkpoints: Vec<u64>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (`trials - 1` denominator; zero for one trial).
    pub std: Vec<f64>,
    pub min: Vec<u64>,
    pub max: Vec<u64>,
    pub trials: u64,
}

#[derive(Clone, Debug)]
pub struct TrialOptions {
    /// Worker threads; `None` uses rayon's global pool.
    pub threads: Option<usize>,
    pub distinct_cap: u64,
    pub keep_trajectories: bool,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self {
            threads: None,
            distinct_cap: DEFAULT_DISTINCT_CAP,
            keep_trajectories: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialRun {
    pub summary: TrialSummary,
    pub trajectories: Option<Vec<Trajectory>>,
    /// The distribution actually sampled; differs from the input for Zipf-log.
    pub effective: DistributionSpec,
}

/// Exact membership set over atom identifiers.
enum Seen {
    Dense(Vec<u64>),
    Sparse(HashSet<AtomId>),
}

impl Seen {
    fn new(dense: Option<usize>) -> Self {
        match dense {
            Some(n) if n <= 1 << 26 => Seen::Dense(vec![0; n.div_ceil(64)]),
            _ => Seen::Sparse(HashSet::new()),
        }
    }

    /// Inserts `id`; true if it was new.
    fn insert(&mut self, id: AtomId) -> bool {
        match self {
            Seen::Dense(bits) => {
                let i = id.1 as usize;
                let (w, b) = (i / 64, 1u64 << (i % 64));
                let new = bits[w] & b == 0;
                bits[w] |= b;
                new
            }
            Seen::Sparse(set) => set.insert(id),
        }
    }
}

fn validate_checkpoints(checkpoints: &[u64]) -> Result<(), MonteCarloError> {
    if checkpoints.is_empty() || checkpoints[0] == 0 {
        return Err(MonteCarloError::InvalidArgument(
            "checkpoints must be nonempty positive integers".into(),
        ));
    }
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MonteCarloError::InvalidArgument(
            "checkpoints must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn trajectory_with(
    plan: &SamplerPlan,
    seed: u64,
    trial: u64,
    checkpoints: &[u64],
    cap: u64,
) -> Result<Trajectory, MonteCarloError> {
    let mut sampler = plan.sampler(seed, trial);
    let mut seen = Seen::new(plan.dense_support());
    let mut distinct = 0u64;
    let mut drawn = 0u64;
    let mut values = Vec::with_capacity(checkpoints.len());
    for &n in checkpoints {
        while drawn < n {
            if seen.insert(sampler.draw()) {
                distinct += 1;
                if distinct > cap {
                    return Err(MonteCarloError::ResourceLimit { cap });
                }
            }
            drawn += 1;
        }
        values.push(distinct);
    }
    Ok(Trajectory {
        checkpoints: checkpoints.to_vec(),
        values,
        seed,
        trial_index: trial,
    })
}

/// One trial's trajectory under `(seed, trial)`.
pub fn run_trajectory(
    dist: &DistributionSpec,
    seed: u64,
    trial: u64,
    checkpoints: &[u64],
) -> Result<Trajectory, MonteCarloError> {
    validate_checkpoints(checkpoints)?;
    let plan = SamplerPlan::new(dist)?;
    trajectory_with(&plan, seed, trial, checkpoints, DEFAULT_DISTINCT_CAP)
}

/// Summary of `trials` independent trajectories, reduced in trial order.
pub fn run_trials(
    dist: &DistributionSpec,
    checkpoints: &[u64],
    trials: u64,
    base_seed: u64,
    opts: &TrialOptions,
) -> Result<TrialRun, MonteCarloError> {
    validate_checkpoints(checkpoints)?;
    if trials == 0 {
        return Err(MonteCarloError::InvalidArgument("trials must be >= 1".into()));
    }
    let plan = SamplerPlan::new(dist)?;
    let work = || {
        (0..trials)
            .into_par_iter()
            .map(|t| trajectory_with(&plan, base_seed, t, checkpoints, opts.distinct_cap))
            .collect::<Result<Vec<_>, _>>()
    };
    let runs = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| MonteCarloError::InvalidArgument(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let summary = summarize(checkpoints, &runs);
    Ok(TrialRun {
        summary,
        trajectories: opts.keep_trajectories.then_some(runs),
        effective: plan.effective().clone(),
    })
}

fn summarize(checkpoints: &[u64], runs: &[Trajectory]) -> TrialSummary {
    let m = runs.len() as f64;
    let cols = checkpoints.len();
    let mut mean = vec![0.0; cols];
    let mut std = vec![0.0; cols];
    let mut min = vec![u64::MAX; cols];
    let mut max = vec![0; cols];
    for i in 0..cols {
        let mu = runs.iter().map(|r| r.values[i] as f64).sum::<f64>() / m;
        mean[i] = mu;
        if runs.len() > 1 {
            let ss: f64 = runs.iter().map(|r| (r.values[i] as f64 - mu).powi(2)).sum();
            std[i] = (ss / (m - 1.0)).sqrt();
        }
        for r in runs {
            min[i] = min[i].min(r.values[i]);
            max[i] = max[i].max(r.values[i]);
        }
    }
    TrialSummary {
        checkpoints: checkpoints.to_vec(),
        mean,
        std,
        min,
        max,
        trials: runs.len() as u64,
    }
}

/// Geometric grid from `nmin` to `nmax` with the given ratio, rounded and deduplicated.
pub fn geometric_grid(nmin: u64, nmax: u64, ratio: f64) -> Result<Vec<u64>, MonteCarloError> {
    if nmin == 0 || nmax < nmin || !(ratio > 1.0) {
        return Err(MonteCarloError::InvalidArgument(format!(
            "grid needs 1 <= nmin <= nmax and ratio > 1 (got {nmin}, {nmax}, {ratio})"
        )));
    }
    let mut out = vec![nmin];
    let mut x = nmin as f64;
    loop {
        x *= ratio;
        let n = x.round() as u64;
        if n >= nmax || x >= nmax as f64 {
            break;
        }
        if n > *out.last().unwrap() {
            out.push(n);
        }
    }
    if *out.last().unwrap() != nmax {
        out.push(nmax);
    }
    Ok(out)
}
