//! Speed statistics `(ln n)^(1+ε) / n · R_n`, law-of-large-numbers ratios, the
//! counterexample subsequence `n_k = 2^(2 b_k)`, and log-power fits.

use std::f64::consts::LN_2;

use serde::Serialize;
use thiserror::Error;

use crate::bracket::Bracket;
use crate::distributions::counterexample::{log2_b, MAX_BLOCKS};
use crate::distributions::DistributionSpec;
use crate::exact::{expected_range_log2, ExactError};
use crate::log2num::{Log2Bracket, Log2Number};
use crate::montecarlo::TrialSummary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("checkpoint grids differ: {0}")]
    GridMismatch(String),
    #[error("insufficient span: {0}")]
    InsufficientSpan(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Exact,
    Simulated,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Exact => "exact",
            Source::Simulated => "simulated",
        }
    }
}

/// Logarithm applied to `n` inside the statistic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    Natural,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SllnRow {
    pub n: u64,
    pub ratio: f64,
    /// `(mean - midpoint) / (std / sqrt(trials))`; zero when both agree exactly.
    pub deviation_se: f64,
}

/// `mean R_n / mid E R_n` per checkpoint, with the deviation in standard errors.
pub fn slln_ratio(
    summary: &TrialSummary,
    exact: &[Bracket],
) -> Result<Vec<SllnRow>, DiagnosticsError> {
    if summary.checkpoints.len() != exact.len() {
        return Err(DiagnosticsError::GridMismatch(format!(
            "{} checkpoints but {} exact values",
            summary.checkpoints.len(),
            exact.len()
        )));
    }
    Ok(summary
        .checkpoints
        .iter()
        .zip(exact)
        .enumerate()
        .map(|(i, (&n, e))| {
            let mid = e.mid();
            let mean = summary.mean[i];
            let se = summary.std[i] / (summary.trials as f64).sqrt();
            let diff = mean - mid;
            let deviation_se = if diff == 0.0 {
                0.0
            } else if se == 0.0 {
                diff.signum() * f64::INFINITY
            } else {
                diff / se
            };
            SllnRow {
                n,
                ratio: mean / mid,
                deviation_se,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedEntry {
    #[serde(serialize_with = "log2_as_f64")]
    pub n: Log2Number,
    pub epsilon: f64,
    pub log2_stat: f64,
    pub source: Source,
}

fn log2_as_f64<S: serde::Serializer>(n: &Log2Number, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(n.log2())
}

impl SpeedEntry {
    /// The statistic, when representable as binary64.
    pub fn stat(&self) -> Option<f64> {
        let v = self.log2_stat.exp2();
        (v.is_finite() && (v > 0.0 || self.log2_stat == f64::NEG_INFINITY)).then_some(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedSeries {
    pub base: LogBase,
    pub entries: Vec<SpeedEntry>,
}

impl SpeedSeries {
    /// Statistic values; `None` where they under- or overflow binary64.
    pub fn values(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(SpeedEntry::stat).collect()
    }
}

/// `log2` of `(log n)^(1+ε) / n · value`, all in log2 form.
pub fn log2_speed_statistic(n: Log2Number, value: Log2Number, epsilon: f64, base: LogBase) -> f64 {
    let log_n = match base {
        LogBase::Natural => n.log2() * LN_2,
        LogBase::Binary => n.log2(),
    };
    (1.0 + epsilon) * log_n.log2() - n.log2() + value.log2()
}

/// Speed statistics for `(n, value)` pairs, with `n` strictly increasing and at least 2.
pub fn speed_series(
    data: &[(Log2Number, Log2Number)],
    epsilon: f64,
    source: Source,
    base: LogBase,
) -> Result<SpeedSeries, DiagnosticsError> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(DiagnosticsError::InvalidArgument(format!("epsilon {epsilon} must be >= 0")));
    }
    if data.iter().any(|(n, _)| n.log2() < 1.0) {
        return Err(DiagnosticsError::InvalidArgument("every n must be >= 2".into()));
    }
    if data.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(DiagnosticsError::InvalidArgument("n must be strictly increasing".into()));
    }
    Ok(SpeedSeries {
        base,
        entries: data
            .iter()
            .map(|&(n, v)| SpeedEntry {
                n,
                epsilon,
                log2_stat: log2_speed_statistic(n, v, epsilon, base),
                source,
            })
            .collect(),
    })
}

/// Convenience form of [`speed_series`] for native `(n, value)` pairs with natural log.
pub fn speed_series_f64(
    data: &[(u64, f64)],
    epsilon: f64,
    source: Source,
) -> Result<SpeedSeries, DiagnosticsError> {
    let pts: Vec<_> = data
        .iter()
        .map(|&(n, v)| (Log2Number::from_u64(n), Log2Number::from_f64(v)))
        .collect();
    speed_series(&pts, epsilon, source, LogBase::Natural)
}

/// True when the last half of `values` (at least two entries) is strictly decreasing.
pub fn is_eventually_decreasing(values: &[f64]) -> bool {
    if values.len() < 2 {
        return false;
    }
    let start = (values.len() / 2).min(values.len() - 2);
    values[start..].windows(2).all(|w| w[1] < w[0])
}

/// Largest `K` accepted by the counterexample diagnostics.
pub const MAX_SUBSEQUENCE: u32 = 4;
/// Blocks kept explicitly when evaluating `E R_{n_k}`; later blocks form the tail.
const EVAL_BLOCKS: u32 = MAX_BLOCKS;

/// `log2 n_k = 2 b_k` for `k = 1..=K`: `[8, 32, 512, 131072]`.
pub fn counterexample_subsequence(k_max: u32) -> Result<Vec<Log2Number>, DiagnosticsError> {
    if !(1..=MAX_SUBSEQUENCE).contains(&k_max) {
        return Err(DiagnosticsError::InvalidArgument(format!(
            "K = {k_max} outside 1..={MAX_SUBSEQUENCE}"
        )));
    }
    Ok((1..=k_max)
        .map(|k| Log2Number::from_log2(2.0 * log2_b(k).exp2()))
        .collect())
}

/// `log2(2^(b_k+3)/b_k + c · 2^(2 b_k + 1)/b_k^2)`.
fn bound_log2(k: u32, c: f64) -> f64 {
    let b = log2_b(k).exp2();
    let lb = log2_b(k);
    let first = Log2Number::from_log2(b + 3.0 - lb);
    let second = Log2Number::from_log2(2.0 * b + 1.0 - 2.0 * lb + c.log2());
    first.add(&second).log2()
}

/// The bound `2^(b_k+3)/b_k + 2^(2 b_k+1)/b_k^2` as stated, in log2.
pub fn paper_bound_log2(k: u32) -> f64 {
    bound_log2(k, 1.0)
}

/// The same bound with the block normalizer kept in the tail term:
/// `2^(b_k+3)/b_k + A · 2^(2 b_k+1)/b_k^2`, using the upper end of `A`.
pub fn corrected_bound_log2(k: u32, a: Bracket) -> f64 {
    bound_log2(k, a.hi())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub k: u32,
    pub log2_nk: f64,
    pub log2_er_lo: f64,
    pub log2_er_hi: f64,
    pub paper_bound_log2: f64,
    /// `None` for `k = 1`, where the bound is only claimed for large `k`.
    pub pass: Option<bool>,
    pub corrected_bound_log2: f64,
    pub corrected_pass: Option<bool>,
}

/// `E R_{n_k}` for the unbounded counterexample against the stated bound, `k = 1..=K`.
pub fn paper_bound_check(k_max: u32, a: Bracket) -> Result<Vec<BoundRow>, DiagnosticsError> {
    let dist = DistributionSpec::block_counterexample(EVAL_BLOCKS)
        .map_err(|e| DiagnosticsError::InvalidArgument(e.to_string()))?;
    counterexample_subsequence(k_max)?
        .into_iter()
        .enumerate()
        .map(|(i, log2_n)| {
            let k = i as u32 + 1;
            let er = expected_range_log2(&dist, log2_n)?;
            let paper = paper_bound_log2(k);
            let corrected = corrected_bound_log2(k, a);
            let judged = |bound: f64| (k > 1).then_some(er.log2_hi() <= bound);
            Ok(BoundRow {
                k,
                log2_nk: log2_n.log2(),
                log2_er_lo: er.log2_lo(),
                log2_er_hi: er.log2_hi(),
                paper_bound_log2: paper,
                pass: judged(paper),
                corrected_bound_log2: corrected,
                corrected_pass: judged(corrected),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleStat {
    pub k: u32,
    pub epsilon: f64,
    pub base: LogBase,
    /// `log2` of the statistic at the lower and upper ends of `E R_{n_k}`.
    pub log2_stat_lo: f64,
    pub log2_stat_hi: f64,
}

/// Speed statistics along `n_k` for each `ε`, from log-domain `E R_{n_k}` brackets.
pub fn counterexample_statistics(
    k_max: u32,
    epsilons: &[f64],
    base: LogBase,
) -> Result<Vec<CounterexampleStat>, DiagnosticsError> {
    let dist = DistributionSpec::block_counterexample(EVAL_BLOCKS)
        .map_err(|e| DiagnosticsError::InvalidArgument(e.to_string()))?;
    let mut out = Vec::new();
    for (i, log2_n) in counterexample_subsequence(k_max)?.into_iter().enumerate() {
        let er: Log2Bracket = expected_range_log2(&dist, log2_n)?;
        for &eps in epsilons {
            if !(eps >= 0.0) {
                return Err(DiagnosticsError::InvalidArgument(format!("epsilon {eps} must be >= 0")));
            }
            out.push(CounterexampleStat {
                k: i as u32 + 1,
                epsilon: eps,
                base,
                log2_stat_lo: log2_speed_statistic(log2_n, er.lo(), eps, base),
                log2_stat_hi: log2_speed_statistic(log2_n, er.hi(), eps, base),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaFit {
    pub beta: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Least-squares slope of `ln(n / E R_n)` against `ln ln n`.
pub fn beta_fit(points: &[(f64, f64)]) -> Result<BetaFit, DiagnosticsError> {
    if points.len() < 4 {
        return Err(DiagnosticsError::InsufficientSpan(format!(
            "{} points; at least 4 are needed",
            points.len()
        )));
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(n, _)| (lo.min(n), hi.max(n)));
    if !(lo > 1.0) || hi / lo < 1e3 * (1.0 - 1e-12) {
        return Err(DiagnosticsError::InsufficientSpan(format!(
            "n spans [{lo}, {hi}]; at least three decades above 1 are needed"
        )));
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, er)| (n.ln().ln(), (n / er).ln()))
        .collect();
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let residual = (xy
        .iter()
        .map(|p| (p.1 - intercept - beta * p.0).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(BetaFit {
        beta,
        intercept,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistic_of_n_itself_is_ln_n() {
        let data: Vec<(u64, f64)> = [10u64, 100, 1000].iter().map(|&n| (n, n as f64)).collect();
        let s = speed_series_f64(&data, 0.0, Source::Exact).unwrap();
        for (e, &(n, _)) in s.entries.iter().zip(&data) {
            assert!((e.stat().unwrap() - (n as f64).ln()).abs() < 1e-12);
        }
        assert!(s.values().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn subsequence_values() {
        let logs = |k| {
            counterexample_subsequence(k)
                .unwrap()
                .iter()
                .map(|n| n.log2())
                .collect::<Vec<_>>()
        };
        assert_eq!(logs(1), vec![8.0]);
        assert_eq!(logs(2), vec![8.0, 32.0]);
        assert_eq!(logs(4), vec![8.0, 32.0, 512.0, 131072.0]);
        assert!(counterexample_subsequence(0).is_err());
        assert!(counterexample_subsequence(5).is_err());
    }

    #[test]
    fn stated_bound_at_k_two() {
        let want = (32768.0f64 + 33554432.0).log2();
        assert!((paper_bound_log2(2) - want).abs() < 1e-12);
    }

    #[test]
    fn first_row_is_not_judged() {
        let a = crate::distributions::block_normalizer(None);
        let rows = paper_bound_check(2, a).unwrap();
        assert_eq!(rows[0].pass, None);
        assert!(rows[1].pass.is_some());
    }

    #[test]
    fn synthetic_power_laws_are_recovered() {
        let ns: Vec<f64> = (0..8).map(|i| 10f64.powf(3.0 + 0.5 * i as f64)).collect();
        let one: Vec<_> = ns.iter().map(|&n| (n, n / n.ln())).collect();
        let fit = beta_fit(&one).unwrap();
        assert!((fit.beta - 1.0).abs() < 1e-6 && fit.residual < 1e-9);
        let half: Vec<_> = ns.iter().map(|&n| (n, 7.0 * n / n.ln().sqrt())).collect();
        assert!((beta_fit(&half).unwrap().beta - 0.5).abs() < 1e-6);
        assert!(beta_fit(&one[..3]).is_err());
        assert!(beta_fit(&one[..4]).is_err());
    }

    #[test]
    fn eventual_decrease() {
        assert!(is_eventually_decreasing(&[1.0, 3.0, 2.0, 1.0]));
        assert!(!is_eventually_decreasing(&[3.0, 2.0, 1.0, 1.5]));
    }
}
