//! Certified evaluation of `E R_n = Σ_x [1 - (1 - π_x)^n]` and of the entropy
//! `S(π) = -Σ_x π_x ln π_x` (in nats).
//!
//! Expected ranges are computed in three zones:
//!
//! 1. atoms summed one by one while `n·π_x` is large or precision demands it;
//! 2. runs of atoms grouped into blocks (explicit blocks for block forms,
//!    integral-bounded index ranges for the Zipf-log family), using that
//!    `(1-(1-p)^n)/p` is nonincreasing in `p`;
//! 3. a linearized tail, `n·p - (n·p)^2/2 <= 1-(1-p)^n <= n·p`, applied to a
//!    certified tail-mass bracket.
//!
//! Evaluation that cannot reach the requested relative width within its
//! enumeration budget still returns its best bracket, flagged.

mod entropy;
mod occupancy;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::bracket::{Bracket, CertifiedSum, UNIT_ROUNDOFF};
use crate::distributions::zipflog::ZipfShape;
use crate::distributions::{
    CounterexampleDist, DistError, DistributionSpec, GeometricDist, NormalizerKind, RigorousBlock,
    ZipfLogDist, DEFAULT_ZIPFLOG_CAP,
};
use crate::log2num::{Log2Bracket, Log2Number};

pub use entropy::{entropy, entropy_block_contribution, entropy_with, EntropyResult};
pub use occupancy::{
    occupancy_term, occupancy_term_log2, LINEAR_LOG2_THRESHOLD, SATURATION_LOG2_THRESHOLD,
    TERM_REL_ERR,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("evaluation cancelled")]
    Cancelled,
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Cooperative cancellation flag shared between a caller and long summations.
#[derive(Clone, Debug, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions<'a> {
    pub rel_tol: f64,
    /// Largest number of atoms enumerated one by one.
    pub enumeration_cap: u64,
    /// Largest number of grouped index ranges in zone 2.
    pub group_budget: u64,
    pub cancel: Option<&'a CancelToken>,
}

impl Default for EvalOptions<'_> {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            enumeration_cap: DEFAULT_ZIPFLOG_CAP,
            group_budget: 1 << 21,
            cancel: None,
        }
    }
}

impl<'a> EvalOptions<'a> {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    fn check_cancel(&self) -> Result<(), ExactError> {
        match self.cancel {
            Some(t) if t.is_cancelled() => Err(ExactError::Cancelled),
            _ => Ok(()),
        }
    }
}

/// A bracket for `E R_n`, flagged when the requested width was not reached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeEstimate {
    pub bracket: Bracket,
    pub budget_exceeded: bool,
}

fn validate_tol(rel_tol: f64) -> Result<(), ExactError> {
    if rel_tol > 0.0 && rel_tol < 0.5 {
        Ok(())
    } else {
        Err(ExactError::Domain(format!("rel_tol = {rel_tol} outside (0, 0.5)")))
    }
}

pub fn expected_range(
    dist: &DistributionSpec,
    n: u64,
    rel_tol: f64,
) -> Result<RangeEstimate, ExactError> {
    expected_range_with(dist, n, &EvalOptions::with_rel_tol(rel_tol))
}

pub fn expected_range_with(
    dist: &DistributionSpec,
    n: u64,
    opts: &EvalOptions<'_>,
) -> Result<RangeEstimate, ExactError> {
    validate_tol(opts.rel_tol)?;
    if n == 0 {
        return Err(ExactError::Domain("n must be >= 1".into()));
    }
    let bracket = match dist {
        DistributionSpec::Finite(f) => finite_range(f.masses(), n as f64, opts)?,
        // Both families are normalized exactly, so E R_1 = Σ π_x = 1.
        DistributionSpec::Geometric(_) | DistributionSpec::ZipfLog(_) if n == 1 => {
            Bracket::point(1.0)
        }
        DistributionSpec::Geometric(g) => geometric_range(g, n as f64, opts)?,
        DistributionSpec::ZipfLog(z) => zipflog_range(z, n as f64, opts)?,
        DistributionSpec::Blocks(b) => {
            blocks_range(&b.rigorous_blocks(), None, Log2Number::from_u64(n)).to_linear()
        }
        DistributionSpec::BlockCounterexample(c) => {
            counterexample_range(c, Log2Number::from_u64(n)).to_linear()
        }
    };
    // E R_n never exceeds n.
    let bracket = bracket.clamp(0.0, n as f64);
    Ok(RangeEstimate {
        budget_exceeded: bracket.rel_width() > opts.rel_tol,
        bracket,
    })
}

/// `log2 E R_n` for block-form distributions at sample sizes given in log2 form.
pub fn expected_range_log2(
    dist: &DistributionSpec,
    log2_n: Log2Number,
) -> Result<Log2Bracket, ExactError> {
    if log2_n < Log2Number::ONE {
        return Err(ExactError::Domain("n must be >= 1".into()));
    }
    match dist {
        DistributionSpec::Blocks(b) => Ok(blocks_range(&b.rigorous_blocks(), None, log2_n)),
        DistributionSpec::BlockCounterexample(c) => Ok(counterexample_range(c, log2_n)),
        other => Err(ExactError::Domain(format!(
            "log-domain evaluation needs a block-form distribution, got {}",
            other.kind_name()
        ))),
    }
}

fn finite_range(masses: &[f64], n: f64, opts: &EvalOptions<'_>) -> Result<Bracket, ExactError> {
    let mut acc = CertifiedSum::new();
    for (i, &p) in masses.iter().enumerate() {
        if i % 65536 == 0 {
            opts.check_cancel()?;
        }
        let exact = p == 0.0 || p == 1.0;
        acc.add(occupancy::term(p, n), if exact { 0.0 } else { TERM_REL_ERR });
    }
    Ok(acc.finish().clamp(0.0, f64::MAX))
}

/// Zone-3 tail: atoms of total mass `mass`, none heavier than `p_max`.
fn linear_tail(mass: Bracket, p_max: f64, n: f64) -> Bracket {
    let lo = (mass.lo().max(0.0) * occupancy::ratio_lo(p_max.min(1.0), n)).next_down();
    let hi = (mass.hi() * n).next_up();
    Bracket::new(lo.max(0.0).min(hi), hi)
}

fn geometric_range(g: &GeometricDist, n: f64, opts: &EvalOptions<'_>) -> Result<Bracket, ExactError> {
    let rel = TERM_REL_ERR + 6.0 * UNIT_ROUNDOFF;
    let target = opts.rel_tol * 0.5;
    let eta = LINEAR_LOG2_THRESHOLD.exp2();
    let mut acc = CertifiedSum::new();
    let mut x = 0u64;
    loop {
        x += 1;
        let p = g.mass(x);
        acc.add(occupancy::term(p, n), rel);
        if x % 65536 == 0 {
            opts.check_cancel()?;
        }
        let linear = n * p <= eta;
        if linear && (x % 16 == 0 || p == 0.0) || x >= opts.enumeration_cap {
            let p_next = g.mass(x + 1) * (1.0 + 8.0 * UNIT_ROUNDOFF);
            let total = acc.finish() + linear_tail(g.tail(x), p_next, n);
            if total.rel_width() <= target || x >= opts.enumeration_cap || p == 0.0 {
                return Ok(total);
            }
        }
    }
}

/// Zones 2 and 3 for the Zipf-log family, starting at index `start`.
fn zipflog_tail(
    shape: &ZipfShape,
    c: Bracket,
    n: f64,
    start: f64,
    target: f64,
    prefix_lo: f64,
    opts: &EvalOptions<'_>,
) -> Result<Bracket, ExactError> {
    const INDEX_LIMIT: f64 = 4503599627370496.0; // 2^52
    let beta = shape.beta();
    let mut lo = CertifiedSum::new();
    let mut hi = CertifiedSum::new();
    let mut a = start;
    let mut groups = 0u64;
    loop {
        let p_a = (c.hi() * shape.weight(a) * (1.0 + shape.weight_rel_err())).next_up();
        // Estimated slack if the rest were linearized now.
        let tail_est = c.mid() * a.ln_1p().powf(-beta) / beta;
        let slack_est = tail_est * (n - occupancy::ratio(p_a.min(1.0), n));
        let total_est = prefix_lo + lo.value() + tail_est * occupancy::ratio(p_a.min(1.0), n);
        if slack_est <= target * total_est || a >= INDEX_LIMIT || groups >= opts.group_budget {
            let t = c * shape.sum_range(a, f64::INFINITY);
            let lin = linear_tail(t, p_a, n);
            return Ok(Bracket::new(
                (lo.finish().lo() + lin.lo()).next_down().max(0.0),
                (hi.finish().hi() + lin.hi()).next_up(),
            ));
        }
        if groups % 4096 == 0 {
            opts.check_cancel()?;
        }
        let theta = (2.0 * target / (n * p_a).max(f64::MIN_POSITIVE)).clamp(1.0 / 1048576.0, 1.0);
        let b = (a + (a * theta).floor().max(1.0)).min(INDEX_LIMIT);
        let m = c * shape.sum_range(a, b);
        let p_lo = (c.lo() * shape.weight(b - 1.0) * (1.0 - shape.weight_rel_err())).next_down();
        lo.add(m.lo() * occupancy::ratio_lo(p_a.min(1.0), n), 2.0 * UNIT_ROUNDOFF);
        hi.add(m.hi() * occupancy::ratio_hi(p_lo.min(1.0), n), 2.0 * UNIT_ROUNDOFF);
        groups += 1;
        a = b;
    }
}

fn zipflog_range(z: &ZipfLogDist, n: f64, opts: &EvalOptions<'_>) -> Result<Bracket, ExactError> {
    let shape = z.shape();
    let c = z.normalizer();
    let c_mid = c.mid();
    let rel = TERM_REL_ERR + shape.weight_rel_err() + 2.0 * UNIT_ROUNDOFF;
    let target = opts.rel_tol * 0.25;
    let eta = LINEAR_LOG2_THRESHOLD.exp2();
    let mut acc = CertifiedSum::new();
    let mut x = 0u64;
    let mut next_check = 4096u64;
    loop {
        x += 1;
        let p = c_mid * shape.weight(x as f64);
        acc.add(occupancy::term(p, n), rel);
        if x % 65536 == 0 {
            opts.check_cancel()?;
        }
        let at_cap = x >= opts.enumeration_cap;
        if (n * p <= eta && x >= next_check) || at_cap {
            // By concavity of p -> 1-(1-p)^n, rescaling p by λ rescales the term by at most λ.
            let prefix = acc.finish();
            let prefix = Bracket::new(
                (prefix.lo() * c.lo() / c_mid).next_down(),
                (prefix.hi() * c.hi() / c_mid).next_up(),
            );
            let tail = zipflog_tail(&shape, c, n, x as f64 + 1.0, target, prefix.lo(), opts)?;
            let total = prefix + tail;
            if total.rel_width() <= 2.0 * opts.rel_tol * 0.25 || at_cap {
                return Ok(total);
            }
            next_check = next_check.saturating_mul(2);
        }
    }
}

/// Linear enclosure of a sum of log2 brackets.
fn sum_linear(parts: impl Iterator<Item = Log2Bracket>) -> Bracket {
    let mut lo = CertifiedSum::new();
    let mut hi = CertifiedSum::new();
    for part in parts {
        let b = part.to_linear();
        lo.add(b.lo(), 0.0);
        hi.add(b.hi(), 0.0);
    }
    Bracket::new(lo.finish().lo().max(0.0), hi.finish().hi())
}

/// Contribution of one block: `count · (1 - (1-p)^n)` with `p` in its log2 enclosure.
///
/// In the linear regime the contribution is formed from the block's total mass,
/// since `log2 count + log2 p` loses all precision once `b_k` exceeds 2^53.
fn block_term(blk: &RigorousBlock, log2_n: Log2Number) -> Log2Bracket {
    let s_hi = (blk.log2_mass.1 + log2_n.log2()).next_up();
    let imprecise = s_hi < -1000.0 || blk.log2_count >= 4503599627370496.0; // 2^52
    if s_hi <= LINEAR_LOG2_THRESHOLD && imprecise {
        let ln = log2_n.log2();
        // n·T·(1 - (n-1)p/2) <= contribution <= n·T
        let shrink = (-(s_hi - 1.0).exp2()).ln_1p() / std::f64::consts::LN_2;
        let lo = crate::bracket::down_by(blk.log2_total.0 + ln + shrink, 4);
        let hi = crate::bracket::up_by(blk.log2_total.1 + ln, 2);
        return Log2Bracket::new(Log2Number::from_log2(lo), Log2Number::from_log2(hi));
    }
    let t_lo = occupancy_term_log2(Log2Number::from_log2(blk.log2_mass.0), log2_n);
    let t_hi = occupancy_term_log2(Log2Number::from_log2(blk.log2_mass.1), log2_n);
    Log2Bracket::new(t_lo.lo(), t_hi.hi()).scale(Log2Number::from_log2(blk.log2_count))
}

/// Tail contribution in log2 form for atoms of total mass `mass`, each at most `2^log2_p_max`.
fn linear_tail_log2(mass: Log2Bracket, log2_p_max: f64, log2_n: Log2Number) -> Log2Bracket {
    if mass.hi().is_zero() {
        return Log2Bracket::zero();
    }
    let hi = Log2Number::from_log2((mass.log2_hi() + log2_n.log2()).next_up());
    let s = (log2_p_max + log2_n.log2()).next_up();
    let lo = if s <= LINEAR_LOG2_THRESHOLD && !mass.lo().is_zero() {
        let shrink = (-(s - 1.0).exp2()).ln_1p() / std::f64::consts::LN_2;
        Log2Number::from_log2(crate::bracket::down_by(
            mass.log2_lo() + log2_n.log2() + shrink,
            4,
        ))
    } else {
        Log2Number::ZERO
    };
    Log2Bracket::new(lo.min(hi), hi)
}

fn blocks_range(
    blocks: &[RigorousBlock],
    tail: Option<(Log2Bracket, f64)>,
    log2_n: Log2Number,
) -> Log2Bracket {
    let mut total = blocks
        .iter()
        .map(|blk| block_term(blk, log2_n))
        .fold(Log2Bracket::zero(), |acc, t| acc.add(&t));
    if let Some((mass, log2_p_max)) = tail {
        total = total.add(&linear_tail_log2(mass, log2_p_max, log2_n));
    }
    // Where everything fits in binary64, a compensated linear sum is tighter.
    if log2_n.log2() < 1000.0 {
        let mut parts: Vec<Log2Bracket> = blocks.iter().map(|b| block_term(b, log2_n)).collect();
        if let Some((mass, log2_p_max)) = tail {
            parts.push(linear_tail_log2(mass, log2_p_max, log2_n));
        }
        if parts.iter().all(|p| p.hi().is_representable()) {
            let lin = sum_linear(parts.into_iter());
            let l = Log2Bracket::from_linear(&lin);
            let lo = l.lo().max(total.lo());
            let hi = l.hi().min(total.hi());
            if lo <= hi {
                return Log2Bracket::new(lo, hi);
            }
        }
    }
    total
}

fn counterexample_range(c: &CounterexampleDist, log2_n: Log2Number) -> Log2Bracket {
    let tail = match c.kind() {
        NormalizerKind::Truncated => None,
        NormalizerKind::Unbounded => Some((c.tail_mass_log2(), c.tail_log2_max_mass())),
    };
    blocks_range(&c.rigorous_blocks(), tail, log2_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_four_at_two_draws() {
        let d = DistributionSpec::uniform(4).unwrap();
        let r = expected_range(&d, 2, 1e-12).unwrap();
        assert!(r.bracket.contains(1.75), "{}", r.bracket);
        assert!(!r.budget_exceeded);
    }

    #[test]
    fn one_draw_gives_one_distinct_value() {
        for d in [
            DistributionSpec::uniform(7).unwrap(),
            DistributionSpec::geometric(0.9).unwrap(),
            DistributionSpec::zipflog(1.0).unwrap(),
            DistributionSpec::block_counterexample(4).unwrap(),
        ] {
            let r = expected_range(&d, 1, 1e-9).unwrap();
            assert!(r.bracket.contains(1.0), "{}: {}", d.kind_name(), r.bracket);
            assert!(r.bracket.width() <= 2f64.powi(-40), "{}: {}", d.kind_name(), r.bracket);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let d = DistributionSpec::uniform(2).unwrap();
        assert!(expected_range(&d, 0, 1e-6).is_err());
        assert!(expected_range(&d, 5, 0.0).is_err());
        assert!(expected_range(&d, 5, 0.5).is_err());
        assert!(expected_range_log2(&d, Log2Number::from_log2(3.0)).is_err());
    }

    #[test]
    fn cancellation_is_observed() {
        let token = CancelToken::new();
        token.cancel();
        let opts = EvalOptions {
            cancel: Some(&token),
            ..EvalOptions::default()
        };
        let d = DistributionSpec::zipflog(1.0).unwrap();
        assert_eq!(
            expected_range_with(&d, 1_000_000, &opts),
            Err(ExactError::Cancelled)
        );
    }

    #[test]
    fn saturated_uniform_block_counts_its_atoms() {
        let d = DistributionSpec::blocks(vec![crate::Block::new(2.0, -2.0).unwrap()]).unwrap();
        let r = expected_range_log2(&d, Log2Number::from_log2(4096.0)).unwrap();
        assert!(r.contains_log2(2.0), "{r}");
    }
}
