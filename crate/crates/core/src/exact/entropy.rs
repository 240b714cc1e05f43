//! Shannon entropy `S(π) = -Σ π_x ln π_x`, in nats.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::bracket::{Bracket, CertifiedSum, UNIT_ROUNDOFF};
use crate::distributions::{counterexample, DistributionSpec, NormalizerKind, ZipfLogDist};

use super::{validate_tol, EvalOptions, ExactError};

/// Outcome of an entropy evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EntropyResult {
    Finite {
        value: Bracket,
        budget_exceeded: bool,
    },
    /// `evidence` holds per-block contributions or per-prefix partial sums;
    /// `analytic_flag` marks families known to have infinite entropy.
    Divergent {
        evidence: Vec<f64>,
        analytic_flag: bool,
    },
}

impl EntropyResult {
    pub fn is_finite(&self) -> bool {
        matches!(self, EntropyResult::Finite { .. })
    }

    pub fn value(&self) -> Option<Bracket> {
        match self {
            EntropyResult::Finite { value, .. } => Some(*value),
            EntropyResult::Divergent { .. } => None,
        }
    }
}

pub fn entropy(dist: &DistributionSpec, rel_tol: f64) -> Result<EntropyResult, ExactError> {
    entropy_with(dist, &EvalOptions::with_rel_tol(rel_tol))
}

pub fn entropy_with(
    dist: &DistributionSpec,
    opts: &EvalOptions<'_>,
) -> Result<EntropyResult, ExactError> {
    validate_tol(opts.rel_tol)?;
    let finite = |value: Bracket| EntropyResult::Finite {
        budget_exceeded: value.rel_width() > opts.rel_tol,
        value,
    };
    Ok(match dist {
        DistributionSpec::Finite(f) => {
            let mut acc = CertifiedSum::new();
            for (i, &p) in f.masses().iter().enumerate() {
                if i % 65536 == 0 {
                    opts.check_cancel()?;
                }
                if p > 0.0 {
                    acc.add(-p * p.ln(), 3.0 * UNIT_ROUNDOFF);
                }
            }
            finite(acc.finish().clamp(0.0, f64::MAX))
        }
        DistributionSpec::Geometric(g) => {
            // -ln(1-q) - q ln q / (1-q)
            let q = Bracket::point(g.q());
            let one_minus_q = Bracket::widened(1.0 - g.q(), 1);
            let s = -one_minus_q.ln() - q * q.ln() / one_minus_q;
            finite(s.clamp(0.0, f64::MAX))
        }
        DistributionSpec::ZipfLog(z) if z.beta() <= 1.0 => EntropyResult::Divergent {
            evidence: zipflog_partial_entropies(z),
            analytic_flag: true,
        },
        DistributionSpec::ZipfLog(z) => finite(zipflog_entropy(z, opts)?),
        DistributionSpec::BlockCounterexample(c) => {
            let a = c.normalizer();
            let parts = (1..=c.blocks())
                .map(|k| entropy_block_contribution(a, k))
                .collect::<Result<Vec<_>, _>>()?;
            match c.kind() {
                NormalizerKind::Truncated => {
                    finite(parts.into_iter().fold(Bracket::point(0.0), |s, b| s + b))
                }
                NormalizerKind::Unbounded => EntropyResult::Divergent {
                    evidence: parts.iter().map(Bracket::mid).collect(),
                    analytic_flag: true,
                },
            }
        }
        DistributionSpec::Blocks(b) => {
            let mut s = Bracket::point(0.0);
            for blk in b.blocks() {
                let surprise = Bracket::widened(-blk.log2_mass() * LN_2, 1);
                s = s + blk.total_mass() * surprise;
            }
            finite(s.clamp(0.0, f64::MAX))
        }
    })
}

/// Entropy contribution of block `k` of the doubly-exponential counterexample:
/// `A ln 2 - (A / b_k) ln A`.
pub fn entropy_block_contribution(a: Bracket, k: u32) -> Result<Bracket, ExactError> {
    if k == 0 {
        return Err(ExactError::Domain("block index must be >= 1".into()));
    }
    if a.lo() <= 1.0 {
        return Err(ExactError::Domain(format!("normalizer {a} must exceed 1")));
    }
    let ln2 = Bracket::widened(LN_2, 1);
    let log2_bk = counterexample::log2_b(k);
    let inv_b = if log2_bk < 1000.0 {
        Bracket::point((-log2_bk).exp2())
    } else {
        Bracket::new(0.0, f64::from_bits(1))
    };
    Ok(a * ln2 - a * inv_b * a.ln())
}

/// Partial entropies `-Σ_{x<=2^j} π_x ln π_x` for `j = 1..=20` at the midpoint normalizer.
fn zipflog_partial_entropies(z: &ZipfLogDist) -> Vec<f64> {
    let shape = z.shape();
    let c = z.normalizer().mid();
    let mut out = Vec::new();
    let mut s = 0.0;
    let mut next = 2u64;
    for x in 1..=(1u64 << 20) {
        let p = c * shape.weight(x as f64);
        s += -p * p.ln();
        if x == next {
            out.push(s);
            next *= 2;
        }
    }
    out
}

/// `S = -ln C + C·G` with `G = Σ w(x)(-ln w(x))`, `-ln w = ln x + (β+1) ln ln(x+1)`.
fn zipflog_entropy(z: &ZipfLogDist, opts: &EvalOptions<'_>) -> Result<Bracket, ExactError> {
    let shape = z.shape();
    let beta = shape.beta();
    let c = z.normalizer();
    let rel_w = shape.weight_rel_err();
    let mut acc = CertifiedSum::new();
    // Absolute error from evaluating -ln w, which can cancel for small x.
    let mut slack = 0.0;
    let mut x = 0u64;
    let mut next_check = 1024u64;
    loop {
        x += 1;
        let xf = x as f64;
        let w = shape.weight(xf);
        let lx = xf.ln();
        let lll = xf.ln_1p().ln();
        let surprise = lx + (beta + 1.0) * lll;
        acc.add(w * surprise, rel_w + 2.0 * UNIT_ROUNDOFF);
        slack += w * (lx + (beta + 1.0) * lll.abs()) * 8.0 * UNIT_ROUNDOFF;
        if x % 65536 == 0 {
            opts.check_cancel()?;
        }
        let at_cap = x >= opts.enumeration_cap;
        if x == next_check || at_cap {
            let head = acc.finish() + Bracket::new(-slack, slack).widen_ulps(2);
            let g = head
                + shape.tail_log_moment(xf)
                + Bracket::point(beta + 1.0) * shape.tail_loglog_moment(xf);
            let s = c * g - c.ln();
            if s.rel_width() <= opts.rel_tol || at_cap {
                return Ok(s);
            }
            next_check *= 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_eight_is_ln_eight() {
        let d = DistributionSpec::uniform(8).unwrap();
        let v = entropy(&d, 1e-12).unwrap().value().unwrap();
        assert!(v.contains(8f64.ln()), "{v}");
        assert!(v.width() < 1e-14);
    }

    #[test]
    fn geometric_half_is_two_ln_two() {
        let d = DistributionSpec::geometric(0.5).unwrap();
        let v = entropy(&d, 1e-12).unwrap().value().unwrap();
        assert!(v.contains(2.0 * LN_2), "{v}");
        assert!(v.width() < 1e-12);
    }

    #[test]
    fn single_block_truncation_contribution() {
        let b = entropy_block_contribution(Bracket::point(4.0), 1).unwrap();
        assert!(b.contains(2.0 * LN_2), "{b}");
    }

    #[test]
    fn divergent_families_are_flagged() {
        for d in [
            DistributionSpec::zipflog(0.5).unwrap(),
            DistributionSpec::zipflog(1.0).unwrap(),
            DistributionSpec::block_counterexample(4).unwrap(),
        ] {
            match entropy(&d, 1e-6).unwrap() {
                EntropyResult::Divergent {
                    evidence,
                    analytic_flag,
                } => {
                    assert!(analytic_flag);
                    assert!(evidence.windows(2).all(|w| w[1] > w[0]), "{evidence:?}");
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn zipflog_beta_two_is_finite_and_tight() {
        let d = DistributionSpec::zipflog(2.0).unwrap();
        let r = entropy(&d, 1e-3).unwrap();
        let v = r.value().unwrap();
        assert!(v.rel_width() <= 1e-3, "{v}");
        assert!(v.lo() > 0.0);
    }
}
