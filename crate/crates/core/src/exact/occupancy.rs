//! The occupancy term `1 - (1-p)^n`: the probability that an atom of mass `p`
//! is hit at least once in `n` draws.

use crate::bracket::{down_by, up_by, Bracket, UNIT_ROUNDOFF};
use crate::log2num::{Log2Bracket, Log2Number};

use super::ExactError;

/// `log2 η`: below `n·p <= η` the term is replaced by its linear sandwich.
pub const LINEAR_LOG2_THRESHOLD: f64 = -6.0;
/// `log2` of the saturation threshold `n·p >= 64`.
pub const SATURATION_LOG2_THRESHOLD: f64 = 6.0;

/// Relative error bound of [`occupancy_term`] as evaluated in binary64.
pub const TERM_REL_ERR: f64 = 8.0 * UNIT_ROUNDOFF;

/// `1 - (1-p)^n`, evaluated as `-expm1(n log1p(-p))`.
pub fn occupancy_term(p: f64, n: u64) -> Result<f64, ExactError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ExactError::Domain(format!("p = {p} outside [0, 1]")));
    }
    Ok(term(p, n as f64))
}

#[inline]
pub(crate) fn term(p: f64, n: f64) -> f64 {
    if n == 0.0 || p == 0.0 {
        0.0
    } else if p == 1.0 {
        1.0
    } else {
        -(n * (-p).ln_1p()).exp_m1()
    }
}

/// `(1 - (1-p)^n) / p`, which is nonincreasing in `p`; its limit at `p = 0` is `n`.
#[inline]
pub(crate) fn ratio(p: f64, n: f64) -> f64 {
    if p == 0.0 {
        n
    } else {
        term(p, n) / p
    }
}

/// Certified lower bound on [`ratio`].
pub(crate) fn ratio_lo(p: f64, n: f64) -> f64 {
    (ratio(p, n) * (1.0 - 12.0 * UNIT_ROUNDOFF)).next_down()
}

/// Certified upper bound on [`ratio`].
pub(crate) fn ratio_hi(p: f64, n: f64) -> f64 {
    (ratio(p, n) * (1.0 + 12.0 * UNIT_ROUNDOFF)).next_up().min(n)
}

fn log2_of_one_minus_2_pow(d: f64) -> f64 {
    if d > -1.0 {
        (-(d * std::f64::consts::LN_2).exp_m1()).log2()
    } else {
        (-(d.exp2())).ln_1p() / std::f64::consts::LN_2
    }
}

/// Enclosure of `1 - (1-p)^n` for `p = 2^log2_p`, `n = 2^log2_n`, in log2 form.
///
/// Three regimes:
/// - `n·p >= 64`: `[1 - 2^-64, 1]`, since `(1-p)^n <= e^-64`.
/// - `n·p <= 2^-6`: `[n·p (1 - (n-1)·p/2), n·p]`, inside `[n·p (1 - n·p/2), n·p]`.
/// - otherwise: direct evaluation with `n·p` formed in the log domain.
///
/// Between `2^-1000` and `2^-6` the direct evaluation is used as well; it lies
/// inside the sandwich and is much tighter.
pub fn occupancy_term_log2(log2_p: Log2Number, log2_n: Log2Number) -> Log2Bracket {
    if log2_p.is_zero() || log2_n.is_zero() {
        return Log2Bracket::zero();
    }
    let lp = log2_p.log2().min(0.0);
    let ln = log2_n.log2();
    let s = lp + ln;
    let (s_lo, s_hi) = (s.next_down(), s.next_up());
    if lp == 0.0 && ln >= 0.0 {
        return Log2Bracket::point(Log2Number::ONE);
    }
    if s_lo >= SATURATION_LOG2_THRESHOLD {
        let lo = down_by(log2_of_one_minus_2_pow(-64.0), 2);
        return Log2Bracket::new(Log2Number::from_log2(lo), Log2Number::ONE);
    }
    // While n·p is a normal double the direct formula is accurate; the
    // sandwich below is only needed when it underflows.
    if s_hi <= LINEAR_LOG2_THRESHOLD && s_lo < -1000.0 {
        // Bonferroni: 1-(1-p)^n >= n·p (1 - (n-1)·p/2), exact at n = 1.
        let d = up_by(s_hi - 1.0 + log2_of_one_minus_2_pow(-ln), 4);
        let lo = s_lo + log2_of_one_minus_2_pow(d);
        return Log2Bracket::new(
            Log2Number::from_log2(down_by(lo, 4)),
            Log2Number::from_log2(s_hi.min(0.0)),
        );
    }
    // Direct regime: n·p in (2^-1000, 2^6). t = n·(-ln(1-p)) = n·p·r with r = -ln(1-p)/p.
    let (r_lo, r_hi) = if lp >= -1000.0 {
        let p = lp.exp2();
        let r = -(-p).ln_1p() / p;
        (r * (1.0 - 4.0 * UNIT_ROUNDOFF), r * (1.0 + 4.0 * UNIT_ROUNDOFF))
    } else {
        (1.0, 1.0 + f64::EPSILON)
    };
    let np_lo = down_by(s_lo.exp2(), 2);
    let np_hi = up_by(s_hi.exp2(), 2);
    let v_lo = -(-(np_lo * r_lo)).exp_m1();
    let v_hi = -(-(np_hi * r_hi)).exp_m1();
    let hi = up_by(v_hi, 4).min(1.0).min(np_hi);
    let b = Log2Bracket::from_linear(&Bracket::new(down_by(v_lo, 4).max(0.0).min(hi), hi));
    Log2Bracket::new(b.lo().min(Log2Number::ONE), b.hi().min(Log2Number::ONE))
}
