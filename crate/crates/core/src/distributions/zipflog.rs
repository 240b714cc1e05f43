//! Rigorous sums and integrals for the Zipf-log weight `w(x) = 1/(x ln(x+1)^(β+1))`.
//!
//! Tail sums use `w` directly rather than a `ln x` surrogate. Writing
//! `1/x = 1/(x+1) + 1/(x(x+1))` splits `∫ w` into a closed-form main part
//! `ln(x+1)^-β / β` and a small remainder bounded on a geometric partition.
//! Since `w` is convex on `x > 0`, the midpoint and trapezoid rules turn those
//! integrals into two-sided bounds on the discrete sums.

use crate::bracket::{Bracket, CertifiedSum, UNIT_ROUNDOFF};

use super::DistError;

/// Partition ratio for the remainder integral is `2^(1/PIECES_PER_OCTAVE)`.
const PIECES_PER_OCTAVE: u32 = 128;
/// The remainder integral is partitioned up to `s * 2^REMAINDER_OCTAVES`; beyond
/// that a one-piece bound is used.
const REMAINDER_OCTAVES: u32 = 40;

const U: f64 = UNIT_ROUNDOFF;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ZipfShape {
    beta: f64,
}

impl ZipfShape {
    pub(crate) fn new(beta: f64) -> Self {
        debug_assert!(beta > 0.0 && beta.is_finite());
        Self { beta }
    }

    pub(crate) fn beta(&self) -> f64 {
        self.beta
    }

    /// `1 / (x ln(x+1)^(β+1))`.
    pub(crate) fn weight(&self, x: f64) -> f64 {
        1.0 / (x * x.ln_1p().powf(self.beta + 1.0))
    }

    /// Relative error bound of [`Self::weight`] as evaluated in binary64.
    pub(crate) fn weight_rel_err(&self) -> f64 {
        (self.beta + 8.0) * U
    }

    /// `ln(x+1)^-(β+1)`, the slowly varying factor of the remainder integrand.
    fn slow(&self, x: f64) -> f64 {
        x.ln_1p().powf(-(self.beta + 1.0))
    }

    /// `∫_s^t dx / ((x+1) ln(x+1)^(β+1)) = (L(s)^-β - L(t)^-β)/β`.
    fn main_part(&self, s: f64, t: f64) -> Bracket {
        let ls = s.ln_1p();
        let head = ls.powf(-self.beta) / self.beta;
        let v = if t.is_infinite() {
            head
        } else {
            let dl = ((t - s) / (1.0 + s)).ln_1p();
            let rho = (dl / ls).ln_1p();
            head * -(-self.beta * rho).exp_m1()
        };
        Bracket::around(v, 64.0 * U * (1.0 + self.beta))
    }

    /// `∫_a^b dx/(x(x+1)) = ln((1+1/a)/(1+1/b))`.
    fn pair_weight(a: f64, b: f64) -> f64 {
        if b.is_infinite() {
            (1.0 / a).ln_1p()
        } else {
            ((b - a) / (a * (b + 1.0))).ln_1p()
        }
    }

    /// `∫_s^t dx / (x(x+1) ln(x+1)^(β+1))` bounded piecewise.
    fn remainder(&self, s: f64, t: f64) -> Bracket {
        let ratio = (1.0 / PIECES_PER_OCTAVE as f64).exp2();
        let stop = if t.is_infinite() {
            s * (REMAINDER_OCTAVES as f64).exp2()
        } else {
            t
        };
        let mut lo = CertifiedSum::new();
        let mut hi = CertifiedSum::new();
        let mut a = s;
        while a < stop {
            let b = (a * ratio).min(stop);
            let w = Self::pair_weight(a, b);
            lo.add(self.slow(b) * w, 16.0 * U * (1.0 + self.beta));
            hi.add(self.slow(a) * w, 16.0 * U * (1.0 + self.beta));
            a = b;
        }
        if t.is_infinite() {
            // Beyond `stop`, the integrand is at most slow(stop)/(x(x+1)).
            hi.add(
                self.slow(stop) * Self::pair_weight(stop, f64::INFINITY),
                16.0 * U * (1.0 + self.beta),
            );
        }
        Bracket::new(lo.finish().lo().max(0.0), hi.finish().hi())
    }

    /// `∫_s^t w(x) dx` for `0 < s <= t <= ∞`.
    pub(crate) fn integral(&self, s: f64, t: f64) -> Bracket {
        debug_assert!(s > 0.0 && s <= t);
        if s == t {
            return Bracket::point(0.0);
        }
        self.main_part(s, t) + self.remainder(s, t)
    }

    /// `Σ_{x=a}^{b-1} w(x)` for integers `1 <= a < b`; `b = ∞` gives the tail.
    pub(crate) fn sum_range(&self, a: f64, b: f64) -> Bracket {
        debug_assert!(a >= 1.0 && a < b);
        if b == a + 1.0 {
            return Bracket::around(self.weight(a), self.weight_rel_err());
        }
        let last = b - 1.0;
        // Convexity: w(x) <= ∫_{x-1/2}^{x+1/2} w, and the trapezoid rule overestimates.
        let upper = self.integral(a - 0.5, if b.is_infinite() { b } else { b - 0.5 });
        let ends = if b.is_infinite() {
            Bracket::around(0.5 * self.weight(a), self.weight_rel_err() + U)
        } else {
            Bracket::around(
                0.5 * (self.weight(a) + self.weight(last)),
                self.weight_rel_err() + 2.0 * U,
            )
        };
        let lower = self.integral(a, if b.is_infinite() { b } else { last }) + ends;
        Bracket::new(lower.lo().min(upper.hi()), upper.hi())
    }

    /// Enumerated prefix `Σ_{x=from}^{to} w(x)` accumulated into `acc`.
    pub(crate) fn accumulate(&self, acc: &mut CertifiedSum, from: u64, to: u64) {
        let rel = self.weight_rel_err();
        for x in from..=to {
            acc.add(self.weight(x as f64), rel);
        }
    }

    /// `Σ_{x>X} w(x) ln x` for `β > 1`, `X >= 16`.
    pub(crate) fn tail_log_moment(&self, x_start: f64) -> Bracket {
        debug_assert!(self.beta > 1.0 && x_start >= 16.0);
        let b1 = self.beta - 1.0;
        let hi = 1.0 / (b1 * x_start.ln().powf(b1));
        let lo = 1.0 / (b1 * (x_start + 2.0).ln().powf(b1))
            - 1.0 / (x_start * x_start.ln_1p().powf(self.beta + 1.0));
        Bracket::new(lo.max(0.0), hi).widen_ulps(64)
    }

    /// `Σ_{x>X} w(x) ln ln(x+1)` for `β > 1`, `X >= 16`.
    pub(crate) fn tail_loglog_moment(&self, x_start: f64) -> Bracket {
        debug_assert!(self.beta > 1.0 && x_start >= 16.0);
        let anti = |a: f64| {
            let la = a.ln();
            la.ln() / (self.beta * la.powf(self.beta))
                + 1.0 / (self.beta * self.beta * la.powf(self.beta))
        };
        Bracket::new(anti(x_start + 2.0), anti(x_start)).widen_ulps(64)
    }
}

/// Normalizer `C = 1 / Σ_x w(x)` with relative width at most `rel_tol`.
pub(crate) fn normalizer(beta: f64, rel_tol: f64, cap: u64) -> Result<Bracket, DistError> {
    let shape = ZipfShape::new(beta);
    let mut acc = CertifiedSum::new();
    let mut done = 0u64;
    let mut next = 64u64;
    loop {
        let upto = next.min(cap.max(1));
        shape.accumulate(&mut acc, done + 1, upto);
        done = upto;
        let total = acc.finish() + shape.sum_range(done as f64 + 1.0, f64::INFINITY);
        let c = total.recip();
        if c.rel_width() <= rel_tol {
            return Ok(c);
        }
        if done >= cap {
            return Err(DistError::BudgetExceeded {
                best: c,
                achieved_rel: c.rel_width(),
            });
        }
        next = next.saturating_mul(2);
    }
}
