//! Closed intervals `[lo, hi]` certified to contain an exact real value.
//!
//! Every arithmetic operation rounds its endpoints outward by one unit in the
//! last place. Transcendental functions (`ln`, `exp`, `powf`, ...) are not
//! correctly rounded by the platform libm, so those widen by [`LIBM_ULPS`].

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Unit roundoff of binary64.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// Outward widening applied after a libm call.
pub const LIBM_ULPS: u32 = 2;

#[inline]
pub(crate) fn down(x: f64) -> f64 {
    x.next_down()
}

#[inline]
pub(crate) fn up(x: f64) -> f64 {
    x.next_up()
}

pub(crate) fn down_by(mut x: f64, ulps: u32) -> f64 {
    for _ in 0..ulps {
        x = x.next_down();
    }
    x
}

pub(crate) fn up_by(mut x: f64, ulps: u32) -> f64 {
    for _ in 0..ulps {
        x = x.next_up();
    }
    x
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    lo: f64,
    hi: f64,
}

impl Bracket {
    /// Panics unless `lo <= hi` and both endpoints are finite.
    pub fn new(lo: f64, hi: f64) -> Self {
        Self::try_new(lo, hi).unwrap_or_else(|| panic!("invalid bracket [{lo}, {hi}]"))
    }

    pub fn try_new(lo: f64, hi: f64) -> Option<Self> {
        (lo.is_finite() && hi.is_finite() && lo <= hi).then_some(Self { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self::new(x, x)
    }

    /// `[v - rel*|v|, v + rel*|v|]`, rounded outward.
    pub fn around(v: f64, rel: f64) -> Self {
        let r = (v.abs() * rel).next_up();
        Self::new(down(v - r), up(v + r))
    }

    /// Encloses `v` after `ulps` units of outward rounding on each side.
    pub fn widened(v: f64, ulps: u32) -> Self {
        Self::new(down_by(v, ulps), up_by(v, ulps))
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn mid(&self) -> f64 {
        self.lo * 0.5 + self.hi * 0.5
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Width relative to the larger endpoint magnitude; zero for `[0, 0]`.
    pub fn rel_width(&self) -> f64 {
        let scale = self.lo.abs().max(self.hi.abs());
        if scale == 0.0 {
            0.0
        } else {
            self.width() / scale
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_bracket(&self, other: &Bracket) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Bracket) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn hull(&self, other: &Bracket) -> Bracket {
        Bracket::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn widen_ulps(&self, ulps: u32) -> Bracket {
        Bracket::new(down_by(self.lo, ulps), up_by(self.hi, ulps))
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Bracket {
        Bracket::new(self.lo.clamp(lo, hi), self.hi.clamp(lo, hi))
    }

    pub fn scale(&self, k: f64) -> Bracket {
        *self * Bracket::point(k)
    }

    pub fn recip(&self) -> Bracket {
        Bracket::point(1.0) / *self
    }

    /// Natural log; requires `lo > 0`.
    pub fn ln(&self) -> Bracket {
        assert!(self.lo > 0.0, "ln of non-positive bracket {self}");
        Bracket::new(down_by(self.lo.ln(), LIBM_ULPS), up_by(self.hi.ln(), LIBM_ULPS))
    }

    pub fn exp(&self) -> Bracket {
        Bracket::new(
            down_by(self.lo.exp(), LIBM_ULPS).max(0.0),
            up_by(self.hi.exp(), LIBM_ULPS),
        )
    }

    /// `x^p` for a positive bracket and any real `p`.
    pub fn powf(&self, p: f64) -> Bracket {
        assert!(self.lo > 0.0, "powf of non-positive bracket {self}");
        let a = self.lo.powf(p);
        let b = self.hi.powf(p);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        Bracket::new(down_by(lo, LIBM_ULPS).max(0.0), up_by(hi, LIBM_ULPS))
    }
}

impl fmt::Display for Bracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl Add for Bracket {
    type Output = Bracket;
    fn add(self, rhs: Bracket) -> Bracket {
        Bracket::new(down(self.lo + rhs.lo), up(self.hi + rhs.hi))
    }
}

impl Sub for Bracket {
    type Output = Bracket;
    fn sub(self, rhs: Bracket) -> Bracket {
        Bracket::new(down(self.lo - rhs.hi), up(self.hi - rhs.lo))
    }
}

impl Neg for Bracket {
    type Output = Bracket;
    fn neg(self) -> Bracket {
        Bracket::new(-self.hi, -self.lo)
    }
}

impl Mul for Bracket {
    type Output = Bracket;
    fn mul(self, rhs: Bracket) -> Bracket {
        let p = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Bracket::new(down(lo), up(hi))
    }
}

impl Div for Bracket {
    type Output = Bracket;
    fn div(self, rhs: Bracket) -> Bracket {
        assert!(
            rhs.lo > 0.0 || rhs.hi < 0.0,
            "division by bracket containing zero {rhs}"
        );
        let q = [
            self.lo / rhs.lo,
            self.lo / rhs.hi,
            self.hi / rhs.lo,
            self.hi / rhs.hi,
        ];
        let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Bracket::new(down(lo), up(hi))
    }
}

/// Compensated (Neumaier) accumulator that also tracks a rigorous error bound.
///
/// Each added term carries its own relative evaluation error; `finish` adds the
/// summation error bound `2u|S| + 4Nu^2 Σ|t|` on top.
#[derive(Clone, Debug, Default)]
pub struct CertifiedSum {
    sum: f64,
    comp: f64,
    abs_total: f64,
    eval_err: f64,
    terms: u64,
    /// Some addition or term carried an error.
    inexact: bool,
}

impl CertifiedSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a term whose computed value is within `rel_err * |value|` of the truth.
    pub fn add(&mut self, value: f64, rel_err: f64) {
        let t = self.sum + value;
        let lost = if self.sum.abs() >= value.abs() {
            (self.sum - t) + value
        } else {
            (value - t) + self.sum
        };
        self.comp += lost;
        self.inexact |= lost != 0.0 || rel_err != 0.0;
        self.sum = t;
        self.abs_total += value.abs();
        self.eval_err += value.abs() * rel_err;
        self.terms += 1;
    }

    pub fn terms(&self) -> u64 {
        self.terms
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn finish(&self) -> Bracket {
        if !self.inexact {
            return Bracket::point(self.sum);
        }
        let s = self.value();
        let u = UNIT_ROUNDOFF;
        let n = self.terms as f64;
        let err = (self.eval_err * (1.0 + 4.0 * u)
            + 2.0 * u * s.abs()
            + 4.0 * n * u * u * self.abs_total)
            .next_up();
        Bracket::new(down(s - err), up(s + err))
    }
}
