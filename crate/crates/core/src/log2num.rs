//! Positive reals stored as their base-2 logarithm.
//!
//! Sample sizes such as `2^(2*65536)` and atom masses such as `2^-65536` are
//! far outside binary64 range but have perfectly ordinary logarithms.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul};

use serde::{Deserialize, Serialize};

use crate::bracket::{down_by, up_by, Bracket, LIBM_ULPS};

/// `log2(1 + 2^d)` for `d <= 0`.
fn log2_1p_exp2(d: f64) -> f64 {
    debug_assert!(d <= 0.0);
    if d < -1100.0 {
        return 0.0;
    }
    d.exp2().ln_1p() / std::f64::consts::LN_2
}

/// `log2(1 - 2^d)` for `d < 0`.
fn log2_1m_exp2(d: f64) -> f64 {
    debug_assert!(d < 0.0);
    if d < -1100.0 {
        return -0.0;
    }
    if d > -1.0 {
        // 1 - 2^d = -expm1(d ln 2); keeps precision for d close to zero.
        (-(d * std::f64::consts::LN_2).exp_m1()).log2()
    } else {
        (-(d.exp2())).ln_1p() / std::f64::consts::LN_2
    }
}

/// A nonnegative real encoded by `log2(value)`; zero is `-inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Log2Number {
    log2_value: f64,
}

impl Log2Number {
    pub const ZERO: Log2Number = Log2Number {
        log2_value: f64::NEG_INFINITY,
    };
    pub const ONE: Log2Number = Log2Number { log2_value: 0.0 };

    /// Panics on NaN or `+inf`.
    pub fn from_log2(log2_value: f64) -> Self {
        assert!(
            !log2_value.is_nan() && log2_value != f64::INFINITY,
            "invalid log2 value {log2_value}"
        );
        Self { log2_value }
    }

    /// Panics on negative or non-finite input.
    pub fn from_f64(v: f64) -> Self {
        assert!(v >= 0.0 && v.is_finite(), "invalid value {v}");
        Self {
            log2_value: v.log2(),
        }
    }

    pub fn from_u64(v: u64) -> Self {
        if v == 0 {
            Self::ZERO
        } else if v < (1u64 << 53) {
            Self::from_f64(v as f64)
        } else {
            // v as f64 may round; log2 of the rounded value is still within 1 ulp.
            Self::from_log2((v as f64).log2())
        }
    }

    pub fn log2(&self) -> f64 {
        self.log2_value
    }

    pub fn is_zero(&self) -> bool {
        self.log2_value == f64::NEG_INFINITY
    }

    /// The value as binary64; overflows to `inf`, underflows to `0`.
    pub fn value(&self) -> f64 {
        self.log2_value.exp2()
    }

    pub fn is_representable(&self) -> bool {
        self.is_zero() || (-1074.0..1024.0).contains(&self.log2_value)
    }

    /// Natural logarithm of the encoded value.
    pub fn ln(&self) -> f64 {
        self.log2_value * std::f64::consts::LN_2
    }

    pub fn powf(&self, p: f64) -> Self {
        if self.is_zero() {
            return if p > 0.0 { Self::ZERO } else { Self::ONE };
        }
        Self::from_log2(self.log2_value * p)
    }

    pub fn add(&self, other: &Self) -> Self {
        let (big, small) = if self.log2_value >= other.log2_value {
            (self.log2_value, other.log2_value)
        } else {
            (other.log2_value, self.log2_value)
        };
        if small == f64::NEG_INFINITY {
            return Self::from_log2(big);
        }
        Self::from_log2(big + log2_1p_exp2(small - big))
    }

    /// `self - other`, saturating at zero.
    pub fn sub(&self, other: &Self) -> Self {
        if other.is_zero() {
            return *self;
        }
        if other.log2_value >= self.log2_value {
            return Self::ZERO;
        }
        Self::from_log2(self.log2_value + log2_1m_exp2(other.log2_value - self.log2_value))
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for Log2Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.log2_value.partial_cmp(&other.log2_value)
    }
}

impl Mul for Log2Number {
    type Output = Log2Number;
    fn mul(self, rhs: Log2Number) -> Log2Number {
        if self.is_zero() || rhs.is_zero() {
            return Log2Number::ZERO;
        }
        Log2Number::from_log2(self.log2_value + rhs.log2_value)
    }
}

impl Div for Log2Number {
    type Output = Log2Number;
    fn div(self, rhs: Log2Number) -> Log2Number {
        assert!(!rhs.is_zero(), "division by zero");
        if self.is_zero() {
            return Log2Number::ZERO;
        }
        Log2Number::from_log2(self.log2_value - rhs.log2_value)
    }
}

impl fmt::Display for Log2Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "0")
        } else {
            write!(f, "2^{}", self.log2_value)
        }
    }
}

/// A certified enclosure `[lo, hi]` of a nonnegative real, kept in log2 form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Log2Bracket {
    lo: Log2Number,
    hi: Log2Number,
}

fn log2_down(x: Log2Number, ulps: u32) -> Log2Number {
    if x.is_zero() {
        x
    } else {
        Log2Number::from_log2(down_by(x.log2(), ulps))
    }
}

fn log2_up(x: Log2Number, ulps: u32) -> Log2Number {
    if x.is_zero() {
        x
    } else {
        Log2Number::from_log2(up_by(x.log2(), ulps))
    }
}

impl Log2Bracket {
    pub fn new(lo: Log2Number, hi: Log2Number) -> Self {
        assert!(lo <= hi, "invalid log2 bracket [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: Log2Number) -> Self {
        Self::new(x, x)
    }

    pub fn zero() -> Self {
        Self::point(Log2Number::ZERO)
    }

    /// Encloses a linear bracket with nonnegative endpoints.
    pub fn from_linear(b: &Bracket) -> Self {
        assert!(b.lo() >= 0.0, "negative bracket {b}");
        let lo = if b.lo() == 0.0 {
            Log2Number::ZERO
        } else {
            Log2Number::from_log2(down_by(b.lo().log2(), LIBM_ULPS))
        };
        let hi = if b.hi() == 0.0 {
            Log2Number::ZERO
        } else {
            Log2Number::from_log2(up_by(b.hi().log2(), LIBM_ULPS))
        };
        Self::new(lo, hi)
    }

    pub fn lo(&self) -> Log2Number {
        self.lo
    }

    pub fn hi(&self) -> Log2Number {
        self.hi
    }

    /// Enclosure of the log2 values; `lo` may be `-inf` when the lower endpoint is zero.
    pub fn log2_lo(&self) -> f64 {
        self.lo.log2()
    }

    pub fn log2_hi(&self) -> f64 {
        self.hi.log2()
    }

    pub fn contains_log2(&self, l: f64) -> bool {
        self.lo.log2() <= l && l <= self.hi.log2()
    }

    pub fn intersects(&self, other: &Log2Bracket) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Linear enclosure; endpoints underflow to zero or overflow to `f64::MAX`.
    pub fn to_linear(&self) -> Bracket {
        // Integer exponents in the normal range convert exactly.
        let exact = |l: f64| l.fract() == 0.0 && (-1022.0..=1023.0).contains(&l);
        let lo = if self.lo.is_zero() {
            0.0
        } else if exact(self.lo.log2()) {
            self.lo.value()
        } else {
            down_by(self.lo.value(), LIBM_ULPS).max(0.0)
        };
        let hi = if self.hi.is_zero() {
            0.0
        } else if exact(self.hi.log2()) {
            self.hi.value()
        } else {
            let v = self.hi.value();
            if v.is_finite() {
                up_by(v, LIBM_ULPS).max(f64::from_bits(1))
            } else {
                f64::MAX
            }
        };
        Bracket::new(lo.min(hi), hi)
    }

    pub fn add(&self, other: &Log2Bracket) -> Log2Bracket {
        Log2Bracket::new(
            log2_down(self.lo.add(&other.lo), LIBM_ULPS),
            log2_up(self.hi.add(&other.hi), LIBM_ULPS),
        )
    }

    pub fn mul(&self, other: &Log2Bracket) -> Log2Bracket {
        Log2Bracket::new(
            log2_down(self.lo * other.lo, 1),
            log2_up(self.hi * other.hi, 1),
        )
    }

    pub fn scale(&self, k: Log2Number) -> Log2Bracket {
        self.mul(&Log2Bracket::point(k))
    }
}

impl fmt::Display for Log2Bracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}
