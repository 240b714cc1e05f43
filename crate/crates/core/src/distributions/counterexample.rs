//! The doubly-exponential block distribution.
//!
//! Block `k` holds `2^b_k / b_k` atoms of mass `A 2^-b_k` each, with
//! `b_k = 2^(2^k)`. Since `b_k` is a power of two the count is exactly
//! `2^(b_k - 2^k)`, and block `k` carries total mass `A 2^-(2^k)`.

use serde::{Deserialize, Serialize};

use crate::bracket::Bracket;

/// Largest block index whose `b_k` and `b_{k+1}` are finite in binary64 log form.
pub const MAX_BLOCKS: u32 = 8;

/// How the normalizer `A` is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizerKind {
    /// `A` normalizes the infinite sequence of blocks; blocks beyond `K` form an analytic tail.
    #[default]
    Unbounded,
    /// `A` normalizes only the first `K` blocks, which make up the whole support.
    Truncated,
}

/// `log2 b_k = 2^k`.
pub fn log2_b(k: u32) -> f64 {
    (k as f64).exp2()
}

/// `b_k` as binary64 (`inf` for `k >= 10`).
pub fn b(k: u32) -> f64 {
    log2_b(k).exp2()
}

/// `log2` of the number of atoms in block `k`: `b_k - 2^k`.
pub fn log2_block_count(k: u32) -> f64 {
    b(k) - log2_b(k)
}

/// Exact atom count of block `k` when it fits in 53 bits.
pub fn block_count(k: u32) -> Option<u64> {
    let l = log2_block_count(k);
    (l <= 53.0).then(|| 1u64 << (l as u32))
}

/// `Σ_{ℓ>k} 2^-(2^ℓ)` enclosed in log2 form.
///
/// The sum lies in `[2^-m, 2^-m (1 + 2^(1-m))]` with `m = 2^(k+1)`, and
/// `log2(1 + x) <= x / ln 2`.
pub(crate) fn log2_tail_series(k: u32) -> (f64, f64) {
    let m = log2_b(k + 1);
    let rel = (1.0 - m).exp2() / std::f64::consts::LN_2;
    (-m, (-m + rel * 1.01).next_up())
}

/// Normalizer `A = 1 / Σ_{ℓ=1..K} 2^-(2^ℓ)`, or over all `ℓ >= 1` when `blocks` is `None`.
pub fn block_normalizer(blocks: Option<u32>) -> Bracket {
    // Terms beyond ℓ = 6 are below 2^-128 and only enter through the tail bound.
    let kept = blocks.unwrap_or(6).min(10);
    let mut s = Bracket::point(0.0);
    for l in 1..=kept {
        s = s + Bracket::point((-log2_b(l)).exp2());
    }
    if blocks.is_none() {
        let (_, hi) = log2_tail_series(kept);
        s = s + Bracket::new(0.0, hi.exp2());
    }
    s.recip()
}
