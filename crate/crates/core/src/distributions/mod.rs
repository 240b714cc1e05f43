//! Discrete distributions `π` on the positive integers with `π_1 >= π_2 >= ...`.
//!
//! Five shapes are supported: explicit finite lists, geometric laws, the
//! Zipf-log family `C/(x ln(x+1)^(β+1))`, the doubly-exponential block
//! counterexample, and generic runs of equal-mass atoms ("blocks"). Block forms
//! are never enumerated atom by atom; their counts and masses live in log2 form.

pub mod counterexample;
mod json;
pub(crate) mod zipflog;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bracket::{Bracket, CertifiedSum, UNIT_ROUNDOFF};
use crate::log2num::{Log2Bracket, Log2Number};

pub use counterexample::{block_normalizer, NormalizerKind};
pub(crate) use zipflog::ZipfShape;

/// Default enumeration cap for Zipf-log prefixes.
pub const DEFAULT_ZIPFLOG_CAP: u64 = 4_000_000;
/// Relative width targeted for the Zipf-log normalizer.
pub const DEFAULT_NORMALIZER_TOL: f64 = 1e-11;
/// Blocks kept explicitly by `{"kind":"block_counterexample"}` when unspecified.
pub const DEFAULT_COUNTEREXAMPLE_BLOCKS: u32 = 4;
/// Allowed deviation of the total mass from one.
pub const MASS_TOLERANCE: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("malformed spec: {0}")]
    Parse(String),
}

impl SpecError {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        SpecError::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("index {index} falls inside a block too large to index exactly")]
    IndexBeyondEnumerable { index: u64 },
    #[error("enumeration budget exhausted; best bracket {best} (relative width {achieved_rel:e})")]
    BudgetExceeded { best: Bracket, achieved_rel: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Encloses `2^(a+b)` allowing for the rounding of the sum `a + b`.
pub(crate) fn exp2_sum(a: f64, b: f64) -> Bracket {
    let s = a + b;
    let v = s.exp2();
    let rel = (s.abs() * UNIT_ROUNDOFF * std::f64::consts::LN_2 * 1.01) + 4.0 * UNIT_ROUNDOFF;
    Bracket::around(v, rel)
}

/// `count` atoms of identical per-atom mass, both in log2 form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    log2_count: f64,
    log2_mass: f64,
}

impl Block {
    pub fn new(log2_count: f64, log2_mass: f64) -> Result<Self, String> {
        if !log2_count.is_finite() || log2_count < 0.0 {
            return Err(format!("log2_count {log2_count} must be finite and >= 0"));
        }
        if !log2_mass.is_finite() || log2_mass > 0.0 {
            return Err(format!("log2_mass {log2_mass} must be finite and <= 0"));
        }
        if log2_count + log2_mass > 1e-12 {
            return Err(format!(
                "block mass 2^({log2_count} + {log2_mass}) exceeds 1"
            ));
        }
        if log2_count <= 53.0 {
            let c = log2_count.exp2();
            if (c - c.round()).abs() > 1e-9 * c.round().max(1.0) {
                return Err(format!("log2_count {log2_count} does not encode an integer"));
            }
        }
        Ok(Self {
            log2_count,
            log2_mass,
        })
    }

    /// A block of `count` atoms of mass `mass`.
    pub fn from_count(count: u64, mass: f64) -> Result<Self, String> {
        if count == 0 {
            return Err("block count must be positive".into());
        }
        if !(mass > 0.0 && mass <= 1.0) {
            return Err(format!("mass {mass} outside (0, 1]"));
        }
        Self::new(Log2Number::from_u64(count).log2(), mass.log2())
    }

    pub fn log2_count(&self) -> f64 {
        self.log2_count
    }

    pub fn log2_mass(&self) -> f64 {
        self.log2_mass
    }

    pub fn mass(&self) -> f64 {
        self.log2_mass.exp2()
    }

    /// The exact atom count when it fits in 53 bits.
    pub fn index_count(&self) -> Option<u64> {
        (self.log2_count <= 53.0).then(|| self.log2_count.exp2().round() as u64)
    }

    /// Exact count for offsets: 53-bit counts, or exact powers of two up to `2^127`.
    pub fn exact_count(&self) -> Option<u128> {
        if let Some(c) = self.index_count() {
            Some(c as u128)
        } else if self.log2_count.fract() == 0.0 && self.log2_count <= 127.0 {
            Some(1u128 << (self.log2_count as u32))
        } else {
            None
        }
    }

    pub fn count(&self) -> AtomCount {
        match self.index_count() {
            Some(c) => AtomCount::Exact(c as u128),
            None => AtomCount::Huge(Log2Number::from_log2(self.log2_count)),
        }
    }

    /// Enclosure of `count * mass`.
    pub fn total_mass(&self) -> Bracket {
        match self.index_count() {
            Some(c) => {
                Bracket::point(c as f64) * Bracket::around(self.mass(), 4.0 * UNIT_ROUNDOFF)
            }
            None => exp2_sum(self.log2_count, self.log2_mass),
        }
    }
}

/// An exact atom count, or its log2 when it exceeds 128 bits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AtomCount {
    Exact(u128),
    Huge(Log2Number),
}

impl AtomCount {
    pub const ZERO: AtomCount = AtomCount::Exact(0);

    pub fn exact(&self) -> Option<u128> {
        match self {
            AtomCount::Exact(c) => Some(*c),
            AtomCount::Huge(_) => None,
        }
    }

    pub fn to_log2(&self) -> Log2Number {
        match self {
            AtomCount::Exact(0) => Log2Number::ZERO,
            AtomCount::Exact(c) => Log2Number::from_log2((*c as f64).log2()),
            AtomCount::Huge(l) => *l,
        }
    }

    pub fn plus(&self, other: &AtomCount) -> AtomCount {
        match (self, other) {
            (AtomCount::Exact(a), AtomCount::Exact(b)) => match a.checked_add(*b) {
                Some(s) => AtomCount::Exact(s),
                None => AtomCount::Huge(self.to_log2().add(&other.to_log2())),
            },
            _ => AtomCount::Huge(self.to_log2().add(&other.to_log2())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDist {
    masses: Vec<f64>,
}

impl FiniteDist {
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricDist {
    q: f64,
}

impl GeometricDist {
    pub fn q(&self) -> f64 {
        self.q
    }

    /// `(1-q) q^(x-1)`.
    pub fn mass(&self, x: u64) -> f64 {
        (1.0 - self.q) * self.q.powf((x - 1) as f64)
    }

    /// `Σ_{x>X} π_x = q^X`.
    pub fn tail(&self, after: u64) -> Bracket {
        if after == 0 {
            return Bracket::point(1.0);
        }
        Bracket::around(self.q.powf(after as f64), 4.0 * UNIT_ROUNDOFF)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZipfLogDist {
    beta: f64,
    normalizer: Bracket,
}

impl ZipfLogDist {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn normalizer(&self) -> Bracket {
        self.normalizer
    }

    pub(crate) fn shape(&self) -> ZipfShape {
        ZipfShape::new(self.beta)
    }

    /// Mass at `x` using the normalizer midpoint.
    pub fn mass(&self, x: u64) -> f64 {
        self.normalizer.mid() * self.shape().weight(x as f64)
    }

    /// `Σ_{x>X} π_x`.
    pub fn tail(&self, after: u64) -> Bracket {
        const PREFIX: u64 = 4096;
        let shape = self.shape();
        let sum = if after >= PREFIX {
            shape.sum_range(after as f64 + 1.0, f64::INFINITY)
        } else {
            let mut acc = CertifiedSum::new();
            shape.accumulate(&mut acc, after + 1, PREFIX);
            acc.finish() + shape.sum_range(PREFIX as f64 + 1.0, f64::INFINITY)
        };
        (self.normalizer * sum).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CounterexampleDist {
    blocks: u32,
    kind: NormalizerKind,
    normalizer: Bracket,
}

impl CounterexampleDist {
    /// Number of blocks represented explicitly.
    pub fn blocks(&self) -> u32 {
        self.blocks
    }

    pub fn kind(&self) -> NormalizerKind {
        self.kind
    }

    pub fn normalizer(&self) -> Bracket {
        self.normalizer
    }

    /// Enclosure of `log2` of the per-atom mass in block `k`.
    pub fn log2_mass_bounds(&self, k: u32) -> (f64, f64) {
        let bk = counterexample::b(k);
        (
            crate::bracket::down_by(self.normalizer.lo().log2() - bk, 2),
            crate::bracket::up_by(self.normalizer.hi().log2() - bk, 2),
        )
    }

    pub fn log2_mass_mid(&self, k: u32) -> f64 {
        self.normalizer.mid().log2() - counterexample::b(k)
    }

    /// The explicit blocks, using the normalizer midpoint.
    pub fn explicit_blocks(&self) -> Vec<Block> {
        (1..=self.blocks)
            .map(|k| Block {
                log2_count: counterexample::log2_block_count(k),
                log2_mass: self.log2_mass_mid(k),
            })
            .collect()
    }

    /// Mass beyond the explicit blocks, in log2 form (zero when truncated).
    pub fn tail_mass_log2(&self) -> Log2Bracket {
        match self.kind {
            NormalizerKind::Truncated => Log2Bracket::zero(),
            NormalizerKind::Unbounded => {
                let (lo, hi) = counterexample::log2_tail_series(self.blocks);
                Log2Bracket::new(
                    Log2Number::from_log2(crate::bracket::down(self.normalizer.lo().log2() + lo)),
                    Log2Number::from_log2(crate::bracket::up(self.normalizer.hi().log2() + hi)),
                )
            }
        }
    }

    /// Upper bound on `log2` of any atom mass beyond the explicit blocks.
    pub fn tail_log2_max_mass(&self) -> f64 {
        match self.kind {
            NormalizerKind::Truncated => f64::NEG_INFINITY,
            NormalizerKind::Unbounded => self.log2_mass_bounds(self.blocks + 1).1,
        }
    }

    /// Last block index that carries atoms.
    fn last_block(&self) -> u32 {
        match self.kind {
            NormalizerKind::Truncated => self.blocks,
            NormalizerKind::Unbounded => counterexample::MAX_BLOCKS + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockDist {
    blocks: Vec<Block>,
}

impl BlockDist {
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Enclosure of the total mass.
    pub fn total_mass(&self) -> Bracket {
        self.blocks
            .iter()
            .fold(Bracket::point(0.0), |acc, b| acc + b.total_mass())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistributionSpec {
    Finite(FiniteDist),
    Geometric(GeometricDist),
    ZipfLog(ZipfLogDist),
    BlockCounterexample(CounterexampleDist),
    Blocks(BlockDist),
}

/// What follows the explicit blocks of a [`CanonicalForm`].
#[derive(Clone, Debug, PartialEq)]
pub enum TailDecay {
    Empty,
    Geometric { q: f64 },
    ZipfLog { beta: f64, first_index: u64 },
    /// Remaining blocks of the counterexample, starting at block `next_block`.
    DoublyExponential { next_block: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailDescriptor {
    pub mass: Log2Bracket,
    /// Upper bound on `log2` of any single tail atom (`-inf` when empty).
    pub log2_max_atom_mass: f64,
    pub decay: TailDecay,
}

/// Blocks plus an analytic tail; the uniform currency of the exact module.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalForm {
    pub blocks: Vec<Block>,
    pub tail: TailDescriptor,
}

impl DistributionSpec {
    pub fn finite(masses: Vec<f64>) -> Result<Self, SpecError> {
        if masses.is_empty() {
            return Err(SpecError::invalid("masses", "mass list is empty"));
        }
        let mut acc = CertifiedSum::new();
        for (i, &m) in masses.iter().enumerate() {
            if !(m > 0.0 && m <= 1.0) {
                return Err(SpecError::invalid(
                    format!("masses[{i}]"),
                    format!("mass {m} outside (0, 1]"),
                ));
            }
            if i > 0 && m > masses[i - 1] {
                return Err(SpecError::invalid(
                    format!("masses[{i}]"),
                    format!("mass {m} exceeds preceding mass {}", masses[i - 1]),
                ));
            }
            acc.add(m, 0.0);
        }
        let total = acc.finish();
        if !total.intersects(&Bracket::new(1.0 - MASS_TOLERANCE, 1.0 + MASS_TOLERANCE)) {
            return Err(SpecError::invalid(
                "masses",
                format!("masses sum to {} (must be within 2^-40 of 1)", total.mid()),
            ));
        }
        Ok(DistributionSpec::Finite(FiniteDist { masses }))
    }

    /// Uniform law on `m` atoms.
    pub fn uniform(m: usize) -> Result<Self, SpecError> {
        Self::finite(vec![1.0 / m as f64; m])
    }

    pub fn geometric(q: f64) -> Result<Self, SpecError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(SpecError::invalid("q", format!("q = {q} outside (0, 1)")));
        }
        Ok(DistributionSpec::Geometric(GeometricDist { q }))
    }

    pub fn zipflog(beta: f64) -> Result<Self, SpecError> {
        Self::zipflog_with(beta, DEFAULT_NORMALIZER_TOL, DEFAULT_ZIPFLOG_CAP)
    }

    pub fn zipflog_with(beta: f64, normalizer_tol: f64, cap: u64) -> Result<Self, SpecError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(SpecError::invalid("beta", format!("beta = {beta} must be > 0")));
        }
        if !(0.01..=100.0).contains(&beta) {
            return Err(SpecError::invalid(
                "beta",
                format!("beta = {beta} outside the supported range [0.01, 100]"),
            ));
        }
        let normalizer = zipflog_normalizer_with_cap(beta, normalizer_tol, cap)
            .map_err(|e| SpecError::invalid("beta", e.to_string()))?;
        Ok(DistributionSpec::ZipfLog(ZipfLogDist { beta, normalizer }))
    }

    pub fn block_counterexample(blocks: u32) -> Result<Self, SpecError> {
        Self::block_counterexample_with(blocks, NormalizerKind::Unbounded)
    }

    pub fn block_counterexample_with(blocks: u32, kind: NormalizerKind) -> Result<Self, SpecError> {
        if !(1..=counterexample::MAX_BLOCKS).contains(&blocks) {
            return Err(SpecError::invalid(
                "blocks",
                format!(
                    "blocks = {blocks} outside [1, {}]",
                    counterexample::MAX_BLOCKS
                ),
            ));
        }
        let normalizer = match kind {
            NormalizerKind::Unbounded => block_normalizer(None),
            NormalizerKind::Truncated => block_normalizer(Some(blocks)),
        };
        Ok(DistributionSpec::BlockCounterexample(CounterexampleDist {
            blocks,
            kind,
            normalizer,
        }))
    }

    pub fn blocks(blocks: Vec<Block>) -> Result<Self, SpecError> {
        if blocks.is_empty() {
            return Err(SpecError::invalid("blocks", "block list is empty"));
        }
        for i in 1..blocks.len() {
            if blocks[i].log2_mass >= blocks[i - 1].log2_mass {
                return Err(SpecError::invalid(
                    format!("blocks[{i}].log2_mass"),
                    format!(
                        "{} is not strictly below the preceding block's {}",
                        blocks[i].log2_mass,
                        blocks[i - 1].log2_mass
                    ),
                ));
            }
        }
        let dist = BlockDist { blocks };
        let total = dist.total_mass();
        if !total.intersects(&Bracket::new(1.0 - MASS_TOLERANCE, 1.0 + MASS_TOLERANCE)) {
            return Err(SpecError::invalid(
                "blocks",
                format!("block masses sum to {} (must be within 2^-40 of 1)", total.mid()),
            ));
        }
        Ok(DistributionSpec::Blocks(dist))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DistributionSpec::Finite(_) => "finite",
            DistributionSpec::Geometric(_) => "geometric",
            DistributionSpec::ZipfLog(_) => "zipflog",
            DistributionSpec::BlockCounterexample(_) => "block_counterexample",
            DistributionSpec::Blocks(_) => "blocks",
        }
    }

    pub fn is_block_form(&self) -> bool {
        matches!(
            self,
            DistributionSpec::Blocks(_) | DistributionSpec::BlockCounterexample(_)
        )
    }

    /// Normalizer bracket for the families that carry one.
    pub fn normalizer(&self) -> Option<Bracket> {
        match self {
            DistributionSpec::ZipfLog(z) => Some(z.normalizer),
            DistributionSpec::BlockCounterexample(c) => Some(c.normalizer),
            _ => None,
        }
    }

    /// Number of atoms when the support is finite.
    pub fn support_size(&self) -> Option<AtomCount> {
        match self {
            DistributionSpec::Finite(f) => Some(AtomCount::Exact(f.masses.len() as u128)),
            DistributionSpec::Blocks(b) => Some(
                b.blocks
                    .iter()
                    .fold(AtomCount::ZERO, |acc, blk| acc.plus(&blk.count())),
            ),
            DistributionSpec::BlockCounterexample(c) if c.kind == NormalizerKind::Truncated => {
                Some(c.explicit_blocks().iter().fold(AtomCount::ZERO, |acc, blk| {
                    acc.plus(&blk.count())
                }))
            }
            _ => None,
        }
    }

    /// Enclosure of `Σ_x π_x`.
    pub fn total_mass(&self) -> Bracket {
        match self {
            DistributionSpec::Finite(f) => {
                let mut acc = CertifiedSum::new();
                f.masses.iter().for_each(|&m| acc.add(m, 0.0));
                acc.finish()
            }
            DistributionSpec::Blocks(b) => b.total_mass(),
            _ => self.tail_mass(0).expect("tail after index 0 is always defined"),
        }
    }

    /// Locates atom `x` in a block list given as `(log2_count, index_count)`.
    ///
    /// Returns the block position, or `None` past the end of the listed blocks.
    fn locate<I>(x: u64, counts: I) -> Result<Option<usize>, DistError>
    where
        I: IntoIterator<Item = Option<u64>>,
    {
        let mut start: u128 = 1;
        for (i, count) in counts.into_iter().enumerate() {
            match count {
                Some(c) => {
                    let end = start + c as u128;
                    if (x as u128) < end {
                        return Ok(Some(i));
                    }
                    start = end;
                }
                None => {
                    if start > 1u128 << 53 {
                        return Err(DistError::IndexBeyondEnumerable { index: x });
                    }
                    // Wider than 2^53 atoms: every remaining u64 index lands here.
                    return Ok(Some(i));
                }
            }
        }
        Ok(None)
    }

    /// `π_x`; zero beyond a finite support.
    pub fn mass(&self, x: u64) -> Result<f64, DistError> {
        if x == 0 {
            return Err(DistError::InvalidArgument("atom index must be >= 1".into()));
        }
        Ok(match self {
            DistributionSpec::Finite(f) => f.masses.get((x - 1) as usize).copied().unwrap_or(0.0),
            DistributionSpec::Geometric(g) => g.mass(x),
            DistributionSpec::ZipfLog(z) => z.mass(x),
            DistributionSpec::BlockCounterexample(_) | DistributionSpec::Blocks(_) => {
                self.log2_mass(x)?.value()
            }
        })
    }

    /// `log2 π_x`; [`Log2Number::ZERO`] beyond a finite support.
    pub fn log2_mass(&self, x: u64) -> Result<Log2Number, DistError> {
        if x == 0 {
            return Err(DistError::InvalidArgument("atom index must be >= 1".into()));
        }
        Ok(match self {
            DistributionSpec::Finite(f) => match f.masses.get((x - 1) as usize) {
                Some(&m) => Log2Number::from_f64(m),
                None => Log2Number::ZERO,
            },
            DistributionSpec::Geometric(g) => Log2Number::from_log2(
                (1.0 - g.q).log2() + (x - 1) as f64 * g.q.log2(),
            ),
            DistributionSpec::ZipfLog(z) => {
                let xf = x as f64;
                Log2Number::from_log2(
                    z.normalizer.mid().log2()
                        - xf.log2()
                        - (z.beta + 1.0) * xf.ln_1p().log2(),
                )
            }
            DistributionSpec::Blocks(b) => {
                match Self::locate(x, b.blocks.iter().map(Block::index_count))? {
                    Some(i) => Log2Number::from_log2(b.blocks[i].log2_mass),
                    None => Log2Number::ZERO,
                }
            }
            DistributionSpec::BlockCounterexample(c) => {
                let last = c.last_block();
                match Self::locate(x, (1..=last).map(counterexample::block_count))? {
                    Some(i) => Log2Number::from_log2(c.log2_mass_mid(i as u32 + 1)),
                    None => Log2Number::ZERO,
                }
            }
        })
    }

    /// `φ^-1(n) = #{x : π_x > 1/n}`.
    pub fn phi_inverse(&self, n: f64) -> Result<AtomCount, DistError> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(DistError::InvalidArgument(format!("n = {n} must be > 0")));
        }
        let thr = 1.0 / n;
        Ok(match self {
            DistributionSpec::Finite(f) => {
                AtomCount::Exact(f.masses.partition_point(|&m| m > thr) as u128)
            }
            DistributionSpec::Geometric(g) => {
                // Candidate from logs, then settle the boundary with the mass formula itself.
                let guess = ((thr / (1.0 - g.q)).ln() / g.q.ln() + 1.0).floor();
                let mut m = if guess.is_finite() && guess > 0.0 {
                    guess.min(1e18) as u64
                } else {
                    0
                };
                while m >= 1 && g.mass(m) <= thr {
                    m -= 1;
                }
                while g.mass(m + 1) > thr {
                    m += 1;
                }
                AtomCount::Exact(m as u128)
            }
            DistributionSpec::ZipfLog(z) => {
                let bound = n * z.normalizer.mid() * 2f64.ln().powf(-(z.beta + 1.0)) + 2.0;
                let mut lo = 0u64; // π_lo > thr holds (vacuously at 0)
                let mut hi = bound.min(1e18) as u64 + 1; // π_hi <= thr
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if z.mass(mid) > thr {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                AtomCount::Exact(lo as u128)
            }
            DistributionSpec::Blocks(_) | DistributionSpec::BlockCounterexample(_) => {
                return self.phi_inverse_log2(Log2Number::from_f64(n));
            }
        })
    }

    /// `φ^-1(n)` with `n` in log2 form, for sample sizes beyond binary64.
    pub fn phi_inverse_log2(&self, n: Log2Number) -> Result<AtomCount, DistError> {
        if n.is_zero() {
            return Err(DistError::InvalidArgument("n must be > 0".into()));
        }
        let thr = -n.log2();
        match self {
            DistributionSpec::Blocks(b) => Ok(b
                .blocks
                .iter()
                .filter(|blk| blk.log2_mass > thr)
                .fold(AtomCount::ZERO, |acc, blk| acc.plus(&blk.count()))),
            DistributionSpec::BlockCounterexample(c) => Ok((1..=c.last_block())
                .filter(|&k| c.log2_mass_mid(k) > thr)
                .fold(AtomCount::ZERO, |acc, k| {
                    acc.plus(&match counterexample::block_count(k) {
                        Some(cnt) => AtomCount::Exact(cnt as u128),
                        None => AtomCount::Huge(Log2Number::from_log2(
                            counterexample::log2_block_count(k),
                        )),
                    })
                })),
            DistributionSpec::Finite(f) if !n.is_representable() => {
                Ok(AtomCount::Exact(f.masses.len() as u128))
            }
            _ if n.is_representable() => self.phi_inverse(n.value()),
            _ => Err(DistError::InvalidArgument(format!(
                "n = {n} is too large for the {} family",
                self.kind_name()
            ))),
        }
    }

    /// `a_k = #{x : 1/(k+1) < π_x <= 1/k}`.
    pub fn level_count(&self, k: u64) -> Result<AtomCount, DistError> {
        if k == 0 {
            return Err(DistError::InvalidArgument("k must be >= 1".into()));
        }
        let lower = Log2Number::from_u64(k + 1);
        let upper = Log2Number::from_u64(k);
        match self {
            DistributionSpec::Blocks(b) => Ok(b
                .blocks
                .iter()
                .filter(|blk| blk.log2_mass > -lower.log2() && blk.log2_mass <= -upper.log2())
                .fold(AtomCount::ZERO, |acc, blk| acc.plus(&blk.count()))),
            DistributionSpec::BlockCounterexample(_) => {
                let hi = self.phi_inverse_log2(lower)?;
                let lo = self.phi_inverse_log2(upper)?;
                match (hi, lo) {
                    (AtomCount::Exact(a), AtomCount::Exact(b)) => Ok(AtomCount::Exact(a - b)),
                    (a, b) => Ok(AtomCount::Huge(a.to_log2().sub(&b.to_log2()))),
                }
            }
            _ => {
                let hi = self.phi_inverse((k + 1) as f64)?;
                let lo = self.phi_inverse(k as f64)?;
                match (hi, lo) {
                    (AtomCount::Exact(a), AtomCount::Exact(b)) => Ok(AtomCount::Exact(a - b)),
                    _ => unreachable!("enumerable families give exact counts"),
                }
            }
        }
    }

    /// Enclosure of `Σ_{x > after} π_x`.
    pub fn tail_mass(&self, after: u64) -> Result<Bracket, DistError> {
        match self {
            DistributionSpec::Finite(f) => {
                let mut acc = CertifiedSum::new();
                f.masses
                    .iter()
                    .skip(after.min(f.masses.len() as u64) as usize)
                    .for_each(|&m| acc.add(m, 0.0));
                Ok(acc.finish().clamp(0.0, f64::MAX))
            }
            DistributionSpec::Geometric(g) => Ok(g.tail(after)),
            DistributionSpec::ZipfLog(z) => Ok(z.tail(after)),
            DistributionSpec::Blocks(b) => {
                Self::blocks_tail(after, &b.rigorous_blocks(), Bracket::point(0.0))
            }
            DistributionSpec::BlockCounterexample(c) => {
                let extra = c.tail_mass_log2().to_linear();
                Self::blocks_tail(after, &c.rigorous_blocks(), extra)
            }
        }
    }

    fn blocks_tail(after: u64, blocks: &[RigorousBlock], extra: Bracket) -> Result<Bracket, DistError> {
        let mut start: u128 = 0; // atoms before the current block
        let mut acc = extra;
        let mut past = true;
        for blk in blocks {
            if past {
                match blk.index_count {
                    Some(c) => {
                        let end = start + c as u128;
                        if (after as u128) < end {
                            let remaining = (end - after as u128) as f64;
                            acc = acc + Bracket::point(remaining) * blk.mass;
                            past = false;
                        }
                        start = end;
                    }
                    None => {
                        if (after as u128) > start {
                            return Err(DistError::IndexBeyondEnumerable { index: after });
                        }
                        acc = acc + blk.total;
                        past = false;
                    }
                }
            } else {
                acc = acc + blk.total;
            }
        }
        Ok(acc.clamp(0.0, f64::MAX))
    }

    /// Blocks plus an analytic tail descriptor.
    pub fn canonical_blocks(&self, enumeration_cap: u64) -> Result<CanonicalForm, DistError> {
        if enumeration_cap == 0 {
            return Err(DistError::InvalidArgument("enumeration_cap must be >= 1".into()));
        }
        let empty_tail = TailDescriptor {
            mass: Log2Bracket::zero(),
            log2_max_atom_mass: f64::NEG_INFINITY,
            decay: TailDecay::Empty,
        };
        match self {
            DistributionSpec::Finite(f) => {
                let mut blocks: Vec<Block> = Vec::new();
                let mut i = 0;
                while i < f.masses.len() {
                    let m = f.masses[i];
                    let run = f.masses[i..].iter().take_while(|&&v| v == m).count();
                    blocks.push(Block::from_count(run as u64, m).expect("validated masses"));
                    i += run;
                }
                if blocks.len() as u64 > enumeration_cap {
                    return Err(DistError::BudgetExceeded {
                        best: Bracket::new(0.0, 1.0),
                        achieved_rel: 1.0,
                    });
                }
                Ok(CanonicalForm {
                    blocks,
                    tail: empty_tail,
                })
            }
            DistributionSpec::Geometric(g) => {
                let blocks = (1..=enumeration_cap)
                    .map_while(|x| {
                        let m = g.mass(x);
                        (m > 0.0).then(|| Block::from_count(1, m).expect("positive mass"))
                    })
                    .collect::<Vec<_>>();
                let kept = blocks.len() as u64;
                Ok(CanonicalForm {
                    blocks,
                    tail: TailDescriptor {
                        mass: Log2Bracket::from_linear(&g.tail(kept)),
                        log2_max_atom_mass: (1.0 - g.q).log2() + kept as f64 * g.q.log2(),
                        decay: TailDecay::Geometric { q: g.q },
                    },
                })
            }
            DistributionSpec::ZipfLog(z) => {
                let blocks = (1..=enumeration_cap)
                    .map(|x| Block::from_count(1, z.mass(x)).expect("positive mass"))
                    .collect::<Vec<_>>();
                let shape = z.shape();
                let mut prefix = CertifiedSum::new();
                shape.accumulate(&mut prefix, 1, enumeration_cap);
                let listed = Bracket::point(z.normalizer.mid()) * prefix.finish();
                // Listed blocks use the normalizer midpoint; the tail absorbs the difference.
                let tail = z.tail(enumeration_cap).hull(&(Bracket::point(1.0) - listed).clamp(0.0, 1.0));
                Ok(CanonicalForm {
                    blocks,
                    tail: TailDescriptor {
                        mass: Log2Bracket::from_linear(&tail),
                        log2_max_atom_mass: crate::bracket::up(
                            (z.normalizer.hi() * shape.weight(enumeration_cap as f64 + 1.0)).log2(),
                        ),
                        decay: TailDecay::ZipfLog {
                            beta: z.beta,
                            first_index: enumeration_cap + 1,
                        },
                    },
                })
            }
            DistributionSpec::Blocks(b) => Ok(CanonicalForm {
                blocks: b.blocks.clone(),
                tail: empty_tail,
            }),
            DistributionSpec::BlockCounterexample(c) => Ok(CanonicalForm {
                blocks: c.explicit_blocks(),
                tail: match c.kind {
                    NormalizerKind::Truncated => empty_tail,
                    NormalizerKind::Unbounded => TailDescriptor {
                        mass: c.tail_mass_log2(),
                        log2_max_atom_mass: c.tail_log2_max_mass(),
                        decay: TailDecay::DoublyExponential {
                            next_block: c.blocks + 1,
                        },
                    },
                },
            }),
        }
    }
}

/// A block with rigorous per-atom and total mass enclosures.
#[derive(Clone, Debug)]
pub(crate) struct RigorousBlock {
    pub log2_count: f64,
    pub index_count: Option<u64>,
    /// Enclosure of `log2` of the per-atom mass.
    pub log2_mass: (f64, f64),
    pub mass: Bracket,
    pub total: Bracket,
    /// Enclosure of `log2` of the block's total mass.
    pub log2_total: (f64, f64),
}

impl Block {
    pub(crate) fn rigorous(&self) -> RigorousBlock {
        RigorousBlock {
            log2_count: self.log2_count,
            index_count: self.index_count(),
            log2_mass: (self.log2_mass, self.log2_mass),
            mass: Bracket::around(self.mass(), 2.0 * UNIT_ROUNDOFF),
            total: self.total_mass(),
            log2_total: (
                crate::bracket::down_by(self.log2_count + self.log2_mass, 2),
                crate::bracket::up_by(self.log2_count + self.log2_mass, 2),
            ),
        }
    }
}

impl CounterexampleDist {
    pub(crate) fn rigorous_blocks(&self) -> Vec<RigorousBlock> {
        (1..=self.blocks)
            .map(|k| {
                let (lo, hi) = self.log2_mass_bounds(k);
                let weight = Bracket::around((-counterexample::log2_b(k)).exp2(), 0.0);
                let bk = counterexample::b(k);
                RigorousBlock {
                    log2_count: counterexample::log2_block_count(k),
                    index_count: counterexample::block_count(k),
                    log2_mass: (lo, hi),
                    mass: if bk < 1000.0 {
                        self.normalizer * Bracket::point((-bk).exp2())
                    } else {
                        Bracket::new(0.0, f64::from_bits(1))
                    },
                    total: self.normalizer * weight,
                    // Exact up to the normalizer even when b_k swamps binary64.
                    log2_total: (
                        crate::bracket::down_by(
                            self.normalizer.lo().log2() - counterexample::log2_b(k),
                            2,
                        ),
                        crate::bracket::up_by(
                            self.normalizer.hi().log2() - counterexample::log2_b(k),
                            2,
                        ),
                    ),
                }
            })
            .collect()
    }
}

impl BlockDist {
    pub(crate) fn rigorous_blocks(&self) -> Vec<RigorousBlock> {
        self.blocks.iter().map(Block::rigorous).collect()
    }
}

/// `C = 1/Σ_x 1/(x ln(x+1)^(β+1))` enclosed to relative width `rel_tol`.
pub fn zipflog_normalizer(beta: f64, rel_tol: f64) -> Result<Bracket, DistError> {
    zipflog_normalizer_with_cap(beta, rel_tol, DEFAULT_ZIPFLOG_CAP)
}

pub fn zipflog_normalizer_with_cap(beta: f64, rel_tol: f64, cap: u64) -> Result<Bracket, DistError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(DistError::InvalidArgument(format!("beta = {beta} must be > 0")));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(DistError::InvalidArgument(format!(
            "rel_tol = {rel_tol} outside (0, 1)"
        )));
    }
    zipflog::normalizer(beta, rel_tol, cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn mass_examples() {
        let f = DistributionSpec::finite(vec![0.5, 0.3, 0.2]).unwrap();
        assert_eq!(f.mass(2).unwrap(), 0.3);
        assert_eq!(f.mass(4).unwrap(), 0.0);
        let g = DistributionSpec::geometric(0.5).unwrap();
        assert_eq!(g.mass(3).unwrap(), 0.125);
    }

    #[test]
    fn counterexample_fifth_atom_opens_block_two() {
        let d = DistributionSpec::block_counterexample(2).unwrap();
        let a = d.normalizer().unwrap();
        let m = d.mass(5).unwrap();
        assert!(close(m, a.mid() * 2f64.powi(-16), 1e-14));
        // Atoms 1..4 form block one.
        assert!(close(d.mass(4).unwrap(), a.mid() / 16.0, 1e-14));
    }

    #[test]
    fn log2_mass_examples() {
        let g = DistributionSpec::geometric(0.5).unwrap();
        assert_eq!(g.log2_mass(10).unwrap().log2(), -10.0);
        let c = DistributionSpec::block_counterexample(3).unwrap();
        let a = c.normalizer().unwrap().mid();
        // Atom 4101 is the first atom of block three.
        let l = c.log2_mass(4101).unwrap().log2();
        assert!(close(l, a.log2() - 256.0, 1e-15));
        let p = DistributionSpec::finite(vec![1.0]).unwrap();
        assert_eq!(p.log2_mass(1).unwrap().log2(), 0.0);
    }

    #[test]
    fn phi_inverse_examples() {
        let u = DistributionSpec::uniform(4).unwrap();
        assert_eq!(u.phi_inverse(10.0).unwrap(), AtomCount::Exact(4));
        assert_eq!(u.phi_inverse(4.0).unwrap(), AtomCount::Exact(0));
        let g = DistributionSpec::geometric(0.5).unwrap();
        assert_eq!(g.phi_inverse(10.0).unwrap(), AtomCount::Exact(3));
    }

    #[test]
    fn level_count_examples() {
        let u = DistributionSpec::uniform(5).unwrap();
        assert_eq!(u.level_count(5).unwrap(), AtomCount::Exact(5));
        for k in [1, 2, 3, 4, 6, 7, 100] {
            assert_eq!(u.level_count(k).unwrap(), AtomCount::Exact(0), "k={k}");
        }
        let g = DistributionSpec::geometric(0.5).unwrap();
        assert_eq!(g.level_count(2).unwrap(), AtomCount::Exact(1));
        assert_eq!(g.level_count(3).unwrap(), AtomCount::Exact(0));
    }

    #[test]
    fn tail_mass_examples() {
        let g = DistributionSpec::geometric(0.5).unwrap();
        let t = g.tail_mass(3).unwrap();
        assert!(t.contains(0.125) && t.rel_width() < 1e-14);
        let f = DistributionSpec::finite(vec![0.5, 0.3, 0.2]).unwrap();
        let t = f.tail_mass(1).unwrap();
        assert!(t.contains(0.5) && t.rel_width() < 1e-15);
    }

    #[test]
    fn counterexample_tail_inside_huge_block_is_rejected() {
        let c = DistributionSpec::block_counterexample(3).unwrap();
        assert!(c.tail_mass(4100).is_ok());
        assert_eq!(
            c.tail_mass(5000),
            Err(DistError::IndexBeyondEnumerable { index: 5000 })
        );
        let t = c.tail_mass(0).unwrap();
        assert!(t.contains(1.0), "{t}");
    }

    #[test]
    fn validation_rejects_bad_specs() {
        assert!(DistributionSpec::finite(vec![]).is_err());
        assert!(DistributionSpec::finite(vec![0.6, 0.5]).is_err());
        assert!(DistributionSpec::finite(vec![0.4, 0.6]).is_err());
        assert!(DistributionSpec::geometric(1.0).is_err());
        assert!(DistributionSpec::zipflog(-1.0).is_err());
        assert!(DistributionSpec::block_counterexample(0).is_err());
        assert!(DistributionSpec::blocks(vec![
            Block::new(1.0, -1.0).unwrap(),
            Block::new(1.0, -1.0).unwrap()
        ])
        .is_err());
        assert!(Block::new(1.5, -2.0).is_err());
    }

    #[test]
    fn canonical_blocks_examples() {
        let f = DistributionSpec::finite(vec![0.5, 0.5]).unwrap();
        let c = f.canonical_blocks(10).unwrap();
        assert_eq!(c.blocks.len(), 1);
        assert_eq!(c.blocks[0].index_count(), Some(2));
        assert!(c.tail.mass.lo().is_zero() && c.tail.mass.hi().is_zero());

        let g = DistributionSpec::geometric(0.5).unwrap();
        let c = g.canonical_blocks(10).unwrap();
        assert_eq!(c.blocks.len(), 10);
        assert!(c.tail.mass.contains_log2(-10.0));
        assert!(c.tail.mass.log2_hi() - c.tail.mass.log2_lo() < 1e-12);
    }

    #[test]
    fn support_size_counts_atoms() {
        let c = DistributionSpec::block_counterexample_with(2, NormalizerKind::Truncated).unwrap();
        assert_eq!(c.support_size(), Some(AtomCount::Exact(4100)));
        assert_eq!(DistributionSpec::geometric(0.3).unwrap().support_size(), None);
    }
}
