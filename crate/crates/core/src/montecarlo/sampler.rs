//! Exact samplers for the enumerable families and a block-form stand-in for
//! the Zipf-log tail.

use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributions::{Block, DistributionSpec, NormalizerKind};

use super::MonteCarloError;

/// Indices below this bound are listed one by one in the Zipf-log stand-in.
pub const ZIPFLOG_HEAD: u64 = 1 << 16;
/// First dyadic exponent considered for the Zipf-log stand-in's final block.
const ZIPFLOG_LAST_RANGE: u32 = 115;
/// Largest `log2` count of a sampleable block; offsets are `u128`.
const MAX_LOG2_COUNT: u32 = 127;

/// Identity of a sampled atom: block number and offset within the block.
/// Families indexed directly use block 0 and the atom index as offset.
pub type AtomId = (u32, u128);

#[derive(Debug)]
enum Table {
    /// CDF of a finite list, inverted by binary search.
    Finite { cdf: Vec<f64> },
    /// `ln q`; atoms by inversion `ceil(ln(1-u) / ln q)`.
    Geometric { ln_q: f64 },
    /// Block choice by cumulative mass, then a uniform offset.
    Blocks { cdf: Vec<f64>, counts: Vec<u128> },
}

/// Precomputed sampling tables, shared by every trial.
#[derive(Debug, Clone)]
pub struct SamplerPlan {
    table: Arc<Table>,
    effective: DistributionSpec,
}

/// A per-trial sampler: shared tables plus the trial's random stream.
#[derive(Debug, Clone)]
pub struct Sampler {
    table: Arc<Table>,
    rng: ChaCha8Rng,
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    // Normalize so the last entry is exactly one.
    let total = acc;
    for c in &mut cdf {
        *c /= total;
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

fn blocks_table(blocks: &[Block]) -> Result<Table, MonteCarloError> {
    let counts = blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            b.exact_count().ok_or_else(|| {
                MonteCarloError::UnsampleableSpec(format!(
                    "block {i} has 2^{} atoms; only counts below 2^53 or powers of two up to \
                     2^{MAX_LOG2_COUNT} can be sampled",
                    b.log2_count()
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cdf = cumulative(blocks.iter().map(|b| b.total_mass().mid()));
    Ok(Table::Blocks { cdf, counts })
}

/// Block-form stand-in `D̃` for a Zipf-log law.
///
/// Atoms below [`ZIPFLOG_HEAD`] keep their own masses. Each dyadic range
/// `[2^j, 2^(j+1))` becomes one block whose total mass is the midpoint of the
/// range's certified mass. The remaining mass goes to a final block of `2^lc`
/// atoms, each lighter than any atom before it.
pub fn zipflog_surrogate(dist: &DistributionSpec) -> Result<DistributionSpec, MonteCarloError> {
    let DistributionSpec::ZipfLog(z) = dist else {
        return Err(MonteCarloError::InvalidArgument("expected a zipflog spec".into()));
    };
    let shape = z.shape();
    let c = z.normalizer().mid();
    let mut blocks: Vec<Block> = (1..ZIPFLOG_HEAD)
        .map(|x| Block::from_count(1, c * shape.weight(x as f64)).expect("positive mass"))
        .collect();
    let mut listed: f64 = blocks.iter().map(Block::mass).sum();
    let ranges: Vec<(u32, f64)> = (16..=ZIPFLOG_LAST_RANGE)
        .map(|j| {
            let a = (j as f64).exp2();
            (j, c * shape.sum_range(a, 2.0 * a).mid())
        })
        .collect();
    // Drop trailing ranges until the leftover block fits in 2^127 atoms.
    let mut keep = ranges.len();
    loop {
        let rest = 1.0 - listed - ranges[..keep].iter().map(|r| r.1).sum::<f64>();
        let (j, m) = ranges[keep - 1];
        let last_atom = m / (j as f64).exp2();
        // Smallest lc with rest / 2^lc < last_atom, with a factor-two margin.
        let lc = ((rest / last_atom).log2().floor() + 2.0).max(1.0);
        if lc <= MAX_LOG2_COUNT as f64 || keep == 1 {
            for &(j, m) in &ranges[..keep] {
                blocks.push(Block::new(j as f64, (m / (j as f64).exp2()).log2()).expect("valid"));
                listed += m;
            }
            let rest = 1.0 - listed;
            // For steep laws the leftover is rounding noise and is dropped.
            if rest > f64::EPSILON {
                let lc = lc.min(MAX_LOG2_COUNT as f64);
                blocks.push(Block::new(lc, rest.log2() - lc).expect("valid"));
            }
            break;
        }
        keep -= 1;
    }
    DistributionSpec::blocks(blocks)
        .map_err(|e| MonteCarloError::InvalidArgument(format!("surrogate construction: {e}")))
}

impl SamplerPlan {
    /// Tables for `dist` and the distribution they sample exactly.
    pub fn new(dist: &DistributionSpec) -> Result<Self, MonteCarloError> {
        let (table, effective) = match dist {
            DistributionSpec::Finite(f) => (
                Table::Finite {
                    cdf: cumulative(f.masses().iter().copied()),
                },
                dist.clone(),
            ),
            DistributionSpec::Geometric(g) => (
                Table::Geometric { ln_q: g.q().ln() },
                dist.clone(),
            ),
            DistributionSpec::ZipfLog(_) => {
                let eff = zipflog_surrogate(dist)?;
                let DistributionSpec::Blocks(b) = &eff else {
                    unreachable!("surrogate is block form")
                };
                (blocks_table(b.blocks())?, eff)
            }
            DistributionSpec::Blocks(b) => (blocks_table(b.blocks())?, dist.clone()),
            DistributionSpec::BlockCounterexample(c) => {
                if c.kind() == NormalizerKind::Unbounded {
                    return Err(MonteCarloError::UnsampleableSpec(
                        "the unbounded block counterexample has blocks of 2^248 and more atoms"
                            .into(),
                    ));
                }
                let blocks = c.explicit_blocks();
                let eff = DistributionSpec::blocks(blocks.clone()).map_err(|e| {
                    MonteCarloError::InvalidArgument(format!("counterexample blocks: {e}"))
                })?;
                (blocks_table(&blocks)?, eff)
            }
        };
        Ok(Self {
            table: Arc::new(table),
            effective,
        })
    }

    /// The distribution the sampler draws from exactly.
    pub fn effective(&self) -> &DistributionSpec {
        &self.effective
    }

    /// Sampler for trial `trial` under `seed`.
    pub fn sampler(&self, seed: u64, trial: u64) -> Sampler {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        Sampler {
            table: Arc::clone(&self.table),
            rng,
        }
    }

    /// Largest atom identifier count when the support is small enough for a dense set.
    pub(crate) fn dense_support(&self) -> Option<usize> {
        match &*self.table {
            Table::Finite { cdf } => Some(cdf.len()),
            _ => None,
        }
    }
}

/// Tables and sampler for `dist`, plus the effective distribution sampled.
pub fn make_sampler(
    dist: &DistributionSpec,
    seed: u64,
    trial: u64,
) -> Result<(Sampler, DistributionSpec), MonteCarloError> {
    let plan = SamplerPlan::new(dist)?;
    Ok((plan.sampler(seed, trial), plan.effective))
}

#[inline]
fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `floor(r · count / 2^128)` for `count <= 2^128`.
#[inline]
fn scale_u128(r: u128, count: u128) -> u128 {
    if count.is_power_of_two() {
        return r & (count - 1);
    }
    // count < 2^53 here: split r into 64-bit halves.
    let (hi, lo) = (r >> 64, r & u64::MAX as u128);
    (hi * count + ((lo * count) >> 64)) >> 64
}

impl Sampler {
    /// Draws one atom. Every draw consumes exactly three 64-bit outputs, so
    /// draw `i` of a trial depends only on `(seed, trial, i)`.
    pub fn draw(&mut self) -> AtomId {
        let u = unit(self.rng.next_u64());
        let r = ((self.rng.next_u64() as u128) << 64) | self.rng.next_u64() as u128;
        match &*self.table {
            Table::Finite { cdf } => (0, cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u128),
            Table::Geometric { ln_q } => {
                let x = ((-u).ln_1p() / ln_q).ceil();
                (0, if x < 1.0 { 1 } else { x.min(u64::MAX as f64) as u128 })
            }
            Table::Blocks { cdf, counts } => {
                let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                (k as u32, scale_u128(r, counts[k]))
            }
        }
    }
}
