//! JSON form of a [`DistributionSpec`].
//!
//! ```text
//! {"kind":"finite","masses":[0.5,0.3,0.2]}
//! {"kind":"geometric","q":0.5}
//! {"kind":"zipflog","beta":1.0}
//! {"kind":"block_counterexample","blocks":4}
//! {"kind":"blocks","blocks":[{"log2_count":2.0,"log2_mass":-2.0}]}
//! ```
//!
//! `block_counterexample` also accepts `"normalizer": "unbounded" | "truncated"`.

use serde::{Deserialize, Serialize};

use super::{Block, DistributionSpec, NormalizerKind, SpecError};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockJson {
    log2_count: f64,
    log2_mass: f64,
}

#[derive(Deserialize)]
struct KindOnly {
    kind: String,
}

// Each kind is re-parsed from the original text so serde_json can report
// line and column for unknown keys and type errors.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiniteJson {
    kind: String,
    masses: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometricJson {
    kind: String,
    q: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ZipfLogJson {
    kind: String,
    beta: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CounterexampleJson {
    kind: String,
    blocks: u32,
    #[serde(default, skip_serializing_if = "is_unbounded")]
    normalizer: NormalizerKind,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlocksJson {
    kind: String,
    blocks: Vec<BlockJson>,
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, SpecError> {
    serde_json::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))
}

fn is_unbounded(k: &NormalizerKind) -> bool {
    *k == NormalizerKind::Unbounded
}

impl DistributionSpec {
    /// Parses and validates a JSON spec.
    ///
    /// Syntax errors and unknown keys report their line and column; range
    /// errors report the offending field path.
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let head: KindOnly = parse(text)?;
        match head.kind.as_str() {
            "finite" => Self::finite(parse::<FiniteJson>(text)?.masses),
            "geometric" => Self::geometric(parse::<GeometricJson>(text)?.q),
            "zipflog" => Self::zipflog(parse::<ZipfLogJson>(text)?.beta),
            "block_counterexample" => {
                let raw: CounterexampleJson = parse(text)?;
                Self::block_counterexample_with(raw.blocks, raw.normalizer)
            }
            "blocks" => {
                let raw: BlocksJson = parse(text)?;
                let parsed = raw
                    .blocks
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        Block::new(b.log2_count, b.log2_mass)
                            .map_err(|m| SpecError::invalid(format!("blocks[{i}]"), m))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Self::blocks(parsed)
            }
            other => Err(SpecError::invalid(
                "kind",
                format!(
                    "unknown kind `{other}`, expected one of finite, geometric, zipflog, \
                     block_counterexample, blocks"
                ),
            )),
        }
    }

    /// Canonical JSON; `from_json(to_json(d))` reproduces `d`.
    pub fn to_json(&self) -> String {
        let kind = self.kind_name().to_string();
        let out = match self {
            DistributionSpec::Finite(f) => serde_json::to_string(&FiniteJson {
                kind,
                masses: f.masses.clone(),
            }),
            DistributionSpec::Geometric(g) => serde_json::to_string(&GeometricJson { kind, q: g.q }),
            DistributionSpec::ZipfLog(z) => {
                serde_json::to_string(&ZipfLogJson { kind, beta: z.beta })
            }
            DistributionSpec::BlockCounterexample(c) => {
                serde_json::to_string(&CounterexampleJson {
                    kind,
                    blocks: c.blocks,
                    normalizer: c.kind,
                })
            }
            DistributionSpec::Blocks(b) => serde_json::to_string(&BlocksJson {
                kind,
                blocks: b
                    .blocks
                    .iter()
                    .map(|blk| BlockJson {
                        log2_count: blk.log2_count,
                        log2_mass: blk.log2_mass,
                    })
                    .collect(),
            }),
        };
        out.expect("spec serialization cannot fail")
    }
}
