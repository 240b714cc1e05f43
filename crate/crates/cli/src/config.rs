//! Run configuration: command-line flags over an optional JSON config file over defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "RANGELAB_THREADS";

pub const MAX_GRID_POINTS: usize = 10_000;
pub const MAX_TRIALS: u64 = 10_000_000;

#[derive(Parser, Debug)]
#[command(name = "rangelab", version, about = "Expected range and speed diagnostics for discrete laws")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a spec and tabulate φ⁻¹(n) and level counts.
    Dist(Flags),
    /// Certified brackets for E R_n and the entropy.
    Exact(Flags),
    /// Monte Carlo trajectories of R_n.
    Simulate(Flags),
    /// Speed statistics (log n)^(1+ε)/n · R_n.
    Diagnose(Flags),
    /// Log-domain diagnostics along the counterexample subsequence.
    Counterexample(Flags),
}

impl Command {
    pub fn split(self) -> (SubcommandName, Flags) {
        match self {
            Command::Dist(f) => (SubcommandName::Dist, f),
            Command::Exact(f) => (SubcommandName::Exact, f),
            Command::Simulate(f) => (SubcommandName::Simulate, f),
            Command::Diagnose(f) => (SubcommandName::Diagnose, f),
            Command::Counterexample(f) => (SubcommandName::Counterexample, f),
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct Flags {
    /// Distribution spec as inline JSON or `@path`.
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub nmin: Option<u64>,
    #[arg(long)]
    pub nmax: Option<u64>,
    /// Geometric grid ratio.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Explicit comma-separated n values; overrides the geometric grid.
    #[arg(long, value_delimiter = ',')]
    pub nlist: Option<Vec<u64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated ε values.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<String>,
    /// Exit with code 4 when any bracket misses its tolerance.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Where `diagnose` takes R_n from.
    #[arg(long, value_enum)]
    pub source: Option<DiagSource>,
    /// Logarithm of n in the `diagnose` statistic; `counterexample` reports both.
    #[arg(long, value_enum)]
    pub log_base: Option<LogChoice>,
    /// Depth K of the counterexample subsequence.
    #[arg(long)]
    pub k: Option<u32>,
    /// Comma-separated k values for the level counts of `dist`.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<u64>>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration as canonical JSON and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SubcommandName {
    Dist,
    Exact,
    Simulate,
    Diagnose,
    Counterexample,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DiagSource {
    #[default]
    Exact,
    Simulate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LogChoice {
    #[default]
    Ln,
    Log2,
}

/// Fully resolved settings for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: SubcommandName,
    pub spec: Option<String>,
    pub nmin: u64,
    pub nmax: u64,
    pub ratio: f64,
    pub nlist: Option<Vec<u64>>,
    pub trials: u64,
    pub seed: u64,
    pub eps: Vec<f64>,
    pub rel_tol: f64,
    pub format: Format,
    pub out: Option<String>,
    pub strict: bool,
    pub threads: Option<usize>,
    pub source: DiagSource,
    pub log_base: LogChoice,
    pub k: u32,
    pub levels: Vec<u64>,
}

/// Config-file contents; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    subcommand: Option<SubcommandName>,
    spec: Option<String>,
    nmin: Option<u64>,
    nmax: Option<u64>,
    ratio: Option<f64>,
    nlist: Option<Vec<u64>>,
    trials: Option<u64>,
    seed: Option<u64>,
    eps: Option<Vec<f64>>,
    rel_tol: Option<f64>,
    format: Option<Format>,
    out: Option<String>,
    strict: Option<bool>,
    threads: Option<usize>,
    source: Option<DiagSource>,
    log_base: Option<LogChoice>,
    k: Option<u32>,
    levels: Option<Vec<u64>>,
}

impl RunConfig {
    pub fn defaults(subcommand: SubcommandName) -> Self {
        let eps = match subcommand {
            SubcommandName::Counterexample => vec![0.25, 0.5, 0.75],
            _ => vec![0.0],
        };
        Self {
            subcommand,
            spec: None,
            nmin: 10,
            nmax: 10_000,
            ratio: 1.25,
            nlist: None,
            trials: 100,
            seed: 0,
            eps,
            rel_tol: 1e-6,
            format: Format::Csv,
            out: None,
            strict: false,
            threads: None,
            source: DiagSource::Exact,
            log_base: LogChoice::Ln,
            k: 4,
            levels: vec![1, 2, 3, 4],
        }
    }

    /// Layers `file` and then `flags` over the defaults, then validates.
    pub fn resolve(subcommand: SubcommandName, flags: &Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                parse_file(&text)?
            }
            None => FileConfig::default(),
        };
        if let Some(s) = file.subcommand {
            if s != subcommand {
                return Err(CliError::Config(format!(
                    "config file is for `{}`, not `{}`",
                    s.name(),
                    subcommand.name()
                )));
            }
        }
        let mut c = Self::defaults(subcommand);
        c.apply_file(file);
        c.apply_flags(flags);
        c.validate()?;
        Ok(c)
    }

    /// Parses canonical (or partial) JSON config text over the defaults.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let file = parse_file(text)?;
        let sub = file
            .subcommand
            .ok_or_else(|| CliError::Config("config lacks `subcommand`".into()))?;
        let mut c = Self::defaults(sub);
        c.apply_file(file);
        c.validate()?;
        Ok(c)
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    fn apply_file(&mut self, f: FileConfig) {
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { self.$field = v; } )* };
        }
        take!(nmin, nmax, ratio, trials, seed, eps, rel_tol, format, strict, source, log_base, k, levels);
        if f.spec.is_some() {
            self.spec = f.spec;
        }
        if f.nlist.is_some() {
            self.nlist = f.nlist;
        }
        if f.out.is_some() {
            self.out = f.out;
        }
        if f.threads.is_some() {
            self.threads = f.threads;
        }
    }

    fn apply_flags(&mut self, f: &Flags) {
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = &f.$field { self.$field = v.clone(); } )* };
        }
        take!(nmin, nmax, ratio, trials, seed, eps, rel_tol, format, source, log_base, k, levels);
        if f.spec.is_some() {
            self.spec = f.spec.clone();
        }
        if f.nlist.is_some() {
            self.nlist = f.nlist.clone();
        }
        if f.out.is_some() {
            self.out = f.out.clone();
        }
        if f.threads.is_some() {
            self.threads = f.threads;
        }
        self.strict |= f.strict;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.nmin == 0 || self.nmax < self.nmin {
            return bad(format!("need 1 <= nmin <= nmax, got {} and {}", self.nmin, self.nmax));
        }
        if !(self.ratio > 1.0 && self.ratio <= 1e6) {
            return bad(format!("ratio {} outside (1, 1e6]", self.ratio));
        }
        if let Some(list) = &self.nlist {
            if list.is_empty() || list.len() > MAX_GRID_POINTS {
                return bad(format!("nlist needs 1..={MAX_GRID_POINTS} values"));
            }
            if list[0] == 0 || list.windows(2).any(|w| w[1] <= w[0]) {
                return bad("nlist must be positive and strictly increasing".into());
            }
            if list.iter().any(|&n| n > i64::MAX as u64) {
                return bad("n above 2^63 - 1".into());
            }
        }
        if self.nmax > i64::MAX as u64 {
            return bad("nmax above 2^63 - 1".into());
        }
        if !(1..=MAX_TRIALS).contains(&self.trials) {
            return bad(format!("trials {} outside 1..={MAX_TRIALS}", self.trials));
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return bad("eps needs one or more finite values >= 0".into());
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 0.5) {
            return bad(format!("rel_tol {} outside (0, 0.5)", self.rel_tol));
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        if !(1..=rangelab::diagnostics::MAX_SUBSEQUENCE).contains(&self.k) {
            return bad(format!(
                "k {} outside 1..={}",
                self.k,
                rangelab::diagnostics::MAX_SUBSEQUENCE
            ));
        }
        if self.levels.is_empty() || self.levels.contains(&0) {
            return bad("levels must be nonempty and >= 1".into());
        }
        Ok(())
    }

    /// The checkpoint grid: the explicit list, or the geometric grid.
    pub fn grid(&self) -> Result<Vec<u64>, CliError> {
        if let Some(list) = &self.nlist {
            return Ok(list.clone());
        }
        let g = rangelab::montecarlo::geometric_grid(self.nmin, self.nmax, self.ratio)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if g.len() > MAX_GRID_POINTS {
            return Err(CliError::Config(format!(
                "grid has {} points; the limit is {MAX_GRID_POINTS}",
                g.len()
            )));
        }
        Ok(g)
    }

    /// Requested threads, capped by `RANGELAB_THREADS`.
    pub fn effective_threads(&self) -> Result<Option<usize>, CliError> {
        let cap = match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Some(n),
                _ => {
                    return Err(CliError::Config(format!(
                        "{THREADS_ENV}={v:?} is not a positive integer"
                    )))
                }
            },
            Err(_) => None,
        };
        Ok(match (self.threads, cap) {
            (Some(t), Some(c)) => Some(t.min(c)),
            (t, c) => t.or(c),
        })
    }
}

impl SubcommandName {
    pub fn name(&self) -> &'static str {
        match self {
            SubcommandName::Dist => "dist",
            SubcommandName::Exact => "exact",
            SubcommandName::Simulate => "simulate",
            SubcommandName::Diagnose => "diagnose",
            SubcommandName::Counterexample => "counterexample",
        }
    }
}

fn parse_file(text: &str) -> Result<FileConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_round_trips() {
        let mut c = RunConfig::defaults(SubcommandName::Simulate);
        c.spec = Some(r#"{"kind":"geometric","q":0.5}"#.into());
        c.nlist = Some(vec![1, 10, 100]);
        c.eps = vec![0.0, 0.1];
        c.rel_tol = 3e-7;
        let text = c.to_canonical_json();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_canonical_json(), text);
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("rangelab-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"trials": 7, "seed": 3}"#).unwrap();
        let flags = Flags {
            seed: Some(9),
            config: Some(path),
            ..Default::default()
        };
        let c = RunConfig::resolve(SubcommandName::Simulate, &flags).unwrap();
        assert_eq!((c.trials, c.seed), (7, 9));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for text in [
            r#"{"subcommand":"exact","ratio":1.0}"#,
            r#"{"subcommand":"exact","nmin":0}"#,
            r#"{"subcommand":"exact","eps":[-1]}"#,
            r#"{"subcommand":"exact","k":9}"#,
            r#"{"subcommand":"exact","bogus":1}"#,
        ] {
            assert!(RunConfig::from_json(text).is_err(), "{text}");
        }
    }
}
