use rangelab::diagnostics::{
    counterexample_statistics, paper_bound_check, speed_series, LogBase, Source,
};
use rangelab::distributions::block_normalizer;
use rangelab::exact::{
    entropy, entropy_block_contribution, expected_range, expected_range_log2, EntropyResult,
    ExactError,
};
use rangelab::montecarlo::{run_trials, MonteCarloError, TrialOptions};
use rangelab::{Bracket, DistError, DistributionSpec, Log2Number};
use serde_json::{json, Value};

use crate::config::{DiagSource, Format, LogChoice, RunConfig, SubcommandName};
use crate::error::CliError;
use crate::format::{count, log2_value, num, Table};

pub const SCHEMA_VERSION: u32 = 1;

/// Rendered output plus anything that should go to standard error.
pub struct Report {
    pub body: String,
    pub notes: Vec<String>,
    /// Set when some bracket missed its tolerance.
    pub budget_exceeded: bool,
}

impl Report {
    fn new(body: String) -> Self {
        Self { body, notes: Vec::new(), budget_exceeded: false }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    match cfg.subcommand {
        SubcommandName::Dist => dist(cfg),
        SubcommandName::Exact => exact(cfg),
        SubcommandName::Simulate => simulate(cfg),
        SubcommandName::Diagnose => diagnose(cfg),
        SubcommandName::Counterexample => counterexample(cfg),
    }
}

fn load_spec(cfg: &RunConfig) -> Result<DistributionSpec, CliError> {
    let src = cfg
        .spec
        .as_deref()
        .ok_or_else(|| CliError::Config("--spec is required".into()))?;
    let text = match src.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Spec(format!("{path}: {e}")))?,
        None => src.to_string(),
    };
    DistributionSpec::from_json(&text).map_err(|e| CliError::Spec(e.to_string()))
}

fn exact_err(e: ExactError) -> CliError {
    match e {
        ExactError::Domain(m) | ExactError::Dist(DistError::InvalidArgument(m)) => {
            CliError::Config(m)
        }
        other => CliError::Runtime(other.to_string()),
    }
}

fn dist_err(e: DistError) -> CliError {
    exact_err(ExactError::Dist(e))
}

fn document(command: &str, spec: Option<&DistributionSpec>, fields: Value) -> String {
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
    });
    if let Some(d) = spec {
        doc["spec"] = serde_json::from_str(&d.to_json()).expect("canonical spec is JSON");
    }
    if let (Value::Object(dst), Value::Object(src)) = (&mut doc, fields) {
        dst.extend(src);
    }
    serde_json::to_string_pretty(&doc).expect("document serializes") + "\n"
}

fn bracket_json(b: &Bracket) -> Value {
    json!({ "lo": b.lo(), "hi": b.hi() })
}

fn count_json(c: &rangelab::AtomCount) -> Value {
    match c {
        rangelab::AtomCount::Exact(v) => match u64::try_from(*v) {
            Ok(small) => json!(small),
            Err(_) => json!(v.to_string()),
        },
        rangelab::AtomCount::Huge(l) => json!({ "log2": l.log2() }),
    }
}

fn dist(cfg: &RunConfig) -> Result<Report, CliError> {
    let d = load_spec(cfg)?;
    let grid = cfg.grid()?;
    let mass = d.total_mass();
    let support = d.support_size();
    let phi = grid
        .iter()
        .map(|&n| d.phi_inverse(n as f64).map(|c| (n, c)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(dist_err)?;
    let levels = cfg
        .levels
        .iter()
        .map(|&k| d.level_count(k).map(|c| (k, c)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(dist_err)?;
    let blocks = match &d {
        DistributionSpec::Blocks(b) => Some(b.blocks().len() as u64),
        DistributionSpec::BlockCounterexample(c) => Some(c.blocks() as u64),
        _ => None,
    };

    let body = match cfg.format {
        Format::Csv => {
            let mut t = Table::new(&["field", "argument", "value"]);
            let mut put = |f: &str, a: String, v: String| t.row(vec![f.into(), a, v]);
            put("kind", String::new(), d.kind_name().into());
            put("valid", String::new(), "true".into());
            put(
                "support_size",
                String::new(),
                support.as_ref().map_or("inf".into(), count),
            );
            if let Some(b) = blocks {
                put("blocks", String::new(), b.to_string());
            }
            put("total_mass_lo", String::new(), num(mass.lo()));
            put("total_mass_hi", String::new(), num(mass.hi()));
            if let Some(c) = d.normalizer() {
                put("normalizer_lo", String::new(), num(c.lo()));
                put("normalizer_hi", String::new(), num(c.hi()));
            }
            for (n, c) in &phi {
                put("phi_inverse", n.to_string(), count(c));
            }
            for (k, c) in &levels {
                put("level_count", k.to_string(), count(c));
            }
            t.finish()
        }
        Format::Json => document(
            "dist",
            Some(&d),
            json!({
                "kind": d.kind_name(),
                "valid": true,
                "support_size": support.as_ref().map_or(json!("inf"), count_json),
                "blocks": blocks,
                "total_mass": bracket_json(&mass),
                "normalizer": d.normalizer().as_ref().map(bracket_json),
                "phi_inverse": phi.iter().map(|(n, c)| json!({"n": n, "count": count_json(c)})).collect::<Vec<_>>(),
                "level_count": levels.iter().map(|(k, c)| json!({"k": k, "count": count_json(c)})).collect::<Vec<_>>(),
            }),
        ),
    };
    Ok(Report::new(body))
}

fn exact(cfg: &RunConfig) -> Result<Report, CliError> {
    let d = load_spec(cfg)?;
    let grid = cfg.grid()?;
    let rows = grid
        .iter()
        .map(|&n| expected_range(&d, n, cfg.rel_tol).map(|e| (n, e)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(exact_err)?;
    let h = entropy(&d, cfg.rel_tol).map_err(exact_err)?;
    let flagged = rows.iter().any(|(_, e)| e.budget_exceeded)
        || matches!(h, EntropyResult::Finite { budget_exceeded: true, .. });
    let flag = |b: bool| if b { "budget_exceeded" } else { "" };

    let mut report = match cfg.format {
        Format::Csv => {
            let mut t = Table::new(&["n", "er_lo", "er_hi", "flag"]);
            for (n, e) in &rows {
                t.row(vec![
                    n.to_string(),
                    num(e.bracket.lo()),
                    num(e.bracket.hi()),
                    flag(e.budget_exceeded).into(),
                ]);
            }
            let mut r = Report::new(t.finish());
            r.notes.push(match &h {
                EntropyResult::Finite { value, budget_exceeded } => format!(
                    "entropy: finite [{}, {}] nats{}",
                    num(value.lo()),
                    num(value.hi()),
                    if *budget_exceeded { " (budget_exceeded)" } else { "" }
                ),
                EntropyResult::Divergent { analytic_flag, .. } => format!(
                    "entropy: divergent{}",
                    if *analytic_flag { " (analytic)" } else { "" }
                ),
            });
            r
        }
        Format::Json => Report::new(document(
            "exact",
            Some(&d),
            json!({
                "rows": rows.iter().map(|(n, e)| json!({
                    "n": n,
                    "er_lo": e.bracket.lo(),
                    "er_hi": e.bracket.hi(),
                    "flag": flag(e.budget_exceeded),
                })).collect::<Vec<_>>(),
                "entropy": h,
            }),
        )),
    };
    report.budget_exceeded = flagged;
    Ok(report)
}

fn trial_options(cfg: &RunConfig) -> Result<TrialOptions, CliError> {
    Ok(TrialOptions {
        threads: cfg.effective_threads()?,
        ..Default::default()
    })
}

fn mc_err(e: MonteCarloError) -> CliError {
    match e {
        MonteCarloError::UnsampleableSpec(m) => CliError::Unsupported(format!(
            "{m}; use `rangelab counterexample` for log-domain diagnostics of this law"
        )),
        MonteCarloError::InvalidArgument(m) => CliError::Config(m),
        other => CliError::Runtime(other.to_string()),
    }
}

fn simulate(cfg: &RunConfig) -> Result<Report, CliError> {
    let d = load_spec(cfg)?;
    let grid = cfg.grid()?;
    let run = run_trials(&d, &grid, cfg.trials, cfg.seed, &trial_options(cfg)?).map_err(mc_err)?;
    let s = &run.summary;
    let er = grid
        .iter()
        .map(|&n| expected_range(&run.effective, n, cfg.rel_tol).map(|e| e.bracket.mid()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(exact_err)?;
    let body = match cfg.format {
        Format::Csv => {
            let mut t = Table::new(&[
                "n",
                "mean",
                "std",
                "min",
                "max",
                "er_mid_on_effective_dist",
                "ratio",
            ]);
            for i in 0..grid.len() {
                t.row(vec![
                    grid[i].to_string(),
                    num(s.mean[i]),
                    num(s.std[i]),
                    s.min[i].to_string(),
                    s.max[i].to_string(),
                    num(er[i]),
                    num(s.mean[i] / er[i]),
                ]);
            }
            t.finish()
        }
        Format::Json => document(
            "simulate",
            Some(&d),
            json!({
                "trials": cfg.trials,
                "seed": cfg.seed,
                "effective_spec": serde_json::from_str::<Value>(&run.effective.to_json()).expect("canonical spec is JSON"),
                "rows": (0..grid.len()).map(|i| json!({
                    "n": grid[i],
                    "mean": s.mean[i],
                    "std": s.std[i],
                    "min": s.min[i],
                    "max": s.max[i],
                    "er_mid_on_effective_dist": er[i],
                    "ratio": s.mean[i] / er[i],
                })).collect::<Vec<_>>(),
            }),
        ),
    };
    Ok(Report::new(body))
}

fn log_base(c: LogChoice) -> LogBase {
    match c {
        LogChoice::Ln => LogBase::Natural,
        LogChoice::Log2 => LogBase::Binary,
    }
}

fn diagnose(cfg: &RunConfig) -> Result<Report, CliError> {
    let d = load_spec(cfg)?;
    let grid = cfg.grid()?;
    if grid[0] < 2 {
        return Err(CliError::Config("diagnose needs every n >= 2".into()));
    }
    let mut flagged = false;
    let (values, source): (Vec<Log2Number>, Source) = match cfg.source {
        DiagSource::Exact if d.is_block_form() => (
            grid.iter()
                .map(|&n| {
                    expected_range_log2(&d, Log2Number::from_u64(n))
                        .map(|b| Log2Number::from_log2(0.5 * (b.log2_lo() + b.log2_hi())))
                })
                .collect::<Result<_, _>>()
                .map_err(exact_err)?,
            Source::Exact,
        ),
        DiagSource::Exact => (
            grid.iter()
                .map(|&n| {
                    expected_range(&d, n, cfg.rel_tol).map(|e| {
                        flagged |= e.budget_exceeded;
                        Log2Number::from_f64(e.bracket.mid())
                    })
                })
                .collect::<Result<_, _>>()
                .map_err(exact_err)?,
            Source::Exact,
        ),
        DiagSource::Simulate => {
            let run = run_trials(&d, &grid, cfg.trials, cfg.seed, &trial_options(cfg)?)
                .map_err(mc_err)?;
            (
                run.summary.mean.iter().map(|&m| Log2Number::from_f64(m)).collect(),
                Source::Simulated,
            )
        }
    };
    let pts: Vec<_> = grid.iter().map(|&n| Log2Number::from_u64(n)).zip(values).collect();
    let series = cfg
        .eps
        .iter()
        .map(|&e| speed_series(&pts, e, source, log_base(cfg.log_base)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let body = match cfg.format {
        Format::Csv => {
            let mut t = Table::new(&["n", "epsilon", "stat", "source"]);
            for i in 0..grid.len() {
                for s in &series {
                    let e = &s.entries[i];
                    t.row(vec![
                        grid[i].to_string(),
                        num(e.epsilon),
                        log2_value(e.log2_stat),
                        e.source.as_str().into(),
                    ]);
                }
            }
            t.finish()
        }
        Format::Json => document(
            "diagnose",
            Some(&d),
            json!({
                "log_base": cfg.log_base,
                "rows": (0..grid.len()).flat_map(|i| series.iter().map(move |s| (i, s))).map(|(i, s)| {
                    let e = &s.entries[i];
                    json!({
                        "n": grid[i],
                        "epsilon": e.epsilon,
                        "stat": e.stat(),
                        "log2_stat": e.log2_stat,
                        "source": e.source.as_str(),
                    })
                }).collect::<Vec<_>>(),
            }),
        ),
    };
    let mut r = Report::new(body);
    r.budget_exceeded = flagged;
    Ok(r)
}

fn counterexample(cfg: &RunConfig) -> Result<Report, CliError> {
    let a = block_normalizer(None);
    let bounds = paper_bound_check(cfg.k, a).map_err(|e| CliError::Config(e.to_string()))?;
    // Both variants: the statistic with ln n and with log2 n.
    let mut stats = Vec::new();
    for base in [LogBase::Natural, LogBase::Binary] {
        stats.extend(
            counterexample_statistics(cfg.k, &cfg.eps, base)
                .map_err(|e| CliError::Config(e.to_string()))?,
        );
    }
    let stat = |k: u32, eps: f64, base: LogBase| {
        stats
            .iter()
            .find(|s| s.k == k && s.epsilon == eps && s.base == base)
            .expect("one statistic per (k, eps, base)")
    };
    let pass = |p: Option<bool>| p.map_or(String::new(), |b| b.to_string());

    let body = match cfg.format {
        Format::Csv => {
            let mut header: Vec<String> = [
                "k",
                "log2_nk",
                "log2_er_lo",
                "log2_er_hi",
                "paper_bound_log2",
                "pass",
                "corrected_bound_log2",
                "corrected_pass",
            ]
            .map(String::from)
            .to_vec();
            for e in &cfg.eps {
                for base in ["ln", "log2"] {
                    header.push(format!("log2_stat_{base}_eps{e}_lo"));
                    header.push(format!("log2_stat_{base}_eps{e}_hi"));
                }
            }
            let mut t = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
            for r in &bounds {
                let mut cells = vec![
                    r.k.to_string(),
                    num(r.log2_nk),
                    num(r.log2_er_lo),
                    num(r.log2_er_hi),
                    num(r.paper_bound_log2),
                    pass(r.pass),
                    num(r.corrected_bound_log2),
                    pass(r.corrected_pass),
                ];
                for &e in &cfg.eps {
                    for base in [LogBase::Natural, LogBase::Binary] {
                        let s = stat(r.k, e, base);
                        cells.push(num(s.log2_stat_lo));
                        cells.push(num(s.log2_stat_hi));
                    }
                }
                t.row(cells);
            }
            t.finish()
        }
        Format::Json => {
            let entropy_blocks = (1..=cfg.k)
                .map(|k| entropy_block_contribution(a, k).map(|b| json!({"k": k, "nats": bracket_json(&b)})))
                .collect::<Result<Vec<_>, _>>()
                .map_err(exact_err)?;
            document(
                "counterexample",
                None,
                json!({
                    "normalizer": bracket_json(&a),
                    "rows": bounds,
                    "statistics": stats,
                    "entropy_blocks": entropy_blocks,
                }),
            )
        }
    };
    Ok(Report::new(body))
}
