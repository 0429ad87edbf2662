use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ultramorse::morse::Quotient;
use ultramorse::nonarch::{eval_expression, Exponent, ParseSeriesError};
use ultramorse::{
    run_ladder, verify_morse_relation, LadderConfig, MorseRelationReport, NatPoly, NonArchError, ProblemSource,
    PsuStatus, StabilizationTrace,
};

use crate::config::{Overrides, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_VIOLATION: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;
pub const EXIT_SWEEP_FAILURE: u8 = 4;

/// Violations outrank degenerate levels.
pub fn trace_exit_code(trace: &StabilizationTrace) -> u8 {
    if trace.has_violation() {
        EXIT_VIOLATION
    } else if trace.has_degenerate_level() {
        EXIT_DEGENERATE
    } else {
        EXIT_OK
    }
}

struct Prepared {
    source: ProblemSource,
    ladder: LadderConfig,
    out_dir: PathBuf,
    json: String,
    csv: String,
}

fn prepare(path: &Path, overrides: &Overrides) -> Result<Prepared> {
    let (mut cfg, base) = RunConfig::load(path)?;
    cfg.apply(overrides);
    let source = cfg.problem_source(&base)?;
    let ladder = cfg.ladder_config()?;
    let out_dir = cfg.output.dir.clone();
    ensure_writable(&out_dir)?;
    Ok(Prepared { source, ladder, out_dir, json: cfg.output.json, csv: cfg.output.csv })
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let probe = dir.join(".ultramorse-write-check");
    fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
    fs::remove_file(&probe).ok();
    Ok(())
}

pub fn cmd_run(path: &Path, overrides: &Overrides) -> Result<u8> {
    let p = prepare(path, overrides)?;
    let spec = p.source.build()?;
    let trace = run_ladder(&spec, &p.ladder)?;

    let json_path = p.out_dir.join(&p.json);
    fs::write(&json_path, trace.to_json()? + "\n").with_context(|| format!("writing {}", json_path.display()))?;
    let csv_path = p.out_dir.join(&p.csv);
    let file = fs::File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    trace.write_csv(file)?;

    print!("{}", summary(&trace));
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(trace_exit_code(&trace))
}

fn quotient_text(r: Option<&MorseRelationReport>) -> String {
    match r.map(|r| &r.quotient) {
        Some(Quotient::Natural(q)) => q.to_string(),
        Some(Quotient::Violation(v)) => format!("violation ({v})"),
        None => "-".into(),
    }
}

pub fn summary(trace: &StabilizationTrace) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "problem: {}   P_t = {}", trace.problem, trace.betti);
    let _ = writeln!(s, "{:>6}  {:>5}  {:<16}  {:<18}  {:<18}  euler", "level", "count", "indices", "M_t", "Q");
    for l in &trace.per_level {
        let indices = format!("{:?}", l.index_multiset());
        let (m, euler) = match (&l.morse, &l.relation) {
            (Some(m), Some(r)) => (m.to_string(), if r.euler_ok { "ok" } else { "FAIL" }),
            _ => ("degenerate".to_string(), "-"),
        };
        let q = quotient_text(l.relation.as_ref());
        let _ = writeln!(s, "{:>6}  {:>5}  {:<16}  {:<18}  {:<18}  {}", l.level, l.points.len(), indices, m, q, euler);
    }
    let _ = writeln!(s, "{:>6}  {:<14}  {:<8}  {:<12}  PSU", "family", "levels", "index", "last incr");
    for f in &trace.families {
        let span = format!("{}..{}", f.first_level(), f.last_level());
        let index = f.index_history.last().map_or("-".into(), usize::to_string);
        let last = f.w_increments.last().map_or("-".into(), |d| format!("{d:.3e}"));
        let psu = match f.psu.status {
            PsuStatus::Converged => match f.psu.rate {
                Some(r) => format!("converged (rate {r:.2})"),
                None => "converged".into(),
            },
            PsuStatus::NotConverged => "NOT converged".into(),
            PsuStatus::InsufficientData => "insufficient data".into(),
        };
        let term = if f.terminated { "  terminated" } else { "" };
        let _ = writeln!(s, "{:>6}  {:<14}  {:<8}  {:<12}  {psu}{term}", format!("F{}", f.id), span, index, last);
    }
    match (&trace.stable_from, &trace.m_limit) {
        (Some(n), Some(m)) => {
            let _ = writeln!(s, "stable from level {n}: M_limit = {m}");
        }
        _ => {
            let _ = writeln!(s, "no stabilization on this ladder");
        }
    }
    s
}

/// Deduplicates (exact equality) keeping first occurrences.
pub fn dedup_mu(values: &[f64]) -> Vec<f64> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for &mu in values {
        if seen.insert(mu.to_bits()) {
            out.push(mu);
        } else {
            log::warn!("duplicate mu = {mu} ignored");
        }
    }
    out
}

pub fn cmd_sweep(path: &Path, mus: &[f64], overrides: &Overrides) -> Result<u8> {
    if mus.is_empty() {
        anyhow::bail!("sweep needs at least one mu value");
    }
    let p = prepare(path, overrides)?;
    if p.source.preset.is_none() {
        anyhow::bail!("sweep needs a preset problem with a mu parameter");
    }
    let mus = dedup_mu(mus);
    let base_seed = p.ladder.solver.seed;

    let csv_path = p.out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    w.write_record(["mu", "count", "M_t", "Q", "stable_from", "status"])?;
    let mut code = EXIT_OK;
    let mut failed = 0usize;
    println!("{:>8}  {:>5}  {:<18}  {:<18}  {:<11}  status", "mu", "count", "M_t", "Q", "stable_from");
    for (i, &mu) in mus.iter().enumerate() {
        let mut ladder = p.ladder.clone();
        ladder.solver.seed = base_seed.wrapping_add(i as u64);
        let source = ProblemSource { mu: Some(mu), ..p.source.clone() };
        let result = source.build().map_err(anyhow::Error::from).and_then(|spec| Ok(run_ladder(&spec, &ladder)?));
        let row = match result {
            Ok(trace) => {
                code = code.max(trace_exit_code(&trace));
                let finest = trace.per_level.last().expect("at least two levels");
                let m = finest.morse.as_ref().map_or("degenerate".into(), NatPoly::to_string);
                let stable = trace.stable_from.map_or("-".into(), |n| n.to_string());
                [
                    mu.to_string(),
                    finest.points.len().to_string(),
                    m,
                    quotient_text(finest.relation.as_ref()),
                    stable,
                    "ok".into(),
                ]
            }
            Err(e) => {
                log::error!("mu = {mu}: {e:#}");
                failed += 1;
                [mu.to_string(), String::new(), String::new(), String::new(), String::new(), format!("error: {e}")]
            }
        };
        println!("{:>8}  {:>5}  {:<18}  {:<18}  {:<11}  {}", row[0], row[1], row[2], row[3], row[4], row[5]);
        w.write_record(&row)?;
    }
    w.flush()?;
    println!("wrote {}", csv_path.display());
    if failed > 0 {
        eprintln!("{failed} of {} sweep point(s) failed", mus.len());
        return Ok(EXIT_SWEEP_FAILURE);
    }
    Ok(code)
}

pub fn cmd_check(m: &str, p: &str) -> Result<u8> {
    let m: NatPoly = m.parse().context("M")?;
    let p: NatPoly = p.parse().context("P")?;
    let report = verify_morse_relation(&m, &p);
    println!("M_t = {m}");
    println!("P_t = {p}");
    let euler = if report.euler_ok { "ok" } else { "FAIL" };
    match &report.quotient {
        Quotient::Natural(q) => {
            println!("Q = {q}");
            println!("euler: {euler}");
            Ok(EXIT_OK)
        }
        Quotient::Violation(v) => {
            println!("violation: {v}");
            println!("euler: {euler}");
            Ok(EXIT_VIOLATION)
        }
    }
}

pub fn cmd_hyper(expr: &str, order: i32) -> Result<u8> {
    match eval_expression(expr, Exponent::from_int(order)) {
        Ok(x) => {
            let sh = x.shadow();
            let shadow = if sh == f64::INFINITY { "+inf".to_string() } else { sh.to_string() };
            println!("series: {x}");
            println!("class:  {}", x.classify());
            println!("shadow: {shadow}");
            Ok(EXIT_OK)
        }
        Err(ParseSeriesError::Arithmetic(NonArchError::DivisionByZero)) => {
            eprintln!("error: division by zero in {expr:?}");
            Ok(EXIT_VIOLATION)
        }
        Err(e) => Err(e.into()),
    }
}
