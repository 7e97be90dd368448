//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed regardless of
//! outcome. Exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use homog_cli::reproduce::{self, CriterionOutcome};
use homog_core::cell::gamma_closed_form;
use homog_core::gammalab::gamma_limit_constant_value;

const BIN: &str = env!("CARGO_BIN_EXE_homog");

struct Line {
    id: u8,
    name: String,
    passed: bool,
    detail: String,
}

fn timed(id: u8, limit: Option<Duration>, f: impl FnOnce() -> anyhow::Result<CriterionOutcome>) -> Line {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    match result {
        Ok(o) => {
            let in_time = limit.is_none_or(|l| elapsed <= l);
            let budget = limit.map_or(String::new(), |l| format!(" / limit {:.0} s", l.as_secs_f64()));
            Line {
                id,
                name: o.name.to_string(),
                passed: o.passed && in_time,
                detail: format!("{:.2} s{budget}; {}", elapsed.as_secs_f64(), o.summary),
            }
        }
        Err(e) => Line {
            id,
            name: "error".into(),
            passed: false,
            detail: format!("{e:#}"),
        },
    }
}

fn run_homog(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(BIN)
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("HOMOG_THREADS")
        .output()
        .expect("run homog")
}

fn criterion_1_direct() -> anyhow::Result<CriterionOutcome> {
    let mut o = reproduce::criterion_1()?;
    let g = gamma_closed_form(1.0, 2.0, 0.5, 0.5)?;
    let l = gamma_limit_constant_value(1.0, 2.0, 0.5)?;
    o.passed &= (g - 0.625).abs() <= 1e-12 && (l - 0.625).abs() <= 1e-12;
    Ok(o)
}

fn criterion_7_with_binary() -> anyhow::Result<CriterionOutcome> {
    let mut o = reproduce::criterion_7()?;
    let dir = tempfile::tempdir()?;
    let out = run_homog(dir.path(), &["non-rep"]);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("non-rep.json"))?)?;
    let code = out.status.code();
    let verdict = json["result"]["verdict"].as_str().unwrap_or_default().to_string();
    o.passed &= code == Some(0) && verdict == "confirmed";
    o.summary.push_str(&format!("; `homog non-rep` exit {code:?}, verdict {verdict}"));
    Ok(o)
}

fn criterion_9() -> anyhow::Result<CriterionOutcome> {
    let mut reports = Vec::new();
    let mut codes = Vec::new();
    for threads in ["1", "8"] {
        let dir = tempfile::tempdir()?;
        let out = run_homog(dir.path(), &["reproduce-all", "--seed", "7", "--threads", threads]);
        codes.push(out.status.code());
        reports.push(std::fs::read(dir.path().join("reproduce-all.json"))?);
    }
    let identical = reports[0] == reports[1] && !reports[0].is_empty();
    Ok(CriterionOutcome {
        id: 9,
        name: "determinism across thread counts",
        passed: identical,
        summary: format!(
            "reproduce-all JSON with 1 and 8 threads: {} ({} bytes; exit codes {codes:?})",
            if identical { "byte-identical" } else { "DIFFERENT" },
            reports[0].len()
        ),
        details: serde_json::Value::Null,
    })
}

fn main() {
    let secs = Duration::from_secs;
    let lines = vec![
        timed(1, Some(secs(1)), criterion_1_direct),
        timed(2, Some(secs(60)), reproduce::criterion_2),
        timed(3, Some(secs(10)), reproduce::criterion_3),
        timed(4, Some(secs(120)), reproduce::criterion_4),
        timed(5, Some(secs(120)), || reproduce::criterion_5(0, 50)),
        timed(6, None, reproduce::criterion_6),
        timed(7, None, criterion_7_with_binary),
        timed(8, Some(secs(60)), reproduce::criterion_8),
        timed(9, None, criterion_9),
    ];
    println!();
    for l in &lines {
        println!(
            "criterion {}: {} {} ({})",
            l.id,
            if l.passed { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        );
    }
    let passed = lines.iter().filter(|l| l.passed).count();
    println!("\n{passed}/{} criteria passed", lines.len());
    if passed != lines.len() {
        std::process::exit(1);
    }
}
