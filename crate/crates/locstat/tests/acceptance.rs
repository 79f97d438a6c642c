//! Desk-scale acceptance run; prints one pass/fail line per criterion.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use locstat::experiments::{CltParams, ExperimentDoc, ExperimentReport, MCConfig};

const BASE_SEED: u64 = 20240601;

struct Run {
    doc: ExperimentDoc,
    report: ExperimentReport,
}

fn config(doc: &ExperimentDoc, parallel: usize) -> MCConfig {
    MCConfig { n_rep: doc.default_n_rep(), base_seed: BASE_SEED, parallel, out_dir: "unused".into() }
}

fn run(doc: ExperimentDoc, parallel: usize) -> Run {
    let report = doc.run(&config(&doc, parallel)).unwrap_or_else(|e| panic!("{}: {e}", doc.name()));
    Run { doc, report }
}

fn say(line: &str) {
    // written straight to the handle so the lines survive libtest's output capture
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn num(x: f64) -> String {
    if x == 0.0 || (1e-3..1e4).contains(&x.abs()) {
        format!("{x:.4}")
    } else {
        format!("{x:.3e}")
    }
}

/// `(all listed verdicts pass, "id=observed" summary)`.
fn check(runs: &[&Run], ids: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        for v in &r.report.verdicts {
            if ids.is_empty() || ids.iter().any(|id| v.id == *id) {
                ok &= v.pass;
                parts.push(format!("{}:{}={}{}", r.report.name, v.id, num(v.observed), if v.pass { "" } else { "(fail)" }));
            }
        }
    }
    assert!(!parts.is_empty(), "no verdicts selected");
    (ok, parts.join(" "))
}

fn find<'a>(runs: &'a [Run], name: &str) -> Vec<&'a Run> {
    runs.iter().filter(|r| r.report.name == name).collect()
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn acceptance_criteria() {
    let start = Instant::now();
    let mut docs = ExperimentDoc::all_defaults();
    docs.push(ExperimentDoc::Clt(CltParams::iid()));
    let runs: Vec<Run> = docs.into_iter().map(|d| run(d, 1)).collect();

    let criteria: Vec<(&str, Vec<&Run>, Vec<&str>)> = vec![
        ("C1 figure-1 bands", find(&runs, "fig1"), vec![]),
        ("C2 approximation rate", find(&runs, "rate"), vec![]),
        ("C3 derivative process", find(&runs, "derivative"), vec![]),
        ("C4 local LLN", find(&runs, "lln"), vec!["relative_error_at_n_max"]),
        ("C5 local CLT", find(&runs, "clt"), vec![]),
        ("C6 dependence decay", find(&runs, "dependence"), vec![]),
        ("C7 bias orders", [find(&runs, "bias"), find(&runs, "qmle_bias")].concat(), vec![]),
        ("C8 QMLE", find(&runs, "qmle"), vec![]),
    ];
    let mut failed = Vec::new();
    for (label, selected, ids) in &criteria {
        let (ok, detail) = check(selected, ids);
        say(&format!("{} {label}: {detail}", if ok { "PASS" } else { "FAIL" }));
        if !ok {
            failed.push(*label);
        }
    }

    let tmp = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    for (i, first) in runs.iter().enumerate() {
        let again = run(first.doc.clone(), 4);
        let (a, b) = (tmp.path().join(format!("{i}-p1")), tmp.path().join(format!("{i}-p4")));
        first.report.write_to(&a).unwrap();
        again.report.write_to(&b).unwrap();
        if artifacts(&a) != artifacts(&b) {
            mismatched.push(first.report.name.clone());
        }
    }
    let ok = mismatched.is_empty();
    say(&format!(
        "{} C9 determinism: {} experiments byte-identical across two runs with 1 and 4 workers{}",
        if ok { "PASS" } else { "FAIL" },
        runs.len() - mismatched.len(),
        if ok { String::new() } else { format!(" (differ: {})", mismatched.join(", ")) }
    ));
    if !ok {
        failed.push("C9 determinism");
    }
    say(&format!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64()));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
