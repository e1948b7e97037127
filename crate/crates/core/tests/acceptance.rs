//! Acceptance suite: twelve end-to-end criteria, each a set of studies run
//! at the baseline configuration and judged by the checks those studies
//! declare plus a wall-clock budget.
//!
//! Runs sequentially so the budgets measure one core. Prints one line per
//! criterion and exits non-zero if any fails. Select criteria by number:
//! `cargo test --test acceptance -- 7 11`.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use burgerslab::harness::{emit_reports, run_study, ExperimentConfig, StudyReport};

struct Criterion {
    id: usize,
    title: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

#[derive(Default)]
struct Outcome {
    failures: Vec<String>,
    details: Vec<String>,
}

impl Outcome {
    fn absorb(&mut self, label: &str, report: &StudyReport) {
        for c in report.failures() {
            self.failures.push(format!("{label}: {} = {:e} (bounds {:?}..{:?})", c.name, c.value, c.lower, c.upper));
        }
        for o in report.orders.iter().filter_map(|o| o.order.map(|p| (o, p))) {
            self.details.push(format!("{label}: order {} = {:.3}", o.0.name, o.1));
        }
    }
}

fn study(json: &str) -> StudyReport {
    let config = ExperimentConfig::from_json(json).unwrap_or_else(|e| panic!("bad config {json}: {e}"));
    run_study(&config).unwrap_or_else(|e| panic!("study {json} did not run: {e}"))
}

fn studies(runs: &[(&str, &str)]) -> Outcome {
    let mut out = Outcome::default();
    for (label, json) in runs {
        out.absorb(label, &study(json));
    }
    out
}

fn duality() -> Outcome {
    studies(&[("lattice", r#"{"study": "lattice"}"#)])
}

fn mollifier_laws() -> Outcome {
    studies(&[("mollifier", r#"{"study": "mollifier"}"#)])
}

fn noise_laws() -> Outcome {
    studies(&[("noise-check", r#"{"study": "noise-check"}"#)])
}

fn quadratic_variation() -> Outcome {
    studies(&[("qv", r#"{"study": "qv", "M": 10000}"#)])
}

fn deterministic_oracle() -> Outcome {
    studies(&[("heat", r#"{"study": "heat"}"#)])
}

fn kpz_residual() -> Outcome {
    studies(&[("kpz", r#"{"study": "kpz"}"#)])
}

fn weak_identity() -> Outcome {
    studies(&[
        ("burgers d=1", r#"{"study": "burgers"}"#),
        ("burgers d=2 N=64", r#"{"study": "burgers", "d": 2, "N": 64, "levels": 1}"#),
        ("burgers d=2 refinement to N=64", r#"{"study": "burgers", "d": 2, "N": 64, "n": 4}"#),
    ])
}

fn limit_pairing() -> Outcome {
    studies(&[("pairing", r#"{"study": "pairing"}"#)])
}

fn distributional_limit() -> Outcome {
    studies(&[("converge", r#"{"study": "converge"}"#)])
}

fn time_section() -> Outcome {
    studies(&[("section", r#"{"study": "section"}"#)])
}

fn feynman_kac() -> Outcome {
    studies(&[("fk-check", r#"{"study": "fk-check"}"#)])
}

/// Same configs, run twice and under one and four worker threads, must emit
/// identical bytes for every CSV and JSON artefact.
fn reproducibility() -> Outcome {
    let configs = [
        r#"{"study": "burgers", "N": 64, "n": 4, "T": 0.05}"#,
        r#"{"study": "noise-check", "N": 64, "ensemble": 2000}"#,
        r#"{"study": "fk-check", "N": 32, "n": 4, "num_paths": 2000}"#,
        r#"{"study": "converge", "T": 0.05}"#,
    ];
    let mut out = Outcome::default();
    let root = tempfile::tempdir().expect("temp dir");
    for (i, json) in configs.iter().enumerate() {
        let mut dirs = Vec::new();
        for (run, threads) in [(0, 1), (1, 1), (2, 4)] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool");
            let report = pool.install(|| study(json));
            let dir = root.path().join(format!("c{i}-r{run}"));
            let files = emit_reports(&report, &dir).expect("emit");
            dirs.push((dir, files));
        }
        let (base_dir, base_files) = &dirs[0];
        for (dir, files) in &dirs[1..] {
            if files.len() != base_files.len() {
                out.failures.push(format!("{json}: {} vs {} artefacts", files.len(), base_files.len()));
                continue;
            }
            for f in base_files.iter().filter(|f| !f.extension().is_some_and(|e| e == "svg")) {
                let name = f.file_name().expect("file name");
                if read(f) != read(&dir.join(name)) {
                    out.failures.push(format!("{json}: {} differs between {} and {}", name.to_string_lossy(), base_dir.display(), dir.display()));
                }
            }
        }
        out.details.push(format!("{json}: {} artefacts compared across 3 runs", base_files.len()));
    }
    out
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn criteria() -> Vec<Criterion> {
    let c = |id, title, secs, run| Criterion { id, title, budget: Duration::from_secs(secs), run };
    vec![
        c(1, "discrete duality and self-adjointness", 1, duality),
        c(2, "mollifier mass, h_n(0) and support", 5, mollifier_laws),
        c(3, "white-noise pairing and covariance laws", 60, noise_laws),
        c(4, "quadratic variation and c_n convergence", 30, quadratic_variation),
        c(5, "noiseless Cole-Hopf against the exact mode", 30, deterministic_oracle),
        c(6, "KPZ residual under coupled refinement", 120, kpz_residual),
        c(7, "weak Burgers identity, d = 1 and 2", 300, weak_identity),
        c(8, "mollified pairing tends to the white-noise pairing", 120, limit_pairing),
        c(9, "1-D distributional limit", 180, distributional_limit),
        c(10, "time section through a delta net", 60, time_section),
        c(11, "Feynman-Kac cross-validation", 300, feynman_kac),
        c(12, "byte-identical reports across runs and threads", 60, reproducibility),
    ]
}

fn main() -> ExitCode {
    // libtest-style flags (e.g. --nocapture) are accepted and ignored
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in criteria().into_iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let pass = outcome.failures.is_empty() && in_budget;
        ran += 1;
        if !pass {
            failed += 1;
        }
        println!(
            "[{:>2}/12] {} {:<52} {:>8.2}s / {}s{}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.title,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            if in_budget { "" } else { "  over budget" }
        );
        for f in &outcome.failures {
            println!("         - {f}");
        }
        if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
            for d in &outcome.details {
                println!("           {d}");
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
