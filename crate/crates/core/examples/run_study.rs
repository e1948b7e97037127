//! Runs a study from an inline JSON config and writes its reports, the same
//! path the `burgerslab` binary takes.
//!
//! cargo run --release --example run_study -- [study] [out-dir]

use burgerslab::harness::{emit_reports, run_study, ExperimentConfig};

fn main() -> burgerslab::Result<()> {
    let mut args = std::env::args().skip(1);
    let study = args.next().unwrap_or_else(|| "burgers".into());
    let out = args.next().unwrap_or_else(|| format!("burgerslab-out/example-{study}"));
    let config = ExperimentConfig::from_json(&format!(r#"{{"study": "{study}", "T": 0.05}}"#))?;
    let report = run_study(&config)?;
    for c in &report.results {
        println!("{:<4} {:<40} {:.4e}", if c.pass { "ok" } else { "FAIL" }, c.name, c.value);
    }
    for path in emit_reports(&report, out.as_ref())? {
        println!("wrote {}", path.display());
    }
    println!("{study}: {}", if report.pass { "pass" } else { "FAIL" });
    Ok(())
}
