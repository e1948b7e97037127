use std::path::PathBuf;
use std::process::ExitCode;

use burgerslab::harness::{emit_reports, run_study, ExperimentConfig, StudyKind};
use clap::Parser;

/// Runs one numerical study of the stochastic Burgers / Cole-Hopf laboratory.
///
/// Exit status is 0 when every declared tolerance passes, 1 when a check
/// fails and 2 on configuration or I/O errors.
#[derive(Parser, Debug)]
#[command(name = "burgerslab", version)]
struct Cli {
    /// Study to run; see --list-studies.
    #[arg(required_unless_present = "list_studies")]
    study: Option<String>,

    /// JSON configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory; falls back to the config's `out_dir`, then `burgerslab-out/<study>`.
    #[arg(long, env = "BURGERSLAB_OUT")]
    out: Option<PathBuf>,

    /// Prints the available studies and exits.
    #[arg(long)]
    list_studies: bool,
}

fn run(cli: Cli) -> burgerslab::Result<bool> {
    let study: StudyKind = cli.study.as_deref().unwrap_or_default().parse()?;
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.study = Some(study);
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli
        .out
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("burgerslab-out").join(study.as_str()));

    let report = run_study(&config)?;
    for c in &report.results {
        println!("{} {} = {:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value);
    }
    for o in report.orders.iter() {
        if let Some(p) = o.order {
            println!("order {} = {p:.3}", o.name);
        }
    }
    let files = emit_reports(&report, &out)?;
    println!(
        "{study}: {} in {:.2}s, {} file(s) in {}",
        if report.pass { "pass" } else { "FAIL" },
        report.wall_clock.as_secs_f64(),
        files.len(),
        out.display()
    );
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_studies {
        for k in StudyKind::ALL {
            println!("{:<12} {}", k.as_str(), k.description());
        }
        return ExitCode::SUCCESS;
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
