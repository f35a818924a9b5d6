use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qwalk_cli::{run, RawConfig, Status};

/// Run a quantum-walk experiment described by a key=value config file.
#[derive(Parser, Debug)]
#[command(name = "qwalk-action", version)]
struct Args {
    /// Configuration file.
    config: PathBuf,
    /// Replace a config entry, e.g. --override steps=128. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for --override rapidity=..
    #[arg(long, allow_hyphen_values = true)]
    rapidity: Option<String>,
    /// Shorthand for --override lambda=..
    #[arg(long)]
    lambda: Option<String>,
}

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("QWALK_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("QWALK_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("QWALK_THREADS must be at least 1".into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let spec = RawConfig::parse(&text).and_then(|mut raw| {
        let sugar = [("rapidity", &args.rapidity), ("lambda", &args.lambda)];
        let extra = sugar.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| format!("{k}={v}")));
        for o in args.overrides.iter().cloned().chain(extra) {
            raw.apply_override(&o)?;
        }
        raw.validate()
    });
    let spec = match spec {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_USAGE);
        }
    };

    let report = match run(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    for c in &report.checks {
        println!("{c}");
    }
    println!(
        "{}: {} passed, {} failed, {} skipped; artifacts in {}",
        report.experiment,
        report.count(Status::Pass),
        report.count(Status::Fail),
        report.count(Status::Skip),
        spec.output_path.display()
    );
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}
