//! Command-line front end.
//!
//! ```text
//! active-knn run <config-file> --out <dir> [--threads N] [--suite <name>]
//! ```
//!
//! Exit codes: 0 = all suites ran (and gates passed, when enabled);
//! 2 = acceptance gates failed; 1 = configuration or runtime error.

use active_knn_harness::{evaluate_gates, parse_config_str, run_suite};
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
active-knn - seeded experiment suites for active nearest-neighbor training

USAGE:
  active-knn run <config-file> --out <dir> [--threads N] [--suite <name>]

OPTIONS:
  --out <dir>      output directory (trials.csv, summary.json, provenance.json)
  --threads <N>    worker pool size (overrides the config; 0 = auto)
  --suite <name>   run a single suite (overrides the config's suite list)
";

struct Args {
    config_path: PathBuf,
    out_dir: PathBuf,
    threads: Option<usize>,
    suite: Option<String>,
}

fn parse_args(argv: &[String]) -> Result<Args, String> {
    if argv.is_empty() || argv[0] != "run" {
        return Err("expected the `run` subcommand".into());
    }
    let mut config_path: Option<PathBuf> = None;
    let mut out_dir: Option<PathBuf> = None;
    let mut threads = None;
    let mut suite = None;
    let mut it = argv[1..].iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--out" => {
                out_dir = Some(PathBuf::from(
                    it.next().ok_or("--out needs a directory")?,
                ))
            }
            "--threads" => {
                threads = Some(
                    it.next()
                        .ok_or("--threads needs a number")?
                        .parse::<usize>()
                        .map_err(|_| "--threads needs a number".to_string())?,
                )
            }
            "--suite" => suite = Some(it.next().ok_or("--suite needs a name")?.clone()),
            other if !other.starts_with("--") && config_path.is_none() => {
                config_path = Some(PathBuf::from(other))
            }
            other => return Err(format!("unexpected argument {other:?}")),
        }
    }
    Ok(Args {
        config_path: config_path.ok_or("missing config file")?,
        out_dir: out_dir.ok_or("missing --out <dir>")?,
        threads,
        suite,
    })
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let args = match parse_args(&argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}\n\n{USAGE}");
            return ExitCode::from(1);
        }
    };
    let text = match std::fs::read_to_string(&args.config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config_path.display());
            return ExitCode::from(1);
        }
    };
    let mut config = match parse_config_str(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config_path.display());
            return ExitCode::from(1);
        }
    };
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    if let Some(suite) = args.suite {
        config.suites = vec![suite];
    }

    let bundle = match run_suite(&config) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = bundle.emit(&args.out_dir) {
        eprintln!("error: writing {}: {e}", args.out_dir.display());
        return ExitCode::from(1);
    }
    let skipped = bundle
        .rows
        .iter()
        .filter(|r| !r.skip_reason.is_empty())
        .count();
    println!(
        "{}: {} rows ({} skipped) -> {}",
        config.name,
        bundle.rows.len(),
        skipped,
        args.out_dir.display()
    );

    if config.assert_gates {
        let gates = evaluate_gates(&config, &bundle);
        let mut failed = 0;
        for gate in &gates {
            println!(
                "[{}] {}: {}",
                if gate.passed { "PASS" } else { "FAIL" },
                gate.name,
                gate.detail
            );
            if !gate.passed {
                failed += 1;
            }
        }
        if failed > 0 {
            eprintln!("{failed} gate(s) failed");
            return ExitCode::from(2);
        }
    }
    ExitCode::from(0)
}
