//! Command-line front end: `run --config`, `constants`, `verify`.
//!
//! Exit status: 0 when every threshold passes, 1 on a threshold failure,
//! 2 on usage or configuration errors.

pub mod config;
pub mod runner;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::acceptance;
use crate::closed_forms::{expansion_coefficients, Alpha};
use crate::error::Error;

pub use config::{parse_config, ExperimentConfig, GridConfig, HSpec, Suite};
pub use runner::{run_config, run_suite, write_reports, Check, DataTable, SuiteReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "liouville-lab", version, about = "Blowup experiments for the singular Liouville equation")]
pub struct Cli {
    /// Directory for reports (overrides the config's output_dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized sampling (overrides the config's seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the suites described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the expansion constants.
    Constants {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        v0: f64,
    },
    /// Run every acceptance check.
    Verify,
}

fn usage_error(e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {e}");
    EXIT_USAGE
}

/// Parse `args` and execute; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return usage_error("--jobs must be at least 1");
        }
        // only fails if a pool already exists, in which case it is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match cli.command {
        Command::Constants { alpha, v0 } => {
            let al = match Alpha::new(alpha) {
                Ok(a) => a,
                Err(e) => return usage_error(e),
            };
            match expansion_coefficients(al, v0) {
                Ok(c) => {
                    println!("lambda1 = {:.16e}", c.lambda1);
                    println!("lambda2 = {:.16e}", c.lambda2);
                    EXIT_PASS
                }
                Err(e) => usage_error(e),
            }
        }
        Command::Run { config } => {
            let text = match fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return usage_error(format!("{}: {e}", config.display())),
            };
            let mut cfg = match parse_config(&text) {
                Ok(c) => c,
                Err(e) => return usage_error(e),
            };
            if let Some(out) = cli.out {
                cfg.output_dir = out;
            }
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let reports = run_config(&cfg);
            for rep in &reports {
                println!("{} {}", if rep.passed { "PASS" } else { "FAIL" }, rep.suite);
                for c in &rep.checks {
                    println!(
                        "  [{}] {} = {:e} ({})",
                        if c.passed { "ok" } else { "x" },
                        c.name,
                        c.value,
                        c.threshold
                    );
                }
            }
            if let Err(e) = write_reports(&cfg.output_dir, &cfg, &reports) {
                eprintln!("error: {e}");
                return EXIT_FAIL;
            }
            if reports.iter().all(|r| r.passed) {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Command::Verify => {
            let outcomes = acceptance::run_all(cli.seed.unwrap_or(0));
            for o in &outcomes {
                println!("{}", o.line());
            }
            if let Some(dir) = cli.out {
                if let Err(e) = write_verify(&dir, &outcomes) {
                    eprintln!("error: {e}");
                    return EXIT_FAIL;
                }
            }
            if outcomes.iter().all(|o| o.passed) {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
    }
}

fn write_verify(dir: &std::path::Path, outcomes: &[acceptance::Outcome]) -> crate::Result<()> {
    fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(outcomes).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("verify.json"), text + "\n")?;
    let mut w = csv::Writer::from_path(dir.join("verify.csv"))?;
    w.write_record(["id", "name", "passed", "seconds"])?;
    for o in outcomes {
        w.write_record([o.id.to_string(), o.name.to_string(), o.passed.to_string(), format!("{:.3}", o.seconds)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_subcommand() {
        assert_eq!(run(["liouville-lab", "constants", "--alpha", "0.5", "--v0", "18"]), EXIT_PASS);
        assert_eq!(run(["liouville-lab", "constants", "--alpha", "2", "--v0", "18"]), EXIT_USAGE);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(["liouville-lab", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["liouville-lab", "run", "--config", "/nonexistent/x.toml"]), EXIT_USAGE);
    }

    #[test]
    fn run_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        fs::write(&cfg, "suite = \"constants\"\nalpha = 0.5\nv0 = 18\n").unwrap();
        let out = dir.path().join("out");
        let code = run([
            "liouville-lab",
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_PASS);
        let csv = fs::read_to_string(out.join("constants.csv")).unwrap();
        assert!(csv.starts_with("alpha,v0,lambda1,lambda2\n"));
        assert!(out.join("constants.json").exists());
    }
}
