use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rhm_cli::experiment::resolve_out_dir;
use rhm_cli::{parse_config, run_experiment, verify_golden, CliError, Experiment};
use rhm_core::Method;

#[derive(Parser)]
#[command(name = "rhm", version, about = "Riemannian Hamiltonian min-max experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write traces plus summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides RHM_OUT and the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the solvers concurrently.
        #[arg(long)]
        parallel: bool,
        /// Override a config key, e.g. `--set rhm_sd.eta=0.01`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Re-run an experiment and compare against golden traces.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        golden: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List experiments and solvers.
    List,
}

fn overrides(set: &[String], seed: Option<u64>) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for s in set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| rhm_cli::ConfigError::new(s.as_str(), "override must be KEY=VALUE"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = seed {
        out.push(("seed".into(), seed.to_string()));
    }
    Ok(out)
}

fn real_main(cli: Cli) -> Result<bool, CliError> {
    // Write errors (e.g. a closed pipe) are ignored; the exit code still reports the run.
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Run { config, seed, out, parallel, set } => {
            let cfg = parse_config(&config, &overrides(&set, seed)?)?;
            let dir = resolve_out_dir(out, &cfg);
            let summary = run_experiment(&cfg, &dir, parallel)?;
            for s in &summary.solvers {
                let grad = s.final_grad_norm.map_or("-".into(), |g| format!("{g:.3e}"));
                let _ = write!(stdout, "{:<9} {:<18} {:>6} it  |grad f| {grad}", s.solver, s.status, s.iterations);
                if let Some(gap) = s.final_opt_gap {
                    let _ = write!(stdout, "  gap {gap:.3e}");
                }
                if let Some(e) = &s.error {
                    let _ = write!(stdout, "  ({e})");
                }
                let _ = writeln!(stdout);
            }
            let _ = writeln!(stdout, "wrote {}", dir.display());
            Ok(summary.all_ok())
        }
        Command::Verify { config, golden, set } => {
            let cfg = parse_config(&config, &overrides(&set, None)?)?;
            let report = verify_golden(&cfg, &golden)?;
            for (solver, rows) in &report.matched {
                let _ = writeln!(stdout, "{solver}: {rows} rows match");
            }
            match &report.divergence {
                Some(d) => {
                    let _ = writeln!(stdout, "FAIL {d}");
                }
                None => {
                    let _ = writeln!(stdout, "PASS");
                }
            }
            Ok(report.passed())
        }
        Command::List => {
            let _ = writeln!(stdout, "experiments:");
            for e in Experiment::ALL {
                let _ = writeln!(stdout, "  {:<14} keys: {}", e.tag(), e.problem_keys().join(", "));
            }
            let _ = writeln!(stdout, "solvers:");
            for m in Method::ALL {
                let _ = writeln!(stdout, "  {m}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
