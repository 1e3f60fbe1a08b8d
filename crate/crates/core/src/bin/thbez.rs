use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use thbez::io::{cmd_export, cmd_run, exit_code, summary_table, ExportKind};
use thbez::verify::{run_battery, VerifyOptions};

/// Adaptive THB-spline solver for 2D Poisson and magnetostatic problems.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive loop described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (default: `<config stem>_run` next to the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in verification battery.
    Verify {
        /// Corrupt one element extraction operator before the assembly check.
        #[arg(long)]
        inject_fault: bool,
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
    },
    /// Rewrite the final fields or mesh of a finished run.
    Export {
        #[arg(long, value_enum)]
        what: What,
        #[arg(long)]
        from: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Fields,
    Mesh,
}

fn configure_threads() {
    if let Ok(v) = std::env::var("THBEZ_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    log::warn!("THBEZ_THREADS: {e}");
                }
            }
            _ => log::warn!("THBEZ_THREADS = {v:?} is not a positive integer, ignored"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads();
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out.as_deref()).map(|o| {
            print!("{}", summary_table(&o.run));
            println!("partition of unity deviation: {:.3e}", o.partition_of_unity);
            println!("output written to {}", o.directory.display());
        }),
        Command::Verify { inject_fault, seed } => {
            let results = run_battery(VerifyOptions { seed, inject_fault });
            for r in &results {
                println!("{r}");
            }
            let failed: Vec<&str> = results
                .iter()
                .filter(|r| !r.passed)
                .map(|r| r.name)
                .collect();
            if failed.is_empty() {
                println!("all {} checks passed", results.len());
                return ExitCode::SUCCESS;
            }
            eprintln!("failed: {}", failed.join(", "));
            return ExitCode::from(1);
        }
        Command::Export { what, from } => {
            let kind = match what {
                What::Fields => ExportKind::Fields,
                What::Mesh => ExportKind::Mesh,
            };
            cmd_export(kind, &from).map(|p| println!("wrote {}", p.display()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
