//! Experiment runner for the OU score-sampler laboratory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure,
//! 4 verification failure.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use sgmlab::error::Error;

#[derive(Parser)]
#[command(
    name = "sgmlab",
    about = "OU score-based sampler, explicit W2 bound constants, and numerical verification",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (speed only, never results). 0 = rayon default.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print every derived constant and the W2 bound for a configuration.
    Constants {
        #[arg(long)]
        config: PathBuf,
        /// Emit a single CSV row instead of the key=value block.
        #[arg(long)]
        csv: bool,
    },
    /// Run the generative scheme and write endpoint samples.
    Sample {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the synchronously coupled processes and write per-step distances.
    Coupling {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the numerical verification suite.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// W2 distance between two sample CSVs.
    W2 {
        a: PathBuf,
        b: PathBuf,
        /// exact | sliced | exact-1d
        #[arg(long, default_value = "exact")]
        method: String,
        #[arg(long, default_value_t = 256)]
        nproj: usize,
    },
    /// Bound vs empirical W2 over the configured (h, T, eps) grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot build thread pool: {e}");
            std::process::exit(2);
        }
    };
    let code = pool.install(|| dispatch(&cli));
    std::process::exit(code);
}

fn dispatch(cli: &Cli) -> i32 {
    let result: Result<i32, Error> = (|| match &cli.cmd {
        Cmd::Constants { config, csv } => {
            let exp = config::resolve(config, cli.seed)?;
            print!("{}", commands::cmd_constants(&exp, *csv)?);
            Ok(0)
        }
        Cmd::Sample { config } => {
            let exp = config::resolve(config, cli.seed)?;
            let path = commands::cmd_sample(&exp, cli.out.as_deref())?;
            eprintln!("wrote {}", path.display());
            Ok(0)
        }
        Cmd::Coupling { config } => {
            let exp = config::resolve(config, cli.seed)?;
            let path = commands::cmd_coupling(&exp, cli.out.as_deref())?;
            eprintln!("wrote {}", path.display());
            Ok(0)
        }
        Cmd::Verify { config } => {
            let exp = config::resolve(config, cli.seed)?;
            let (reports, path) = commands::cmd_verify(&exp, cli.out.as_deref())?;
            for r in &reports {
                println!("{}", r.to_csv_row());
            }
            eprintln!("wrote {}", path.display());
            if reports.iter().all(|r| r.pass) {
                Ok(0)
            } else {
                Ok(4)
            }
        }
        Cmd::W2 {
            a,
            b,
            method,
            nproj,
        } => {
            print!(
                "{}",
                commands::cmd_w2(a, b, method, *nproj, cli.seed.unwrap_or(0))?
            );
            Ok(0)
        }
        Cmd::Sweep { config } => {
            let exp = config::resolve(config, cli.seed)?;
            let path = commands::cmd_sweep(&exp, cli.out.as_deref())?;
            eprintln!("wrote {}", path.display());
            Ok(0)
        }
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric { .. } => 3,
                _ => 2,
            }
        }
    }
}
