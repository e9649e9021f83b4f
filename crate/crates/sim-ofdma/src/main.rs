use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sim_ofdma::experiments::{run_ber, run_nmse, run_single, run_sumrate, write_single, write_sweep};
use sim_ofdma::settings::{ExperimentConfig, Inner, Overrides, Profile, Scheme};
use sim_ofdma::{oracles, RunError};

#[derive(Parser, Debug)]
#[command(version, about = "Stacked-metasurface OFDMA experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// TOML config file with dotted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; run r uses a seed derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parameter profile: paper or desk.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Comma-separated schemes (joint, greedy, random, sim-sdma, sim-ofdma, digital-zf).
    #[arg(long, global = true, value_delimiter = ',')]
    scheme: Option<Vec<String>>,
    /// Per-layer phase solver: cd or pccp.
    #[arg(long, global = true)]
    inner: Option<String>,
    /// Assignment step of the `single` verb: milp, random, greedy, ofdma, sdma.
    #[arg(long, global = true)]
    zstep: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Verb {
    /// Fitting NMSE versus subcarriers per user.
    Nmse,
    /// BER versus transmit power.
    Ber,
    /// Sum rate versus subcarriers per user.
    Sumrate,
    /// One optimization with trace, heatmap and metrics.
    Single,
    /// Runs the built-in oracle checks.
    Selftest,
}

fn overrides(cli: &Cli) -> Result<Overrides, RunError> {
    Ok(Overrides {
        profile: cli.profile.as_deref().map(str::parse::<Profile>).transpose()?,
        seed: cli.seed,
        schemes: cli
            .scheme
            .as_ref()
            .map(|l| l.iter().map(|s| s.parse::<Scheme>()).collect())
            .transpose()?,
        inner: cli.inner.as_deref().map(str::parse::<Inner>).transpose()?,
        zstep: cli.zstep.clone(),
    })
}

fn run(cli: &Cli) -> Result<(), RunError> {
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides(cli)?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| RunError::Config(e.to_string()))?;
    pool.install(|| match cli.verb {
        Verb::Nmse => write_sweep(&cli.out, "nmse", &cfg, &run_nmse(&cfg)?),
        Verb::Ber => write_sweep(&cli.out, "ber", &cfg, &run_ber(&cfg)?),
        Verb::Sumrate => write_sweep(&cli.out, "sumrate", &cfg, &run_sumrate(&cfg)?),
        Verb::Single => {
            let r = run_single(&cfg)?;
            write_single(&cli.out, &cfg, &r)?;
            println!(
                "{} seed {}: nmse {:.6}, ber {:.6}, sum rate {:.4} bit/s/Hz",
                r.record.scheme, r.seed, r.record.nmse, r.record.ber, r.record.sum_rate
            );
            Ok(())
        }
        Verb::Selftest => {
            let checks = oracles::all();
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(RunError::Solver(sim_ofdma_core::Error::Invariant("oracle check failed".into())))
            }
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
