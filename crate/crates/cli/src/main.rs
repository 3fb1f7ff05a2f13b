use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use covloc_cli::commands::{
    load_config, models_table, output_dir, run_config, run_localize, run_simulate, run_single,
    BandwidthRule, LocalizeRequest, DEFAULT_OUT,
};
use covloc_cli::{run_figure, CliError, CliResult, OutputKind, ScaleTable};

#[derive(Parser)]
#[command(
    name = "covloc",
    version,
    about = "Covariance decay experiments on stochastic lattice SDEs"
)]
struct Cli {
    /// Worker threads for ensemble simulation (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG previews.
    #[arg(long)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble and write it as CSV and CVL1 binary.
    Simulate(ConfigArgs),
    /// Covariance curve cov(x_1, x_(1+k)) from Monte Carlo and spatial averaging.
    Cov(ConfigArgs),
    /// Covariance bounds (i, j, beta, local, global, total).
    Bounds(ConfigArgs),
    /// Every product listed in the config's `outputs`.
    Run(ConfigArgs),
    /// Truncate a covariance matrix to a bandwidth.
    Localize(LocalizeArgs),
    /// Regenerate the data behind one figure.
    Figure {
        /// F1 ... F12
        id: String,
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
    /// Model presets.
    Models {
        #[arg(long)]
        list: bool,
    },
}

#[derive(Args)]
struct LocalizeArgs {
    /// `.cvl` binary or `row,col,value` CSV.
    #[arg(long)]
    input: PathBuf,
    /// Block dimension of a CSV input.
    #[arg(long, default_value_t = 1)]
    block_dim: usize,
    #[arg(long, conflicts_with_all = ["epsilon", "coefficient"])]
    bandwidth: Option<usize>,
    /// Target error for a bandwidth chosen from the decay bound.
    #[arg(long, requires = "coefficient")]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    /// Local decay coefficient of the bound.
    #[arg(long, requires = "epsilon")]
    coefficient: Option<f64>,
    /// Exact covariance for measuring the error.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config_run(
    args: &ConfigArgs,
    f: impl FnOnce(&covloc_cli::ResolvedConfig, &Path, bool) -> CliResult<Vec<String>>,
) -> CliResult<Vec<String>> {
    let cfg = load_config(&args.config, args.seed)?;
    let raw = covloc_cli::ExperimentConfig::load(&args.config)?;
    let dir = output_dir(args.out.as_deref(), raw.output_dir.as_deref());
    f(&cfg, &dir, args.svg)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let files = match cli.command {
        Command::Simulate(a) => config_run(&a, |c, d, _| run_simulate(c, d))?,
        Command::Cov(a) => config_run(&a, |c, d, s| {
            run_single(c, OutputKind::CovCurve, "cov", d, s)
        })?,
        Command::Bounds(a) => config_run(&a, |c, d, s| {
            run_single(c, OutputKind::BoundsOverlay, "bounds", d, s)
        })?,
        Command::Run(a) => config_run(&a, run_config)?,
        Command::Localize(a) => {
            let rule = match (a.bandwidth, a.epsilon, a.coefficient) {
                (Some(bandwidth), _, _) => BandwidthRule::Fixed { bandwidth },
                (None, Some(epsilon), Some(coefficient)) => BandwidthRule::FromBound {
                    epsilon,
                    beta: a.beta,
                    coefficient,
                },
                _ => {
                    return Err(CliError::Config(
                        "localize needs --bandwidth or both --epsilon and --coefficient".into(),
                    ))
                }
            };
            let req = LocalizeRequest {
                input: a.input,
                block_dim: a.block_dim,
                rule,
                reference: a.reference,
            };
            run_localize(&req, &a.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)))?
        }
        Command::Figure {
            id,
            scale,
            seed,
            out,
            svg,
        } => {
            let table = ScaleTable::named(&scale)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT).join(id.to_uppercase()));
            run_figure(&id, &table, seed, &dir, svg)?
        }
        Command::Models { list: _ } => {
            let bytes = models_table().to_csv_bytes()?;
            print!("{}", String::from_utf8_lossy(&bytes));
            return Ok(());
        }
    };
    for f in files {
        println!("{f}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({
                "error": e.kind(),
                "exit_code": e.exit_code(),
                "message": e.to_string(),
            });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
