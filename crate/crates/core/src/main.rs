use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use l21snf::harness::config::expand_config_args;
use l21snf::harness::experiment::{parse_update_order, SweepCell};
use l21snf::harness::{
    cmd_fit, cmd_gen, cmd_images_pack, cmd_images_unpack, cmd_sweep, exit_code, AlphaChoice, Algorithm, DataSource,
    ExperimentSpec, InitMethod, EXIT_USAGE,
};
use l21snf::solver::{UpdateOrder, DEFAULT_EPS_DENOMINATOR, DEFAULT_EPS_RESIDUAL};
use l21snf::Error;

/// Robust low-rank compression with L2,1 semi-nonnegative factorization
#[derive(Parser, Debug)]
#[command(name = "l21snf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a uniform random matrix as CSV
    Gen(GenArgs),
    /// Fit one model and write factors, loss history and summary
    Fit(FitArgs),
    /// Fit a grid of ranks, algorithms and seeds and tabulate the results
    Sweep(SweepArgs),
    /// Convert between PGM image batches and matrices
    #[command(subcommand)]
    Images(ImagesCommand),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct GenArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = -20.0, allow_negative_numbers = true)]
    low: f64,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    high: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

/// Settings shared by `fit` and `sweep`.
#[derive(Args, Debug)]
struct RunArgs {
    /// Input matrix CSV; when absent a uniform matrix is generated from the seed
    #[arg(long)]
    x: Option<PathBuf>,
    #[arg(long, default_value_t = 10000)]
    rows: usize,
    #[arg(long, default_value_t = 128)]
    cols: usize,
    #[arg(long, default_value_t = -20.0, allow_negative_numbers = true)]
    low: f64,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    high: f64,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Ridge weight on W, or "search" for random search on [0, 1)
    #[arg(long, default_value = "0")]
    alpha: AlphaChoice,
    #[arg(long, default_value_t = 10)]
    alpha_trials: usize,
    /// kmeans or random
    #[arg(long, default_value = "kmeans")]
    init: InitMethod,
    /// gauss-seidel or jacobi
    #[arg(long, default_value = "gauss-seidel", value_parser = parse_update_order)]
    update_order: UpdateOrder,
    #[arg(long, default_value_t = DEFAULT_EPS_RESIDUAL)]
    eps_residual: f64,
    #[arg(long, default_value_t = DEFAULT_EPS_DENOMINATOR)]
    eps_denominator: f64,
    /// Skip mean-centering in PCA
    #[arg(long)]
    no_center: bool,
    /// Add a wall-time column to summary.csv (output is then not reproducible)
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct FitArgs {
    /// l21snf, snf or pca
    #[arg(long, default_value = "l21snf")]
    algo: Algorithm,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "64,32,16,8")]
    ranks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "l21snf,snf")]
    algos: Vec<Algorithm>,
    /// Seeds to repeat every cell with; defaults to five consecutive seeds from --seed
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum ImagesCommand {
    /// Flatten a directory of PGM images into the columns of a matrix
    Pack(PackArgs),
    /// Write the columns of a matrix back out as PGM images
    Unpack(UnpackArgs),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct PackArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    meta: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct UnpackArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    meta: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

fn spec_from(run: &RunArgs, algorithm: Algorithm, rank: usize, seed: u64) -> ExperimentSpec {
    let data = match &run.x {
        Some(path) => DataSource::File(path.clone()),
        None => DataSource::Generate {
            rows: run.rows,
            cols: run.cols,
            low: run.low,
            high: run.high,
        },
    };
    let mut spec = ExperimentSpec::new(algorithm, rank, data, run.out_dir.clone());
    spec.iters = run.iters;
    spec.alpha = run.alpha;
    spec.alpha_trials = run.alpha_trials;
    spec.init = run.init;
    spec.seed = seed;
    spec.update_order = run.update_order;
    spec.eps_residual = run.eps_residual;
    spec.eps_denominator = run.eps_denominator;
    spec.center = !run.no_center;
    spec.timing = run.timing;
    spec
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Gen(a) => cmd_gen(a.rows, a.cols, a.low, a.high, a.seed, &a.out),
        Command::Fit(a) => {
            let s = cmd_fit(&spec_from(&a.run, a.algo, a.rank, a.seed))?;
            println!("{} rank {} alpha {} nfl {} nl21 {}", s.algorithm, s.rank, s.alpha, s.nfl, s.nl21);
            eprintln!("wall time {:.3}s", s.wall_time.as_secs_f64());
            Ok(())
        }
        Command::Sweep(a) => {
            let seeds = a.seeds.clone().unwrap_or_else(|| (a.seed..a.seed + 5).collect());
            let base = spec_from(&a.run, a.algos[0], a.ranks[0], a.seed);
            let cells = cmd_sweep(&base, &a.ranks, &a.algos, &seeds)?;
            report_sweep(cells)
        }
        Command::Images(ImagesCommand::Pack(a)) => {
            let meta = cmd_images_pack(&a.dir, &a.out, &a.meta)?;
            println!("packed {} images of {}x{}", meta.count, meta.width, meta.height);
            Ok(())
        }
        Command::Images(ImagesCommand::Unpack(a)) => {
            let written = cmd_images_unpack(&a.x, &a.meta, &a.out_dir)?;
            println!("wrote {} images", written.len());
            Ok(())
        }
    }
}

fn report_sweep(cells: Vec<SweepCell>) -> Result<(), Error> {
    let total = cells.len();
    let mut failures = Vec::new();
    for c in cells {
        if let Err(e) = c.outcome {
            eprintln!("rank {} {} seed {} failed: {e}", c.rank, c.algorithm, c.seed);
            failures.push(e);
        }
    }
    println!("{} of {total} runs succeeded", total - failures.len());
    match failures.pop() {
        Some(e) if failures.len() + 1 == total => Err(e),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let argv = match expand_config_args(std::env::args().collect()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
