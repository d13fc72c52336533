use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::baselines::{pca_fit_with, snf_fit, Reconstruct};
use crate::error::{Error, Result};
use crate::init::{init_from_kmeans, random_init, search_alpha, AlphaSearchResult};
use crate::io::{fmt_f64, load_matrix, save_matrix};
use crate::matrix::{uniform_matrix, DenseMatrix};
use crate::metrics::{nfl, nl21, LossHistory, LossRecord};
use crate::rng::{Rng, STREAM_ALPHA, STREAM_DATA, STREAM_INIT};
use crate::solver::{fit, FitReport, SolverConfig, UpdateOrder, DEFAULT_EPS_DENOMINATOR, DEFAULT_EPS_RESIDUAL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    L21Snf,
    Snf,
    Pca,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::L21Snf => "l21snf",
            Algorithm::Snf => "snf",
            Algorithm::Pca => "pca",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "l21snf" => Ok(Algorithm::L21Snf),
            "snf" => Ok(Algorithm::Snf),
            "pca" => Ok(Algorithm::Pca),
            _ => Err(format!("unknown algorithm {s:?} (expected l21snf, snf or pca)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMethod {
    Kmeans,
    Random,
}

impl FromStr for InitMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kmeans" => Ok(InitMethod::Kmeans),
            "random" => Ok(InitMethod::Random),
            _ => Err(format!("unknown init {s:?} (expected kmeans or random)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaChoice {
    Fixed(f64),
    Search,
}

impl FromStr for AlphaChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "search" {
            return Ok(AlphaChoice::Search);
        }
        match s.parse::<f64>() {
            Ok(a) if a.is_finite() && a >= 0.0 => Ok(AlphaChoice::Fixed(a)),
            _ => Err(format!("alpha must be a non-negative number or \"search\", got {s:?}")),
        }
    }
}

pub fn parse_update_order(s: &str) -> std::result::Result<UpdateOrder, String> {
    match s {
        "gauss-seidel" => Ok(UpdateOrder::GaussSeidel),
        "jacobi" => Ok(UpdateOrder::PaperJacobi),
        _ => Err(format!("unknown update order {s:?} (expected gauss-seidel or jacobi)")),
    }
}

/// Where the data matrix comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    /// Uniform entries drawn from the run's seed, exactly as `gen` writes them.
    Generate { rows: usize, cols: usize, low: f64, high: f64 },
}

impl DataSource {
    pub fn load(&self, seed: u64) -> Result<DenseMatrix> {
        match self {
            DataSource::File(path) => load_matrix(path),
            DataSource::Generate { rows, cols, low, high } => generate(*rows, *cols, *low, *high, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub algorithm: Algorithm,
    pub rank: usize,
    pub iters: usize,
    pub alpha: AlphaChoice,
    pub alpha_trials: usize,
    pub init: InitMethod,
    pub seed: u64,
    pub update_order: UpdateOrder,
    pub eps_residual: f64,
    pub eps_denominator: f64,
    /// PCA only.
    pub center: bool,
    pub data: DataSource,
    pub out_dir: PathBuf,
    /// Adds a wall-time column to summary.csv, which makes it non-reproducible.
    pub timing: bool,
}

impl ExperimentSpec {
    pub fn new(algorithm: Algorithm, rank: usize, data: DataSource, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            algorithm,
            rank,
            iters: 100,
            alpha: AlphaChoice::Fixed(0.0),
            alpha_trials: 10,
            init: InitMethod::Kmeans,
            seed: 1,
            update_order: UpdateOrder::GaussSeidel,
            eps_residual: DEFAULT_EPS_RESIDUAL,
            eps_denominator: DEFAULT_EPS_DENOMINATOR,
            center: true,
            data,
            out_dir: out_dir.into(),
            timing: false,
        }
    }

    fn check_rank(&self, x: &DenseMatrix) -> Result<()> {
        let limit = x.rows().min(x.cols());
        // PCA may keep every direction; the factorizations must compress
        let max = if self.algorithm == Algorithm::Pca { limit } else { limit.saturating_sub(1) };
        if self.rank == 0 || self.rank > max {
            return Err(Error::RankOutOfRange { rank: self.rank, max });
        }
        Ok(())
    }

    fn solver_config(&self, alpha: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.rank).with_iters(self.iters).with_alpha(alpha).with_order(self.update_order);
        cfg.eps_residual = self.eps_residual;
        cfg.eps_denominator = self.eps_denominator;
        cfg.seed = self.seed;
        cfg
    }
}

/// Final metrics of one fit, as written to summary.csv.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSummary {
    pub algorithm: Algorithm,
    pub rank: usize,
    pub iters: usize,
    pub alpha: f64,
    pub seed: u64,
    pub objective: Option<f64>,
    pub nfl: f64,
    pub nl21: f64,
    pub wall_time: Duration,
}

const SUMMARY_HEADER: &str = "algo,rank,iters,alpha,seed,objective,nfl,nl21";

impl FitSummary {
    fn csv(&self, timing: bool) -> String {
        let objective = self.objective.map(fmt_f64).unwrap_or_default();
        let mut out = format!(
            "{}{}\n{},{},{},{},{},{},{},{}",
            SUMMARY_HEADER,
            if timing { ",wall_time_s" } else { "" },
            self.algorithm,
            self.rank,
            self.iters,
            fmt_f64(self.alpha),
            self.seed,
            objective,
            fmt_f64(self.nfl),
            fmt_f64(self.nl21)
        );
        if timing {
            out.push_str(&format!(",{}", fmt_f64(self.wall_time.as_secs_f64())));
        }
        out.push('\n');
        out
    }
}

pub fn generate(rows: usize, cols: usize, low: f64, high: f64, seed: u64) -> Result<DenseMatrix> {
    uniform_matrix(rows, cols, low, high, &mut Rng::with_stream(seed, STREAM_DATA))
}

pub fn cmd_gen(rows: usize, cols: usize, low: f64, high: f64, seed: u64, out: &Path) -> Result<()> {
    let x = generate(rows, cols, low, high, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    save_matrix(&x, out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_history(history: &LossHistory, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    history.write_csv(&mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_alpha_trials(search: &AlphaSearchResult, path: &Path) -> Result<()> {
    let mut text = String::from("alpha,objective,nl21,error\n");
    for t in &search.trials {
        text.push_str(&format!("{},{},{},\n", fmt_f64(t.alpha), fmt_f64(t.objective), fmt_f64(t.nl21)));
    }
    for (alpha, msg) in &search.failures {
        text.push_str(&format!("{},,,\"{}\"\n", fmt_f64(*alpha), msg.replace('"', "'")));
    }
    write_text(path, &text)
}

/// Runs one experiment and writes its factors, loss history and summary into
/// `spec.out_dir`.
pub fn cmd_fit(spec: &ExperimentSpec) -> Result<FitSummary> {
    let x = spec.data.load(spec.seed)?;
    spec.check_rank(&x)?;
    if spec.iters == 0 && spec.algorithm != Algorithm::Pca {
        return Err(Error::InvalidConfig("iters must be at least 1".into()));
    }
    fs::create_dir_all(&spec.out_dir).map_err(|e| Error::io(&spec.out_dir, e))?;
    let dir = &spec.out_dir;
    let start = Instant::now();

    let (alpha, objective, history) = match spec.algorithm {
        Algorithm::Pca => {
            let model = pca_fit_with(&x, spec.rank, spec.center)?;
            let xhat = model.reconstruct();
            let mut history = LossHistory::new();
            history.push(LossRecord {
                iter: 0,
                objective: None,
                nfl: nfl(&x, &xhat)?,
                nl21: nl21(&x, &xhat)?,
            });
            save_matrix(&model.basis, &dir.join("basis.csv"))?;
            save_matrix(&model.scores, &dir.join("scores.csv"))?;
            save_matrix(&DenseMatrix::new(model.mean.len(), 1, model.mean)?, &dir.join("mean.csv"))?;
            (0.0, None, history)
        }
        Algorithm::L21Snf | Algorithm::Snf => {
            let mut init_rng = Rng::with_stream(spec.seed, STREAM_INIT);
            let init = match spec.init {
                InitMethod::Kmeans => init_from_kmeans(&x, spec.rank, &mut init_rng)?,
                InitMethod::Random => random_init(&x, spec.rank, &mut init_rng)?,
            };
            let (alpha, report): (f64, FitReport) = match (spec.algorithm, spec.alpha) {
                (Algorithm::Snf, _) => (0.0, snf_fit(&x, &spec.solver_config(0.0), init)?),
                (_, AlphaChoice::Fixed(a)) => (a, fit(&x, &spec.solver_config(a), init)?),
                (_, AlphaChoice::Search) => {
                    let mut rng = Rng::with_stream(spec.seed, STREAM_ALPHA);
                    let search = search_alpha(&x, &spec.solver_config(0.0), &init, spec.alpha_trials, &mut rng)?;
                    write_alpha_trials(&search, &dir.join("alpha_trials.csv"))?;
                    (search.best_alpha, search.best)
                }
            };
            save_matrix(&report.final_state.w, &dir.join("W.csv"))?;
            save_matrix(&report.final_state.h, &dir.join("H.csv"))?;
            let objective = report.history.last().and_then(|r| r.objective);
            (alpha, objective, report.history)
        }
    };
    write_history(&history, &dir.join("loss_history.csv"))?;

    let last = *history.last().expect("history is never empty");
    let summary = FitSummary {
        algorithm: spec.algorithm,
        rank: spec.rank,
        iters: last.iter,
        alpha,
        seed: spec.seed,
        objective,
        nfl: last.nfl,
        nl21: last.nl21,
        wall_time: start.elapsed(),
    };
    write_text(&dir.join("summary.csv"), &summary.csv(spec.timing))?;
    Ok(summary)
}

#[derive(Debug)]
pub struct SweepCell {
    pub rank: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub outcome: Result<FitSummary>,
}

pub fn cell_dir(out_dir: &Path, rank: usize, algorithm: Algorithm, seed: u64) -> PathBuf {
    out_dir.join(format!("rank{rank}_{algorithm}_seed{seed}"))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn best(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// One row per rank; for each algorithm the mean and best (smallest) NFL and
/// NL21 over the successful seeds. Cells with no successful run are empty.
pub fn table1_csv(ranks: &[usize], algorithms: &[Algorithm], cells: &[SweepCell]) -> String {
    let mut header = vec!["rank".to_string()];
    for a in algorithms {
        for col in ["nfl_mean", "nfl_best", "nl21_mean", "nl21_best", "runs"] {
            header.push(format!("{a}_{col}"));
        }
    }
    let mut out = header.join(",") + "\n";
    for &rank in ranks {
        let mut row = vec![rank.to_string()];
        for &a in algorithms {
            let ok: Vec<&FitSummary> = cells
                .iter()
                .filter(|c| c.rank == rank && c.algorithm == a)
                .filter_map(|c| c.outcome.as_ref().ok())
                .collect();
            if ok.is_empty() {
                row.extend(["", "", "", ""].map(String::from));
            } else {
                let f: Vec<f64> = ok.iter().map(|s| s.nfl).collect();
                let l: Vec<f64> = ok.iter().map(|s| s.nl21).collect();
                row.extend([mean(&f), best(&f), mean(&l), best(&l)].map(fmt_f64));
            }
            row.push(ok.len().to_string());
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Fits every (rank, algorithm, seed) cell of the grid, each into its own
/// subdirectory, then writes table1.csv and failures.csv. A failing cell is
/// recorded and does not stop the others.
pub fn cmd_sweep(base: &ExperimentSpec, ranks: &[usize], algorithms: &[Algorithm], seeds: &[u64]) -> Result<Vec<SweepCell>> {
    if ranks.is_empty() || algorithms.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one rank, algorithm and seed".into()));
    }
    fs::create_dir_all(&base.out_dir).map_err(|e| Error::io(&base.out_dir, e))?;
    let grid: Vec<(usize, Algorithm, u64)> = ranks
        .iter()
        .flat_map(|&r| algorithms.iter().flat_map(move |&a| seeds.iter().map(move |&s| (r, a, s))))
        .collect();

    let cells: Vec<SweepCell> = grid
        .par_iter()
        .map(|&(rank, algorithm, seed)| {
            let spec = ExperimentSpec {
                algorithm,
                rank,
                seed,
                out_dir: cell_dir(&base.out_dir, rank, algorithm, seed),
                ..base.clone()
            };
            SweepCell {
                rank,
                algorithm,
                seed,
                outcome: cmd_fit(&spec),
            }
        })
        .collect();

    write_text(&base.out_dir.join("table1.csv"), &table1_csv(ranks, algorithms, &cells))?;
    let mut failures = String::from("rank,algo,seed,error\n");
    for c in &cells {
        if let Err(e) = &c.outcome {
            let msg = e.to_string().replace('"', "'");
            failures.push_str(&format!("{},{},{},\"{msg}\"\n", c.rank, c.algorithm, c.seed));
        }
    }
    write_text(&base.out_dir.join("failures.csv"), &failures)?;
    Ok(cells)
}
