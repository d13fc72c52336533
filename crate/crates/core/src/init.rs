//! Starting points for the factorization and random search over `alpha`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{uniform_matrix, DenseMatrix};
use crate::rng::Rng;
use crate::solver::{fit, FactorizationState, FitReport, SolverConfig};

/// Lloyd iterations used by [`init_from_kmeans`].
pub const KMEANS_INIT_ITERS: usize = 5;
/// `H(0)` entry for a column's own cluster.
pub const H_MEMBER: f64 = 1.2;
/// `H(0)` entry for every other cluster.
pub const H_OTHER: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct KmeansResult {
    /// m×k, one centroid per column.
    pub centroids: DenseMatrix,
    /// Cluster index of every column of the data.
    pub assignment: Vec<usize>,
}

fn sq_dist_to_centroid(x: &DenseMatrix, col: usize, centroids: &DenseMatrix, c: usize) -> f64 {
    (0..x.rows())
        .map(|i| {
            let e = x[(i, col)] - centroids[(i, c)];
            e * e
        })
        .sum()
}

fn nearest(x: &DenseMatrix, centroids: &DenseMatrix) -> Vec<usize> {
    let (m, n) = x.shape();
    let k = centroids.cols();
    // accumulate over rows so both matrices are walked contiguously
    let mut dist = vec![0.0; n * k];
    for i in 0..m {
        let xr = x.row(i);
        let cr = centroids.row(i);
        for (j, xv) in xr.iter().enumerate() {
            let out = &mut dist[j * k..(j + 1) * k];
            for (o, cv) in out.iter_mut().zip(cr) {
                let e = xv - cv;
                *o += e * e;
            }
        }
    }
    dist.chunks(k)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (c, &d)| if d < best.1 { (c, d) } else { best })
                .0
        })
        .collect()
}

/// Sum of squared distances from every column to its assigned centroid.
pub fn distortion(x: &DenseMatrix, result: &KmeansResult) -> f64 {
    result
        .assignment
        .iter()
        .enumerate()
        .map(|(j, &c)| sq_dist_to_centroid(x, j, &result.centroids, c))
        .sum()
}

/// Lloyd's algorithm on the columns of `x`.
///
/// Centroids start at `k` distinct random columns. Each iteration recomputes
/// centroids as cluster means and then reassigns every column to its nearest
/// centroid. A cluster left empty is re-seeded at the column currently
/// farthest from its own centroid.
pub fn kmeans(x: &DenseMatrix, k: usize, iters: usize, rng: &mut Rng) -> Result<KmeansResult> {
    let (m, n) = x.shape();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k-means needs 1 <= k <= {n} columns, got k = {k}")));
    }
    let seeds = rng.sample_distinct(n, k);
    let mut centroids = DenseMatrix::from_fn(m, k, |i, c| x[(i, seeds[c])]);
    let mut assignment = nearest(x, &centroids);

    for _ in 0..iters {
        let mut sums = DenseMatrix::zeros(m, k);
        let mut counts = vec![0usize; k];
        for i in 0..m {
            let xr = x.row(i);
            let sr = sums.row_mut(i);
            for (j, &c) in assignment.iter().enumerate() {
                sr[c] += xr[j];
            }
        }
        for &c in &assignment {
            counts[c] += 1;
        }
        for i in 0..m {
            for c in 0..k {
                if counts[c] > 0 {
                    centroids[(i, c)] = sums[(i, c)] / counts[c] as f64;
                }
            }
        }

        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empty.is_empty() {
            let mut far: Vec<(usize, f64)> = assignment
                .iter()
                .enumerate()
                .map(|(j, &c)| (j, sq_dist_to_centroid(x, j, &centroids, c)))
                .collect();
            far.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (c, (j, _)) in empty.into_iter().zip(far) {
                centroids.set_column(c, &x.column(j));
            }
        }
        assignment = nearest(x, &centroids);
    }
    Ok(KmeansResult { centroids, assignment })
}

/// `W(0)` = k-means centroids after five Lloyd iterations; `H(0)` is 1.2 for a
/// column's own cluster and 0.2 elsewhere.
pub fn init_from_kmeans(x: &DenseMatrix, k: usize, rng: &mut Rng) -> Result<FactorizationState> {
    let km = kmeans(x, k, KMEANS_INIT_ITERS, rng)?;
    let h = DenseMatrix::from_fn(k, x.cols(), |c, j| if km.assignment[j] == c { H_MEMBER } else { H_OTHER });
    FactorizationState::new(x, km.centroids, h)
}

/// `W` uniform on `[-1, 1)`, `H` uniform on `(0.1, 1.1]`, sized for `x` at rank `k`.
pub fn random_init(x: &DenseMatrix, k: usize, rng: &mut Rng) -> Result<FactorizationState> {
    if k == 0 {
        return Err(Error::InvalidDimensions("rank 0".into()));
    }
    let (m, n) = x.shape();
    let w = uniform_matrix(m, k, -1.0, 1.0, rng)?;
    let h = uniform_matrix(k, n, 0.0, 1.0, rng)?.map(|u| 1.1 - u);
    FactorizationState::new(x, w, h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaTrial {
    pub alpha: f64,
    pub objective: f64,
    pub nl21: f64,
}

#[derive(Clone, Debug)]
pub struct AlphaSearchResult {
    pub best_alpha: f64,
    /// Successful trials in draw order.
    pub trials: Vec<AlphaTrial>,
    /// Draws whose fit failed, with the error message.
    pub failures: Vec<(f64, String)>,
    /// Full report of the winning trial.
    pub best: FitReport,
}

/// Random search for `alpha` on `[0, 1)`.
///
/// All draws are taken from `rng` up front; every trial fits from the same
/// `init`, so only `alpha` varies. The trial with the smallest final NL21
/// wins, ties going to the earliest draw. Trials run in parallel.
pub fn search_alpha(
    x: &DenseMatrix,
    template: &SolverConfig,
    init: &FactorizationState,
    trials: usize,
    rng: &mut Rng,
) -> Result<AlphaSearchResult> {
    if trials == 0 {
        return Err(Error::InvalidConfig("alpha search needs at least one trial".into()));
    }
    let alphas: Vec<f64> = (0..trials).map(|_| rng.next_f64()).collect();
    let reports: Vec<Result<FitReport>> = alphas
        .par_iter()
        .map(|&alpha| fit(x, &template.clone().with_alpha(alpha), init.clone()))
        .collect();

    let mut best: Option<(usize, FitReport)> = None;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut last_err = None;
    for (idx, (alpha, report)) in alphas.iter().zip(reports).enumerate() {
        match report {
            Ok(report) => {
                let last = report.history.last().expect("history is never empty");
                results.push(AlphaTrial {
                    alpha: *alpha,
                    objective: last.objective.expect("fit logs objectives"),
                    nl21: last.nl21,
                });
                let better = best
                    .as_ref()
                    .map_or(true, |(_, b)| last.nl21 < b.history.last().expect("non-empty").nl21);
                if better {
                    best = Some((idx, report));
                }
            }
            Err(e) => {
                failures.push((*alpha, e.to_string()));
                last_err = Some(e);
            }
        }
    }
    match best {
        Some((idx, report)) => Ok(AlphaSearchResult {
            best_alpha: alphas[idx],
            trials: results,
            failures,
            best: report,
        }),
        None => Err(Error::AllTrialsFailed(Box::new(last_err.expect("at least one trial ran")))),
    }
}
