//! Comparison methods: Frobenius semi-NMF and truncated PCA.

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::solver::{fit, FactorizationState, FitReport, SolverConfig, Weighting};

/// Anything that yields an approximation of the data matrix it was fitted to.
pub trait Reconstruct {
    fn reconstruct(&self) -> DenseMatrix;
}

impl Reconstruct for FactorizationState {
    fn reconstruct(&self) -> DenseMatrix {
        FactorizationState::reconstruct(self)
    }
}

/// Semi-NMF under the squared Frobenius loss.
///
/// Runs the L2,1 update kernels with `D = I` and `alpha = 0`, which reduces
/// them to `W = XHᵀ(HHᵀ)⁻¹` and `H ← H ⊙ sqrt((Φ⁺ + Ω⁻H) / (Φ⁻ + Ω⁺H))`.
/// The logged objective is `‖X − WH‖_F²`.
pub fn snf_fit(x: &DenseMatrix, config: &SolverConfig, init: FactorizationState) -> Result<FitReport> {
    let mut cfg = config.clone();
    cfg.weighting = Weighting::Uniform;
    cfg.alpha = 0.0;
    fit(x, &cfg, init)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    /// Per-feature (row) mean over samples; all zeros for uncentered fits.
    pub mean: Vec<f64>,
    /// m×k, orthonormal columns.
    pub basis: DenseMatrix,
    /// k×n coordinates of the centered samples.
    pub scores: DenseMatrix,
    /// Singular values of the centered matrix for the kept directions, descending.
    pub singular_values: Vec<f64>,
}

impl PcaModel {
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }
}

impl Reconstruct for PcaModel {
    fn reconstruct(&self) -> DenseMatrix {
        let mut out = self.basis.matmul(&self.scores).expect("basis and scores conform");
        for (i, mu) in self.mean.iter().enumerate() {
            for v in out.row_mut(i) {
                *v += mu;
            }
        }
        out
    }
}

/// Mean-centered rank-`k` PCA. Columns of `x` are samples.
pub fn pca_fit(x: &DenseMatrix, k: usize) -> Result<PcaModel> {
    pca_fit_with(x, k, true)
}

/// Rank-`k` PCA with optional centering.
///
/// The top-k subspace is taken from a Jacobi eigendecomposition of the smaller
/// Gram matrix (`XcᵀXc` or `XcXcᵀ`), so the cost is governed by `min(m, n)`.
pub fn pca_fit_with(x: &DenseMatrix, k: usize, center: bool) -> Result<PcaModel> {
    let (m, n) = x.shape();
    let max = m.min(n);
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    let mean = if center { x.row_means() } else { vec![0.0; m] };
    let xc = DenseMatrix::from_fn(m, n, |i, j| x[(i, j)] - mean[i]);

    let (basis, singular_values) = if n <= m {
        let gram = xc.t_matmul(&xc)?;
        let (values, vectors) = symmetric_eigen(&gram);
        let v_k = DenseMatrix::from_fn(n, k, |i, j| vectors[(i, j)]);
        let sigma: Vec<f64> = values[..k].iter().map(|l| l.max(0.0).sqrt()).collect();
        (orthonormalize(&xc.matmul(&v_k)?), sigma)
    } else {
        let gram = xc.matmul_t(&xc)?;
        let (values, vectors) = symmetric_eigen(&gram);
        let u_k = DenseMatrix::from_fn(m, k, |i, j| vectors[(i, j)]);
        let sigma: Vec<f64> = values[..k].iter().map(|l| l.max(0.0).sqrt()).collect();
        (orthonormalize(&u_k), sigma)
    };
    let basis = flip_signs(basis);
    let scores = basis.t_matmul(&xc)?;
    Ok(PcaModel {
        mean,
        basis,
        scores,
        singular_values,
    })
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns eigenvalues
/// in descending order and the matching eigenvectors as columns.
fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.rows();
    let mut a = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (arp, arq) = (a[(r, p)], a[(r, q)]);
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let (apr, aqr) = (a[(p, r)], a[(q, r)]);
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
                for r in 0..n {
                    let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns that
/// vanish (rank-deficient input) are replaced by coordinate vectors so the
/// result always has orthonormal columns.
fn orthonormalize(a: &DenseMatrix) -> DenseMatrix {
    let (m, k) = a.shape();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let scale = a.max_abs().max(1.0);
    let mut next_unit = 0;
    for j in 0..k {
        let mut v = a.column(j);
        let mut norm = project_out(&mut v, &cols);
        while norm <= 1e-10 * scale * (m as f64).sqrt() {
            assert!(next_unit < m, "cannot extend basis beyond dimension {m}");
            v = vec![0.0; m];
            v[next_unit] = 1.0;
            next_unit += 1;
            norm = project_out(&mut v, &cols);
        }
        v.iter_mut().for_each(|e| *e /= norm);
        cols.push(v);
    }
    DenseMatrix::from_fn(m, k, |i, j| cols[j][i])
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(e, bi)| *e -= c * bi);
        }
    }
    dot(v, v).sqrt()
}

/// Makes the largest-magnitude entry of every column positive.
fn flip_signs(mut u: DenseMatrix) -> DenseMatrix {
    for j in 0..u.cols() {
        let col = u.column(j);
        let pivot = col.iter().copied().fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            let flipped: Vec<f64> = col.iter().map(|v| -v).collect();
            u.set_column(j, &flipped);
        }
    }
    u
}
