//! Regularized L2,1 semi-nonnegative matrix factorization.
//!
//! Minimizes `‖X − WH‖_{2,1} + (α/2)‖W‖_F²` over mixed-sign `W` (m×k) and
//! nonnegative `H` (k×n) by alternating two half-steps, each with the
//! reweighting diagonal `D = diag(1/‖x_j − W h_j‖₂)` held fixed:
//!
//! * `H ← H ⊙ sqrt((Φ⁺D + Ω⁻HD) / (Φ⁻D + Ω⁺HD))` with `Φ = WᵀX`, `Ω = WᵀW`
//!   split into positive and negative parts,
//! * `W ← XDHᵀ (αI + HDHᵀ)⁻¹`, computed as an SPD solve.
//!
//! Both half-steps decrease the objective when `D` is computed from the
//! current factors, which is what [`UpdateOrder::GaussSeidel`] does.

pub mod diagnostics;

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, l21_norm, solve_spd, split_pos_neg, DenseMatrix, DiagWeights};
use crate::metrics::{nfl, nl21, LossHistory, LossRecord};

pub use diagnostics::{auxiliary_value, kkt_residual, proxy_gradient_w, proxy_loss, truncated_proxy_loss};

pub const DEFAULT_EPS_RESIDUAL: f64 = 1e-8;
pub const DEFAULT_EPS_DENOMINATOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpdateOrder {
    /// Refresh `D`, update `H`, refresh `D` against the new `H`, update `W`.
    GaussSeidel,
    /// One `D` per iteration; both updates read the iteration-entry `H` and `D`.
    PaperJacobi,
}

/// How the column weights `D` are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Weighting {
    /// `D_jj = 1 / max(‖residual_j‖, eps_residual)`.
    L21,
    /// `D = I`; with `alpha = 0` this is Frobenius semi-NMF.
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    pub alpha: f64,
    pub max_iters: usize,
    pub eps_residual: f64,
    pub eps_denominator: f64,
    pub update_order: UpdateOrder,
    pub weighting: Weighting,
    pub seed: u64,
    /// Stop once the relative objective change drops below this. Off by default.
    pub tolerance: Option<f64>,
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            alpha: 0.0,
            max_iters: 100,
            eps_residual: DEFAULT_EPS_RESIDUAL,
            eps_denominator: DEFAULT_EPS_DENOMINATOR,
            update_order: UpdateOrder::GaussSeidel,
            weighting: Weighting::L21,
            seed: 0,
            tolerance: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn with_order(mut self, order: UpdateOrder) -> Self {
        self.update_order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.eps_residual > 0.0) || !(self.eps_denominator > 0.0) {
            return Err(Error::InvalidConfig("epsilon floors must be strictly positive".into()));
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0) {
                return Err(Error::InvalidConfig("tolerance must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorizationState {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
    pub iter: usize,
    /// `‖x_j − W h_j‖₂` for every column of the data matrix.
    pub residual_norms: Vec<f64>,
}

impl FactorizationState {
    pub fn new(x: &DenseMatrix, w: DenseMatrix, h: DenseMatrix) -> Result<Self> {
        check_factor_shapes(x, &w, &h)?;
        let residual_norms = residual_norms(x, &w, &h)?;
        Ok(Self { w, h, iter: 0, residual_norms })
    }

    pub fn rank(&self) -> usize {
        self.w.cols()
    }

    /// `W · H`
    pub fn reconstruct(&self) -> DenseMatrix {
        self.w.matmul(&self.h).expect("factor shapes checked at construction")
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub final_state: FactorizationState,
    /// One record for the initial state plus one per completed iteration.
    pub history: LossHistory,
    pub wall_time: Duration,
}

fn check_factor_shapes(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<()> {
    if w.rows() != x.rows() || h.cols() != x.cols() || w.cols() != h.rows() {
        return Err(Error::ShapeMismatch {
            op: "factorization",
            detail: format!("X {:?}, W {:?}, H {:?}", x.shape(), w.shape(), h.shape()),
        });
    }
    Ok(())
}

/// Euclidean norm of each column of `X − WH`.
pub fn residual_norms(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(x.sub(&w.matmul(h)?)?.column_norms())
}

/// `‖X − WH‖_{2,1} + (α/2)‖W‖_F²`
pub fn objective(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix, alpha: f64) -> Result<f64> {
    check_factor_shapes(x, w, h)?;
    let fit = l21_norm(&x.sub(&w.matmul(h)?)?);
    let ridge = frobenius_norm(w).powi(2);
    Ok(fit + 0.5 * alpha * ridge)
}

fn weights_from_norms(norms: &[f64], eps_residual: f64) -> DiagWeights {
    let d = norms.iter().map(|r| 1.0 / r.max(eps_residual)).collect();
    DiagWeights::new(d).expect("floored reciprocal norms are positive")
}

/// `D_jj = 1 / max(‖x_j − W h_j‖₂, eps_residual)`.
pub fn compute_d(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix, eps_residual: f64) -> Result<DiagWeights> {
    check_factor_shapes(x, w, h)?;
    Ok(weights_from_norms(&residual_norms(x, w, h)?, eps_residual))
}

/// Closed-form minimizer of the reweighted ridge proxy over `W`:
/// `W = XDHᵀ (αI + HDHᵀ)⁻¹`.
pub fn step_w(x: &DenseMatrix, h: &DenseMatrix, d: &DiagWeights, alpha: f64) -> Result<DenseMatrix> {
    if h.cols() != x.cols() || d.len() != x.cols() {
        return Err(Error::ShapeMismatch {
            op: "step_w",
            detail: format!("X {:?}, H {:?}, D {}", x.shape(), h.shape(), d.len()),
        });
    }
    let hd = h.scale_columns(d.as_slice())?;
    let mut gram = hd.matmul_t(h)?;
    for i in 0..gram.rows() {
        gram[(i, i)] += alpha;
    }
    let rhs = x.matmul_t(&hd)?;
    // W·A = B with A symmetric  <=>  A·Wᵀ = Bᵀ
    Ok(solve_spd(&gram, &rhs.transpose())?.transpose())
}

/// Multiplicative update of the nonnegative factor.
pub fn step_h(
    x: &DenseMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    d: &DiagWeights,
    eps_denominator: f64,
) -> Result<DenseMatrix> {
    check_factor_shapes(x, w, h)?;
    if d.len() != x.cols() {
        return Err(Error::ShapeMismatch {
            op: "step_h",
            detail: format!("{} weights for {} columns", d.len(), x.cols()),
        });
    }
    let (phi_pos, phi_neg) = split_pos_neg(&w.t_matmul(x)?);
    let (omega_pos, omega_neg) = split_pos_neg(&w.t_matmul(w)?);
    let omega_pos_h = omega_pos.matmul(h)?;
    let omega_neg_h = omega_neg.matmul(h)?;
    let d = d.as_slice();

    let (k, n) = h.shape();
    let mut out = DenseMatrix::zeros(k, n);
    for i in 0..k {
        for j in 0..n {
            let num = phi_pos[(i, j)] * d[j] + omega_neg_h[(i, j)] * d[j];
            let den = phi_neg[(i, j)] * d[j] + omega_pos_h[(i, j)] * d[j];
            out[(i, j)] = h[(i, j)] * (num / den.max(eps_denominator)).sqrt();
        }
    }
    Ok(out)
}

/// Iterates from `init` for `config.max_iters` iterations (or until the
/// optional tolerance is met), logging objective, NFL and NL21 after every
/// iteration.
pub fn fit(x: &DenseMatrix, config: &SolverConfig, init: FactorizationState) -> Result<FitReport> {
    config.validate()?;
    check_factor_shapes(x, &init.w, &init.h)?;
    if init.rank() != config.rank {
        return Err(Error::InvalidConfig(format!(
            "initial factors have rank {}, config asks for {}",
            init.rank(),
            config.rank
        )));
    }
    if init.h.min() <= 0.0 {
        return Err(Error::InvalidConfig(
            "initial H must be strictly positive; zero entries never change under multiplicative updates".into(),
        ));
    }

    let start = Instant::now();
    let FactorizationState { mut w, mut h, .. } = init;
    let mut history = LossHistory::new();
    let (mut record, mut norms) = evaluate(x, &w, &h, config, 0)?;
    history.push(record);

    let weights = |norms: &[f64]| match config.weighting {
        Weighting::L21 => weights_from_norms(norms, config.eps_residual),
        Weighting::Uniform => DiagWeights::ones(norms.len()),
    };

    let mut iter = 0;
    while iter < config.max_iters {
        let d = weights(&norms);
        match config.update_order {
            UpdateOrder::GaussSeidel => {
                h = step_h(x, &w, &h, &d, config.eps_denominator)?;
                let d = match config.weighting {
                    Weighting::L21 => weights(&residual_norms(x, &w, &h)?),
                    Weighting::Uniform => d,
                };
                w = step_w(x, &h, &d, config.alpha)?;
            }
            UpdateOrder::PaperJacobi => {
                let h_next = step_h(x, &w, &h, &d, config.eps_denominator)?;
                w = step_w(x, &h, &d, config.alpha)?;
                h = h_next;
            }
        }
        iter += 1;

        let prev = record.objective.expect("iterative fits always log an objective");
        (record, norms) = evaluate(x, &w, &h, config, iter)?;
        history.push(record);

        if let Some(tol) = config.tolerance {
            let cur = record.objective.expect("logged above");
            if (prev - cur).abs() <= tol * prev.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }

    Ok(FitReport {
        final_state: FactorizationState { w, h, iter, residual_norms: norms },
        history,
        wall_time: start.elapsed(),
    })
}

/// Loss record for the current factors plus the residual column norms, which
/// seed the next iteration's weights.
fn evaluate(
    x: &DenseMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    config: &SolverConfig,
    iter: usize,
) -> Result<(LossRecord, Vec<f64>)> {
    let xhat = w.matmul(h)?;
    let norms = x.sub(&xhat)?.column_norms();
    let ridge = 0.5 * config.alpha * frobenius_norm(w).powi(2);
    let objective = match config.weighting {
        Weighting::L21 => norms.iter().sum::<f64>() + ridge,
        // squared Frobenius loss, plus the matching ridge when alpha > 0
        Weighting::Uniform => norms.iter().map(|r| r * r).sum::<f64>() + 2.0 * ridge,
    };
    if !objective.is_finite() {
        return Err(Error::NonFiniteObjective { iter, value: objective });
    }
    let record = LossRecord {
        iter,
        objective: Some(objective),
        nfl: nfl(x, &xhat)?,
        nl21: nl21(x, &xhat)?,
    };
    Ok((record, norms))
}
