//! Quantities used to check the solver rather than to run it: the reweighted
//! quadratic proxy, its gradient in `W`, the majorizer behind the `H` update,
//! and the complementary-slackness residual.

use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, split_pos_neg, DenseMatrix, DiagWeights};

fn weighted_sq_residual(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix, d: &DiagWeights) -> Result<f64> {
    let r = x.sub(&w.matmul(h)?)?;
    if d.len() != r.cols() {
        return Err(Error::ShapeMismatch {
            op: "proxy_loss",
            detail: format!("{} weights for {} columns", d.len(), r.cols()),
        });
    }
    Ok(r.column_norms().iter().zip(d.as_slice()).map(|(n, dj)| dj * n * n).sum())
}

/// `tr[(X − WH) D (X − WH)ᵀ] + α tr[WᵀW]`
pub fn proxy_loss(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix, d: &DiagWeights, alpha: f64) -> Result<f64> {
    Ok(weighted_sq_residual(x, w, h, d)? + alpha * frobenius_norm(w).powi(2))
}

/// The proxy without the ridge term, as a function of `H` alone.
pub fn truncated_proxy_loss(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix, d: &DiagWeights) -> Result<f64> {
    weighted_sq_residual(x, w, h, d)
}

/// `∂/∂W` of [`proxy_loss`]: `2 WHDHᵀ − 2 XDHᵀ + 2αW`.
pub fn proxy_gradient_w(
    x: &DenseMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    d: &DiagWeights,
    alpha: f64,
) -> Result<DenseMatrix> {
    let hd = h.scale_columns(d.as_slice())?;
    let whdht = w.matmul(&hd.matmul_t(h)?)?;
    let xdht = x.matmul_t(&hd)?;
    let g = whdht.sub(&xdht)?.add(&w.scale(alpha))?;
    Ok(g.scale(2.0))
}

/// Majorizer `A(H, H')` of [`truncated_proxy_loss`] around `H'`.
///
/// Sums `tr[XDXᵀ]`, the quadratic upper bounds on the `Φ⁻` and `Ω⁺` terms and
/// the logarithmic lower bounds on the `Φ⁺` and `Ω⁻` terms. `H'` must be
/// strictly positive, and `H` positive wherever a logarithm carries weight.
pub fn auxiliary_value(
    h: &DenseMatrix,
    h_prime: &DenseMatrix,
    x: &DenseMatrix,
    w: &DenseMatrix,
    d: &DiagWeights,
) -> Result<f64> {
    if h.shape() != h_prime.shape() || w.cols() != h.rows() || x.cols() != h.cols() || d.len() != h.cols() {
        return Err(Error::ShapeMismatch {
            op: "auxiliary_value",
            detail: format!("H {:?}, H' {:?}, X {:?}, W {:?}", h.shape(), h_prime.shape(), x.shape(), w.shape()),
        });
    }
    if h_prime.min() <= 0.0 {
        return Err(Error::Domain("H' must be strictly positive".into()));
    }
    let (k, n) = h.shape();
    let d = d.as_slice();
    let (phi_pos, phi_neg) = split_pos_neg(&w.t_matmul(x)?);
    let (omega_pos, omega_neg) = split_pos_neg(&w.t_matmul(w)?);
    let omega_pos_hp = omega_pos.matmul(h_prime)?;

    let log_ratio = |i: usize, j: usize| -> Result<f64> {
        let v = h[(i, j)];
        if v <= 0.0 {
            return Err(Error::Domain(format!("log of non-positive H[{i},{j}] = {v}")));
        }
        Ok((v / h_prime[(i, j)]).ln())
    };

    let x_norms = x.column_norms();
    let mut total: f64 = x_norms.iter().zip(d).map(|(nx, dj)| dj * nx * nx).sum();

    for i in 0..k {
        for j in 0..n {
            let (hij, hp) = (h[(i, j)], h_prime[(i, j)]);
            total += 2.0 * phi_neg[(i, j)] * d[j] * (hij * hij + hp * hp) / (2.0 * hp);
            total += omega_pos_hp[(i, j)] * d[j] * hij * hij / hp;
            let c = phi_pos[(i, j)] * d[j] * hp;
            if c != 0.0 {
                total -= 2.0 * c * (1.0 + log_ratio(i, j)?);
            }
        }
    }

    for j in 0..n {
        for i in 0..k {
            for l in 0..k {
                let c = omega_neg[(i, l)] * h_prime[(l, j)] * d[j] * h_prime[(i, j)];
                if c != 0.0 {
                    total -= c * (1.0 + log_ratio(l, j)? + log_ratio(i, j)?);
                }
            }
        }
    }
    Ok(total)
}

/// `max |H²ᵢⱼ (−Φ⁺D + Φ⁻D + Ω⁺HD − Ω⁻HD)ᵢⱼ|`, zero at a stationary point of
/// the `H` subproblem.
pub fn kkt_residual(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix, d: &DiagWeights) -> Result<f64> {
    if d.len() != h.cols() {
        return Err(Error::ShapeMismatch {
            op: "kkt_residual",
            detail: format!("{} weights for {} columns", d.len(), h.cols()),
        });
    }
    let (phi_pos, phi_neg) = split_pos_neg(&w.t_matmul(x)?);
    let (omega_pos, omega_neg) = split_pos_neg(&w.t_matmul(w)?);
    let omega_pos_h = omega_pos.matmul(h)?;
    let omega_neg_h = omega_neg.matmul(h)?;
    let d = d.as_slice();
    let (k, n) = h.shape();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..n {
            let g = (-phi_pos[(i, j)] + phi_neg[(i, j)] + omega_pos_h[(i, j)] - omega_neg_h[(i, j)]) * d[j];
            worst = worst.max((h[(i, j)] * h[(i, j)] * g).abs());
        }
    }
    Ok(worst)
}
