//! Error measures on square `m×m` matrices and the orthonormality and
//! projection errors built from them.

use serde::Serialize;

use crate::error::{ensure_dims, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub e_o: f64,
    pub e_p: f64,
}

fn check_square(x: &Matrix) -> Result<()> {
    ensure_dims(x.is_square(), || {
        format!("error measure needs a square matrix, got {}x{}", x.rows(), x.cols())
    })
}

/// `e₁(X) = (1/m²) Σᵢⱼ |Xᵢⱼ − δᵢⱼ|`: mean absolute deviation from the identity.
pub fn e1(x: &Matrix) -> Result<f64> {
    check_square(x)?;
    let m = x.rows();
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            let delta = if i == j { 1.0 } else { 0.0 };
            sum += (x[(i, j)] - delta).abs();
        }
    }
    Ok(sum / (m * m) as f64)
}

/// `e₂(X) = (1/m) Σⱼ |maxᵢ |Xᵢⱼ| − 1|`: how far each column's largest
/// absolute entry is from 1.
pub fn e2(x: &Matrix) -> Result<f64> {
    check_square(x)?;
    let m = x.rows();
    let sum: f64 = (0..m)
        .map(|j| {
            let col_max = (0..m).fold(0.0f64, |acc, i| acc.max(x[(i, j)].abs()));
            (col_max - 1.0).abs()
        })
        .sum();
    Ok(sum / m as f64)
}

/// `e₂′(X) = ½ (e₂(X) + e₂(Xᵀ))`: columns and rows.
pub fn e2_prime(x: &Matrix) -> Result<f64> {
    Ok(0.5 * (e2(x)? + e2(&x.transpose())?))
}

/// `e_o(W) = e₁(WᵀW)`
pub fn orthonormality_error(w: &Matrix) -> Result<f64> {
    e1(&w.tr_matmul(w))
}

/// `e_p(W, V̂) = e₂′(V̂ᵀW)`: zero iff every column of `W` is some `±v̂ᵢ`,
/// one-to-one.
pub fn projection_error(w: &Matrix, v_hat: &Matrix) -> Result<f64> {
    ensure_dims(w.shape() == v_hat.shape(), || {
        format!(
            "W is {}x{} but V̂ is {}x{}",
            w.rows(),
            w.cols(),
            v_hat.rows(),
            v_hat.cols()
        )
    })?;
    e2_prime(&v_hat.tr_matmul(w))
}

pub fn error_report(w: &Matrix, v_hat: &Matrix) -> Result<ErrorReport> {
    Ok(ErrorReport {
        e_o: orthonormality_error(w)?,
        e_p: projection_error(w, v_hat)?,
    })
}

/// Eigenvalue estimates `wⱼᵀCwⱼ` in column order.
pub fn eigenvalue_estimates(w: &Matrix, c: &Matrix) -> Result<Vec<f64>> {
    ensure_dims(c.is_square() && c.rows() == w.rows(), || {
        format!("W is {}x{} but C is {}x{}", w.rows(), w.cols(), c.rows(), c.cols())
    })?;
    Ok(w.tr_matmul(&c.matmul(w)).diagonal())
}
