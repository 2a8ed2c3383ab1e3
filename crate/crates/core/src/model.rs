//! Covariance models with a known spectrum and the eigenvector fixed points
//! built from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{random_orthogonal, Matrix, Rng};

/// Named eigenvalue sets used in the convergence experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenvaluePreset {
    /// `{0.91, 0.9, 0.8, …, 0.1}`: the two leading eigenvalues almost coincide.
    Nearby,
    /// `{1.0, 0.9, …, 0.1}`.
    Spaced,
}

impl EigenvaluePreset {
    pub fn values(self) -> Vec<f64> {
        let tail = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
        let head = match self {
            EigenvaluePreset::Nearby => 0.91,
            EigenvaluePreset::Spaced => 1.0,
        };
        std::iter::once(head).chain(tail).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            EigenvaluePreset::Nearby => "nearby",
            EigenvaluePreset::Spaced => "spaced",
        }
    }
}

impl fmt::Display for EigenvaluePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EigenvaluePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearby" => Ok(Self::Nearby),
            "spaced" => Ok(Self::Spaced),
            other => Err(Error::Config(format!("unknown eigenvalue preset `{other}`"))),
        }
    }
}

/// Eigenvalues of a preset given by name. `custom` lists pass through
/// [`validate_spectrum`] instead.
pub fn preset_eigenvalues(name: &str) -> Result<Vec<f64>> {
    Ok(name.parse::<EigenvaluePreset>()?.values())
}

/// Checks that eigenvalues are positive, finite, distinct and descending.
pub fn validate_spectrum(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty eigenvalue list".into()));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "eigenvalues must be positive and finite, got {bad}"
        )));
    }
    if let Some(w) = lambdas.windows(2).find(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "eigenvalues must be distinct and descending, got {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Covariance matrix `C = V Λ Vᵀ` with known orthogonal `V` and spectrum.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    lambdas: Vec<f64>,
    basis: Matrix,
    covariance: Matrix,
}

impl CovarianceModel {
    /// Model with a Haar-random eigenbasis.
    pub fn random(lambdas: &[f64], rng: &mut Rng) -> Result<Self> {
        validate_spectrum(lambdas)?;
        let v = random_orthogonal(lambdas.len(), rng)?;
        Self::with_basis(lambdas, v)
    }

    /// Model with a caller-provided orthogonal eigenbasis (columns of `basis`).
    pub fn with_basis(lambdas: &[f64], basis: Matrix) -> Result<Self> {
        validate_spectrum(lambdas)?;
        let n = lambdas.len();
        if basis.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "basis is {}x{}, spectrum has {n} values",
                basis.rows(),
                basis.cols()
            )));
        }
        let orth_err = basis.tr_matmul(&basis).max_abs_diff(&Matrix::identity(n));
        if orth_err > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "basis is not orthogonal (max |VᵀV − I| = {orth_err:e})"
            )));
        }
        // Entry-wise sum over k keeps C exactly symmetric.
        let mut c = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x: f64 = (0..n).map(|k| lambdas[k] * basis[(i, k)] * basis[(j, k)]).sum();
                c[(i, j)] = x;
                c[(j, i)] = x;
            }
        }
        Ok(Self {
            lambdas: lambdas.to_vec(),
            basis,
            covariance: c,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// True eigenvectors `V`, column `i` belonging to `lambdas()[i]`.
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    /// `V̂`: the `m` principal eigenvectors.
    pub fn principal(&self, m: usize) -> Result<Matrix> {
        if m == 0 || m > self.dim() {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= m <= {}, got {m}",
                self.dim()
            )));
        }
        Ok(self.basis.select_columns(&(0..m).collect::<Vec<_>>()))
    }

    /// Eigenvalues of the selected eigenvectors, in selection order.
    pub fn selected_lambdas(&self, selection: &[usize]) -> Vec<f64> {
        selection.iter().map(|&i| self.lambdas[i]).collect()
    }

    /// Indices not in `selection`, ascending (i.e. descending eigenvalue).
    pub fn complement(&self, selection: &[usize]) -> Vec<usize> {
        (0..self.dim()).filter(|i| !selection.contains(i)).collect()
    }
}

/// Convenience wrapper for [`CovarianceModel::random`].
pub fn make_covariance(lambdas: &[f64], rng: &mut Rng) -> Result<CovarianceModel> {
    CovarianceModel::random(lambdas, rng)
}

pub(crate) fn validate_selection(n: usize, selection: &[usize]) -> Result<()> {
    if selection.is_empty() || selection.len() > n {
        return Err(Error::InvalidArgument(format!(
            "selection of {} eigenvectors out of {n}",
            selection.len()
        )));
    }
    for (k, &i) in selection.iter().enumerate() {
        if i >= n {
            return Err(Error::InvalidArgument(format!("eigenvector index {i} out of range 0..{n}")));
        }
        if selection[..k].contains(&i) {
            return Err(Error::InvalidArgument(format!("duplicate eigenvector index {i}")));
        }
    }
    Ok(())
}

/// Fixed point `W̄` whose columns are the selected true eigenvectors
/// (0-based indices, in the given order; the order plays the role of the
/// permutation).
pub fn desired_fixed_point(model: &CovarianceModel, selection: &[usize]) -> Result<Matrix> {
    validate_selection(model.dim(), selection)?;
    Ok(model.basis.select_columns(selection))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_eigen, DEFAULT_EIGEN_TOL};

    #[test]
    fn presets() {
        assert_eq!(
            preset_eigenvalues("spaced").unwrap(),
            vec![1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1]
        );
        assert_eq!(
            preset_eigenvalues("nearby").unwrap(),
            vec![0.91, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1]
        );
        assert!(matches!(preset_eigenvalues("wide"), Err(Error::Config(_))));
    }

    #[test]
    fn custom_spectrum_passthrough() {
        let m = CovarianceModel::random(&[2.0, 1.0], &mut Rng::new(1)).unwrap();
        assert_eq!(m.lambdas(), &[2.0, 1.0]);
    }

    #[test]
    fn spectrum_validation() {
        assert!(validate_spectrum(&[1.0, 1.0]).is_err());
        assert!(validate_spectrum(&[1.0, 2.0]).is_err());
        assert!(validate_spectrum(&[1.0, -0.5]).is_err());
        assert!(validate_spectrum(&[]).is_err());
        assert!(validate_spectrum(&[3.0, 2.0, 1.0]).is_ok());
    }

    #[test]
    fn one_dimensional_model() {
        let m = CovarianceModel::random(&[1.0], &mut Rng::new(4)).unwrap();
        assert!((m.covariance()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_basis_gives_diagonal_covariance() {
        let l = [3.0, 2.0, 0.5];
        let m = CovarianceModel::with_basis(&l, Matrix::identity(3)).unwrap();
        assert_eq!(m.covariance(), &Matrix::from_diag(&l));
    }

    #[test]
    fn covariance_recovers_spectrum() {
        let l = EigenvaluePreset::Spaced.values();
        let m = make_covariance(&l, &mut Rng::new(7)).unwrap();
        let c = m.covariance();
        let recon = m.basis().mul_diag(&l).matmul(&m.basis().transpose());
        assert!((&recon - c).frobenius_norm() <= 1e-12);
        let e = sym_eigen(c, DEFAULT_EIGEN_TOL).unwrap();
        for (a, b) in e.values.iter().zip(&l) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn fixed_point_with_identity_basis() {
        let m = CovarianceModel::with_basis(&[4.0, 3.0, 2.0, 1.0], Matrix::identity(4)).unwrap();
        let w = desired_fixed_point(&m, &[0, 1]).unwrap();
        assert_eq!(w, Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]));
    }

    #[test]
    fn fixed_point_diagonalizes_covariance() {
        let l = EigenvaluePreset::Spaced.values();
        let m = make_covariance(&l, &mut Rng::new(3)).unwrap();
        let w = desired_fixed_point(&m, &[0, 1, 2, 3]).unwrap();
        assert!(w.tr_matmul(&w).max_abs_diff(&Matrix::identity(4)) <= 1e-12);
        let s = w.tr_matmul(&m.covariance().matmul(&w));
        assert!(s.max_abs_diff(&Matrix::from_diag(&l[..4])) <= 1e-10);

        let w = desired_fixed_point(&m, &[3, 1, 0, 2]).unwrap();
        let s = w.tr_matmul(&m.covariance().matmul(&w));
        assert!(s.max_abs_diff(&Matrix::from_diag(&[l[3], l[1], l[0], l[2]])) <= 1e-10);
    }

    #[test]
    fn selection_errors() {
        let m = make_covariance(&[3.0, 2.0, 1.0], &mut Rng::new(3)).unwrap();
        assert!(desired_fixed_point(&m, &[0, 0]).is_err());
        assert!(desired_fixed_point(&m, &[3]).is_err());
        assert!(desired_fixed_point(&m, &[]).is_err());
    }
}
