//! Dense factorizations for small matrices: cyclic Jacobi eigensolver,
//! inverse square root, Householder QR, LU determinant and orthogonal
//! completion.

use super::Matrix;
use crate::error::{Error, Result};

/// Relative asymmetry accepted by the symmetric routines.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Off-diagonal convergence threshold for [`sym_eigen`], relative to `‖M‖_F`.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-13;

/// Sweep cap for the Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;

/// Smallest eigenvalue accepted by [`sym_inv_sqrt`].
pub const MIN_PD_EIGENVALUE: f64 = 1e-12;

/// Eigendecomposition `M = V diag(values) Vᵀ` with values in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Eigenvectors in columns, matching the order of `values`.
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn reconstruct(&self) -> Matrix {
        self.vectors.mul_diag(&self.values).matmul(&self.vectors.transpose())
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Iterates until the off-diagonal Frobenius norm drops below `tol·‖M‖_F`
/// or [`MAX_SWEEPS`] sweeps have run.
pub fn sym_eigen(m: &Matrix, tol: f64) -> Result<SymEigen> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    m.check_symmetric(SYMMETRY_TOL)?;
    let n = m.rows();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let threshold = tol * m.frobenius_norm();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- Jᵀ A J with J the rotation in the (p, q) plane.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off_norm = off_diagonal_norm(&a);
        if off_norm > threshold {
            return Err(Error::NoConvergence {
                sweeps: MAX_SWEEPS,
                off_norm,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    Ok(SymEigen {
        values: order.iter().map(|&i| a[(i, i)]).collect(),
        vectors: v.select_columns(&order),
    })
}

/// Symmetric inverse square root `M^{-1/2}` of a symmetric positive-definite matrix.
pub fn sym_inv_sqrt(m: &Matrix) -> Result<Matrix> {
    let eig = sym_eigen(m, DEFAULT_EIGEN_TOL)?;
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > MIN_PD_EIGENVALUE) {
        return Err(Error::Singular(min));
    }
    let scale: Vec<f64> = eig.values.iter().map(|l| 1.0 / l.sqrt()).collect();
    let v = &eig.vectors;
    let n = m.rows();
    let mut r = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x: f64 = (0..n).map(|k| v[(i, k)] * scale[k] * v[(j, k)]).sum();
            r[(i, j)] = x;
            r[(j, i)] = x;
        }
    }
    Ok(r)
}

/// Thin Householder QR of an `n×k` matrix (`k ≤ n`), normalized so that
/// `R` has a nonnegative diagonal.
pub fn thin_qr(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let (n, k) = a.shape();
    if k > n {
        return Err(Error::Dimension(format!("thin QR needs rows >= cols, got {n}x{k}")));
    }
    let mut r = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let norm = (j..n).map(|i| r[(i, j)] * r[(i, j)]).sum::<f64>().sqrt();
        let mut v: Vec<f64> = (j..n).map(|i| r[(i, j)]).collect();
        if norm == 0.0 {
            reflectors.push(vec![0.0; n - j]);
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= vnorm;
        }
        for c in j..k {
            let dot: f64 = (j..n).map(|i| v[i - j] * r[(i, c)]).sum();
            for i in j..n {
                r[(i, c)] -= 2.0 * v[i - j] * dot;
            }
        }
        reflectors.push(v);
    }

    let mut q = Matrix::from_fn(n, k, |i, j| if i == j { 1.0 } else { 0.0 });
    for j in (0..k).rev() {
        let v = &reflectors[j];
        for c in 0..k {
            let dot: f64 = (j..n).map(|i| v[i - j] * q[(i, c)]).sum();
            for i in j..n {
                q[(i, c)] -= 2.0 * v[i - j] * dot;
            }
        }
    }
    let mut r = r.block(0, k, 0, k);
    for i in 0..k {
        for j in 0..i {
            r[(i, j)] = 0.0;
        }
        if r[(i, i)] < 0.0 {
            for c in 0..k {
                r[(i, c)] = -r[(i, c)];
            }
            for row in 0..n {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    Ok((q, r))
}

/// Determinant by LU factorization with partial pivoting.
pub fn det(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "determinant of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
            .unwrap();
        if a[(p, k)] == 0.0 {
            return Ok(0.0);
        }
        if p != k {
            for c in 0..n {
                let tmp = a[(k, c)];
                a[(k, c)] = a[(p, c)];
                a[(p, c)] = tmp;
            }
            det = -det;
        }
        let pivot = a[(k, k)];
        det *= pivot;
        for i in (k + 1)..n {
            let f = a[(i, k)] / pivot;
            for c in k..n {
                a[(i, c)] -= f * a[(k, c)];
            }
        }
    }
    Ok(det)
}

/// Completes the orthonormal columns of `a` (`n×m`) with `n−m` further
/// orthonormal columns, by Gram–Schmidt over the canonical basis vectors,
/// always taking the candidate with the largest remaining norm.
///
/// Returns `None` when `a` is already square.
pub fn orthogonal_complement(a: &Matrix) -> Option<Matrix> {
    let (n, m) = a.shape();
    let mut basis: Vec<Vec<f64>> = (0..m).map(|j| a.column(j)).collect();
    let mut used = vec![false; n];
    let mut extra: Vec<Vec<f64>> = Vec::with_capacity(n - m);

    let project_out = |x: &mut Vec<f64>, basis: &[Vec<f64>]| {
        // twice is enough
        for _ in 0..2 {
            for b in basis {
                let dot: f64 = x.iter().zip(b).map(|(p, q)| p * q).sum();
                for (xi, bi) in x.iter_mut().zip(b) {
                    *xi -= dot * bi;
                }
            }
        }
    };

    while extra.len() < n - m {
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for e in 0..n {
            if used[e] {
                continue;
            }
            let mut x = vec![0.0; n];
            x[e] = 1.0;
            project_out(&mut x, &basis);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|b| norm > b.2) {
                best = Some((e, x, norm));
            }
        }
        let (e, mut x, norm) = best.expect("a canonical direction remains");
        used[e] = true;
        for xi in &mut x {
            *xi /= norm;
        }
        basis.push(x.clone());
        extra.push(x);
    }

    if extra.is_empty() {
        return None;
    }
    Some(Matrix::from_fn(n, extra.len(), |i, j| extra[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn random_symmetric(n: usize, rng: &mut Rng) -> Matrix {
        let g = rng.gaussian_matrix(n, n);
        Matrix::from_fn(n, n, |i, j| 0.5 * (g[(i, j)] + g[(j, i)]))
    }

    fn random_spd(n: usize, rng: &mut Rng) -> Matrix {
        let g = rng.gaussian_matrix(n, n);
        let mut m = g.tr_matmul(&g);
        for i in 0..n {
            m[(i, i)] += 0.1;
        }
        m
    }

    #[test]
    fn eigen_of_diagonal_is_sorted_permutation() {
        let m = Matrix::from_diag(&[3.0, 1.0, 2.0]);
        let e = sym_eigen(&m, DEFAULT_EIGEN_TOL).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        let expected = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
        assert_eq!(e.vectors, expected);
    }

    #[test]
    fn eigen_of_identity() {
        let e = sym_eigen(&Matrix::identity(4), DEFAULT_EIGEN_TOL).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
    }

    #[test]
    fn eigen_reconstructs_random_symmetric() {
        let mut rng = Rng::new(11);
        for n in 1..=20 {
            let m = random_symmetric(n, &mut rng);
            let e = sym_eigen(&m, DEFAULT_EIGEN_TOL).unwrap();
            let err = (&e.reconstruct() - &m).frobenius_norm() / m.frobenius_norm();
            assert!(err <= 1e-10, "n={n} err={err:e}");
            let vtv = e.vectors.tr_matmul(&e.vectors);
            assert!(vtv.max_abs_diff(&Matrix::identity(n)) <= 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eigen_rejects_nonsymmetric() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(sym_eigen(&m, 1e-13), Err(Error::NotSymmetric(_))));
        assert!(sym_eigen(&Matrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn inv_sqrt_simple_cases() {
        let r = sym_inv_sqrt(&Matrix::identity(4)).unwrap();
        assert!(r.max_abs_diff(&Matrix::identity(4)) <= 1e-15);
        let r = sym_inv_sqrt(&Matrix::identity(2).scale(4.0)).unwrap();
        assert!(r.max_abs_diff(&Matrix::identity(2).scale(0.5)) <= 1e-15);
    }

    #[test]
    fn inv_sqrt_defining_identity() {
        let mut rng = Rng::new(5);
        for _ in 0..100 {
            let n = 1 + (rng.uniform() * 6.0) as usize;
            let m = random_spd(n, &mut rng);
            let r = sym_inv_sqrt(&m).unwrap();
            assert_eq!(r, r.transpose());
            let rmr = r.matmul(&m).matmul(&r);
            assert!(rmr.max_abs_diff(&Matrix::identity(n)) <= 1e-9);
        }
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let m = Matrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(sym_inv_sqrt(&m), Err(Error::Singular(_))));
        let m = Matrix::from_diag(&[1.0, -2.0]);
        assert!(matches!(sym_inv_sqrt(&m), Err(Error::Singular(_))));
    }

    #[test]
    fn qr_reproduces_input() {
        let mut rng = Rng::new(3);
        let a = rng.gaussian_matrix(7, 4);
        let (q, r) = thin_qr(&a).unwrap();
        assert!(q.matmul(&r).max_abs_diff(&a) <= 1e-12);
        assert!(q.tr_matmul(&q).max_abs_diff(&Matrix::identity(4)) <= 1e-13);
        for i in 0..4 {
            assert!(r[(i, i)] >= 0.0);
        }
        assert!(thin_qr(&rng.gaussian_matrix(2, 3)).is_err());
    }

    #[test]
    fn determinant() {
        let m = Matrix::from_rows(&[[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]]);
        // 2(12-1) - 1(4-0) = 18
        assert!((det(&m).unwrap() - 18.0).abs() < 1e-12);
        let p = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(det(&p).unwrap(), -1.0);
        assert_eq!(det(&Matrix::zeros(3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn complement_is_orthonormal() {
        let mut rng = Rng::new(8);
        let (a, _) = thin_qr(&rng.gaussian_matrix(6, 2)).unwrap();
        let c = orthogonal_complement(&a).unwrap();
        assert_eq!(c.shape(), (6, 4));
        let full = Matrix::from_fn(6, 6, |i, j| if j < 2 { a[(i, j)] } else { c[(i, j - 2)] });
        assert!(full.tr_matmul(&full).max_abs_diff(&Matrix::identity(6)) <= 1e-13);
        assert!(orthogonal_complement(&Matrix::identity(3)).is_none());
    }
}
