//! Fixed-point analysis of the modified rule: block constraints, the
//! `det{D′_α}` sweep and second-order predictions of the objective change
//! around eigenvector fixed points.

use serde::Serialize;

use crate::dynamics::exact_backprojection;
use crate::error::{ensure_dims, Error, Result};
use crate::linalg::{det, orthogonal_complement, random_stiefel, Matrix, Rng};
use crate::model::{validate_selection, CovarianceModel};
use crate::rules::objective_modified;

/// Largest step scale accepted by [`perturbed_point`].
pub const MAX_PROBE_EPSILON: f64 = 1e-2;

/// Blocks of `M = QᵀΛQ = [[S, Tᵀ], [T, U]]` where `Q = [Ā, Q̌]` completes
/// `Ā = VᵀW̄` to an orthogonal matrix.
#[derive(Debug, Clone)]
pub struct ConstraintBlocks {
    /// `m×m`, equal to `W̄ᵀCW̄`.
    pub s: Matrix,
    /// `(n−m)×m`; `None` when `m = n`.
    pub t: Option<Matrix>,
    /// `(n−m)×(n−m)`; `None` when `m = n`.
    pub u: Option<Matrix>,
}

/// Residuals of the fixed-point constraints `SD̄ = D̄S` and `T[(1+α)D̄ − αS] = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintResiduals {
    /// `‖SD̄ − D̄S‖_F`
    pub sd: f64,
    /// `‖T[(1+α)D̄ − αS]‖_F`
    pub t: f64,
}

pub fn constraint_blocks(w_bar: &Matrix, model: &CovarianceModel) -> Result<ConstraintBlocks> {
    let (n, m) = w_bar.shape();
    ensure_dims(n == model.dim() && m <= n, || {
        format!("W̄ is {n}x{m} for a model of dimension {}", model.dim())
    })?;
    let orth = w_bar.tr_matmul(w_bar).max_abs_diff(&Matrix::identity(m));
    if orth > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "W̄ is not semi-orthogonal (max |W̄ᵀW̄ − I| = {orth:e})"
        )));
    }
    let lambdas = model.lambdas();
    let a_bar = model.basis().tr_matmul(w_bar);
    let lambda_a = a_bar.diag_mul(lambdas);
    let s = a_bar.tr_matmul(&lambda_a);
    let (t, u) = match orthogonal_complement(&a_bar) {
        Some(q_check) => {
            let t = q_check.tr_matmul(&lambda_a);
            let u = q_check.tr_matmul(&q_check.diag_mul(lambdas));
            (Some(t), Some(u))
        }
        None => (None, None),
    };
    Ok(ConstraintBlocks { s, t, u })
}

pub fn check_fixed_point_constraints(blocks: &ConstraintBlocks, alpha: f64) -> ConstraintResiduals {
    let s = &blocks.s;
    let d = s.diagonal();
    let sd = (&s.mul_diag(&d) - &s.diag_mul(&d)).frobenius_norm();
    let t = blocks.t.as_ref().map_or(0.0, |t| {
        let factor = Matrix::from_fn(s.rows(), s.cols(), |j, k| {
            let diag = if j == k { (1.0 + alpha) * d[j] } else { 0.0 };
            diag - alpha * s[(j, k)]
        });
        t.matmul(&factor).frobenius_norm()
    });
    ConstraintResiduals { sd, t }
}

/// `det{D′_α}` evaluated along a grid of `α`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub alphas: Vec<f64>,
    pub dets: Vec<f64>,
    /// `(α_i, α_{i+1})` for every adjacent pair whose determinants change sign.
    pub zero_crossings: Vec<(f64, f64)>,
}

/// Seed of the committed `det{D′_α}` sweep; its draw of `Ā` shows a sign change.
pub const DET_SWEEP_SEED: u64 = 1;

/// Eigenvalues `10, 9, …, 1` used by the determinant sweep.
pub fn sweep_lambdas() -> Vec<f64> {
    (1..=10).rev().map(f64::from).collect()
}

/// Sweep over [`default_alpha_grid`] for a random semi-orthogonal `Ā`
/// (`10×m`) drawn from `seed`, with `Λ` from [`sweep_lambdas`].
pub fn seeded_det_sweep(seed: u64, m: usize) -> Result<SweepResult> {
    let lambdas = sweep_lambdas();
    if m == 0 || m > lambdas.len() {
        return Err(Error::InvalidArgument(format!("need 1 <= m <= 10, got {m}")));
    }
    let a_bar = random_stiefel(lambdas.len(), m, &mut Rng::with_stream(seed, 2))?;
    det_sweep(&a_bar, &lambdas, &default_alpha_grid())
}

/// `count` evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// The grid `0.0, 0.1, …, 20.0`.
pub fn default_alpha_grid() -> Vec<f64> {
    linspace(0.0, 20.0, 201)
}

/// Sweeps `D′_α = (1+α) dg{ĀᵀΛĀ} − α ĀᵀΛĀ` over `alpha_grid`.
pub fn det_sweep(a_bar: &Matrix, lambdas: &[f64], alpha_grid: &[f64]) -> Result<SweepResult> {
    let (n, m) = a_bar.shape();
    ensure_dims(n == lambdas.len() && m <= n, || {
        format!("Ā is {n}x{m} with {} eigenvalues", lambdas.len())
    })?;
    if alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("alpha grid must be strictly increasing".into()));
    }
    let s = a_bar.tr_matmul(&a_bar.diag_mul(lambdas));
    let d = s.diagonal();
    let dets = alpha_grid
        .iter()
        .map(|&alpha| {
            let dp = Matrix::from_fn(m, m, |j, k| {
                let diag = if j == k { (1.0 + alpha) * d[j] } else { 0.0 };
                diag - alpha * s[(j, k)]
            });
            det(&dp)
        })
        .collect::<Result<Vec<_>>>()?;
    let zero_crossings = alpha_grid
        .windows(2)
        .zip(dets.windows(2))
        .filter(|(_, d)| (d[0] < 0.0) != (d[1] < 0.0))
        .map(|(a, _)| (a[0], a[1]))
        .collect();
    Ok(SweepResult {
        alphas: alpha_grid.to_vec(),
        dets,
        zero_crossings,
    })
}

/// A small step away from an eigenvector fixed point, given by a
/// skew-symmetric `m×m` rotation within the selected subspace and an
/// `(n−m)×m` coupling to the excluded eigenvectors.
#[derive(Debug, Clone)]
pub struct StabilityProbe {
    /// Eigen-indices of the fixed point (0-based).
    pub selection: Vec<usize>,
    /// Skew-symmetric, unit Frobenius norm (or zero).
    pub step_a: Matrix,
    /// Rows follow the excluded indices in ascending order; unit Frobenius
    /// norm (or zero).
    pub step_b: Matrix,
    pub epsilon: f64,
}

impl StabilityProbe {
    /// Random direction with both parts of unit norm.
    pub fn random(selection: &[usize], n: usize, epsilon: f64, rng: &mut Rng) -> Result<Self> {
        validate_selection(n, selection)?;
        let m = selection.len();
        let step_a = if m > 1 {
            let g = rng.gaussian_matrix(m, m);
            let a = &g - &g.transpose();
            a.scale(1.0 / a.frobenius_norm())
        } else {
            Matrix::zeros(1, 1)
        };
        let step_b = if n > m {
            let b = rng.gaussian_matrix(n - m, m);
            b.scale(1.0 / b.frobenius_norm())
        } else {
            Matrix::zeros(1, m)
        };
        Self::new(selection.to_vec(), n, step_a, step_b, epsilon)
    }

    /// Pure rotation in the `(i, j)` slot plane (`B = 0`).
    pub fn rotation(selection: &[usize], n: usize, i: usize, j: usize, epsilon: f64) -> Result<Self> {
        let m = selection.len();
        if i >= m || j >= m || i == j {
            return Err(Error::InvalidArgument(format!("bad slot pair ({i}, {j})")));
        }
        let mut a = Matrix::zeros(m, m);
        a[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
        a[(j, i)] = -std::f64::consts::FRAC_1_SQRT_2;
        let b = Matrix::zeros((n - m).max(1), m);
        Self::new(selection.to_vec(), n, a, b, epsilon)
    }

    /// Pure coupling (`A = 0`) of the excluded eigenvector `from` into the
    /// column `slot` of the fixed point.
    pub fn coupling(selection: &[usize], n: usize, from: usize, slot: usize, epsilon: f64) -> Result<Self> {
        validate_selection(n, selection)?;
        let m = selection.len();
        let row = (0..n)
            .filter(|i| !selection.contains(i))
            .position(|i| i == from)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("eigenvector {from} is part of the selection"))
            })?;
        if slot >= m {
            return Err(Error::InvalidArgument(format!("slot {slot} out of range 0..{m}")));
        }
        let mut b = Matrix::zeros(n - m, m);
        b[(row, slot)] = 1.0;
        Self::new(selection.to_vec(), n, Matrix::zeros(m, m), b, epsilon)
    }

    pub fn new(selection: Vec<usize>, n: usize, step_a: Matrix, step_b: Matrix, epsilon: f64) -> Result<Self> {
        validate_selection(n, &selection)?;
        let m = selection.len();
        ensure_dims(step_a.shape() == (m, m), || {
            format!("step A is {:?}, expected ({m}, {m})", step_a.shape())
        })?;
        ensure_dims(step_b.shape() == ((n - m).max(1), m), || {
            format!("step B is {:?}, expected ({}, {m})", step_b.shape(), n - m)
        })?;
        if step_a.max_abs_diff(&(-&step_a.transpose())) != 0.0 {
            return Err(Error::InvalidArgument("step A must be skew-symmetric".into()));
        }
        for (name, x) in [("A", &step_a), ("B", &step_b)] {
            let norm = x.frobenius_norm();
            if norm != 0.0 && (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "step {name} must have unit Frobenius norm, got {norm}"
                )));
            }
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
        }
        Ok(Self {
            selection,
            step_a,
            step_b,
            epsilon,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }
}

/// `W = V̂*F + V̌*(εB)` with `F = I + εA − ½ε²(AᵀA + BᵀB)`, projected back
/// onto the Stiefel manifold.
pub fn perturbed_point(model: &CovarianceModel, probe: &StabilityProbe) -> Result<Matrix> {
    let eps = probe.epsilon;
    if !(eps <= MAX_PROBE_EPSILON) {
        return Err(Error::InvalidArgument(format!(
            "probe epsilon {eps} exceeds {MAX_PROBE_EPSILON}"
        )));
    }
    let n = model.dim();
    let sel = &probe.selection;
    let m = sel.len();
    let complement = model.complement(sel);
    let a = &probe.step_a;
    let b = &probe.step_b;

    let mut k = a.tr_matmul(a);
    if !complement.is_empty() {
        k.add_scaled(1.0, &b.tr_matmul(b));
    }
    let mut f = Matrix::identity(m);
    f.add_scaled(eps, a);
    f.add_scaled(-0.5 * eps * eps, &k);

    let mut w = model.basis().select_columns(sel).matmul(&f);
    if !complement.is_empty() {
        w.add_scaled(eps, &model.basis().select_columns(&complement).matmul(b));
    }
    debug_assert_eq!(w.shape(), (n, m));
    exact_backprojection(&w)
}

/// `J(W) − J(W̄)` for the modified objective.
pub fn delta_j_measured(w: &Matrix, w_bar: &Matrix, c: &Matrix, alpha: f64) -> Result<f64> {
    Ok(objective_modified(w, c, alpha)? - objective_modified(w_bar, c, alpha)?)
}

/// Second-order change of the modified objective at a fixed point with
/// pairwise distinct eigenvalues:
///
/// `ΔJ ≈ ½(1+α) Σⱼ [λ̂ⱼ(AᵀΛ̂A)ⱼⱼ − λ̂ⱼ²(AᵀA)ⱼⱼ] + ½ Σⱼ [λ̂ⱼ(BᵀΛ̌B)ⱼⱼ − λ̂ⱼ²(BᵀB)ⱼⱼ]`
///
/// with `A = ε·step_a`, `B = ε·step_b`.
pub fn delta_j_predicted_special(
    lambdas_hat: &[f64],
    lambdas_check: &[f64],
    step_a: &Matrix,
    step_b: &Matrix,
    epsilon: f64,
    alpha: f64,
) -> Result<f64> {
    let m = lambdas_hat.len();
    ensure_dims(step_a.shape() == (m, m), || "step A must be m×m".into())?;
    let a = step_a.scale(epsilon);
    let ata = a.tr_matmul(&a);
    let ala = a.tr_matmul(&a.diag_mul(lambdas_hat));
    let a_part: f64 = (0..m)
        .map(|j| {
            let l = lambdas_hat[j];
            l * ala[(j, j)] - l * l * ata[(j, j)]
        })
        .sum();
    let b_part = if lambdas_check.is_empty() {
        0.0
    } else {
        ensure_dims(step_b.shape() == (lambdas_check.len(), m), || {
            "step B must be (n−m)×m".into()
        })?;
        let b = step_b.scale(epsilon);
        let btb = b.tr_matmul(&b);
        let blb = b.tr_matmul(&b.diag_mul(lambdas_check));
        (0..m)
            .map(|j| {
                let l = lambdas_hat[j];
                l * blb[(j, j)] - l * l * btb[(j, j)]
            })
            .sum()
    };
    Ok(0.5 * (1.0 + alpha) * a_part + 0.5 * b_part)
}

/// `ΔJ₂ ≈ ½[tr{H²BᵀB} − tr{HBᵀΛ̌B}]` with `B = ε·step_b`; depends on `B` only.
pub fn delta_j2_general(h: &Matrix, lambdas_check: &[f64], step_b: &Matrix, epsilon: f64) -> Result<f64> {
    h.check_symmetric(crate::linalg::SYMMETRY_TOL)?;
    ensure_dims(step_b.shape() == (lambdas_check.len(), h.rows()), || {
        format!(
            "step B is {:?}, expected ({}, {})",
            step_b.shape(),
            lambdas_check.len(),
            h.rows()
        )
    })?;
    let b = step_b.scale(epsilon);
    let btb = b.tr_matmul(&b);
    let blb = b.tr_matmul(&b.diag_mul(lambdas_check));
    let h2 = h.matmul(h);
    Ok(0.5 * (h2.matmul(&btb).trace() - h.matmul(&blb).trace()))
}

/// Predicted and measured `ΔJ` for one probe.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeOutcome {
    pub measured: f64,
    pub predicted: f64,
}

/// Evaluates a probe at the fixed point of its selection.
pub fn evaluate_probe(model: &CovarianceModel, probe: &StabilityProbe, alpha: f64) -> Result<ProbeOutcome> {
    let w_bar = crate::model::desired_fixed_point(model, &probe.selection)?;
    let w = perturbed_point(model, probe)?;
    let measured = delta_j_measured(&w, &w_bar, model.covariance(), alpha)?;
    let lh = model.selected_lambdas(&probe.selection);
    let lc = model.selected_lambdas(&model.complement(&probe.selection));
    let predicted =
        delta_j_predicted_special(&lh, &lc, &probe.step_a, &probe.step_b, probe.epsilon, alpha)?;
    Ok(ProbeOutcome { measured, predicted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_stiefel;
    use crate::model::{desired_fixed_point, EigenvaluePreset};

    fn model(seed: u64) -> CovarianceModel {
        CovarianceModel::random(&EigenvaluePreset::Spaced.values(), &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn blocks_at_fixed_point() {
        let m = model(1);
        let w = desired_fixed_point(&m, &[0, 2, 4, 6]).unwrap();
        let b = constraint_blocks(&w, &m).unwrap();
        assert!(b.s.max_abs_diff(&b.s.diag_part()) <= 1e-10);
        assert!(b.t.as_ref().unwrap().max_abs() <= 1e-10);
        let u = b.u.unwrap();
        assert_eq!(u.shape(), (6, 6));
        for alpha in [0.0, 1.0, 20.0] {
            let r = check_fixed_point_constraints(&constraint_blocks(&w, &m).unwrap(), alpha);
            assert!(r.sd <= 1e-10 && r.t <= 1e-10);
        }
    }

    #[test]
    fn blocks_generic_point() {
        let m = model(2);
        let w = random_stiefel(10, 4, &mut Rng::new(3)).unwrap();
        let b = constraint_blocks(&w, &m).unwrap();
        let s_direct = w.tr_matmul(&m.covariance().matmul(&w));
        assert!(b.s.max_abs_diff(&s_direct) <= 1e-12);
        assert!(b.t.as_ref().unwrap().frobenius_norm() > 1e-6);
        let r = check_fixed_point_constraints(&b, 2.0);
        assert!(r.sd > 1e-6 && r.t > 1e-6);
        // α = 0 reduces the second constraint to ‖TD̄‖.
        let r0 = check_fixed_point_constraints(&b, 0.0);
        let td = b.t.as_ref().unwrap().mul_diag(&b.s.diagonal()).frobenius_norm();
        assert!((r0.t - td).abs() <= 1e-14 * td.max(1.0));
    }

    #[test]
    fn blocks_reject_off_manifold() {
        let m = model(2);
        let w = Rng::new(4).gaussian_matrix(10, 4);
        assert!(constraint_blocks(&w, &m).is_err());
    }

    #[test]
    fn sweep_basics() {
        let lambdas: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        let a = random_stiefel(10, 4, &mut Rng::new(5)).unwrap();
        let grid = default_alpha_grid();
        assert_eq!(grid.len(), 201);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[200], 20.0);
        let r = det_sweep(&a, &lambdas, &grid).unwrap();
        let s = a.tr_matmul(&a.diag_mul(&lambdas));
        let prod: f64 = s.diagonal().iter().product();
        assert!((r.dets[0] - prod).abs() <= 1e-12 * prod);
        assert!(r.dets[0] > 0.0);

        let a1 = random_stiefel(10, 1, &mut Rng::new(5)).unwrap();
        let r1 = det_sweep(&a1, &lambdas, &grid).unwrap();
        assert!(r1.dets.iter().all(|d| (d - r1.dets[0]).abs() <= 1e-12 * r1.dets[0]));
        assert!(r1.zero_crossings.is_empty());
    }

    #[test]
    fn sweep_detects_sign_change() {
        // Ā rotates by 45°, Λ = diag(3, 1): ĀᵀΛĀ = [[2, 1], [1, 2]],
        // D′_α = [[2, −α], [−α, 2]], det = 4 − α².
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let a = Matrix::from_rows(&[[c, c], [-c, c]]);
        let r = det_sweep(&a, &[3.0, 1.0], &[0.0, 1.0, 3.0]).unwrap();
        for (got, want) in r.dets.iter().zip([4.0, 3.0, -5.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(r.zero_crossings, vec![(1.0, 3.0)]);
        assert!(det_sweep(&a, &[3.0, 1.0], &[1.0, 0.5]).is_err());
    }

    #[test]
    fn probe_zero_epsilon_is_fixed_point() {
        let m = model(6);
        let sel = [0, 1, 2, 3];
        let probe = StabilityProbe::random(&sel, 10, 0.0, &mut Rng::new(1)).unwrap();
        let w = perturbed_point(&m, &probe).unwrap();
        let w_bar = desired_fixed_point(&m, &sel).unwrap();
        assert!(w.max_abs_diff(&w_bar) <= 1e-14);
        assert_eq!(delta_j_measured(&w_bar, &w_bar, m.covariance(), 3.0).unwrap(), 0.0);
        assert!(perturbed_point(&m, &probe.with_epsilon(0.1)).is_err());
    }

    #[test]
    fn rotation_probe_keeps_subspace() {
        let m = model(7);
        let sel = [0, 1, 2, 3];
        let eps = 1e-3;
        let probe = StabilityProbe::rotation(&sel, 10, 0, 2, eps).unwrap();
        let w = perturbed_point(&m, &probe).unwrap();
        let w_bar = desired_fixed_point(&m, &sel).unwrap();
        let p = w.matmul(&w.transpose());
        let p_bar = w_bar.matmul(&w_bar.transpose());
        assert!(p.max_abs_diff(&p_bar) <= 1e-8 * eps);
        assert!(w.tr_matmul(&w).max_abs_diff(&Matrix::identity(4)) <= 1e-12);
    }

    #[test]
    fn gram_expansion_is_second_order() {
        let m = model(8);
        let sel = [0, 1, 2, 3];
        let lh = m.selected_lambdas(&sel);
        let lc = m.selected_lambdas(&m.complement(&sel));
        let base = StabilityProbe::random(&sel, 10, 0.0, &mut Rng::new(9)).unwrap();
        let err = |eps: f64| {
            let probe = base.with_epsilon(eps);
            let w = perturbed_point(&m, &probe).unwrap();
            let gram = w.tr_matmul(&m.covariance().matmul(&w));
            let h = Matrix::from_diag(&lh);
            let a = probe.step_a.scale(eps);
            let b = probe.step_b.scale(eps);
            let k = &a.tr_matmul(&a) + &b.tr_matmul(&b);
            let mut fhf = h.clone();
            fhf.add_scaled(1.0, &a.tr_matmul(&h));
            fhf.add_scaled(1.0, &h.matmul(&a));
            fhf.add_scaled(1.0, &a.tr_matmul(&h.matmul(&a)));
            fhf.add_scaled(-0.5, &k.matmul(&h));
            fhf.add_scaled(-0.5, &h.matmul(&k));
            let predicted = &fhf + &b.tr_matmul(&b.diag_mul(&lc));
            (&gram - &predicted).frobenius_norm()
        };
        let e1 = err(1e-2);
        let e2 = err(5e-3);
        let ratio = e1 / e2;
        assert!((6.0..=10.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn special_prediction_hand_values() {
        let lh = [1.0, 0.9, 0.8, 0.7];
        let lc = [0.6, 0.5];
        let zero_a = Matrix::zeros(4, 4);
        let zero_b = Matrix::zeros(2, 4);
        assert_eq!(delta_j_predicted_special(&lh, &lc, &zero_a, &zero_b, 1e-3, 5.0).unwrap(), 0.0);
        // Single coupling of λ̌₀ = 0.6 into slot 1 (λ̂ = 0.9): ½·0.9·(0.6 − 0.9)·b².
        let mut b = Matrix::zeros(2, 4);
        b[(0, 1)] = 1.0;
        let eps = 1e-2;
        let got = delta_j_predicted_special(&lh, &lc, &zero_a, &b, eps, 3.0).unwrap();
        let expected = 0.5 * 0.9 * (0.6 - 0.9) * eps * eps;
        assert!((got - expected).abs() <= 1e-18);
        assert!(got < 0.0);
    }

    #[test]
    fn general_delta_j2_reduces_to_special_b_part() {
        let lh = [1.0, 0.9, 0.8, 0.7];
        let lc = [0.6, 0.5, 0.4];
        let mut rng = Rng::new(10);
        let b = rng.gaussian_matrix(3, 4);
        let b = b.scale(1.0 / b.frobenius_norm());
        let eps = 1e-2;
        let j2 = delta_j2_general(&Matrix::from_diag(&lh), &lc, &b, eps).unwrap();
        let b_part = delta_j_predicted_special(&lh, &lc, &Matrix::zeros(4, 4), &b, eps, 0.0).unwrap();
        assert!((j2 + b_part).abs() <= 1e-15);
        assert_eq!(delta_j2_general(&Matrix::from_diag(&lh), &lc, &Matrix::zeros(3, 4), eps).unwrap(), 0.0);
    }

    #[test]
    fn general_delta_j2_trace_loops() {
        let mut rng = Rng::new(11);
        let g = rng.gaussian_matrix(3, 3);
        let h = &g + &g.transpose();
        let lc = [0.5, 0.25];
        let sb = rng.gaussian_matrix(2, 3);
        let eps = 0.1;
        let b = sb.scale(eps);
        let mut t1 = 0.0;
        let mut t2 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let h2 = (0..3).map(|l| h[(i, l)] * h[(l, j)]).sum::<f64>();
                let btb = (0..2).map(|r| b[(r, j)] * b[(r, i)]).sum::<f64>();
                let blb = (0..2).map(|r| b[(r, j)] * lc[r] * b[(r, i)]).sum::<f64>();
                t1 += h2 * btb;
                t2 += h[(i, j)] * blb;
            }
        }
        let oracle = 0.5 * (t1 - t2);
        let got = delta_j2_general(&h, &lc, &sb, eps).unwrap();
        assert!((got - oracle).abs() <= 1e-14 * oracle.abs().max(1.0));
    }

    #[test]
    fn stability_signs() {
        let m = model(12);
        let mut rng = Rng::new(13);
        for alpha in [0.0, 5.0] {
            for _ in 0..10 {
                let probe = StabilityProbe::random(&[0, 1, 2, 3], 10, 1e-3, &mut rng).unwrap();
                let o = evaluate_probe(&m, &probe, alpha).unwrap();
                assert!(o.measured < 0.0 && o.predicted < 0.0);
            }
        }
        // λ index 3 excluded, slot of index 4 (position 3).
        let probe = StabilityProbe::coupling(&[0, 1, 2, 4], 10, 3, 3, 1e-3).unwrap();
        let o = evaluate_probe(&m, &probe, 1.0).unwrap();
        assert!(o.measured > 0.0 && o.predicted > 0.0);
    }

    #[test]
    fn probe_validation() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let b = Matrix::zeros(2, 2);
        assert!(StabilityProbe::new(vec![0, 1], 4, a, b.clone(), 1e-3).is_err());
        assert!(StabilityProbe::coupling(&[0, 1], 4, 1, 0, 1e-3).is_err());
        assert!(StabilityProbe::rotation(&[0, 1], 4, 0, 0, 1e-3).is_err());
    }
}
