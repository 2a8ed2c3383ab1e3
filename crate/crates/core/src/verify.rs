//! Self-check suites behind `symflow verify`.
//!
//! Each suite exercises one family of identities or invariants of the rules
//! and the fixed-point analysis and reports pass/fail with a short detail.

use std::fmt;

use crate::analysis::{
    check_fixed_point_constraints, constraint_blocks, delta_j_predicted_special, evaluate_probe,
    StabilityProbe,
};
use crate::error::Result;
use crate::linalg::{random_stiefel, Matrix, Rng};
use crate::model::{desired_fixed_point, CovarianceModel, EigenvaluePreset};
use crate::rules::{grad_modified, m2s_form1_rhs, objective_modified, rule_rhs, RuleSpec};

/// Signature of the first M2S arrangement; replaceable for mutation tests.
pub type Form1Fn = fn(&Matrix, &Matrix, f64) -> Result<Matrix>;

pub const SUITES: [&str; 7] = [
    "gradcheck",
    "reduction",
    "arrangement-identity",
    "fixed-point",
    "constraints",
    "stability",
    "near-stiefel",
];

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Run only these suites (all when `None`).
    pub only: Option<Vec<String>>,
    pub seed: u64,
    pub form1: Form1Fn,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            only: None,
            seed: 20_240_601,
            form1: m2s_form1_rhs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub results: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.results.iter().filter(|r| !r.passed).map(|r| r.name).collect()
    }
}

/// Runs the selected suites. Unknown suite names are rejected up front.
pub fn run(opts: &VerifyOptions) -> Result<VerifyReport> {
    if let Some(only) = &opts.only {
        if let Some(bad) = only.iter().find(|s| !SUITES.contains(&s.as_str())) {
            return Err(crate::Error::Config(format!(
                "unknown suite `{bad}` (known: {})",
                SUITES.join(", ")
            )));
        }
    }
    let wanted = |name: &str| opts.only.as_ref().is_none_or(|o| o.iter().any(|s| s == name));
    let mut results = Vec::new();
    for name in SUITES {
        if !wanted(name) {
            continue;
        }
        let outcome = match name {
            "gradcheck" => gradcheck(opts.seed),
            "reduction" => reduction(opts.seed),
            "arrangement-identity" => arrangement_identity(opts.seed, opts.form1),
            "fixed-point" => fixed_point(opts.seed),
            "constraints" => constraints(opts.seed),
            "stability" => stability(opts.seed),
            "near-stiefel" => near_stiefel(opts.seed),
            _ => unreachable!(),
        };
        let (passed, detail) = match outcome {
            Ok(x) => x,
            Err(e) => (false, format!("error: {e}")),
        };
        results.push(SuiteResult { name, passed, detail });
    }
    Ok(VerifyReport { results })
}

fn random_spd(n: usize, rng: &mut Rng) -> Matrix {
    let g = rng.gaussian_matrix(n, n);
    g.tr_matmul(&g).scale(1.0 / n as f64)
}

fn spaced_model(seed: u64) -> Result<CovarianceModel> {
    CovarianceModel::random(&EigenvaluePreset::Spaced.values(), &mut Rng::new(seed))
}

/// Central finite differences of the modified objective, step `h`.
pub fn finite_difference_gradient(w: &Matrix, c: &Matrix, alpha: f64, h: f64) -> Result<Matrix> {
    let mut fd = Matrix::zeros(w.rows(), w.cols());
    for i in 0..w.rows() {
        for j in 0..w.cols() {
            let mut wp = w.clone();
            wp[(i, j)] += h;
            let mut wm = w.clone();
            wm[(i, j)] -= h;
            fd[(i, j)] = (objective_modified(&wp, c, alpha)? - objective_modified(&wm, c, alpha)?)
                / (2.0 * h);
        }
    }
    Ok(fd)
}

/// Natural magnitude of the M2S terms at `(W, C, α)`: `(1+α)‖C‖²max(‖W‖³, ‖W‖⁵)`.
pub fn m2s_scale(w: &Matrix, c: &Matrix, alpha: f64) -> f64 {
    let nw = w.frobenius_norm();
    (1.0 + alpha) * c.frobenius_norm().powi(2) * nw.powi(3).max(nw.powi(5))
}

fn gradcheck(seed: u64) -> Result<(bool, String)> {
    let mut rng = Rng::with_stream(seed, 10);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let n = 2 + (rng.uniform() * 7.0) as usize;
        let m = 1 + (rng.uniform() * n.min(4) as f64) as usize;
        let alpha = [0.0, 1.0, 5.0][k % 3];
        let c = random_spd(n, &mut rng);
        let w = rng.gaussian_matrix(n, m);
        let g = grad_modified(&w, &c, alpha)?;
        let fd = finite_difference_gradient(&w, &c, alpha, 1e-5)?;
        worst = worst.max((&g - &fd).frobenius_norm() / g.frobenius_norm());
    }
    Ok((worst <= 1e-6, format!("50 instances, worst relative error {worst:.3e} (limit 1e-6)")))
}

fn reduction(seed: u64) -> Result<(bool, String)> {
    let mut rng = Rng::with_stream(seed, 11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = random_spd(10, &mut rng);
        let w = rng.gaussian_matrix(10, 4).scale(0.5);
        let a = rule_rhs(&RuleSpec::m2s(0.0), &w, &c)?;
        let b = rule_rhs(&RuleSpec::N2S, &w, &c)?;
        worst = worst.max((&a - &b).frobenius_norm() / m2s_scale(&w, &c, 0.0));
    }
    Ok((worst <= 1e-14, format!("M2S(0) vs N2S, worst scaled difference {worst:.3e} (limit 1e-14)")))
}

fn arrangement_identity(seed: u64, form1: Form1Fn) -> Result<(bool, String)> {
    let mut rng = Rng::with_stream(seed, 12);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = random_spd(10, &mut rng);
        let w = rng.gaussian_matrix(10, 4).scale(0.5);
        let alpha = 20.0 * rng.uniform();
        let f1 = form1(&w, &c, alpha)?;
        let f2 = rule_rhs(&RuleSpec::m2s(alpha), &w, &c)?;
        worst = worst.max((&f1 - &f2).frobenius_norm() / m2s_scale(&w, &c, alpha));
    }
    Ok((worst <= 1e-12, format!("form1 vs form2, worst scaled difference {worst:.3e} (limit 1e-12)")))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn fixed_point(seed: u64) -> Result<(bool, String)> {
    let model = spaced_model(seed)?;
    let specs = [
        RuleSpec::N2S,
        RuleSpec::m2s(1.0),
        RuleSpec::m2s(5.0),
        RuleSpec::m2s(20.0),
    ];
    let mut worst = 0.0f64;
    let sets = subsets(6, 4);
    for sel in &sets {
        let w = desired_fixed_point(&model, sel)?;
        for spec in &specs {
            worst = worst.max(rule_rhs(spec, &w, model.covariance())?.frobenius_norm());
        }
    }
    Ok((
        worst <= 1e-10,
        format!("{} selections x {} rules, worst ‖Ẇ‖ {worst:.3e} (limit 1e-10)", sets.len(), specs.len()),
    ))
}

fn constraints(seed: u64) -> Result<(bool, String)> {
    let model = spaced_model(seed)?;
    let mut worst = 0.0f64;
    for sel in subsets(6, 4) {
        let w = desired_fixed_point(&model, &sel)?;
        let blocks = constraint_blocks(&w, &model)?;
        for alpha in [0.0, 1.0, 2.0, 5.0, 10.0, 20.0] {
            let r = check_fixed_point_constraints(&blocks, alpha);
            worst = worst.max(r.sd).max(r.t);
        }
    }
    Ok((worst <= 1e-10, format!("worst residual {worst:.3e} (limit 1e-10)")))
}

fn stability(seed: u64) -> Result<(bool, String)> {
    let model = spaced_model(seed)?;
    let n = model.dim();
    let top = [0, 1, 2, 3];
    let mut rng = Rng::with_stream(seed, 13);
    let mut failures = Vec::new();

    for alpha in [0.0, 5.0, 20.0] {
        for _ in 0..100 {
            let probe = StabilityProbe::random(&top, n, 1e-3, &mut rng)?;
            let o = evaluate_probe(&model, &probe, alpha)?;
            if !(o.measured < 0.0) {
                failures.push(format!("ΔJ = {:e} >= 0 at the principal fixed point (α={alpha})", o.measured));
                break;
            }
        }
    }

    let undesired = [0, 1, 2, 4];
    let probe = StabilityProbe::coupling(&undesired, n, 3, 3, 1e-3)?;
    for alpha in [0.0, 5.0, 20.0] {
        let o = evaluate_probe(&model, &probe, alpha)?;
        if !(o.measured > 0.0) {
            failures.push(format!("ΔJ = {:e} <= 0 at the undesired fixed point (α={alpha})", o.measured));
        }
    }

    let base = StabilityProbe::random(&top, n, 0.0, &mut rng)?;
    for alpha in [0.0, 5.0, 20.0] {
        let err = |eps: f64| -> Result<f64> {
            let o = evaluate_probe(&model, &base.with_epsilon(eps), alpha)?;
            Ok((o.measured - o.predicted).abs())
        };
        let (e1, e2, e3) = (err(1e-2)?, err(5e-3)?, err(2.5e-3)?);
        for ratio in [e1 / e2, e2 / e3] {
            if !(6.0..=10.0).contains(&ratio) {
                failures.push(format!("third-order ratio {ratio:.2} outside [6, 10] (α={alpha})"));
            }
        }
    }

    let a_only = StabilityProbe::rotation(&top, n, 0, 1, 1e-3)?;
    let lh = model.selected_lambdas(&top);
    let lc = model.selected_lambdas(&model.complement(&top));
    let p0 = delta_j_predicted_special(&lh, &lc, &a_only.step_a, &a_only.step_b, 1e-3, 0.0)?;
    let p20 = delta_j_predicted_special(&lh, &lc, &a_only.step_a, &a_only.step_b, 1e-3, 20.0)?;
    if ((p20 / p0) - 21.0).abs() > 21.0 * 1e-9 {
        failures.push(format!("steepness ratio {} != 21", p20 / p0));
    }

    Ok(if failures.is_empty() {
        (true, "signs, third-order accuracy and (1+α) scaling hold".into())
    } else {
        (false, failures.join("; "))
    })
}

fn near_stiefel(seed: u64) -> Result<(bool, String)> {
    let model = spaced_model(seed)?;
    let c = model.covariance();
    let mut rng = Rng::with_stream(seed, 14);
    let mut worst = 0.0f64;
    for target in [1e-6f64, 1e-7, 1e-8] {
        let w0 = random_stiefel(10, 4, &mut rng)?;
        // Grow the columns slightly: WᵀW = (1+δ)²I, ‖WᵀW − I‖_F = 2(2δ+δ²).
        let delta = (1.0 + target / 2.0).sqrt() - 1.0;
        let w = w0.scale(1.0 + delta);
        let eps = (&w.tr_matmul(&w) - &Matrix::identity(4)).frobenius_norm();
        let nl = rule_rhs(&RuleSpec::NL, &w, c)?;
        let nse = rule_rhs(&RuleSpec::NSE, &w, c)?;
        let d_norm = Matrix::from_diag(&w.tr_matmul(&c.matmul(&w)).diagonal()).frobenius_norm();
        let bound = 10.0 * eps * c.frobenius_norm() * d_norm;
        worst = worst.max((&nl - &nse).frobenius_norm() / bound);
    }
    Ok((worst <= 1.0, format!("‖NL − NSE‖ / (10 ε ‖C‖ ‖D‖) at most {worst:.3e} (limit 1)")))
}
