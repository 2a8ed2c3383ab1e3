//! Objective functions, their Euclidean gradient and the right-hand sides
//! `Ẇ` of the learning rules, all with time constant 1.
//!
//! `W` is `n×m` (one eigenvector estimate per column), `C` is the symmetric
//! `n×n` covariance matrix. Shorthands used below:
//!
//! * `D  = dg{WᵀCW}`
//! * `D* = dg{WᵀCW WᵀW}`
//! * `D′ = (1+α)D − α WᵀCW`

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::linalg::{Matrix, SYMMETRY_TOL};

/// The learning rules that can be integrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RuleSpec {
    /// `CWΘ − WΘWᵀCW` with fixed, strictly increasing positive weights Θ.
    TwJ2S { theta: Vec<f64> },
    /// `CWD − WDWᵀCW`.
    N2S,
    /// `CWD′ − WD′WᵀCW`.
    M2S { alpha: f64 },
    /// `CW − WWᵀCW`.
    Oja,
    /// `5CWD − WWᵀCWD − WDWᵀCW − CWDWᵀW − CWD* − CWWᵀWD`.
    NL,
    /// `2CWD − WWᵀCWD − WDWᵀCW`.
    NSE,
}

/// Tag of a [`RuleSpec`] without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    TwJ2S,
    N2S,
    M2S,
    Oja,
    NL,
    NSE,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::TwJ2S => "twj2s",
            RuleKind::N2S => "n2s",
            RuleKind::M2S => "m2s",
            RuleKind::Oja => "oja",
            RuleKind::NL => "nl",
            RuleKind::NSE => "nse",
        }
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "twj2s" => RuleKind::TwJ2S,
            "n2s" => RuleKind::N2S,
            "m2s" => RuleKind::M2S,
            "oja" => RuleKind::Oja,
            "nl" => RuleKind::NL,
            "nse" => RuleKind::NSE,
            other => return Err(Error::Config(format!("unknown rule `{other}`"))),
        })
    }
}

/// Default TwJ2S weights `Θ = diag{j/m}`, `j = 1..m`.
pub fn default_theta(m: usize) -> Vec<f64> {
    (1..=m).map(|j| j as f64 / m as f64).collect()
}

impl RuleSpec {
    pub fn twj2s(m: usize) -> Self {
        RuleSpec::TwJ2S {
            theta: default_theta(m),
        }
    }

    pub fn m2s(alpha: f64) -> Self {
        RuleSpec::M2S { alpha }
    }

    /// Builds a spec from its kind; `alpha` is used by M2S only, TwJ2S gets
    /// the default weights for `m` columns.
    pub fn from_kind(kind: RuleKind, alpha: f64, m: usize) -> Self {
        match kind {
            RuleKind::TwJ2S => Self::twj2s(m),
            RuleKind::N2S => RuleSpec::N2S,
            RuleKind::M2S => RuleSpec::M2S { alpha },
            RuleKind::Oja => RuleSpec::Oja,
            RuleKind::NL => RuleSpec::NL,
            RuleKind::NSE => RuleSpec::NSE,
        }
    }

    pub fn kind(&self) -> RuleKind {
        match self {
            RuleSpec::TwJ2S { .. } => RuleKind::TwJ2S,
            RuleSpec::N2S => RuleKind::N2S,
            RuleSpec::M2S { .. } => RuleKind::M2S,
            RuleSpec::Oja => RuleKind::Oja,
            RuleSpec::NL => RuleKind::NL,
            RuleSpec::NSE => RuleKind::NSE,
        }
    }

    /// Short label, e.g. `n2s` or `m2s_a5`.
    pub fn label(&self) -> String {
        match self {
            RuleSpec::M2S { alpha } => format!("m2s_a{alpha}"),
            other => other.kind().name().to_string(),
        }
    }

    /// Checks the parameter invariants; `m` is the number of columns the
    /// rule will be applied to.
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            RuleSpec::M2S { alpha } if !(alpha.is_finite() && *alpha >= 0.0) => Err(
                Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")),
            ),
            RuleSpec::TwJ2S { theta } => {
                if theta.len() != m {
                    return Err(Error::Dimension(format!(
                        "theta has {} weights for {m} columns",
                        theta.len()
                    )));
                }
                if theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                    return Err(Error::InvalidArgument("theta weights must be positive".into()));
                }
                if theta.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidArgument(
                        "theta weights must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleSpec::TwJ2S { .. } => f.write_str("TwJ2S"),
            RuleSpec::N2S => f.write_str("N2S"),
            RuleSpec::M2S { alpha } => write!(f, "M2S(alpha={alpha})"),
            RuleSpec::Oja => f.write_str("Oja"),
            RuleSpec::NL => f.write_str("NL"),
            RuleSpec::NSE => f.write_str("NSE"),
        }
    }
}

/// The diagonal weighting factors of the rules.
#[derive(Debug, Clone)]
pub struct DiagonalFactors {
    /// `dg{WᵀCW}`, stored as its diagonal.
    pub d: Vec<f64>,
    /// `dg{WᵀCW WᵀW}`, stored as its diagonal.
    pub d_star: Vec<f64>,
    /// `(1+α)D − αWᵀCW` (symmetric, generally not diagonal).
    pub d_prime: Matrix,
}

fn check_inputs(w: &Matrix, c: &Matrix) -> Result<()> {
    ensure_dims(c.is_square() && c.rows() == w.rows(), || {
        format!(
            "W is {}x{} but C is {}x{}",
            w.rows(),
            w.cols(),
            c.rows(),
            c.cols()
        )
    })?;
    c.check_symmetric(SYMMETRY_TOL)
}

/// Products shared by all rules.
struct Products {
    /// `CW`
    cw: Matrix,
    /// `WᵀCW`
    s: Matrix,
    /// `diag(WᵀCW)`
    d: Vec<f64>,
}

impl Products {
    fn new(w: &Matrix, c: &Matrix) -> Self {
        let cw = c.matmul(w);
        let s = w.tr_matmul(&cw);
        let d = s.diagonal();
        Self { cw, s, d }
    }
}

fn d_prime(s: &Matrix, d: &[f64], alpha: f64) -> Matrix {
    Matrix::from_fn(s.rows(), s.cols(), |j, k| {
        let diag = if j == k { (1.0 + alpha) * d[j] } else { 0.0 };
        diag - alpha * s[(j, k)]
    })
}

/// `J = ¼ Σⱼ (wⱼᵀCwⱼ)²`
pub fn objective_original(w: &Matrix, c: &Matrix) -> Result<f64> {
    check_inputs(w, c)?;
    let p = Products::new(w, c);
    Ok(0.25 * p.d.iter().map(|x| x * x).sum::<f64>())
}

/// `J = ¼ [(1+α) Σⱼ (wⱼᵀCwⱼ)² − α Σⱼₖ (wⱼᵀCwₖ)²]`
pub fn objective_modified(w: &Matrix, c: &Matrix, alpha: f64) -> Result<f64> {
    check_inputs(w, c)?;
    let p = Products::new(w, c);
    let diag: f64 = p.d.iter().map(|x| x * x).sum();
    let full = p.s.frobenius_norm().powi(2);
    Ok(0.25 * ((1.0 + alpha) * diag - alpha * full))
}

/// Euclidean gradient of [`objective_modified`]: `(1+α)CWD − αCWWᵀCW`.
pub fn grad_modified(w: &Matrix, c: &Matrix, alpha: f64) -> Result<Matrix> {
    check_inputs(w, c)?;
    let p = Products::new(w, c);
    let mut g = p.cw.mul_diag(&p.d).scale(1.0 + alpha);
    g.add_scaled(-alpha, &p.cw.matmul(&p.s));
    Ok(g)
}

/// `D`, `D*` and `D′` at `W`.
pub fn compute_factors(w: &Matrix, c: &Matrix, alpha: f64) -> Result<DiagonalFactors> {
    check_inputs(w, c)?;
    let p = Products::new(w, c);
    let d_star = p.s.matmul(&w.tr_matmul(w)).diagonal();
    Ok(DiagonalFactors {
        d_prime: d_prime(&p.s, &p.d, alpha),
        d: p.d,
        d_star,
    })
}

/// `CWX − WXWᵀCW` for a general `m×m` weighting `X`.
fn weighted_symmetric(w: &Matrix, p: &Products, x: &Matrix) -> Matrix {
    let mut out = p.cw.matmul(x);
    out.add_scaled(-1.0, &w.matmul(&x.matmul(&p.s)));
    out
}

/// `CWX − WXWᵀCW` for a diagonal weighting `X = diag(x)`.
fn weighted_symmetric_diag(w: &Matrix, p: &Products, x: &[f64]) -> Matrix {
    let mut out = p.cw.mul_diag(x);
    out.add_scaled(-1.0, &w.matmul(&p.s.diag_mul(x)));
    out
}

/// Right-hand side `Ẇ` of the selected rule at `W`.
pub fn rule_rhs(spec: &RuleSpec, w: &Matrix, c: &Matrix) -> Result<Matrix> {
    check_inputs(w, c)?;
    spec.validate(w.cols())?;
    let p = Products::new(w, c);
    Ok(match spec {
        RuleSpec::TwJ2S { theta } => weighted_symmetric_diag(w, &p, theta),
        RuleSpec::N2S => weighted_symmetric_diag(w, &p, &p.d),
        RuleSpec::M2S { alpha } => {
            let dp = d_prime(&p.s, &p.d, *alpha);
            weighted_symmetric(w, &p, &dp)
        }
        RuleSpec::Oja => {
            let mut out = p.cw.clone();
            out.add_scaled(-1.0, &w.matmul(&p.s));
            out
        }
        RuleSpec::NL => {
            let wtw = w.tr_matmul(w);
            let d_star = p.s.matmul(&wtw).diagonal();
            let cwd = p.cw.mul_diag(&p.d);
            let mut out = cwd.scale(5.0);
            // W WᵀCW D
            out.add_scaled(-1.0, &w.matmul(&p.s.mul_diag(&p.d)));
            // W D WᵀCW
            out.add_scaled(-1.0, &w.matmul(&p.s.diag_mul(&p.d)));
            // CW D WᵀW
            out.add_scaled(-1.0, &cwd.matmul(&wtw));
            // CW D*
            out.add_scaled(-1.0, &p.cw.mul_diag(&d_star));
            // CW WᵀW D
            out.add_scaled(-1.0, &p.cw.matmul(&wtw.mul_diag(&p.d)));
            out
        }
        RuleSpec::NSE => {
            let mut out = p.cw.mul_diag(&p.d).scale(2.0);
            out.add_scaled(-1.0, &w.matmul(&p.s.mul_diag(&p.d)));
            out.add_scaled(-1.0, &w.matmul(&p.s.diag_mul(&p.d)));
            out
        }
    })
}

/// M2S arranged by the common factors `(1+α)` and `−α`:
/// `(1+α)(CWD − WDWᵀCW) − α(CW − WWᵀCW)(WᵀCW)`.
///
/// The second factor is the Oja subspace term, which vanishes at every
/// N2S fixed point.
pub fn m2s_form1_rhs(w: &Matrix, c: &Matrix, alpha: f64) -> Result<Matrix> {
    check_inputs(w, c)?;
    let p = Products::new(w, c);
    let mut out = weighted_symmetric_diag(w, &p, &p.d).scale(1.0 + alpha);
    out.add_scaled(-alpha, &m2s_subspace_term(w, &p));
    Ok(out)
}

/// `(CW − WWᵀCW)(WᵀCW)`
fn m2s_subspace_term(w: &Matrix, p: &Products) -> Matrix {
    let mut oja = p.cw.clone();
    oja.add_scaled(-1.0, &w.matmul(&p.s));
    oja.matmul(&p.s)
}

/// The Oja-factor term `(CW − WWᵀCW)(WᵀCW)` of [`m2s_form1_rhs`] on its own.
pub fn m2s_subspace_factor(w: &Matrix, c: &Matrix) -> Result<Matrix> {
    check_inputs(w, c)?;
    Ok(m2s_subspace_term(w, &Products::new(w, c)))
}
