//! Euler integration of a learning rule with optional back-projection onto
//! the Stiefel manifold, sampling `e_o` and `e_p` along the way.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::linalg::{random_stiefel, sym_inv_sqrt, Matrix, Rng};
use crate::metrics::error_report;
use crate::model::CovarianceModel;
use crate::rules::{rule_rhs, RuleSpec};

/// What happens to `W′ = W + γẆ` after each Euler step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackProjection {
    /// `W′ (W′ᵀW′)^{-1/2}`
    Exact,
    /// `W′ − ½ W (γẆ)ᵀ(γẆ)`
    #[serde(rename = "approx")]
    Approximated,
    None,
}

impl BackProjection {
    pub fn name(self) -> &'static str {
        match self {
            BackProjection::Exact => "exact",
            BackProjection::Approximated => "approx",
            BackProjection::None => "none",
        }
    }
}

impl fmt::Display for BackProjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackProjection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "approx" | "approximated" => Ok(Self::Approximated),
            "none" => Ok(Self::None),
            other => Err(Error::Config(format!("unknown back-projection mode `{other}`"))),
        }
    }
}

/// One integration run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: CovarianceModel,
    pub spec: RuleSpec,
    /// Number of estimated eigenvectors (columns of `W`).
    pub m: usize,
    /// Learning rate `γ = 1/τ`.
    pub gamma: f64,
    pub steps: usize,
    pub subsample: usize,
    pub backprojection: BackProjection,
    /// Seeds the initial `W`; see [`initial_estimate`].
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.subsample == 0 {
            return Err(Error::InvalidArgument("subsample must be >= 1".into()));
        }
        if self.m == 0 || self.m > self.model.dim() {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= m <= n = {}, got m = {}",
                self.model.dim(),
                self.m
            )));
        }
        self.spec.validate(self.m)
    }
}

/// Sampled error measures after `step` Euler steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub e_o: f64,
    pub e_p: f64,
}

/// Covariance model whose eigenbasis is drawn from `seed`.
pub fn seeded_model(lambdas: &[f64], seed: u64) -> Result<CovarianceModel> {
    CovarianceModel::random(lambdas, &mut Rng::with_stream(seed, 0))
}

/// Random semi-orthogonal starting point for `seed`. It depends on `(n, m,
/// seed)` only, so every rule run with the same seed starts from the same `W`.
pub fn initial_estimate(n: usize, m: usize, seed: u64) -> Result<Matrix> {
    random_stiefel(n, m, &mut Rng::with_stream(seed, 1))
}

/// `W′ (W′ᵀW′)^{-1/2}`
pub fn exact_backprojection(wp: &Matrix) -> Result<Matrix> {
    let r = sym_inv_sqrt(&wp.tr_matmul(wp))?;
    Ok(wp.matmul(&r))
}

/// `W′ − ½ W_t ΔᵀΔ` where `Δ = W′ − W_t` is the step that was added
/// (γ included).
pub fn approx_backprojection(wp: &Matrix, w_t: &Matrix, step: &Matrix) -> Result<Matrix> {
    ensure_dims(wp.shape() == w_t.shape() && wp.shape() == step.shape(), || {
        format!(
            "shapes differ: W′ {:?}, W {:?}, step {:?}",
            wp.shape(),
            w_t.shape(),
            step.shape()
        )
    })?;
    let mut out = wp.clone();
    out.add_scaled(-0.5, &w_t.matmul(&step.tr_matmul(step)));
    Ok(out)
}

/// One Euler step `W + γ·Ẇ` followed by the configured back-projection.
/// `step` is the index of the step being taken (for diagnostics).
pub fn euler_step(w: &Matrix, config: &SimConfig, step: usize) -> Result<Matrix> {
    let diverged = |reason: String| Error::Divergence { step, reason };
    if !w.is_finite() {
        return Err(diverged("non-finite estimate before the step".into()));
    }
    let delta = rule_rhs(&config.spec, w, config.model.covariance())?.scale(config.gamma);
    let mut wp = w.clone();
    wp.add_scaled(1.0, &delta);
    if !wp.is_finite() {
        return Err(diverged("non-finite entries after the Euler step".into()));
    }
    let next = match config.backprojection {
        BackProjection::Exact => exact_backprojection(&wp).map_err(|e| match e {
            Error::Singular(min) => {
                diverged(format!("singular Gram matrix (smallest eigenvalue {min:e})"))
            }
            other => diverged(other.to_string()),
        })?,
        BackProjection::Approximated => approx_backprojection(&wp, w, &delta)?,
        BackProjection::None => wp,
    };
    if !next.is_finite() {
        return Err(diverged("non-finite entries after back-projection".into()));
    }
    Ok(next)
}

/// Integrates from [`initial_estimate`] and returns the sampled trace.
pub fn run_simulation(config: &SimConfig) -> Result<Vec<TraceRow>> {
    let w0 = initial_estimate(config.model.dim(), config.m, config.seed)?;
    run_simulation_from(config, w0).map(|(trace, _)| trace)
}

/// Integrates from `w0`; returns the trace and the final estimate.
///
/// Rows are recorded at step 0, every `subsample` steps and at the final step.
pub fn run_simulation_from(config: &SimConfig, w0: Matrix) -> Result<(Vec<TraceRow>, Matrix)> {
    config.validate()?;
    ensure_dims(w0.shape() == (config.model.dim(), config.m), || {
        format!(
            "initial estimate is {}x{}, expected {}x{}",
            w0.rows(),
            w0.cols(),
            config.model.dim(),
            config.m
        )
    })?;
    let v_hat = config.model.principal(config.m)?;
    let sample = |step: usize, w: &Matrix| -> Result<TraceRow> {
        let r = error_report(w, &v_hat)?;
        Ok(TraceRow {
            step,
            e_o: r.e_o,
            e_p: r.e_p,
        })
    };

    let mut trace = Vec::with_capacity(config.steps / config.subsample + 2);
    let mut w = w0;
    trace.push(sample(0, &w)?);
    for t in 1..=config.steps {
        w = euler_step(&w, config, t)?;
        if t % config.subsample == 0 || t == config.steps {
            trace.push(sample(t, &w)?);
        }
    }
    Ok((trace, w))
}
