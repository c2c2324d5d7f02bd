//! ℓ1-penalized multivariate least squares:
//!
//! minimize (1/(2N)) ‖R − Z·B‖²_F + λ‖B‖₁
//!
//! solved by accelerated proximal gradient (FISTA) with warm-started λ paths.

mod fista;

pub use fista::{fit, fit_path};
pub(crate) use fista::validate_grid;

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::design::LassoProblem;
use crate::error::{Result, VarxError};

/// Relative slack allowed in the KKT certificate.
pub const KKT_REL_TOL: f64 = 1e-3;
/// Absolute slack allowed on nonzero coefficients.
pub const KKT_ABS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// Fixed step 1/L with L the top eigenvalue of ZᵀZ/N (power iteration).
    Lipschitz,
    /// Backtracking line search on the quadratic upper bound.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Stop when the relative objective change falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub step: StepRule,
    /// Restart momentum whenever the objective would increase.
    pub monotone: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 10_000,
            step: StepRule::Lipschitz,
            monotone: true,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iter == 0 {
            return Err(VarxError::InvalidSpec(format!(
                "solver needs tol > 0 and max_iter >= 1, got tol={} max_iter={}",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    /// `(columns of Z) x (responses)`.
    pub coefficients: Array2<f64>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub lambda: f64,
}

impl SolverResult {
    pub fn nonzeros(&self) -> usize {
        self.coefficients.iter().filter(|&&v| v != 0.0).count()
    }
}

/// Proximal operator of `tau * |x|`.
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    debug_assert!(tau >= 0.0);
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

fn check_shape(problem: &LassoProblem, b: ArrayView2<'_, f64>) -> Result<()> {
    let want = (problem.n_columns(), problem.n_responses());
    if b.dim() != want {
        return Err(VarxError::ShapeMismatch(format!(
            "coefficients are {:?}, problem needs {want:?}",
            b.dim()
        )));
    }
    Ok(())
}

/// `(1/(2N)) ‖R − Z·B‖²_F`.
pub fn smooth_loss(problem: &LassoProblem, b: ArrayView2<'_, f64>) -> Result<f64> {
    check_shape(problem, b)?;
    let resid = &problem.response() - &problem.design().dot(&b);
    Ok(resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * problem.n_rows() as f64))
}

/// Gradient of [`smooth_loss`]: `(1/N) Zᵀ(Z·B − R)`.
pub fn smooth_gradient(problem: &LassoProblem, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_shape(problem, b)?;
    let resid = &problem.design().dot(&b) - &problem.response();
    Ok(problem.design().t().dot(&resid) / problem.n_rows() as f64)
}

pub fn l1_norm(b: ArrayView2<'_, f64>) -> f64 {
    b.iter().map(|v| v.abs()).sum()
}

/// Penalized objective at `b`.
pub fn objective(problem: &LassoProblem, b: ArrayView2<'_, f64>, lambda: f64) -> Result<f64> {
    Ok(smooth_loss(problem, b)? + lambda * l1_norm(b))
}

/// Smallest λ at which the all-zero matrix is optimal: `(1/N) max |Zᵀ R|`.
pub fn lambda_max(problem: &LassoProblem) -> f64 {
    problem
        .design()
        .t()
        .dot(&problem.response())
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        / problem.n_rows() as f64
}

/// `count` log-spaced penalties from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_grid(problem: &LassoProblem, count: usize, ratio: f64) -> Result<Vec<f64>> {
    log_spaced(lambda_max(problem), count, ratio)
}

pub(crate) fn log_spaced(top: f64, count: usize, ratio: f64) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(VarxError::BadGrid(format!("need at least 2 points, got {count}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(VarxError::BadGrid(format!("ratio must be in (0, 1), got {ratio}")));
    }
    if !(top > 0.0 && top.is_finite()) {
        return Err(VarxError::BadGrid(format!("lambda_max is {top}")));
    }
    let last = count - 1;
    Ok((0..count)
        .map(|i| match i {
            0 => top,
            i if i == last => top * ratio,
            i => top * ratio.powf(i as f64 / last as f64),
        })
        .collect())
}

/// Largest subgradient-condition violations at `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// max over zero entries of |g_ij| (must be ≤ λ).
    pub zero_max_gradient: f64,
    /// max over nonzero entries of |g_ij + λ·sign(b_ij)| (must be ≈ 0).
    pub nonzero_max_residual: f64,
}

impl KktReport {
    pub fn passes(&self, lambda: f64) -> bool {
        self.zero_max_gradient <= lambda * (1.0 + KKT_REL_TOL)
            && self.nonzero_max_residual <= lambda * KKT_REL_TOL + KKT_ABS_TOL
    }
}

pub(crate) fn kkt_from_gradient(b: ArrayView2<'_, f64>, grad: ArrayView2<'_, f64>, lambda: f64) -> KktReport {
    let mut report = KktReport {
        zero_max_gradient: 0.0,
        nonzero_max_residual: 0.0,
    };
    Zip::from(b).and(grad).for_each(|&bij, &gij| {
        if bij == 0.0 {
            report.zero_max_gradient = report.zero_max_gradient.max(gij.abs());
        } else {
            report.nonzero_max_residual =
                report.nonzero_max_residual.max((gij + lambda * bij.signum()).abs());
        }
    });
    report
}

/// Optimality certificate for `b` at penalty `lambda`.
pub fn kkt_check(problem: &LassoProblem, b: ArrayView2<'_, f64>, lambda: f64) -> Result<KktReport> {
    let grad = smooth_gradient(problem, b)?;
    Ok(kkt_from_gradient(b, grad.view(), lambda))
}
