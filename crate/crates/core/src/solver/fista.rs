use ndarray::{Array2, ArrayView2, Zip};

use super::{kkt_from_gradient, objective, soft_threshold, SolverResult, SolverSettings, StepRule};
use crate::design::LassoProblem;
use crate::error::{Result, VarxError};

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 1000;
const MAX_STALLS: usize = 3;

/// Top eigenvalue of a symmetric PSD matrix, or `None` if the iteration cap is hit.
fn power_iteration(gram: &Array2<f64>) -> Option<f64> {
    let n = gram.nrows();
    if n == 0 {
        return Some(0.0);
    }
    let mut v = Array2::from_shape_fn((n, 1), |(i, _)| 1.0 + i as f64 / n as f64);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = gram.dot(&v);
        let next = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if next == 0.0 {
            return Some(0.0);
        }
        v = w / next;
        if (next - estimate).abs() <= POWER_TOL * next {
            return Some(next);
        }
        estimate = next;
    }
    None
}

/// Quadratic part of the objective in Gram form: gradient = G·B − C.
struct Smooth<'a> {
    problem: &'a LassoProblem,
    gram: Array2<f64>,
    cross: Array2<f64>,
}

impl<'a> Smooth<'a> {
    fn new(problem: &'a LassoProblem) -> Self {
        let n = problem.n_rows() as f64;
        let z = problem.design();
        Self {
            problem,
            gram: z.t().dot(&z) / n,
            cross: z.t().dot(&problem.response()) / n,
        }
    }

    fn gradient(&self, b: &Array2<f64>) -> Array2<f64> {
        self.gram.dot(b) - &self.cross
    }

    fn loss(&self, b: &Array2<f64>) -> f64 {
        let resid = &self.problem.response() - &self.problem.design().dot(b);
        resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * self.problem.n_rows() as f64)
    }
}

fn prox_step(point: &Array2<f64>, grad: &Array2<f64>, lipschitz: f64, lambda: f64) -> Array2<f64> {
    let tau = lambda / lipschitz;
    let mut out = point.clone();
    Zip::from(&mut out)
        .and(grad)
        .for_each(|o, &g| *o = soft_threshold(*o - g / lipschitz, tau));
    out
}

/// Reusable solver state for one problem: the Gram matrices and step size.
pub(crate) struct Fista<'a> {
    smooth: Smooth<'a>,
    settings: SolverSettings,
    rule: StepRule,
    lipschitz: f64,
}

impl<'a> Fista<'a> {
    pub(crate) fn new(problem: &'a LassoProblem, settings: &SolverSettings) -> Result<Self> {
        settings.validate()?;
        let smooth = Smooth::new(problem);
        let (rule, lipschitz) = match settings.step {
            StepRule::Lipschitz => match power_iteration(&smooth.gram) {
                Some(l) if l > 0.0 => (StepRule::Lipschitz, l),
                Some(_) => (StepRule::Lipschitz, 1.0),
                None => {
                    log::warn!("power iteration did not converge; falling back to backtracking");
                    (StepRule::Backtracking, 1.0)
                }
            },
            StepRule::Backtracking => (StepRule::Backtracking, 1.0),
        };
        Ok(Self {
            smooth,
            settings: *settings,
            rule,
            lipschitz,
        })
    }

    /// One proximal gradient step from `point`; backtracking may raise `lipschitz`.
    fn step_from(&self, point: &Array2<f64>, lipschitz: &mut f64, lambda: f64) -> Array2<f64> {
        let grad = self.smooth.gradient(point);
        match self.rule {
            StepRule::Lipschitz => prox_step(point, &grad, *lipschitz, lambda),
            StepRule::Backtracking => {
                let base = self.smooth.loss(point);
                loop {
                    let next = prox_step(point, &grad, *lipschitz, lambda);
                    let diff = &next - point;
                    let bound = base
                        + (&grad * &diff).sum()
                        + 0.5 * *lipschitz * diff.iter().map(|d| d * d).sum::<f64>();
                    if self.smooth.loss(&next) <= bound * (1.0 + 1e-12) || !lipschitz.is_finite() {
                        return next;
                    }
                    *lipschitz *= 2.0;
                }
            }
        }
    }

    pub(crate) fn solve(&self, lambda: f64, warm_start: Option<ArrayView2<'_, f64>>) -> Result<SolverResult> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(VarxError::BadGrid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let problem = self.smooth.problem;
        let shape = (problem.n_columns(), problem.n_responses());
        let start = match warm_start {
            Some(w) if w.dim() != shape => {
                return Err(VarxError::ShapeMismatch(format!(
                    "warm start is {:?}, problem needs {shape:?}",
                    w.dim()
                )))
            }
            Some(w) => w.to_owned(),
            None => Array2::zeros(shape),
        };

        let eval = |b: &Array2<f64>| -> Result<f64> {
            let f = objective(problem, b.view(), lambda)?;
            if f.is_finite() {
                Ok(f)
            } else {
                Err(VarxError::NonFinite(format!("objective diverged at lambda={lambda}")))
            }
        };

        let settings = &self.settings;
        let mut lipschitz = self.lipschitz;
        let mut current = start;
        let mut f_current = eval(&current)?;
        let mut y = current.clone();
        let mut t = 1.0f64;
        let mut trace = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        let mut stalls = 0;

        while iterations < settings.max_iter {
            iterations += 1;
            let mut next = self.step_from(&y, &mut lipschitz, lambda);
            let mut f_next = eval(&next)?;
            if settings.monotone && f_next > f_current {
                t = 1.0;
                next = self.step_from(&current, &mut lipschitz, lambda);
                f_next = eval(&next)?;
                if f_next > f_current {
                    next = current.clone();
                    f_next = f_current;
                }
            }
            trace.push(f_next);

            let change = (f_current - f_next).abs();
            let scale = f_current.abs().max(f_next.abs());
            if change <= settings.tol * scale {
                let grad = self.smooth.gradient(&next);
                if kkt_from_gradient(next.view(), grad.view(), lambda).passes(lambda) {
                    current = next;
                    converged = true;
                    break;
                }
                stalls = if change == 0.0 { stalls + 1 } else { 0 };
                y = next.clone();
                t = 1.0;
                current = next;
                f_current = f_next;
                if stalls >= MAX_STALLS {
                    log::debug!("stalled at lambda={lambda} after {iterations} iterations");
                    break;
                }
                continue;
            }
            stalls = 0;

            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            y = &next + &((&next - &current) * momentum);
            current = next;
            f_current = f_next;
            t = t_next;
        }

        Ok(SolverResult {
            coefficients: current,
            objective_trace: trace,
            iterations,
            converged,
            lambda,
        })
    }
}

/// Solve the penalized problem at one `lambda`, optionally from a warm start.
pub fn fit(
    problem: &LassoProblem,
    lambda: f64,
    settings: &SolverSettings,
    warm_start: Option<ArrayView2<'_, f64>>,
) -> Result<SolverResult> {
    Fista::new(problem, settings)?.solve(lambda, warm_start)
}

/// Solve along a strictly descending grid, warm-starting each fit from the previous.
pub fn fit_path(problem: &LassoProblem, grid: &[f64], settings: &SolverSettings) -> Result<Vec<SolverResult>> {
    validate_grid(grid)?;
    let solver = Fista::new(problem, settings)?;
    let mut results: Vec<SolverResult> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let warm = results.last().map(|r| r.coefficients.view());
        let result = solver.solve(lambda, warm)?;
        results.push(result);
    }
    Ok(results)
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(VarxError::BadGrid("empty grid".into()));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(VarxError::BadGrid("penalties must be finite and >= 0".into()));
    }
    if grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(VarxError::BadGrid("grid must be strictly descending".into()));
    }
    Ok(())
}
