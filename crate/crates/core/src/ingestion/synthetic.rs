use chrono::NaiveDate;
use faer::Mat;
use ndarray::{s, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::exogenous::{exogenous_label, ExogenousKind};
use super::regions::CENSUS_REGIONS;
use crate::error::{Result, VarxError};
use crate::timeseries::{MultivariateSeries, TimeIndex};

const BURN_IN: usize = 200;

/// Parameters of a synthetic VAR-X process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub k: usize,
    pub m: usize,
    pub weeks: usize,
    pub p: usize,
    pub s: usize,
    /// Probability that any coefficient is nonzero.
    pub sparsity: f64,
    /// Spectral radius of the companion matrix after rescaling.
    pub spectral_radius: f64,
    pub noise_std: f64,
    /// Multiplier on the exogenous coefficients; 0 gives a pure VAR response.
    pub exogenous_scale: f64,
    pub seed: u64,
    pub start: NaiveDate,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            k: 9,
            m: 18,
            weeks: 178,
            p: 2,
            s: 1,
            sparsity: 0.2,
            spectral_radius: 0.8,
            noise_std: 0.5,
            exogenous_scale: 1.0,
            seed: 0,
            start: NaiveDate::from_ymd_opt(2013, 1, 5).expect("valid date"),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(VarxError::InvalidSpec(msg));
        if self.k == 0 || self.m == 0 || self.weeks == 0 || self.p == 0 || self.s == 0 {
            return bad("k, m, weeks, p and s must all be >= 1".into());
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return bad(format!("sparsity must be in (0, 1], got {}", self.sparsity));
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius < 1.0) {
            return bad(format!(
                "spectral radius must be in (0, 1), got {}",
                self.spectral_radius
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise std must be >= 0, got {}", self.noise_std));
        }
        if !(self.exogenous_scale >= 0.0 && self.exogenous_scale.is_finite()) {
            return bad(format!(
                "exogenous scale must be >= 0, got {}",
                self.exogenous_scale
            ));
        }
        Ok(())
    }
}

/// Simulated series together with the coefficients that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub y: MultivariateSeries,
    pub x: MultivariateSeries,
    /// `theta[i]` multiplies `y[t - 1 - i]`.
    pub theta: Vec<Array2<f64>>,
    /// `beta[j]` multiplies `x[t - 1 - j]`.
    pub beta: Vec<Array2<f64>>,
}

/// Largest eigenvalue modulus of the VAR companion matrix.
pub fn companion_spectral_radius(theta: &[Array2<f64>]) -> f64 {
    let Some(first) = theta.first() else {
        return 0.0;
    };
    let k = first.nrows();
    let p = theta.len();
    let n = k * p;
    let companion = Mat::<f64>::from_fn(n, n, |r, c| {
        if r < k {
            theta[c / k][[r, c % k]]
        } else if c + k == r {
            1.0
        } else {
            0.0
        }
    });
    companion
        .eigenvalues()
        .expect("eigendecomposition of companion matrix")
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Run the VAR-X recursion with zero pre-sample values.
///
/// `x` is m×n and `innovations` is k×n; the result is k×n.
pub fn simulate_varx(
    theta: &[Array2<f64>],
    beta: &[Array2<f64>],
    x: ArrayView2<'_, f64>,
    innovations: ArrayView2<'_, f64>,
) -> Array2<f64> {
    let (k, n) = innovations.dim();
    let mut y = Array2::<f64>::zeros((k, n));
    for t in 0..n {
        let mut next = innovations.column(t).to_owned();
        for (i, lag) in theta.iter().enumerate() {
            if t > i {
                next += &lag.dot(&y.column(t - 1 - i));
            }
        }
        for (j, lag) in beta.iter().enumerate() {
            if t > j {
                next += &lag.dot(&x.column(t - 1 - j));
            }
        }
        y.column_mut(t).assign(&next);
    }
    y
}

fn draw_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Array2<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Array2::from_shape_simple_fn((rows, cols), || {
        let keep = rng.random_bool(density);
        let v = normal.sample(rng);
        if keep {
            v
        } else {
            0.0
        }
    })
}

fn labels(spec: &SyntheticSpec) -> (Vec<String>, Vec<String>) {
    if spec.k == CENSUS_REGIONS.len() {
        let y = CENSUS_REGIONS.iter().map(|r| r.to_string()).collect();
        let x = if spec.m == 2 * CENSUS_REGIONS.len() {
            [ExogenousKind::Query, ExogenousKind::Url]
                .iter()
                .flat_map(|&kind| CENSUS_REGIONS.iter().map(move |r| exogenous_label(r, kind)))
                .collect()
        } else {
            (1..=spec.m).map(|j| format!("x{j}")).collect()
        };
        (y, x)
    } else {
        (
            (1..=spec.k).map(|i| format!("y{i}")).collect(),
            (1..=spec.m).map(|j| format!("x{j}")).collect(),
        )
    }
}

/// Draw a stable sparse VAR-X process and simulate it.
///
/// The autoregressive lags are rescaled so the companion spectral radius equals
/// `spec.spectral_radius`; scaling lag `i` by `c^i` scales every companion
/// eigenvalue by `c`. Each exogenous row is an independent AR(1).
pub fn generate_synthetic_varx(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (k, m) = (spec.k, spec.m);

    let mut theta = Vec::new();
    let mut radius = 0.0;
    for _ in 0..100 {
        theta = (0..spec.p)
            .map(|_| draw_sparse(&mut rng, k, k, spec.sparsity))
            .collect();
        radius = companion_spectral_radius(&theta);
        if radius > 1e-8 {
            break;
        }
    }
    if radius <= 1e-8 {
        return Err(VarxError::InvalidSpec(
            "could not draw autoregressive coefficients with nonzero dynamics".into(),
        ));
    }
    let c = spec.spectral_radius / radius;
    for (i, lag) in theta.iter_mut().enumerate() {
        lag.mapv_inplace(|v| v * c.powi(i as i32 + 1));
    }

    let beta: Vec<Array2<f64>> = (0..spec.s)
        .map(|_| draw_sparse(&mut rng, k, m, spec.sparsity) * spec.exogenous_scale)
        .collect();

    let n = BURN_IN + spec.weeks;
    let persistence = Uniform::new(0.2, 0.8).expect("valid range");
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let phi: Vec<f64> = (0..m).map(|_| persistence.sample(&mut rng)).collect();
    let mut x = Array2::<f64>::zeros((m, n));
    for t in 0..n {
        for j in 0..m {
            let prev = if t > 0 { x[[j, t - 1]] } else { 0.0 };
            x[[j, t]] = phi[j] * prev + unit.sample(&mut rng);
        }
    }
    let noise = Normal::new(0.0, spec.noise_std).expect("noise std validated");
    let innovations = Array2::from_shape_simple_fn((k, n), || noise.sample(&mut rng));
    let y = simulate_varx(&theta, &beta, x.view(), innovations.view());

    let index = TimeIndex::new(spec.start, spec.weeks);
    let (y_labels, x_labels) = labels(spec);
    Ok(SyntheticData {
        y: MultivariateSeries::new(y_labels, index, y.slice(s![.., BURN_IN..]).to_owned())?,
        x: MultivariateSeries::new(x_labels, index, x.slice(s![.., BURN_IN..]).to_owned())?,
        theta,
        beta,
    })
}
