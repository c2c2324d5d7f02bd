use ndarray::{Array2, Axis};

use super::VarxModel;
use crate::ingestion::census_order;

/// Coefficient magnitudes per lag, ready for heatmap output.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    /// Row labels shared by every matrix (response series).
    pub row_labels: Vec<String>,
    /// Column labels of the autoregressive matrices.
    pub theta_labels: Vec<String>,
    /// Column labels of the exogenous matrices.
    pub beta_labels: Vec<String>,
    pub theta: Vec<Array2<f64>>,
    pub beta: Vec<Array2<f64>>,
    pub theta_nonzeros: Vec<usize>,
    pub beta_nonzeros: Vec<usize>,
}

impl SparsityPattern {
    pub fn total_nonzeros(&self) -> usize {
        self.theta_nonzeros.iter().chain(&self.beta_nonzeros).sum()
    }
}

fn magnitudes(m: &Array2<f64>, threshold: f64) -> (Array2<f64>, usize) {
    let out = m.mapv(|v| if v.abs() < threshold { 0.0 } else { v.abs() });
    let count = out.iter().filter(|&&v| v != 0.0).count();
    (out, count)
}

impl VarxModel {
    /// `|coefficient|` per lag with entries below `threshold` zeroed.
    ///
    /// When the response series are the nine census divisions, rows and
    /// autoregressive columns are put in canonical division order.
    pub fn sparsity_pattern(&self, threshold: f64) -> SparsityPattern {
        let labels = self.response_labels();
        let order = census_order(labels);
        let reorder_rows = |m: &Array2<f64>| m.select(Axis(0), &order);

        let (theta, theta_nonzeros) = self
            .theta()
            .iter()
            .map(|t| magnitudes(&reorder_rows(t).select(Axis(1), &order), threshold))
            .unzip();
        let (beta, beta_nonzeros) = self
            .beta()
            .iter()
            .map(|b| magnitudes(&reorder_rows(b), threshold))
            .unzip();
        let row_labels: Vec<String> = order.iter().map(|&i| labels[i].clone()).collect();
        SparsityPattern {
            theta_labels: row_labels.clone(),
            row_labels,
            beta_labels: self.exogenous_labels().to_vec(),
            theta,
            beta,
            theta_nonzeros,
            beta_nonzeros,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::CENSUS_REGIONS;
    use crate::design::{build_design, DesignOptions, Lags};
    use crate::ingestion::{generate_synthetic_varx, SyntheticSpec};
    use crate::model::{ModelContext, Variant};
    use crate::solver::{fit, lambda_max, SolverSettings};
    use ndarray::array;

    #[test]
    fn threshold_zero_gives_magnitudes() {
        let model = VarxModel::from_coefficients(
            vec![array![[0.5, -0.2], [0.0, 1.5]]],
            vec![],
            vec!["a".into(), "b".into()],
            vec![],
            Variant::D,
        )
        .unwrap();
        let p = model.sparsity_pattern(0.0);
        assert_eq!(p.theta[0], array![[0.5, 0.2], [0.0, 1.5]]);
        assert_eq!(p.theta_nonzeros, vec![3]);
        let p = model.sparsity_pattern(2.0);
        assert!(p.theta[0].iter().all(|&v| v == 0.0));
        assert_eq!(p.total_nonzeros(), 0);
    }

    #[test]
    fn canonical_order() {
        let mut labels: Vec<String> = CENSUS_REGIONS.iter().map(|s| s.to_string()).collect();
        labels.reverse();
        let mut t = Array2::zeros((9, 9));
        // row "South Atlantic" (index 0 here), column "Mid-Atlantic" (index 8 here)
        t[[0, 8]] = 1.0;
        let model = VarxModel::from_coefficients(vec![t], vec![], labels, vec![], Variant::D).unwrap();
        let p = model.sparsity_pattern(0.0);
        assert_eq!(p.row_labels[0], "Mid-Atlantic");
        assert_eq!(p.theta[0][[8, 0]], 1.0);
    }

    #[test]
    fn larger_penalty_is_sparser() {
        let d = generate_synthetic_varx(&SyntheticSpec::default()).unwrap();
        let prob = build_design(&d.y, Some(&d.x), Lags::new(2, 1), DesignOptions::centered()).unwrap();
        let top = lambda_max(&prob);
        let count = |lambda: f64| {
            let res = fit(&prob, lambda, &SolverSettings::default(), None).unwrap();
            let ctx = ModelContext {
                response_labels: d.y.labels().to_vec(),
                exogenous_labels: d.x.labels().to_vec(),
                seasonal: None,
                variant: Variant::C,
            };
            VarxModel::from_solution(&res, prob.layout().unwrap(), ctx)
                .unwrap()
                .sparsity_pattern(0.0)
                .total_nonzeros()
        };
        assert!(count(0.9 * top) < count(0.01 * top));
    }
}
