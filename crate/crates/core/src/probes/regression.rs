//! Linear probes: ridge-stabilized least squares and Itakura-Saito regression of
//! log-power by Newton's method.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, cholesky_solve};
use crate::error::{Error, Result};

/// Relative ridge strength: `lambda = RIDGE_SCALE * trace(X^T X) / d`.
pub const RIDGE_SCALE: f64 = 1e-6;
pub const IS_NEWTON_ITERATIONS: usize = 2;
pub const SPECTRAL_FLOOR: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Ols,
    ItakuraSaito,
}

/// `targets ~ inputs . weights + bias`. For Itakura-Saito fits the output is log power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    /// `[input_dim x output_dim]`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub objective: Objective,
    pub ridge: f64,
}

impl RegressionModel {
    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict(&self, inputs: ArrayView2<f64>) -> Array2<f64> {
        inputs.dot(&self.weights) + &self.bias
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

fn check_shapes(inputs: &ArrayView2<f64>, targets: &ArrayView2<f64>) -> Result<()> {
    let (n, d) = inputs.dim();
    if targets.nrows() != n {
        return Err(Error::invalid(format!(
            "{n} input rows but {} target rows",
            targets.nrows()
        )));
    }
    if n <= d {
        return Err(Error::insufficient("observations (more than input dims)", d + 1, n));
    }
    if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression data contains non-finite values"));
    }
    Ok(())
}

/// Least squares with an intercept, solved on centered normal equations.
pub fn ols_fit(inputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<RegressionModel> {
    ols_fit_with(inputs, targets, true)
}

/// With `ridge = false` a singular design is reported as [`Error::Numeric`].
pub fn ols_fit_with(
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    ridge: bool,
) -> Result<RegressionModel> {
    check_shapes(&inputs, &targets)?;
    let d = inputs.ncols();
    let x_mean = inputs.mean_axis(Axis(0)).expect("nonempty");
    let y_mean = targets.mean_axis(Axis(0)).expect("nonempty");
    let xc = &inputs - &x_mean;
    let yc = &targets - &y_mean;
    let mut gram = xc.t().dot(&xc);
    let lambda = if ridge {
        RIDGE_SCALE * gram.diag().sum() / d as f64
    } else {
        0.0
    };
    for i in 0..d {
        gram[[i, i]] += lambda;
    }
    let rhs = xc.t().dot(&yc);
    let l = cholesky(&gram).map_err(|e| {
        if ridge {
            e
        } else {
            Error::Numeric(format!("rank-deficient inputs without ridge: {e}"))
        }
    })?;
    let weights = cholesky_solve(&l, rhs.view());
    let bias = &y_mean - &x_mean.dot(&weights);
    Ok(RegressionModel {
        weights,
        bias,
        objective: Objective::Ols,
        ridge: lambda,
    })
}

pub fn is_divergence(p: f64, p_hat: f64) -> f64 {
    let r = p / p_hat;
    r - r.ln() - 1.0
}

/// Mean Itakura-Saito divergence between powers and `exp(log_pred)`.
pub fn mean_is_divergence(power: ArrayView2<f64>, log_pred: ArrayView2<f64>) -> f64 {
    let n = power.len() as f64;
    power
        .iter()
        .zip(log_pred.iter())
        .map(|(&p, &y)| is_divergence(p, y.exp()))
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone)]
pub struct IsFit {
    pub model: RegressionModel,
    /// Mean divergence after initialization and after each Newton iteration.
    pub divergence_history: Vec<f64>,
}

/// Per-bin objective `sum_t p_t exp(-y_t) + y_t`.
fn bin_objective(p: ArrayView1<f64>, y: &Array1<f64>) -> f64 {
    p.iter().zip(y.iter()).map(|(&p, &y)| p * (-y).exp() + y).sum()
}

/// Itakura-Saito regression of log power: OLS on `ln p` followed by exactly
/// `iterations` damped Newton steps per output bin.
pub fn is_regression_fit(
    inputs: ArrayView2<f64>,
    power_targets: ArrayView2<f64>,
    iterations: usize,
) -> Result<IsFit> {
    check_shapes(&inputs, &power_targets)?;
    if let Some(p) = power_targets.iter().find(|&&p| !(p > 0.0)) {
        return Err(Error::invalid(format!(
            "Itakura-Saito targets must be positive (found {p})"
        )));
    }
    let (n, d) = inputs.dim();
    let log_targets = power_targets.mapv(f64::ln);
    let init = ols_fit(inputs, log_targets.view())?;

    // augmented design [inputs | 1]
    let mut design = Array2::<f64>::ones((n, d + 1));
    design.slice_mut(s![.., ..d]).assign(&inputs);
    let mut theta = Array2::<f64>::zeros((d + 1, power_targets.ncols()));
    theta.slice_mut(s![..d, ..]).assign(&init.weights);
    theta.row_mut(d).assign(&init.bias);

    let mut history = vec![mean_is_divergence(power_targets, design.dot(&theta).view())];
    let mut ridge = 0.0f64;
    for _ in 0..iterations {
        for j in 0..theta.ncols() {
            let p = power_targets.column(j);
            let th = theta.column(j).to_owned();
            let y = design.dot(&th);
            let w: Array1<f64> = p.iter().zip(y.iter()).map(|(&p, &y)| p * (-y).exp()).collect();
            let grad = design.t().dot(&(1.0 - &w));
            let weighted = &design * &w.view().insert_axis(Axis(1));
            let mut hess = design.t().dot(&weighted);
            let lambda = RIDGE_SCALE * hess.diag().sum() / (d + 1) as f64;
            ridge = ridge.max(lambda);
            for i in 0..=d {
                hess[[i, i]] += lambda;
            }
            let l = cholesky(&hess)?;
            let step = cholesky_solve(&l, grad.view().insert_axis(Axis(1))).column(0).to_owned();
            let current = bin_objective(p, &y);
            let mut scale = 1.0;
            for _ in 0..MAX_HALVINGS {
                let cand = &th - &(&step * scale);
                let obj = bin_objective(p, &design.dot(&cand));
                if obj <= current {
                    theta.column_mut(j).assign(&cand);
                    break;
                }
                scale *= 0.5;
            }
        }
        history.push(mean_is_divergence(power_targets, design.dot(&theta).view()));
    }
    Ok(IsFit {
        model: RegressionModel {
            weights: theta.slice(s![..d, ..]).to_owned(),
            bias: theta.row(d).to_owned(),
            objective: Objective::ItakuraSaito,
            ridge,
        },
        divergence_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn exactly_linear_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&mut rng, 200, 6);
        let w = random(&mut rng, 6, 2);
        let y = x.dot(&w) + 0.3;
        let m = ols_fit(x.view(), y.view()).unwrap();
        let pred = m.predict(x.view());
        for j in 0..2 {
            let snr = super::super::snr_db(
                &y.column(j).to_vec(),
                &pred.column(j).to_vec(),
            )
            .unwrap();
            assert!(snr >= 100.0, "{snr}");
        }
    }

    #[test]
    fn constant_targets_give_intercept_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(&mut rng, 100, 4);
        let y = Array2::from_elem((100, 1), 2.5);
        let m = ols_fit(x.view(), y.view()).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-12));
        assert!((m.bias[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_without_ridge_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = random(&mut rng, 50, 3);
        let c0 = x.column(0).to_owned();
        x.column_mut(2).assign(&c0);
        let y = random(&mut rng, 50, 1);
        assert!(matches!(ols_fit_with(x.view(), y.view(), false), Err(Error::Numeric(_))));
        assert!(ols_fit_with(x.view(), y.view(), true).is_ok());
    }

    #[test]
    fn residuals_nearly_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(&mut rng, 300, 5);
        let y = random(&mut rng, 300, 1);
        let m = ols_fit(x.view(), y.view()).unwrap();
        let r = &y - &m.predict(x.view());
        let xc = &x - &x.mean_axis(Axis(0)).unwrap();
        let proj = xc.t().dot(&r);
        assert!(proj.iter().all(|v| v.abs() < 1e-3), "{proj}");
    }

    #[test]
    fn is_distance_formula() {
        assert!((is_divergence(2.0, 1.0) - (2.0 - 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((is_divergence(2.0, 1.0) - 0.3069).abs() < 1e-4);
        assert_eq!(is_divergence(3.0, 3.0), 0.0);
    }

    #[test]
    fn exp_linear_targets_are_fit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&mut rng, 300, 4);
        let w = random(&mut rng, 4, 3);
        let p = (x.dot(&w) - 1.0).mapv(f64::exp);
        let fit = is_regression_fit(x.view(), p.view(), 2).unwrap();
        assert!(*fit.divergence_history.last().unwrap() < 1e-6);
    }

    #[test]
    fn is_rejects_non_positive_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random(&mut rng, 30, 2);
        let mut p = Array2::from_elem((30, 1), 1.0);
        p[[4, 0]] = 0.0;
        assert!(matches!(is_regression_fit(x.view(), p.view(), 2), Err(Error::InvalidInput(_))));
    }
}
