//! The kernel predictor read as an RKHS representer `sum_i alpha_i K(x - x_i)` with the
//! fixed coefficients `alpha_i = f(x_i) / N`, and its Rademacher-type generalization bounds.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimator::{kernel_weights, predict_scalar, PredictOptions, TrainingSet};
use crate::kernels::KernelSpec;
use crate::param_space::ParamPoint;
use crate::stats::{mean, pairwise_sum};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RkhsBoundInputs {
    /// Bound on the RKHS norm of the predictor.
    pub lambda_f: f64,
    /// `sqrt(sup_x K(x, x))`.
    pub r: f64,
    /// Loss bound `2 lambda_f R`.
    pub beta: f64,
    pub n: usize,
    pub delta: f64,
    /// Trace of the Gram matrix on the training set.
    pub trace_k: f64,
}

impl RkhsBoundInputs {
    pub fn new(lambda_f: f64, r: f64, n: usize, delta: f64, trace_k: f64) -> Result<Self> {
        if !(lambda_f > 0.0 && r > 0.0 && n >= 1) {
            return Err(invalid("lambda_f, R and N must be positive"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        let cap = n as f64 * r * r;
        if !(trace_k >= 0.0 && trace_k <= cap * (1.0 + 1e-12)) {
            return Err(invalid(format!(
                "Gram trace {trace_k} outside [0, N R^2 = {cap}]"
            )));
        }
        Ok(RkhsBoundInputs {
            lambda_f,
            r,
            beta: 2.0 * lambda_f * r,
            n,
            delta,
            trace_k,
        })
    }

    /// Inputs for a translational kernel: `R^2 = K(0)`, `lambda_f = B R / 2` and
    /// `tr K = N K(0)`.
    pub fn for_kernel(spec: &KernelSpec, b: f64, n: usize, delta: f64) -> Result<Self> {
        if b.is_nan() || b <= 0.0 {
            return Err(invalid("B must be positive"));
        }
        let k0 = spec.eval(&vec![0.0; spec.space().dim()]);
        let r = k0.sqrt();
        Self::new(b * r / 2.0, r, n, delta, n as f64 * k0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    /// `E_t + (8 lambda_f R / sqrt N) sqrt(ln(2/delta) / 2)`.
    MainText,
    /// `E_t + 2 lambda_f sqrt(tr K) / N + 3 beta sqrt(ln(2/delta) / (2N))`.
    Appendix,
}

/// `sum_i alpha_i K(x - x_i)`. Without `alphas` this is the kernel predictor itself
/// (`alpha_i = f(x_i) / N`), computed by the same code path.
pub fn representer_predict(
    x: &ParamPoint,
    set: &TrainingSet<f64>,
    spec: &KernelSpec,
    alphas: Option<&[f64]>,
) -> Result<f64> {
    let Some(alphas) = alphas else {
        return predict_scalar(x, set, spec, &PredictOptions::default());
    };
    if alphas.len() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            actual: alphas.len(),
        });
    }
    let w = kernel_weights(x, set.points(), spec)?;
    let terms: Vec<f64> = w.iter().zip(alphas).map(|(k, a)| k * a).collect();
    Ok(pairwise_sum(&terms))
}

/// `alpha_i = f(x_i) / N`.
pub fn default_alphas(set: &TrainingSet<f64>) -> Vec<f64> {
    let n = set.len() as f64;
    set.labels().iter().map(|f| f / n).collect()
}

/// Mean absolute training error `(1/N) sum_i |f_hat(x_i) - f(x_i)|`.
pub fn empirical_error<P>(set: &TrainingSet<f64>, predictor: P) -> Result<f64>
where
    P: Fn(&ParamPoint) -> Result<f64>,
{
    let errs = set
        .points()
        .iter()
        .zip(set.labels())
        .map(|(x, f)| Ok((predictor(x)? - f).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean(&errs))
}

/// Monte-Carlo estimate of `E_x |f_hat(x) - f(x)|` on fresh test points.
pub fn expected_error_estimate<P, T>(
    test_points: &[ParamPoint],
    predictor: P,
    truth: T,
) -> Result<f64>
where
    P: Fn(&ParamPoint) -> Result<f64>,
    T: Fn(&ParamPoint) -> f64,
{
    if test_points.is_empty() {
        return Err(invalid("test sample is empty"));
    }
    let errs = test_points
        .iter()
        .map(|x| Ok((predictor(x)? - truth(x)).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean(&errs))
}

pub fn generalization_bound(
    inputs: &RkhsBoundInputs,
    empirical: f64,
    variant: BoundVariant,
) -> f64 {
    let n = inputs.n as f64;
    let log = (2.0 / inputs.delta).ln();
    match variant {
        BoundVariant::MainText => {
            empirical + 8.0 * inputs.lambda_f * inputs.r / n.sqrt() * (log / 2.0).sqrt()
        }
        BoundVariant::Appendix => {
            empirical
                + 2.0 * inputs.lambda_f * inputs.trace_k.sqrt() / n
                + 3.0 * inputs.beta * (log / (2.0 * n)).sqrt()
        }
    }
}

/// `N >= (1/epsilon^2) (8 lambda_f R sqrt(ln(2/delta) / 2))^2`.
pub fn n_rkhs(epsilon: f64, lambda_f: f64, r: f64, delta: f64) -> Result<f64> {
    if !(epsilon > 0.0 && lambda_f > 0.0 && r > 0.0 && delta > 0.0 && delta < 1.0) {
        return Err(invalid(
            "need positive epsilon, lambda_f, R and delta in (0, 1)",
        ));
    }
    let t = 8.0 * lambda_f * r * ((2.0 / delta).ln() / 2.0).sqrt();
    Ok(t * t / (epsilon * epsilon))
}
