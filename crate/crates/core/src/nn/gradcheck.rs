use super::Mlp;
use crate::error::{ensure_len, Result};
use crate::linalg::squared_norm;

/// A scalar loss of a network output with its analytic gradient.
pub trait ScalarLoss {
    fn value(&self, output: &[f64]) -> f64;
    fn gradient(&self, output: &[f64]) -> Vec<f64>;
}

/// `0.5 * ||output - target||^2`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub target: Vec<f64>,
}

impl ScalarLoss for LeastSquares {
    fn value(&self, output: &[f64]) -> f64 {
        let diff: Vec<f64> = output.iter().zip(&self.target).map(|(y, t)| y - t).collect();
        0.5 * squared_norm(&diff)
    }

    fn gradient(&self, output: &[f64]) -> Vec<f64> {
        output.iter().zip(&self.target).map(|(y, t)| y - t).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Flat index of the parameter with the largest error.
    pub worst_parameter: usize,
    pub n_params: usize,
    pub tolerance: f64,
    pub passed: bool,
}

const STEP: f64 = 1e-5;
/// Denominator floor: below this magnitude the comparison is absolute, so
/// rounding noise on near-zero derivatives does not dominate.
const SCALE_FLOOR: f64 = 1e-3;

/// Compares backpropagated gradients against central differences for every
/// parameter.
pub fn finite_diff_check(
    net: &Mlp,
    loss: &dyn ScalarLoss,
    input: &[f64],
    tolerance: f64,
) -> Result<GradCheckReport> {
    let trace = net.forward_trace(input)?;
    let upstream = loss.gradient(trace.output());
    ensure_len("loss gradient", net.output_dim(), upstream.len())?;
    let mut analytic = super::Gradients::zeros_like(net);
    net.backward_trace(&trace, &upstream, &mut analytic)?;

    let mut probe = net.clone();
    let mut worst = (0.0f64, 0usize);
    for i in 0..net.n_params() {
        let original = probe.params()[i];
        probe.params_mut()[i] = original + STEP;
        let plus = loss.value(&probe.forward(input)?);
        probe.params_mut()[i] = original - STEP;
        let minus = loss.value(&probe.forward(input)?);
        probe.params_mut()[i] = original;

        let numeric = (plus - minus) / (2.0 * STEP);
        let a = analytic.as_slice()[i];
        let scale = a.abs().max(numeric.abs()).max(SCALE_FLOOR);
        let err = (a - numeric).abs() / scale;
        if err > worst.0 || err.is_nan() {
            worst = (err, i);
        }
    }
    Ok(GradCheckReport {
        max_relative_error: worst.0,
        worst_parameter: worst.1,
        n_params: net.n_params(),
        tolerance,
        passed: worst.0 <= tolerance,
    })
}
