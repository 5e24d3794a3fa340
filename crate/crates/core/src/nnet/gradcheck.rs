use super::{bce_loss, bce_output_delta, DenseNetwork, Mode};
use crate::error::Result;

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn loss(net: &DenseNetwork, input: &[f64], target: &[f64]) -> Result<f64> {
    bce_loss(&net.predict(input)?, target)
}

/// Largest relative error between backpropagated and central-difference
/// gradients of the BCE loss over every parameter, in eval mode.
pub fn gradient_check(net: &DenseNetwork, input: &[f64], target: &[f64], epsilon: f64) -> Result<f64> {
    let trace = net.forward(input, Mode::Eval)?;
    let activation = net.layers.last().expect("validated network").activation;
    let out = &trace.final_outputs()[0];
    bce_loss(out, target)?;
    let mut analytic = net.zero_gradients();
    let delta = vec![bce_output_delta(activation, out, target, 1)];
    net.backward(&[input], &trace, delta, &mut analytic);

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (k, grad) in analytic.iter().enumerate() {
        for (i, &g) in grad.iter().enumerate() {
            let original = probe.parameters()[k][i];
            probe.parameters_mut()[k][i] = original + epsilon;
            let plus = loss(&probe, input, target)?;
            probe.parameters_mut()[k][i] = original - epsilon;
            let minus = loss(&probe, input, target)?;
            probe.parameters_mut()[k][i] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(g, numeric));
        }
    }
    Ok(worst)
}
