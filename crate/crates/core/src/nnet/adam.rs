use super::TrainConfig;

const ADAM_EPS: f64 = 1e-8;
/// Parameters and first moments below this magnitude are set to zero; second
/// moments below its square likewise. Keeps decayed weights out of the
/// subnormal range, where arithmetic is orders of magnitude slower.
const FLUSH: f64 = 1e-150;

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn zeros(shapes: &[usize]) -> Self {
        Self {
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One Adam update at 0-based `iteration`.
///
/// Weight decay is coupled: `λ·w` is added to the gradient before the moment
/// updates. The learning rate follows `config.lr_at(iteration)`.
pub fn adam_step(
    params: Vec<&mut [f64]>,
    grads: &[Vec<f64>],
    state: &mut AdamState,
    config: &TrainConfig,
    iteration: usize,
) {
    let lr = config.lr_at(iteration);
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let t = (iteration + 1) as i32;
    let step = lr / (1.0 - b1.powi(t));
    let v_scale = 1.0 / (1.0 - b2.powi(t)).sqrt();
    let decay = config.weight_decay;

    for (k, p) in params.into_iter().enumerate() {
        let moments = state.first[k].iter_mut().zip(state.second[k].iter_mut());
        for ((p, &g), (m, v)) in p.iter_mut().zip(&grads[k]).zip(moments) {
            let g = g + decay * *p;
            *m = flush(b1 * *m + (1.0 - b1) * g, FLUSH);
            *v = flush(b2 * *v + (1.0 - b2) * g * g, FLUSH * FLUSH);
            *p = flush(*p - step * *m / (v.sqrt() * v_scale + ADAM_EPS), FLUSH);
        }
    }
}

fn flush(x: f64, floor: f64) -> f64 {
    if x.abs() < floor {
        0.0
    } else {
        x
    }
}
