//! Adam with bias correction over flat parameter slices.

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, aligned with a fixed tensor order.
#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(tensor_sizes: &[usize]) -> Self {
        AdamState {
            step: 0,
            m: tensor_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: tensor_sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update. Weight decay is expected to be folded into the
/// gradients already.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    cfg: &AdamConfig,
) {
    assert_eq!(params.len(), state.m.len(), "tensor count mismatch");
    assert_eq!(grads.len(), state.m.len(), "gradient count mismatch");
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        assert_eq!(p.len(), m.len(), "tensor size mismatch");
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}
