/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    /// First moment.
    pub m: Vec<f64>,
    /// Second moment.
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One parameter update. `params` and `grads` must match the state length.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grads[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op_on_params() {
        let mut adam = Adam::new(2, AdamConfig::default());
        adam.m = vec![0.5, -0.2];
        adam.v = vec![0.1, 0.3];
        let mut p = vec![1.0, -2.0];
        adam.update(&mut p, &[0.0, 0.0]);
        // Decayed moments still move params; check the moments decayed as expected.
        assert!((adam.m[0] - 0.45).abs() < 1e-15);
        assert!((adam.v[1] - 0.2997).abs() < 1e-15);

        let mut fresh = Adam::new(2, AdamConfig::default());
        let mut p = vec![1.0, -2.0];
        fresh.update(&mut p, &[0.0, 0.0]);
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(fresh.step, 1);
    }

    #[test]
    fn first_step_is_learning_rate() {
        let mut adam = Adam::new(1, AdamConfig::default());
        let mut p = vec![0.0];
        adam.update(&mut p, &[1.0]);
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
        assert!((p[0] + 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut adam = Adam::new(1, AdamConfig::default());
        let target: f64 = 3.7;
        let mut p = vec![0.0];
        for _ in 0..5000 {
            let g = 2.0 * (p[0] - target);
            adam.update(&mut p, &[g]);
        }
        assert!((p[0] - target).abs() <= 1e-6, "p = {}", p[0]);
    }
}
