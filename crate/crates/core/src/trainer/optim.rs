//! Adaptive-moment optimizer with decoupled weight decay.

/// First/second moment buffers for one parameter tensor.
#[derive(Debug, Clone)]
pub struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One update over a flat parameter slice. Weight decay is decoupled:
    /// applied directly to the parameters, not mixed into the gradient.
    pub fn step(&self, moments: &mut Moments, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), moments.m.len());
        moments.t += 1;
        let bc1 = 1.0 - self.beta1.powi(moments.t as i32);
        let bc2 = 1.0 - self.beta2.powi(moments.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            moments.m[i] = self.beta1 * moments.m[i] + (1.0 - self.beta1) * g;
            moments.v[i] = self.beta2 * moments.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = moments.m[i] / bc1;
            let v_hat = moments.v[i] / bc2;
            params[i] -=
                self.learning_rate * (m_hat / (v_hat.sqrt() + self.epsilon) + self.weight_decay * params[i]);
        }
    }
}
