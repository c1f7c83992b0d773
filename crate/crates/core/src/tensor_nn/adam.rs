use super::mlp::{Gradients, Mlp};

/// Adam with bias correction (β₁ = 0.9, β₂ = 0.999, ε = 1e-8 by default).
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first: Gradients,
    second: Gradients,
    step: u64,
}

impl Adam {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for (((p, g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        for (((layer, g), m), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first.layers)
            .zip(&mut self.second.layers)
        {
            update(
                layer.weights.data_mut(),
                g.weights.data(),
                m.weights.data_mut(),
                v.weights.data_mut(),
            );
            update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_nn::MlpConfig;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut net = Mlp::new(MlpConfig::new(3, vec![5], 2, 3)).unwrap();
        let before = net.clone();
        let mut adam = Adam::new(&net, 1e-2);
        let zero = Gradients::zeros_like(&net);
        for _ in 0..5 {
            adam.step(&mut net, &zero);
        }
        assert_eq!(net, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = Mlp::zeros(MlpConfig::new(1, vec![1], 1, 0)).unwrap();
        let mut g = Gradients::zeros_like(&net);
        g.layers[1].bias[0] = 0.25;
        let mut adam = Adam::new(&net, 0.1);
        adam.step(&mut net, &g);
        // bias-corrected first step is lr · sign(g)
        assert!((net.layers()[1].bias[0] + 0.1).abs() < 1e-6);
    }
}
