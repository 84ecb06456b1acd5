/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "optimizer state size");
        assert_eq!(grads.len(), self.m.len(), "gradient size");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut opt = Adam::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step(&mut p, &[0.0; 3], 1e-3);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut opt = Adam::new(2);
        let mut p = vec![0.0, 0.0];
        opt.step(&mut p, &[250.0, -3.0], 1e-3);
        // m_hat = g, v_hat = g^2 => update = lr * g / (|g| + eps)
        assert!((p[0] + 1e-3).abs() < 1e-12);
        assert!((p[1] - 1e-3).abs() < 1e-11);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut opt = Adam::new(2);
            let mut p = vec![0.3, 0.7];
            for i in 0..10 {
                opt.step(&mut p, &[i as f64 * 0.1, -0.2], 1e-2);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
