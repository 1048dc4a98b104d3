//! Adam with bias correction.

use crate::{Scalar, Visit};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// Optimizer state; moments are indexed in the model's visit order.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub steps: u64,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, model: &mut dyn Visit<T>) -> Self {
        let mut first_moment = Vec::new();
        model.visit_params(&mut |p| first_moment.push(vec![T::zero(); p.len()]));
        let second_moment = first_moment.clone();
        Self {
            config,
            steps: 0,
            first_moment,
            second_moment,
        }
    }

    /// Apply one update from the accumulated gradients, then zero them.
    pub fn step(&mut self, model: &mut dyn Visit<T>) {
        self.steps += 1;
        let c = self.config;
        let t = self.steps as i32;
        let b1 = T::lit(c.beta1);
        let b2 = T::lit(c.beta2);
        let correction1 = T::one() - b1.powi(t);
        let correction2 = T::one() - b2.powi(t);
        let lr = T::lit(c.learning_rate);
        let eps = T::lit(c.eps);
        let mut idx = 0;
        let (ms, vs) = (&mut self.first_moment, &mut self.second_moment);
        model.visit_params(&mut |p| {
            let (m, v) = (&mut ms[idx], &mut vs[idx]);
            assert_eq!(m.len(), p.len(), "optimizer state does not match model");
            for i in 0..p.len() {
                let g = p.grad[i];
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p.value[i] = p.value[i] - lr * m_hat / (v_hat.sqrt() + eps);
                p.grad[i] = T::zero();
            }
            idx += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Param, Slot};

    struct Quadratic {
        x: Param<f64>,
    }

    impl Visit<f64> for Quadratic {
        fn visit(&mut self, f: &mut dyn FnMut(Slot<'_, f64>)) {
            f(Slot::Param(&mut self.x));
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first update is lr * sign(g).
        let mut q = Quadratic {
            x: Param::new(&[2], vec![1.0, -3.0]),
        };
        let cfg = AdamConfig {
            learning_rate: 0.1,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-12,
        };
        let mut adam = Adam::new(cfg, &mut q);
        q.x.grad = vec![2.0, -6.0];
        adam.step(&mut q);
        assert!((q.x.value[0] - 0.9).abs() < 1e-9);
        assert!((q.x.value[1] + 2.9).abs() < 1e-9);
        assert_eq!(q.x.grad, vec![0.0, 0.0]);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut q = Quadratic {
            x: Param::new(&[1], vec![5.0]),
        };
        let cfg = AdamConfig {
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        let mut adam = Adam::new(cfg, &mut q);
        for _ in 0..2000 {
            q.x.grad[0] = 2.0 * q.x.value[0];
            adam.step(&mut q);
        }
        assert!(q.x.value[0].abs() < 1e-2);
    }
}
