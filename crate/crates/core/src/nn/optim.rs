use serde::{Deserialize, Serialize};

use super::{Param, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Plain SGD with a per-epoch learning rate of `lr · gamma^epoch`.
    SgdExpDecay { gamma: f64 },
    /// Bias-corrected Adam.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn sgd(gamma: f64) -> Self {
        OptimizerKind::SgdExpDecay { gamma }
    }

    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub step_count: u64,
    first_moment: Vec<Vec<T>>,
    second_moment: Vec<Vec<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        if !(lr > 0.0) {
            return Err(Error::invalid(format!("learning rate must be > 0, got {lr}")));
        }
        Ok(Self {
            kind,
            lr,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    /// Applies one update using each parameter's accumulated gradient.
    pub fn step(&mut self, params: &mut [&mut Param<T>], epoch: usize) -> Result<()> {
        match self.kind {
            OptimizerKind::SgdExpDecay { .. } => self.sgd_step(params, epoch),
            OptimizerKind::Adam { .. } => self.adam_step(params),
        }
    }

    fn check_grads(params: &[&mut Param<T>]) -> Result<()> {
        for p in params {
            if p.grad.len() != p.value.len() {
                return Err(Error::shape(p.value.len(), p.grad.len()));
            }
        }
        Ok(())
    }

    pub fn sgd_step(&mut self, params: &mut [&mut Param<T>], epoch: usize) -> Result<()> {
        let OptimizerKind::SgdExpDecay { gamma } = self.kind else {
            return Err(Error::invalid("sgd_step on a non-SGD optimizer"));
        };
        Self::check_grads(params)?;
        let rate = T::lit(self.lr * gamma.powi(epoch as i32));
        for p in params.iter_mut() {
            for (v, &g) in p.value.iter_mut().zip(&p.grad) {
                *v = *v - rate * g;
            }
        }
        self.step_count += 1;
        Ok(())
    }

    pub fn adam_step(&mut self, params: &mut [&mut Param<T>]) -> Result<()> {
        let OptimizerKind::Adam { beta1, beta2, eps } = self.kind else {
            return Err(Error::invalid("adam_step on a non-Adam optimizer"));
        };
        Self::check_grads(params)?;
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.first_moment.len() != params.len()
            || self
                .first_moment
                .iter()
                .zip(params.iter())
                .any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::shape(
                self.first_moment.iter().map(Vec::len).collect::<Vec<_>>(),
                params.iter().map(|p| p.len()).collect::<Vec<_>>(),
            ));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (T::lit(beta1), T::lit(beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let corr1 = T::lit(1.0 - beta1.powi(t));
        let corr2 = T::lit(1.0 - beta2.powi(t));
        let lr = T::lit(self.lr);
        let eps = T::lit(eps);
        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = b1 * m[i] + one_b1 * g;
                v[i] = b2 * v[i] + one_b2 * g * g;
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                p.value[i] = p.value[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64, g: f64) -> Param<f64> {
        let mut p = Param::zeros(&[1]);
        p.value[0] = v;
        p.grad[0] = g;
        p
    }

    #[test]
    fn sgd_zero_gradient_is_a_no_op() {
        let mut opt = Optimizer::<f64>::new(OptimizerKind::sgd(1.0), 0.001).unwrap();
        let mut p = scalar_param(0.7, 0.0);
        opt.sgd_step(&mut [&mut p], 3).unwrap();
        assert_eq!(p.value[0], 0.7);
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn sgd_decayed_step_size() {
        let mut opt = Optimizer::<f64>::new(OptimizerKind::sgd(0.95), 0.001).unwrap();
        let mut p = scalar_param(0.0, 1.0);
        opt.sgd_step(&mut [&mut p], 1).unwrap();
        assert!((p.value[0] + 0.00095).abs() < 1e-15);
    }

    #[test]
    fn sgd_two_steps_equal_one_doubled_step() {
        let mut a = scalar_param(1.0, 0.3);
        let mut b = scalar_param(1.0, 0.6);
        let mut oa = Optimizer::<f64>::new(OptimizerKind::sgd(0.95), 0.01).unwrap();
        let mut ob = oa.clone();
        oa.sgd_step(&mut [&mut a], 0).unwrap();
        oa.sgd_step(&mut [&mut a], 0).unwrap();
        ob.sgd_step(&mut [&mut b], 0).unwrap();
        assert!((a.value[0] - b.value[0]).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut opt = Optimizer::<f64>::new(OptimizerKind::adam(), 0.001).unwrap();
        let mut p = scalar_param(0.5, 0.0);
        opt.adam_step(&mut [&mut p]).unwrap();
        assert_eq!(p.value[0], 0.5);
    }

    #[test]
    fn adam_first_step_is_about_lr() {
        for g in [1e-3, 0.5, -2.0, 1e4] {
            let mut opt = Optimizer::<f64>::new(OptimizerKind::adam(), 0.001).unwrap();
            let mut p = scalar_param(0.0, g);
            opt.adam_step(&mut [&mut p]).unwrap();
            // bias correction makes m̂ = g and v̂ = g² at t = 1
            let want = 0.001 * g.abs() / (g.abs() + 1e-8);
            assert!((p.value[0].abs() - want).abs() < 1e-15);
            assert!((p.value[0].abs() - 0.001).abs() < 1e-7);
            assert_eq!(p.value[0].signum(), -g.signum());
        }
    }

    #[test]
    fn adam_minimizes_scalar_quadratic() {
        let mut opt = Optimizer::<f64>::new(OptimizerKind::adam(), 0.001).unwrap();
        let mut p = scalar_param(1.0, 0.0);
        for _ in 0..5000 {
            p.grad[0] = p.value[0];
            opt.adam_step(&mut [&mut p]).unwrap();
        }
        assert!(p.value[0].abs() < 1e-3, "{}", p.value[0]);
    }

    #[test]
    fn wrong_kind_and_shape_are_errors() {
        let mut opt = Optimizer::<f64>::new(OptimizerKind::adam(), 0.001).unwrap();
        let mut p = scalar_param(0.0, 1.0);
        assert!(opt.sgd_step(&mut [&mut p], 0).is_err());
        opt.adam_step(&mut [&mut p]).unwrap();
        let mut q = Param::<f64>::zeros(&[3]);
        assert!(opt.adam_step(&mut [&mut q]).is_err());
        assert!(Optimizer::<f64>::new(OptimizerKind::adam(), 0.0).is_err());
    }
}
