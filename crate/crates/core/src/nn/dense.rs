use rand::Rng;

use super::{gemm, Param, Scalar, Tensor4};
use crate::error::{Error, Result};

/// Fully-connected layer, weights `(out_dim, in_dim)`. Operates on
/// `(N, in_dim, 1, 1)` tensors; any `(N, C, H, W)` with `C·H·W = in_dim` is
/// accepted and treated as flattened.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_dim: usize,
    out_dim: usize,
    cache: Option<Tensor4<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::kaiming_uniform(&[out_dim, in_dim], in_dim, rng),
            bias: Param::zeros(&[out_dim]),
            in_dim,
            out_dim,
            cache: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn check(&self, x: &Tensor4<T>) -> Result<()> {
        if x.sample_len() != self.in_dim {
            return Err(Error::shape(
                format!("{} input features", self.in_dim),
                x.shape(),
            ));
        }
        Ok(())
    }

    pub fn infer(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check(x)?;
        let n = x.batch();
        let mut y = Tensor4::zeros([n, self.out_dim, 1, 1]);
        for row in y.data_mut().chunks_mut(self.out_dim) {
            row.copy_from_slice(&self.bias.value);
        }
        gemm(false, true, n, self.out_dim, self.in_dim, x.data(), &self.weight.value, T::one(), y.data_mut());
        Ok(y)
    }

    pub fn forward(&mut self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        let x = self.cache.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let n = x.batch();
        if dy.shape() != [n, self.out_dim, 1, 1] {
            return Err(Error::shape([n, self.out_dim, 1, 1], dy.shape()));
        }
        gemm(true, false, self.out_dim, self.in_dim, n, dy.data(), x.data(), T::one(), &mut self.weight.grad);
        for row in dy.data().chunks(self.out_dim) {
            for (g, &d) in self.bias.grad.iter_mut().zip(row) {
                *g = *g + d;
            }
        }
        let mut dx = Tensor4::zeros(x.shape());
        gemm(false, false, n, self.in_dim, self.out_dim, dy.data(), &self.weight.value, T::zero(), dx.data_mut());
        Ok(dx)
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param<T>; 2] {
        [&self.weight, &self.bias]
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}
