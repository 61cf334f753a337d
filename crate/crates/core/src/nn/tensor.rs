use crate::error::{Error, Result};

use super::Scalar;

/// Dense `(N, C, H, W)` tensor stored in row-major order.
///
/// Flat feature vectors are carried as `(N, D, 1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::shape(
                format!("{n} elements for {shape:?}"),
                data.len(),
            ));
        }
        Ok(Self { shape, data })
    }

    /// Stacks equally-shaped `(C, H, W)` samples into a batch.
    pub fn stack<'a, I>(sample_shape: [usize; 3], samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let per: usize = sample_shape.iter().product();
        let mut data = Vec::new();
        let mut n = 0;
        for s in samples {
            if s.len() != per {
                return Err(Error::shape(sample_shape, s.len()));
            }
            data.extend_from_slice(s);
            n += 1;
        }
        let [c, h, w] = sample_shape;
        Ok(Self {
            shape: [n, c, h, w],
            data,
        })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Elements per sample, `C·H·W`.
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn sample(&self, n: usize) -> &[T] {
        let len = self.sample_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn sample_mut(&mut self, n: usize) -> &mut [T] {
        let len = self.sample_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    /// Relabels the per-sample shape without touching the data.
    pub fn reshaped(mut self, c: usize, h: usize, w: usize) -> Result<Self> {
        if c * h * w != self.sample_len() {
            return Err(Error::shape(
                [self.shape[1], self.shape[2], self.shape[3]],
                [c, h, w],
            ));
        }
        self.shape = [self.shape[0], c, h, w];
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor4<U> {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}
