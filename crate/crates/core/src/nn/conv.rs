//! 2-D convolution (cross-correlation) and its transpose, via im2col + GEMM.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gemm, Param, Scalar, Tensor4};
use crate::error::{Error, Result};

/// Geometry shared by a convolution and its transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kernel,
            stride,
            padding,
        }
    }

    /// Output extent of a forward convolution, `None` if it would be empty.
    pub fn conv_out(&self, input: usize) -> Option<usize> {
        let padded = input + 2 * self.padding;
        if padded < self.kernel || self.stride == 0 {
            return None;
        }
        Some((padded - self.kernel) / self.stride + 1)
    }

    /// Output extent of a transposed convolution.
    pub fn transpose_out(&self, input: usize, output_padding: usize) -> Option<usize> {
        if input == 0 {
            return None;
        }
        ((input - 1) * self.stride + self.kernel + output_padding).checked_sub(2 * self.padding)
    }
}

/// Unfolds one `(C, H, W)` image into a `(C·k·k, Ho·Wo)` column matrix.
#[allow(clippy::too_many_arguments)]
pub(crate) fn im2col<T: Scalar>(
    x: &[T],
    channels: usize,
    h: usize,
    w: usize,
    g: ConvGeometry,
    ho: usize,
    wo: usize,
    cols: &mut [T],
) {
    let k = g.kernel;
    let plane = ho * wo;
    for c in 0..channels {
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oh in 0..ho {
                    let ih = (oh * g.stride + ki) as isize - g.padding as isize;
                    let out = &mut dst[oh * wo..(oh + 1) * wo];
                    if ih < 0 || ih >= h as isize {
                        out.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &x[(c * h + ih as usize) * w..(c * h + ih as usize + 1) * w];
                    for (ow, v) in out.iter_mut().enumerate() {
                        let iw = (ow * g.stride + kj) as isize - g.padding as isize;
                        *v = if iw < 0 || iw >= w as isize {
                            T::zero()
                        } else {
                            src[iw as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters columns back, accumulating into `x`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn col2im<T: Scalar>(
    cols: &[T],
    channels: usize,
    h: usize,
    w: usize,
    g: ConvGeometry,
    ho: usize,
    wo: usize,
    x: &mut [T],
) {
    let k = g.kernel;
    let plane = ho * wo;
    for c in 0..channels {
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                for oh in 0..ho {
                    let ih = (oh * g.stride + ki) as isize - g.padding as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    let base = (c * h + ih as usize) * w;
                    for ow in 0..wo {
                        let iw = (ow * g.stride + kj) as isize - g.padding as isize;
                        if iw >= 0 && (iw as usize) < w {
                            x[base + iw as usize] = x[base + iw as usize] + src[oh * wo + ow];
                        }
                    }
                }
            }
        }
    }
}

/// Convolution layer, weights `(C_out, C_in, k, k)`.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub geometry: ConvGeometry,
    in_channels: usize,
    out_channels: usize,
    cache: Option<Tensor4<T>>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        geometry: ConvGeometry,
        rng: &mut R,
    ) -> Self {
        let k = geometry.kernel;
        let fan_in = in_channels * k * k;
        Self {
            weight: Param::kaiming_uniform(&[out_channels, in_channels, k, k], fan_in, rng),
            bias: Param::zeros(&[out_channels]),
            geometry,
            in_channels,
            out_channels,
            cache: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        let [n, c, h, w] = input;
        if c != self.in_channels {
            return Err(Error::shape(
                format!("{} input channels", self.in_channels),
                format!("{c} channels"),
            ));
        }
        match (self.geometry.conv_out(h), self.geometry.conv_out(w)) {
            (Some(ho), Some(wo)) if ho > 0 && wo > 0 => Ok([n, self.out_channels, ho, wo]),
            _ => Err(Error::shape(
                format!("spatial input ≥ kernel {}", self.geometry.kernel),
                [h, w],
            )),
        }
    }

    pub fn infer(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let out_shape = self.output_shape(x.shape())?;
        let [n, c, h, w] = x.shape();
        let [_, co, ho, wo] = out_shape;
        let ckk = c * self.geometry.kernel * self.geometry.kernel;
        let mut cols = vec![T::zero(); ckk * ho * wo];
        let mut y = Tensor4::zeros(out_shape);
        for i in 0..n {
            im2col(x.sample(i), c, h, w, self.geometry, ho, wo, &mut cols);
            let out = y.sample_mut(i);
            for (oc, plane) in out.chunks_mut(ho * wo).enumerate() {
                plane.iter_mut().for_each(|v| *v = self.bias.value[oc]);
            }
            gemm(false, false, co, ho * wo, ckk, &self.weight.value, &cols, T::one(), out);
        }
        Ok(y)
    }

    pub fn forward(&mut self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        let x = self.cache.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let expected = self.output_shape(x.shape())?;
        if dy.shape() != expected {
            return Err(Error::shape(expected, dy.shape()));
        }
        let [n, c, h, w] = x.shape();
        let [_, co, ho, wo] = expected;
        let ckk = c * self.geometry.kernel * self.geometry.kernel;
        let mut cols = vec![T::zero(); ckk * ho * wo];
        let mut dcols = vec![T::zero(); ckk * ho * wo];
        let mut dx = Tensor4::zeros(x.shape());
        for i in 0..n {
            let g = dy.sample(i);
            im2col(x.sample(i), c, h, w, self.geometry, ho, wo, &mut cols);
            gemm(false, true, co, ckk, ho * wo, g, &cols, T::one(), &mut self.weight.grad);
            for (oc, plane) in g.chunks(ho * wo).enumerate() {
                self.bias.grad[oc] = self.bias.grad[oc] + plane.iter().copied().sum();
            }
            gemm(true, false, ckk, ho * wo, co, &self.weight.value, g, T::zero(), &mut dcols);
            col2im(&dcols, c, h, w, self.geometry, ho, wo, dx.sample_mut(i));
        }
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

/// Transposed convolution, weights `(C_in, C_out, k, k)`.
///
/// With matching geometry this is the adjoint of [`Conv2d`] mapping `C_out`
/// channels back to `C_in`; `output_padding` resolves the size ambiguity of
/// strided transposes.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub geometry: ConvGeometry,
    pub output_padding: usize,
    in_channels: usize,
    out_channels: usize,
    cache: Option<Tensor4<T>>,
}

impl<T: Scalar> ConvTranspose2d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        geometry: ConvGeometry,
        output_padding: usize,
        rng: &mut R,
    ) -> Self {
        let k = geometry.kernel;
        let fan_in = in_channels * k * k;
        Self {
            weight: Param::kaiming_uniform(&[in_channels, out_channels, k, k], fan_in, rng),
            bias: Param::zeros(&[out_channels]),
            geometry,
            output_padding,
            in_channels,
            out_channels,
            cache: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        let [n, c, h, w] = input;
        if c != self.in_channels {
            return Err(Error::shape(
                format!("{} input channels", self.in_channels),
                format!("{c} channels"),
            ));
        }
        let op = self.output_padding;
        match (
            self.geometry.transpose_out(h, op),
            self.geometry.transpose_out(w, op),
        ) {
            (Some(ho), Some(wo)) if ho > 0 && wo > 0 => Ok([n, self.out_channels, ho, wo]),
            _ => Err(Error::shape("non-empty transposed output", [h, w])),
        }
    }

    pub fn infer(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let out_shape = self.output_shape(x.shape())?;
        let [n, ci, h, w] = x.shape();
        let [_, co, ho, wo] = out_shape;
        let ckk = co * self.geometry.kernel * self.geometry.kernel;
        let mut cols = vec![T::zero(); ckk * h * w];
        let mut y = Tensor4::zeros(out_shape);
        for i in 0..n {
            gemm(true, false, ckk, h * w, ci, &self.weight.value, x.sample(i), T::zero(), &mut cols);
            let out = y.sample_mut(i);
            for (oc, plane) in out.chunks_mut(ho * wo).enumerate() {
                plane.iter_mut().for_each(|v| *v = self.bias.value[oc]);
            }
            col2im(&cols, co, ho, wo, self.geometry, h, w, out);
        }
        Ok(y)
    }

    pub fn forward(&mut self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        let x = self.cache.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let expected = self.output_shape(x.shape())?;
        if dy.shape() != expected {
            return Err(Error::shape(expected, dy.shape()));
        }
        let [n, ci, h, w] = x.shape();
        let [_, co, ho, wo] = expected;
        let ckk = co * self.geometry.kernel * self.geometry.kernel;
        let mut cols = vec![T::zero(); ckk * h * w];
        let mut dx = Tensor4::zeros(x.shape());
        for i in 0..n {
            let g = dy.sample(i);
            for (oc, plane) in g.chunks(ho * wo).enumerate() {
                self.bias.grad[oc] = self.bias.grad[oc] + plane.iter().copied().sum();
            }
            im2col(g, co, ho, wo, self.geometry, h, w, &mut cols);
            gemm(false, true, ci, ckk, h * w, x.sample(i), &cols, T::one(), &mut self.weight.grad);
            gemm(false, false, ci, h * w, ckk, &self.weight.value, &cols, T::zero(), dx.sample_mut(i));
        }
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

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Direct quadruple-loop cross-correlation.
    fn reference_conv(
        x: &[f64],
        [n, c, h, w]: [usize; 4],
        wt: &[f64],
        bias: &[f64],
        co: usize,
        g: ConvGeometry,
    ) -> Vec<f64> {
        let k = g.kernel;
        let ho = (h + 2 * g.padding - k) / g.stride + 1;
        let wo = (w + 2 * g.padding - k) / g.stride + 1;
        let mut y = vec![0.0; n * co * ho * wo];
        for b in 0..n {
            for o in 0..co {
                for i in 0..ho {
                    for j in 0..wo {
                        let mut acc = bias[o];
                        for ic in 0..c {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let ih = (i * g.stride + ki) as isize - g.padding as isize;
                                    let iw = (j * g.stride + kj) as isize - g.padding as isize;
                                    if ih < 0 || iw < 0 || ih >= h as isize || iw >= w as isize {
                                        continue;
                                    }
                                    acc += wt[((o * c + ic) * k + ki) * k + kj]
                                        * x[((b * c + ic) * h + ih as usize) * w + iw as usize];
                                }
                            }
                        }
                        y[((b * co + o) * ho + i) * wo + j] = acc;
                    }
                }
            }
        }
        y
    }

    fn random_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor4<f64> {
        let n = shape.iter().product();
        Tensor4::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv2d::<f64>::new(1, 1, ConvGeometry::new(1, 1, 0), &mut rng);
        conv.weight.value = vec![1.0];
        let x = random_tensor([2, 1, 3, 5], &mut rng);
        assert_eq!(conv.infer(&x).unwrap(), x);
    }

    #[test]
    fn ones_kernel_sums_three_by_three_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv2d::<f32>::new(1, 1, ConvGeometry::new(3, 1, 0), &mut rng);
        conv.weight.value = vec![1.0; 9];
        let x = Tensor4::from_vec([1, 1, 4, 4], vec![1.0; 16]).unwrap();
        let y = conv.infer(&x).unwrap();
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert_eq!(y.data(), &[9.0; 4]);
    }

    #[test]
    fn matches_loop_reference_over_geometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(k, s, p) in &[(3, 1, 0), (3, 2, 1), (1, 1, 0), (2, 2, 0), (3, 1, 1), (5, 3, 2)] {
            let g = ConvGeometry::new(k, s, p);
            let mut conv = Conv2d::<f64>::new(3, 4, g, &mut rng);
            for b in &mut conv.bias.value {
                *b = rng.gen_range(-1.0..1.0);
            }
            let x = random_tensor([2, 3, 7, 9], &mut rng);
            let y = conv.infer(&x).unwrap();
            let want = reference_conv(x.data(), x.shape(), &conv.weight.value, &conv.bias.value, 4, g);
            assert_eq!(y.data().len(), want.len());
            for (a, b) in y.data().iter().zip(&want) {
                assert!((a - b).abs() < 1e-6, "k={k} s={s} p={p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn stride_two_transpose_doubles_spatial_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = ConvTranspose2d::<f32>::new(8, 4, ConvGeometry::new(3, 2, 1), 1, &mut rng);
        assert_eq!(t.output_shape([2, 8, 4, 40]).unwrap(), [2, 4, 8, 80]);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv2d::<f32>::new(3, 4, ConvGeometry::new(3, 1, 1), &mut rng);
        let x = Tensor4::zeros([1, 2, 5, 5]);
        assert!(matches!(conv.infer(&x), Err(Error::Shape { .. })));
    }

    #[test]
    fn backward_before_forward_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut conv = Conv2d::<f32>::new(1, 1, ConvGeometry::new(1, 1, 0), &mut rng);
        let dy = Tensor4::zeros([1, 1, 2, 2]);
        assert!(matches!(conv.backward(&dy), Err(Error::BackwardBeforeForward)));
    }

    #[test]
    fn transpose_is_adjoint_of_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(k, s, p, op, h, w) in &[(3, 2, 1, 1, 8, 10), (3, 1, 1, 0, 5, 6), (2, 2, 0, 0, 6, 4)] {
            let g = ConvGeometry::new(k, s, p);
            let conv = Conv2d::<f64>::new(3, 5, g, &mut rng);
            let mut tconv = ConvTranspose2d::<f64>::new(5, 3, g, op, &mut rng);
            tconv.weight.value = conv.weight.value.clone();
            let x = random_tensor([1, 3, h, w], &mut rng);
            let y_shape = conv.output_shape(x.shape()).unwrap();
            let y = random_tensor(y_shape, &mut rng);
            let cx = conv.infer(&x).unwrap();
            let ty = tconv.infer(&y).unwrap();
            assert_eq!(ty.shape(), x.shape());
            let lhs: f64 = cx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data().iter().zip(ty.data()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
        }
    }
}
