use super::{Conv2d, ConvTranspose2d, Dense, Param, Scalar, Tensor4};
use crate::error::{Error, Result};

/// Rectified linear unit. Gradient at exactly zero is taken as zero.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn infer<T: Scalar>(&self, x: &Tensor4<T>) -> Tensor4<T> {
        x.map(|v| if v > T::zero() { v } else { T::zero() })
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor4<T>) -> Tensor4<T> {
        self.mask = Some(x.data().iter().map(|&v| v > T::zero()).collect());
        self.infer(x)
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mask = self.mask.as_ref().ok_or(Error::BackwardBeforeForward)?;
        if mask.len() != dy.data().len() {
            return Err(Error::shape(mask.len(), dy.data().len()));
        }
        let data = dy
            .data()
            .iter()
            .zip(mask)
            .map(|(&g, &m)| if m { g } else { T::zero() })
            .collect();
        Tensor4::from_vec(dy.shape(), data)
    }
}

/// Per-sample shape relabeling (flatten / unflatten).
#[derive(Debug, Clone)]
pub struct Reshape {
    pub to: [usize; 3],
    from: Option<[usize; 3]>,
}

impl Reshape {
    pub fn new(to: [usize; 3]) -> Self {
        Self { to, from: None }
    }

    pub fn flatten(len: usize) -> Self {
        Self::new([len, 1, 1])
    }

    pub fn infer<T: Scalar>(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let [c, h, w] = self.to;
        x.clone().reshaped(c, h, w)
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let [_, c, h, w] = x.shape();
        self.from = Some([c, h, w]);
        self.infer(x)
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        let [c, h, w] = self.from.ok_or(Error::BackwardBeforeForward)?;
        dy.clone().reshaped(c, h, w)
    }
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    ConvTranspose(ConvTranspose2d<T>),
    Dense(Dense<T>),
    Relu(Relu),
    Reshape(Reshape),
}

impl<T: Scalar> Layer<T> {
    pub fn infer(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        match self {
            Layer::Conv(l) => l.infer(x),
            Layer::ConvTranspose(l) => l.infer(x),
            Layer::Dense(l) => l.infer(x),
            Layer::Relu(l) => Ok(l.infer(x)),
            Layer::Reshape(l) => l.infer(x),
        }
    }

    pub fn forward(&mut self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        match self {
            Layer::Conv(l) => l.forward(x),
            Layer::ConvTranspose(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x),
            Layer::Relu(l) => Ok(l.forward(x)),
            Layer::Reshape(l) => l.forward(x),
        }
    }

    pub fn backward(&mut self, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        match self {
            Layer::Conv(l) => l.backward(dy),
            Layer::ConvTranspose(l) => l.backward(dy),
            Layer::Dense(l) => l.backward(dy),
            Layer::Relu(l) => l.backward(dy),
            Layer::Reshape(l) => l.backward(dy),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Conv(l) => l.params_mut().into(),
            Layer::ConvTranspose(l) => l.params_mut().into(),
            Layer::Dense(l) => l.params_mut().into(),
            Layer::Relu(_) | Layer::Reshape(_) => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Conv(l) => l.params().into(),
            Layer::ConvTranspose(l) => l.params().into(),
            Layer::Dense(l) => l.params().into(),
            Layer::Relu(_) | Layer::Reshape(_) => Vec::new(),
        }
    }

    /// Names of the parameters returned by [`Layer::params`], in order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Layer::Conv(_) | Layer::ConvTranspose(_) | Layer::Dense(_) => &["weight", "bias"],
            Layer::Relu(_) | Layer::Reshape(_) => &[],
        }
    }
}

impl<T> From<Conv2d<T>> for Layer<T> {
    fn from(l: Conv2d<T>) -> Self {
        Layer::Conv(l)
    }
}

impl<T> From<ConvTranspose2d<T>> for Layer<T> {
    fn from(l: ConvTranspose2d<T>) -> Self {
        Layer::ConvTranspose(l)
    }
}

impl<T> From<Dense<T>> for Layer<T> {
    fn from(l: Dense<T>) -> Self {
        Layer::Dense(l)
    }
}

impl<T> From<Relu> for Layer<T> {
    fn from(l: Relu) -> Self {
        Layer::Relu(l)
    }
}

impl<T> From<Reshape> for Layer<T> {
    fn from(l: Reshape) -> Self {
        Layer::Reshape(l)
    }
}

/// A chain of layers applied in order.
#[derive(Debug, Clone, Default)]
pub struct Sequential<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Self { layers }
    }

    pub fn push(&mut self, layer: impl Into<Layer<T>>) {
        self.layers.push(layer.into());
    }

    /// Forward pass without recording activations.
    pub fn infer(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut cur = x.clone();
        for l in &self.layers {
            cur = l.infer(&cur)?;
        }
        Ok(cur)
    }

    /// Forward pass recording what [`Sequential::backward`] needs.
    pub fn forward(&mut self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut cur = x.clone();
        for l in &mut self.layers {
            cur = l.forward(&cur)?;
        }
        Ok(cur)
    }

    pub fn backward(&mut self, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut cur = dy.clone();
        for l in self.layers.iter_mut().rev() {
            cur = l.backward(&cur)?;
        }
        Ok(cur)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    /// `(name, param)` pairs, names of the form `{prefix}.{layer}.{weight|bias}`.
    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Param<T>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            for (name, p) in l.param_names().iter().zip(l.params()) {
                out.push((format!("{prefix}.{i}.{name}"), p));
            }
        }
        out
    }

    pub fn named_params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Param<T>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            let names = l.param_names();
            for (name, p) in names.iter().zip(l.params_mut()) {
                out.push((format!("{prefix}.{i}.{name}"), p));
            }
        }
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Output shape for a given input shape, checked layer by layer.
    pub fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        let mut s = input;
        for l in &self.layers {
            s = match l {
                Layer::Conv(c) => c.output_shape(s)?,
                Layer::ConvTranspose(c) => c.output_shape(s)?,
                Layer::Dense(d) => {
                    if s[1] * s[2] * s[3] != d.in_dim() {
                        return Err(Error::shape(d.in_dim(), s));
                    }
                    [s[0], d.out_dim(), 1, 1]
                }
                Layer::Relu(_) => s,
                Layer::Reshape(r) => {
                    let [c, h, w] = r.to;
                    if c * h * w != s[1] * s[2] * s[3] {
                        return Err(Error::shape(r.to, s));
                    }
                    [s[0], c, h, w]
                }
            };
        }
        Ok(s)
    }

    pub fn clear_cache(&mut self) {
        for l in &mut self.layers {
            match l {
                Layer::Conv(c) => c.clear_cache(),
                Layer::ConvTranspose(c) => c.clear_cache(),
                Layer::Dense(d) => d.clear_cache(),
                Layer::Relu(r) => *r = Relu::default(),
                Layer::Reshape(r) => *r = Reshape::new(r.to),
            }
        }
    }
}
