//! Fully-connected softmax classifier `Z → 256 → 128 → C`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Dense, Optimizer, OptimizerKind, Param, Relu, Scalar, Sequential, Tensor4};

fn default_hidden() -> [usize; 2] {
    [256, 128]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcConfig {
    pub hidden: [usize; 2],
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for FcConfig {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            epochs: 100,
            batch_size: 32,
            lr: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FcClassifier<T: Scalar = f32> {
    net: Sequential<T>,
    in_dim: usize,
    n_classes: usize,
}

impl<T: Scalar> FcClassifier<T> {
    pub fn new(in_dim: usize, n_classes: usize, hidden: [usize; 2], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Sequential::default();
        net.push(Dense::new(in_dim, hidden[0], &mut rng));
        net.push(Relu::default());
        net.push(Dense::new(hidden[0], hidden[1], &mut rng));
        net.push(Relu::default());
        net.push(Dense::new(hidden[1], n_classes, &mut rng));
        Self {
            net,
            in_dim,
            n_classes,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.net.params_mut()
    }

    fn batch<X: AsRef<[T]>>(&self, x: &[X]) -> Result<Tensor4<T>> {
        Tensor4::stack([self.in_dim, 1, 1], x.iter().map(|r| r.as_ref()))
    }

    /// Class scores (logits), one row per input.
    pub fn scores<X: AsRef<[T]>>(&self, x: &[X]) -> Result<Vec<Vec<T>>> {
        let out = self.net.infer(&self.batch(x)?)?;
        Ok(out.data().chunks(self.n_classes).map(<[T]>::to_vec).collect())
    }

    pub fn predict<X: AsRef<[T]>>(&self, x: &[X]) -> Result<Vec<usize>> {
        Ok(self
            .scores(x)?
            .iter()
            .map(|row| {
                let mut best = 0;
                for (j, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }

    /// Mean softmax cross-entropy of a batch without touching gradients.
    pub fn loss<X: AsRef<[T]>>(&self, x: &[X], y: &[usize]) -> Result<f64> {
        let logits = self.net.infer(&self.batch(x)?)?;
        Ok(cross_entropy(logits.data(), y, self.n_classes)?.0)
    }

    /// Mean cross-entropy of a batch; fills parameter gradients.
    pub fn loss_and_grad<X: AsRef<[T]>>(&mut self, x: &[X], y: &[usize]) -> Result<f64> {
        self.net.zero_grad();
        let logits = self.net.forward(&self.batch(x)?)?;
        let (loss, grad) = cross_entropy(logits.data(), y, self.n_classes)?;
        self.net.backward(&Tensor4::from_vec(logits.shape(), grad)?)?;
        Ok(loss)
    }
}

/// Returns the mean loss and its gradient w.r.t. the logits.
fn cross_entropy<T: Scalar>(logits: &[T], y: &[usize], n_classes: usize) -> Result<(f64, Vec<T>)> {
    if logits.len() != y.len() * n_classes {
        return Err(Error::shape(y.len() * n_classes, logits.len()));
    }
    let n = y.len().max(1);
    let inv_n = T::one() / T::lit(n as f64);
    let mut grad = vec![T::zero(); logits.len()];
    let mut total = 0.0;
    for ((row, g), &label) in logits.chunks(n_classes).zip(grad.chunks_mut(n_classes)).zip(y) {
        if label >= n_classes {
            return Err(Error::invalid(format!("label {label} ≥ {n_classes} classes")));
        }
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        total += (sum.ln() - (row[label] - max)).to_f64().unwrap_or(f64::NAN);
        for (j, (gj, e)) in g.iter_mut().zip(&exps).enumerate() {
            let hot = if j == label { T::one() } else { T::zero() };
            *gj = (*e / sum - hot) * inv_n;
        }
    }
    Ok((total / n as f64, grad))
}

/// Plain SGD on softmax cross-entropy with seeded shuffling. Returns the
/// classifier and the per-epoch mean loss.
pub fn fc_train<X: AsRef<[f32]>>(x: &[X], y: &[usize], config: &FcConfig) -> Result<(FcClassifier<f32>, Vec<f64>)> {
    if x.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if x.len() != y.len() {
        return Err(Error::shape(x.len(), y.len()));
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::Config("epochs and batch_size must be ≥ 1".into()));
    }
    let in_dim = x[0].as_ref().len();
    let n_classes = y.iter().max().map_or(1, |m| m + 1).max(2);
    let mut clf = FcClassifier::new(in_dim, n_classes, config.hidden, config.seed);
    let mut opt = Optimizer::new(OptimizerKind::sgd(1.0), config.lr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let bx: Vec<&[f32]> = chunk.iter().map(|&i| x[i].as_ref()).collect();
            let by: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let loss = clf.loss_and_grad(&bx, &by)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            opt.step(&mut clf.params_mut(), epoch)?;
            sum += loss * chunk.len() as f64;
        }
        history.push(sum / x.len() as f64);
    }
    Ok((clf, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let (loss, grad) = cross_entropy(&[0.0f64, 0.0, 0.0, 0.0], &[1, 0], 2).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
        assert_eq!(grad, vec![0.25, -0.25, -0.25, 0.25]);
        assert!(cross_entropy(&[0.0f64, 0.0], &[2], 2).is_err());
    }

    #[test]
    fn single_sample_is_memorized() {
        let (clf, hist) = fc_train(&[vec![0.3f32, -1.2, 0.8]], &[1], &FcConfig::default()).unwrap();
        assert_eq!(clf.predict(&[vec![0.3f32, -1.2, 0.8]]).unwrap(), vec![1]);
        assert!(hist.last().unwrap() < &hist[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let x = vec![vec![0.0f32, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]];
        let y = vec![0, 1, 0];
        let cfg = FcConfig {
            epochs: 5,
            ..FcConfig::default()
        };
        let (a, _) = fc_train(&x, &y, &cfg).unwrap();
        let (b, _) = fc_train(&x, &y, &cfg).unwrap();
        for (p, q) in a.params().iter().zip(b.params()) {
            assert_eq!(p.value, q.value);
        }
        assert!(fc_train::<Vec<f32>>(&[], &[], &cfg).is_err());
    }
}
