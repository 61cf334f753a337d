use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{EmbedderModel, LossParts, Variant};
use crate::error::{Error, Result};
use crate::nn::{Optimizer, Tensor4};

/// Per-epoch means over all training samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub recon_term: f64,
    pub kl_term: f64,
}

/// Trains `model` in place and returns the per-epoch loss history.
///
/// Each epoch visits the samples in a freshly shuffled order, in batches of
/// `batch_size` (the last batch may be short). The shuffle and the VAE noise
/// come from one stream seeded by `config.seed`, so fixed seeds reproduce the
/// run exactly.
pub fn train<S: AsRef<[f32]>>(model: &mut EmbedderModel<f32>, samples: &[S]) -> Result<Vec<EpochStats>> {
    if samples.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let config = model.config().clone();
    let dims = config.input_shape.dims();
    let sample_len = config.input_shape.len();
    if let Some(bad) = samples.iter().find(|s| s.as_ref().len() != sample_len) {
        return Err(Error::shape(dims, bad.as_ref().len()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut optimizer = Optimizer::new(config.optimizer_kind(), config.lr)?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let z = config.latent_dim;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sums = LossParts::default();
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let x = Tensor4::stack(dims, chunk.iter().map(|&i| samples[i].as_ref()))?;
            let eps: Vec<f32> = match config.variant {
                Variant::Vae => (0..chunk.len() * z)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect(),
                Variant::Ae => Vec::new(),
            };
            let parts = model.loss_and_grad(&x, &eps)?;
            if !parts.total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            let mut params = model.params_mut();
            optimizer.step(&mut params, epoch)?;
            let w = chunk.len() as f64;
            sums.total += parts.total * w;
            sums.recon += parts.recon * w;
            sums.kl += parts.kl * w;
        }
        let n = samples.len() as f64;
        let stats = EpochStats {
            epoch,
            mean_loss: sums.total / n,
            recon_term: sums.recon / n,
            kl_term: sums.kl / n,
        };
        log::debug!("epoch {epoch}: loss {:.6}", stats.mean_loss);
        history.push(stats);
    }
    model.clear_cache();

    for w in history.windows(10) {
        if w[9].mean_loss > w[0].mean_loss {
            log::warn!(
                "training loss rose over epochs {}..={}: {:.6} -> {:.6}",
                w[0].epoch,
                w[9].epoch,
                w[0].mean_loss,
                w[9].mean_loss
            );
            break;
        }
    }
    Ok(history)
}

/// Embeds every sample, preserving order.
pub fn encode<S: AsRef<[f32]>>(model: &EmbedderModel<f32>, samples: &[S]) -> Result<Vec<Vec<f32>>> {
    const CHUNK: usize = 64;
    let dims = model.config().input_shape.dims();
    let z = model.latent_dim();
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(CHUNK) {
        let x = Tensor4::stack(dims, chunk.iter().map(|s| s.as_ref()))?;
        let codes = model.encode_batch(&x)?;
        out.extend(codes.data().chunks(z).map(|c| c.to_vec()));
    }
    Ok(out)
}

/// Mean loss over `samples` with the VAE noise fixed at zero (`z = μ`).
pub fn evaluate_loss<S: AsRef<[f32]>>(model: &EmbedderModel<f32>, samples: &[S]) -> Result<LossParts> {
    const CHUNK: usize = 64;
    if samples.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    let dims = model.config().input_shape.dims();
    let z = model.latent_dim();
    let mut sums = LossParts::default();
    for chunk in samples.chunks(CHUNK) {
        let x = Tensor4::stack(dims, chunk.iter().map(|s| s.as_ref()))?;
        let parts = model.loss(&x, &vec![0.0; chunk.len() * z])?;
        let w = chunk.len() as f64;
        sums.total += parts.total * w;
        sums.recon += parts.recon * w;
        sums.kl += parts.kl * w;
    }
    let n = samples.len() as f64;
    Ok(LossParts {
        total: sums.total / n,
        recon: sums.recon / n,
        kl: sums.kl / n,
    })
}

/// Writes the history as CSV: `epoch,mean_loss,recon_term,kl_term`.
pub fn write_history(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for h in history {
        w.serialize(h)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_history_to<W: Write>(out: W, history: &[EpochStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for h in history {
        w.serialize(h)?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}
