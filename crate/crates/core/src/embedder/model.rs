use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{loss, reparametrize, EmbedderConfig, LossParts, Variant};
use crate::error::{Error, Result};
use crate::nn::{
    to_f32, Checkpoint, Conv2d, ConvGeometry, ConvTranspose2d, Dense, Param, Relu, Reshape,
    Scalar, Sequential, Tensor4,
};

const CHECKPOINT_FORMAT: &str = "plankton-embedder/1";

/// Convolutional AE or VAE.
///
/// Encoder: three 3×3 stride-2 convolutions with ReLU, then flatten (and, for
/// the AE, a dense bottleneck to `Z`). The VAE adds dense `μ` and log-variance
/// heads. Decoder: dense `Z → flat`, ReLU, three transposed convolutions
/// mirroring the encoder, linear output.
#[derive(Debug, Clone)]
pub struct EmbedderModel<T: Scalar = f32> {
    config: EmbedderConfig,
    encoder: Sequential<T>,
    mu_head: Option<Dense<T>>,
    logvar_head: Option<Dense<T>>,
    decoder: Sequential<T>,
}

impl<T: Scalar> EmbedderModel<T> {
    pub fn build(config: &EmbedderConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let [c, h, w] = config.input_shape.dims();
        let [c1, c2, c3] = config.channels;
        let z = config.latent_dim;
        let g = ConvGeometry::new(3, 2, 1);
        let (bh, bw) = (h / 8, w / 8);
        let flat = c3 * bh * bw;

        let mut encoder = Sequential::default();
        encoder.push(Conv2d::new(c, c1, g, &mut rng));
        encoder.push(Relu::default());
        encoder.push(Conv2d::new(c1, c2, g, &mut rng));
        encoder.push(Relu::default());
        encoder.push(Conv2d::new(c2, c3, g, &mut rng));
        encoder.push(Relu::default());
        encoder.push(Reshape::flatten(flat));

        let (mu_head, logvar_head) = match config.variant {
            Variant::Ae => {
                encoder.push(Dense::new(flat, z, &mut rng));
                (None, None)
            }
            Variant::Vae => (
                Some(Dense::new(flat, z, &mut rng)),
                Some(Dense::new(flat, z, &mut rng)),
            ),
        };

        let mut decoder = Sequential::default();
        decoder.push(Dense::new(z, flat, &mut rng));
        decoder.push(Relu::default());
        decoder.push(Reshape::new([c3, bh, bw]));
        decoder.push(ConvTranspose2d::new(c3, c2, g, 1, &mut rng));
        decoder.push(Relu::default());
        decoder.push(ConvTranspose2d::new(c2, c1, g, 1, &mut rng));
        decoder.push(Relu::default());
        decoder.push(ConvTranspose2d::new(c1, c, g, 1, &mut rng));

        let model = Self {
            config: config.clone(),
            encoder,
            mu_head,
            logvar_head,
            decoder,
        };
        let out = model.decoder.output_shape([1, z, 1, 1])?;
        if out[1..] != [c, h, w] {
            return Err(Error::shape([1, c, h, w], out));
        }
        Ok(model)
    }

    pub fn config(&self) -> &EmbedderConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.named_params().into_iter().map(|(_, p)| p).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.named_params_mut().into_iter().map(|(_, p)| p).collect()
    }

    pub fn named_params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = self.encoder.named_params("encoder");
        if let Some(h) = &self.mu_head {
            out.push(("mu_head.weight".into(), &h.weight));
            out.push(("mu_head.bias".into(), &h.bias));
        }
        if let Some(h) = &self.logvar_head {
            out.push(("logvar_head.weight".into(), &h.weight));
            out.push(("logvar_head.bias".into(), &h.bias));
        }
        out.extend(self.decoder.named_params("decoder"));
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Param<T>)> {
        let mut out = self.encoder.named_params_mut("encoder");
        if let Some(h) = &mut self.mu_head {
            out.push(("mu_head.weight".into(), &mut h.weight));
            out.push(("mu_head.bias".into(), &mut h.bias));
        }
        if let Some(h) = &mut self.logvar_head {
            out.push(("logvar_head.weight".into(), &mut h.weight));
            out.push(("logvar_head.bias".into(), &mut h.bias));
        }
        out.extend(self.decoder.named_params_mut("decoder"));
        out
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<()> {
        let [_, c, h, w] = x.shape();
        if [c, h, w] != self.config.input_shape.dims() {
            return Err(Error::shape(self.config.input_shape.dims(), [c, h, w]));
        }
        Ok(())
    }

    /// Embeds a batch: the AE bottleneck, or the posterior mean `μ(x)` for
    /// the VAE. Shape `(N, Z, 1, 1)`.
    pub fn encode_batch(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check_input(x)?;
        let h = self.encoder.infer(x)?;
        match &self.mu_head {
            Some(mu) => mu.infer(&h),
            None => Ok(h),
        }
    }

    /// Posterior `(μ, logvar)` of a batch; `None` for the AE.
    pub fn posterior(&self, x: &Tensor4<T>) -> Result<Option<(Tensor4<T>, Tensor4<T>)>> {
        self.check_input(x)?;
        match (&self.mu_head, &self.logvar_head) {
            (Some(mu), Some(lv)) => {
                let h = self.encoder.infer(x)?;
                Ok(Some((mu.infer(&h)?, lv.infer(&h)?)))
            }
            _ => Ok(None),
        }
    }

    pub fn decode(&self, z: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.decoder.infer(z)
    }

    /// Loss of a batch without touching gradients. `eps` holds the VAE noise
    /// (`N·Z` values, row per sample) and is ignored for the AE.
    pub fn loss(&self, x: &Tensor4<T>, eps: &[T]) -> Result<LossParts> {
        self.check_input(x)?;
        let h = self.encoder.infer(x)?;
        match (&self.mu_head, &self.logvar_head) {
            (Some(mu_head), Some(lv_head)) => {
                let mu = mu_head.infer(&h)?;
                let lv = lv_head.infer(&h)?;
                let z = reparametrize(mu.data(), lv.data(), eps)?;
                let z = Tensor4::from_vec(mu.shape(), z)?;
                let recon = self.decoder.infer(&z)?.reshaped_like(x)?;
                loss(Variant::Vae, x, &recon, mu.data(), lv.data())
            }
            _ => {
                let recon = self.decoder.infer(&h)?.reshaped_like(x)?;
                loss(Variant::Ae, x, &recon, &[], &[])
            }
        }
    }

    /// Forward and backward over one batch: clears and fills every
    /// parameter's gradient with that of [`EmbedderModel::loss`].
    pub fn loss_and_grad(&mut self, x: &Tensor4<T>, eps: &[T]) -> Result<LossParts> {
        self.check_input(x)?;
        for p in self.params_mut() {
            p.zero_grad();
        }
        let n = x.batch().max(1);
        let inv_n = T::one() / T::lit(n as f64);
        let two_inv_n = T::lit(2.0) * inv_n;
        let half = T::lit(0.5);

        let h = self.encoder.forward(x)?;
        match (&mut self.mu_head, &mut self.logvar_head) {
            (Some(mu_head), Some(lv_head)) => {
                let mu = mu_head.forward(&h)?;
                let lv = lv_head.forward(&h)?;
                let z = reparametrize(mu.data(), lv.data(), eps)?;
                let z = Tensor4::from_vec(mu.shape(), z)?;
                let recon = self.decoder.forward(&z)?.reshaped_like(x)?;
                let parts = loss(Variant::Vae, x, &recon, mu.data(), lv.data())?;

                let d_recon = recon_grad(x, &recon, two_inv_n)?;
                let dz = self.decoder.backward(&d_recon)?;
                let mut dmu = mu.clone();
                let mut dlv = lv.clone();
                for i in 0..dz.data().len() {
                    let (m, l, e, g) = (mu.data()[i], lv.data()[i], eps[i], dz.data()[i]);
                    let sigma = (l * half).exp();
                    dmu.data_mut()[i] = g + m * inv_n;
                    dlv.data_mut()[i] =
                        g * e * half * sigma + half * (l.exp() - T::one()) * inv_n;
                }
                let mut dh = mu_head.backward(&dmu)?;
                let dh_lv = lv_head.backward(&dlv)?;
                for (a, &b) in dh.data_mut().iter_mut().zip(dh_lv.data()) {
                    *a = *a + b;
                }
                self.encoder.backward(&dh)?;
                Ok(parts)
            }
            _ => {
                let recon = self.decoder.forward(&h)?.reshaped_like(x)?;
                let parts = loss(Variant::Ae, x, &recon, &[], &[])?;
                let d_recon = recon_grad(x, &recon, two_inv_n)?;
                let dh = self.decoder.backward(&d_recon)?;
                self.encoder.backward(&dh)?;
                Ok(parts)
            }
        }
    }

    /// Drops activations recorded by the last training forward pass.
    pub fn clear_cache(&mut self) {
        self.encoder.clear_cache();
        self.decoder.clear_cache();
        if let Some(h) = &mut self.mu_head {
            h.clear_cache();
        }
        if let Some(h) = &mut self.logvar_head {
            h.clear_cache();
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ckpt = Checkpoint::new(serde_json::json!({
            "format": CHECKPOINT_FORMAT,
            "config": self.config,
        }));
        for (name, p) in self.named_params() {
            ckpt.push(name, &p.shape, to_f32(&p.value))?;
        }
        Ok(ckpt)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.meta.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(Error::Checkpoint("not an embedder checkpoint".into()));
        }
        let config: EmbedderConfig = serde_json::from_value(
            ckpt.meta
                .get("config")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("missing config".into()))?,
        )?;
        let mut model = Self::build(&config)?;
        for (name, p) in model.named_params_mut() {
            let t = ckpt
                .get(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if t.shape != p.shape {
                return Err(Error::Checkpoint(format!(
                    "{name}: stored shape {:?}, model expects {:?}",
                    t.shape, p.shape
                )));
            }
            for (v, &s) in p.value.iter_mut().zip(&t.data) {
                *v = T::lit(s as f64);
            }
        }
        Ok(model)
    }
}

fn recon_grad<T: Scalar>(x: &Tensor4<T>, recon: &Tensor4<T>, scale: T) -> Result<Tensor4<T>> {
    let data = recon
        .data()
        .iter()
        .zip(x.data())
        .map(|(&r, &v)| scale * (r - v))
        .collect();
    Tensor4::from_vec(recon.shape(), data)
}

impl<T: Scalar> Tensor4<T> {
    fn reshaped_like(self, other: &Tensor4<T>) -> Result<Tensor4<T>> {
        let [_, c, h, w] = other.shape();
        self.reshaped(c, h, w)
    }
}
