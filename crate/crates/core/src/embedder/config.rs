use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::OptimizerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    Ae,
    Vae,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Ae => "AE",
            Variant::Vae => "VAE",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ae" => Ok(Variant::Ae),
            "vae" => Ok(Variant::Vae),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Per-sample `(C, H, W)` input of the embedder.
///
/// Text form: `r1`, `r2`, `image`, or `CxHxW` for anything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InputShape {
    /// Extractor features relabeled to `(30, 32, 32)`.
    R1,
    /// Extractor features relabeled to `(3, 32, 320)`.
    R2,
    /// Raw preprocessed pixels `(3, 128, 128)`.
    Image,
    Custom([usize; 3]),
}

impl InputShape {
    pub fn dims(&self) -> [usize; 3] {
        match self {
            InputShape::R1 => [30, 32, 32],
            InputShape::R2 => [3, 32, 320],
            InputShape::Image => [3, 128, 128],
            InputShape::Custom(d) => *d,
        }
    }

    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for InputShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputShape::R1 => f.write_str("r1"),
            InputShape::R2 => f.write_str("r2"),
            InputShape::Image => f.write_str("image"),
            InputShape::Custom([c, h, w]) => write!(f, "{c}x{h}x{w}"),
        }
    }
}

impl FromStr for InputShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r1" => Ok(InputShape::R1),
            "r2" => Ok(InputShape::R2),
            "image" => Ok(InputShape::Image),
            other => {
                let dims: Vec<usize> = other
                    .split('x')
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Config(format!("bad input shape {s:?}")))?;
                match dims[..] {
                    [c, h, w] if c > 0 && h > 0 && w > 0 => Ok(InputShape::Custom([c, h, w])),
                    _ => Err(Error::Config(format!("bad input shape {s:?}"))),
                }
            }
        }
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for InputShape {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InputShape> for String {
    fn from(s: InputShape) -> String {
        s.to_string()
    }
}

fn default_channels() -> [usize; 3] {
    [32, 64, 128]
}

fn default_epochs() -> usize {
    100
}

fn default_batch() -> usize {
    64
}

fn default_lr() -> f64 {
    0.001
}

fn default_gamma() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub variant: Variant,
    pub input_shape: InputShape,
    pub latent_dim: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Per-epoch decay factor when the optimizer is SGD.
    #[serde(default = "default_gamma")]
    pub sgd_decay: f64,
    /// Overrides the variant's default optimizer (SGD for AE, Adam for VAE).
    #[serde(default)]
    pub optimizer: Option<OptimizerKind>,
    /// Encoder channel schedule; the decoder mirrors it.
    #[serde(default = "default_channels")]
    pub channels: [usize; 3],
    #[serde(default)]
    pub seed: u64,
}

impl EmbedderConfig {
    pub fn new(variant: Variant, input_shape: InputShape, latent_dim: usize) -> Self {
        Self {
            variant,
            input_shape,
            latent_dim,
            epochs: default_epochs(),
            batch_size: default_batch(),
            lr: default_lr(),
            sgd_decay: default_gamma(),
            optimizer: None,
            channels: default_channels(),
            seed: 0,
        }
    }

    pub fn optimizer_kind(&self) -> OptimizerKind {
        self.optimizer.unwrap_or(match self.variant {
            Variant::Ae => OptimizerKind::sgd(self.sgd_decay),
            Variant::Vae => OptimizerKind::adam(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be ≥ 1".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be ≥ 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be > 0".into()));
        }
        if self.channels.contains(&0) {
            return Err(Error::Config("channel schedule entries must be ≥ 1".into()));
        }
        let [_, h, w] = self.input_shape.dims();
        if h % 8 != 0 || w % 8 != 0 {
            return Err(Error::Config(format!(
                "input {} is not spatially divisible by 8 (three stride-2 convolutions)",
                self.input_shape
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_text_round_trip() {
        for s in ["r1", "r2", "image", "3x8x64"] {
            let parsed: InputShape = s.parse().unwrap();
            assert_eq!(parsed.to_string(), s);
        }
        assert_eq!(InputShape::R2.dims(), [3, 32, 320]);
        assert_eq!(InputShape::R1.len(), 30720);
        assert!("3x8".parse::<InputShape>().is_err());
        assert!("0x8x8".parse::<InputShape>().is_err());
    }

    #[test]
    fn default_optimizers_follow_variant() {
        let ae = EmbedderConfig::new(Variant::Ae, InputShape::R1, 10);
        assert_eq!(ae.optimizer_kind(), OptimizerKind::sgd(0.95));
        let vae = EmbedderConfig::new(Variant::Vae, InputShape::R1, 10);
        assert_eq!(vae.optimizer_kind(), OptimizerKind::adam());
        assert_eq!((vae.epochs, vae.batch_size, vae.lr), (100, 64, 0.001));
    }

    #[test]
    fn indivisible_shapes_rejected() {
        let c = EmbedderConfig::new(Variant::Vae, InputShape::Custom([3, 12, 16]), 4);
        assert!(c.validate().is_err());
        let c = EmbedderConfig::new(Variant::Vae, InputShape::Custom([3, 16, 16]), 0);
        assert!(c.validate().is_err());
    }
}
