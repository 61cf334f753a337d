//! TOML experiment configuration.
//!
//! ```toml
//! name = "lensless-r2-vae-z500"
//! output_dir = "runs"
//!
//! [data]
//! manifest = "data/lensless/manifest.csv"
//! layout = "r2"                      # image | r1 | r2
//! model = "models/densenet201_features.onnx"
//! feature_cache = "cache/lensless-r2"
//!
//! [embedder]
//! variant = "VAE"
//! latent_dim = 500
//!
//! [protocol]
//! repeats = 5
//! seeds = [0, 1, 2, 3, 4]
//! ```
//!
//! `[data.synthetic]` replaces the manifest with generated features.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::FuzzyConfig;
use crate::embedder::{EmbedderConfig, InputShape, Variant};
use crate::error::{Error, Result};
use crate::features::sha256_hex;
use crate::nn::OptimizerKind;
use crate::supervised::{default_gamma_grid, default_lambda_grid, FcConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub per_class: usize,
    /// Per-sample shape as `CxHxW`.
    pub shape: InputShape,
    #[serde(default)]
    pub seed: u64,
    /// Per-element noise standard deviation around each class template.
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_noise() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    /// `image`, `r1` or `r2`; ignored for synthetic data.
    #[serde(default = "default_layout")]
    pub layout: InputShape,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub feature_cache: Option<PathBuf>,
    #[serde(default = "default_ratio")]
    pub train_ratio: f64,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_layout() -> InputShape {
    InputShape::R2
}

fn default_ratio() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderSection {
    pub variant: Variant,
    pub latent_dim: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_decay")]
    pub sgd_decay: f64,
    #[serde(default)]
    pub optimizer: Option<OptimizerKind>,
    #[serde(default = "default_channels")]
    pub channels: [usize; 3],
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
fn default_decay() -> f64 {
    0.95
}
fn default_channels() -> [usize; 3] {
    [32, 64, 128]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    /// Defaults to the number of classes.
    #[serde(default)]
    pub n_clusters: Option<usize>,
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_m() -> f64 {
    2.0
}
fn default_tol() -> f64 {
    1e-5
}
fn default_max_iter() -> usize {
    300
}

impl Default for ClusterSection {
    fn default() -> Self {
        Self {
            n_clusters: None,
            m: default_m(),
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// One seed per repeat; defaults to `0..repeats`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

fn default_repeats() -> usize {
    5
}
fn default_folds() -> usize {
    5
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            repeats: default_repeats(),
            folds: default_folds(),
            seeds: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heads {
    #[default]
    None,
    Ridge,
    Fc,
    Both,
}

impl Heads {
    pub fn ridge(self) -> bool {
        matches!(self, Heads::Ridge | Heads::Both)
    }

    pub fn fc(self) -> bool {
        matches!(self, Heads::Fc | Heads::Both)
    }
}

impl FromStr for Heads {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Heads::None),
            "ridge" => Ok(Heads::Ridge),
            "fc" => Ok(Heads::Fc),
            "both" => Ok(Heads::Both),
            other => Err(Error::Config(format!("unknown supervised heads {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupervisedSection {
    #[serde(default)]
    pub heads: Heads,
    #[serde(default = "default_lambda_grid")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_gamma_grid")]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub fc: FcConfig,
}

impl Default for SupervisedSection {
    fn default() -> Self {
        Self {
            heads: Heads::None,
            lambdas: default_lambda_grid(),
            gammas: default_gamma_grid(),
            fc: FcConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub embedder: EmbedderSection,
    #[serde(default)]
    pub clustering: ClusterSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub supervised: SupervisedSection,
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.output_dir);
        for p in [&mut cfg.data.manifest, &mut cfg.data.model, &mut cfg.data.feature_cache]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or_else(|| Path::new(".")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        match (&d.manifest, &d.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("data.manifest and data.synthetic are exclusive".into()))
            }
            (None, None) => return Err(Error::Config("data needs a manifest or synthetic section".into())),
            (Some(_), None) => {
                if matches!(d.layout, InputShape::Custom(_)) {
                    return Err(Error::Config(format!(
                        "layout {} is only valid for synthetic data",
                        d.layout
                    )));
                }
                if d.layout != InputShape::Image && d.model.is_none() && d.feature_cache.is_none() {
                    return Err(Error::Config(format!(
                        "layout {} needs data.model or data.feature_cache",
                        d.layout
                    )));
                }
            }
            (None, Some(s)) => {
                if s.classes < 2 || s.per_class < 2 {
                    return Err(Error::Config("synthetic data needs ≥ 2 classes of ≥ 2 samples".into()));
                }
            }
        }
        if !(d.train_ratio > 0.0 && d.train_ratio < 1.0) {
            return Err(Error::Config(format!("train_ratio must be in (0, 1), got {}", d.train_ratio)));
        }
        let p = &self.protocol;
        if p.repeats == 0 {
            return Err(Error::Config("protocol.repeats must be ≥ 1".into()));
        }
        if p.folds < 2 {
            return Err(Error::Config("protocol.folds must be ≥ 2".into()));
        }
        if let Some(seeds) = &p.seeds {
            if seeds.len() != p.repeats {
                return Err(Error::Config(format!(
                    "{} seeds for {} repeats",
                    seeds.len(),
                    p.repeats
                )));
            }
        }
        self.embedder_config(0)?.validate()?;
        if self.supervised.heads.ridge() && (self.supervised.lambdas.is_empty() || self.supervised.gammas.is_empty()) {
            return Err(Error::Config("ridge grid is empty".into()));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.protocol
            .seeds
            .clone()
            .unwrap_or_else(|| (0..self.protocol.repeats as u64).collect())
    }

    /// Embedder input shape: the synthetic shape or the data layout.
    pub fn input_shape(&self) -> InputShape {
        match &self.data.synthetic {
            Some(s) => s.shape,
            None => self.data.layout,
        }
    }

    pub fn embedder_config(&self, seed: u64) -> Result<EmbedderConfig> {
        let e = &self.embedder;
        let mut c = EmbedderConfig::new(e.variant, self.input_shape(), e.latent_dim);
        c.epochs = e.epochs;
        c.batch_size = e.batch_size;
        c.lr = e.lr;
        c.sgd_decay = e.sgd_decay;
        c.optimizer = e.optimizer;
        c.channels = e.channels;
        c.seed = seed;
        Ok(c)
    }

    pub fn fuzzy_config(&self, n_classes: usize, seed: u64) -> FuzzyConfig {
        let c = &self.clustering;
        FuzzyConfig {
            n_clusters: c.n_clusters.unwrap_or(n_classes),
            m: c.m,
            tol: c.tol,
            max_iter: c.max_iter,
            seed,
        }
    }

    /// Row label used in report tables, e.g. `FE_r2-VAE`.
    pub fn algorithm_label(&self) -> String {
        let input = match (&self.data.synthetic, self.data.layout) {
            (Some(_), _) => "Synthetic".to_string(),
            (None, InputShape::Image) => "Image".to_string(),
            (None, layout) => format!("FE_{layout}"),
        };
        format!("{input}-{}", self.embedder.variant)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(serde_json::to_string(self)?.as_bytes()))
    }
}
