use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element count of one extractor output.
pub const FEATURE_LEN: usize = 1920 * 4 * 4;

/// Shape under which a feature tensor is viewed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Extractor output `(1920, 4, 4)`.
    Raw,
    /// `(30, 32, 32)`.
    R1,
    /// `(3, 32, 320)`.
    R2,
}

impl Layout {
    pub fn shape(&self) -> [usize; 3] {
        match self {
            Layout::Raw => [1920, 4, 4],
            Layout::R1 => [30, 32, 32],
            Layout::R2 => [3, 32, 320],
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Raw => "raw",
            Layout::R1 => "r1",
            Layout::R2 => "r2",
        })
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(Layout::Raw),
            "r1" => Ok(Layout::R1),
            "r2" => Ok(Layout::R2),
            other => Err(Error::Config(format!("unknown feature layout {other:?}"))),
        }
    }
}

/// One `(1920, 4, 4)` extractor output.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub data: Vec<f32>,
    pub source_id: String,
}

impl FeatureTensor {
    pub fn new(data: Vec<f32>, source_id: impl Into<String>) -> Result<Self> {
        if data.len() != FEATURE_LEN {
            return Err(Error::shape(Layout::Raw.shape(), data.len()));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "feature values must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self {
            data,
            source_id: source_id.into(),
        })
    }
}

/// Feature values under a [`Layout`]; the flat order is always the
/// extractor's row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReshapedFeature {
    pub data: Vec<f32>,
    pub layout: Layout,
    pub source_id: String,
}

impl ReshapedFeature {
    pub fn shape(&self) -> [usize; 3] {
        self.layout.shape()
    }

    /// Value at `(c, h, w)` of this layout.
    pub fn at(&self, c: usize, h: usize, w: usize) -> f32 {
        let [_, hh, ww] = self.shape();
        self.data[(c * hh + h) * ww + w]
    }
}

impl AsRef<[f32]> for ReshapedFeature {
    fn as_ref(&self) -> &[f32] {
        &self.data
    }
}

/// Relabels `f` under `layout`. The flat sequence is unchanged.
pub fn reshape_features(f: &FeatureTensor, layout: Layout) -> ReshapedFeature {
    ReshapedFeature {
        data: f.data.clone(),
        layout,
        source_id: f.source_id.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iota() -> FeatureTensor {
        FeatureTensor::new((0..FEATURE_LEN).map(|i| i as f32).collect(), "s").unwrap()
    }

    #[test]
    fn reshape_preserves_flat_order() {
        let f = iota();
        for layout in [Layout::R1, Layout::R2, Layout::Raw] {
            let r = reshape_features(&f, layout);
            assert_eq!(r.data, f.data);
            assert_eq!(r.shape().iter().product::<usize>(), FEATURE_LEN);
        }
    }

    #[test]
    fn r2_index_arithmetic_matches_enumeration() {
        let r = reshape_features(&iota(), Layout::R2);
        // enumerate (c, h, w) in row-major order and count
        let mut flat = 0usize;
        for c in 0..3 {
            for h in 0..32 {
                for w in 0..320 {
                    assert_eq!(flat, 32 * 320 * c + 320 * h + w);
                    assert_eq!(r.at(c, h, w), flat as f32);
                    flat += 1;
                }
            }
        }
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(FeatureTensor::new(vec![0.0; 10], "x").is_err());
        assert!(FeatureTensor::new(vec![-1.0; FEATURE_LEN], "x").is_err());
        assert!("r3".parse::<Layout>().is_err());
        assert_eq!("R2".parse::<Layout>().unwrap(), Layout::R2);
    }
}
