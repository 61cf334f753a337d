//! Golden input/output pairs for extractor parity checks.
//!
//! `goldens/index.json` lists pairs as
//! `{"pairs": [{"name", "input", "output", "sha256_input", "sha256_output"}]}`
//! with file names relative to the index. Inputs are `(3,128,128)` or
//! `(1,3,128,128)` NPY arrays, outputs `(1920,4,4)` or `(1,1920,4,4)`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::npy;
use super::store::sha256_hex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenEntry {
    pub name: String,
    pub input: String,
    pub output: String,
    pub sha256_input: String,
    pub sha256_output: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenIndex {
    pub pairs: Vec<GoldenEntry>,
}

#[derive(Debug, Clone)]
pub struct GoldenPair {
    pub name: String,
    pub input: Vec<f32>,
    pub output: Vec<f32>,
}

fn read_checked(dir: &Path, file: &str, sha: &str, dims: usize) -> Result<Vec<f32>> {
    let path: PathBuf = dir.join(file);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let found = sha256_hex(&bytes);
    if found != sha {
        return Err(Error::Checksum {
            what: path.display().to_string(),
            expected: sha.to_string(),
            found,
        });
    }
    let (shape, data) = npy::from_bytes(&bytes)?;
    let n: usize = shape.iter().product();
    if n != dims {
        return Err(Error::shape(dims, shape));
    }
    Ok(data)
}

/// Loads every pair listed in `dir/index.json`, verifying checksums.
pub fn load_goldens(dir: impl AsRef<Path>) -> Result<Vec<GoldenPair>> {
    let dir = dir.as_ref();
    let path = dir.join("index.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: GoldenIndex = serde_json::from_str(&text)?;
    index
        .pairs
        .iter()
        .map(|e| {
            Ok(GoldenPair {
                name: e.name.clone(),
                input: read_checked(dir, &e.input, &e.sha256_input, 3 * 128 * 128)?,
                output: read_checked(dir, &e.output, &e.sha256_output, 1920 * 4 * 4)?,
            })
        })
        .collect()
}

/// Largest absolute difference between equal-length slices.
pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

/// Runs every golden input through the extractor and returns
/// `(name, max-abs diff)` per pair.
#[cfg(feature = "onnx")]
pub fn check_goldens(
    extractor: &super::Extractor,
    dir: impl AsRef<Path>,
) -> Result<Vec<(String, f32)>> {
    let pairs = load_goldens(dir)?;
    let mut report = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let out = extractor.run_raw(&[&p.input])?;
        report.push((p.name.clone(), max_abs_diff(&out[0], &p.output)));
    }
    Ok(report)
}
