//! Generated feature datasets for smoke runs.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::SyntheticConfig;
use crate::data::{Manifest, ManifestEntry};
use crate::error::{Error, Result};

/// Manifest plus one flat sample per entry, in manifest order.
///
/// Class `c` draws a template uniformly from `[0, 1)` per element; samples are
/// `max(0, template + noise · N(0, 1))`, so values stay non-negative like
/// post-ReLU extractor features.
pub fn generate(cfg: &SyntheticConfig) -> Result<(Manifest, Vec<Vec<f32>>)> {
    let len = cfg.shape.len();
    let noise = Normal::new(0.0, cfg.noise)
        .map_err(|e| Error::Config(format!("synthetic noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let templates: Vec<Vec<f64>> = (0..cfg.classes)
        .map(|_| (0..len).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let mut entries = Vec::with_capacity(cfg.classes * cfg.per_class);
    let mut samples = Vec::with_capacity(entries.capacity());
    for i in 0..cfg.per_class {
        for (c, t) in templates.iter().enumerate() {
            let id = format!("synthetic/class_{c}/{i:04}");
            entries.push(ManifestEntry {
                source_id: id.clone(),
                path: PathBuf::from(id),
                label: format!("class_{c}"),
                split: None,
            });
            samples.push(
                t.iter()
                    .map(|&v| (v + noise.sample(&mut rng)).max(0.0) as f32)
                    .collect(),
            );
        }
    }
    Ok((Manifest::from_entries("synthetic", entries)?, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::InputShape;

    #[test]
    fn shape_labels_and_determinism() {
        let cfg = SyntheticConfig {
            classes: 3,
            per_class: 4,
            shape: InputShape::Custom([1, 8, 8]),
            seed: 5,
            noise: 0.1,
        };
        let (m, x) = generate(&cfg).unwrap();
        assert_eq!(m.len(), 12);
        assert_eq!(m.n_classes(), 3);
        assert!(x.iter().all(|s| s.len() == 64 && s.iter().all(|v| *v >= 0.0)));
        assert_eq!(generate(&cfg).unwrap().1, x);
    }
}
