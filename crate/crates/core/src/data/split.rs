//! Stratified train/test splits and k-fold partitions.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Manifest, SplitHint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    /// `k` disjoint lists whose union is `train_ids`.
    pub folds: Vec<Vec<String>>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Training ids outside fold `i`.
    pub fn fit_ids(&self, i: usize) -> Vec<String> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}

/// Source ids grouped by label, labels sorted, ids in manifest order.
fn by_class<'a>(manifest: &'a Manifest, keep: impl Fn(&str) -> bool) -> BTreeMap<&'a str, Vec<&'a str>> {
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &manifest.entries {
        if keep(&e.source_id) {
            groups.entry(&e.label).or_default().push(&e.source_id);
        }
    }
    groups
}

/// Splits `manifest` into train/test and partitions train into `k` folds.
///
/// Fully hinted manifests keep their hints and ignore `ratio`; otherwise every
/// class is shuffled and `round(ratio · n_c)` of it goes to train. Folds deal
/// each class round-robin, so per-class fold sizes differ by at most one.
pub fn make_splits(manifest: &Manifest, ratio: f64, k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::Split(format!("k must be ≥ 2, got {k}")));
    }
    if let Some((label, n)) = manifest.class_counts().into_iter().find(|(_, n)| *n < k) {
        return Err(Error::Split(format!(
            "class {label:?} has {n} samples, fewer than k = {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train_ids, test_ids) = if manifest.fully_hinted() {
        let pick = |h: SplitHint| {
            manifest
                .entries
                .iter()
                .filter(|e| e.split == Some(h))
                .map(|e| e.source_id.clone())
                .collect::<Vec<_>>()
        };
        (pick(SplitHint::Train), pick(SplitHint::Test))
    } else {
        if manifest.partially_hinted() {
            return Err(Error::Split(
                "split hints must cover every entry or none".into(),
            ));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Split(format!("ratio must be in (0, 1), got {ratio}")));
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (_, mut ids) in by_class(manifest, |_| true) {
            ids.shuffle(&mut rng);
            let n = ids.len();
            let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
            train.extend(ids[..n_train].iter().map(|s| s.to_string()));
            test.extend(ids[n_train..].iter().map(|s| s.to_string()));
        }
        (train, test)
    };
    if train_ids.is_empty() {
        return Err(Error::Split("empty training split".into()));
    }
    let folds = make_folds(manifest, &train_ids, k, &mut rng)?;
    Ok(SplitPlan {
        train_ids,
        test_ids,
        folds,
        seed,
    })
}

/// Re-draws the folds of `plan` from a new seed, keeping train/test fixed.
pub fn redraw_folds(manifest: &Manifest, plan: &SplitPlan, seed: u64) -> Result<SplitPlan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let folds = make_folds(manifest, &plan.train_ids, plan.k(), &mut rng)?;
    Ok(SplitPlan {
        train_ids: plan.train_ids.clone(),
        test_ids: plan.test_ids.clone(),
        folds,
        seed,
    })
}

fn make_folds(manifest: &Manifest, train_ids: &[String], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<String>>> {
    if train_ids.len() < k {
        return Err(Error::Split(format!(
            "{} training samples cannot fill {k} folds",
            train_ids.len()
        )));
    }
    let train: std::collections::HashSet<&str> = train_ids.iter().map(String::as_str).collect();
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for (_, mut ids) in by_class(manifest, |id| train.contains(id)) {
        ids.shuffle(rng);
        for (i, id) in ids.iter().enumerate() {
            folds[(offset + i) % k].push(id.to_string());
        }
        offset += ids.len();
    }
    Ok(folds)
}
