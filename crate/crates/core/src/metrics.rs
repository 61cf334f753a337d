//! Clustering purity, number of class overlaps, accuracy and run aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cluster ids paired with ground-truth class ids, one per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledAssignment<'a> {
    clusters: &'a [usize],
    classes: &'a [usize],
}

impl<'a> LabeledAssignment<'a> {
    pub fn new(clusters: &'a [usize], classes: &'a [usize]) -> Result<Self> {
        if clusters.len() != classes.len() {
            return Err(Error::shape(
                format!("{} class labels", clusters.len()),
                classes.len(),
            ));
        }
        if clusters.is_empty() {
            return Err(Error::invalid("empty assignment"));
        }
        Ok(Self { clusters, classes })
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// `table[cluster][class]` = number of samples in both.
    fn contingency(&self) -> BTreeMap<usize, BTreeMap<usize, usize>> {
        let mut table: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
        for (&w, &c) in self.clusters.iter().zip(self.classes) {
            *table.entry(w).or_default().entry(c).or_default() += 1;
        }
        table
    }

    /// `(1/N) Σ_k max_j |w_k ∩ c_j|`.
    pub fn purity(&self) -> f64 {
        let hits: usize = self
            .contingency()
            .values()
            .map(|row| row.values().copied().max().unwrap_or(0))
            .sum();
        hits as f64 / self.len() as f64
    }

    /// Each class's primary cluster: the one holding most of its samples,
    /// ties to the lowest cluster id.
    pub fn class_to_cluster(&self) -> BTreeMap<usize, usize> {
        let mut per_class: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
        for (&w, &c) in self.clusters.iter().zip(self.classes) {
            *per_class.entry(c).or_default().entry(w).or_default() += 1;
        }
        per_class
            .into_iter()
            .map(|(c, row)| (c, argmax_low(&row)))
            .collect()
    }

    /// Each cluster's majority class, ties to the lowest class id.
    pub fn cluster_to_class(&self) -> BTreeMap<usize, usize> {
        self.contingency()
            .into_iter()
            .map(|(w, row)| (w, argmax_low(&row)))
            .collect()
    }

    pub fn overlaps(&self, rule: OverlapRule) -> usize {
        match rule {
            OverlapRule::ClassCollisions | OverlapRule::ClassPairs => {
                let mut per_cluster: BTreeMap<usize, usize> = BTreeMap::new();
                for w in self.class_to_cluster().into_values() {
                    *per_cluster.entry(w).or_default() += 1;
                }
                per_cluster
                    .values()
                    .map(|&n| match rule {
                        OverlapRule::ClassPairs => n * n.saturating_sub(1) / 2,
                        _ => n.saturating_sub(1),
                    })
                    .sum()
            }
            OverlapRule::UnclaimedClasses => {
                let n_classes = self.classes.iter().collect::<std::collections::BTreeSet<_>>().len();
                let claimed = self
                    .cluster_to_class()
                    .into_values()
                    .collect::<std::collections::BTreeSet<_>>()
                    .len();
                n_classes - claimed
            }
        }
    }
}

fn argmax_low(row: &BTreeMap<usize, usize>) -> usize {
    let mut best: Option<(usize, usize)> = None;
    for (&id, &n) in row {
        if best.map_or(true, |(_, bn)| n > bn) {
            best = Some((id, n));
        }
    }
    best.map(|(id, _)| id).unwrap_or(0)
}

/// How class/cluster collisions are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapRule {
    /// Map every class to its primary cluster and count `Σ max(0, n − 1)`
    /// over clusters receiving `n` classes. Zero iff the map is injective.
    #[default]
    ClassCollisions,
    /// As above but counting colliding class pairs, `Σ n(n−1)/2`.
    ClassPairs,
    /// Map every cluster to its majority class and count the classes that
    /// no cluster claims.
    UnclaimedClasses,
}

pub fn purity(clusters: &[usize], classes: &[usize]) -> Result<f64> {
    Ok(LabeledAssignment::new(clusters, classes)?.purity())
}

/// Number of overlaps under the default [`OverlapRule::ClassCollisions`].
pub fn overlaps(clusters: &[usize], classes: &[usize]) -> Result<usize> {
    overlaps_with(clusters, classes, OverlapRule::default())
}

pub fn overlaps_with(clusters: &[usize], classes: &[usize], rule: OverlapRule) -> Result<usize> {
    Ok(LabeledAssignment::new(clusters, classes)?.overlaps(rule))
}

pub fn accuracy<L: PartialEq>(predictions: &[L], labels: &[L]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(labels.len(), predictions.len()));
    }
    if labels.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Mean and population standard deviation over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub runs: Vec<f64>,
}

impl MetricSummary {
    pub fn min(&self) -> f64 {
        self.runs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.runs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn aggregate(runs: &[f64]) -> Result<MetricSummary> {
    if runs.is_empty() {
        return Err(Error::invalid("no runs to aggregate"));
    }
    let n = runs.len() as f64;
    let mean = runs.iter().sum::<f64>() / n;
    let var = runs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    // keep the mean inside [min, max] despite rounding
    let lo = runs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = runs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MetricSummary {
        mean: mean.clamp(lo, hi),
        std: var.sqrt(),
        runs: runs.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn purity_examples() {
        assert_eq!(purity(&[0, 0, 1, 1, 2], &[5, 5, 3, 3, 9]).unwrap(), 1.0);
        // {A,A,A,B} and {B,B}
        let p = purity(&[0, 0, 0, 0, 1, 1], &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((p - 5.0 / 6.0).abs() < 1e-15);
        let p = purity(&[0; 12], &[0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
        assert!(purity(&[0, 1], &[0]).is_err());
        assert!(purity(&[], &[]).is_err());
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlaps(&[2, 2, 0, 0, 1], &[0, 0, 1, 1, 2]).unwrap(), 0);
        // classes 1 and 2 majority in cluster 0, class 3 in cluster 1
        let clusters = [0, 0, 1, 0, 0, 1, 1, 1, 0];
        let classes = [1, 1, 1, 2, 2, 2, 3, 3, 3];
        assert_eq!(overlaps(&clusters, &classes).unwrap(), 1);
        assert_eq!(overlaps(&[0; 6], &[0, 1, 2, 3, 4, 5]).unwrap(), 5);
        assert_eq!(overlaps_with(&[0; 4], &[0, 1, 2, 3], OverlapRule::ClassPairs).unwrap(), 6);
        assert_eq!(
            overlaps_with(&[0; 4], &[0, 1, 2, 3], OverlapRule::UnclaimedClasses).unwrap(),
            3
        );
    }

    #[test]
    fn primary_cluster_ties_go_low() {
        let a = LabeledAssignment::new(&[3, 1], &[0, 0]).unwrap();
        assert_eq!(a.class_to_cluster()[&0], 1);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0, 1], &[0, 1, 0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 1, 0, 1], &[1, 1, 0, 0]).unwrap(), 0.75);
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let s = aggregate(&[0.5]).unwrap();
        assert_eq!((s.mean, s.std), (0.5, 0.0));
        let s = aggregate(&[0.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.std), (0.5, 0.5));
        let s = aggregate(&[0.3; 5]).unwrap();
        assert_eq!(s.std, 0.0);
        assert!(s.mean >= s.min() && s.mean <= s.max());
        assert!(aggregate(&[]).is_err());
    }
}
