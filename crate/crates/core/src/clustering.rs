//! Fuzzy c-means.
//!
//! Alternates centroid and membership updates
//!
//! ```text
//! c_j  = Σ_i u_ij^m x_i / Σ_i u_ij^m
//! u_ij = 1 / Σ_l (‖x_i − c_j‖ / ‖x_i − c_l‖)^(2/(m−1))
//! ```
//!
//! from seeded random row-normalized memberships until the largest centroid
//! move is at most `tol` or `max_iter` is reached.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_m() -> f64 {
    2.0
}

fn default_tol() -> f64 {
    1e-5
}

fn default_max_iter() -> usize {
    300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyConfig {
    pub n_clusters: usize,
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
}

impl FuzzyConfig {
    pub fn new(n_clusters: usize) -> Self {
        Self {
            n_clusters,
            m: default_m(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clusters < 2 {
            return Err(Error::Config("n_clusters must be ≥ 2".into()));
        }
        if !(self.m > 1.0) || !self.m.is_finite() {
            return Err(Error::Config(format!("fuzzifier m must be > 1, got {}", self.m)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be > 0".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub config: FuzzyConfig,
    pub centroids: Vec<Vec<f64>>,
    /// Training memberships, `n × k`. Not persisted.
    #[serde(skip)]
    pub memberships: Vec<Vec<f64>>,
    pub iterations_run: usize,
    pub final_shift: f64,
    /// Set when every input point was identical.
    #[serde(default)]
    pub degenerate: bool,
    /// Objective after every membership update. Not persisted.
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points<P: AsRef<[f64]>>(points: &[P]) -> Result<usize> {
    let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
    for (i, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(Error::shape(dim, format!("point {i} of length {}", p.len())));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("point {i} is not finite")));
        }
    }
    Ok(dim)
}

/// Membership row of one point against fixed centroids.
///
/// Exact hits (zero distance) get a one-hot row at the lowest such centroid.
fn membership_row(point: &[f64], centroids: &[Vec<f64>], m: f64, out: &mut [f64]) {
    let d2: Vec<f64> = centroids.iter().map(|c| sq_dist(point, c)).collect();
    // point sits on one or more centroids: share membership among them
    let hits = d2.iter().filter(|&&d| d == 0.0).count();
    if hits > 0 {
        for (u, &d) in out.iter_mut().zip(&d2) {
            *u = if d == 0.0 { 1.0 / hits as f64 } else { 0.0 };
        }
        return;
    }
    // (d_min/d_l)^(2/(m-1)) in (0, 1], so large exponents cannot overflow
    let d_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let exponent = 1.0 / (m - 1.0);
    let mut total = 0.0;
    for (u, &d) in out.iter_mut().zip(&d2) {
        *u = (d_min / d).powf(exponent);
        total += *u;
    }
    out.iter_mut().for_each(|u| *u /= total);
}

fn update_centroids<P: AsRef<[f64]>>(points: &[P], u: &[Vec<f64>], m: f64, dim: usize, k: usize) -> Vec<Vec<f64>> {
    let mut num = vec![vec![0.0; dim]; k];
    let mut den = vec![0.0; k];
    for (p, row) in points.iter().zip(u) {
        for j in 0..k {
            let w = row[j].powf(m);
            den[j] += w;
            for (acc, &x) in num[j].iter_mut().zip(p.as_ref()) {
                *acc += w * x;
            }
        }
    }
    for (c, d) in num.iter_mut().zip(&den) {
        if *d > 0.0 {
            c.iter_mut().for_each(|v| *v /= d);
        }
    }
    num
}

/// `J_m = Σ_ij u_ij^m ‖x_i − c_j‖²`.
pub fn objective<P: AsRef<[f64]>>(points: &[P], centroids: &[Vec<f64>], u: &[Vec<f64>], m: f64) -> f64 {
    points
        .iter()
        .zip(u)
        .map(|(p, row)| {
            centroids
                .iter()
                .zip(row)
                .map(|(c, &uij)| uij.powf(m) * sq_dist(p.as_ref(), c))
                .sum::<f64>()
        })
        .sum()
}

/// Seeded random memberships, each row normalized to sum to one.
pub fn initial_memberships(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..k).map(|_| rng.gen_range(1e-3..1.0)).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            row
        })
        .collect()
}

pub fn fit<P: AsRef<[f64]>>(points: &[P], config: &FuzzyConfig) -> Result<ClusterModel> {
    config.validate()?;
    let k = config.n_clusters;
    let n = points.len();
    if n < k {
        return Err(Error::invalid(format!("{n} points cannot form {k} clusters")));
    }
    let dim = check_points(points)?;
    let m = config.m;

    let first = points[0].as_ref();
    let degenerate = points.iter().all(|p| p.as_ref() == first);
    if degenerate {
        log::warn!("all {n} points are identical; centroids will coincide");
    }

    let mut u = initial_memberships(n, k, config.seed);
    let mut centroids: Vec<Vec<f64>> = Vec::new();
    let mut history = Vec::new();
    let mut shift = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let next = update_centroids(points, &u, m, dim, k);
        shift = if centroids.is_empty() {
            f64::INFINITY
        } else {
            centroids
                .iter()
                .zip(&next)
                .map(|(a, b)| sq_dist(a, b).sqrt())
                .fold(0.0, f64::max)
        };
        centroids = next;
        for (p, row) in points.iter().zip(u.iter_mut()) {
            membership_row(p.as_ref(), &centroids, m, row);
        }
        let j = objective(points, &centroids, &u, m);
        if cfg!(debug_assertions) {
            if let Some(&prev) = history.last() {
                debug_assert!(
                    j <= prev * (1.0 + 1e-9) + 1e-12,
                    "fuzzy objective increased: {prev} -> {j}"
                );
            }
        }
        history.push(j);
        if shift <= config.tol {
            break;
        }
    }

    Ok(ClusterModel {
        config: config.clone(),
        centroids,
        memberships: u,
        iterations_run: iterations,
        final_shift: shift,
        degenerate,
        objective_history: history,
    })
}

impl ClusterModel {
    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map(Vec::len).unwrap_or(0)
    }

    /// Memberships of new points against the frozen centroids.
    pub fn assign<P: AsRef<[f64]>>(&self, points: &[P], m: f64) -> Result<Vec<Vec<f64>>> {
        assign(&self.centroids, points, m)
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

pub fn assign<P: AsRef<[f64]>>(centroids: &[Vec<f64>], points: &[P], m: f64) -> Result<Vec<Vec<f64>>> {
    if !(m > 1.0) {
        return Err(Error::invalid(format!("fuzzifier m must be > 1, got {m}")));
    }
    let dim = centroids.first().map(Vec::len).unwrap_or(0);
    let mut out = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(Error::shape(dim, format!("point {i} of length {}", p.len())));
        }
        let mut row = vec![0.0; centroids.len()];
        membership_row(p, centroids, m, &mut row);
        out.push(row);
    }
    Ok(out)
}

/// Argmax per row; ties go to the lowest cluster index.
pub fn harden<R: AsRef<[f64]>>(memberships: &[R]) -> Vec<usize> {
    memberships
        .iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.as_ref().iter().enumerate() {
                if v > row.as_ref()[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Writes `source_id,cluster` rows.
pub fn write_labels(path: &Path, ids: &[String], labels: &[usize]) -> Result<()> {
    if ids.len() != labels.len() {
        return Err(Error::shape(ids.len(), labels.len()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["source_id", "cluster"])?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.as_str(), &l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<(String, usize)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let cluster = rec
            .get(1)
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| Error::invalid(format!("bad cluster label for {id}")))?;
        out.push((id, cluster));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, Normal};

    use super::*;

    pub(crate) fn blobs(centers: &[[f64; 2]], per: usize, sigma: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut pts = Vec::new();
        let mut lab = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per {
                pts.push(vec![center[0] + noise.sample(&mut rng), center[1] + noise.sample(&mut rng)]);
                lab.push(c);
            }
        }
        (pts, lab)
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let (pts, truth) = blobs(&[[0.0, 0.0], [10.0, 10.0]], 50, 0.1, 3);
        let model = fit(&pts, &FuzzyConfig::new(2)).unwrap();
        let labels = harden(&model.memberships);
        let flip = labels[0];
        for (l, t) in labels.iter().zip(&truth) {
            assert_eq!((l + 2 - flip) % 2, *t);
        }
        for (j, center) in [[0.0, 0.0], [10.0, 10.0]].iter().enumerate() {
            let c = &model.centroids[(j + flip) % 2];
            let mean: Vec<f64> = (0..2)
                .map(|d| pts[j * 50..(j + 1) * 50].iter().map(|p| p[d]).sum::<f64>() / 50.0)
                .collect();
            assert!(sq_dist(c, &mean).sqrt() < 0.1, "{c:?} vs {mean:?} near {center:?}");
        }
        assert!(model.final_shift <= 1e-5 || model.iterations_run == 300);
    }

    #[test]
    fn as_many_points_as_clusters_saturates() {
        let pts = vec![vec![0.0, 0.0], vec![5.0, 1.0], vec![-3.0, 4.0]];
        let mut cfg = FuzzyConfig::new(3);
        cfg.tol = 1e-12;
        cfg.max_iter = 1000;
        let model = fit(&pts, &cfg).unwrap();
        let labels = harden(&model.memberships);
        let mut seen = labels.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 3);
        for (i, row) in model.memberships.iter().enumerate() {
            assert!(row[labels[i]] > 0.99, "{row:?}");
            assert!(sq_dist(&model.centroids[labels[i]], &pts[i]).sqrt() < 0.05);
        }
    }

    #[test]
    fn rows_are_stochastic() {
        let (pts, _) = blobs(&[[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]], 30, 0.5, 9);
        let model = fit(&pts, &FuzzyConfig::new(3)).unwrap();
        for row in &model.memberships {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&u| (0.0..=1.0).contains(&u)));
        }
    }

    #[test]
    fn assign_examples() {
        let centroids = vec![vec![0.0], vec![4.0]];
        assert_eq!(assign(&centroids, &[[4.0]], 2.0).unwrap()[0], vec![0.0, 1.0]);
        let mid = assign(&centroids, &[[2.0]], 2.0).unwrap();
        assert!((mid[0][0] - 0.5).abs() < 1e-15 && (mid[0][1] - 0.5).abs() < 1e-15);
        // distances 1 and 3: u1 = 1 / (1 + (1/3)^2) = 0.9
        let near = assign(&centroids, &[[1.0]], 2.0).unwrap();
        assert!((near[0][0] - 0.9).abs() < 1e-12);
        assert!(assign(&centroids, &[[1.0, 2.0]], 2.0).is_err());
    }

    #[test]
    fn harden_breaks_ties_low() {
        assert_eq!(harden(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]]), vec![1, 0]);
        assert_eq!(harden(&[vec![0.5, 0.5]]), vec![0]);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let same = vec![vec![1.0, 1.0]; 5];
        let model = fit(&same, &FuzzyConfig::new(2)).unwrap();
        assert!(model.degenerate);
        assert_eq!(model.centroids[0], model.centroids[1]);
        assert!(fit(&same[..1], &FuzzyConfig::new(2)).is_err());
        let mut cfg = FuzzyConfig::new(2);
        cfg.m = 1.0;
        assert!(fit(&same, &cfg).is_err());
        assert!(fit(&[vec![f64::NAN], vec![0.0]], &FuzzyConfig::new(2)).is_err());
    }

    #[test]
    fn json_round_trip_keeps_centroids() {
        let (pts, _) = blobs(&[[0.0, 0.0], [3.0, 3.0]], 10, 0.3, 1);
        let model = fit(&pts, &FuzzyConfig::new(2)).unwrap();
        let back: ClusterModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        assert_eq!(back.centroids, model.centroids);
        assert_eq!(back.iterations_run, model.iterations_run);
        assert!(back.memberships.is_empty());
    }
}
