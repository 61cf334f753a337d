//! Gaussian-kernel ridge classification via one-hot regression.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `k(a, b) = exp(−γ‖a − b‖²)`.
pub fn gaussian_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

pub fn kernel_matrix<P: AsRef<[f64]>>(points: &[P], gamma: f64) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 1.0;
        for j in 0..i {
            let v = gaussian_kernel(points[i].as_ref(), points[j].as_ref(), gamma);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn cross_kernel<P: AsRef<[f64]>, Q: AsRef<[f64]>>(rows: &[P], cols: &[Q], gamma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        gaussian_kernel(rows[i].as_ref(), cols[j].as_ref(), gamma)
    })
}

/// One-hot targets, optionally centered by the class prior.
fn targets(labels: &[usize], n_classes: usize, prior: Option<&[f64]>) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), n_classes, |i, c| {
        let hot = if labels[i] == c { 1.0 } else { 0.0 };
        hot - prior.map_or(0.0, |p| p[c])
    })
}

fn class_prior(labels: &[usize], n_classes: usize) -> Vec<f64> {
    let mut p = vec![0.0; n_classes];
    for &l in labels {
        p[l] += 1.0;
    }
    let n = labels.len().max(1) as f64;
    p.iter_mut().for_each(|v| *v /= n);
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeParams {
    pub lambda: f64,
    pub gamma: f64,
    /// Regress on one-hot targets minus the class prior and add it back at
    /// prediction time.
    #[serde(default)]
    pub center_targets: bool,
}

impl RidgeParams {
    pub fn new(lambda: f64, gamma: f64) -> Self {
        Self {
            lambda,
            gamma,
            center_targets: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::invalid(format!(
                "ridge needs λ > 0 and γ > 0, got λ={} γ={}",
                self.lambda, self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub params: RidgeParams,
    pub support: Vec<Vec<f64>>,
    /// `n × C`, row-major.
    pub dual: Vec<Vec<f64>>,
    pub n_classes: usize,
    /// Added to every score row; zero unless targets were centered.
    pub offset: Vec<f64>,
}

fn check_xy<P: AsRef<[f64]>>(x: &[P], y: &[usize]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::invalid("ridge needs at least one training point"));
    }
    if x.len() != y.len() {
        return Err(Error::shape(x.len(), y.len()));
    }
    let dim = x[0].as_ref().len();
    if x.iter().any(|p| p.as_ref().len() != dim) {
        return Err(Error::invalid("ragged ridge inputs"));
    }
    Ok(dim)
}

/// Solves `(K + λI) α = Y` by Cholesky factorization.
pub fn ridge_fit<P: AsRef<[f64]>>(x: &[P], y: &[usize], params: RidgeParams) -> Result<RidgeModel> {
    params.validate()?;
    check_xy(x, y)?;
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let prior = class_prior(y, n_classes);
    let center = params.center_targets.then_some(prior.as_slice());
    let yy = targets(y, n_classes, center);
    let mut a = kernel_matrix(x, params.gamma);
    for i in 0..a.nrows() {
        a[(i, i)] += params.lambda;
    }
    let min_diag = a.diagonal().min();
    let chol = a.cholesky().ok_or_else(|| {
        Error::Solver(format!(
            "K + λI not positive definite (n={}, λ={}, min diagonal {min_diag:e})",
            x.len(),
            params.lambda
        ))
    })?;
    let alpha = chol.solve(&yy);
    Ok(RidgeModel {
        params,
        support: x.iter().map(|p| p.as_ref().to_vec()).collect(),
        dual: (0..alpha.nrows())
            .map(|i| alpha.row(i).iter().copied().collect())
            .collect(),
        n_classes,
        offset: if params.center_targets { prior } else { vec![0.0; n_classes] },
    })
}

fn argmax_low(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

impl RidgeModel {
    pub fn dim(&self) -> usize {
        self.support.first().map_or(0, Vec::len)
    }

    /// `K(X*, support)·α + offset`, one row per query point.
    pub fn scores<P: AsRef<[f64]>>(&self, x: &[P]) -> Result<Vec<Vec<f64>>> {
        let dim = self.dim();
        if let Some(bad) = x.iter().find(|p| p.as_ref().len() != dim) {
            return Err(Error::shape(dim, bad.as_ref().len()));
        }
        let mut out = Vec::with_capacity(x.len());
        for p in x {
            let mut row = self.offset.clone();
            for (s, a) in self.support.iter().zip(&self.dual) {
                let k = gaussian_kernel(p.as_ref(), s, self.params.gamma);
                for (r, &av) in row.iter_mut().zip(a) {
                    *r += k * av;
                }
            }
            out.push(row);
        }
        Ok(out)
    }

    /// Argmax class per query point, ties to the lowest class id.
    pub fn predict<P: AsRef<[f64]>>(&self, x: &[P]) -> Result<Vec<usize>> {
        Ok(self.scores(x)?.iter().map(|r| argmax_low(r)).collect())
    }

    /// `‖(K + λI)α − Y‖∞` on the training set.
    pub fn residual(&self, y: &[usize]) -> f64 {
        let center = self.params.center_targets.then_some(self.offset.as_slice());
        let yy = targets(y, self.n_classes, center);
        let mut a = kernel_matrix(&self.support, self.params.gamma);
        for i in 0..a.nrows() {
            a[(i, i)] += self.params.lambda;
        }
        let alpha = DMatrix::from_fn(self.dual.len(), self.n_classes, |i, c| self.dual[i][c]);
        (a * alpha - yy).amax()
    }
}

/// Best grid cell and the full accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub lambda: f64,
    pub gamma: f64,
    pub mean_accuracy: f64,
    /// `(λ, γ, mean validation accuracy)` for every cell.
    pub table: Vec<(f64, f64, f64)>,
}

/// `10^lo, 10^(lo+1), …, 10^hi`.
pub fn log_grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 10f64.powi(e)).collect()
}

pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(-6, 2)
}

pub fn default_gamma_grid() -> Vec<f64> {
    log_grid(-4, 1)
}

/// Picks `(λ, γ)` maximizing mean validation accuracy over the folds.
///
/// `folds` partitions indices of `x`; each fold in turn is held out while the
/// others are fit. Ties go to the largest `λ`, then the first `γ` in grid
/// order. For every `(γ, fold)` the training kernel is eigendecomposed once
/// and all `λ` are solved from that decomposition.
pub fn grid_search<P: AsRef<[f64]>>(
    x: &[P],
    y: &[usize],
    lambdas: &[f64],
    gammas: &[f64],
    folds: &[Vec<usize>],
) -> Result<GridResult> {
    if lambdas.is_empty() || gammas.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    check_xy(x, y)?;
    if folds.len() < 2 {
        return Err(Error::invalid("grid search needs at least two folds"));
    }
    for &l in lambdas {
        RidgeParams::new(l, 1.0).validate()?;
    }
    for &g in gammas {
        RidgeParams::new(1.0, g).validate()?;
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut acc = vec![vec![0.0; gammas.len()]; lambdas.len()];

    for (fi, held) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != fi)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        if held.is_empty() || train.is_empty() {
            return Err(Error::invalid(format!("fold {fi} leaves an empty split")));
        }
        let xt: Vec<&[f64]> = train.iter().map(|&i| x[i].as_ref()).collect();
        let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let xv: Vec<&[f64]> = held.iter().map(|&i| x[i].as_ref()).collect();
        let yy = targets(&yt, n_classes, None);
        for (gi, &gamma) in gammas.iter().enumerate() {
            let eig = SymmetricEigen::new(kernel_matrix(&xt, gamma));
            let qty = eig.eigenvectors.transpose() * &yy;
            let kv = cross_kernel(&xv, &xt, gamma);
            let kvq = &kv * &eig.eigenvectors;
            for (li, &lambda) in lambdas.iter().enumerate() {
                let mut scaled = qty.clone();
                for (r, &ev) in eig.eigenvalues.iter().enumerate() {
                    let s = 1.0 / (ev.max(0.0) + lambda);
                    scaled.row_mut(r).iter_mut().for_each(|v| *v *= s);
                }
                let scores = &kvq * scaled;
                let hits = (0..held.len())
                    .filter(|&r| {
                        let row: Vec<f64> = scores.row(r).iter().copied().collect();
                        argmax_low(&row) == y[held[r]]
                    })
                    .count();
                acc[li][gi] += hits as f64 / held.len() as f64 / folds.len() as f64;
            }
        }
    }

    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut best: Option<(usize, usize)> = None;
    for &li in &order {
        for gi in 0..gammas.len() {
            if best.map_or(true, |(bl, bg)| acc[li][gi] > acc[bl][bg] + 1e-12) {
                best = Some((li, gi));
            }
        }
    }
    let (li, gi) = best.expect("non-empty grid");
    let mut table = Vec::new();
    for (l, row) in lambdas.iter().zip(&acc) {
        for (g, &a) in gammas.iter().zip(row) {
            table.push((*l, *g, a));
        }
    }
    Ok(GridResult {
        lambda: lambdas[li],
        gamma: gammas[gi],
        mean_accuracy: acc[li][gi],
        table,
    })
}
