//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// Purity straight from the definition: for every cluster id, count each
/// class by scanning all points and keep the largest count.
pub fn purity_oracle(clusters: &[usize], classes: &[usize]) -> f64 {
    let kmax = clusters.iter().max().copied().unwrap_or(0);
    let cmax = classes.iter().max().copied().unwrap_or(0);
    let mut hits = 0;
    for k in 0..=kmax {
        let mut best = 0;
        for c in 0..=cmax {
            let n = (0..clusters.len())
                .filter(|&i| clusters[i] == k && classes[i] == c)
                .count();
            best = best.max(n);
        }
        hits += best;
    }
    hits as f64 / clusters.len() as f64
}

/// Every class goes to the cluster holding most of its points (lowest id on
/// ties); a cluster claimed by `n` classes contributes `n - 1` overlaps.
pub fn overlaps_oracle(clusters: &[usize], classes: &[usize]) -> usize {
    let kmax = clusters.iter().max().copied().unwrap_or(0);
    let cmax = classes.iter().max().copied().unwrap_or(0);
    let mut claimed = vec![0usize; kmax + 1];
    for c in 0..=cmax {
        if !classes.contains(&c) {
            continue;
        }
        let mut best = (0, 0);
        for k in 0..=kmax {
            let n = (0..clusters.len())
                .filter(|&i| clusters[i] == k && classes[i] == c)
                .count();
            if n > best.1 {
                best = (k, n);
            }
        }
        claimed[best.0] += 1;
    }
    claimed.iter().map(|&n| n.saturating_sub(1)).sum()
}

/// Solves `A x = B` (column by column) by Gaussian elimination with partial
/// pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(r, rb)| r.iter().chain(rb).copied().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        for row in col + 1..n {
            let f = aug[row][col] / aug[col][col];
            for k in col..n + m {
                aug[row][k] -= f * aug[col][k];
            }
        }
    }
    let mut x = vec![vec![0.0; m]; n];
    for row in (0..n).rev() {
        for j in 0..m {
            let mut s = aug[row][n + j];
            for k in row + 1..n {
                s -= aug[row][k] * x[k][j];
            }
            x[row][j] = s / aug[row][row];
        }
    }
    x
}

/// `exp(-γ ‖a − b‖²)` written out.
pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

/// `‖a − n‖ / (‖a‖ + ‖n‖)`, zero when both vanish.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    if na + nn == 0.0 {
        0.0
    } else {
        diff / (na + nn)
    }
}

/// Central differences of `f` with respect to every element of `x`.
pub fn numeric_grad(x: &mut [f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(x);
            x[i] = orig - h;
            let down = f(x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn counts(v: &[usize]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for &x in v {
        *m.entry(x).or_default() += 1;
    }
    m
}
