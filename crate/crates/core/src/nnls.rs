//! Lawson–Hanson nonnegative least squares and the least-distance program
//! built on top of it. The latter gives exact Euclidean projections onto
//! polyhedra in a finite number of steps.

use crate::linalg::{dot, least_squares, norm};

/// `min ||E u - f||` subject to `u >= 0`; `cols[j]` is column `j` of `E`.
/// Returns `None` if the active-set iteration fails to settle.
pub fn nnls(cols: &[Vec<f64>], f: &[f64]) -> Option<Vec<f64>> {
    let n = cols.len();
    let m = f.len();
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let mut banned = vec![false; n];
    let scale = cols.iter().map(|c| norm(c)).fold(norm(f), f64::max).max(1e-300);
    let tol = 1e-12 * scale * scale;

    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = f.to_vec();
        for (j, c) in cols.iter().enumerate() {
            if x[j] != 0.0 {
                for i in 0..m {
                    r[i] -= c[i] * x[j];
                }
            }
        }
        r
    };

    let max_outer = 3 * n + 30;
    for _ in 0..max_outer {
        let r = residual(&x);
        let cand = (0..n)
            .filter(|&j| !passive[j] && !banned[j])
            .map(|j| (j, dot(&cols[j], &r)))
            .filter(|&(_, w)| w > tol)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((t, _)) = cand else {
            return Some(x);
        };
        passive[t] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            if inner > 3 * n + 30 {
                return None;
            }
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub: Vec<Vec<f64>> = idx.iter().map(|&j| cols[j].clone()).collect();
            let Some(z_p) = least_squares(&sub, f) else {
                // dependent column; never consider it again
                passive[t] = false;
                banned[t] = true;
                break;
            };
            if z_p.iter().all(|&v| v > 0.0) {
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z_p[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z_p[k] <= 0.0 {
                    let denom = x[j] - z_p[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z_p[k] - x[j]);
                if x[j] <= 1e-15 * scale || (z_p[k] <= 0.0 && x[j] <= 1e-12 * scale) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !idx.iter().any(|&j| passive[j]) {
                break;
            }
        }
    }
    None
}

/// Outcome of a least-distance program.
#[derive(Debug, Clone, PartialEq)]
pub enum Ldp {
    Solution(Vec<f64>),
    Infeasible,
    Failed,
}

/// `min ||x||` subject to `G x >= h`, with the rows of `G` given in `g`.
pub fn ldp(g: &[Vec<f64>], h: &[f64], dim: usize) -> Ldp {
    if g.is_empty() {
        return Ldp::Solution(vec![0.0; dim]);
    }
    let cols: Vec<Vec<f64>> = g
        .iter()
        .zip(h)
        .map(|(row, &hi)| {
            let mut c = row.clone();
            c.push(hi);
            c
        })
        .collect();
    let mut f = vec![0.0; dim + 1];
    f[dim] = 1.0;
    let Some(u) = nnls(&cols, &f) else {
        return Ldp::Failed;
    };
    let mut r = vec![0.0; dim + 1];
    for (c, &uj) in cols.iter().zip(&u) {
        for i in 0..=dim {
            r[i] += c[i] * uj;
        }
    }
    r[dim] -= 1.0;
    if norm(&r) < 1e-12 || r[dim].abs() < 1e-14 {
        return Ldp::Infeasible;
    }
    Ldp::Solution(r[..dim].iter().map(|v| -v / r[dim]).collect())
}
