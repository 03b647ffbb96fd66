//! Dense vector helpers for the small problems this crate deals with.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}

pub fn unit(d: usize, i: usize, sign: f64) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[i] = sign;
    e
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale_ref = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale_ref {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Least squares `min ||a x - b||` for a tall (or square) column-full-rank
/// matrix given column-major as `cols`, via Householder QR.
pub fn least_squares(cols: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let m = b.len();
    let n = cols.len();
    if n == 0 {
        return Some(Vec::new());
    }
    if n > m {
        return None;
    }
    let mut r: Vec<Vec<f64>> = cols.to_vec();
    let mut qtb = b.to_vec();
    let col_scale = cols.iter().map(|c| norm(c)).fold(0.0_f64, f64::max).max(1e-300);
    for k in 0..n {
        let alpha_norm = r[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if alpha_norm <= 1e-13 * col_scale {
            return None;
        }
        let alpha = if r[k][k] > 0.0 { -alpha_norm } else { alpha_norm };
        let mut v: Vec<f64> = r[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for col in r.iter_mut().skip(k) {
                let s: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vnorm2;
                for (ci, vi) in col[k..].iter_mut().zip(&v) {
                    *ci -= s * vi;
                }
            }
            let s: f64 = v.iter().zip(&qtb[k..]).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vnorm2;
            for (ci, vi) in qtb[k..].iter_mut().zip(&v) {
                *ci -= s * vi;
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| r[j][k] * x[j]).sum();
        x[k] = (qtb[k] - s) / r[k][k];
    }
    Some(x)
}
