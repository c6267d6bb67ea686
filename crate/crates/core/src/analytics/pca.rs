//! Principal component projection of feature vectors.

use crate::scalar::Scalar;
use crate::stats::sample_std;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors (`vectors[k]` belongs to `values[k]`).
#[allow(clippy::needless_range_loop)]
pub fn symmetric_eigen<T: Scalar>(a: &[Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
    let n = a.len();
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let scale = m
        .iter()
        .flatten()
        .fold(T::zero(), |acc, x| acc + *x * *x)
        .sqrt()
        .max(T::min_positive_value());
    let tol = T::epsilon() * scale * T::of(1e-2);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + m[p][q] * m[p][q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (T::of(2.0) * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y][y].partial_cmp(&m[x][x]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| m[k][k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut col: Vec<T> = (0..n).map(|i| v[i][k]).collect();
            orient(&mut col);
            col
        })
        .collect();
    (values, vectors)
}

/// Flips `v` so its largest-magnitude component (first on ties) is positive.
pub fn orient<T: Scalar>(v: &mut [T]) {
    let mut best = 0;
    for k in 1..v.len() {
        if v[k].abs() > v[best].abs() {
            best = k;
        }
    }
    if v.get(best).is_some_and(|x| *x < T::zero()) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Columns scaled to zero mean and unit sample standard deviation;
/// constant columns become zeros.
pub fn zscore<T: Scalar>(rows: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    let mut out = vec![vec![T::zero(); d]; n];
    for c in 0..d {
        let col: Vec<T> = rows.iter().map(|r| r[c]).collect();
        let mean = col.iter().fold(T::zero(), |a, x| a + *x) / T::of(n as f64);
        // Rounding in the mean can leave a tiny spread on a constant column.
        let constant = col.iter().all(|v| *v == col[0]);
        let sd = sample_std(&col);
        if !constant && sd > T::zero() && sd.is_finite() {
            for r in 0..n {
                out[r][c] = (col[r] - mean) / sd;
            }
        }
    }
    out
}

/// Projects each row onto the top two principal axes of the z-scored data.
/// Axes with a (numerically) zero eigenvalue give coordinate 0.
pub fn pca_project<T: Scalar>(rows: &[Vec<T>]) -> Vec<(T, T)> {
    let n = rows.len();
    if n < 2 {
        return vec![(T::zero(), T::zero()); n];
    }
    let z = zscore(rows);
    let d = z[0].len();
    let denom = T::of((n - 1) as f64);
    let cov: Vec<Vec<T>> = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| z.iter().fold(T::zero(), |s, r| s + r[a] * r[b]) / denom)
                .collect()
        })
        .collect();
    let (values, vectors) = symmetric_eigen(&cov);
    let floor = T::of(1e-12) * values.first().copied().unwrap_or(T::zero()).max(T::one());
    let coord = |r: &[T], k: usize| -> T {
        if k >= values.len() || values[k] <= floor {
            return T::zero();
        }
        r.iter().zip(&vectors[k]).fold(T::zero(), |s, (x, w)| s + *x * *w)
    };
    z.iter().map(|r| (coord(r, 0), coord(r, 1))).collect()
}
