//! Reference computations shared by the integration tests. Everything here is
//! written from the textbook definitions and avoids the library's numerical
//! kernels, so agreement is evidence rather than tautology.

#![allow(dead_code)]

use ellcop::{CopulaModel, CorrelationMatrix, SymMatrix, TransformedSample};

/// Dense row-major square matrix inverse and log-determinant by Gauss-Jordan
/// elimination with partial pivoting. Panics on a singular or negative
/// determinant input.
pub fn gauss_jordan(a: &[f64], d: usize) -> (Vec<f64>, f64) {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        inv[i * d + i] = 1.0;
    }
    let mut log_det = 0.0;
    let mut sign = 1.0;
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&x, &y| m[x * d + col].abs().total_cmp(&m[y * d + col].abs()))
            .unwrap();
        if pivot != col {
            for k in 0..d {
                m.swap(pivot * d + k, col * d + k);
                inv.swap(pivot * d + k, col * d + k);
            }
            sign = -sign;
        }
        let p = m[col * d + col];
        assert!(p != 0.0, "singular matrix");
        if p < 0.0 {
            sign = -sign;
        }
        log_det += p.abs().ln();
        for k in 0..d {
            m[col * d + k] /= p;
            inv[col * d + k] /= p;
        }
        for r in 0..d {
            if r != col {
                let f = m[r * d + col];
                if f != 0.0 {
                    for k in 0..d {
                        m[r * d + k] -= f * m[col * d + k];
                        inv[r * d + k] -= f * inv[col * d + k];
                    }
                }
            }
        }
    }
    assert!(sign > 0.0, "negative determinant");
    (inv, log_det)
}

fn quad(p: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += x[i] * p[i * d + j] * x[j];
        }
    }
    acc
}

/// Log-likelihood as a function of a general symmetric precision matrix
/// `p` (standing in for `ρ⁻¹`), up to a term that does not depend on `p`.
pub fn loglik_of_precision(sample: &TransformedSample, p: &[f64]) -> f64 {
    let d = sample.d();
    let n = sample.n() as f64;
    let (_, log_det_p) = gauss_jordan(p, d);
    let mut acc = 0.5 * n * log_det_p;
    match sample.model() {
        CopulaModel::Gaussian => {
            for row in sample.rows() {
                acc -= 0.5 * quad(p, row);
            }
        }
        CopulaModel::StudentT { nu } => {
            let nu = nu.get();
            for row in sample.rows() {
                acc -= 0.5 * (nu + d as f64) * (1.0 + quad(p, row) / nu).ln();
            }
        }
    }
    acc
}

/// `L(Π(Σ))` up to the same constant as [`loglik_of_precision`].
pub fn projected_loglik(sample: &TransformedSample, sigma: &[f64]) -> f64 {
    let d = sample.d();
    let rho: Vec<f64> = (0..d * d)
        .map(|k| {
            let (i, j) = (k / d, k % d);
            sigma[k] / (sigma[i * d + i] * sigma[j * d + j]).sqrt()
        })
        .collect();
    let (p, _) = gauss_jordan(&rho, d);
    loglik_of_precision(sample, &p)
}

/// Central difference of `f` under a symmetric perturbation of entries
/// `(i, j)` and `(j, i)` of `x` by `h`.
pub fn symmetric_central_difference(
    x: &[f64],
    d: usize,
    i: usize,
    j: usize,
    h: f64,
    f: impl Fn(&[f64]) -> f64,
) -> f64 {
    let bump = |sgn: f64| {
        let mut y = x.to_vec();
        y[i * d + j] += sgn * h;
        if i != j {
            y[j * d + i] += sgn * h;
        }
        f(&y)
    };
    (bump(1.0) - bump(-1.0)) / (2.0 * h)
}

/// Kendall's tau-a in `O(n log n)`: sort by `x`, then count inversions of
/// `y` by merge sort. Assumes no ties.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ys: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
    let mut buf = vec![0.0; n];
    let inversions = merge_count(&mut ys, &mut buf);
    let pairs = n as f64 * (n as f64 - 1.0) / 2.0;
    1.0 - 2.0 * inversions as f64 / pairs
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    let k2 = k + mid - i;
    buf[k2..n].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// Kendall's tau by direct pair counting, for checking [`kendall_tau`].
pub fn kendall_tau_quadratic(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += ((x[i] - x[j]) * (y[i] - y[j])).signum();
        }
    }
    s / (n as f64 * (n as f64 - 1.0) / 2.0)
}

/// Ranks starting at 1, ties receiving their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
pub fn golden_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Maximizer of `r ↦ L([[1, r], [r, 1]])`: the best point of a grid over
/// `[-0.999, 0.999]` with step `1e-3`, refined by golden section on the
/// neighbouring grid cells.
pub fn grid_oracle_2d(sample: &TransformedSample) -> f64 {
    assert_eq!(sample.d(), 2);
    let ll = |r: f64| {
        let det = 1.0 - r * r;
        let p = [1.0 / det, -r / det, -r / det, 1.0 / det];
        loglik_of_precision(sample, &p)
    };
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in -999..=999 {
        let r = k as f64 * 1e-3;
        let v = ll(r);
        if v > best.0 {
            best = (v, r);
        }
    }
    let lo = (best.1 - 1e-3).max(-0.9999);
    let hi = (best.1 + 1e-3).min(0.9999);
    golden_max(lo, hi, 1e-10, ll)
}

/// One step of the approximate fixed-point map, written out directly:
/// `(1 + d/ν) (1/n) Σ s sᵀ / (1 + sᵀρ⁻¹s/ν)`.
pub fn fixed_point_step(sample: &TransformedSample, rho: &CorrelationMatrix) -> Vec<f64> {
    let d = sample.d();
    let n = sample.n() as f64;
    let (p, _) = gauss_jordan(rho.as_matrix().as_slice(), d);
    let mut out = vec![0.0; d * d];
    let (scale, nu) = match sample.model() {
        CopulaModel::Gaussian => (1.0, f64::INFINITY),
        CopulaModel::StudentT { nu } => (1.0 + d as f64 / nu.get(), nu.get()),
    };
    for row in sample.rows() {
        let w = if nu.is_finite() { 1.0 / (1.0 + quad(&p, row) / nu) } else { 1.0 };
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] += scale * w * row[i] * row[j] / n;
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sym(m: &SymMatrix) -> Vec<f64> {
    m.as_slice().to_vec()
}
