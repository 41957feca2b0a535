//! Polynomials in the transverse variable (ascending coefficients) and
//! fourth-order finite differences on uniform grids.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

pub fn eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

/// Antiderivative vanishing at 0.
pub fn antiderivative(p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (k, &c) in p.iter().enumerate() {
        out[k + 1] = c / (k + 1) as f64;
    }
    out
}

pub fn integral(p: &[f64], a: f64, b: f64) -> f64 {
    let q = antiderivative(p);
    eval(&q, b) - eval(&q, a)
}

pub fn add_scaled(acc: &mut Vec<f64>, p: &[f64], s: f64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, &c) in acc.iter_mut().zip(p) {
        *a += s * c;
    }
}

pub fn mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    if p.is_empty() || q.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Index of the highest coefficient above `tol` times the largest one;
/// `None` for the zero polynomial.
pub fn degree(p: &[f64], tol: f64) -> Option<usize> {
    let m = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if m == 0.0 {
        return None;
    }
    p.iter().rposition(|c| c.abs() > tol * m)
}

/// First derivative, centered inside and one-sided near the ends.
pub fn d1(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 5, "fourth-order differences need five points");
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    }
    let l = |k: usize| f[k];
    let r = |k: usize| f[n - 1 - k];
    d[0] = (-25.0 * l(0) + 48.0 * l(1) - 36.0 * l(2) + 16.0 * l(3) - 3.0 * l(4)) / (12.0 * h);
    d[1] = (-3.0 * l(0) - 10.0 * l(1) + 18.0 * l(2) - 6.0 * l(3) + l(4)) / (12.0 * h);
    d[n - 1] = -(-25.0 * r(0) + 48.0 * r(1) - 36.0 * r(2) + 16.0 * r(3) - 3.0 * r(4)) / (12.0 * h);
    d[n - 2] = -(-3.0 * r(0) - 10.0 * r(1) + 18.0 * r(2) - 6.0 * r(3) + r(4)) / (12.0 * h);
    d
}

/// Second derivative, same stencil family as [`d1`].
pub fn d2(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 6, "fourth-order second differences need six points");
    let h2 = 12.0 * h * h;
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / h2;
    }
    let end = |g: &dyn Fn(usize) -> f64| {
        (
            (45.0 * g(0) - 154.0 * g(1) + 214.0 * g(2) - 156.0 * g(3) + 61.0 * g(4) - 10.0 * g(5)) / h2,
            (10.0 * g(0) - 15.0 * g(1) - 4.0 * g(2) + 14.0 * g(3) - 6.0 * g(4) + g(5)) / h2,
        )
    };
    (d[0], d[1]) = end(&|k| f[k]);
    (d[n - 1], d[n - 2]) = end(&|k| f[n - 1 - k]);
    d
}

/// Columnwise [`d1`] of a grid of coefficient rows.
pub fn d1_rows(rows: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    columnwise(rows, |c| d1(c, h))
}

pub fn d2_rows(rows: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    columnwise(rows, |c| d2(c, h))
}

fn columnwise(rows: &[Vec<f64>], op: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = vec![vec![0.0; width]; rows.len()];
    for k in 0..width {
        let col: Vec<f64> = rows.iter().map(|r| r.get(k).copied().unwrap_or(0.0)).collect();
        for (o, v) in out.iter_mut().zip(op(&col)) {
            o[k] = v;
        }
    }
    out
}

/// Cubic Lagrange interpolation of grid data at `x` (grid spacing `h`, origin 0).
pub fn interpolate(f: &[f64], h: f64, x: f64) -> f64 {
    let n = f.len();
    if n < 4 {
        let i = ((x / h).floor().max(0.0) as usize).min(n.saturating_sub(2));
        let t = x / h - i as f64;
        return f[i] * (1.0 - t) + f[(i + 1).min(n - 1)] * t;
    }
    let i = ((x / h).floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let t = x / h - i as f64;
    let mut s = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (t - b as f64) / (a as f64 - b as f64);
            }
        }
        s += w * f[i + a];
    }
    s
}
