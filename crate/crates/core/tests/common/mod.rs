//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use memaop::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for m in 0..a.cols() {
                s += a.get(i, m) * b.get(m, j);
            }
            c.set(i, j, s);
        }
    }
    c
}

pub fn naive_transpose(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.cols(), a.rows(), |i, j| a.get(j, i))
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    // Box-Muller keeps the oracle free of extra distribution crates.
    Matrix::from_fn(rows, cols, |_, _| {
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    })
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `|a - b| / max(|a|, |b|)`, or the absolute gap when both are tiny.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-8 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Central difference of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &Matrix, h: f64, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut g = Matrix::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let orig = x.get(i, j);
            probe.set(i, j, orig + h);
            let up = f(&probe);
            probe.set(i, j, orig - h);
            let down = f(&probe);
            probe.set(i, j, orig);
            g.set(i, j, (up - down) / (2.0 * h));
        }
    }
    g
}

pub fn one_hot(rng: &mut ChaCha8Rng, rows: usize, classes: usize) -> Matrix {
    let mut y = Matrix::zeros(rows, classes);
    for i in 0..rows {
        y.set(i, rng.random_range(0..classes), 1.0);
    }
    y
}
