#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rand_vec(rng: &mut ChaCha8Rng, len: usize, p: u64) -> Vec<u64> {
    (0..len).map(|_| rng.gen_range(0..p)).collect()
}

/// `c + a*b` for row-major `a` (m×k), `b` (k×n), `c` (m×n).
pub fn mat_oracle(p: u64, a: &[u64], b: &[u64], c: &[u64], m: usize, k: usize, n: usize) -> Vec<u64> {
    let mut out = c.to_vec();
    for i in 0..m {
        for j in 0..n {
            let mut acc = out[i * n + j] as u128;
            for l in 0..k {
                acc += a[i * k + l] as u128 * b[l * n + j] as u128;
            }
            out[i * n + j] = (acc % p as u128) as u64;
        }
    }
    out
}

pub fn transpose(a: &[u64], rows: usize, cols: usize) -> Vec<u64> {
    let mut t = vec![0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

/// `c + a*b` for coefficient vectors, `|c| = |a| + |b| - 1`.
pub fn poly_oracle(p: u64, a: &[u64], b: &[u64], c: &[u64]) -> Vec<u64> {
    let mut out: Vec<u128> = c.iter().map(|&x| x as u128).collect();
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x as u128 * y as u128) % p as u128;
        }
    }
    out.into_iter().map(|x| x as u64).collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}
