//! Oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sse_denoise::signal_model::{brown_jacobian, brown_waveform};
use sse_denoise::{BrownConstants, BrownParams};

/// Chain objective assembled from its edges: every auxiliary `a_j` links to
/// `x_j` and, for `j ≥ 1`, to `x_{j−1}`.
pub fn objective(x: &[f64], a: &[f64], d: &[f64], m: usize, c: f64) -> f64 {
    let k = x.len();
    let mut f = 0.0;
    for i in 0..k {
        f += (m as f64 / 2.0 + 1.0) * x[i].ln() + d[i] / (2.0 * x[i]);
    }
    let mut edge = |j: usize, i: usize| f += c * x[i].ln() + c * a[j] / x[i];
    for j in 0..k {
        edge(j, j);
        if j >= 1 {
            edge(j, j - 1);
        }
    }
    f - (2.0 * c - 1.0) * a.iter().map(|v| v.ln()).sum::<f64>()
}

/// Change of the objective when `x_i` moves from `from` to `t`, summed over
/// the terms that contain `x_i`. Measured from a point near the minimum, the
/// difference stays small enough to resolve the flat bottom.
pub fn variance_delta(a: &[f64], d: &[f64], m: usize, c: f64, i: usize, from: f64, t: f64) -> f64 {
    let (log_ratio, inv_diff) = ((t / from).ln(), 1.0 / t - 1.0 / from);
    let mut f = (m as f64 / 2.0 + 1.0) * log_ratio + d[i] / 2.0 * inv_diff;
    let edges = if i + 1 < a.len() { vec![i, i + 1] } else { vec![i] };
    for j in edges {
        f += c * log_ratio + c * a[j] * inv_diff;
    }
    f
}

/// Same for auxiliary `a_j`.
pub fn aux_delta(x: &[f64], c: f64, j: usize, from: f64, t: f64) -> f64 {
    let mut f = -(2.0 * c - 1.0) * (t / from).ln();
    let edges = if j >= 1 { vec![j - 1, j] } else { vec![j] };
    for i in edges {
        f += c * (t - from) / x[i];
    }
    f
}

/// Golden-section search over log t in [lo, hi].
pub fn argmin_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut p = b - g * (b - a);
    let mut q = a + g * (b - a);
    let (mut fp, mut fq) = (f(p.exp()), f(q.exp()));
    for _ in 0..200 {
        if fp < fq {
            b = q;
            q = p;
            fq = fp;
            p = b - g * (b - a);
            fp = f(p.exp());
        } else {
            a = p;
            p = q;
            fp = fq;
            q = a + g * (b - a);
            fq = f(q.exp());
        }
    }
    ((a + b) / 2.0).exp()
}

/// Coarse search over [1e−12, 1e12], then a second search within ±1% of the
/// first estimate with differences taken from it.
pub fn argmin_refined(delta: impl Fn(f64, f64) -> f64, from: f64) -> f64 {
    let rough = argmin_log(|t| delta(from, t), 1e-12, 1e12);
    argmin_log(|t| delta(rough, t), rough / 1.01, rough * 1.01)
}

pub struct Case {
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub d: Vec<f64>,
    pub m: usize,
    pub c: f64,
}

pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let k = rng.random_range(1..=8);
    let lg = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-3.0..3.0));
    Case {
        x: (0..k).map(|_| lg(rng)).collect(),
        a: (0..k).map(|_| lg(rng)).collect(),
        d: (0..k).map(|_| lg(rng) * 10.0).collect(),
        m: rng.random_range(1..=500),
        c: rng.random_range(1.01..10.0),
    }
}

pub fn fd_column(p: &BrownParams, c: &BrownConstants, i: usize) -> Vec<f64> {
    let theta = p.as_array();
    let h = 1e-5 * theta[i].abs().max(1.0);
    let (mut up, mut down) = (theta, theta);
    up[i] += h;
    down[i] -= h;
    let a = brown_waveform(&BrownParams::from_array(up), c).unwrap();
    let b = brown_waveform(&BrownParams::from_array(down), c).unwrap();
    a.samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y) / (2.0 * h))
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest relative column error of the analytic Jacobian against central
/// differences.
pub fn jacobian_error(p: &BrownParams, c: &BrownConstants) -> f64 {
    let jac = brown_jacobian(p, c).unwrap();
    (0..3)
        .map(|i| {
            let analytic: Vec<f64> = jac.iter().map(|r| r[i]).collect();
            let fd = fd_column(p, c, i);
            let diff: Vec<f64> = analytic.iter().zip(&fd).map(|(a, b)| a - b).collect();
            norm(&diff) / norm(&analytic)
        })
        .fold(0.0, f64::max)
}

pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Posterior mean in residual form, y − σ²·(ε²H + σ²I)⁻¹·y, solved by LU.
pub fn lu_posterior_mean(y: &[f64], sigma2: f64, eps2: f64, h: &DMatrix<f64>) -> Vec<f64> {
    let m = y.len();
    let system = h * eps2 + DMatrix::identity(m, m) * sigma2;
    let y = DVector::from_column_slice(y);
    let z = system.lu().solve(&y).unwrap();
    (y - z * sigma2).as_slice().to_vec()
}

pub fn noisy_row(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| 100.0 + 20.0 * (i as f64 / 17.0).sin() + rng.random_range(-10.0..10.0))
        .collect()
}
