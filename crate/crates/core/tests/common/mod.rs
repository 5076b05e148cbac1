//! Helpers shared by the statistical test suites.
#![allow(dead_code)]

use fgts::samplers::Target;
use fgts::Result;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Kolmogorov–Smirnov distance between the sample and N(0, 1).
pub fn ks_standard_normal(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let normal = Normal::standard();
    sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal.cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `U(θ) = Σ θᵢ⁴/4 + θᵢ²/2 + 0.3·θ₀θ₁`: smooth, non-quadratic, strongly convex.
pub struct Quartic;

impl Target for Quartic {
    fn dim(&self) -> usize {
        2
    }
    fn potential(&self, t: &[f64]) -> Result<f64> {
        Ok(t.iter().map(|x| x.powi(4) / 4.0 + x * x / 2.0).sum::<f64>() + 0.3 * t[0] * t[1])
    }
    fn gradient(&self, t: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![
            t[0].powi(3) + t[0] + 0.3 * t[1],
            t[1].powi(3) + t[1] + 0.3 * t[0],
        ])
    }
}

/// Stationary covariance of `z' = A z + b ξ` for a 2×2 `A`, by fixed-point
/// iteration of `Σ = A Σ Aᵀ + b bᵀ`.
pub fn lyapunov_2x2(a: [[f64; 2]; 2], b: [f64; 2]) -> [[f64; 2]; 2] {
    let mut s = [[0.0; 2]; 2];
    loop {
        let mut next = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = b[i] * b[j];
                for k in 0..2 {
                    for l in 0..2 {
                        acc += a[i][k] * s[k][l] * a[j][l];
                    }
                }
                next[i][j] = acc;
            }
        }
        let delta = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (next[i][j] - s[i][j]).abs())
            .fold(0.0, f64::max);
        s = next;
        if delta < 1e-15 {
            return s;
        }
    }
}
