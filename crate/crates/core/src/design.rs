//! Incremental ridge-regression statistics.
//!
//! [`DesignState`] keeps the design matrix `V = λ_reg·I + Σ x xᵀ`, the
//! response vector `Σ r x`, and two derived factors that are maintained in
//! O(d²) per observation:
//!
//! * `V⁻¹` through the Sherman–Morrison rank-one formula, and
//! * the lower Cholesky factor `L` (`L Lᵀ = V`) through a rank-one update.
//!
//! Rank-one maintenance accumulates rounding error roughly as
//! `count · ε · κ(V)`, so both factors are recomputed from `V` every
//! `refresh_every` updates.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{
    cholesky, dot, identity, inverse_from_cholesky, lower_matvec, matvec, solve_lower,
    solve_lower_transpose,
};

pub const DEFAULT_REFRESH_EVERY: usize = 1000;

/// Radicands of `xᵀV⁻¹x` in `[-UCB_CLAMP, 0)` are rounding noise and clamp to zero.
const UCB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignState {
    dim: usize,
    reg: f64,
    v: Vec<f64>,
    vinv: Vec<f64>,
    chol: Vec<f64>,
    bvec: Vec<f64>,
    count: usize,
    refresh_every: usize,
    since_refresh: usize,
}

impl DesignState {
    pub fn new(dim: usize, reg: f64) -> Result<Self> {
        Self::with_refresh(dim, reg, DEFAULT_REFRESH_EVERY)
    }

    /// `refresh_every = 0` disables the periodic refactorization.
    pub fn with_refresh(dim: usize, reg: f64, refresh_every: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("design dimension must be at least 1"));
        }
        if !(reg > 0.0) || !reg.is_finite() {
            return Err(Error::invalid(format!(
                "ridge weight must be positive, got {reg}"
            )));
        }
        Ok(Self {
            dim,
            reg,
            v: identity(dim, reg),
            vinv: identity(dim, 1.0 / reg),
            chol: identity(dim, reg.sqrt()),
            bvec: vec![0.0; dim],
            count: 0,
            refresh_every,
            since_refresh: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Row-major `V`.
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Row-major maintained `V⁻¹`.
    pub fn vinv(&self) -> &[f64] {
        &self.vinv
    }

    /// Row-major lower Cholesky factor of `V`.
    pub fn chol(&self) -> &[f64] {
        &self.chol
    }

    pub fn bvec(&self) -> &[f64] {
        &self.bvec
    }

    /// Absorbs one observation `(x, r)`.
    pub fn update(&mut self, x: &[f64], r: f64) -> Result<()> {
        check_len(x.len(), self.dim)?;
        check_finite(x, "feature vector")?;
        if !r.is_finite() {
            return Err(Error::invalid(format!("reward must be finite, got {r}")));
        }
        let d = self.dim;
        self.count += 1;
        if x.iter().all(|&xi| xi == 0.0) {
            return Ok(());
        }

        for i in 0..d {
            self.bvec[i] += r * x[i];
            for j in 0..d {
                self.v[i * d + j] += x[i] * x[j];
            }
        }

        // Sherman–Morrison: V⁻¹ ← V⁻¹ − (V⁻¹x)(V⁻¹x)ᵀ / (1 + xᵀV⁻¹x).
        let u = matvec(&self.vinv, x);
        let denom = 1.0 + dot(x, &u);
        for i in 0..d {
            let ui = u[i] / denom;
            for j in 0..d {
                self.vinv[i * d + j] -= ui * u[j];
            }
        }

        cholesky_rank_one_update(&mut self.chol, x, d);

        self.since_refresh += 1;
        if self.refresh_every > 0 && self.since_refresh >= self.refresh_every {
            self.refresh()?;
        }
        Ok(())
    }

    /// Recomputes `L` and `V⁻¹` from `V` by a fresh O(d³) factorization.
    pub fn refresh(&mut self) -> Result<()> {
        self.chol = cholesky(&self.v, self.dim)?;
        self.vinv = inverse_from_cholesky(&self.chol, self.dim);
        self.since_refresh = 0;
        Ok(())
    }

    /// `θ̂ = V⁻¹ b` through the maintained inverse.
    pub fn ridge_estimate(&self) -> Vec<f64> {
        matvec(&self.vinv, &self.bvec)
    }

    /// `θ̂` by solving `L Lᵀ θ̂ = b` with two triangular solves.
    pub fn ridge_estimate_cholesky(&self) -> Vec<f64> {
        solve_lower_transpose(&self.chol, &solve_lower(&self.chol, &self.bvec))
    }

    /// Maps a standard-normal vector to one with covariance `V⁻¹` by solving
    /// `Lᵀ w = v`.
    pub fn whiten(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(v.len(), self.dim)?;
        Ok(solve_lower_transpose(&self.chol, v))
    }

    /// Maps a standard-normal vector to one with covariance `V` (`L v`).
    pub fn colour(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(v.len(), self.dim)?;
        Ok(lower_matvec(&self.chol, v))
    }

    /// `V⁻¹ g`.
    pub fn precondition(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(g.len(), self.dim)?;
        Ok(matvec(&self.vinv, g))
    }

    /// `V g`.
    pub fn apply_v(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(g.len(), self.dim)?;
        Ok(matvec(&self.v, g))
    }

    /// Confidence width `√(xᵀ V⁻¹ x)`.
    pub fn ucb_width(&self, x: &[f64]) -> Result<f64> {
        check_len(x.len(), self.dim)?;
        let q = dot(x, &matvec(&self.vinv, x));
        if q < -UCB_CLAMP || q.is_nan() {
            return Err(Error::NumericDegeneracy(format!(
                "negative quadratic form xᵀV⁻¹x = {q}"
            )));
        }
        Ok(q.max(0.0).sqrt())
    }
}

/// In-place rank-one update of a lower Cholesky factor: `L Lᵀ + x xᵀ`.
fn cholesky_rank_one_update(l: &mut [f64], x: &[f64], n: usize) {
    let mut w = x.to_vec();
    for k in 0..n {
        let lkk = l[k * n + k];
        let r = lkk.hypot(w[k]);
        let c = r / lkk;
        let s = w[k] / lkk;
        l[k * n + k] = r;
        for i in (k + 1)..n {
            let lik = (l[i * n + k] + s * w[i]) / c;
            w[i] = c * w[i] - s * lik;
            l[i * n + k] = lik;
        }
    }
}
