//! TS, feel-good (FG) and smoothed feel-good (SFG) losses over the bandit
//! history, with a Gaussian prior and an inverse-temperature schedule.
//!
//! For a linear model `f_θ(x) = xᵀθ` the per-round losses are
//!
//! * TS:  `η (xᵀθ − r)²`
//! * FG:  `η (xᵀθ − r)² − λ min(b, xᵀθ)`
//! * SFG: `η (xᵀθ − r)² − λ (b − Φ_s(b − f*))`, `f* = max_a aᵀθ` over that
//!   round's arm set,
//!
//! and the sampling target is `β_t (Σ ℓ_s + ‖θ‖² / (2σ₀²))`.

use serde::{Deserialize, Serialize};

use crate::env::ArmSet;
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, dot, norm};
use crate::samplers::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodKind {
    Ts,
    Fg,
    Sfg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum BetaSchedule {
    Constant {
        beta0: f64,
    },
    /// `β_t⁻¹ = (d / beta0) · ln(t+1) · ln T / ln(T+1)`, so that
    /// `β_T⁻¹ = d ln T / beta0`. A zero `dim` or `horizon` is filled in from
    /// the experiment by [`BetaSchedule::resolve`].
    DLogT {
        beta0: f64,
        #[serde(default)]
        dim: usize,
        #[serde(default)]
        horizon: usize,
    },
}

impl BetaSchedule {
    pub fn constant(beta0: f64) -> Self {
        BetaSchedule::Constant { beta0 }
    }

    pub fn d_log_t(beta0: f64, dim: usize, horizon: usize) -> Self {
        BetaSchedule::DLogT {
            beta0,
            dim,
            horizon,
        }
    }

    /// Fills unset `dim`/`horizon` fields.
    pub fn resolve(self, dim: usize, horizon: usize) -> Self {
        match self {
            BetaSchedule::DLogT {
                beta0,
                dim: d,
                horizon: h,
            } => BetaSchedule::DLogT {
                beta0,
                dim: if d == 0 { dim } else { d },
                horizon: if h == 0 { horizon } else { h },
            },
            c => c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaSchedule::Constant { beta0 } => {
                if !(beta0 > 0.0 && beta0.is_finite()) {
                    return Err(Error::invalid(format!(
                        "beta0 must be positive, got {beta0}"
                    )));
                }
            }
            BetaSchedule::DLogT {
                beta0,
                dim,
                horizon,
            } => {
                if !(beta0 > 0.0 && beta0.is_finite()) {
                    return Err(Error::invalid(format!(
                        "beta0 must be positive, got {beta0}"
                    )));
                }
                if dim == 0 {
                    return Err(Error::invalid("d-log-t schedule needs dim ≥ 1"));
                }
                if horizon < 2 {
                    return Err(Error::invalid("d-log-t schedule needs horizon ≥ 2"));
                }
            }
        }
        Ok(())
    }

    /// Inverse temperature at round `t` (1-based).
    pub fn beta_at(&self, t: usize) -> Result<f64> {
        self.validate()?;
        match *self {
            BetaSchedule::Constant { beta0 } => {
                if t == 0 {
                    return Err(Error::invalid("round index starts at 1"));
                }
                Ok(beta0)
            }
            BetaSchedule::DLogT {
                beta0,
                dim,
                horizon,
            } => {
                if t == 0 || t > horizon {
                    return Err(Error::invalid(format!("round {t} outside [1, {horizon}]")));
                }
                let big_t = horizon as f64;
                let inv =
                    dim as f64 / beta0 * ((t as f64) + 1.0).ln() * big_t.ln() / (big_t + 1.0).ln();
                Ok(1.0 / inv)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodSpec {
    pub kind: LikelihoodKind,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default)]
    pub lambda_fg: f64,
    #[serde(default = "default_cap")]
    pub cap: f64,
    #[serde(default = "default_smooth")]
    pub smooth: f64,
    #[serde(default = "default_prior_sd")]
    pub prior_sd: f64,
    pub beta: BetaSchedule,
}

fn one() -> f64 {
    1.0
}
fn default_cap() -> f64 {
    1000.0
}
fn default_smooth() -> f64 {
    10.0
}
fn default_prior_sd() -> f64 {
    0.5f64.sqrt()
}

impl LikelihoodSpec {
    pub fn ts(beta: BetaSchedule) -> Self {
        Self {
            kind: LikelihoodKind::Ts,
            eta: 1.0,
            lambda_fg: 0.0,
            cap: default_cap(),
            smooth: default_smooth(),
            prior_sd: default_prior_sd(),
            beta,
        }
    }

    pub fn fg(lambda_fg: f64, beta: BetaSchedule) -> Self {
        Self {
            kind: LikelihoodKind::Fg,
            lambda_fg,
            ..Self::ts(beta)
        }
    }

    pub fn sfg(lambda_fg: f64, smooth: f64, beta: BetaSchedule) -> Self {
        Self {
            kind: LikelihoodKind::Sfg,
            lambda_fg,
            smooth,
            ..Self::ts(beta)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.lambda_fg >= 0.0 && self.lambda_fg.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_fg must be non-negative, got {}",
                self.lambda_fg
            )));
        }
        if !(self.prior_sd > 0.0) {
            return Err(Error::invalid(format!(
                "prior_sd must be positive, got {}",
                self.prior_sd
            )));
        }
        if self.cap.is_nan() {
            return Err(Error::invalid("cap must not be NaN"));
        }
        if self.kind == LikelihoodKind::Sfg && !(self.smooth > 0.0 && self.smooth.is_finite()) {
            return Err(Error::invalid(format!(
                "SFG needs smooth > 0, got {}",
                self.smooth
            )));
        }
        self.beta.validate()
    }

    fn prior_weight(&self) -> f64 {
        1.0 / (self.prior_sd * self.prior_sd)
    }
}

/// `Φ_s(u) = ln(1 + e^{su}) / s`, evaluated without overflow.
pub fn softplus_smooth(u: f64, s: f64) -> f64 {
    u.max(0.0) + (-s * u.abs()).exp().ln_1p() / s
}

/// Derivative of [`softplus_smooth`] in `u`: the logistic function of `su`.
fn softplus_slope(u: f64, s: f64) -> f64 {
    crate::env::sigmoid(s * u)
}

/// SFG bonus `b − Φ_s(b − f*)`, written as `min(b, f*)` minus the softplus
/// tail so the result never rounds above `min(b, f*)`.
pub fn smoothed_bonus(fstar: f64, cap: f64, s: f64) -> f64 {
    let u = cap - fstar;
    cap.min(fstar) - (-s * u.abs()).exp().ln_1p() / s
}

/// Index and value of the best arm under `θ`; lowest index on ties.
pub fn argmax_arm(armset: &ArmSet, theta: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, a) in armset.arms.iter().enumerate() {
        let v = dot(a, theta);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub armset: ArmSet,
    pub chosen: usize,
    pub reward: f64,
}

impl HistoryEntry {
    pub fn chosen_x(&self) -> &[f64] {
        &self.armset.arms[self.chosen]
    }
}

/// Ordered record of past rounds plus running sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    dim: usize,
    entries: Vec<HistoryEntry>,
    gram: Vec<f64>,
    xr: Vec<f64>,
    rr: f64,
    xsum: Vec<f64>,
    max_x_norm: f64,
}

impl History {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
            gram: vec![0.0; dim * dim],
            xr: vec![0.0; dim],
            rr: 0.0,
            xsum: vec![0.0; dim],
            max_x_norm: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    /// `Σ x xᵀ` over the chosen features.
    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn push(&mut self, armset: ArmSet, chosen: usize, reward: f64) -> Result<()> {
        check_len(armset.dim(), self.dim)?;
        crate::env::check_arm(&armset, chosen)?;
        if !reward.is_finite() {
            return Err(Error::invalid("reward must be finite"));
        }
        let x = &armset.arms[chosen];
        crate::error::check_finite(x, "chosen feature vector")?;
        let d = self.dim;
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                self.gram[i * d + j] += x[i] * x[j];
            }
            self.xr[i] += reward * x[i];
            self.xsum[i] += x[i];
        }
        self.rr += reward * reward;
        self.max_x_norm = self.max_x_norm.max(norm(x));
        self.entries.push(HistoryEntry {
            armset,
            chosen,
            reward,
        });
        Ok(())
    }
}

/// `U(θ) = β_t · (Σ ℓ_s(θ) + ‖θ‖²/(2σ₀²))` for a fixed history and round.
#[derive(Debug, Clone, Copy)]
pub struct BanditPosterior<'a> {
    spec: &'a LikelihoodSpec,
    hist: &'a History,
    beta: f64,
}

impl<'a> BanditPosterior<'a> {
    pub fn new(spec: &'a LikelihoodSpec, hist: &'a History, t: usize) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            hist,
            beta: spec.beta.beta_at(t)?,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        check_len(theta.len(), self.hist.dim)
    }

    /// Every round's chosen feature satisfies `xᵀθ ≤ b`.
    fn fg_bonus_all_active(&self, theta: &[f64]) -> bool {
        norm(theta) * self.hist.max_x_norm <= self.spec.cap * (1.0 - 1e-12)
    }

    fn entry_loss(&self, e: &HistoryEntry, theta: &[f64]) -> f64 {
        let s = self.spec;
        let f = dot(e.chosen_x(), theta);
        let mut per = s.eta * (f - e.reward) * (f - e.reward);
        match s.kind {
            LikelihoodKind::Ts => {}
            LikelihoodKind::Fg => per -= s.lambda_fg * s.cap.min(f),
            LikelihoodKind::Sfg => {
                let (_, fstar) = argmax_arm(&e.armset, theta);
                per -= s.lambda_fg * smoothed_bonus(fstar, s.cap, s.smooth);
            }
        }
        per
    }

    fn add_entry_grad(&self, e: &HistoryEntry, theta: &[f64], g: &mut [f64]) {
        let s = self.spec;
        let x = e.chosen_x();
        let f = dot(x, theta);
        let c = 2.0 * s.eta * (f - e.reward);
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += c * xi;
        }
        match s.kind {
            LikelihoodKind::Ts => {}
            LikelihoodKind::Fg => {
                if f <= s.cap {
                    for (gi, xi) in g.iter_mut().zip(x) {
                        *gi -= s.lambda_fg * xi;
                    }
                }
            }
            LikelihoodKind::Sfg => {
                let (istar, fstar) = argmax_arm(&e.armset, theta);
                let w = s.lambda_fg * softplus_slope(s.cap - fstar, s.smooth);
                for (gi, ai) in g.iter_mut().zip(&e.armset.arms[istar]) {
                    *gi -= w * ai;
                }
            }
        }
    }

    fn prior(&self, theta: &[f64]) -> f64 {
        0.5 * self.spec.prior_weight() * dot(theta, theta)
    }

    /// Reference evaluation that visits every history entry.
    pub fn potential_scan(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        let data: f64 = self
            .hist
            .entries
            .iter()
            .map(|e| self.entry_loss(e, theta))
            .sum();
        Ok(self.beta * (data + self.prior(theta)))
    }

    /// Reference gradient that visits every history entry.
    pub fn gradient_scan(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        let mut g = vec![0.0; theta.len()];
        for e in &self.hist.entries {
            self.add_entry_grad(e, theta, &mut g);
        }
        let w = self.spec.prior_weight();
        Ok(g.iter()
            .zip(theta)
            .map(|(gi, ti)| self.beta * (gi + w * ti))
            .collect())
    }

    fn uses_statistics(&self, theta: &[f64]) -> bool {
        match self.spec.kind {
            LikelihoodKind::Ts => true,
            LikelihoodKind::Fg => self.spec.lambda_fg == 0.0 || self.fg_bonus_all_active(theta),
            LikelihoodKind::Sfg => false,
        }
    }

    /// Largest eigenvalue of the Hessian of the quadratic part of `U`,
    /// optionally in the metric `M = L Lᵀ` (returns that of `L⁻¹ H L⁻ᵀ`).
    pub fn curvature(&self, metric_chol: Option<&[f64]>) -> f64 {
        let d = self.hist.dim;
        let two_eta = 2.0 * self.spec.eta;
        let w = self.spec.prior_weight();
        let h = |v: &[f64]| -> Vec<f64> {
            linalg::matvec(&self.hist.gram, v)
                .into_iter()
                .zip(v)
                .map(|(gv, vi)| self.beta * (two_eta * gv + w * vi))
                .collect()
        };
        match metric_chol {
            None => linalg::largest_eigenvalue(d, 200, h),
            Some(l) => linalg::largest_eigenvalue(d, 200, |v| {
                let y = linalg::solve_lower_transpose(l, v);
                linalg::solve_lower(l, &h(&y))
            }),
        }
    }
}

impl Target for BanditPosterior<'_> {
    fn dim(&self) -> usize {
        self.hist.dim
    }

    fn potential(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        if !self.uses_statistics(theta) {
            return self.potential_scan(theta);
        }
        let s = self.spec;
        let h = self.hist;
        let gtheta = linalg::matvec(&h.gram, theta);
        let mut per = s.eta * (dot(theta, &gtheta) - 2.0 * dot(theta, &h.xr) + h.rr);
        if s.kind != LikelihoodKind::Ts {
            per -= s.lambda_fg * dot(&h.xsum, theta);
        }
        Ok(self.beta * (per + self.prior(theta)))
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        if !self.uses_statistics(theta) {
            return self.gradient_scan(theta);
        }
        let s = self.spec;
        let h = self.hist;
        let w = s.prior_weight();
        let gtheta = linalg::matvec(&h.gram, theta);
        let fg = s.kind != LikelihoodKind::Ts;
        Ok((0..theta.len())
            .map(|i| {
                let mut gi = 2.0 * s.eta * (gtheta[i] - h.xr[i]);
                if fg {
                    gi -= s.lambda_fg * h.xsum[i];
                }
                self.beta * (gi + w * theta[i])
            })
            .collect())
    }

    fn num_terms(&self) -> usize {
        self.hist.len()
    }

    fn term_gradient(&self, i: usize, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        let e = self
            .hist
            .entries
            .get(i)
            .ok_or_else(|| Error::invalid(format!("history index {i} out of range")))?;
        let mut g = vec![0.0; theta.len()];
        self.add_entry_grad(e, theta, &mut g);
        g.iter_mut().for_each(|v| *v *= self.beta);
        Ok(g)
    }

    fn prior_gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        let c = self.beta * self.spec.prior_weight();
        Ok(theta.iter().map(|t| c * t).collect())
    }
}

/// `β_t [Σ ℓ_s(θ) + ‖θ‖²/(2σ₀²)]`.
pub fn loss_eval(spec: &LikelihoodSpec, theta: &[f64], hist: &History, t: usize) -> Result<f64> {
    BanditPosterior::new(spec, hist, t)?.potential(theta)
}

/// Gradient of [`loss_eval`] in θ.
pub fn loss_grad(
    spec: &LikelihoodSpec,
    theta: &[f64],
    hist: &History,
    t: usize,
) -> Result<Vec<f64>> {
    BanditPosterior::new(spec, hist, t)?.gradient(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(x: Vec<f64>, r: f64) -> History {
        let mut h = History::new(x.len());
        h.push(ArmSet::new(vec![x], 1).unwrap(), 0, r).unwrap();
        h
    }

    #[test]
    fn softplus_values() {
        assert!((softplus_smooth(0.0, 10.0) - 2f64.ln() / 10.0).abs() < 1e-15);
        assert!((softplus_smooth(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus_smooth(5.0, 10.0) - 5.0).abs() < 2e-22);
        assert!(softplus_smooth(-1e6, 10.0) >= 0.0);
        assert!(softplus_smooth(1e308, 10.0).is_finite());
    }

    #[test]
    fn fg_exact_fit_bonus() {
        let mut spec = LikelihoodSpec::fg(0.5, BetaSchedule::constant(1.0));
        spec.prior_sd = f64::INFINITY;
        let h = single(vec![1.0, 0.0], 1.0);
        let v = loss_eval(&spec, &[1.0, 0.0], &h, 1).unwrap();
        assert_eq!(v, -0.5);
    }

    #[test]
    fn empty_history_is_prior_only() {
        let spec = LikelihoodSpec::ts(BetaSchedule::constant(2.0));
        let h = History::new(3);
        assert_eq!(loss_eval(&spec, &[0.0; 3], &h, 1).unwrap(), 0.0);
        assert_eq!(loss_grad(&spec, &[0.0; 3], &h, 1).unwrap(), vec![0.0; 3]);
        // β‖θ‖²/(2σ₀²) with σ₀² = 0.5
        let v = loss_eval(&spec, &[1.0, 0.0, 0.0], &h, 1).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_gradient_example() {
        let spec = LikelihoodSpec::ts(BetaSchedule::constant(3.0));
        let x = vec![0.5, -1.0];
        let h = single(x.clone(), 0.7);
        let th = [0.2, 0.4];
        let f = dot(&x, &th);
        let g = loss_grad(&spec, &th, &h, 1).unwrap();
        for i in 0..2 {
            let want = 3.0 * (2.0 * (f - 0.7) * x[i] + th[i] / 0.5);
            assert!((g[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn statistics_agree_with_scan() {
        let mut h = History::new(2);
        for k in 0..30 {
            let a = vec![(k as f64 * 0.37).sin(), (k as f64 * 0.91).cos()];
            let b = vec![-a[1], a[0]];
            h.push(
                ArmSet::new(vec![a, b], k + 1).unwrap(),
                k % 2,
                0.1 * k as f64,
            )
            .unwrap();
        }
        for spec in [
            LikelihoodSpec::ts(BetaSchedule::constant(5.0)),
            LikelihoodSpec::fg(0.3, BetaSchedule::constant(5.0)),
        ] {
            let p = BanditPosterior::new(&spec, &h, 1).unwrap();
            let th = [0.3, -0.8];
            let a = p.potential(&th).unwrap();
            let b = p.potential_scan(&th).unwrap();
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            let ga = p.gradient(&th).unwrap();
            let gb = p.gradient_scan(&th).unwrap();
            for (x, y) in ga.iter().zip(&gb) {
                assert!((x - y).abs() <= 1e-10 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn fg_bonus_caps() {
        let mut spec = LikelihoodSpec::fg(1.0, BetaSchedule::constant(1.0));
        spec.cap = 0.5;
        spec.prior_sd = f64::INFINITY;
        let h = single(vec![1.0], 2.0);
        // f = 2 > b: bonus is b, gradient has no bonus part
        let v = loss_eval(&spec, &[2.0], &h, 1).unwrap();
        assert_eq!(v, -0.5);
        assert_eq!(loss_grad(&spec, &[2.0], &h, 1).unwrap(), vec![0.0]);
        // f = b exactly: bonus active
        let g = loss_grad(&spec, &[0.5], &h, 1).unwrap();
        assert_eq!(g, vec![2.0 * (0.5 - 2.0) - 1.0]);
    }

    #[test]
    fn beta_schedules() {
        let c = BetaSchedule::constant(1000.0);
        assert_eq!(c.beta_at(1).unwrap(), 1000.0);
        assert_eq!(c.beta_at(777).unwrap(), 1000.0);
        let s = BetaSchedule::d_log_t(1000.0, 20, 10_000);
        let inv = 1.0 / s.beta_at(10_000).unwrap();
        assert!((inv - 20.0 * (1e4f64).ln() / 1000.0).abs() < 1e-12);
        assert!(s.beta_at(0).is_err());
        assert!(s.beta_at(10_001).is_err());
        assert!(s.beta_at(1).unwrap() > s.beta_at(2).unwrap());
        assert!(BetaSchedule::d_log_t(1.0, 20, 1).beta_at(1).is_err());
        assert!(BetaSchedule::constant(0.0).beta_at(1).is_err());
    }

    #[test]
    fn resolve_fills_missing_fields() {
        let s = BetaSchedule::d_log_t(10.0, 0, 0).resolve(20, 500);
        assert_eq!(s, BetaSchedule::d_log_t(10.0, 20, 500));
        let s = BetaSchedule::d_log_t(10.0, 3, 7).resolve(20, 500);
        assert_eq!(s, BetaSchedule::d_log_t(10.0, 3, 7));
    }

    #[test]
    fn validation() {
        let mut s = LikelihoodSpec::sfg(0.1, 0.0, BetaSchedule::constant(1.0));
        assert!(s.validate().is_err());
        s.smooth = 10.0;
        assert!(s.validate().is_ok());
        s.lambda_fg = -1.0;
        assert!(s.validate().is_err());
        let h = History::new(2);
        let ok = LikelihoodSpec::ts(BetaSchedule::constant(1.0));
        assert!(loss_eval(&ok, &[0.0; 3], &h, 1).is_err());
    }
}
