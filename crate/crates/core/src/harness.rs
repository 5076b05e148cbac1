//! Seeded experiment runs, regret bookkeeping, aggregation, and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{ArmSet, BanditEnv, EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::policies::{Policy, PolicyConfig};
use crate::rng::RunStreams;

/// Rounds in the simple-regret window.
pub const SIMPLE_REGRET_WINDOW: usize = 500;

fn default_record_every() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPolicy {
    pub name: String,
    pub config: PolicyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub policy: NamedPolicy,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be ≥ 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be ≥ 1".into()));
        }
        self.policy.config.validate()
    }

    /// Short hash of the environment, policy, and horizon; seeds and output
    /// settings do not enter it.
    pub fn config_hash(&self) -> String {
        let key = serde_json::json!({
            "env": self.env,
            "policy": self.policy,
            "horizon": self.horizon,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn file_stem(&self) -> String {
        format!(
            "{}__{}__{}",
            sanitize(&self.env.name()),
            sanitize(&self.policy.name),
            self.config_hash()
        )
    }

    pub fn trace_path(&self, seed: u64) -> PathBuf {
        self.out_dir
            .join(format!("{}__seed{seed}.csv", self.file_stem()))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out_dir
            .join(format!("{}__summary.csv", self.file_stem()))
    }

    pub fn curve_path(&self) -> PathBuf {
        self.out_dir
            .join(format!("{}__curve.csv", self.file_stem()))
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '=') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub env: String,
    pub policy: String,
    pub seed: u64,
    pub wall_time_secs: f64,
}

/// Per-round pseudo-regret of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub instant: Vec<f64>,
    pub meta: TraceMeta,
}

impl RegretTrace {
    pub fn horizon(&self) -> usize {
        self.instant.len()
    }

    /// Running sum of the instantaneous regret.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.instant
            .iter()
            .map(|r| {
                acc += r;
                acc
            })
            .collect()
    }

    pub fn final_regret(&self) -> f64 {
        self.instant.iter().sum()
    }
}

/// `R_t`, the regret summed over rounds `1..=t`.
pub fn cumulative_regret(trace: &RegretTrace, t: usize) -> Result<f64> {
    if t == 0 || t > trace.horizon() {
        return Err(Error::invalid(format!(
            "round {t} outside [1, {}]",
            trace.horizon()
        )));
    }
    Ok(trace.instant[..t].iter().sum())
}

/// Regret summed over the final 500 rounds, `R_T − R_{T−500}`.
pub fn simple_regret(trace: &RegretTrace) -> Result<f64> {
    let t = trace.horizon();
    if t < SIMPLE_REGRET_WINDOW {
        return Err(Error::invalid(format!(
            "simple regret needs at least {SIMPLE_REGRET_WINDOW} rounds, trace has {t}"
        )));
    }
    let before = if t == SIMPLE_REGRET_WINDOW {
        0.0
    } else {
        cumulative_regret(trace, t - SIMPLE_REGRET_WINDOW)?
    };
    Ok(cumulative_regret(trace, t)? - before)
}

/// A decision maker driven by the experiment loop.
pub trait Agent {
    fn select(
        &mut self,
        env: &Environment,
        armset: &ArmSet,
        t: usize,
        streams: &mut RunStreams,
    ) -> Result<usize>;

    fn update(&mut self, armset: &ArmSet, chosen: usize, reward: f64) -> Result<()>;
}

impl Agent for Policy {
    fn select(
        &mut self,
        _env: &Environment,
        armset: &ArmSet,
        t: usize,
        streams: &mut RunStreams,
    ) -> Result<usize> {
        Policy::select(self, armset, t, &mut streams.policy, &mut streams.sampler)
    }

    fn update(&mut self, armset: &ArmSet, chosen: usize, reward: f64) -> Result<()> {
        Policy::update(self, armset, chosen, reward)
    }
}

/// Runs `agent` for `horizon` rounds on a fresh environment built from
/// `seed`'s streams.
pub fn run_agent(
    env_cfg: &EnvConfig,
    horizon: usize,
    seed: u64,
    policy_name: &str,
    make_agent: impl FnOnce(&Environment) -> Result<Box<dyn Agent>>,
) -> Result<RegretTrace> {
    let start = Instant::now();
    let mut streams = RunStreams::new(seed);
    let mut env = env_cfg.build(horizon, &mut streams.env_setup)?;
    let mut agent = make_agent(&env)?;
    let mut instant = Vec::with_capacity(horizon);
    let abort = |round: usize, e: Error| Error::RunAborted {
        policy: policy_name.to_string(),
        seed,
        round,
        source: Box::new(e),
    };
    for t in 1..=horizon {
        let step = |env: &mut Environment,
                    agent: &mut Box<dyn Agent>,
                    streams: &mut RunStreams|
         -> Result<f64> {
            let armset = env.observe(&mut streams.env_context)?;
            let chosen = agent.select(env, &armset, t, streams)?;
            if chosen >= armset.len() {
                return Err(Error::Internal(format!(
                    "agent chose arm {chosen} of {}",
                    armset.len()
                )));
            }
            let reward = env.reward(&armset, chosen, &mut streams.env_noise)?;
            let regret = env.optimal_mean(&armset)? - env.mean_reward(&armset, chosen)?;
            agent.update(&armset, chosen, reward)?;
            Ok(regret.max(0.0))
        };
        instant.push(step(&mut env, &mut agent, &mut streams).map_err(|e| abort(t, e))?);
    }
    Ok(RegretTrace {
        instant,
        meta: TraceMeta {
            env: env.name(),
            policy: policy_name.to_string(),
            seed,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    })
}

pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<RegretTrace> {
    cfg.validate()?;
    let policy_cfg = cfg.policy.config.clone();
    let horizon = cfg.horizon;
    let trace = run_agent(&cfg.env, horizon, seed, &cfg.policy.name, |env| {
        Ok(Box::new(Policy::new(
            policy_cfg,
            env.feature_dim(),
            horizon,
        )?))
    })?;
    log::debug!(
        "{} / {} seed {seed}: R_T = {} in {:.2}s",
        trace.meta.env,
        trace.meta.policy,
        trace.final_regret(),
        trace.meta.wall_time_secs
    );
    Ok(trace)
}

/// Runs every seed in parallel; traces come back in seed-list order.
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<Vec<RegretTrace>> {
    cfg.validate()?;
    cfg.seeds
        .par_iter()
        .map(|&s| run_experiment(cfg, s))
        .collect()
}

pub fn run_seeds_serial(cfg: &ExperimentConfig) -> Result<Vec<RegretTrace>> {
    cfg.validate()?;
    cfg.seeds.iter().map(|&s| run_experiment(cfg, s)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub mean_final: f64,
    pub std_final: f64,
    /// `None` when the horizon is shorter than the simple-regret window.
    pub mean_simple: Option<f64>,
    pub std_simple: Option<f64>,
    /// Per-round mean of cumulative regret.
    pub mean_curve: Vec<f64>,
    /// Per-round sample standard deviation of cumulative regret.
    pub std_curve: Vec<f64>,
}

/// Mean and sample standard deviation (n − 1 denominator; 0 when n = 1).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate(traces: &[RegretTrace]) -> Result<AggregateResult> {
    let Some(first) = traces.first() else {
        return Err(Error::invalid("aggregate needs at least one trace"));
    };
    let t = first.horizon();
    if traces.iter().any(|tr| tr.horizon() != t) {
        return Err(Error::invalid("traces have unequal lengths"));
    }
    if t == 0 {
        return Err(Error::invalid("traces are empty"));
    }
    let curves: Vec<Vec<f64>> = traces.iter().map(RegretTrace::cumulative).collect();
    let finals: Vec<f64> = curves.iter().map(|c| c[t - 1]).collect();
    let (mean_final, std_final) = mean_std(&finals);
    let (mean_simple, std_simple) = if t >= SIMPLE_REGRET_WINDOW {
        let simple: Vec<f64> = traces.iter().map(simple_regret).collect::<Result<_>>()?;
        let (m, s) = mean_std(&simple);
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    let mut mean_curve = Vec::with_capacity(t);
    let mut std_curve = Vec::with_capacity(t);
    let mut column = vec![0.0; curves.len()];
    for r in 0..t {
        for (c, curve) in column.iter_mut().zip(&curves) {
            *c = curve[r];
        }
        let (m, s) = mean_std(&column);
        mean_curve.push(m);
        std_curve.push(s);
    }
    Ok(AggregateResult {
        mean_final,
        std_final,
        mean_simple,
        std_simple,
        mean_curve,
        std_curve,
    })
}

/// Rounds (1-based) kept when thinning by `every`; always ends at `horizon`.
pub fn recorded_rounds(horizon: usize, every: usize) -> Vec<usize> {
    let every = every.max(1);
    let mut rounds: Vec<usize> = (1..=horizon).filter(|t| t % every == 0).collect();
    if rounds.last() != Some(&horizon) && horizon > 0 {
        rounds.push(horizon);
    }
    rounds
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrittenFiles {
    pub traces: Vec<PathBuf>,
    pub summary: PathBuf,
    pub curve: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_results(
    result: &AggregateResult,
    traces: &[RegretTrace],
    cfg: &ExperimentConfig,
) -> Result<WrittenFiles> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut trace_paths = Vec::with_capacity(traces.len());
    for tr in traces {
        let cum = tr.cumulative();
        let mut out = String::from("round,instant_regret,cumulative_regret\n");
        for t in recorded_rounds(tr.horizon(), cfg.record_every) {
            writeln!(out, "{t},{},{}", tr.instant[t - 1], cum[t - 1]).unwrap();
        }
        let path = cfg.trace_path(tr.meta.seed);
        write_file(&path, &out)?;
        trace_paths.push(path);
    }

    let seeds: Vec<String> = traces.iter().map(|t| t.meta.seed.to_string()).collect();
    let mut summary =
        String::from("env,policy,seeds,mean_final,std_final,mean_simple,std_simple\n");
    writeln!(
        summary,
        "{},{},{},{},{},{},{}",
        cfg.env.name(),
        cfg.policy.name,
        seeds.join(";"),
        result.mean_final,
        result.std_final,
        opt(result.mean_simple),
        opt(result.std_simple)
    )
    .unwrap();
    let summary_path = cfg.summary_path();
    write_file(&summary_path, &summary)?;

    let mut curve = String::from("round,mean,lo,hi\n");
    for t in recorded_rounds(result.mean_curve.len(), cfg.record_every) {
        let m = result.mean_curve[t - 1];
        let s = result.std_curve[t - 1];
        writeln!(curve, "{t},{m},{},{}", m - s, m + s).unwrap();
    }
    let curve_path = cfg.curve_path();
    write_file(&curve_path, &curve)?;

    Ok(WrittenFiles {
        traces: trace_paths,
        summary: summary_path,
        curve: curve_path,
    })
}

/// Runs all seeds, aggregates, and writes every output file.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<(AggregateResult, WrittenFiles)> {
    let traces = run_seeds(cfg)?;
    let agg = aggregate(&traces)?;
    let files = write_results(&agg, &traces, cfg)?;
    Ok((agg, files))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub round: usize,
    pub instant_regret: f64,
    pub cumulative_regret: f64,
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line());
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Ingestion {
            line,
            message: format!("{}: bad field {i}", path.display()),
        })
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Ingestion {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Ingestion {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        rows.push(TraceRow {
            round: parse_field(&rec, 0, path)?,
            instant_regret: parse_field(&rec, 1, path)?,
            cumulative_regret: parse_field(&rec, 2, path)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub env: String,
    pub policy: String,
    pub seeds: Vec<u64>,
    pub mean_final: f64,
    pub std_final: f64,
    pub mean_simple: Option<f64>,
    pub std_simple: Option<f64>,
}

pub fn read_summary(path: &Path) -> Result<SummaryRow> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Ingestion {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    let rec = rdr
        .records()
        .next()
        .ok_or_else(|| Error::Ingestion {
            line: 1,
            message: format!("{}: no summary row", path.display()),
        })?
        .map_err(|e| Error::Ingestion {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
    let optf = |i: usize| -> Result<Option<f64>> {
        match rec.get(i) {
            Some("") | None => Ok(None),
            Some(_) => parse_field(&rec, i, path).map(Some),
        }
    };
    let seeds = rec
        .get(2)
        .unwrap_or_default()
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse().map_err(|_| Error::Ingestion {
                line: 2,
                message: format!("{}: bad seed `{s}`", path.display()),
            })
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(SummaryRow {
        env: rec.get(0).unwrap_or_default().to_string(),
        policy: rec.get(1).unwrap_or_default().to_string(),
        seeds,
        mean_final: parse_field(&rec, 3, path)?,
        std_final: parse_field(&rec, 4, path)?,
        mean_simple: optf(5)?,
        std_simple: optf(6)?,
    })
}

/// Table of every summary file under `dir`, sorted by environment then
/// policy.
pub fn report(dir: &Path) -> Result<String> {
    let mut rows = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with("__summary.csv"))
        {
            rows.push(read_summary(&path)?);
        }
    }
    rows.sort_by(|a, b| (&a.env, &a.policy).cmp(&(&b.env, &b.policy)));
    let mut out = String::new();
    let env_w = rows
        .iter()
        .map(|r| r.env.chars().count())
        .max()
        .unwrap_or(0)
        .max(3);
    let pol_w = rows
        .iter()
        .map(|r| r.policy.chars().count())
        .max()
        .unwrap_or(0)
        .max(6);
    writeln!(
        out,
        "{:<env_w$}  {:<pol_w$}  {:>5}  {:>20}  {:>20}",
        "env", "policy", "seeds", "final regret", "simple regret"
    )
    .unwrap();
    for r in &rows {
        let simple = match (r.mean_simple, r.std_simple) {
            (Some(m), Some(s)) => format!("{m:.1} ± {s:.1}"),
            _ => "-".to_string(),
        };
        writeln!(
            out,
            "{:<env_w$}  {:<pol_w$}  {:>5}  {:>20}  {:>20}",
            r.env,
            r.policy,
            r.seeds.len(),
            format!("{:.1} ± {:.1}", r.mean_final, r.std_final),
            simple
        )
        .unwrap();
    }
    Ok(out)
}
