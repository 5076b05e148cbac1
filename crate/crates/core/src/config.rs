//! TOML experiment files and named presets for the hyperparameter tables.
//!
//! A config file has up to five sections:
//!
//! ```toml
//! [run]
//! horizon = 10000
//! seeds = [0, 1, 2]
//! out_dir = "results"
//! record_every = 10
//!
//! [env]
//! preset = "linear-20d"      # or: kind = "linear", context_dim = 4, ...
//!
//! [policy]
//! preset = "FGLMCTS-L2B1"    # or: kind = "linucb", alpha = 0.1, ...
//! name = "my-label"          # optional
//!
//! [likelihood]               # overrides for MCMC policies
//! lambda_fg = 0.1
//!
//! [sampler]
//! inner_steps = 100
//! ```
//!
//! Keys next to `preset` override the preset's fields.

use std::path::Path;

use serde_json::{Map, Value};

use crate::env::{EnvConfig, LinearEnvConfig, LogisticEnvConfig, WheelEnvConfig};
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, NamedPolicy};
use crate::likelihoods::{BetaSchedule, LikelihoodKind, LikelihoodSpec};
use crate::policies::PolicyConfig;
use crate::samplers::{SamplerConfig, SamplerKind, StepSize, SvrgConfig};

pub const DEFAULT_HORIZON: usize = 10_000;
pub const DEFAULT_SEEDS: usize = 10;

/// Step-size factors of the curvature rule, per kernel.
pub fn default_step_factor(kind: SamplerKind) -> f64 {
    match kind {
        SamplerKind::Lmc => 0.01,
        SamplerKind::Mala => 0.01,
        SamplerKind::Hmc => 0.1,
        SamplerKind::Ulmc => 0.1,
    }
}

/// Environment presets: `linear-{d}d` (five arms, context `d/5`),
/// `logistic-{d}d`, and `wheel-{δ}`.
pub fn env_preset(name: &str) -> Result<EnvConfig> {
    let bad = || Error::Config(format!("unknown environment preset `{name}`"));
    if let Some(rest) = name.strip_prefix("linear-") {
        let d: usize = rest
            .strip_suffix('d')
            .and_then(|s| s.parse().ok())
            .ok_or_else(bad)?;
        let base = LinearEnvConfig::default();
        if d == 0 || d % base.num_arms != 0 {
            return Err(Error::Config(format!(
                "linear dimension {d} is not a multiple of {} arms",
                base.num_arms
            )));
        }
        return Ok(EnvConfig::Linear(LinearEnvConfig {
            context_dim: d / base.num_arms,
            ..base
        }));
    }
    if let Some(rest) = name.strip_prefix("logistic-") {
        let d: usize = rest
            .strip_suffix('d')
            .and_then(|s| s.parse().ok())
            .ok_or_else(bad)?;
        return Ok(EnvConfig::Logistic(LogisticEnvConfig {
            dim: d,
            ..LogisticEnvConfig::default()
        }));
    }
    if name == "wheel" {
        return Ok(EnvConfig::Wheel(WheelEnvConfig::default()));
    }
    if let Some(rest) = name.strip_prefix("wheel-") {
        let delta: f64 = rest.parse().map_err(|_| bad())?;
        return Ok(EnvConfig::Wheel(WheelEnvConfig {
            delta,
            ..WheelEnvConfig::default()
        }));
    }
    Err(bad())
}

fn lambda_level(i: u32) -> Option<f64> {
    match i {
        1 => Some(0.01),
        2 => Some(0.1),
        3 => Some(0.5),
        4 => Some(1.0),
        _ => None,
    }
}

fn beta_level(i: u32) -> Option<BetaSchedule> {
    match i {
        1 => Some(BetaSchedule::d_log_t(1000.0, 0, 0)),
        2 => Some(BetaSchedule::constant(1.0)),
        _ => None,
    }
}

/// Policy presets named as in the hyperparameter tables, e.g. `LinUCB`,
/// `MALATS`, `PSFGLMCTS-L2B1`, `FGHMCTS`, `USFGLMCTS`, `SVRGLMCTS`.
///
/// Grammar: `[P][U][FG|SFG](LMC|MALA|HMC|SVRGLMC)[TS][-L{1..4}B{1,2}]`.
/// `L1..L4` set λ to 0.01, 0.1, 0.5, 1; `B1` is the `β = 10³` d-log-t
/// schedule and `B2` a constant `β = 1`.
pub fn policy_preset(name: &str, env: &EnvConfig) -> Result<PolicyConfig> {
    match name {
        "Uniform" => return Ok(PolicyConfig::Uniform),
        "EpsGreedy" => {
            return Ok(PolicyConfig::EpsGreedy {
                eps: 0.01,
                decay: false,
                reg: 1.0,
            })
        }
        "LinUCB" => {
            return Ok(PolicyConfig::LinUcb {
                alpha: 0.1,
                reg: 1.0,
            })
        }
        "LinTS" => {
            return Ok(PolicyConfig::LinTs {
                ts_scale: 1.0,
                reg: 1.0,
            })
        }
        _ => {}
    }
    let bad = || Error::Config(format!("unknown policy preset `{name}`"));

    let (body, levels) = match name.rsplit_once('-') {
        Some((body, suffix)) => {
            let rest = suffix.strip_prefix('L').ok_or_else(bad)?;
            let (l, b) = rest.split_once('B').ok_or_else(bad)?;
            let l = l.parse().ok().and_then(lambda_level).ok_or_else(bad)?;
            let b = b.parse().ok().and_then(beta_level).ok_or_else(bad)?;
            (body, Some((l, b)))
        }
        None => (name, None),
    };

    let mut rest = body;
    let precondition = if let Some(r) = rest.strip_prefix('P') {
        rest = r;
        true
    } else {
        false
    };
    // `ULMC` alone names the underdamped TS sampler.
    let underdamped =
        if rest.starts_with("ULMC") || rest.starts_with("UFG") || rest.starts_with("USFG") {
            rest = &rest[1..];
            true
        } else {
            false
        };
    let kind = if let Some(r) = rest.strip_prefix("SFG") {
        rest = r;
        LikelihoodKind::Sfg
    } else if let Some(r) = rest.strip_prefix("FG") {
        rest = r;
        LikelihoodKind::Fg
    } else {
        LikelihoodKind::Ts
    };
    let rest = rest.strip_suffix("TS").unwrap_or(rest);
    let (sampler_kind, svrg) = match rest {
        "LMC" if underdamped => (SamplerKind::Ulmc, false),
        "LMC" => (SamplerKind::Lmc, false),
        "SVRGLMC" if !underdamped => (SamplerKind::Lmc, true),
        "MALA" if !underdamped => (SamplerKind::Mala, false),
        "HMC" if !underdamped => (SamplerKind::Hmc, false),
        _ => return Err(bad()),
    };
    if kind == LikelihoodKind::Ts && levels.is_some() {
        return Err(bad());
    }

    let default_lambda = match (kind, sampler_kind) {
        (LikelihoodKind::Ts, _) => 0.0,
        (_, SamplerKind::Hmc) => 0.5,
        _ => 0.01,
    };
    let (lambda_fg, beta) = levels.unwrap_or((default_lambda, BetaSchedule::d_log_t(1000.0, 0, 0)));
    let eta = match (env, kind) {
        (EnvConfig::Logistic(_), LikelihoodKind::Fg | LikelihoodKind::Sfg) => 10.0,
        _ => 1.0,
    };
    let likelihood = LikelihoodSpec {
        kind,
        eta,
        lambda_fg,
        ..LikelihoodSpec::ts(beta)
    };
    let mut sampler = SamplerConfig::new(
        sampler_kind,
        StepSize::Curvature {
            factor: default_step_factor(sampler_kind),
        },
    );
    sampler.precondition = precondition;
    if svrg {
        sampler.svrg = Some(SvrgConfig {
            batch: 64,
            snapshot_period: None,
        });
    }
    let cfg = PolicyConfig::McmcTs {
        likelihood,
        sampler,
        reg: 1.0,
    };
    cfg.validate()
        .map_err(|e| Error::Config(format!("preset `{name}`: {e}")))?;
    Ok(cfg)
}

/// Every preset name spelled out in the linear and logistic tables.
pub fn table_policy_names() -> Vec<String> {
    let mut names: Vec<String> = ["LinUCB", "EpsGreedy", "LinTS", "Uniform"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for base in [
        "LMCTS",
        "PLMCTS",
        "SVRGLMCTS",
        "HMCTS",
        "PHMCTS",
        "MALATS",
        "ULMCTS",
    ] {
        names.push(base.into());
    }
    for base in [
        "FGHMCTS",
        "PFGHMCTS",
        "SFGHMCTS",
        "PSFGHMCTS",
        "UFGLMCTS",
        "USFGLMCTS",
    ] {
        names.push(base.into());
    }
    for fam in [
        "FGLMCTS",
        "PFGLMCTS",
        "SFGLMCTS",
        "PSFGLMCTS",
        "FGMALATS",
        "SFGMALATS",
    ] {
        for l in 1..=4 {
            for b in 1..=2 {
                names.push(format!("{fam}-L{l}B{b}"));
            }
        }
    }
    names
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Internal(e.to_string()))
}

fn from_json<T: serde::de::DeserializeOwned>(v: Value, what: &str) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Config(format!("{what}: {e}")))
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

fn section(root: &Map<String, Value>, key: &str) -> Result<Map<String, Value>> {
    match root.get(key) {
        None => Ok(Map::new()),
        Some(Value::Object(m)) => Ok(m.clone()),
        Some(_) => Err(Error::Config(format!("[{key}] must be a table"))),
    }
}

fn take_str(m: &mut Map<String, Value>, key: &str) -> Result<Option<String>> {
    match m.remove(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(Error::Config(format!("`{key}` must be a string"))),
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub out_dir: Option<std::path::PathBuf>,
    pub policy: Option<String>,
    pub env: Option<String>,
}

pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let root = match to_json(&table)? {
        Value::Object(m) => m,
        _ => unreachable!("a TOML document is a table"),
    };
    for key in root.keys() {
        if !["run", "env", "policy", "likelihood", "sampler"].contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown section [{key}]")));
        }
    }

    let mut run = section(&root, "run")?;
    let horizon = match run.remove("horizon") {
        None => DEFAULT_HORIZON,
        Some(v) => v
            .as_u64()
            .filter(|&h| h > 0)
            .ok_or_else(|| Error::Config("horizon must be a positive integer".into()))?
            as usize,
    };
    let seeds: Vec<u64> = match run.remove("seeds") {
        None => (0..DEFAULT_SEEDS as u64).collect(),
        Some(v) => from_json(v, "run.seeds")?,
    };
    let out_dir = match take_str(&mut run, "out_dir")? {
        Some(s) => s.into(),
        None => std::path::PathBuf::from("results"),
    };
    let record_every = match run.remove("record_every") {
        None => 1,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| Error::Config("record_every must be an integer".into()))?
            as usize,
    };
    if let Some(k) = run.keys().next() {
        return Err(Error::Config(format!("unknown key run.{k}")));
    }

    let mut env_sec = section(&root, "env")?;
    let env_preset_name = overrides.env.clone().or(take_str(&mut env_sec, "preset")?);
    if overrides.env.is_some() {
        env_sec.clear();
    }
    let env: EnvConfig = match env_preset_name {
        Some(p) => {
            let mut v = to_json(&env_preset(&p)?)?;
            merge(&mut v, &Value::Object(env_sec));
            from_json(v, "env")?
        }
        None if env_sec.is_empty() => return Err(Error::Config("missing [env] section".into())),
        None => from_json(Value::Object(env_sec), "env")?,
    };

    let mut pol_sec = section(&root, "policy")?;
    let mut name = take_str(&mut pol_sec, "name")?;
    let preset = overrides
        .policy
        .clone()
        .or(take_str(&mut pol_sec, "preset")?);
    if overrides.policy.is_some() {
        pol_sec.clear();
        name = None;
    }
    let mut policy_json = match &preset {
        Some(p) => {
            let mut v = to_json(&policy_preset(p, &env)?)?;
            merge(&mut v, &Value::Object(pol_sec));
            v
        }
        None if pol_sec.is_empty() => return Err(Error::Config("missing [policy] section".into())),
        None => Value::Object(pol_sec),
    };
    for key in ["likelihood", "sampler"] {
        let over = section(&root, key)?;
        if over.is_empty() {
            continue;
        }
        let obj = policy_json
            .as_object_mut()
            .ok_or_else(|| Error::Config("[policy] must be a table".into()))?;
        if obj.get("kind").and_then(Value::as_str) != Some("mcmc_ts") {
            return Err(Error::Config(format!(
                "[{key}] only applies to MCMC Thompson-sampling policies"
            )));
        }
        let slot = obj.entry(key).or_insert_with(|| Value::Object(Map::new()));
        merge(slot, &Value::Object(over));
    }
    let config: PolicyConfig = from_json(policy_json, "policy")?;
    let name = name
        .or(preset)
        .unwrap_or_else(|| default_policy_name(&config));

    let mut cfg = ExperimentConfig {
        env,
        policy: NamedPolicy { name, config },
        horizon,
        seeds,
        out_dir,
        record_every,
    };
    if let Some(s) = &overrides.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(o) = &overrides.out_dir {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, overrides)
}

fn default_policy_name(cfg: &PolicyConfig) -> String {
    match cfg {
        PolicyConfig::Uniform => "Uniform".into(),
        PolicyConfig::EpsGreedy { .. } => "EpsGreedy".into(),
        PolicyConfig::LinUcb { .. } => "LinUCB".into(),
        PolicyConfig::LinTs { .. } => "LinTS".into(),
        PolicyConfig::McmcTs {
            likelihood,
            sampler,
            ..
        } => {
            let p = if sampler.precondition { "P" } else { "" };
            let l = match likelihood.kind {
                LikelihoodKind::Ts => "",
                LikelihoodKind::Fg => "FG",
                LikelihoodKind::Sfg => "SFG",
            };
            let s = match (sampler.kind, sampler.svrg.is_some()) {
                (SamplerKind::Lmc, true) => "SVRGLMC",
                (SamplerKind::Lmc, false) => "LMC",
                (SamplerKind::Mala, _) => "MALA",
                (SamplerKind::Hmc, _) => "HMC",
                (SamplerKind::Ulmc, _) => "ULMC",
            };
            format!("{p}{l}{s}TS")
        }
    }
}

fn set_path(v: &mut Value, path: &[&str], value: f64) -> bool {
    let Some((head, tail)) = path.split_first() else {
        return false;
    };
    let Some(obj) = v.as_object_mut() else {
        return false;
    };
    if tail.is_empty() {
        return match obj.get_mut(*head) {
            Some(slot) if slot.is_number() => {
                *slot = if slot.is_u64() && value.fract() == 0.0 && value >= 0.0 {
                    Value::from(value as u64)
                } else {
                    Value::from(value)
                };
                true
            }
            _ => false,
        };
    }
    obj.get_mut(*head)
        .is_some_and(|child| set_path(child, tail, value))
}

/// Returns a copy of `cfg` with one numeric parameter replaced.
///
/// `param` is either a dotted path rooted at `env`, `policy`, `likelihood`
/// or `sampler` (e.g. `sampler.step.factor`), or a bare field name searched
/// in the likelihood, sampler, policy, and env in that order.
pub fn with_param(cfg: &ExperimentConfig, param: &str, value: f64) -> Result<ExperimentConfig> {
    let mut env = to_json(&cfg.env)?;
    let mut policy = to_json(&cfg.policy.config)?;
    let parts: Vec<&str> = param.split('.').collect();
    let done = match parts[0] {
        "env" => set_path(&mut env, &parts[1..], value),
        "policy" => set_path(&mut policy, &parts[1..], value),
        "likelihood" | "sampler" => set_path(&mut policy, &parts, value),
        _ => {
            set_path(
                &mut policy,
                &[&["likelihood"], parts.as_slice()].concat(),
                value,
            ) || set_path(
                &mut policy,
                &[&["sampler"], parts.as_slice()].concat(),
                value,
            ) || set_path(&mut policy, &parts, value)
                || set_path(&mut env, &parts, value)
        }
    };
    if !done {
        return Err(Error::Config(format!(
            "parameter `{param}` does not name a numeric field of this config"
        )));
    }
    let mut out = cfg.clone();
    out.env = from_json(env, "env")?;
    out.policy = NamedPolicy {
        name: format!("{}+{}={}", cfg.policy.name, param, value),
        config: from_json(policy, "policy")?,
    };
    out.validate()?;
    Ok(out)
}
