//! Dataset-backed bandits.
//!
//! A classification row `(x, label)` with `N` classes becomes `N` arms
//! `x ⊗ e_i`; pulling the label arm pays 1 and every other arm pays 0.
//! Reward-matrix files instead carry one reward column per arm.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{block_feature_map, check_arm, ArmSet, BanditEnv};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, SimRng, Stream};

pub const MUSHROOM_EAT: usize = 0;
pub const MUSHROOM_PASS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Numeric,
    Categorical,
    Label,
    ArmReward,
    Ignore,
}

impl ColumnRole {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "numeric" | "n" => ColumnRole::Numeric,
            "categorical" | "c" => ColumnRole::Categorical,
            "label" | "l" => ColumnRole::Label,
            "arm_reward" | "reward" | "r" => ColumnRole::ArmReward,
            "ignore" | "skip" | "_" => ColumnRole::Ignore,
            other => return Err(Error::Schema(format!("unknown column role `{other}`"))),
        })
    }

    /// Parses a compact role list such as `"label,categorical*22"`.
    pub fn parse_list(spec: &str) -> Result<Vec<Self>> {
        let mut roles = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, count) = match item.split_once('*') {
                Some((n, c)) => {
                    let c: usize = c
                        .trim()
                        .parse()
                        .map_err(|_| Error::Schema(format!("bad repetition count in `{item}`")))?;
                    (n.trim(), c)
                }
                None => (item, 1),
            };
            let role = Self::parse(name)?;
            roles.extend(std::iter::repeat(role).take(count));
        }
        if roles.is_empty() {
            return Err(Error::Schema("column list is empty".into()));
        }
        Ok(roles)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum RewardScheme {
    /// Reward 1 for the label arm, 0 otherwise.
    OneHot,
    /// Two arms, eat (0) and pass (1): eating an edible mushroom pays +5,
    /// eating a poisonous one pays +5 or −35 with equal odds, passing pays 0.
    Mushroom { poisonous: String },
    /// Explicit per-arm reward columns.
    Matrix,
}

impl Default for RewardScheme {
    fn default() -> Self {
        RewardScheme::OneHot
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    /// Compact role list, e.g. `"numeric*9,label"`.
    pub columns: String,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default)]
    pub reward: RewardScheme,
    /// Explicit label order; otherwise distinct labels are sorted.
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

impl DatasetSchema {
    pub fn new(columns: &str) -> Self {
        Self {
            columns: columns.to_string(),
            has_header: false,
            reward: RewardScheme::OneHot,
            labels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum RowReward {
    Fixed(Vec<f64>),
    Mushroom { poisonous: bool },
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    features: Vec<f64>,
    reward: RowReward,
}

impl Row {
    fn means(&self) -> Vec<f64> {
        match &self.reward {
            RowReward::Fixed(r) => r.clone(),
            RowReward::Mushroom { poisonous } => {
                let eat = if *poisonous {
                    0.5 * 5.0 + 0.5 * -35.0
                } else {
                    5.0
                };
                vec![eat, 0.0]
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetEnv {
    name: String,
    rows: Vec<Row>,
    num_arms: usize,
    feature_dim: usize,
    order: Vec<usize>,
    cursor: usize,
    current: Option<usize>,
    shuffle_rng: SimRng,
    horizon: usize,
    consumed: usize,
    passes: usize,
}

fn sort_levels(levels: BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = levels.into_iter().collect();
    if v.iter().all(|s| s.parse::<f64>().is_ok()) {
        v.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .partial_cmp(&b.parse::<f64>().unwrap())
                .unwrap()
        });
    }
    v
}

impl DatasetEnv {
    /// Loads and shuffles a dataset; `seed` drives the row permutation.
    pub fn load(path: impl AsRef<Path>, schema: &DatasetSchema, seed: u64) -> Result<Self> {
        Self::load_with_rng(path, schema, &mut stream_rng(seed, Stream::EnvSetup))
    }

    pub fn load_with_rng(
        path: impl AsRef<Path>,
        schema: &DatasetSchema,
        rng: &mut SimRng,
    ) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut env = Self::from_reader(file, schema, rng)?;
        if let Some(stem) = path.file_stem() {
            env.name = stem.to_string_lossy().into_owned();
        }
        Ok(env)
    }

    pub fn from_reader<R: Read>(
        reader: R,
        schema: &DatasetSchema,
        rng: &mut SimRng,
    ) -> Result<Self> {
        let roles = ColumnRole::parse_list(&schema.columns)?;
        let n_labels = roles.iter().filter(|r| **r == ColumnRole::Label).count();
        let n_reward_cols = roles
            .iter()
            .filter(|r| **r == ColumnRole::ArmReward)
            .count();
        match schema.reward {
            RewardScheme::Matrix => {
                if n_reward_cols == 0 {
                    return Err(Error::Schema(
                        "matrix scheme needs arm_reward columns".into(),
                    ));
                }
            }
            _ => {
                if n_labels != 1 {
                    return Err(Error::Schema(format!(
                        "classification schemes need exactly one label column, found {n_labels}"
                    )));
                }
            }
        }

        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(schema.has_header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut raw: Vec<(u64, Vec<String>)> = Vec::new();
        for record in csv_reader.records() {
            let record = record.map_err(|e| Error::Ingestion {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() == 1 && record.get(0) == Some("") {
                continue;
            }
            if record.len() != roles.len() {
                return Err(Error::Schema(format!(
                    "line {line}: expected {} columns, found {}",
                    roles.len(),
                    record.len()
                )));
            }
            raw.push((line, record.iter().map(str::to_string).collect()));
        }
        if raw.is_empty() {
            return Err(Error::Ingestion {
                line: 0,
                message: "dataset contains no rows".into(),
            });
        }

        // Category levels per categorical column, and label levels.
        let mut levels: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        let mut label_levels = BTreeSet::new();
        for (_, fields) in &raw {
            for (j, role) in roles.iter().enumerate() {
                match role {
                    ColumnRole::Categorical => {
                        levels.entry(j).or_default().insert(fields[j].clone());
                    }
                    ColumnRole::Label => {
                        label_levels.insert(fields[j].clone());
                    }
                    _ => {}
                }
            }
        }
        let levels: BTreeMap<usize, Vec<String>> = levels
            .into_iter()
            .map(|(j, l)| (j, sort_levels(l)))
            .collect();
        let labels = match &schema.labels {
            Some(l) => l.clone(),
            None => sort_levels(label_levels),
        };

        let num_arms = match &schema.reward {
            RewardScheme::OneHot => labels.len(),
            RewardScheme::Mushroom { .. } => 2,
            RewardScheme::Matrix => n_reward_cols,
        };
        let feature_dim: usize = roles
            .iter()
            .enumerate()
            .map(|(j, r)| match r {
                ColumnRole::Numeric => 1,
                ColumnRole::Categorical => levels[&j].len(),
                _ => 0,
            })
            .sum();
        if feature_dim == 0 {
            return Err(Error::Schema("schema declares no feature columns".into()));
        }

        let mut rows = Vec::with_capacity(raw.len());
        for (line, fields) in &raw {
            let mut features = Vec::with_capacity(feature_dim);
            let mut rewards = Vec::new();
            let mut label = None;
            for (j, role) in roles.iter().enumerate() {
                let f = &fields[j];
                match role {
                    ColumnRole::Numeric | ColumnRole::ArmReward => {
                        let v: f64 = f.parse().map_err(|_| Error::Ingestion {
                            line: *line,
                            message: format!("column {}: `{f}` is not a number", j + 1),
                        })?;
                        if !v.is_finite() {
                            return Err(Error::Ingestion {
                                line: *line,
                                message: format!("column {}: non-finite value", j + 1),
                            });
                        }
                        if *role == ColumnRole::Numeric {
                            features.push(v);
                        } else {
                            rewards.push(v);
                        }
                    }
                    ColumnRole::Categorical => {
                        let lv = &levels[&j];
                        features.extend(lv.iter().map(|l| if l == f { 1.0 } else { 0.0 }));
                    }
                    ColumnRole::Label => label = Some(f.as_str()),
                    ColumnRole::Ignore => {}
                }
            }
            let reward = match &schema.reward {
                RewardScheme::Matrix => RowReward::Fixed(rewards),
                RewardScheme::OneHot => {
                    let l = label.unwrap_or_default();
                    let idx =
                        labels
                            .iter()
                            .position(|x| x == l)
                            .ok_or_else(|| Error::Ingestion {
                                line: *line,
                                message: format!("label `{l}` not in the declared label set"),
                            })?;
                    let mut r = vec![0.0; num_arms];
                    r[idx] = 1.0;
                    RowReward::Fixed(r)
                }
                RewardScheme::Mushroom { poisonous } => RowReward::Mushroom {
                    poisonous: label == Some(poisonous.as_str()),
                },
            };
            rows.push(Row { features, reward });
        }

        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.shuffle(rng);
        let horizon = rows.len();
        Ok(Self {
            name: "dataset".into(),
            rows,
            num_arms,
            feature_dim,
            order,
            cursor: 0,
            current: None,
            shuffle_rng: rng.clone(),
            horizon,
            consumed: 0,
            passes: 0,
        })
    }

    pub fn set_horizon(&mut self, horizon: usize) {
        self.horizon = horizon;
    }

    pub fn set_name(&mut self, name: String) {
        self.name = name;
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Width of the per-row feature vector (before the block expansion).
    pub fn row_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Expected reward vector of row `i` in file order.
    pub fn row_means(&self, i: usize) -> Option<Vec<f64>> {
        self.rows.get(i).map(Row::means)
    }

    pub fn row_features(&self, i: usize) -> Option<&[f64]> {
        self.rows.get(i).map(|r| r.features.as_slice())
    }

    fn current_row(&self) -> Result<&Row> {
        self.current
            .map(|i| &self.rows[i])
            .ok_or_else(|| Error::Internal("no row observed yet".into()))
    }
}

impl BanditEnv for DatasetEnv {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn feature_dim(&self) -> usize {
        self.feature_dim * self.num_arms
    }
    fn num_arms(&self) -> usize {
        self.num_arms
    }
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn observe(&mut self, _rng: &mut SimRng) -> Result<ArmSet> {
        if self.consumed >= self.horizon {
            return Err(Error::EndOfStream {
                horizon: self.horizon,
            });
        }
        if self.cursor == self.rows.len() {
            self.order.shuffle(&mut self.shuffle_rng);
            self.cursor = 0;
            self.passes += 1;
            log::info!(
                "{}: rows exhausted after {} rounds, starting pass {} with a fresh shuffle",
                self.name,
                self.consumed,
                self.passes + 1
            );
        }
        let idx = self.order[self.cursor];
        self.cursor += 1;
        self.consumed += 1;
        self.current = Some(idx);
        let x = &self.rows[idx].features;
        let arms = (0..self.num_arms)
            .map(|i| block_feature_map(x, i, self.num_arms))
            .collect::<Result<Vec<_>>>()?;
        ArmSet::new(arms, self.consumed)
    }

    fn reward(&mut self, armset: &ArmSet, chosen: usize, rng: &mut SimRng) -> Result<f64> {
        check_arm(armset, chosen)?;
        let row = self.current_row()?;
        Ok(match &row.reward {
            RowReward::Fixed(r) => r[chosen],
            RowReward::Mushroom { poisonous } => match (chosen, poisonous) {
                (MUSHROOM_EAT, false) => 5.0,
                (MUSHROOM_EAT, true) => {
                    if rng.random::<bool>() {
                        5.0
                    } else {
                        -35.0
                    }
                }
                _ => 0.0,
            },
        })
    }

    fn mean_reward(&self, armset: &ArmSet, chosen: usize) -> Result<f64> {
        check_arm(armset, chosen)?;
        Ok(self.current_row()?.means()[chosen])
    }
}
