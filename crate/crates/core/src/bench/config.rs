//! Experiment configuration, loadable from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generators::{FiniteBinarySetup, L2LinearSetup, LipschitzSetup, LogisticEasySetup, LogisticHardSetup};
use crate::data::Tolerances;
use crate::error::{MolError, Result};
use crate::exec::Execution;
use crate::scalarize::{weight_grid, Scalarization, ScalarizationKind, WeightVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    LipschitzRegression,
    LogisticHard,
    LogisticEasy,
    CoinInconsistency,
    L2LinearRegression,
    ZeroOneRegression,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        Self::LipschitzRegression,
        Self::LogisticHard,
        Self::LogisticEasy,
        Self::CoinInconsistency,
        Self::L2LinearRegression,
        Self::ZeroOneRegression,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::LipschitzRegression => "lipschitz_regression",
            Self::LogisticHard => "logistic_hard",
            Self::LogisticEasy => "logistic_easy",
            Self::CoinInconsistency => "coin_inconsistency",
            Self::L2LinearRegression => "l2_linear_regression",
            Self::ZeroOneRegression => "zero_one_regression",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| MolError::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "pl_mol")]
    PlMol,
    #[serde(rename = "erm_mol_H")]
    ErmMolH,
    #[serde(rename = "erm_mol_G")]
    ErmMolG,
}

impl Method {
    pub const ALL: [Method; 3] = [Self::PlMol, Self::ErmMolH, Self::ErmMolG];

    pub fn name(&self) -> &'static str {
        match self {
            Self::PlMol => "pl_mol",
            Self::ErmMolH => "erm_mol_H",
            Self::ErmMolG => "erm_mol_G",
        }
    }
}

/// Either a uniform grid with `m` points per axis or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Grid(usize),
    List(Vec<Vec<f64>>),
}

/// Explicit per-task sample sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSizes {
    pub n: Vec<usize>,
    #[serde(rename = "N")]
    pub big_n: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoinSetup {
    pub p: [f64; 2],
}

impl Default for CoinSetup {
    fn default() -> Self {
        Self { p: [1.0, 0.4] }
    }
}

/// Hypothesis classes of the Lipschitz experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LipschitzClasses {
    pub lipschitz_h: f64,
    pub lipschitz_g: f64,
    pub grid_h: usize,
    pub grid_g: usize,
    pub quadrature_points: usize,
}

impl Default for LipschitzClasses {
    fn default() -> Self {
        Self { lipschitz_h: 0.2, lipschitz_g: 0.6, grid_h: 65, grid_g: 65, quadrature_points: 2049 }
    }
}

/// Classes of the planar logistic experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticClasses {
    pub degree_h: u32,
    pub degree_g: u32,
    pub radius_h: f64,
    pub radius_g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Labeled sizes, used for every task; crossed with `unlabeled`.
    #[serde(default)]
    pub labeled: Vec<usize>,
    #[serde(default)]
    pub unlabeled: Vec<usize>,
    /// Explicit per-task sizes, appended to the product grid.
    #[serde(default)]
    pub task_sizes: Vec<TaskSizes>,
    pub weights: WeightSpec,
    #[serde(default = "default_kinds")]
    pub scalarizations: Vec<ScalarizationKind>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Iteration budget multiplier for reference optima.
    #[serde(default = "default_reference_budget")]
    pub reference_budget: usize,
    #[serde(default)]
    pub execution: Execution,
    /// Worker threads for the job pool; `None` uses every logical core.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub zero_one_labels: bool,
    #[serde(default)]
    pub reuse_labeled: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub lipschitz: LipschitzSetup,
    #[serde(default)]
    pub lipschitz_classes: LipschitzClasses,
    #[serde(default)]
    pub logistic_hard: LogisticHardSetup,
    #[serde(default)]
    pub logistic_easy: LogisticEasySetup,
    #[serde(default)]
    pub logistic_classes: Option<LogisticClasses>,
    #[serde(default)]
    pub coin: CoinSetup,
    #[serde(default)]
    pub l2_linear: L2LinearSetup,
    #[serde(default)]
    pub finite_binary: FiniteBinarySetup,
}

fn default_seeds() -> usize {
    10
}

fn default_kinds() -> Vec<ScalarizationKind> {
    vec![ScalarizationKind::Linear]
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_reference_budget() -> usize {
    10
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn default_for(experiment: ExperimentId) -> Self {
        let mut cfg = Self {
            experiment,
            seed_base: 0,
            seeds: default_seeds(),
            labeled: Vec::new(),
            unlabeled: Vec::new(),
            task_sizes: Vec::new(),
            weights: WeightSpec::Grid(5),
            scalarizations: default_kinds(),
            methods: default_methods(),
            tolerances: Tolerances::default(),
            reference_budget: default_reference_budget(),
            execution: Execution::default(),
            workers: None,
            zero_one_labels: false,
            reuse_labeled: false,
            out_dir: None,
            lipschitz: LipschitzSetup::default(),
            lipschitz_classes: LipschitzClasses::default(),
            logistic_hard: LogisticHardSetup::default(),
            logistic_easy: LogisticEasySetup::default(),
            logistic_classes: None,
            coin: CoinSetup::default(),
            l2_linear: L2LinearSetup::default(),
            finite_binary: FiniteBinarySetup::default(),
        };
        match experiment {
            ExperimentId::LipschitzRegression => {
                cfg.labeled = (5..=11).map(|e| 1 << e).collect();
                cfg.unlabeled = vec![1 << 12];
                cfg.weights = WeightSpec::List(vec![vec![0.5, 0.5]]);
            }
            ExperimentId::LogisticHard => {
                cfg.labeled = vec![25];
                cfg.unlabeled = vec![300];
            }
            ExperimentId::LogisticEasy => {
                cfg.labeled = vec![24];
                cfg.unlabeled = vec![400];
            }
            ExperimentId::CoinInconsistency => {
                cfg.labeled = vec![10_000];
                cfg.unlabeled = vec![1];
                cfg.seeds = 20;
                cfg.weights = WeightSpec::List(vec![vec![0.25, 0.75]]);
            }
            ExperimentId::L2LinearRegression => {
                cfg.labeled = vec![64, 256, 1024];
                cfg.unlabeled = vec![1024];
            }
            ExperimentId::ZeroOneRegression => {
                cfg.labeled = vec![32, 128, 512];
                cfg.unlabeled = vec![1024];
            }
        }
        cfg
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| MolError::Config(e.to_string()))
    }

    pub fn num_tasks(&self) -> usize {
        2
    }

    pub fn logistic_classes(&self) -> LogisticClasses {
        self.logistic_classes.unwrap_or(match self.experiment {
            ExperimentId::LogisticEasy => LogisticClasses { degree_h: 1, degree_g: 3, radius_h: 20.0, radius_g: 20.0 },
            _ => LogisticClasses { degree_h: 1, degree_g: 5, radius_h: 20.0, radius_g: 20.0 },
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(MolError::Config("seed count must be at least 1".into()));
        }
        if self.size_grid().is_empty() {
            return Err(MolError::Config("empty sample-size grid".into()));
        }
        if self.scalarizations.is_empty() || self.methods.is_empty() {
            return Err(MolError::Config("need at least one scalarization and one method".into()));
        }
        if self.workers == Some(0) {
            return Err(MolError::Config("worker count must be positive".into()));
        }
        self.weight_vectors()?;
        for s in self.size_grid() {
            if s.n.len() != self.num_tasks() || s.big_n.len() != self.num_tasks() {
                return Err(MolError::Config("per-task sizes must list every task".into()));
            }
        }
        Ok(())
    }

    /// Product of the labeled and unlabeled grids followed by explicit sizes.
    pub fn size_grid(&self) -> Vec<TaskSizes> {
        let k = self.num_tasks();
        let mut out = Vec::new();
        for &n in &self.labeled {
            for &m in &self.unlabeled {
                out.push(TaskSizes { n: vec![n; k], big_n: vec![m; k] });
            }
        }
        out.extend(self.task_sizes.iter().cloned());
        out
    }

    pub fn weight_vectors(&self) -> Result<Vec<WeightVector>> {
        let w = match &self.weights {
            WeightSpec::Grid(0) => return Err(MolError::Config("empty weight grid".into())),
            WeightSpec::Grid(m) => weight_grid(self.num_tasks(), *m)?,
            WeightSpec::List(l) => l.iter().map(|v| WeightVector::new(v.clone())).collect::<Result<_>>()?,
        };
        if w.is_empty() {
            return Err(MolError::Config("empty weight grid".into()));
        }
        if w.iter().any(|v| v.len() != self.num_tasks()) {
            return Err(MolError::Config("weight vectors need one entry per task".into()));
        }
        Ok(w)
    }

    pub fn scalarization_list(&self) -> Result<Vec<Scalarization>> {
        let w = self.weight_vectors()?;
        Ok(self.scalarizations.iter().flat_map(|k| w.iter().map(move |v| Scalarization::new(*k, v.clone()))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml() {
        let cfg =
            ExperimentConfig::from_toml_str("experiment = \"coin_inconsistency\"\nlabeled = [100]\nunlabeled = [1]\nweights = [[0.25, 0.75]]\n")
                .unwrap();
        assert_eq!(cfg.seeds, 10);
        assert_eq!(cfg.scalarization_list().unwrap().len(), 1);
    }

    #[test]
    fn empty_weight_grid_is_rejected() {
        let mut cfg = ExperimentConfig::default_for(ExperimentId::LogisticHard);
        cfg.weights = WeightSpec::List(vec![]);
        assert!(matches!(cfg.validate(), Err(MolError::Config(_))));
        cfg.weights = WeightSpec::Grid(0);
        assert!(matches!(cfg.validate(), Err(MolError::Config(_))));
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        for id in ExperimentId::ALL {
            let cfg = ExperimentConfig::default_for(id);
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(cfg, back);
        }
    }
}
