//! Experiment configuration, read from TOML and echoed into every report.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{Grid, KernelKind, Strategy};
use crate::datasets::{generate_synthetic, load_dataset, Dataset, DatasetFormat, Fractions, SyntheticSpec};
use crate::error::{Error, Result, ResultExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Technique {
    #[serde(rename = "DS1")]
    Ds1,
    #[serde(rename = "DS2")]
    Ds2,
    #[serde(rename = "hybrid")]
    Hybrid,
    #[serde(rename = "hybrid-RS")]
    HybridRs,
    #[serde(rename = "OPF")]
    Opf,
    #[serde(rename = "OVA")]
    Ova,
    #[serde(rename = "OVO")]
    Ovo,
}

impl Technique {
    pub const ALL: [Technique; 7] = [
        Technique::Ds1,
        Technique::Ds2,
        Technique::Hybrid,
        Technique::HybridRs,
        Technique::Opf,
        Technique::Ova,
        Technique::Ovo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::Ds1 => "DS1",
            Technique::Ds2 => "DS2",
            Technique::Hybrid => "hybrid",
            Technique::HybridRs => "hybrid-RS",
            Technique::Opf => "OPF",
            Technique::Ova => "OVA",
            Technique::Ovo => "OVO",
        }
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, Technique::Hybrid | Technique::HybridRs)
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Technique::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown technique '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Synthetic preset (`lar2`, `egg9`, `pro7`) or `custom` with `counts`.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub counts: Option<Vec<usize>>,
    #[serde(default)]
    pub separation: Option<f64>,
    #[serde(default)]
    pub ds1_noise: Option<f64>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub impurity_spread: Option<f64>,
    /// Generation seed; the dataset is fixed across repetitions.
    #[serde(default)]
    pub seed: u64,
    /// File-backed dataset instead of a synthetic one.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<DatasetFormat>,
}

fn one() -> f64 {
    1.0
}

impl DatasetConfig {
    pub fn synthetic_spec(&self) -> Result<Option<SyntheticSpec>> {
        let Some(preset) = &self.preset else {
            return Ok(None);
        };
        let mut spec = if preset.eq_ignore_ascii_case("custom") {
            SyntheticSpec {
                name: "custom".into(),
                counts: Vec::new(),
                dim: 8,
                separation: 5.0,
                ds1_noise: 1.5,
                impurity_spread: 1.0,
            }
        } else {
            SyntheticSpec::by_name(preset, self.scale)
                .ok_or_else(|| Error::Validation(format!("unknown synthetic preset '{preset}'")))?
        };
        if let Some(c) = &self.counts {
            spec.counts = c.clone();
        }
        if let Some(v) = self.separation {
            spec.separation = v;
        }
        if let Some(v) = self.ds1_noise {
            spec.ds1_noise = v;
        }
        if let Some(v) = self.dim {
            spec.dim = v;
        }
        if let Some(v) = self.impurity_spread {
            spec.impurity_spread = v;
        }
        Ok(Some(spec))
    }

    /// Relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        if let Some(spec) = self.synthetic_spec()? {
            return generate_synthetic(&spec, self.seed);
        }
        let path = self
            .path
            .as_ref()
            .ok_or_else(|| Error::Validation("dataset needs either `preset` or `path`".into()))?;
        let path = if path.is_absolute() { path.clone() } else { base.join(path) };
        load_dataset(&path, self.format.unwrap_or(DatasetFormat::Tabular))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ds1Config {
    #[serde(default = "probabilistic")]
    pub strategy: Strategy,
    #[serde(default = "rbf")]
    pub kernel: KernelKind,
    #[serde(default)]
    pub grid: Grid,
    /// Raw columns DS1 uses; defaults to the degraded view of synthetic data.
    #[serde(default)]
    pub columns: Option<Range<usize>>,
    /// Learn feature weights with MSPS on Z1.
    #[serde(default)]
    pub msps: bool,
    #[serde(default = "msps_iters")]
    pub msps_iters: usize,
}

fn probabilistic() -> Strategy {
    Strategy::Probabilistic
}

fn rbf() -> KernelKind {
    KernelKind::Rbf
}

fn msps_iters() -> usize {
    5
}

impl Default for Ds1Config {
    fn default() -> Self {
        Ds1Config {
            strategy: Strategy::Probabilistic,
            kernel: KernelKind::Rbf,
            grid: Grid::default(),
            columns: None,
            msps: false,
            msps_iters: msps_iters(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ds2Config {
    #[serde(default = "rbf")]
    pub kernel: KernelKind,
    #[serde(default)]
    pub grid: Grid,
    /// Raw columns DS2 uses; defaults to the clean view of synthetic data.
    #[serde(default)]
    pub columns: Option<Range<usize>>,
    /// Per-sample delay as a multiple of DS1's measured mean time.
    #[serde(default = "default_ratio")]
    pub delay_ratio: Option<f64>,
    /// Fixed per-sample delay; takes precedence over `delay_ratio`.
    #[serde(default)]
    pub delay_ms: Option<f64>,
    /// Program and arguments of an external protocol server. When set, the
    /// built-in reference DS2 is not trained.
    #[serde(default)]
    pub command: Option<Vec<String>>,
}

impl Default for Ds2Config {
    fn default() -> Self {
        Ds2Config {
            kernel: KernelKind::Rbf,
            grid: Grid::default(),
            columns: None,
            delay_ratio: default_ratio(),
            delay_ms: None,
            command: None,
        }
    }
}

fn default_ratio() -> Option<f64> {
    Some(30.0)
}

fn default_techniques() -> Vec<Technique> {
    vec![Technique::Ds1, Technique::Ds2, Technique::Hybrid, Technique::HybridRs]
}

fn default_bins() -> usize {
    20
}

fn default_budget() -> f64 {
    0.10
}

fn default_reps() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub dataset: DatasetConfig,
    #[serde(default = "default_techniques")]
    pub techniques: Vec<Technique>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// M as a fraction of |Z3|.
    #[serde(default = "default_budget")]
    pub budget_fraction: f64,
    #[serde(default)]
    pub smoothing: bool,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub fractions: Fractions,
    #[serde(default)]
    pub balance_training: bool,
    #[serde(default)]
    pub ds1: Ds1Config,
    #[serde(default)]
    pub ds2: Ds2Config,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Validation(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?).context_with(|| path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# unserializable config: {e}"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.techniques.is_empty() {
            return Err(Error::Validation("no techniques requested".into()));
        }
        if self.bins < 2 {
            return Err(Error::Validation(format!("bins must be >= 2, got {}", self.bins)));
        }
        if !(0.0..=1.0).contains(&self.budget_fraction) {
            return Err(Error::Validation(format!(
                "budget_fraction must be in [0, 1], got {}",
                self.budget_fraction
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::Validation("repetitions must be >= 1".into()));
        }
        Ok(())
    }
}
