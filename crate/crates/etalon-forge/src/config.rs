//! Declarative run configuration: one TOML document with sections for the
//! etalon stack, spectral grid, target construction, identification,
//! synthesis, and output. Unknown keys are rejected.

use serde::Deserialize;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{EtalonConfig, Reflector};
use crate::spectral::{self, SpectralGrid};
use crate::synth::{AxisRange, RankingKey, SearchSpec};

/// Top-level configuration document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub etalon: EtalonSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub sysid: SysidSection,
    pub synth: Option<SynthSection>,
    #[serde(default)]
    pub output: OutputSection,
    pub verify: Option<VerifySection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtalonSection {
    /// Power reflectivities of the stack, input side first.
    pub reflectivities: Vec<f64>,
    /// Integer one-way cavity optical paths in unit-length quanta.
    pub x: Option<Vec<u64>>,
    #[serde(default = "default_unit_length_cm")]
    pub unit_length_cm: f64,
    #[serde(default = "default_lambda0_nm")]
    pub lambda0_nm: f64,
    #[serde(default = "default_group_index")]
    pub group_index: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub span_pm: f64,
    pub count: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { span_pm: 33.6, count: 4096 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSection {
    pub factor: u32,
    pub mask_floor_db: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self { factor: 15, mask_floor_db: -40.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SysidSection {
    pub orders: Vec<usize>,
    pub max_iterations: usize,
    pub pole_tolerance: f64,
    pub enforce_conjugate: bool,
}

impl Default for SysidSection {
    fn default() -> Self {
        Self {
            orders: vec![25, 50, 100, 200, 400, 600],
            max_iterations: 30,
            pole_tolerance: 1e-6,
            enforce_conjugate: false,
        }
    }
}

impl SysidSection {
    pub fn fit_options(&self) -> crate::sysid::FitOptions {
        crate::sysid::FitOptions {
            max_iterations: self.max_iterations,
            pole_tolerance: self.pole_tolerance,
            enforce_conjugate: self.enforce_conjugate,
            ..crate::sysid::FitOptions::default()
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    #[serde(default = "default_pr_goal_db")]
    pub pr_goal_db: f64,
    /// Spare reflectivities consumed one per escalation.
    #[serde(default)]
    pub inventory: Vec<f64>,
    /// "mse" (default) or "pr".
    #[serde(default = "default_ranking")]
    pub ranking: String,
    /// Rational-model order for the estimate the scan is scored against;
    /// 0 scores directly against the desired profile.
    #[serde(default)]
    pub estimate_order: usize,
    /// PR measurement window width; defaults to the full target window.
    pub pr_window_pm: Option<f64>,
    /// One scan stage per cavity count, in escalation order.
    #[serde(rename = "stage")]
    pub stages: Vec<StageSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    /// Per-axis [min, max, step] in unit-length quanta.
    pub ranges: Vec<[u64; 3]>,
    /// Tie classes over the axes; empty means all axes independent.
    #[serde(default)]
    pub ties: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub plot: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), plot: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Design lengths to verify; alternatively read from `design_csv`.
    pub x: Option<Vec<u64>>,
    /// Reflectivities of the design stack; defaults to the etalon section
    /// when the cavity counts agree.
    pub reflectivities: Option<Vec<f64>>,
    /// Ranked-candidates CSV whose top row supplies the design lengths.
    pub design_csv: Option<String>,
}

fn default_unit_length_cm() -> f64 {
    1.0
}

fn default_lambda0_nm() -> f64 {
    1550.0
}

fn default_group_index() -> f64 {
    1.45
}

fn default_pr_goal_db() -> f64 {
    -30.0
}

fn default_ranking() -> String {
    "mse".into()
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn unit_length(&self) -> f64 {
        self.etalon.unit_length_cm * 0.01
    }

    pub fn lambda0(&self) -> f64 {
        self.etalon.lambda0_nm * 1e-9
    }

    pub fn span(&self) -> f64 {
        self.grid.span_pm * 1e-12
    }

    pub fn reflectors(&self) -> Result<Vec<Reflector>> {
        reflector_stack(&self.etalon.reflectivities)
    }

    pub fn inventory(&self) -> Result<Vec<Reflector>> {
        match &self.synth {
            Some(s) => reflector_stack(&s.inventory),
            None => Ok(Vec::new()),
        }
    }

    /// The explicit base etalon; requires `etalon.x`.
    pub fn base_config(&self) -> Result<EtalonConfig> {
        let x = self
            .etalon
            .x
            .clone()
            .ok_or_else(|| Error::Config("etalon.x is required for this command".into()))?;
        EtalonConfig::new(
            self.reflectors()?,
            x,
            self.unit_length(),
            self.lambda0(),
            self.etalon.group_index,
        )
        .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn make_grid(&self) -> Result<SpectralGrid> {
        spectral::make_grid(self.lambda0(), self.span(), self.grid.count)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn ranking_key(&self) -> Result<RankingKey> {
        let name = self
            .synth
            .as_ref()
            .map(|s| s.ranking.as_str())
            .unwrap_or("mse");
        match name {
            "mse" => Ok(RankingKey::MseFirst),
            "pr" => Ok(RankingKey::PrFirst),
            other => Err(Error::Config(format!(
                "synth.ranking must be \"mse\" or \"pr\", got \"{other}\""
            ))),
        }
    }
}

impl StageSection {
    pub fn to_spec(&self, ranking: RankingKey) -> Result<SearchSpec> {
        let ranges = self
            .ranges
            .iter()
            .map(|&[min, max, step]| AxisRange::new(min, max, step))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(SearchSpec { ranges, ties: self.ties.clone(), ranking })
    }
}

fn reflector_stack(reflectivities: &[f64]) -> Result<Vec<Reflector>> {
    reflectivities
        .iter()
        .map(|&r| Reflector::from_power_reflectivity(r).map_err(|e| Error::Config(e.to_string())))
        .collect()
}
