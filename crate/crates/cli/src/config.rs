//! JSON experiment configuration. Every key is optional; missing keys take
//! the baseline defaults and unknown keys are rejected.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use microhub::ca_model::{DesignChoice, MarketScenario, VarianceParams};
use microhub::calibration::GridSpec;
use microhub::geometry::DistanceMetric;
use microhub::optimizer::DesignSearchSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 20240601;

/// Where the tour-variance constants come from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ParamsSource {
    #[default]
    Recalibrated,
    PaperReference,
    /// A JSON file holding the constants, or a `fit.json` written by `calibrate`.
    File(PathBuf),
}

impl fmt::Display for ParamsSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamsSource::Recalibrated => f.write_str("recalibrated"),
            ParamsSource::PaperReference => f.write_str("paper-reference"),
            ParamsSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl From<&str> for ParamsSource {
    fn from(s: &str) -> Self {
        match s {
            "recalibrated" => ParamsSource::Recalibrated,
            "paper-reference" => ParamsSource::PaperReference,
            path => ParamsSource::File(PathBuf::from(path)),
        }
    }
}

impl TryFrom<String> for ParamsSource {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s.is_empty() {
            return Err("params must be recalibrated, paper-reference or a file path".into());
        }
        Ok(ParamsSource::from(s.as_str()))
    }
}

impl From<ParamsSource> for String {
    fn from(p: ParamsSource) -> Self {
        p.to_string()
    }
}

impl ParamsSource {
    /// Provenance label written into outputs.
    pub fn provenance(&self) -> String {
        match self {
            ParamsSource::File(p) => format!("file:{}", p.display()),
            other => other.to_string(),
        }
    }

    pub fn load(&self) -> CliResult<VarianceParams> {
        let params = match self {
            ParamsSource::Recalibrated => VarianceParams::recalibrated(),
            ParamsSource::PaperReference => VarianceParams::paper_reference(),
            ParamsSource::File(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("reading params file {}: {e}", path.display())))?;
                let value: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
                let inner = value.get("params").cloned().unwrap_or(value);
                serde_json::from_value(inner)
                    .map_err(|e| CliError::Config(format!("params file {}: {e}", path.display())))?
            }
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub lambda_per_hr_mi2: f64,
    pub area_mi2: f64,
    pub fleet_size: u32,
    pub speed_mph: f64,
    pub cost_usd_per_mi: f64,
    pub value_of_time_usd_per_hr: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let b = MarketScenario::baseline();
        Self {
            lambda_per_hr_mi2: b.lambda,
            area_mi2: b.area,
            fleet_size: b.fleet,
            speed_mph: b.speed,
            cost_usd_per_mi: b.cost_per_mile,
            value_of_time_usd_per_hr: b.value_of_time,
        }
    }
}

impl ScenarioConfig {
    pub fn to_scenario(&self) -> MarketScenario {
        MarketScenario {
            lambda: self.lambda_per_hr_mi2,
            area: self.area_mi2,
            fleet: self.fleet_size,
            speed: self.speed_mph,
            cost_per_mile: self.cost_usd_per_mi,
            value_of_time: self.value_of_time_usd_per_hr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub zones: usize,
    pub batch_size: usize,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self { zones: 4, batch_size: 10 }
    }
}

impl DesignConfig {
    pub fn to_design(&self) -> DesignChoice {
        DesignChoice::new(self.zones, self.batch_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub horizon_hr: f64,
    pub warmup_hr: f64,
    /// Simulated time allowed past the horizon to deliver the measured orders.
    pub drain_hr: f64,
    /// Seed-derived runs; 0 skips simulation in sweeps.
    pub replications: usize,
    /// Write trace.csv for the first replication.
    pub trace: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            horizon_hr: 6.0,
            warmup_hr: 1.0,
            drain_hr: 6.0,
            replications: 20,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub areas_mi2: Vec<f64>,
    pub node_counts: Vec<usize>,
    pub replications: usize,
    pub speed_mph: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            areas_mi2: g.areas,
            node_counts: g.node_counts,
            replications: g.replications,
            speed_mph: g.speed,
        }
    }
}

impl CalibrationConfig {
    pub fn to_grid(&self) -> GridSpec {
        GridSpec {
            areas: self.areas_mi2.clone(),
            node_counts: self.node_counts.clone(),
            replications: self.replications,
            speed: self.speed_mph,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub max_zones: usize,
    pub max_batch: usize,
    pub rho_cap: f64,
    /// Only admit zone counts that divide the fleet.
    pub require_divisible: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_zones: 36,
            max_batch: 50,
            rho_cap: 0.95,
            require_divisible: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    #[default]
    Lambda,
    #[serde(rename = "m")]
    Fleet,
    #[serde(rename = "A")]
    Area,
    #[serde(rename = "n")]
    Batch,
    #[serde(rename = "K")]
    Zones,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::Fleet => "m",
            SweepAxis::Area => "A",
            SweepAxis::Batch => "n",
            SweepAxis::Zones => "K",
        }
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, SweepAxis::Fleet | SweepAxis::Batch | SweepAxis::Zones)
    }

    /// (from, to, steps) used when the config leaves them out.
    pub fn default_range(&self) -> (f64, f64, usize) {
        match self {
            SweepAxis::Lambda => (0.1, 4.3, 22),
            SweepAxis::Fleet => (10.0, 100.0, 10),
            SweepAxis::Area => (25.0, 400.0, 16),
            SweepAxis::Batch => (1.0, 30.0, 30),
            SweepAxis::Zones => (1.0, 16.0, 16),
        }
    }

    /// Fleet and demand sweeps re-solve the design at every point by default.
    pub fn optimizes_by_default(&self) -> bool {
        matches!(self, SweepAxis::Lambda | SweepAxis::Fleet)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub steps: Option<usize>,
    pub optimize_design: Option<bool>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Lambda,
            from: None,
            to: None,
            steps: None,
            optimize_design: None,
        }
    }
}

impl SweepConfig {
    /// Fill unset range and optimisation fields from the axis defaults.
    pub fn resolved(&self) -> SweepConfig {
        let (from, to, steps) = self.axis.default_range();
        SweepConfig {
            axis: self.axis,
            from: Some(self.from.unwrap_or(from)),
            to: Some(self.to.unwrap_or(to)),
            steps: Some(self.steps.unwrap_or(steps)),
            optimize_design: Some(self.optimize_design.unwrap_or(self.axis.optimizes_by_default())),
        }
    }

    /// Evenly spaced values, rounded on integer axes.
    pub fn values(&self) -> Vec<f64> {
        let r = self.resolved();
        let (from, to, steps) = (r.from.unwrap(), r.to.unwrap(), r.steps.unwrap());
        (0..steps)
            .map(|i| {
                let v = if steps == 1 {
                    from
                } else {
                    from + (to - from) * i as f64 / (steps - 1) as f64
                };
                if self.axis.is_integer() {
                    v.round()
                } else {
                    v
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub metric: DistanceMetric,
    pub params: ParamsSource,
    pub scenario: ScenarioConfig,
    pub design: DesignConfig,
    pub simulation: SimulationConfig,
    pub calibration: CalibrationConfig,
    pub search: SearchConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: DEFAULT_SEED,
            metric: DistanceMetric::default(),
            params: ParamsSource::default(),
            scenario: ScenarioConfig::default(),
            design: DesignConfig::default(),
            simulation: SimulationConfig::default(),
            calibration: CalibrationConfig::default(),
            search: SearchConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "{origin}: unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Io(format!("reading config {}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn scenario(&self) -> MarketScenario {
        self.scenario.to_scenario()
    }

    pub fn search_spec(&self, scenario: MarketScenario, params: VarianceParams) -> DesignSearchSpec {
        DesignSearchSpec {
            scenario,
            params,
            max_zones: self.search.max_zones,
            max_batch: self.search.max_batch,
            rho_cap: self.search.rho_cap,
            require_divisible: self.search.require_divisible,
        }
    }

    /// Checks shared by every command.
    pub fn validate(&self) -> CliResult<()> {
        self.scenario().validate()?;
        self.design.to_design().validate()?;
        let s = &self.simulation;
        if !(s.horizon_hr.is_finite() && s.horizon_hr > 0.0) {
            return Err(CliError::Config(format!("simulation.horizon_hr must be positive, got {}", s.horizon_hr)));
        }
        if !(s.warmup_hr >= 0.0 && s.warmup_hr < s.horizon_hr) {
            return Err(CliError::Config(format!(
                "simulation.warmup_hr must lie in [0, horizon_hr), got warmup {} with horizon {}",
                s.warmup_hr, s.horizon_hr
            )));
        }
        if !(s.drain_hr.is_finite() && s.drain_hr >= 0.0) {
            return Err(CliError::Config(format!("simulation.drain_hr must be nonnegative, got {}", s.drain_hr)));
        }
        let q = &self.search;
        if q.max_zones < 1 || q.max_batch < 1 {
            return Err(CliError::Config("search.max_zones and search.max_batch must be at least 1".into()));
        }
        if !(q.rho_cap > 0.0 && q.rho_cap < 1.0) {
            return Err(CliError::Config(format!("search.rho_cap must lie in (0, 1), got {}", q.rho_cap)));
        }
        self.validate_sweep()
    }

    fn validate_sweep(&self) -> CliResult<()> {
        let r = self.sweep.resolved();
        let (from, to, steps) = (r.from.unwrap(), r.to.unwrap(), r.steps.unwrap());
        if steps < 1 {
            return Err(CliError::Config("sweep.steps must be at least 1".into()));
        }
        if !(from.is_finite() && to.is_finite()) {
            return Err(CliError::Config("sweep.from and sweep.to must be finite".into()));
        }
        let floor = if self.sweep.axis.is_integer() { 1.0 } else { f64::MIN_POSITIVE };
        if self.sweep.values().iter().any(|v| *v < floor) {
            return Err(CliError::Config(format!(
                "sweep over {} must stay positive (integer axes at least 1), got {from}..{to}",
                self.sweep.axis.name()
            )));
        }
        Ok(())
    }
}
