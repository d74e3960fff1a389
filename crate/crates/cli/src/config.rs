//! Run configuration loaded from TOML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vmscale::autoscaler::{AutoscaleOptions, VmCatalog};
use vmscale::orchestrator::{ForecastConfig, ScenarioKind, SimConfig};
use vmscale::placement::{fleet, Engine, GaConfig, ServerSpec};
use vmscale::traces::SynthSpec;
use vmscale::training::TadeConfig;
use vmscale::{Error, Resources, Result};

#[cfg(test)]
pub const DEFAULT_TOML: &str = include_str!("../config/default.toml");

pub const PWS_RANGE: (u32, u32) = (1, 1440);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Aggregation and forecast interval in minutes.
    pub pws: u32,
    pub scenarios: Vec<ScenarioKind>,
    pub engine: Engine,
    pub paths: Paths,
    pub synth: SynthSpec,
    pub simulation: Simulation,
    pub predictor: PredictorSection,
    pub training: TadeConfig,
    pub autoscale: AutoscaleOptions,
    pub ga: GaConfig,
    pub report: ReportSection,
    pub servers: Vec<ServerGroup>,
    pub catalog: VmCatalog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub trace: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    pub warmup: usize,
    pub intervals: Option<usize>,
    /// Absolute capacity a trace value of 1.0 stands for.
    pub reference: Resources,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorSection {
    pub inputs: usize,
    pub hidden: usize,
    pub alpha: f64,
    pub retrain_generations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub pws_set: Vec<u32>,
}

/// `count` identical servers of one hardware profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerGroup {
    pub kind: String,
    pub pe: u32,
    pub mips_per_pe: f64,
    pub ram_gb: f64,
    pub storage_gb: f64,
    pub pw_max: f64,
    pub pw_min: f64,
    pub pw_idle: f64,
    pub count: usize,
}

impl ServerGroup {
    fn of(spec: ServerSpec, count: usize) -> Self {
        ServerGroup {
            kind: spec.kind,
            pe: spec.pe,
            mips_per_pe: spec.mips_per_pe,
            ram_gb: spec.ram_gb,
            storage_gb: spec.storage_gb,
            pw_max: spec.pw_max,
            pw_min: spec.pw_min,
            pw_idle: spec.pw_idle,
            count,
        }
    }

    fn spec(&self) -> ServerSpec {
        ServerSpec {
            id: self.kind.clone(),
            kind: self.kind.clone(),
            pe: self.pe,
            mips_per_pe: self.mips_per_pe,
            ram_gb: self.ram_gb,
            storage_gb: self.storage_gb,
            pw_max: self.pw_max,
            pw_min: self.pw_min,
            pw_idle: self.pw_idle,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            pws: 5,
            scenarios: ScenarioKind::ALL.to_vec(),
            engine: Engine::Ga,
            paths: Paths::default(),
            synth: SynthSpec::default(),
            simulation: Simulation::default(),
            predictor: PredictorSection::default(),
            training: TadeConfig::default(),
            autoscale: AutoscaleOptions::default(),
            ga: GaConfig::default(),
            report: ReportSection::default(),
            servers: vec![
                ServerGroup::of(ServerSpec::s1(), 5),
                ServerGroup::of(ServerSpec::s2(), 5),
                ServerGroup::of(ServerSpec::s3(), 40),
            ],
            catalog: VmCatalog::default(),
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        Paths { trace: None, out: PathBuf::from("out") }
    }
}

impl Default for Simulation {
    fn default() -> Self {
        let s = SimConfig::default();
        Simulation { warmup: s.warmup, intervals: s.intervals, reference: s.reference }
    }
}

impl Default for PredictorSection {
    fn default() -> Self {
        let f = ForecastConfig::default();
        PredictorSection { inputs: f.inputs, hidden: f.hidden, alpha: f.alpha, retrain_generations: f.retrain_generations }
    }
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection { pws_set: vec![10, 20, 30, 60] }
    }
}

fn field(section: &str, e: Error) -> Error {
    match e {
        Error::Config { field, msg } if !field.contains('.') => Error::Config { field: format!("{section}.{field}"), msg },
        other => other,
    }
}

fn check_pws(name: &str, pws: u32) -> Result<()> {
    if !(PWS_RANGE.0..=PWS_RANGE.1).contains(&pws) {
        return Err(Error::Config {
            field: name.into(),
            msg: format!("must lie in [{}, {}] minutes, got {pws}", PWS_RANGE.0, PWS_RANGE.1),
        });
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            field: e.span().map_or_else(|| "config".into(), |s| format!("config at byte {}", s.start)),
            msg: e.message().to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { field: "--config".into(), msg: format!("cannot read {}: {e}", path.display()) })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        check_pws("pws", self.pws)?;
        if self.scenarios.is_empty() {
            return Err(Error::Config { field: "scenarios".into(), msg: "list at least one of OA, PA, PWA, WPWA".into() });
        }
        if self.scenarios.iter().collect::<BTreeSet<_>>().len() != self.scenarios.len() {
            return Err(Error::Config { field: "scenarios".into(), msg: "entries must be distinct".into() });
        }
        if self.report.pws_set.is_empty() {
            return Err(Error::Config { field: "report.pws_set".into(), msg: "list at least one window size".into() });
        }
        for &p in &self.report.pws_set {
            check_pws("report.pws_set", p)?;
        }
        self.synth.validate().map_err(|e| field("synth", e))?;
        self.training.validate().map_err(|e| field("training", e))?;
        if self.servers.is_empty() || self.servers.iter().all(|g| g.count == 0) {
            return Err(Error::Config { field: "servers".into(), msg: "the fleet needs at least one server".into() });
        }
        for s in self.fleet() {
            s.validate()?;
        }
        self.catalog.validate().map_err(|e| field("catalog", e))?;
        self.sim_config().validate()
    }

    pub fn fleet(&self) -> Vec<ServerSpec> {
        let groups: Vec<(ServerSpec, usize)> = self.servers.iter().map(|g| (g.spec(), g.count)).collect();
        fleet(&groups)
    }

    pub fn forecast_config(&self) -> ForecastConfig {
        ForecastConfig {
            inputs: self.predictor.inputs,
            hidden: self.predictor.hidden,
            alpha: self.predictor.alpha,
            tade: TadeConfig { seed: self.seed, ..self.training.clone() },
            retrain_generations: self.predictor.retrain_generations,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            warmup: self.simulation.warmup,
            intervals: self.simulation.intervals,
            reference: self.simulation.reference,
            forecast: self.forecast_config(),
            autoscale: self.autoscale,
            ga: GaConfig { seed: self.seed, ..self.ga.clone() },
        }
    }

    /// Trace path, checked to exist.
    pub fn trace_path(&self) -> Result<&Path> {
        let path = self
            .paths
            .trace
            .as_deref()
            .ok_or_else(|| Error::Config { field: "paths.trace".into(), msg: "no trace given; set paths.trace or pass --trace".into() })?;
        if !path.is_file() {
            return Err(Error::Config { field: "paths.trace".into(), msg: format!("file not found: {}", path.display()) });
        }
        Ok(path)
    }
}
