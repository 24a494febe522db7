use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::dynamics::{
    refrigerator_report, Diagnostics, Method, Propagator, RefrigeratorReport, Tolerances, Trajectory,
};
use crate::error::{Error, Result};
use crate::thermal::product_ensemble_with;

/// Command-line style overrides applied on top of a scenario.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub method: Option<Method>,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl RunOptions {
    /// Runs `f` on a pool with the requested thread count.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(f()),
            Some(0) => Err(Error::InvalidArgument("threads must be >= 1".into())),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Everything recorded next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scenario: Scenario,
    pub scenario_hash: String,
    pub version: String,
    pub dims: Vec<usize>,
    pub total_dim: usize,
    pub method: String,
    pub sectors: usize,
    pub largest_sector: usize,
    pub members: usize,
    pub epsilon_tail: f64,
    pub discarded_mass: f64,
    pub tolerances: Tolerances,
    pub couplings: Vec<CouplingRecord>,
    pub diagnostics: Diagnostics,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RefrigeratorReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRecord {
    pub n: String,
    pub m: String,
    pub g: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub report: Option<RefrigeratorReport>,
    pub metadata: RunMetadata,
}

/// Model, ensemble, evolution and refrigerator report for one scenario.
pub fn run(scenario: &Scenario, options: &RunOptions) -> Result<RunOutput> {
    options.install(|| run_inner(scenario, options)).and_then(|r| r)
}

fn run_inner(scenario: &Scenario, options: &RunOptions) -> Result<RunOutput> {
    let wrap = |e: Error| Error::Scenario {
        name: scenario.name.clone(),
        source: Box::new(e),
    };
    let start = Instant::now();
    scenario.validate().map_err(wrap)?;
    let model = scenario.build_model().map_err(wrap)?;
    let engine = &scenario.engine;
    let method = options.method.unwrap_or(engine.method);
    let propagator = Propagator::new(&model, method, engine.tolerances).map_err(wrap)?;
    let ensemble = product_ensemble_with(&scenario.modes, engine.epsilon_tail, engine.member_cap).map_err(wrap)?;
    info!(
        "{}: dims {:?}, {} sectors (largest {}), {} members, method {}",
        scenario.name,
        model.layout().dims(),
        propagator.sectors().len(),
        propagator.sectors().largest(),
        ensemble.len(),
        propagator.method()
    );
    let times = scenario.times.times();
    let mut trajectory = propagator.ensemble_trajectory(&ensemble, &times).map_err(wrap)?;
    let hash = scenario.hash();
    trajectory.meta.scenario_hash = Some(hash.clone());
    let report = scenario
        .roles()
        .map(|roles| refrigerator_report(&trajectory, &scenario.modes, &roles))
        .transpose()
        .map_err(wrap)?;
    if let Some(note) = report.as_ref().and_then(|r| r.regime_note.as_ref()) {
        log::warn!("{}: {note}", scenario.name);
    }
    let label = |i: usize| scenario.modes[i].label.clone();
    let metadata = RunMetadata {
        scenario: scenario.clone(),
        scenario_hash: hash,
        version: env!("CARGO_PKG_VERSION").to_string(),
        dims: model.layout().dims().to_vec(),
        total_dim: model.layout().total_dim(),
        method: propagator.method().to_string(),
        sectors: propagator.sectors().len(),
        largest_sector: propagator.sectors().largest(),
        members: ensemble.len(),
        epsilon_tail: ensemble.epsilon_tail(),
        discarded_mass: ensemble.discarded_mass(),
        tolerances: engine.tolerances,
        couplings: model
            .terms()
            .iter()
            .map(|t| CouplingRecord { n: label(t.n), m: label(t.m), g: t.strength })
            .collect(),
        diagnostics: trajectory.diagnostics(),
        wall_time_s: start.elapsed().as_secs_f64(),
        report: report.clone(),
    };
    Ok(RunOutput {
        trajectory,
        report,
        metadata,
    })
}

/// Paths written by [`run_to_dir`].
#[derive(Debug, Clone)]
pub struct WrittenFiles {
    pub trajectory_csv: PathBuf,
    pub metadata_json: PathBuf,
    pub report_json: Option<PathBuf>,
}

impl RunOutput {
    pub fn write(&self, out_dir: &Path) -> Result<WrittenFiles> {
        fs::create_dir_all(out_dir)?;
        let outputs = &self.metadata.scenario.outputs;
        let csv = out_dir.join(&outputs.trajectory_csv);
        self.trajectory.write_csv(std::io::BufWriter::new(fs::File::create(&csv)?))?;
        let meta = out_dir.join(&outputs.metadata_json);
        fs::write(&meta, serde_json::to_string_pretty(&self.metadata)?)?;
        let report = match &self.report {
            Some(r) => {
                let p = out_dir.join(&outputs.report_json);
                fs::write(&p, serde_json::to_string_pretty(r)?)?;
                Some(p)
            }
            None => None,
        };
        Ok(WrittenFiles {
            trajectory_csv: csv,
            metadata_json: meta,
            report_json: report,
        })
    }
}

pub fn run_to_dir(scenario: &Scenario, out_dir: &Path, options: &RunOptions) -> Result<(RunOutput, WrittenFiles)> {
    let out = run(scenario, options)?;
    let files = out.write(out_dir)?;
    Ok((out, files))
}
