//! End-to-end runs: map → fit → initialize → SCO, writing every artifact to
//! an output directory, and sweeps over (M, r_min, seed) grids.

use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{save_trajectory, sweep_csv, trace_csv, write_file, SweepRow};
use crate::planner::CandidateReport;
use crate::radiomap::{build_map, RadioMap};
use crate::scenario::ScenarioConfig;
use crate::sco::{run, PlanOutcome, ScoConfig};
use crate::snrmodel::{fit_with, FitMode, FitOptions, SnrModel};

pub const SUMMARY_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;

/// Radio-map construction parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub nx: usize,
    pub ny: usize,
    pub draws_per_cell: u32,
    pub seed: u64,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self {
            nx: 100,
            ny: 60,
            draws_per_cell: 200,
            seed: 1,
        }
    }
}

/// Where the SNR model of a run comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSource {
    Build(MapSpec),
    Map(PathBuf),
    Model(PathBuf),
}

/// Serializable SCO settings (the solver keeps its defaults).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoSettings {
    pub epsilon: f64,
    pub n_it_max: usize,
    pub trust_radius: f64,
    pub grid_spacing: f64,
}

impl Default for ScoSettings {
    fn default() -> Self {
        let d = ScoConfig::default();
        Self {
            epsilon: d.epsilon,
            n_it_max: d.n_it_max,
            trust_radius: d.trust_radius,
            grid_spacing: d.grid_spacing,
        }
    }
}

impl ScoSettings {
    pub fn config(&self) -> ScoConfig {
        ScoConfig {
            epsilon: self.epsilon,
            n_it_max: self.n_it_max,
            trust_radius: self.trust_radius,
            grid_spacing: self.grid_spacing,
            ..ScoConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub label: String,
    pub found: bool,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average_rate_bits_s: Option<f64>,
    pub violations: Vec<String>,
}

impl CandidateSummary {
    fn from_report(c: &CandidateReport) -> Self {
        Self {
            label: c.label.to_string(),
            found: c.trajectory.is_some(),
            feasible: c.audit.as_ref().is_some_and(|a| a.feasible()),
            energy_j: c.audit.as_ref().map(|a| a.energy),
            average_rate_bits_s: c.audit.as_ref().map(|a| a.rate),
            violations: c
                .audit
                .as_ref()
                .map(|a| a.violations().iter().map(|s| s.to_string()).collect())
                .unwrap_or_default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    /// `built`, `map-file` or `model-file`.
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<MapSpec>,
    pub fit_mode: FitMode,
}

/// Contents of `summary.toml`: the outcome plus every input needed to rerun.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: u32,
    /// `planned`, `infeasible` or `failed`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_solution: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_energy_j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average_rate_bits_s: Option<f64>,
    pub r_min_bits_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub scenario_hash: String,
    pub map: MapSummary,
    pub sco: ScoSettings,
    #[serde(rename = "candidate")]
    pub candidates: Vec<CandidateSummary>,
    pub scenario: ScenarioConfig,
}

#[derive(Clone, Debug)]
pub struct PlanRequest {
    pub config: ScenarioConfig,
    pub source: ModelSource,
    pub fit_mode: FitMode,
    pub sco: ScoSettings,
    pub out_dir: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Builds or loads the map and model a request asks for.
pub fn prepare_model(
    config: &ScenarioConfig,
    source: &ModelSource,
    fit_mode: FitMode,
) -> Result<(Option<RadioMap>, SnrModel)> {
    let scenario = config.build()?;
    let opts = FitOptions {
        mode: fit_mode,
        ..FitOptions::default()
    };
    match source {
        ModelSource::Build(spec) => {
            let map = build_map(&scenario, spec.nx, spec.ny, spec.draws_per_cell, spec.seed)?;
            let model = fit_with(&map, &scenario, &opts)?;
            Ok((Some(map), model))
        }
        ModelSource::Map(path) => {
            let map = RadioMap::load(path)?;
            if map.scenario_hash != scenario.hash() {
                warn!(
                    "{} was built for scenario {}, not {}",
                    path.display(),
                    map.scenario_hash,
                    scenario.hash()
                );
            }
            let model = fit_with(&map, &scenario, &opts)?;
            Ok((Some(map), model))
        }
        ModelSource::Model(path) => {
            let model = SnrModel::load(path)?;
            if model.scenario_hash != scenario.hash() {
                warn!(
                    "{} was fitted for scenario {}, not {}",
                    path.display(),
                    model.scenario_hash,
                    scenario.hash()
                );
            }
            Ok((None, model))
        }
    }
}

/// Runs the full pipeline and writes `map.txt` (when built), `model.toml`,
/// `initial_me.csv`, `initial_mr.csv`, `trajectory.csv`, `trace.csv` and
/// `summary.toml` into `req.out_dir`. A prepared map/model pair may be passed
/// to skip rebuilding it.
///
/// Infeasible problems and subproblem failures are reported in the summary;
/// the summary is returned either way. Other errors abort.
pub fn plan_to_dir(req: &PlanRequest, prepared: Option<(Option<&RadioMap>, &SnrModel)>) -> Result<RunSummary> {
    let scenario = req.config.build()?;
    let cfg = req.sco.config();
    cfg.validate()?;
    create_dir(&req.out_dir)?;
    let owned;
    let (map, model) = match prepared {
        Some(p) => p,
        None => {
            owned = prepare_model(&req.config, &req.source, req.fit_mode)?;
            (owned.0.as_ref(), &owned.1)
        }
    };
    let dir = &req.out_dir;
    if let (Some(map), ModelSource::Build(_)) = (map, &req.source) {
        map.save(&dir.join("map.txt"))?;
    }
    model.save(&dir.join("model.toml"))?;

    let (kind, path, spec) = match &req.source {
        ModelSource::Build(s) => ("built", None, Some(*s)),
        ModelSource::Map(p) => ("map-file", Some(p.display().to_string()), None),
        ModelSource::Model(p) => ("model-file", Some(p.display().to_string()), None),
    };
    let mut summary = RunSummary {
        version: SUMMARY_VERSION,
        status: String::new(),
        initial_solution: None,
        final_energy_j: None,
        average_rate_bits_s: None,
        r_min_bits_s: scenario.r_min,
        iterations: None,
        max_violation: None,
        failure: None,
        scenario_hash: scenario.hash(),
        map: MapSummary {
            source: kind.to_string(),
            path,
            spec,
            fit_mode: req.fit_mode,
        },
        sco: req.sco,
        candidates: Vec::new(),
        scenario: req.config.clone(),
    };

    let write_candidates = |cands: &[CandidateReport]| -> Result<Vec<CandidateSummary>> {
        for c in cands {
            if let Some(t) = &c.trajectory {
                let name = format!("initial_{}.csv", c.label.to_string().to_lowercase());
                save_trajectory(&dir.join(name), t, &scenario, model)?;
            }
        }
        Ok(cands.iter().map(CandidateSummary::from_report).collect())
    };

    match run(&scenario, model, &cfg) {
        Ok(PlanOutcome::Planned { label, run, candidates }) => {
            summary.candidates = write_candidates(&candidates)?;
            save_trajectory(&dir.join("trajectory.csv"), &run.trajectory, &scenario, model)?;
            write_file(&dir.join("trace.csv"), &trace_csv(&run.trace))?;
            summary.status = "planned".into();
            summary.initial_solution = Some(label.to_string());
            summary.final_energy_j = Some(run.energy);
            summary.average_rate_bits_s = Some(run.audit.rate);
            summary.iterations = Some(run.trace.sco_iterations());
            summary.max_violation = Some(run.audit.max_violation());
            info!(
                "planned: {label}, {:.3} J, {} iterations",
                run.energy,
                run.trace.sco_iterations()
            );
        }
        Ok(PlanOutcome::Infeasible { candidates }) => {
            summary.candidates = write_candidates(&candidates)?;
            summary.status = "infeasible".into();
            info!("infeasible: neither initial solution satisfies the constraints");
        }
        Err(Error::Subproblem {
            iteration,
            reason,
            trace,
        }) => {
            write_file(&dir.join("trace.csv"), &trace_csv(&trace))?;
            summary.status = "failed".into();
            summary.failure = Some(format!("subproblem failed at iteration {iteration}: {reason}"));
            summary.iterations = Some(trace.sco_iterations());
        }
        Err(Error::GraphInfeasible) | Err(Error::InfeasibleEndpoint(_)) => {
            summary.status = "infeasible".into();
        }
        Err(e) => return Err(e),
    }
    let text = toml::to_string(&summary).map_err(|e| Error::Domain(format!("summary serialization: {e}")))?;
    write_file(&dir.join("summary.toml"), &text)?;
    Ok(summary)
}

/// A sweep over IRS sizes, rate targets and map seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: u32,
    /// Hash of the base scenario (informational; recomputed on load).
    pub scenario_hash: String,
    pub irs_elements: Vec<usize>,
    pub r_min_gbps: Vec<f64>,
    pub seeds: Vec<u64>,
    pub map: MapSpec,
    pub fit_mode: FitMode,
    pub sco: ScoSettings,
    pub output_dir: PathBuf,
    pub scenario: ScenarioConfig,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.version.to_string(),
                expected: MANIFEST_VERSION,
            });
        }
        if self.irs_elements.is_empty() {
            return Err(Error::config("irs_elements", "sweep axis is empty"));
        }
        if self.r_min_gbps.is_empty() {
            return Err(Error::config("r_min_gbps", "sweep axis is empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "sweep axis is empty"));
        }
        let scenario = self.scenario.build()?;
        if scenario.hash() != self.scenario_hash {
            return Err(Error::config(
                "scenario_hash",
                format!(
                    "manifest says {}, scenario hashes to {}",
                    self.scenario_hash,
                    scenario.hash()
                ),
            ));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("manifest", e.message().to_string()))
    }

    pub fn cell_dir(&self, m: usize, r_gbps: f64, seed: u64) -> PathBuf {
        self.output_dir.join(format!("m{m}_r{r_gbps}_s{seed}"))
    }

    fn cell_config(&self, m: usize, r_gbps: f64) -> ScenarioConfig {
        let mut c = self.scenario.clone();
        c.radio.irs_elements = m;
        c.qos.r_min_gbps = r_gbps;
        c
    }
}

/// Runs every cell of the manifest, at most `jobs` at a time. Cells sharing
/// (M, seed) share one map and model. Failed cells are recorded and the
/// sweep continues; `results.csv` and `manifest.toml` are written to the
/// output directory.
pub fn run_sweep(manifest: &RunManifest, jobs: usize) -> Result<Vec<SweepRow>> {
    manifest.validate()?;
    create_dir(&manifest.output_dir)?;
    write_file(&manifest.output_dir.join("manifest.toml"), &manifest.to_toml_string())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;

    let groups: Vec<(usize, u64)> = manifest
        .irs_elements
        .iter()
        .flat_map(|&m| manifest.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let rows: Vec<Vec<SweepRow>> = pool.install(|| {
        groups
            .par_iter()
            .map(|&(m, seed)| {
                let spec = MapSpec { seed, ..manifest.map };
                let base = manifest.cell_config(m, manifest.r_min_gbps[0]);
                let prepared = prepare_model(&base, &ModelSource::Build(spec), manifest.fit_mode);
                manifest
                    .r_min_gbps
                    .iter()
                    .map(|&r| {
                        let dir = manifest.cell_dir(m, r, seed);
                        let mut row = SweepRow {
                            irs_elements: m,
                            r_min_gbps: r,
                            seed,
                            status: "failed".into(),
                            initial_solution: None,
                            energy_j: None,
                            average_rate_bits_s: None,
                            iterations: None,
                            dir: dir
                                .strip_prefix(&manifest.output_dir)
                                .unwrap_or(&dir)
                                .display()
                                .to_string(),
                        };
                        let outcome = prepared.as_ref().map_err(|e| e.to_string()).and_then(|(map, model)| {
                            let req = PlanRequest {
                                config: manifest.cell_config(m, r),
                                source: ModelSource::Build(spec),
                                fit_mode: manifest.fit_mode,
                                sco: manifest.sco,
                                out_dir: dir.clone(),
                            };
                            plan_to_dir(&req, Some((map.as_ref(), model))).map_err(|e| e.to_string())
                        });
                        match outcome {
                            Ok(s) => {
                                row.status = s.status;
                                row.initial_solution = s.initial_solution;
                                row.energy_j = s.final_energy_j;
                                row.average_rate_bits_s = s.average_rate_bits_s;
                                row.iterations = s.iterations;
                            }
                            Err(e) => warn!("cell M={m} r_min={r} seed={seed} failed: {e}"),
                        }
                        row
                    })
                    .collect()
            })
            .collect()
    });
    let rows: Vec<SweepRow> = rows.into_iter().flatten().collect();
    write_file(&manifest.output_dir.join("results.csv"), &sweep_csv(&rows))?;
    Ok(rows)
}
