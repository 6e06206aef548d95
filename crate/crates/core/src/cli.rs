//! The `mintime run` command: load a scenario, run the requested analyses,
//! write `result.json` and the CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::min_time::{min_time_codim1, min_time_lower_bound, MinTimeError, TimeResult, TimeStatus};
use crate::scenario::{OutputKind, Scenario, ScenarioError};
use crate::synthesis::{empirical_min_time, RunSummary, SynthesisParams};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solver(#[from] MinTimeError),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub scenario: PathBuf,
    pub out: PathBuf,
    pub traj: bool,
    pub verify: bool,
    pub quad_tol: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundDoc {
    /// `null` when infinite.
    pub bound: Option<f64>,
    pub infinite: bool,
    pub rate_min: Option<f64>,
    pub rate_min_position: Option<f64>,
    pub quadrature_error_estimate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisDoc {
    pub best_time: Option<f64>,
    pub best_delta: Option<f64>,
    pub params: Option<SynthesisParams>,
    pub runs: Vec<RunSummary>,
    /// `(best_time − time) / time`.
    pub relative_gap: Option<f64>,
    pub sandwich_holds: Option<bool>,
    pub gap_within_tol: Option<bool>,
    pub trajectory_csv: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultDocument {
    pub scenario: String,
    pub paper_example: Option<String>,
    pub slow_dim: usize,
    pub status: Option<TimeStatus>,
    pub time: Option<f64>,
    pub min_rate: Option<f64>,
    pub min_rate_position: Option<f64>,
    pub rate_sign_tol: Option<f64>,
    pub quadrature_error_estimate: Option<f64>,
    pub segment_length: Option<f64>,
    pub reference_time: Option<f64>,
    pub lower_bound: Option<BoundDoc>,
    pub rate_profile_csv: Option<String>,
    pub rate_profile: Vec<[f64; 2]>,
    pub synthesis: Option<SynthesisDoc>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub document: ResultDocument,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn profile_csv(profile: &[[f64; 2]]) -> String {
    let mut out = String::from("arc_position,rate\n");
    for [v, s] in profile {
        writeln!(out, "{v:.16e},{s:.16e}").unwrap();
    }
    out
}

pub fn run(opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let mut scenario = Scenario::from_path(&opts.scenario)?;
    if let Some(tol) = opts.quad_tol {
        if !(tol > 0.0) {
            return Err(ScenarioError::Validation {
                path: "--quad-tol".into(),
                message: "must be positive".into(),
            }
            .into());
        }
        scenario.solver.quad_tol = tol;
    }
    if let Some(seed) = opts.seed {
        scenario.set_seed(seed);
    }
    let body = scenario.body.convex()?;
    let system = &scenario.system;
    let (y0, y1) = (&scenario.y0, &scenario.y1);
    let wants = |k: OutputKind| scenario.outputs.contains(&k);
    let synthesize = wants(OutputKind::Synthesize) || wants(OutputKind::Verify) || opts.verify || opts.traj;
    let want_time = wants(OutputKind::Time) || (synthesize && system.slow_dim() == 1);

    fs::create_dir_all(&opts.out).map_err(|e| CliError::Io {
        path: opts.out.display().to_string(),
        message: e.to_string(),
    })?;

    let mut doc = ResultDocument {
        scenario: scenario.name.clone(),
        paper_example: scenario.paper_example.clone(),
        slow_dim: system.slow_dim(),
        status: None,
        time: None,
        min_rate: None,
        min_rate_position: None,
        rate_sign_tol: None,
        quadrature_error_estimate: None,
        segment_length: None,
        reference_time: scenario.reference_time,
        lower_bound: None,
        rate_profile_csv: None,
        rate_profile: Vec::new(),
        synthesis: None,
    };
    let mut exit_code = 0;
    let mut time_result: Option<TimeResult> = None;

    if want_time {
        let r = min_time_codim1(system, body, y0, y1, &scenario.solver)?;
        exit_code = r.status.exit_code();
        doc.status = Some(r.status);
        doc.time = r.time;
        doc.min_rate = r.min_rate;
        doc.min_rate_position = r.min_rate_position;
        doc.rate_sign_tol = Some(r.rate_sign_tol);
        doc.quadrature_error_estimate = r.quadrature_error;
        doc.segment_length = Some(r.length);
        doc.rate_profile = r.profile.iter().map(|&(v, s)| [v, s]).collect();
        time_result = Some(r);
    }
    if wants(OutputKind::Bound) {
        let lb = min_time_lower_bound(system, body, y0, y1, &scenario.solver)?;
        if doc.rate_profile.is_empty() {
            doc.rate_profile = lb.profile.iter().map(|&(v, s)| [v, s]).collect();
            doc.segment_length = Some(lb.length);
        }
        doc.lower_bound = Some(BoundDoc {
            bound: (!lb.infinite).then_some(lb.bound),
            infinite: lb.infinite,
            rate_min: lb.rate_min,
            rate_min_position: lb.rate_min_position,
            quadrature_error_estimate: lb.quadrature_error,
        });
    }
    if !doc.rate_profile.is_empty() {
        write_file(&opts.out.join("rate_profile.csv"), &profile_csv(&doc.rate_profile))?;
        doc.rate_profile_csv = Some("rate_profile.csv".into());
    }

    if synthesize {
        let mut syn = SynthesisDoc {
            best_time: None,
            best_delta: None,
            params: None,
            runs: Vec::new(),
            relative_gap: None,
            sandwich_holds: None,
            gap_within_tol: None,
            trajectory_csv: None,
            error: None,
        };
        match time_result.as_ref().map(|r| (r.status, r.time)) {
            Some((TimeStatus::Finite, Some(t))) => {
                match empirical_min_time(system, body, y0, y1, &scenario.solver, &scenario.synthesis) {
                    Ok(emp) => {
                        let gap = if t > 0.0 { (emp.best_time - t) / t } else { emp.best_time };
                        syn.best_time = Some(emp.best_time);
                        syn.best_delta = Some(emp.best_delta);
                        syn.params = Some(emp.best.params);
                        syn.runs = emp.runs;
                        syn.relative_gap = Some(gap);
                        syn.sandwich_holds = Some(gap >= -1e-3);
                        syn.gap_within_tol = Some(gap <= scenario.solver.sim_gap_tol);
                        if opts.traj {
                            write_file(&opts.out.join("trajectory.csv"), &emp.best.trajectory.to_csv())?;
                            syn.trajectory_csv = Some("trajectory.csv".into());
                        }
                    }
                    Err(e) => syn.error = Some(e.to_string()),
                }
            }
            Some((status, _)) => syn.error = Some(format!("no synthesis: status {status:?}")),
            None => syn.error = Some(format!("synthesis needs dim H = 1, got {}", system.slow_dim())),
        }
        doc.synthesis = Some(syn);
    }

    let json = serde_json::to_string_pretty(&doc).expect("result document serializes");
    write_file(&opts.out.join("result.json"), &(json + "\n"))?;
    Ok(RunOutcome { exit_code, document: doc })
}

/// Sizes the global worker pool from `MINTIME_THREADS` (unset or 0: automatic).
pub fn configure_threads() {
    let threads = std::env::var("MINTIME_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // A second initialization in the same process is harmless to ignore.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}
