//! Scenario documents: JSON parsing and validation into solver inputs.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::drift::DriftField;
use crate::geometry::{ConvexBody, Matrix, Vector, MEMBERSHIP_TOL};
use crate::min_time::SolverConfig;
use crate::rate::{RateBackend, RateConfig};
use crate::search::MultiStartConfig;
use crate::synthesis::SynthesisConfig;
use crate::system::ControlSystem;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error(
        "non-convex constraint body ({0}): the time formula and the lower bound assume a \
         convex constraint set, so time and bound computations are refused; only simulation accepts it"
    )]
    NonConvexBody(String),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    /// Name of the worked example this fixture reproduces.
    #[serde(default)]
    pub paper_example: Option<String>,
    /// Externally published value to report next to the computed one.
    #[serde(default)]
    pub reference_time: Option<f64>,
    pub system: SystemSpec,
    pub body: BodySpec,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    #[serde(default)]
    pub config: ConfigSpec,
    #[serde(default)]
    pub outputs: Option<Vec<OutputKind>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub n: usize,
    pub m: usize,
    pub drift: DriftSpec,
    /// `n` rows of `m` entries.
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    Constant {
        value: Vec<f64>,
    },
    Attraction {
        source: Vec<f64>,
    },
    Counterexample,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ellipsoid {
        center: Vec<f64>,
        shape: Vec<Vec<f64>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Polytope {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    Annulus {
        center: Vec<f64>,
        inner_radius: f64,
        outer_radius: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendSpec {
    Auto,
    Exact,
    Generic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigSpec {
    pub quad_tol: f64,
    pub rate_sign_tol: f64,
    pub grid: usize,
    pub seed: u64,
    pub backend: BackendSpec,
    pub starts: usize,
    pub interior_margin: Option<f64>,
    pub delta_schedule: Vec<f64>,
    pub dt: Option<f64>,
    pub fast_gain: Option<f64>,
    pub endpoint_tol: Option<f64>,
    pub sim_gap_tol: f64,
}

impl Default for ConfigSpec {
    fn default() -> Self {
        let solver = SolverConfig::default();
        let synthesis = SynthesisConfig::default();
        Self {
            quad_tol: solver.quad_tol,
            rate_sign_tol: solver.rate_sign_tol,
            grid: solver.grid,
            seed: 0,
            backend: BackendSpec::Auto,
            starts: MultiStartConfig::default().starts,
            interior_margin: None,
            delta_schedule: synthesis.delta_schedule,
            dt: None,
            fast_gain: None,
            endpoint_tol: None,
            sim_gap_tol: solver.sim_gap_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Time,
    Bound,
    Synthesize,
    Verify,
}

/// Constraint set of a scenario; the annulus is kept only for simulation.
#[derive(Debug, Clone)]
pub enum Body {
    Convex(ConvexBody),
    Annulus { center: Vector, inner: f64, outer: f64 },
}

impl Body {
    /// Tolerant membership.
    pub fn contains(&self, x: &Vector) -> bool {
        match self {
            Body::Convex(c) => c.contains(x),
            Body::Annulus { center, inner, outer } => {
                let r2 = (x - center).norm_squared();
                r2 >= inner * inner - MEMBERSHIP_TOL && r2 <= outer * outer + MEMBERSHIP_TOL
            }
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match self {
            Body::Convex(c) => c.bounding_radius(),
            Body::Annulus { center, outer, .. } => center.norm() + outer,
        }
    }

    /// The convex body, or the error the time and bound computations report.
    pub fn convex(&self) -> Result<&ConvexBody, ScenarioError> {
        match self {
            Body::Convex(c) => Ok(c),
            Body::Annulus { .. } => Err(ScenarioError::NonConvexBody("annulus".into())),
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub paper_example: Option<String>,
    pub reference_time: Option<f64>,
    pub system: ControlSystem,
    pub body: Body,
    pub y0: Vector,
    pub y1: Vector,
    pub solver: SolverConfig,
    pub synthesis: SynthesisConfig,
    pub outputs: Vec<OutputKind>,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        Self::from_json(&text, fallback.as_deref())
    }

    pub fn from_json(text: &str, fallback_name: Option<&str>) -> Result<Self, ScenarioError> {
        let file = parse(text)?;
        Self::from_file(file, fallback_name)
    }

    pub fn from_file(file: ScenarioFile, fallback_name: Option<&str>) -> Result<Self, ScenarioError> {
        let n = file.system.n;
        let m = file.system.m;
        if n == 0 {
            return Err(invalid("system.n", "must be at least 1"));
        }
        let drift = build_drift(&file.system.drift, n)?;
        let b = matrix_from_rows(&file.system.b, n, m, "system.b")?;
        let mut system = ControlSystem::new(drift, b).map_err(|e| invalid("system.b", e.to_string()))?;
        let body = build_body(&file.body, n)?;
        let y0 = vector_of(&file.y0, n, "y0")?;
        let y1 = vector_of(&file.y1, n, "y1")?;

        let cfg = &file.config;
        if !(cfg.quad_tol > 0.0) {
            return Err(invalid("config.quad_tol", "must be positive"));
        }
        if !(cfg.rate_sign_tol >= 0.0) {
            return Err(invalid("config.rate_sign_tol", "must be nonnegative"));
        }
        if cfg.grid < 2 {
            return Err(invalid("config.grid", "must be at least 2"));
        }
        if cfg.starts == 0 {
            return Err(invalid("config.starts", "must be at least 1"));
        }
        if cfg.delta_schedule.is_empty() || cfg.delta_schedule.iter().any(|d| !(*d > 0.0)) {
            return Err(invalid("config.delta_schedule", "needs positive entries"));
        }
        for (path, value) in [
            ("config.dt", cfg.dt),
            ("config.fast_gain", cfg.fast_gain),
            ("config.endpoint_tol", cfg.endpoint_tol),
            ("config.interior_margin", cfg.interior_margin),
        ] {
            if value.is_some_and(|v| !(v > 0.0)) {
                return Err(invalid(path, "must be positive"));
            }
        }

        let margin = match &body {
            Body::Convex(c) => cfg.interior_margin.unwrap_or_else(|| c.default_interior_margin()),
            Body::Annulus { .. } => cfg.interior_margin.unwrap_or(1e-8 * body.bounding_radius()),
        };
        for (path, y) in [("y0", &y0), ("y1", &y1)] {
            let inside = match &body {
                Body::Convex(c) => c.is_interior(y, margin),
                Body::Annulus { center, inner, outer } => {
                    let r = (y - center).norm();
                    r > inner + margin && r < outer - margin
                }
            };
            if !inside {
                return Err(invalid(path, "endpoint is not strictly inside the body"));
            }
        }
        if let (Body::Convex(c), None) = (&body, system.drift().lipschitz_constant()) {
            system
                .drift_mut()
                .calibrate_lipschitz(c, cfg.seed)
                .map_err(|e| invalid("system.drift", e.to_string()))?;
        }

        let backend = match cfg.backend {
            BackendSpec::Auto => RateBackend::Auto,
            BackendSpec::Exact => RateBackend::Exact,
            BackendSpec::Generic => RateBackend::Generic,
        };
        if backend == RateBackend::Exact && !system.drift().is_affine() {
            return Err(invalid("config.backend", "the exact backend needs an affine drift"));
        }
        let mut rate = RateConfig::with_seed(cfg.seed).with_backend(backend);
        rate.search.starts = cfg.starts;
        let solver = SolverConfig {
            quad_tol: cfg.quad_tol,
            rate_sign_tol: cfg.rate_sign_tol,
            grid: cfg.grid,
            rate,
            interior_margin: cfg.interior_margin,
            sim_gap_tol: cfg.sim_gap_tol,
        };
        let synthesis = SynthesisConfig {
            delta_schedule: cfg.delta_schedule.clone(),
            fast_gain: cfg.fast_gain,
            dt: cfg.dt,
            endpoint_tol: cfg.endpoint_tol,
            seed: cfg.seed,
            ..SynthesisConfig::default()
        };
        let outputs = file.outputs.clone().unwrap_or_else(|| {
            if system.slow_dim() == 1 {
                vec![OutputKind::Time]
            } else {
                vec![OutputKind::Bound]
            }
        });
        Ok(Scenario {
            name: file.name.clone().or(fallback_name.map(str::to_owned)).unwrap_or_else(|| "scenario".into()),
            paper_example: file.paper_example.clone(),
            reference_time: file.reference_time,
            system,
            body,
            y0,
            y1,
            solver,
            synthesis,
            outputs,
        })
    }

    /// Re-applies the seed to every seeded component.
    pub fn set_seed(&mut self, seed: u64) {
        self.solver.rate.search.seed = seed;
        self.synthesis.seed = seed;
    }
}

/// Deserializes with field paths in the error messages.
pub fn parse(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            let message = inner.to_string();
            // Point at the missing field itself rather than its parent.
            let path = match missing_field(&message) {
                Some(field) if path == "." => field.to_owned(),
                Some(field) => format!("{path}.{field}"),
                None => path,
            };
            invalid(path, message)
        } else {
            ScenarioError::Parse(inner.to_string())
        }
    })
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

fn vector_of(values: &[f64], n: usize, path: &str) -> Result<Vector, ScenarioError> {
    if values.len() != n {
        return Err(invalid(path, format!("expected {n} entries, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid(path, "entries must be finite"));
    }
    Ok(Vector::from_row_slice(values))
}

fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, path: &str) -> Result<Matrix, ScenarioError> {
    if rows.len() != nrows {
        return Err(invalid(path, format!("expected {nrows} rows, got {}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(invalid(format!("{path}[{i}]"), format!("expected {ncols} entries, got {}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("{path}[{i}]"), "entries must be finite"));
        }
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn build_drift(spec: &DriftSpec, n: usize) -> Result<DriftField, ScenarioError> {
    Ok(match spec {
        DriftSpec::Linear { matrix, offset } => {
            let a = matrix_from_rows(matrix, n, n, "system.drift.matrix")?;
            match offset {
                Some(b) => DriftField::affine(a, vector_of(b, n, "system.drift.offset")?),
                None => DriftField::linear(a),
            }
        }
        DriftSpec::Constant { value } => DriftField::constant(vector_of(value, n, "system.drift.value")?),
        DriftSpec::Attraction { source } => DriftField::attraction(vector_of(source, n, "system.drift.source")?),
        DriftSpec::Counterexample => {
            if n != 3 {
                return Err(invalid("system.drift", "the counterexample field lives in R^3"));
            }
            DriftField::counterexample()
        }
    })
}

fn build_body(spec: &BodySpec, n: usize) -> Result<Body, ScenarioError> {
    let body = |r: Result<ConvexBody, crate::geometry::GeometryError>| {
        r.map(Body::Convex).map_err(|e| invalid("body", e.to_string()))
    };
    match spec {
        BodySpec::Box { lower, upper } => body(ConvexBody::new_box(
            vector_of(lower, n, "body.lower")?,
            vector_of(upper, n, "body.upper")?,
        )),
        BodySpec::Ellipsoid { center, shape } => body(ConvexBody::new_ellipsoid(
            vector_of(center, n, "body.center")?,
            matrix_from_rows(shape, n, n, "body.shape")?,
        )),
        BodySpec::Ball { center, radius } => body(ConvexBody::new_ball(vector_of(center, n, "body.center")?, *radius)),
        BodySpec::Polytope { normals, offsets } => {
            if normals.len() != offsets.len() {
                return Err(invalid("body.offsets", "needs one offset per normal"));
            }
            let normals = normals
                .iter()
                .enumerate()
                .map(|(i, a)| vector_of(a, n, &format!("body.normals[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            body(ConvexBody::new_polytope(normals, offsets.clone()))
        }
        BodySpec::Annulus {
            center,
            inner_radius,
            outer_radius,
        } => {
            if !(*inner_radius > 0.0 && inner_radius < outer_radius && outer_radius.is_finite()) {
                return Err(invalid("body", "annulus needs 0 < inner_radius < outer_radius"));
            }
            Ok(Body::Annulus {
                center: vector_of(center, n, "body.center")?,
                inner: *inner_radius,
                outer: *outer_radius,
            })
        }
    }
}
