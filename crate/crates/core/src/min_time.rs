//! Minimal-time computation: the exact integral formula when `dim H = 1`, the
//! general lower bound, and the one-dimensional comparison bound.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{ConvexBody, Vector};
use crate::quadrature::{integrate_with, IntegrateError, QuadConfig, QuadError, QuadResult};
use crate::rate::{rate_at, rate_profile, refine_min, RateConfig, RateError, RateMode, Segment, MIN_RATE_GRID, MIN_SEGMENT_LENGTH};
use crate::synthesis::{empirical_min_time, SynthesisConfig, SynthesisError};
use crate::system::ControlSystem;

#[derive(Debug, Error)]
pub enum MinTimeError {
    #[error("the exact time formula needs dim H = 1, got dim H = {slow_dim}")]
    NotCodimOne { slow_dim: usize },
    #[error("endpoint {endpoint} is not strictly inside the body")]
    NotInterior { endpoint: &'static str },
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("rate {rate:.3e} ≤ 0 at arc position {position}")]
    NonPositiveRate { position: f64, rate: f64 },
    #[error("interval length must be nonnegative, got {0}")]
    NegativeLength(f64),
    #[error("time is not finite (status {status:?})")]
    NotFinite { status: TimeStatus },
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative tolerance of the time integral.
    pub quad_tol: f64,
    /// Width of the undecided band around zero, relative to `max |s|`.
    pub rate_sign_tol: f64,
    /// Grid for the minimum-rate search (at least 2).
    pub grid: usize,
    pub rate: RateConfig,
    /// Strict-interior margin; the body's default when `None`.
    pub interior_margin: Option<f64>,
    /// Allowed relative gap between simulated and computed time.
    pub sim_gap_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            quad_tol: 1e-8,
            rate_sign_tol: 1e-9,
            grid: MIN_RATE_GRID,
            rate: RateConfig::default(),
            interior_margin: None,
            sim_gap_tol: 0.05,
        }
    }
}

impl SolverConfig {
    fn quad(&self) -> QuadConfig {
        QuadConfig::with_rel_tol(self.quad_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimeStatus {
    Finite,
    Unreachable,
    Indeterminate,
}

impl TimeStatus {
    /// CLI exit code.
    pub fn exit_code(self) -> i32 {
        match self {
            TimeStatus::Finite => 0,
            TimeStatus::Unreachable => 2,
            TimeStatus::Indeterminate => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeResult {
    pub status: TimeStatus,
    pub time: Option<f64>,
    /// `None` when the endpoints share their slow projection.
    pub min_rate: Option<f64>,
    pub min_rate_position: Option<f64>,
    /// Absolute band used for the sign test.
    pub rate_sign_tol: f64,
    pub quadrature_error: Option<f64>,
    /// `|h1 − h0|`.
    pub length: f64,
    /// `(arc_position, rate)` on the classification grid.
    #[serde(skip)]
    pub profile: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBound {
    /// `f64::INFINITY` when `infinite`.
    pub bound: f64,
    pub infinite: bool,
    pub rate_min: Option<f64>,
    pub rate_min_position: Option<f64>,
    pub quadrature_error: Option<f64>,
    pub length: f64,
    #[serde(skip)]
    pub profile: Vec<(f64, f64)>,
}

fn check_interior(body: &ConvexBody, y0: &Vector, y1: &Vector, cfg: &SolverConfig) -> Result<(), MinTimeError> {
    let margin = cfg.interior_margin.unwrap_or_else(|| body.default_interior_margin());
    for (endpoint, y) in [("y0", y0), ("y1", y1)] {
        if y.len() != body.dim() || !body.is_interior(y, margin) {
            return Err(MinTimeError::NotInterior { endpoint });
        }
    }
    Ok(())
}

fn slow_length(system: &ControlSystem, y0: &Vector, y1: &Vector) -> f64 {
    let slow = system.slow_basis();
    (slow.project(y1) - slow.project(y0)).norm()
}

/// `∫₀ᴸ dv / s(v)` along the segment.
fn integrate_reciprocal_rate(
    system: &ControlSystem,
    body: &ConvexBody,
    segment: &Segment,
    cfg: &SolverConfig,
) -> Result<QuadResult, MinTimeError> {
    let integrand = |v: f64| -> Result<f64, MinTimeError> {
        let rate = rate_at(system, body, segment, v, &cfg.rate)?.rate;
        if rate <= 0.0 {
            return Err(MinTimeError::NonPositiveRate { position: v, rate });
        }
        Ok(1.0 / rate)
    };
    integrate_with(integrand, 0.0, segment.length(), &cfg.quad()).map_err(|e| match e {
        IntegrateError::Integrand(e) => e,
        IntegrateError::Quadrature(q) => q.into(),
    })
}

/// Exact minimal time for `dim H = 1`, classified as finite, unreachable or
/// undecided by the sign of the minimum slice rate.
pub fn min_time_codim1(
    system: &ControlSystem,
    body: &ConvexBody,
    y0: &Vector,
    y1: &Vector,
    cfg: &SolverConfig,
) -> Result<TimeResult, MinTimeError> {
    if system.slow_dim() != 1 {
        return Err(MinTimeError::NotCodimOne {
            slow_dim: system.slow_dim(),
        });
    }
    check_interior(body, y0, y1, cfg)?;
    let length = slow_length(system, y0, y1);
    if length <= MIN_SEGMENT_LENGTH {
        return Ok(TimeResult {
            status: TimeStatus::Finite,
            time: Some(0.0),
            min_rate: None,
            min_rate_position: None,
            rate_sign_tol: 0.0,
            quadrature_error: Some(0.0),
            length,
            profile: Vec::new(),
        });
    }
    let segment = Segment::new(system, y0, y1, RateMode::CodimOne)?;
    let samples = rate_profile(system, body, &segment, cfg.grid, &cfg.rate)?;
    let min = refine_min(system, body, &segment, &samples, &cfg.rate);
    let tol = cfg.rate_sign_tol * min.max_abs;
    let profile = samples.iter().map(|s| (s.arc_position, s.rate)).collect();
    let mut result = TimeResult {
        status: TimeStatus::Indeterminate,
        time: None,
        min_rate: Some(min.value),
        min_rate_position: Some(min.arc_position),
        rate_sign_tol: tol,
        quadrature_error: None,
        length,
        profile,
    };
    if min.value > tol {
        let q = integrate_reciprocal_rate(system, body, &segment, cfg)?;
        result.status = TimeStatus::Finite;
        result.time = Some(q.value);
        result.quadrature_error = Some(q.error_estimate);
    } else if min.value < -tol {
        result.status = TimeStatus::Unreachable;
    }
    Ok(result)
}

/// Lower bound `∫ dv / s̄(v)` valid for any `dim H ≥ 1`; infinite when `s̄`
/// is nonpositive somewhere on the segment.
pub fn min_time_lower_bound(
    system: &ControlSystem,
    body: &ConvexBody,
    y0: &Vector,
    y1: &Vector,
    cfg: &SolverConfig,
) -> Result<LowerBound, MinTimeError> {
    check_interior(body, y0, y1, cfg)?;
    let length = slow_length(system, y0, y1);
    if length <= MIN_SEGMENT_LENGTH {
        return Ok(LowerBound {
            bound: 0.0,
            infinite: false,
            rate_min: None,
            rate_min_position: None,
            quadrature_error: Some(0.0),
            length,
            profile: Vec::new(),
        });
    }
    let segment = Segment::new(system, y0, y1, RateMode::LowerBound)?;
    let samples = rate_profile(system, body, &segment, cfg.grid, &cfg.rate)?;
    let min = refine_min(system, body, &segment, &samples, &cfg.rate);
    let profile = samples.iter().map(|s| (s.arc_position, s.rate)).collect();
    if min.value <= 0.0 {
        return Ok(LowerBound {
            bound: f64::INFINITY,
            infinite: true,
            rate_min: Some(min.value),
            rate_min_position: Some(min.arc_position),
            quadrature_error: None,
            length,
            profile,
        });
    }
    let q = integrate_reciprocal_rate(system, body, &segment, cfg)?;
    Ok(LowerBound {
        bound: q.value,
        infinite: false,
        rate_min: Some(min.value),
        rate_min_position: Some(min.arc_position),
        quadrature_error: Some(q.error_estimate),
        length,
        profile,
    })
}

/// `∫₀ᴹ dv / g(v)`: a lower bound on the time for a scalar `f` with
/// `f(0) = 0`, `ḟ ≤ g(f)` to reach `M`.
pub fn travel_time_bound(g: impl Fn(f64) -> f64, m: f64, cfg: &QuadConfig) -> Result<QuadResult, MinTimeError> {
    if m < 0.0 {
        return Err(MinTimeError::NegativeLength(m));
    }
    let integrand = |v: f64| -> Result<f64, MinTimeError> {
        let rate = g(v);
        if rate.is_nan() || rate <= 0.0 {
            return Err(MinTimeError::NonPositiveRate { position: v, rate });
        }
        Ok(1.0 / rate)
    };
    integrate_with(integrand, 0.0, m, cfg).map_err(|e| match e {
        IntegrateError::Integrand(e) => e,
        IntegrateError::Quadrature(q) => q.into(),
    })
}

/// Formula time against the best simulated arrival time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub formula_time: f64,
    pub simulated_time: f64,
    pub best_delta: f64,
    /// `(simulated − formula) / formula`.
    pub relative_gap: f64,
    /// Simulation never beats the infimum (up to `1e-3` relative).
    pub sandwich_holds: bool,
    pub gap_within_tol: bool,
}

pub fn equivalence_check_1d(
    system: &ControlSystem,
    body: &ConvexBody,
    y0: &Vector,
    y1: &Vector,
    cfg: &SolverConfig,
    synthesis: &SynthesisConfig,
) -> Result<EquivalenceReport, MinTimeError> {
    let result = min_time_codim1(system, body, y0, y1, cfg)?;
    let formula_time = match (result.status, result.time) {
        (TimeStatus::Finite, Some(t)) => t,
        (status, _) => return Err(MinTimeError::NotFinite { status }),
    };
    let empirical = empirical_min_time(system, body, y0, y1, cfg, synthesis)?;
    let simulated_time = empirical.best_time;
    let relative_gap = if formula_time > 0.0 {
        (simulated_time - formula_time) / formula_time
    } else {
        simulated_time
    };
    Ok(EquivalenceReport {
        formula_time,
        simulated_time,
        best_delta: empirical.best_delta,
        relative_gap,
        sandwich_holds: relative_gap >= -1e-3,
        gap_within_tol: relative_gap <= cfg.sim_gap_tol,
    })
}
