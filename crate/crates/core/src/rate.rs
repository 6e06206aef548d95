//! Slice rates: the best achievable speed of the slow coordinate.
//!
//! For a segment `[h0, h1]` in `H` with unit direction `d`, the rate at `h` is
//! the maximum of `⟨F(x), d⟩` over the slice `(h + V) ∩ C`, where `V` is
//! `H⊥` (co-dimension one) or `H_⊥ ⊕ H⊥` (lower bound), `H_⊥` being the part of
//! `H` orthogonal to `d`.

use rayon::prelude::*;
use thiserror::Error;

use crate::drift::{DriftError, DriftKind};
use crate::geometry::{Basis, ConvexBody, GeometryError, Slice, Vector};
use crate::search::{golden_section_min, maximize_over_slice, MultiStartConfig};
use crate::system::ControlSystem;

/// Segments shorter than this are treated as a single point.
pub const MIN_SEGMENT_LENGTH: f64 = 1e-12;
/// Allowed distance of a query point from its segment.
pub const ON_SEGMENT_TOL: f64 = 1e-10;
/// Default number of grid points for [`min_rate`].
pub const MIN_RATE_GRID: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error("segment endpoints coincide (length {length:.3e})")]
    DegenerateSegment { length: f64 },
    #[error("query point is {distance:.3e} away from the segment")]
    NotOnSegment { distance: f64 },
    #[error("rate grid needs at least 2 points, got {0}")]
    InvalidGrid(usize),
    #[error("the exact backend needs an affine drift")]
    UnsupportedBackend,
    #[error("expected {expected}-vectors, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateMode {
    /// Slices along `H⊥`; the exact rate when `dim H = 1`.
    CodimOne,
    /// Slices along `H_⊥ ⊕ H⊥`; yields a lower bound on the time.
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateBackend {
    /// Exact for affine drift, generic otherwise.
    Auto,
    /// Support-function evaluation; affine drift only.
    Exact,
    /// Multi-start derivative-free search.
    Generic,
}

#[derive(Debug, Clone)]
pub struct RateConfig {
    pub backend: RateBackend,
    pub search: MultiStartConfig,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            backend: RateBackend::Auto,
            search: MultiStartConfig::default(),
        }
    }
}

impl RateConfig {
    pub fn with_seed(seed: u64) -> Self {
        let mut cfg = Self::default();
        cfg.search.seed = seed;
        cfg
    }

    pub fn with_backend(mut self, backend: RateBackend) -> Self {
        self.backend = backend;
        self
    }
}

/// A point `h` on the segment `[h0, h1]` together with the slicing mode.
#[derive(Debug, Clone)]
pub struct RateQuery {
    pub h: Vector,
    pub h0: Vector,
    pub h1: Vector,
    pub mode: RateMode,
}

/// The segment `[h0, h1] ⊂ H` parametrized by arc length, with its slice
/// directions precomputed.
#[derive(Debug, Clone)]
pub struct Segment {
    h0: Vector,
    h1: Vector,
    direction: Vector,
    length: f64,
    mode: RateMode,
    slice_directions: Basis,
}

impl Segment {
    /// Builds the segment between the projections of `h0` and `h1` onto `H`.
    pub fn new(system: &ControlSystem, h0: &Vector, h1: &Vector, mode: RateMode) -> Result<Self, RateError> {
        let n = system.n();
        for v in [h0, h1] {
            if v.len() != n {
                return Err(RateError::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        let slow = system.slow_basis();
        let h0 = slow.project(h0);
        let h1 = slow.project(h1);
        let diff = &h1 - &h0;
        let length = diff.norm();
        if length <= MIN_SEGMENT_LENGTH {
            return Err(RateError::DegenerateSegment { length });
        }
        let direction = diff / length;
        let slice_directions = match mode {
            RateMode::CodimOne => system.range_basis().clone(),
            RateMode::LowerBound => {
                let across: Vec<Vector> = slow
                    .vectors()
                    .iter()
                    .map(|v| v - &direction * direction.dot(v))
                    .collect();
                Basis::orthonormalize(n, &across).join(system.range_basis())
            }
        };
        Ok(Self {
            h0,
            h1,
            direction,
            length,
            mode,
            slice_directions,
        })
    }

    pub fn from_query(system: &ControlSystem, query: &RateQuery) -> Result<Self, RateError> {
        Self::new(system, &query.h0, &query.h1, query.mode)
    }

    pub fn start(&self) -> &Vector {
        &self.h0
    }

    pub fn end(&self) -> &Vector {
        &self.h1
    }

    /// Unit vector `(h1 − h0) / |h1 − h0|`.
    pub fn direction(&self) -> &Vector {
        &self.direction
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn mode(&self) -> RateMode {
        self.mode
    }

    pub fn slice_directions(&self) -> &Basis {
        &self.slice_directions
    }

    /// `h0 + v·d`; `v` may lie outside `[0, length]`.
    pub fn point(&self, v: f64) -> Vector {
        &self.h0 + &self.direction * v
    }

    /// Arc position of `h`, checking that `h` lies on the segment.
    pub fn arc_position(&self, h: &Vector) -> Result<f64, RateError> {
        let v = (h - &self.h0).dot(&self.direction);
        let clamped = v.clamp(0.0, self.length);
        let distance = (h - self.point(clamped)).norm();
        if distance > ON_SEGMENT_TOL * (1.0 + self.length) {
            return Err(RateError::NotOnSegment { distance });
        }
        Ok(clamped)
    }

    pub fn slice_at(&self, v: f64) -> Slice {
        Slice::new(self.point(v), self.slice_directions.clone())
    }
}

/// Rate value with a maximizing point of `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateValue {
    pub rate: f64,
    pub argmax: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSample {
    pub arc_position: f64,
    pub rate: f64,
    pub argmax: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinRate {
    pub value: f64,
    pub arc_position: f64,
    /// Largest `|rate|` seen on the grid; sets the scale of sign tests.
    pub max_abs: f64,
}

/// Rate at arc position `v` (not restricted to `[0, length]`).
pub fn rate_at(
    system: &ControlSystem,
    body: &ConvexBody,
    segment: &Segment,
    v: f64,
    cfg: &RateConfig,
) -> Result<RateValue, RateError> {
    let slice = segment.slice_at(v);
    let d = segment.direction();
    let drift = system.drift();
    let exact = match (cfg.backend, drift.kind()) {
        (RateBackend::Generic, _) => None,
        (_, DriftKind::Affine { matrix, offset }) => Some((matrix, offset)),
        (RateBackend::Exact, _) => return Err(RateError::UnsupportedBackend),
        (RateBackend::Auto, _) => None,
    };
    if let Some((matrix, offset)) = exact {
        // ⟨A x + b, d⟩ = ⟨x, Aᵀd⟩ + ⟨b, d⟩ is linear on the slice.
        let w = matrix.transpose() * d;
        let g = slice.directions.coordinates(&w);
        let (support, z) = body.slice_support(&slice, &g)?;
        return Ok(RateValue {
            rate: support + w.dot(&slice.anchor) + offset.dot(d),
            argmax: slice.point(&z),
        });
    }
    let objective = |x: &Vector| drift.eval(x).map_or(f64::NAN, |f| f.dot(d));
    let best = maximize_over_slice(objective, body, &slice, &cfg.search)?;
    let argmax = slice.point(&best.z);
    // Re-evaluate to surface drift errors the search masked as NaN.
    let rate = drift.eval(&argmax)?.dot(d);
    Ok(RateValue { rate, argmax })
}

/// Rate at the query point `h`.
pub fn slice_rate(
    system: &ControlSystem,
    body: &ConvexBody,
    query: &RateQuery,
    cfg: &RateConfig,
) -> Result<RateValue, RateError> {
    let segment = Segment::from_query(system, query)?;
    let v = segment.arc_position(&system.slow_basis().project(&query.h))?;
    rate_at(system, body, &segment, v, cfg)
}

/// Rates on `grid` uniformly spaced arc positions covering `[0, length]`.
pub fn rate_profile(
    system: &ControlSystem,
    body: &ConvexBody,
    segment: &Segment,
    grid: usize,
    cfg: &RateConfig,
) -> Result<Vec<RateSample>, RateError> {
    if grid < 2 {
        return Err(RateError::InvalidGrid(grid));
    }
    let positions = grid_positions(segment.length(), grid);
    positions
        .par_iter()
        .map(|&v| {
            rate_at(system, body, segment, v, cfg).map(|r| RateSample {
                arc_position: v,
                rate: r.rate,
                argmax: r.argmax,
            })
        })
        .collect()
}

/// Uniform grid on `[0, length]` with exact endpoints.
pub fn grid_positions(length: f64, grid: usize) -> Vec<f64> {
    let step = length / (grid - 1) as f64;
    (0..grid)
        .map(|i| if i + 1 == grid { length } else { step * i as f64 })
        .collect()
}

/// Global minimum of the rate along the segment: dense grid, then golden
/// refinement on the bracket around the best grid point.
pub fn min_rate(
    system: &ControlSystem,
    body: &ConvexBody,
    segment: &Segment,
    cfg: &RateConfig,
) -> Result<MinRate, RateError> {
    min_rate_with_grid(system, body, segment, MIN_RATE_GRID, cfg)
}

pub fn min_rate_with_grid(
    system: &ControlSystem,
    body: &ConvexBody,
    segment: &Segment,
    grid: usize,
    cfg: &RateConfig,
) -> Result<MinRate, RateError> {
    let profile = rate_profile(system, body, segment, grid, cfg)?;
    Ok(refine_min(system, body, segment, &profile, cfg))
}

/// Golden refinement of the profile minimum; failures inside the bracket keep
/// the grid value.
pub fn refine_min(
    system: &ControlSystem,
    body: &ConvexBody,
    segment: &Segment,
    profile: &[RateSample],
    cfg: &RateConfig,
) -> MinRate {
    let best = profile
        .iter()
        .enumerate()
        .fold(0, |bi, (i, s)| if s.rate < profile[bi].rate { i } else { bi });
    let max_abs = profile.iter().map(|s| s.rate.abs()).fold(0.0, f64::max);
    let lo = profile[best.saturating_sub(1)].arc_position;
    let hi = profile[(best + 1).min(profile.len() - 1)].arc_position;
    let (v, value) = golden_section_min(
        |v| rate_at(system, body, segment, v, cfg).map_or(f64::NAN, |r| r.rate),
        lo,
        hi,
        1e-8,
    );
    let grid_best = &profile[best];
    if value.is_finite() && value < grid_best.rate {
        MinRate {
            value,
            arc_position: v,
            max_abs: max_abs.max(value.abs()),
        }
    } else {
        MinRate {
            value: grid_best.rate,
            arc_position: grid_best.arc_position,
            max_abs,
        }
    }
}
