//! Near-optimal control synthesis for `dim H = 1`.
//!
//! The state splits as `y = h0 + v·d + Q w` with `v` the arc position along
//! the slow segment and `w` the fast coordinates. The control cannot change
//! `v̇ = ⟨F(y), d⟩`, but it can set `ẇ` freely, so the law keeps `w` on a
//! tabulated curve of slice maximizers pulled slightly toward the slice
//! centers (cruise), then sweeps `w` to the fast coordinates of `y1` over a
//! duration chosen so that `v` lands on the target at the same instant.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::drift::DriftError;
use crate::geometry::{ConvexBody, GeometryError, Matrix, Vector};
use crate::min_time::{min_time_codim1, MinTimeError, SolverConfig, TimeResult, TimeStatus};
use crate::rate::{rate_at, RateError, RateMode, Segment};
use crate::simulate::{rk4_step, simulate, simulate_from, ControlLaw, SimError, SimOptions, Trajectory};
use crate::system::ControlSystem;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("synthesis needs dim H = 1, got {0}")]
    NotCodimOne(usize),
    #[error("minimal time is not finite (status {status:?})")]
    NotFinite { status: TimeStatus },
    #[error("endpoints share their slow projection; nothing to synthesize")]
    CoincidentProjections,
    #[error("synthesis infeasible: {0}")]
    Infeasible(String),
    #[error("invalid synthesis configuration: {0}")]
    InvalidConfig(String),
    #[error("no feasible run among {attempts} regularization levels")]
    NoFeasibleRun { attempts: usize },
    #[error(transparent)]
    Upstream(Box<MinTimeError>),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

impl From<MinTimeError> for SynthesisError {
    fn from(e: MinTimeError) -> Self {
        SynthesisError::Upstream(Box::new(e))
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    /// Speed slacks, as fractions of the mean slice rate.
    pub delta_schedule: Vec<f64>,
    /// Proportional gain (1/time) of the fast phases; `1e3·max|F| / diam(C)`
    /// when `None`.
    pub fast_gain: Option<f64>,
    /// Cruise step; `min(diam / (100·max|F|), 0.5 / fast_gain)` when `None`.
    pub dt: Option<f64>,
    /// Arrival tolerance; `1e-4·diam(C)` when `None`.
    pub endpoint_tol: Option<f64>,
    /// Maximizer table resolution.
    pub table_points: usize,
    pub seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            delta_schedule: vec![0.2, 0.1, 0.05],
            fast_gain: None,
            dt: None,
            endpoint_tol: None,
            table_points: 513,
            seed: 0,
        }
    }
}

/// Parameters after defaults were filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthesisParams {
    pub delta: f64,
    /// Inward offset of the cruise curve, `delta / (L_F + 1)`.
    pub inner_margin: f64,
    pub fast_gain: f64,
    pub dt: f64,
    /// RK4 steps per final sweep.
    pub sweep_steps: usize,
    /// Duration of the final sweep.
    pub sweep_duration: f64,
    pub endpoint_tol: f64,
    pub max_drift: f64,
    pub lipschitz: f64,
}

/// Coordinates `(v, w)` of the split `y = h0 + v·d + Q w`.
#[derive(Debug, Clone)]
struct Frame {
    origin: Vector,
    direction: Vector,
    fast: Matrix,
}

impl Frame {
    fn arc(&self, y: &Vector) -> f64 {
        (y - &self.origin).dot(&self.direction)
    }

    fn fast_coords(&self, y: &Vector) -> Vector {
        self.fast.transpose() * y
    }
}

/// `u` realizing `ẇ = w_rate` given the drift `f` at the current state.
fn steer(system: &ControlSystem, frame: &Frame, f: &Vector, w_rate: &Vector) -> Vector {
    let wanted = &frame.fast * (w_rate - frame.fast.transpose() * f);
    system.control_for(&wanted)
}

/// Tracks the tabulated cruise curve `v ↦ w_target(v)`.
#[derive(Debug, Clone)]
pub struct CruiseLaw {
    system: ControlSystem,
    frame: Frame,
    start: f64,
    step: f64,
    targets: Vec<Vector>,
    /// Feedforward slope per table interval; zero across jumps.
    slopes: Vec<Vector>,
    gain: f64,
}

impl CruiseLaw {
    fn target(&self, v: f64) -> (Vector, Vector) {
        let last = self.targets.len() - 1;
        let x = (v - self.start) / self.step;
        if !(x > 0.0) {
            return (self.targets[0].clone(), Vector::zeros(self.targets[0].len()));
        }
        if x >= last as f64 {
            return (self.targets[last].clone(), Vector::zeros(self.targets[last].len()));
        }
        let i = (x.floor() as usize).min(last - 1);
        let frac = x - i as f64;
        let w = &self.targets[i] * (1.0 - frac) + &self.targets[i + 1] * frac;
        (w, self.slopes[i].clone())
    }
}

impl ControlLaw for CruiseLaw {
    fn control(&self, _t: f64, y: &Vector) -> Result<Vector, DriftError> {
        let f = self.system.drift().eval(y)?;
        let v_rate = f.dot(&self.frame.direction);
        let (w_target, slope) = self.target(self.frame.arc(y));
        let w = self.frame.fast_coords(y);
        let w_rate = (w_target - w) * self.gain + slope * v_rate;
        Ok(steer(&self.system, &self.frame, &f, &w_rate))
    }
}

/// Moves the fast coordinates from `w_start` to `w_end` along a smoothstep
/// ramp over `[t_start, t_start + duration]`, then holds `w_end`.
#[derive(Debug, Clone)]
pub struct SweepLaw {
    system: ControlSystem,
    frame: Frame,
    pub t_start: f64,
    pub duration: f64,
    w_start: Vector,
    w_end: Vector,
    gain: f64,
    steps: usize,
}

impl SweepLaw {
    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }

    fn reference(&self, t: f64) -> (Vector, Vector) {
        let s = ((t - self.t_start) / self.duration).clamp(0.0, 1.0);
        let phi = s * s * (3.0 - 2.0 * s);
        let dphi = 6.0 * s * (1.0 - s) / self.duration;
        let span = &self.w_end - &self.w_start;
        (&self.w_start + &span * phi, span * dphi)
    }
}

impl ControlLaw for SweepLaw {
    fn control(&self, t: f64, y: &Vector) -> Result<Vector, DriftError> {
        let f = self.system.drift().eval(y)?;
        let (r, dr) = self.reference(t);
        // Feedback only mops up integration error; keep it stable at the sweep step.
        let gain = self.gain.min(0.5 * self.steps as f64 / self.duration);
        let w_rate = dr + (r - self.frame.fast_coords(y)) * gain;
        Ok(steer(&self.system, &self.frame, &f, &w_rate))
    }

    fn max_step(&self, _t: f64) -> Option<f64> {
        Some(self.duration / self.steps as f64)
    }

    fn breakpoint_after(&self, t: f64) -> Option<f64> {
        (t < self.t_end()).then(|| self.t_end())
    }
}

/// Cruise before the sweep starts, sweep from then on. The phase of an RK4
/// step is fixed by its start time.
#[derive(Debug, Clone)]
pub struct PhasedLaw {
    pub cruise: CruiseLaw,
    pub sweep: SweepLaw,
}

impl ControlLaw for PhasedLaw {
    fn control(&self, t: f64, y: &Vector) -> Result<Vector, DriftError> {
        self.stage_control(t, t, y)
    }

    fn stage_control(&self, step_start: f64, t: f64, y: &Vector) -> Result<Vector, DriftError> {
        if step_start < self.sweep.t_start {
            self.cruise.control(t, y)
        } else {
            self.sweep.control(t, y)
        }
    }

    fn max_step(&self, t: f64) -> Option<f64> {
        if t >= self.sweep.t_start {
            self.sweep.max_step(t)
        } else {
            None
        }
    }

    fn breakpoint_after(&self, t: f64) -> Option<f64> {
        if t < self.sweep.t_start {
            Some(self.sweep.t_start)
        } else {
            self.sweep.breakpoint_after(t)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub law: PhasedLaw,
    /// Verified closed-loop run from `y0` to the target.
    pub trajectory: Trajectory,
    pub arrival_time: f64,
    pub params: SynthesisParams,
}

/// Synthesizes and verifies a control with absolute speed slack `delta`.
pub fn synthesize_control(
    system: &ControlSystem,
    body: &ConvexBody,
    y0: &Vector,
    y1: &Vector,
    solver: &SolverConfig,
    delta: f64,
    cfg: &SynthesisConfig,
) -> Result<Synthesis, SynthesisError> {
    let upstream = min_time_codim1(system, body, y0, y1, solver)?;
    synthesize_from(system, body, y0, y1, &upstream, solver, delta, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub delta: f64,
    pub arrival_time: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EmpiricalResult {
    pub best_time: f64,
    pub best_delta: f64,
    pub best: Synthesis,
    pub runs: Vec<RunSummary>,
}

/// Runs the synthesis for every slack in the schedule (in parallel) and keeps
/// the fastest verified arrival.
pub fn empirical_min_time(
    system: &ControlSystem,
    body: &ConvexBody,
    y0: &Vector,
    y1: &Vector,
    solver: &SolverConfig,
    cfg: &SynthesisConfig,
) -> Result<EmpiricalResult, SynthesisError> {
    let upstream = min_time_codim1(system, body, y0, y1, solver)?;
    if upstream.status != TimeStatus::Finite {
        return Err(SynthesisError::NotFinite {
            status: upstream.status,
        });
    }
    let mean_rate = if upstream.profile.is_empty() {
        0.0
    } else {
        upstream.profile.iter().map(|(_, s)| s).sum::<f64>() / upstream.profile.len() as f64
    };
    let outcomes: Vec<(f64, Result<Synthesis, SynthesisError>)> = cfg
        .delta_schedule
        .par_iter()
        .map(|&factor| {
            let delta = factor * mean_rate;
            (delta, synthesize_from(system, body, y0, y1, &upstream, solver, delta, cfg))
        })
        .collect();
    let mut runs = Vec::with_capacity(outcomes.len());
    let mut best: Option<(f64, Synthesis)> = None;
    for (delta, outcome) in outcomes {
        match outcome {
            Ok(s) => {
                runs.push(RunSummary {
                    delta,
                    arrival_time: Some(s.arrival_time),
                    error: None,
                });
                if best.as_ref().map_or(true, |(_, b)| s.arrival_time < b.arrival_time) {
                    best = Some((delta, s));
                }
            }
            Err(e) => runs.push(RunSummary {
                delta,
                arrival_time: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let (best_delta, best) = best.ok_or(SynthesisError::NoFeasibleRun { attempts: runs.len() })?;
    Ok(EmpiricalResult {
        best_time: best.arrival_time,
        best_delta,
        best,
        runs,
    })
}

struct Tables {
    start: f64,
    step: f64,
    targets: Vec<Vector>,
    slopes: Vec<Vector>,
}

#[allow(clippy::too_many_arguments)]
fn synthesize_from(
    system: &ControlSystem,
    body: &ConvexBody,
    y0: &Vector,
    y1: &Vector,
    upstream: &TimeResult,
    solver: &SolverConfig,
    delta: f64,
    cfg: &SynthesisConfig,
) -> Result<Synthesis, SynthesisError> {
    if system.slow_dim() != 1 {
        return Err(SynthesisError::NotCodimOne(system.slow_dim()));
    }
    let formula_time = match (upstream.status, upstream.time) {
        (TimeStatus::Finite, Some(t)) => t,
        (status, _) => return Err(SynthesisError::NotFinite { status }),
    };
    if upstream.min_rate.is_none() {
        return Err(SynthesisError::CoincidentProjections);
    }
    if !(delta > 0.0) || cfg.table_points < 3 {
        return Err(SynthesisError::InvalidConfig(format!(
            "need delta > 0 and at least 3 table points (delta = {delta}, table_points = {})",
            cfg.table_points
        )));
    }
    let segment = Segment::new(system, y0, y1, RateMode::CodimOne)?;
    let frame = Frame {
        origin: segment.start().clone(),
        direction: segment.direction().clone(),
        fast: system.range_basis().matrix(),
    };
    let length = segment.length();
    let drift = system.drift();

    let lipschitz = match drift.lipschitz_constant() {
        Some(l) => l,
        None => drift.empirical_lipschitz(body, 10_000, cfg.seed)?,
    };
    let diam = body.diameter();
    let max_drift = drift
        .max_norm_on(body, 4096, cfg.seed)?
        .max(drift.eval(y0)?.norm())
        .max(drift.eval(y1)?.norm());
    if !(max_drift > 0.0) {
        return Err(SynthesisError::Infeasible("drift vanishes on the body".into()));
    }
    let gain = cfg.fast_gain.unwrap_or(1e3 * max_drift / diam);
    let dt_limit = diam / (100.0 * max_drift);
    let dt = cfg.dt.unwrap_or(dt_limit.min(0.5 / gain));
    if !(gain > 0.0) || !(dt > 0.0) || dt > dt_limit * (1.0 + 1e-12) {
        return Err(SynthesisError::InvalidConfig(format!(
            "need fast_gain > 0 and 0 < dt ≤ diam/(100·max|F|) = {dt_limit:.3e} (fast_gain = {gain}, dt = {dt})"
        )));
    }
    let endpoint_tol = cfg.endpoint_tol.unwrap_or(1e-4 * diam);
    if !(endpoint_tol > 0.0) {
        return Err(SynthesisError::InvalidConfig("endpoint_tol must be positive".into()));
    }
    let sweep_steps = 100;
    let mut params = SynthesisParams {
        delta,
        inner_margin: delta / (lipschitz + 1.0),
        fast_gain: gain,
        dt,
        sweep_steps,
        sweep_duration: f64::NAN,
        endpoint_tol,
        max_drift,
        lipschitz,
    };

    let tables = build_tables(system, body, &segment, &frame, &params, solver, cfg.table_points, diam)?;
    let cruise = CruiseLaw {
        system: system.clone(),
        frame: frame.clone(),
        start: tables.start,
        step: tables.step,
        targets: tables.targets,
        slopes: tables.slopes,
        gain,
    };
    let table_end = cruise.start + cruise.step * (cruise.targets.len() - 1) as f64;
    let membership = |y: &Vector| body.contains(y);
    let blowup_radius = 10.0 * body.bounding_radius();

    // Cruise run, keeping every step as a candidate sweep start.
    let cruise_limit = 3.0 * formula_time + 1000.0 * dt;
    let mut checkpoints: Vec<(f64, Vector)> = vec![(0.0, y0.clone())];
    let mut crossing = None;
    {
        let (mut t, mut y) = (0.0, y0.clone());
        while t < cruise_limit {
            y = rk4_step(system, &cruise, t, &y, dt)?;
            t += dt;
            if y.norm() > blowup_radius || !membership(&y) {
                break;
            }
            checkpoints.push((t, y.clone()));
            let v = frame.arc(&y);
            if crossing.is_none() && v >= length {
                crossing = Some(checkpoints.len() - 1);
            }
            if v >= table_end || crossing.is_some_and(|c| checkpoints.len() > c + 4096) {
                break;
            }
        }
    }
    let crossing = crossing.ok_or_else(|| {
        SynthesisError::Infeasible(format!(
            "cruise did not reach the target slice within t = {cruise_limit:.4e}"
        ))
    })?;

    // A sweep from checkpoint k lasting tau ends exactly on the fast
    // coordinates of y1; the residual is the slow miss `v_end − L`.
    let w1 = frame.fast_coords(y1);
    let sweep_law = |k: usize, tau: f64| SweepLaw {
        system: system.clone(),
        frame: frame.clone(),
        t_start: checkpoints[k].0,
        duration: tau,
        w_start: frame.fast_coords(&checkpoints[k].1),
        w_end: w1.clone(),
        gain,
        steps: sweep_steps,
    };
    let miss = |k: usize, tau: f64| -> Result<Option<f64>, SynthesisError> {
        let law = sweep_law(k, tau);
        let opts = SimOptions {
            horizon: law.t_end(),
            dt,
            target: None,
            blowup_radius,
        };
        match simulate_from(system, &law, law.t_start, &checkpoints[k].1, &opts, &membership) {
            Ok(traj) if traj.feasible() => {
                let end = traj.final_state();
                let v_miss = frame.arc(end) - length;
                let w_miss = (frame.fast_coords(end) - &w1).norm();
                Ok((w_miss <= 0.1 * endpoint_tol).then_some(v_miss))
            }
            Ok(_) | Err(SimError::StepBlowup { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };
    // Shortest sweep from k that lands, found by a geometric scan of
    // durations followed by bisection on the first sign change.
    let (tau_min, tau_max) = (2.0 / gain, 200.0 / gain);
    let grid = 16;
    let close = 0.125 * endpoint_tol;
    let sweep_from = |k: usize| -> Result<Option<f64>, SynthesisError> {
        let ratio = (tau_max / tau_min).powf(1.0 / grid as f64);
        let Some(mut g_lo) = miss(k, tau_min)? else { return Ok(None) };
        let mut lo = tau_min;
        if g_lo.abs() <= close {
            return Ok(Some(lo));
        }
        for i in 1..=grid {
            let hi = tau_min * ratio.powi(i);
            let Some(g_hi) = miss(k, hi)? else { return Ok(None) };
            if g_hi.abs() <= close {
                return Ok(Some(hi));
            }
            if g_lo.signum() != g_hi.signum() {
                let (mut a, mut b) = (lo, hi);
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    let Some(g) = miss(k, mid)? else { return Ok(None) };
                    if g.abs() <= close {
                        return Ok(Some(mid));
                    }
                    if g.signum() == g_lo.signum() {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                return Ok(None);
            }
            lo = hi;
            g_lo = g_hi;
        }
        Ok(None)
    };
    let arrival = |k: usize| -> Result<Option<f64>, SynthesisError> {
        Ok(sweep_from(k)?.map(|tau| checkpoints[k].0 + tau))
    };

    // Scan starts at growing offsets around the crossing, then narrow the
    // bracket around the best one.
    let last = checkpoints.len() - 1;
    let mut scanned: Vec<(usize, Option<f64>)> = Vec::new();
    let mut offset = 0usize;
    let mut increment = 1usize;
    loop {
        let mut any = false;
        for k in [crossing.checked_sub(offset), Some(crossing + offset)].into_iter().flatten() {
            if k <= last && !scanned.iter().any(|(j, _)| *j == k) {
                any = true;
                scanned.push((k, arrival(k)?));
            }
        }
        if !any {
            break;
        }
        offset += increment;
        if offset >= 4 * increment {
            increment *= 2;
        }
    }
    scanned.sort_by_key(|(k, _)| *k);
    let best_of = |list: &[(usize, Option<f64>)]| {
        list.iter()
            .enumerate()
            .filter_map(|(i, (k, a))| a.map(|a| (i, *k, a)))
            .min_by(|x, y| x.2.total_cmp(&y.2))
    };
    let (mut pos, _, _) = best_of(&scanned)
        .ok_or_else(|| SynthesisError::Infeasible("no sweep start lands on the target".into()))?;
    loop {
        let lo = scanned[pos.saturating_sub(1)].0;
        let hi = scanned[(pos + 1).min(scanned.len() - 1)].0;
        let gap = hi - lo;
        if gap <= 2 {
            break;
        }
        let stride = (gap / 16).max(1);
        let mut fresh = false;
        for k in (lo..=hi).step_by(stride) {
            if !scanned.iter().any(|(j, _)| *j == k) {
                fresh = true;
                scanned.push((k, arrival(k)?));
            }
        }
        scanned.sort_by_key(|(k, _)| *k);
        pos = best_of(&scanned).expect("best entry persists").0;
        if !fresh && stride == 1 {
            break;
        }
        if !fresh {
            // Stride left some indices unscanned; fill the bracket densely.
            for k in lo..=hi {
                if !scanned.iter().any(|(j, _)| *j == k) {
                    scanned.push((k, arrival(k)?));
                }
            }
            scanned.sort_by_key(|(k, _)| *k);
            pos = best_of(&scanned).expect("best entry persists").0;
            break;
        }
    }
    let switch = scanned[pos].0;
    let tau = sweep_from(switch)?.expect("sweep start was verified");
    params.sweep_duration = tau;

    let sweep = sweep_law(switch, tau);
    let expected_arrival = sweep.t_end();
    let law = PhasedLaw { cruise, sweep };
    let opts = SimOptions {
        horizon: expected_arrival,
        dt,
        target: Some((y1.clone(), endpoint_tol)),
        blowup_radius,
    };
    let trajectory = simulate(system, &law, y0, &opts, &membership)?;
    if !trajectory.reached || !trajectory.feasible() {
        return Err(SynthesisError::Infeasible(format!(
            "verification run failed (reached: {}, feasible: {})",
            trajectory.reached,
            trajectory.feasible()
        )));
    }
    Ok(Synthesis {
        arrival_time: trajectory.final_time(),
        law,
        trajectory,
        params,
    })
}

/// Shrunk maximizer curve `w_target(v)` on a uniform grid that extends past
/// both ends of the segment while the slices stay nonempty.
#[allow(clippy::too_many_arguments)]
fn build_tables(
    system: &ControlSystem,
    body: &ConvexBody,
    segment: &Segment,
    frame: &Frame,
    params: &SynthesisParams,
    solver: &SolverConfig,
    points: usize,
    diam: f64,
) -> Result<Tables, SynthesisError> {
    let length = segment.length();
    let extension = |sign: f64| {
        let mut ext = 0.25 * length;
        for _ in 0..30 {
            let v = if sign > 0.0 { length + ext } else { -ext };
            if rate_at(system, body, segment, v, &solver.rate).is_ok() {
                return ext;
            }
            ext *= 0.5;
        }
        0.0
    };
    let (before, after) = (extension(-1.0), extension(1.0));
    let start = -before;
    let step = (length + before + after) / (points - 1) as f64;
    let position = |i: usize| start + step * i as f64;

    let shrunk_target = |v: f64| -> Result<(Vector, f64), SynthesisError> {
        let best = rate_at(system, body, segment, v, &solver.rate)?;
        let slice = segment.slice_at(v);
        let center = slice.point(&body.slice_center(&slice)?);
        let toward = &center - &best.argmax;
        let dist = toward.norm();
        let point = if dist <= params.inner_margin {
            center
        } else {
            &best.argmax + toward * (params.inner_margin / dist)
        };
        let speed = system.drift().eval(&point)?.dot(&frame.direction);
        Ok((point, speed))
    };
    let rows: Vec<(Vector, f64)> = (0..points)
        .into_par_iter()
        .map(|i| shrunk_target(position(i)))
        .collect::<Result<_, _>>()?;
    for (i, (point, speed)) in rows.iter().enumerate() {
        let v = position(i);
        if (0.0..=length).contains(&v) && (*speed <= 0.0 || !body.contains(point)) {
            return Err(SynthesisError::Infeasible(format!(
                "slack too large: speed {speed:.3e} at arc position {v:.6}"
            )));
        }
    }
    let targets: Vec<Vector> = rows.iter().map(|(p, _)| frame.fast_coords(p)).collect();

    // Intervals with a large change are either steep or a jump of the
    // maximizer; a midpoint probe tells them apart.
    let threshold = 1e-3 * diam;
    let slopes: Vec<Vector> = (0..points - 1)
        .into_par_iter()
        .map(|i| -> Result<Vector, SynthesisError> {
            let delta_w = &targets[i + 1] - &targets[i];
            let dw = delta_w.norm();
            if dw > threshold {
                let (mid, _) = shrunk_target(position(i) + 0.5 * step)?;
                let linear = (&targets[i] + &targets[i + 1]) * 0.5;
                if (frame.fast_coords(&mid) - linear).norm() > 0.25 * dw {
                    return Ok(Vector::zeros(delta_w.len()));
                }
            }
            Ok(delta_w / step)
        })
        .collect::<Result<_, _>>()?;
    Ok(Tables {
        start,
        step,
        targets,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftField;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_row_slice(&[a, b])
    }

    fn mascot() -> (ControlSystem, ConvexBody) {
        let a = Matrix::from_row_slice(2, 2, &[-2.0, 3.0, -2.0, 1.0]);
        let sys = ControlSystem::new(DriftField::linear(a), Matrix::from_row_slice(2, 1, &[1.0, 1.0])).unwrap();
        let body = ConvexBody::new_box(Vector::from_element(2, -1.0), Vector::from_element(2, 1.0)).unwrap();
        (sys, body)
    }

    #[test]
    fn mascot_run_brackets_the_formula_time() {
        let (sys, body) = mascot();
        let (y0, y1) = (v2(0.7, -0.5), v2(-0.5, 0.3));
        let solver = SolverConfig::default();
        let exact = 0.6 + 0.5 * 5.0_f64.ln();
        let s = synthesize_control(&sys, &body, &y0, &y1, &solver, 0.05, &SynthesisConfig::default()).unwrap();
        assert!(s.trajectory.reached && s.trajectory.feasible());
        assert!(s.trajectory.terminal_error.unwrap() <= s.params.endpoint_tol);
        assert!(s.arrival_time >= exact * (1.0 - 1e-3), "{} < {exact}", s.arrival_time);
        assert!(s.arrival_time <= exact * 1.05, "{} vs {exact}", s.arrival_time);
    }

    #[test]
    fn zero_drift_is_rejected_upstream() {
        let sys = ControlSystem::new(DriftField::linear(Matrix::zeros(2, 2)), Matrix::from_row_slice(2, 1, &[0.0, 1.0])).unwrap();
        let body = ConvexBody::new_box(Vector::from_element(2, -1.0), Vector::from_element(2, 1.0)).unwrap();
        let err = synthesize_control(&sys, &body, &v2(-0.5, 0.0), &v2(0.5, 0.0), &SolverConfig::default(), 0.1, &SynthesisConfig::default())
            .unwrap_err();
        assert!(matches!(err, SynthesisError::NotFinite { status: TimeStatus::Indeterminate }));
    }

    #[test]
    fn unreachable_pair_has_no_feasible_run() {
        let (sys, body) = mascot();
        let err = empirical_min_time(&sys, &body, &v2(0.7, -0.5), &v2(-0.6, 0.6), &SolverConfig::default(), &SynthesisConfig::default())
            .unwrap_err();
        assert!(matches!(err, SynthesisError::NotFinite { status: TimeStatus::Unreachable }));
    }
}
