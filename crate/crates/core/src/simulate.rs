//! Closed-loop simulation with fixed-step RK4 and per-step membership checks.

use std::fmt::Write as _;

use thiserror::Error;

use crate::drift::DriftError;
use crate::geometry::Vector;
use crate::system::ControlSystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error("state norm {norm:.3e} exceeds the blow-up radius {limit:.3e} at t = {t}")]
    StepBlowup { t: f64, norm: f64, limit: f64 },
    #[error("invalid simulation setup: {0}")]
    InvalidSetup(String),
}

/// A state- and time-dependent control `u(t, y)`.
pub trait ControlLaw: Sync {
    fn control(&self, t: f64, y: &Vector) -> Result<Vector, DriftError>;

    /// Control at an RK4 stage of the step that started at `step_start`.
    fn stage_control(&self, _step_start: f64, t: f64, y: &Vector) -> Result<Vector, DriftError> {
        self.control(t, y)
    }

    /// Optional cap on the step starting at `t`.
    fn max_step(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Next time after `t` that a step must land on exactly.
    fn breakpoint_after(&self, _t: f64) -> Option<f64> {
        None
    }
}

impl<F> ControlLaw for F
where
    F: Fn(f64, &Vector) -> Vector + Sync,
{
    fn control(&self, t: f64, y: &Vector) -> Result<Vector, DriftError> {
        Ok(self(t, y))
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub horizon: f64,
    pub dt: f64,
    /// Stop as soon as `|y − target| ≤ tol`.
    pub target: Option<(Vector, f64)>,
    /// `|y|` above this aborts the run.
    pub blowup_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub controls: Vec<Vector>,
    pub inside: Vec<bool>,
    /// `|y(end) − target|` when a target was armed.
    pub terminal_error: Option<f64>,
    pub reached: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Every recorded state passed membership.
    pub fn feasible(&self) -> bool {
        self.inside.iter().all(|&b| b)
    }

    /// CSV with header `t,y1..yn,u1..um,inside`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.len());
        let m = self.controls.first().map_or(0, |u| u.len());
        let mut out = String::from("t");
        for i in 1..=n {
            write!(out, ",y{i}").unwrap();
        }
        for j in 1..=m {
            write!(out, ",u{j}").unwrap();
        }
        out.push_str(",inside\n");
        for k in 0..self.len() {
            write!(out, "{:.16e}", self.times[k]).unwrap();
            for v in self.states[k].iter().chain(self.controls[k].iter()) {
                write!(out, ",{v:.16e}").unwrap();
            }
            writeln!(out, ",{}", u8::from(self.inside[k])).unwrap();
        }
        out
    }
}

/// One classical RK4 step of `ẏ = F(y) + B u(t, y)`.
pub fn rk4_step(
    system: &ControlSystem,
    law: &dyn ControlLaw,
    t: f64,
    y: &Vector,
    h: f64,
) -> Result<Vector, DriftError> {
    let f = |stage: f64, y: &Vector| -> Result<Vector, DriftError> {
        let u = law.stage_control(t, stage, y)?;
        system.velocity(y, &u)
    };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    let k4 = f(t + h, &(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Integrates from `y0` at `t = 0` until the horizon, the first membership
/// failure (kept as the last sample), or arrival at the armed target.
pub fn simulate(
    system: &ControlSystem,
    law: &dyn ControlLaw,
    y0: &Vector,
    opts: &SimOptions,
    membership: &dyn Fn(&Vector) -> bool,
) -> Result<Trajectory, SimError> {
    simulate_from(system, law, 0.0, y0, opts, membership)
}

/// As [`simulate`], starting at time `t0`; the horizon is absolute.
pub fn simulate_from(
    system: &ControlSystem,
    law: &dyn ControlLaw,
    t0: f64,
    y0: &Vector,
    opts: &SimOptions,
    membership: &dyn Fn(&Vector) -> bool,
) -> Result<Trajectory, SimError> {
    if !(opts.dt > 0.0) || !(opts.horizon >= t0) {
        return Err(SimError::InvalidSetup(format!(
            "need dt > 0 and horizon ≥ start (dt = {}, horizon = {}, start = {t0})",
            opts.dt, opts.horizon
        )));
    }
    if y0.len() != system.n() {
        return Err(SimError::InvalidSetup(format!(
            "initial state has {} components, system has {}",
            y0.len(),
            system.n()
        )));
    }
    let distance = |y: &Vector| opts.target.as_ref().map(|(p, _)| (y - p).norm());
    let arrived = |y: &Vector| opts.target.as_ref().is_some_and(|(p, tol)| (y - p).norm() <= *tol);

    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![y0.clone()],
        controls: vec![law.control(t0, y0)?],
        inside: vec![membership(y0)],
        terminal_error: distance(y0),
        reached: false,
    };
    if !traj.inside[0] {
        return Ok(traj);
    }
    if arrived(y0) {
        traj.reached = true;
        return Ok(traj);
    }
    let mut t = t0;
    let mut y = y0.clone();
    let end_slack = 1e-12 * opts.horizon.abs().max(1.0);
    while opts.horizon - t > end_slack {
        let mut h = opts.dt.min(opts.horizon - t);
        if let Some(cap) = law.max_step(t) {
            if cap > 0.0 {
                h = h.min(cap);
            }
        }
        let mut next = t + h;
        if let Some(b) = law.breakpoint_after(t) {
            if b > t && next >= b - 1e-9 * h {
                h = b - t;
                next = b;
            }
        }
        if opts.horizon - next <= end_slack {
            next = opts.horizon;
        }
        y = rk4_step(system, law, t, &y, h)?;
        t = next;
        let norm = y.norm();
        if !norm.is_finite() || norm > opts.blowup_radius {
            return Err(SimError::StepBlowup {
                t,
                norm,
                limit: opts.blowup_radius,
            });
        }
        let inside = membership(&y);
        traj.times.push(t);
        traj.controls.push(law.control(t, &y)?);
        traj.inside.push(inside);
        traj.terminal_error = distance(&y);
        traj.states.push(y.clone());
        if !inside {
            break;
        }
        if arrived(&y) {
            traj.reached = true;
            break;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftField;
    use crate::geometry::Matrix;

    fn rotation() -> ControlSystem {
        let a = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        ControlSystem::new(DriftField::linear(a), Matrix::from_row_slice(2, 1, &[1.0, 0.0])).unwrap()
    }

    fn zero_control(_: f64, _: &Vector) -> Vector {
        Vector::zeros(1)
    }

    fn opts(horizon: f64, dt: f64) -> SimOptions {
        SimOptions {
            horizon,
            dt,
            target: None,
            blowup_radius: 100.0,
        }
    }

    #[test]
    fn rotation_returns_after_one_period() {
        let sys = rotation();
        let y0 = Vector::from_row_slice(&[1.0, 0.0]);
        let tau = std::f64::consts::TAU;
        let traj = simulate(&sys, &zero_control, &y0, &opts(tau, tau / 1000.0), &|_| true).unwrap();
        assert_eq!(traj.final_time(), tau);
        assert!((traj.final_state() - &y0).norm() < 1e-10);
        assert_eq!(traj.len(), 1001);
    }

    #[test]
    fn partial_last_step_lands_on_horizon() {
        let sys = rotation();
        let traj = simulate(&sys, &zero_control, &Vector::from_row_slice(&[1.0, 0.0]), &opts(1.0, 0.3), &|_| true).unwrap();
        assert_eq!(traj.times.len(), 5);
        assert_eq!(traj.final_time(), 1.0);
        assert!((traj.times[4] - traj.times[3] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_everything_stays_put() {
        let sys = ControlSystem::new(DriftField::linear(Matrix::zeros(2, 2)), Matrix::from_row_slice(2, 1, &[0.0, 1.0])).unwrap();
        let y0 = Vector::from_row_slice(&[0.3, -0.2]);
        let traj = simulate(&sys, &zero_control, &y0, &opts(1.0, 0.1), &|_| true).unwrap();
        assert!(traj.states.iter().all(|s| s == &y0));
    }

    #[test]
    fn halts_at_first_membership_failure_and_at_target() {
        let sys = rotation();
        let push = |_: f64, _: &Vector| Vector::from_element(1, 1.0);
        let traj = simulate(&sys, &push, &Vector::zeros(2), &opts(10.0, 0.01), &|y| y[0] <= 0.5).unwrap();
        assert!(!traj.feasible());
        assert!(!traj.inside.last().unwrap());
        assert_eq!(traj.inside.iter().filter(|b| !**b).count(), 1);

        let mut o = opts(10.0, 0.001);
        o.target = Some((Vector::from_row_slice(&[0.2, 0.0]), 0.05));
        let traj = simulate(&sys, &push, &Vector::zeros(2), &o, &|_| true).unwrap();
        assert!(traj.reached);
        assert!(traj.terminal_error.unwrap() <= 0.05);
    }

    #[test]
    fn blowup_is_reported() {
        let sys = rotation();
        let push = |_: f64, _: &Vector| Vector::from_element(1, 1e6);
        let err = simulate(&sys, &push, &Vector::zeros(2), &opts(1.0, 0.1), &|_| true).unwrap_err();
        assert!(matches!(err, SimError::StepBlowup { .. }));
    }

    #[test]
    fn csv_layout() {
        let sys = rotation();
        let traj = simulate(&sys, &zero_control, &Vector::from_row_slice(&[1.0, 0.0]), &opts(0.2, 0.1), &|_| true).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,y1,y2,u1,inside"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 5);
        assert_eq!(first[0], "0.0000000000000000e0");
        assert_eq!(first[4], "1");
    }
}
