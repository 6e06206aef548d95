#![allow(dead_code)]

use std::path::PathBuf;

use mintime::scenario::Scenario;
use mintime::{ConvexBody, ControlSystem, DriftField, Matrix, Vector};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

pub fn load(name: &str) -> Scenario {
    Scenario::from_path(&scenario_path(name)).unwrap()
}

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

pub fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

pub fn mascot() -> (ControlSystem, ConvexBody) {
    let a = Matrix::from_row_slice(2, 2, &[-2.0, 3.0, -2.0, 1.0]);
    let sys = ControlSystem::new(DriftField::linear(a), Matrix::from_row_slice(2, 1, &[1.0, 1.0])).unwrap();
    (sys, unit_box(2))
}

pub fn rotation() -> ControlSystem {
    let a = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    ControlSystem::new(DriftField::linear(a), Matrix::from_row_slice(2, 1, &[1.0, 0.0])).unwrap()
}

pub fn unit_box(n: usize) -> ConvexBody {
    ConvexBody::new_box(Vector::from_element(n, -1.0), Vector::from_element(n, 1.0)).unwrap()
}

/// Composite Simpson rule with `intervals` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    assert!(intervals % 2 == 0);
    let h = (b - a) / intervals as f64;
    let mut sum = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

/// Hitting time of level `m` for `ḟ = g(f)`, `f(0) = 0`, by RK4 with step
/// `h` and a cubic Hermite solve on the last step.
pub fn rk4_hitting_time(g: impl Fn(f64) -> f64, m: f64, h: f64) -> f64 {
    let (mut t, mut f) = (0.0, 0.0);
    loop {
        let k1 = g(f);
        let k2 = g(f + 0.5 * h * k1);
        let k3 = g(f + 0.5 * h * k2);
        let k4 = g(f + h * k3);
        let next = f + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if next >= m {
            // Hermite interpolation on [t, t + h] with slopes g(f), g(next).
            let (d0, d1) = (g(f), g(next));
            let p = |s: f64| {
                let (s2, s3) = (s * s, s * s * s);
                (2.0 * s3 - 3.0 * s2 + 1.0) * f + (s3 - 2.0 * s2 + s) * h * d0 + (-2.0 * s3 + 3.0 * s2) * next + (s3 - s2) * h * d1
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if p(mid) < m {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return t + h * 0.5 * (lo + hi);
        }
        f = next;
        t += h;
    }
}

/// Positive piecewise-linear function through `(knots[i], values[i])`,
/// constant outside.
pub fn piecewise_linear(knots: Vec<f64>, values: Vec<f64>) -> impl Fn(f64) -> f64 {
    move |x| {
        if x <= knots[0] {
            return values[0];
        }
        for i in 1..knots.len() {
            if x <= knots[i] {
                let w = (x - knots[i - 1]) / (knots[i] - knots[i - 1]);
                return values[i - 1] * (1.0 - w) + values[i] * w;
            }
        }
        *values.last().unwrap()
    }
}
