//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use mintime::cli::{run, RunOptions};
use mintime::geometry::Basis;
use mintime::min_time::{min_time_codim1, min_time_lower_bound, travel_time_bound, SolverConfig, TimeStatus};
use mintime::quadrature::{integrate, QuadConfig};
use mintime::rate::{rate_at, RateBackend, RateConfig, RateMode, Segment};
use mintime::scenario::ScenarioError;
use mintime::simulate::{simulate, SimOptions};
use mintime::synthesis::{empirical_min_time, SynthesisConfig};
use mintime::{ConvexBody, ControlSystem, DriftField, Matrix, Vector};

type Outcome = (bool, String);

/// Rustic example: time, the three branch integrals and runtime.
fn criterion_1() -> Outcome {
    let sc = load("rustic");
    let body = sc.body.convex().unwrap();
    let started = Instant::now();
    let r = min_time_codim1(&sc.system, body, &sc.y0, &sc.y1, &sc.solver).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let time = r.time.unwrap_or(f64::NAN);

    // The segment starts at κ = −4 along e1, so v = κ + 4.
    let segment = Segment::new(&sc.system, &sc.y0, &sc.y1, RateMode::CodimOne).unwrap();
    let cfg = RateConfig::default();
    let quad = QuadConfig::with_rel_tol(1e-11);
    let branch = |a: f64, b: f64| {
        integrate(|k| 1.0 / rate_at(&sc.system, body, &segment, k + 4.0, &cfg).unwrap().rate, a, b, &quad)
            .unwrap()
            .value
    };
    let (left, middle, right) = (branch(-4.0, -3.0), branch(-3.0, 3.0), branch(3.0, 4.0));

    // Side check: the printed integrand (10 − κ)²/r⁴ through the same quadrature.
    let printed = |k: f64| {
        let top = (25.0 - k * k).sqrt();
        let r2 = (10.0 - k).powi(2) + (4.0 - top).powi(2);
        r2 * r2 / (10.0 - k).powi(2)
    };
    let printed_left = integrate(printed, -4.0, -3.0, &quad).unwrap().value;
    let printed_right = integrate(printed, 3.0, 4.0, &quad).unwrap().value;

    let checks = [
        r.status == TimeStatus::Finite,
        (time - 843.8209).abs() <= 0.01,
        (left - 182.9087).abs() <= 0.001,
        rel_err(middle, 618.0) <= 1e-6,
        (right - 42.9122).abs() <= 0.001,
        elapsed < 5.0,
    ];
    (
        checks.iter().all(|&c| c),
        format!(
            "status {:?}, time {time:.6} (want 843.8209 ± 0.01), branches {left:.6} / {middle:.9} / {right:.6} \
             (want 182.9087 / 618 / 42.9122), printed-integrand branches {printed_left:.6} / {printed_right:.6}, {elapsed:.3}s",
            r.status
        ),
    )
}

/// Mascot square: closed-form rate, classification, printed constant and sandwich.
fn criterion_2() -> Outcome {
    let (sys, body) = mascot();
    let (y0, y1, y2) = (v(&[0.7, -0.5]), v(&[-0.5, 0.3]), v(&[-0.6, 0.6]));
    let segment = Segment::new(&sys, &y0, &y1, RateMode::CodimOne).unwrap();
    let cfg = RateConfig::default();
    // h(κ) = (κ, −κ) sits at arc position √2(0.6 − κ).
    let mut worst_printed = 0.0_f64;
    let mut worst_half = 0.0_f64;
    for k in [-0.55, -0.4, 0.0, 0.6] {
        let s = rate_at(&sys, &body, &segment, 2f64.sqrt() * (0.6 - k), &cfg).unwrap().rate;
        let closed = 2.0 * 2f64.sqrt() * (k + 1.0 - f64::abs(k));
        worst_printed = worst_printed.max((s - closed).abs());
        worst_half = worst_half.max((s - 0.5 * closed).abs());
    }
    let solver = SolverConfig::default();
    let finite = min_time_codim1(&sys, &body, &y0, &y1, &solver).unwrap();
    let unreachable = min_time_codim1(&sys, &body, &y0, &y2, &solver).unwrap();
    let t = finite.time.unwrap_or(f64::NAN);
    let printed = (0.6 + 5f64.ln()) / (2.0 * 2f64.sqrt());
    let best = empirical_min_time(&sys, &body, &y0, &y1, &solver, &SynthesisConfig::default())
        .map(|e| e.best_time)
        .unwrap_or(f64::NAN);
    let checks = [
        worst_printed <= 1e-8,
        unreachable.status == TimeStatus::Unreachable,
        finite.status == TimeStatus::Finite,
        best >= t * (1.0 - 1e-3),
    ];
    (
        checks.iter().all(|&c| c),
        format!(
            "closed form 2√2(κ+1−|κ|) max dev {worst_printed:.3e} (half of it: {worst_half:.3e}), \
             y2 {:?}, y1 {:?}, printed constant {printed:.6}, arc-length time {t:.9}, best simulated {best:.6}",
            unreachable.status, finite.status
        ),
    )
}

/// 3-D ellipsoid: closed-form rate on 32 points and a fixed-grid oracle of the time.
fn criterion_3() -> Outcome {
    let sc = load("ellipsoid3d");
    let body = sc.body.convex().unwrap();
    let closed = |k: f64| -0.1 * k + 14.0 * (1.0 - k * k / 16.0).sqrt();
    let segment = Segment::new(&sc.system, &sc.y0, &sc.y1, RateMode::CodimOne).unwrap();
    let mut worst = 0.0_f64;
    for i in 0..32 {
        let k = -1.0 + 2.0 * i as f64 / 31.0;
        let s = rate_at(&sc.system, body, &segment, k + 1.0, &sc.solver.rate).unwrap().rate;
        worst = worst.max((s - closed(k)).abs());
    }
    let started = Instant::now();
    let r = min_time_codim1(&sc.system, body, &sc.y0, &sc.y1, &sc.solver).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let time = r.time.unwrap_or(f64::NAN);
    let oracle = simpson(|k| 1.0 / closed(k), -1.0, 1.0, 10_000);
    let err = rel_err(time, oracle);
    (
        worst <= 1e-8 && err <= 1e-6 && elapsed < 2.0,
        format!("rate max dev {worst:.3e}, time {time:.12} vs oracle {oracle:.12} (rel {err:.2e}), {elapsed:.3}s"),
    )
}

/// Rotation in a thin box: bound 1/C and randomized controls never beat it.
fn criterion_4() -> Outcome {
    let sc = load("rotation");
    let body = sc.body.convex().unwrap();
    let lb = min_time_lower_bound(&sc.system, body, &sc.y0, &sc.y1, &sc.solver).unwrap();
    let tol = 1e-4 * body.diameter();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut reached, mut fastest) = (0, f64::INFINITY);
    for _ in 0..50 {
        let level: f64 = rng.random_range(0.2..0.49);
        let gain: f64 = rng.random_range(20.0..200.0);
        // Hold y1 at `level` until the momentum y1/K would carry y2 to 1.
        let law = move |_t: f64, y: &Vector| {
            let aim = if y[1] + y[0] / gain >= 1.0 { 0.0 } else { level };
            Vector::from_element(1, y[1] + gain * (aim - y[0]))
        };
        let opts = SimOptions {
            horizon: 10.0,
            dt: 1e-4,
            target: Some((sc.y1.clone(), tol)),
            blowup_radius: 100.0,
        };
        let traj = simulate(&sc.system, &law, &sc.y0, &opts, &|y| body.contains(y)).unwrap();
        if traj.reached && traj.feasible() {
            reached += 1;
            fastest = fastest.min(traj.final_time());
        }
    }
    let ok = !lb.infinite && (lb.bound - 2.0).abs() <= 1e-6 && reached > 0 && fastest >= 2.0 - 1e-3;
    (ok, format!("bound {:.12}, {reached}/50 runs reached, fastest {fastest:.6}", lb.bound))
}

/// Counterexample: finite lower bound, yet randomized attempts stay trapped.
fn criterion_5() -> Outcome {
    let sc = load("counterexample");
    let body = sc.body.convex().unwrap();
    let lb = min_time_lower_bound(&sc.system, body, &sc.y0, &sc.y1, &sc.solver).unwrap();
    let tol = 1e-4 * body.diameter();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut hits, mut trap_ok) = (0, 0);
    for attempt in 0..200 {
        let traj = if attempt % 2 == 0 {
            // Piecewise-constant vertical speed.
            let pieces: Vec<(f64, f64)> = (0..12).map(|_| (rng.random_range(0.05..0.8), rng.random_range(-3.0..3.0))).collect();
            let law = move |t: f64, _y: &Vector| {
                let mut start = 0.0;
                for &(len, u) in &pieces {
                    if t < start + len {
                        return Vector::from_element(1, u);
                    }
                    start += len;
                }
                Vector::from_element(1, 0.0)
            };
            run_attempt(&sc.system, body, &sc.y0, &sc.y1, tol, &law)
        } else {
            // Ride the upper segment, then drop to the lower one.
            let wait: f64 = rng.random_range(0.0..4.0);
            let gain: f64 = rng.random_range(5.0..200.0);
            let law = move |t: f64, y: &Vector| Vector::from_element(1, if t < wait { 0.0 } else { -gain * y[2] });
            run_attempt(&sc.system, body, &sc.y0, &sc.y1, tol, &law)
        };
        hits += usize::from(traj.reached);
        let monotone = traj.states.windows(2).all(|w| w[1][1] >= w[0][1] - 1e-12);
        let positive_sticks = traj
            .states
            .iter()
            .skip_while(|s| s[1] <= 0.0)
            .all(|s| s[1] > 0.0);
        trap_ok += usize::from(monotone && positive_sticks);
    }
    let ok = !lb.infinite && lb.bound <= 2.0 + 1e-3 && hits == 0 && trap_ok == 200;
    (
        ok,
        format!("lower bound {:.9}, {hits}/200 attempts reached, trap verified on {trap_ok}/200", lb.bound),
    )
}

fn run_attempt(
    system: &ControlSystem,
    body: &ConvexBody,
    y0: &Vector,
    y1: &Vector,
    tol: f64,
    law: &(dyn Fn(f64, &Vector) -> Vector + Sync),
) -> mintime::Trajectory {
    let opts = SimOptions {
        horizon: 6.0,
        dt: 2e-3,
        target: Some((y1.clone(), tol)),
        blowup_radius: 100.0,
    };
    simulate(system, &law, y0, &opts, &|y| body.contains(y)).unwrap()
}

/// Travel-time bound against RK4 hitting times for random piecewise-linear rates.
fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let m: f64 = rng.random_range(0.5..5.0);
        let pieces = rng.random_range(2..8);
        let mut knots: Vec<f64> = (0..pieces - 1).map(|_| rng.random_range(0.0..m)).collect();
        knots.push(0.0);
        knots.push(m);
        knots.sort_by(f64::total_cmp);
        let values: Vec<f64> = knots.iter().map(|_| rng.random_range(0.2..3.0)).collect();
        let g = piecewise_linear(knots, values);
        let bound = travel_time_bound(&g, m, &QuadConfig::with_rel_tol(1e-10)).unwrap().value;
        let hit = rk4_hitting_time(&g, m, bound / 20_000.0);
        worst = worst.max(rel_err(hit, bound));
    }
    (worst <= 1e-4, format!("20 rates, worst relative gap {worst:.3e}"))
}

/// Compact versions of the property suites.
fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut notes = Vec::new();

    let mut proj = 0.0_f64;
    for _ in 0..200 {
        let n = rng.random_range(2..7);
        let k = rng.random_range(0..=n);
        let vectors: Vec<Vector> = (0..k).map(|_| Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).collect();
        let g = Basis::orthonormalize(n, &vectors);
        let y = Vector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let p = g.project(&y);
        proj = proj.max((g.project(&p) - &p).norm());
        proj = proj.max((&p + g.complement().project(&y) - &y).norm());
    }
    notes.push(format!("projection {proj:.1e}"));
    let projection_ok = proj <= 1e-12;

    let mut backend = 0.0_f64;
    for q in 0..100 {
        let (sys, body, y0, y1) = random_linear_case(&mut rng, q % 2 == 0);
        let mode = if q % 3 == 0 { RateMode::LowerBound } else { RateMode::CodimOne };
        let segment = Segment::new(&sys, &y0, &y1, mode).unwrap();
        let at = rng.random_range(0.0..=segment.length());
        let exact = rate_at(&sys, &body, &segment, at, &RateConfig::default().with_backend(RateBackend::Exact)).unwrap();
        let generic = rate_at(&sys, &body, &segment, at, &RateConfig::with_seed(q).with_backend(RateBackend::Generic)).unwrap();
        backend = backend.max((generic.rate - exact.rate).abs() / exact.rate.abs().max(1.0));
    }
    notes.push(format!("backend {backend:.1e}"));
    let backend_ok = backend <= 1e-6;

    let (sys, small) = mascot();
    let large = ConvexBody::new_box(Vector::from_element(2, -1.3), Vector::from_element(2, 1.3)).unwrap();
    let solver = SolverConfig::default();
    let mut nested_ok = true;
    let mut compared = 0;
    for _ in 0..20 {
        let y0 = Vector::from_fn(2, |_, _| rng.random_range(-0.9..0.9));
        let y1 = Vector::from_fn(2, |_, _| rng.random_range(-0.9..0.9));
        let a = min_time_codim1(&sys, &small, &y0, &y1, &solver).unwrap();
        let b = min_time_codim1(&sys, &large, &y0, &y1, &solver).unwrap();
        if let (TimeStatus::Finite, Some(ta)) = (a.status, a.time) {
            compared += 1;
            nested_ok &= b.status == TimeStatus::Finite && b.time.unwrap() <= ta * (1.0 + solver.quad_tol);
        }
    }
    notes.push(format!("nested boxes {compared} finite pairs"));
    nested_ok &= compared > 0;

    let mut sandwich_ok = true;
    for name in ["mascot", "rustic", "ellipsoid3d", "rotation"] {
        let sc = load(name);
        let body = sc.body.convex().unwrap();
        let t = min_time_codim1(&sc.system, body, &sc.y0, &sc.y1, &sc.solver).unwrap().time.unwrap();
        let best = empirical_min_time(&sc.system, body, &sc.y0, &sc.y1, &sc.solver, &sc.synthesis)
            .map(|e| e.best_time)
            .unwrap_or(f64::NAN);
        sandwich_ok &= best >= t * (1.0 - 1e-3);
        notes.push(format!("{name} T {t:.6} ≤ {best:.6}"));
    }

    let ratio = rk4_order_ratio();
    notes.push(format!("RK4 ratio {ratio:.2}"));

    let dir = tempfile::tempdir().unwrap();
    let bytes = |sub: &str| {
        let out = dir.path().join(sub);
        let opts = RunOptions {
            scenario: scenario_path("mascot"),
            out: out.clone(),
            verify: true,
            ..Default::default()
        };
        run(&opts).unwrap();
        std::fs::read(out.join("result.json")).unwrap()
    };
    let deterministic = bytes("a") == bytes("b");
    notes.push(format!("determinism {deterministic}"));

    (
        projection_ok && backend_ok && nested_ok && sandwich_ok && ratio >= 12.0 && deterministic,
        notes.join(", "),
    )
}

fn random_linear_case(rng: &mut ChaCha8Rng, ellipsoid: bool) -> (ControlSystem, ConvexBody, Vector, Vector) {
    let n = rng.random_range(2..5);
    let m = rng.random_range(1..n);
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
    let b = Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    let sys = ControlSystem::new(DriftField::linear(a), b).unwrap();
    let body = if ellipsoid {
        let diag = Vector::from_fn(n, |_, _| rng.random_range(0.3..2.0));
        ConvexBody::new_ellipsoid(Vector::zeros(n), Matrix::from_diagonal(&diag)).unwrap()
    } else {
        let lower = Vector::from_fn(n, |_, _| rng.random_range(-2.0..-0.5));
        let upper = Vector::from_fn(n, |_, _| rng.random_range(0.5..2.0));
        ConvexBody::new_box(lower, upper).unwrap()
    };
    let point = |rng: &mut ChaCha8Rng| loop {
        let y = Vector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
        if body.is_interior(&y, 1e-3) {
            return y;
        }
    };
    let y0 = point(rng);
    let mut y1 = point(rng);
    while (sys.slow_basis().project(&(&y1 - &y0))).norm() < 1e-3 {
        y1 = point(rng);
    }
    (sys, body, y0, y1)
}

/// Endpoint error ratio on the free rotation when the step is halved.
fn rk4_order_ratio() -> f64 {
    let sys = rotation();
    let y0 = v(&[1.0, 0.0]);
    let zero = |_: f64, _: &Vector| Vector::zeros(1);
    let err = |steps: usize| {
        let tau = std::f64::consts::TAU;
        let opts = SimOptions {
            horizon: tau,
            dt: tau / steps as f64,
            target: None,
            blowup_radius: 10.0,
        };
        let traj = simulate(&sys, &zero, &y0, &opts, &|_| true).unwrap();
        (traj.final_state() - &y0).norm()
    };
    err(40) / err(80)
}

/// Annulus: rejected by the time and bound computations, simulated by raw membership.
fn criterion_8() -> Outcome {
    let sc = load("annulus");
    let rejected = matches!(sc.body.convex(), Err(ScenarioError::NonConvexBody(_)));
    let cli = run(&RunOptions {
        scenario: scenario_path("annulus"),
        out: tempfile::tempdir().unwrap().path().to_path_buf(),
        ..Default::default()
    });
    let cli_rejects = matches!(&cli, Err(e) if e.exit_code() == 1 && e.to_string().contains("convex"));

    // Straight line (−1 + t, 3 − 3t) enters the hole when 10(1 − t)² = 4.
    let dt = 1e-3;
    let law = |_: f64, _: &Vector| Vector::from_element(1, -3.0);
    let opts = SimOptions {
        horizon: 2.0,
        dt,
        target: None,
        blowup_radius: 100.0,
    };
    let traj = simulate(&sc.system, &law, &sc.y0, &opts, &|y| sc.body.contains(y)).unwrap();
    let exit = traj.final_time();
    let expected = 1.0 - 0.4f64.sqrt();
    let exits_on_time = !traj.feasible() && exit >= expected && exit - expected <= dt;
    (
        rejected && cli_rejects && exits_on_time,
        format!("rejected {rejected}, cli rejects {cli_rejects}, first infeasible sample t = {exit:.6} (boundary {expected:.6})"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("rustic attraction", criterion_1),
        ("mascot square", criterion_2),
        ("3-D ellipsoid", criterion_3),
        ("rotation bound", criterion_4),
        ("lower bound below the time", criterion_5),
        ("travel-time oracle", criterion_6),
        ("property suites", criterion_7),
        ("annulus rejection", criterion_8),
    ];
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        all &= ok;
        println!("criterion {} ({name}): {} | {detail}", i + 1, verdict(ok));
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
