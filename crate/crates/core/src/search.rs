//! Derivative-free searches: golden section on intervals and a multi-start
//! coordinate/line search over convex slices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{slice_extent_at, ConvexBody, GeometryError, Slice, Vector};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a unimodal `f` on `[a, b]` until the
/// bracket is narrower than `tol`. Returns `(x, f(x))`.
pub fn golden_section_max(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = sanitize(f(x1));
    let mut f2 = sanitize(f(x2));
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = sanitize(f(x1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = sanitize(f(x2));
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Golden-section minimization; see [`golden_section_max`].
pub fn golden_section_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_section_max(|t| -f(t), a, b, tol);
    (x, -v)
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Uniform grid of `samples ≥ 2` points on `[a, b]` followed by golden
/// refinement around the best sample. Endpoints are always evaluated.
pub fn line_maximize(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, samples: usize) -> (f64, f64) {
    let samples = samples.max(2);
    let step = (b - a) / (samples - 1) as f64;
    let grid: Vec<f64> = (0..samples)
        .map(|i| if i + 1 == samples { b } else { a + step * i as f64 })
        .collect();
    let values: Vec<f64> = grid.iter().map(|&t| sanitize(f(t))).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |bi, (i, &v)| if v > values[bi] { i } else { bi });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(samples - 1)];
    let tol = 1e-12 * (b - a).abs().max(1e-300);
    let (t, v) = golden_section_max(&mut f, lo, hi, tol);
    if v > values[best] {
        (t, v)
    } else {
        (grid[best], values[best])
    }
}

#[derive(Debug, Clone)]
pub struct MultiStartConfig {
    pub starts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    pub line_samples: usize,
    pub random_directions: usize,
}

impl Default for MultiStartConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            seed: 0,
            max_sweeps: 400,
            line_samples: 9,
            random_directions: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SliceMaximum {
    pub value: f64,
    /// Maximizer in slice coordinates.
    pub z: Vector,
}

/// Maximizes `objective` (evaluated on points of `R^n`) over the slice.
///
/// Starts from the slice center and from hit-and-run samples; each start runs
/// sweeps of chord line searches along the coordinate axes, a few random
/// directions and the previous sweep's displacement, plus gradient and
/// conditional-gradient moves. Heuristic: no global
/// certificate for non-concave objectives.
pub fn maximize_over_slice(
    objective: impl Fn(&Vector) -> f64,
    body: &ConvexBody,
    slice: &Slice,
    cfg: &MultiStartConfig,
) -> Result<SliceMaximum, GeometryError> {
    let k = slice.dim();
    let f = |z: &Vector| sanitize(objective(&slice.point(z)));
    if k == 0 {
        if !body.contains(&slice.anchor) {
            return Err(GeometryError::EmptySlice);
        }
        let z = Vector::zeros(0);
        return Ok(SliceMaximum { value: f(&z), z });
    }
    let center = body.slice_center(slice)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // A single chord covers a one-dimensional slice, so one dense start suffices.
    if k == 1 {
        let dir = Vector::from_element(1, 1.0);
        let (a, b) = slice_extent_at(body, slice, &center, &dir)?;
        let (t, value) = line_maximize(
            |t| f(&(&center + &dir * t)),
            a,
            b,
            4 * cfg.line_samples.max(2) - 3,
        );
        return Ok(SliceMaximum {
            value,
            z: &center + dir * t,
        });
    }

    let mut best: Option<SliceMaximum> = None;
    for start in 0..cfg.starts.max(1) {
        let mut z = center.clone();
        if start > 0 {
            for _ in 0..3 {
                let d = random_unit(k, &mut rng);
                let (a, b) = slice_extent_at(body, slice, &z, &d)?;
                if b > a {
                    z += &d * rng.random_range(a..=b);
                }
            }
        }
        let local = local_search(&f, body, slice, z, &center, cfg, &mut rng)?;
        if best.as_ref().map_or(true, |b| local.value > b.value) {
            best = Some(local);
        }
    }
    Ok(best.expect("at least one start"))
}

fn local_search(
    f: &impl Fn(&Vector) -> f64,
    body: &ConvexBody,
    slice: &Slice,
    mut z: Vector,
    center: &Vector,
    cfg: &MultiStartConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SliceMaximum, GeometryError> {
    let k = z.len();
    let fd_step = 1e-7 * body.bounding_radius();
    let mut fz = f(&z);
    let mut previous = z.clone();
    let mut stalls = 0;
    for _ in 0..cfg.max_sweeps {
        let sweep_start = z.clone();
        let f_start = fz;
        let mut dirs: Vec<Vector> = (0..k)
            .map(|i| Vector::from_fn(k, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        dirs.extend((0..cfg.random_directions).map(|_| random_unit(k, rng)));
        let pattern = &z - &previous;
        if pattern.norm() > 1e-14 {
            dirs.push(pattern.normalize());
        }
        for d in dirs {
            let (a, b) = slice_extent_at(body, slice, &z, &d)?;
            if b - a <= 1e-13 {
                continue;
            }
            let (t, ft) = line_maximize(|t| f(&(&z + &d * t)), a, b, cfg.line_samples);
            if ft > fz {
                z += &d * t;
                fz = ft;
            }
        }
        // Gradient moves from points pulled toward the center: chords through
        // a boundary point rarely improve, chords from inside do.
        let g = fd_gradient(f, &z, fd_step);
        if g.norm() > 0.0 && g.iter().all(|x| x.is_finite()) {
            let d = g.normalize();
            let mut best_move: Option<(Vector, f64)> = None;
            for pull in [0.0, 0.5, 0.9, 1.0] {
                let m = &z + (center - &z) * pull;
                let (a, b) = slice_extent_at(body, slice, &m, &d)?;
                if b - a <= 1e-13 {
                    continue;
                }
                let (t, ft) = line_maximize(|t| f(&(&m + &d * t)), a, b, cfg.line_samples);
                if ft > best_move.as_ref().map_or(fz, |(_, v)| *v) {
                    best_move = Some((&m + &d * t, ft));
                }
            }
            if let Some((zn, fv)) = best_move {
                z = zn;
                fz = fv;
            }
            // Conditional-gradient move toward the vertex the gradient
            // prefers; slides along faces where chords stall.
            let g = fd_gradient(f, &z, fd_step);
            if g.iter().all(|x| x.is_finite()) {
                let (_, vertex) = body.slice_support(slice, &g)?;
                let step = &vertex - &z;
                if step.norm() > 1e-14 {
                    let (t, ft) = line_maximize(|t| f(&(&z + &step * t)), 0.0, 1.0, cfg.line_samples);
                    let zn = &z + &step * t;
                    if ft > fz && body.contains(&slice.point(&zn)) {
                        z = zn;
                        fz = ft;
                    }
                }
            }
        }
        previous = sweep_start;
        if fz - f_start <= 1e-15 * (1.0 + fz.abs()) {
            stalls += 1;
            if stalls >= 4 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Ok(SliceMaximum { value: fz, z })
}

fn fd_gradient(f: &impl Fn(&Vector) -> f64, z: &Vector, h: f64) -> Vector {
    Vector::from_fn(z.len(), |i, _| {
        let mut plus = z.clone();
        let mut minus = z.clone();
        plus[i] += h;
        minus[i] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    })
}

fn random_unit(k: usize, rng: &mut impl Rng) -> Vector {
    loop {
        let d = Vector::from_fn(k, |_, _| rng.random_range(-1.0..=1.0));
        let n = d.norm();
        if n > 1e-3 && n <= 1.0 {
            return d / n;
        }
    }
}
