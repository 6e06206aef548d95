//! Orthonormal bases, projections, convex constraint bodies and affine slices.
//!
//! A [`Slice`] is the set `{anchor + Q z : z ∈ R^k} ∩ C` where the columns of
//! `Q` form an orthonormal [`Basis`]. All slice queries work in the `z`
//! coordinates.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Absolute tolerance on the defining-inequality residuals of every body kind.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Residual norm below which Gram–Schmidt drops a vector.
pub const DEFLATION_TOL: f64 = 1e-10;
/// Bisection tolerance of [`slice_extent`].
pub const EXTENT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("slice anchor lies outside the body (residual {residual:.3e})")]
    AnchorOutside { residual: f64 },
    #[error("affine slice does not meet the body")]
    EmptySlice,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid body: {0}")]
    InvalidBody(String),
}

/// Ordered orthonormal vectors in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    ambient: usize,
    vectors: Vec<Vector>,
}

impl Basis {
    pub fn empty(ambient: usize) -> Self {
        Self {
            ambient,
            vectors: Vec::new(),
        }
    }

    pub fn standard(ambient: usize) -> Self {
        let vectors = (0..ambient)
            .map(|i| Vector::from_fn(ambient, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        Self { ambient, vectors }
    }

    /// Two-pass modified Gram–Schmidt. Vectors whose residual after deflation
    /// is below [`DEFLATION_TOL`] are dropped.
    pub fn orthonormalize(ambient: usize, vectors: &[Vector]) -> Self {
        let mut basis = Self::empty(ambient);
        for v in vectors {
            assert_eq!(v.len(), ambient, "vector dimension must match ambient space");
            basis.try_push(v);
        }
        basis
    }

    fn try_push(&mut self, v: &Vector) -> bool {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &self.vectors {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm > DEFLATION_TOL {
            self.vectors.push(w / norm);
            true
        } else {
            false
        }
    }

    /// Orthonormal basis of the column space of `m`.
    pub fn column_space(m: &Matrix) -> Self {
        let cols: Vec<Vector> = m.column_iter().map(|c| c.into_owned()).collect();
        Self::orthonormalize(m.nrows(), &cols)
    }

    /// Orthonormal basis of the orthogonal complement of `self` in `R^n`.
    pub fn complement(&self) -> Self {
        let mut work = self.clone();
        let start = work.dim();
        for e in Self::standard(self.ambient).vectors {
            if work.dim() == self.ambient {
                break;
            }
            work.try_push(&e);
        }
        Self {
            ambient: self.ambient,
            vectors: work.vectors.split_off(start),
        }
    }

    /// Orthonormal basis of `span(self) + span(other)`; `self` comes first.
    pub fn join(&self, other: &Basis) -> Self {
        let mut out = self.clone();
        for v in &other.vectors {
            out.try_push(v);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn vectors(&self) -> &[Vector] {
        &self.vectors
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `n × k` matrix whose columns are the basis vectors.
    pub fn matrix(&self) -> Matrix {
        if self.vectors.is_empty() {
            return Matrix::zeros(self.ambient, 0);
        }
        Matrix::from_columns(&self.vectors)
    }

    /// Coordinates `Qᵀ y`.
    pub fn coordinates(&self, y: &Vector) -> Vector {
        Vector::from_iterator(self.dim(), self.vectors.iter().map(|q| q.dot(y)))
    }

    /// `Q z`.
    pub fn lift(&self, z: &Vector) -> Vector {
        let mut out = Vector::zeros(self.ambient);
        for (q, &c) in self.vectors.iter().zip(z.iter()) {
            out.axpy(c, q, 1.0);
        }
        out
    }

    /// Orthogonal projection onto the span.
    pub fn project(&self, y: &Vector) -> Vector {
        self.lift(&self.coordinates(y))
    }
}

/// Spec-named free functions.
pub fn orthonormalize(ambient: usize, vectors: &[Vector]) -> Basis {
    Basis::orthonormalize(ambient, vectors)
}

pub fn complement_basis(range_basis: &Basis) -> Basis {
    range_basis.complement()
}

pub fn project(y: &Vector, onto: &Basis) -> Vector {
    onto.project(y)
}

#[derive(Debug, Clone)]
pub enum BodyKind {
    /// Axis-aligned box `lower ≤ x ≤ upper`.
    Box { lower: Vector, upper: Vector },
    /// `{x : (x − center)ᵀ shape (x − center) ≤ 1}` with `shape` positive definite.
    Ellipsoid { center: Vector, shape: Matrix },
    /// `{x : ⟨normal_i, x⟩ ≤ offset_i}`; normals are stored with unit length.
    Polytope { normals: Vec<Vector>, offsets: Vec<f64> },
}

/// A bounded convex body with nonempty interior.
#[derive(Debug, Clone)]
pub struct ConvexBody {
    kind: BodyKind,
    dim: usize,
    bounding_radius: f64,
    witness: Vector,
}

impl ConvexBody {
    pub fn new_box(lower: Vector, upper: Vector) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l < u)) {
            return Err(GeometryError::InvalidBody(
                "box needs lower < upper on every axis".into(),
            ));
        }
        let radius = lower
            .iter()
            .zip(upper.iter())
            .map(|(l, u)| l.abs().max(u.abs()).powi(2))
            .sum::<f64>()
            .sqrt();
        let witness = (&lower + &upper) * 0.5;
        Ok(Self::assemble(BodyKind::Box { lower, upper }, radius, witness))
    }

    pub fn new_ellipsoid(center: Vector, shape: Matrix) -> Result<Self, GeometryError> {
        let n = center.len();
        if shape.nrows() != n || shape.ncols() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                found: shape.nrows(),
            });
        }
        if (&shape - shape.transpose()).amax() > 1e-12 * shape.amax().max(1.0) {
            return Err(GeometryError::InvalidBody("ellipsoid shape must be symmetric".into()));
        }
        let eig = shape.clone().symmetric_eigen();
        let lambda_min = eig.eigenvalues.min();
        if !(lambda_min > 0.0) {
            return Err(GeometryError::InvalidBody(
                "ellipsoid shape must be positive definite".into(),
            ));
        }
        let radius = center.norm() + 1.0 / lambda_min.sqrt();
        let witness = center.clone();
        Ok(Self::assemble(BodyKind::Ellipsoid { center, shape }, radius, witness))
    }

    /// Ball of the given radius; stored as an ellipsoid.
    pub fn new_ball(center: Vector, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::InvalidBody("ball radius must be positive".into()));
        }
        let n = center.len();
        Self::new_ellipsoid(center, Matrix::identity(n, n) / (radius * radius))
    }

    pub fn new_polytope(normals: Vec<Vector>, offsets: Vec<f64>) -> Result<Self, GeometryError> {
        if normals.is_empty() || normals.len() != offsets.len() {
            return Err(GeometryError::InvalidBody(
                "polytope needs one offset per normal".into(),
            ));
        }
        let n = normals[0].len();
        let mut unit_normals = Vec::with_capacity(normals.len());
        let mut unit_offsets = Vec::with_capacity(normals.len());
        for (a, b) in normals.iter().zip(offsets.iter()) {
            if a.len() != n {
                return Err(GeometryError::DimensionMismatch {
                    expected: n,
                    found: a.len(),
                });
            }
            let norm = a.norm();
            if norm == 0.0 {
                return Err(GeometryError::InvalidBody("zero halfspace normal".into()));
            }
            unit_normals.push(a / norm);
            unit_offsets.push(b / norm);
        }
        if !polytope_is_bounded(&unit_normals) {
            return Err(GeometryError::InvalidBody("polytope is unbounded".into()));
        }
        let rows: Vec<(Vector, f64)> = unit_normals
            .iter()
            .cloned()
            .zip(unit_offsets.iter().copied())
            .collect();
        let vertices = enumerate_vertices(&rows, n);
        if vertices.is_empty() {
            return Err(GeometryError::InvalidBody("polytope is empty".into()));
        }
        let radius = vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let witness = centroid(&vertices);
        let slack = rows
            .iter()
            .map(|(a, b)| b - a.dot(&witness))
            .fold(f64::INFINITY, f64::min);
        if slack <= MEMBERSHIP_TOL {
            return Err(GeometryError::InvalidBody("polytope has empty interior".into()));
        }
        Ok(Self::assemble(
            BodyKind::Polytope {
                normals: unit_normals,
                offsets: unit_offsets,
            },
            radius,
            witness,
        ))
    }

    fn assemble(kind: BodyKind, radius: f64, witness: Vector) -> Self {
        let dim = witness.len();
        Self {
            kind,
            dim,
            // Slack so that points passing the tolerant membership test stay inside.
            bounding_radius: radius * (1.0 + 1e-9) + 1e-9,
            witness,
        }
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    /// A point strictly inside the body.
    pub fn interior_witness(&self) -> &Vector {
        &self.witness
    }

    /// Default strict-interior margin, `1e-8 · bounding_radius`.
    pub fn default_interior_margin(&self) -> f64 {
        1e-8 * self.bounding_radius
    }

    /// Largest violation of the defining inequalities (≤ 0 inside).
    pub fn residual(&self, x: &Vector) -> f64 {
        match &self.kind {
            BodyKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .map(|(xi, (l, u))| (l - xi).max(xi - u))
                .fold(f64::NEG_INFINITY, f64::max),
            BodyKind::Ellipsoid { center, shape } => {
                let p = x - center;
                p.dot(&(shape * &p)) - 1.0
            }
            BodyKind::Polytope { normals, offsets } => normals
                .iter()
                .zip(offsets.iter())
                .map(|(a, b)| a.dot(x) - b)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.residual(x) <= MEMBERSHIP_TOL
    }

    pub fn contains_strict(&self, x: &Vector) -> bool {
        self.residual(x) < 0.0
    }

    /// Strict-interior test: `x` and the `2n` probes `x ± margin·e_i` all pass
    /// strict membership.
    pub fn is_interior(&self, x: &Vector, margin: f64) -> bool {
        if !self.contains_strict(x) {
            return false;
        }
        for i in 0..self.dim {
            for sign in [-1.0, 1.0] {
                let mut probe = x.clone();
                probe[i] += sign * margin;
                if !self.contains_strict(&probe) {
                    return false;
                }
            }
        }
        true
    }

    /// Diameter upper bound used for step-size heuristics.
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            BodyKind::Box { lower, upper } => (upper - lower).norm(),
            BodyKind::Ellipsoid { shape, .. } => {
                2.0 / shape.clone().symmetric_eigen().eigenvalues.min().sqrt()
            }
            BodyKind::Polytope { .. } => 2.0 * self.bounding_radius,
        }
    }

    /// Halfspaces of the slice in slice coordinates, `g·z ≤ c`. `None` for
    /// ellipsoids. Rows with a vanishing `g` are folded into a feasibility check.
    fn slice_rows(&self, slice: &Slice) -> Option<Result<Vec<(Vector, f64)>, GeometryError>> {
        let rows: Vec<(Vector, f64)> = match &self.kind {
            BodyKind::Box { lower, upper } => {
                let mut rows = Vec::with_capacity(2 * self.dim);
                for i in 0..self.dim {
                    let mut e = Vector::zeros(self.dim);
                    e[i] = 1.0;
                    rows.push((e.clone(), upper[i]));
                    rows.push((-e, -lower[i]));
                }
                rows
            }
            BodyKind::Polytope { normals, offsets } => normals
                .iter()
                .cloned()
                .zip(offsets.iter().copied())
                .collect(),
            BodyKind::Ellipsoid { .. } => return None,
        };
        let mut out = Vec::with_capacity(rows.len());
        for (a, b) in rows {
            let g = slice.directions.coordinates(&a);
            let c = b - a.dot(&slice.anchor);
            if g.norm() <= 1e-14 {
                if c < -MEMBERSHIP_TOL {
                    return Some(Err(GeometryError::EmptySlice));
                }
                continue;
            }
            out.push((g, c));
        }
        Some(Ok(out))
    }

    /// Slice ellipsoid `(z − z0)ᵀ S (z − z0) ≤ rho` for ellipsoid bodies.
    fn slice_ellipse(&self, slice: &Slice) -> Option<Result<SliceEllipse, GeometryError>> {
        let BodyKind::Ellipsoid { center, shape } = &self.kind else {
            return None;
        };
        let q = slice.directions.matrix();
        let p = &slice.anchor - center;
        let mp = shape * &p;
        let s = q.transpose() * shape * &q;
        let b = q.transpose() * &mp;
        let k = s.nrows();
        let (z0, s_inv) = if k == 0 {
            (Vector::zeros(0), Matrix::zeros(0, 0))
        } else {
            let chol = match s.clone().cholesky() {
                Some(c) => c,
                None => return Some(Err(GeometryError::InvalidBody("degenerate slice".into()))),
            };
            (-chol.solve(&b), chol.inverse())
        };
        let rho = 1.0 - p.dot(&mp) + b.dot(&(-&z0));
        if rho < -MEMBERSHIP_TOL {
            return Some(Err(GeometryError::EmptySlice));
        }
        Some(Ok(SliceEllipse {
            center: z0,
            s_inv,
            rho: rho.max(0.0),
        }))
    }

    /// Maximum of `⟨g, z⟩` over the slice's coordinate domain, with a maximizer.
    pub fn slice_support(&self, slice: &Slice, g: &Vector) -> Result<(f64, Vector), GeometryError> {
        self.check_slice(slice)?;
        if let Some(e) = self.slice_ellipse(slice) {
            let e = e?;
            let sg = &e.s_inv * g;
            let quad = g.dot(&sg);
            if quad <= 0.0 {
                return Ok((0.0, e.center.clone()));
            }
            let scale = (e.rho / quad).sqrt();
            let arg = &e.center + sg * scale;
            return Ok((g.dot(&e.center) + (e.rho * quad).sqrt(), arg));
        }
        let rows = self.slice_rows(slice).expect("polyhedral kind")?;
        let vertices = enumerate_vertices(&rows, slice.dim());
        let mut best: Option<(f64, Vector)> = None;
        for v in vertices {
            let val = g.dot(&v);
            if best.as_ref().map_or(true, |(b, _)| val > *b) {
                best = Some((val, v));
            }
        }
        best.ok_or(GeometryError::EmptySlice)
    }

    /// A point of the slice's relative interior, in slice coordinates: the
    /// slice-ellipse center or the vertex centroid.
    pub fn slice_center(&self, slice: &Slice) -> Result<Vector, GeometryError> {
        self.check_slice(slice)?;
        if let Some(e) = self.slice_ellipse(slice) {
            return Ok(e?.center);
        }
        let rows = self.slice_rows(slice).expect("polyhedral kind")?;
        let vertices = enumerate_vertices(&rows, slice.dim());
        if vertices.is_empty() {
            return Err(GeometryError::EmptySlice);
        }
        Ok(centroid(&dedup(vertices)))
    }

    fn check_slice(&self, slice: &Slice) -> Result<(), GeometryError> {
        if slice.anchor.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: slice.anchor.len(),
            });
        }
        Ok(())
    }
}

struct SliceEllipse {
    center: Vector,
    s_inv: Matrix,
    rho: f64,
}

/// `(anchor + span(directions)) ∩ C`, queried in `directions` coordinates.
#[derive(Debug, Clone)]
pub struct Slice {
    pub anchor: Vector,
    pub directions: Basis,
}

impl Slice {
    pub fn new(anchor: Vector, directions: Basis) -> Self {
        Self { anchor, directions }
    }

    pub fn dim(&self) -> usize {
        self.directions.dim()
    }

    /// `anchor + Q z`.
    pub fn point(&self, z: &Vector) -> Vector {
        &self.anchor + self.directions.lift(z)
    }
}

/// Chord of the slice through its anchor along `direction` (slice
/// coordinates), found by bisection on membership.
pub fn slice_extent(
    body: &ConvexBody,
    slice: &Slice,
    direction: &Vector,
) -> Result<(f64, f64), GeometryError> {
    slice_extent_at(body, slice, &Vector::zeros(slice.dim()), direction)
}

/// Chord through the slice point with coordinates `z`.
pub fn slice_extent_at(
    body: &ConvexBody,
    slice: &Slice,
    z: &Vector,
    direction: &Vector,
) -> Result<(f64, f64), GeometryError> {
    let origin = slice.point(z);
    let residual = body.residual(&origin);
    // Points left on the boundary by an earlier chord may re-lift a rounding
    // error past the membership tolerance.
    if residual > 10.0 * MEMBERSHIP_TOL {
        return Err(GeometryError::AnchorOutside { residual });
    }
    let norm = direction.norm();
    if norm == 0.0 {
        return Ok((0.0, 0.0));
    }
    let u = slice.directions.lift(&(direction / norm));
    let reach = 2.0 * body.bounding_radius() + origin.norm();
    let walk = |sign: f64| {
        let (mut lo, mut hi) = (0.0_f64, reach);
        while hi - lo > EXTENT_TOL {
            let mid = 0.5 * (lo + hi);
            if body.contains(&(&origin + &u * (sign * mid))) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Ok((-walk(-1.0), walk(1.0)))
}

fn centroid(points: &[Vector]) -> Vector {
    let mut acc = Vector::zeros(points[0].len());
    for p in points {
        acc += p;
    }
    acc / points.len() as f64
}

fn dedup(points: Vec<Vector>) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(points.len());
    for p in points {
        let scale = 1.0 + p.amax();
        if !out.iter().any(|q| (q - &p).amax() <= 1e-9 * scale) {
            out.push(p);
        }
    }
    out
}

/// Visits every `k`-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Vertices of `{z ∈ R^k : g_i·z ≤ c_i}` by enumerating `k`-subsets of active
/// rows. Exact for the small dimensions this crate targets.
pub(crate) fn enumerate_vertices(rows: &[(Vector, f64)], k: usize) -> Vec<Vector> {
    let feasible = |z: &Vector| {
        rows.iter()
            .all(|(g, c)| g.dot(z) - c <= 1e-9 * (1.0 + c.abs()))
    };
    if k == 0 {
        let z = Vector::zeros(0);
        return if feasible(&z) { vec![z] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for_each_combination(rows.len(), k, |active| {
        let a = Matrix::from_fn(k, k, |i, j| rows[active[i]].0[j]);
        let rhs = Vector::from_fn(k, |i, _| rows[active[i]].1);
        let lu = a.lu();
        if lu.determinant().abs() < 1e-12 {
            return;
        }
        if let Some(z) = lu.solve(&rhs) {
            if feasible(&z) {
                out.push(z);
            }
        }
    });
    out
}

/// `{x : A x ≤ b}` is bounded iff `A` has full column rank and the cone
/// `{y : A y ≤ 0}` has no extreme ray.
fn polytope_is_bounded(normals: &[Vector]) -> bool {
    let n = normals[0].len();
    let a = Matrix::from_fn(normals.len(), n, |i, j| normals[i][j]);
    if a.rank(1e-10) < n {
        return false;
    }
    if n == 1 {
        let pos = normals.iter().any(|v| v[0] > 0.0);
        let neg = normals.iter().any(|v| v[0] < 0.0);
        return pos && neg;
    }
    let mut bounded = true;
    for_each_combination(normals.len(), n - 1, |active| {
        if !bounded {
            return;
        }
        let sub: Vec<Vector> = active.iter().map(|&i| normals[i].clone()).collect();
        let span = Basis::orthonormalize(n, &sub);
        if span.dim() != n - 1 {
            return;
        }
        let ray = span.complement().vectors()[0].clone();
        for sign in [-1.0, 1.0] {
            let r = &ray * sign;
            if normals.iter().all(|a| a.dot(&r) <= 1e-12) {
                bounded = false;
            }
        }
    });
    bounded
}
