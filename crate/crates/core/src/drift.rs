//! Drift vector fields `F`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{Basis, ConvexBody, Matrix, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriftError {
    #[error("drift evaluated at its singular point (distance {distance:.3e} to the source)")]
    SingularPoint { distance: f64 },
    #[error("drift expects {expected}-vectors, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Distance below which the attraction field refuses to evaluate.
pub const SINGULAR_RADIUS: f64 = 1e-12;

/// Gain of the second component of the counterexample field near its segments.
const TRAP_GAIN: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum DriftKind {
    /// `F(x) = A x + b`.
    Affine { matrix: Matrix, offset: Vector },
    /// Inverse-square attraction toward `source`:
    /// `F(x) = (S − x) / (|S − x| · |S − x|²)`.
    Attraction { source: Vector },
    /// Frozen 3-D field on `[−2, 2]³` with the two trapping segments
    /// `S1 = {(α, 0, 1) : α ∈ [−1, 1]}` and `S0 = {(α, 0, 0) : α ∈ [−1, 1]}`:
    ///
    /// ```text
    /// F(x) = ( w(x3) a(x1) + (1 − w(x3)) b(x1),  min(1, 10 · dist(x, S1 ∪ S0)),  0 )
    /// w(t) = clamp(t, 0, 1)
    /// a(α) = 1 on α ≤ 0,   1 − 4α on [0, ½],   −1 on α ≥ ½
    /// b(β) = −1 on β ≤ −½, 1 + 4β on [−½, 0],   1 on β ≥ 0
    /// ```
    ///
    /// The second component is positive off the segments, `F = (1,0,0)` on
    /// `{(α,0,1): α ≤ 0} ∪ {(β,0,0): β ≥ 0}` and `F = (−1,0,0)` on
    /// `{(α,0,1): α ≥ ½} ∪ {(β,0,0): β ≤ −½}`. Lipschitz constant ≤ 11.
    Counterexample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftField {
    kind: DriftKind,
    dim: usize,
    lipschitz: Option<f64>,
}

impl DriftField {
    pub fn linear(matrix: Matrix) -> Self {
        let n = matrix.nrows();
        Self::affine(matrix, Vector::zeros(n))
    }

    pub fn affine(matrix: Matrix, offset: Vector) -> Self {
        assert!(matrix.is_square(), "drift matrix must be square");
        assert_eq!(matrix.nrows(), offset.len(), "offset must match the matrix size");
        let norm = if matrix.nrows() == 0 {
            0.0
        } else {
            matrix.clone().svd(false, false).singular_values.max()
        };
        Self {
            dim: matrix.nrows(),
            kind: DriftKind::Affine { matrix, offset },
            lipschitz: Some(norm),
        }
    }

    pub fn constant(value: Vector) -> Self {
        let n = value.len();
        Self::affine(Matrix::zeros(n, n), value)
    }

    /// Attraction field; the Lipschitz constant stays unknown until
    /// [`DriftField::calibrate_lipschitz`] is run on a body.
    pub fn attraction(source: Vector) -> Self {
        Self {
            dim: source.len(),
            kind: DriftKind::Attraction { source },
            lipschitz: None,
        }
    }

    pub fn counterexample() -> Self {
        Self {
            dim: 3,
            kind: DriftKind::Counterexample,
            lipschitz: Some(11.0),
        }
    }

    pub fn kind(&self) -> &DriftKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz_constant(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.kind, DriftKind::Affine { .. })
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector, DriftError> {
        if x.len() != self.dim {
            return Err(DriftError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        match &self.kind {
            DriftKind::Affine { matrix, offset } => Ok(matrix * x + offset),
            DriftKind::Attraction { source } => {
                let r = source - x;
                let dist = r.norm();
                if dist < SINGULAR_RADIUS {
                    return Err(DriftError::SingularPoint { distance: dist });
                }
                Ok(r / (dist * dist * dist))
            }
            DriftKind::Counterexample => Ok(counterexample_field(x)),
        }
    }

    /// `P_H F(x)`.
    pub fn eval_projected(&self, x: &Vector, onto: &Basis) -> Result<Vector, DriftError> {
        Ok(onto.project(&self.eval(x)?))
    }

    /// Largest `|F(x) − F(y)| / |x − y|` over random pairs in `body`, times 1.5.
    pub fn empirical_lipschitz(
        &self,
        body: &ConvexBody,
        pairs: usize,
        seed: u64,
    ) -> Result<f64, DriftError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = sample_body(body, 2 * pairs, &mut rng);
        let mut worst = 0.0_f64;
        for pair in points.chunks_exact(2) {
            let d = (&pair[0] - &pair[1]).norm();
            if d < 1e-12 {
                continue;
            }
            let df = (self.eval(&pair[0])? - self.eval(&pair[1])?).norm();
            worst = worst.max(df / d);
        }
        Ok(1.5 * worst)
    }

    /// Fills in an unknown Lipschitz constant from [`Self::empirical_lipschitz`].
    pub fn calibrate_lipschitz(&mut self, body: &ConvexBody, seed: u64) -> Result<(), DriftError> {
        if self.lipschitz.is_none() {
            self.lipschitz = Some(self.empirical_lipschitz(body, 10_000, seed)?);
        }
        Ok(())
    }

    /// Largest `|F|` over random samples of `body` (plus its witness point).
    pub fn max_norm_on(&self, body: &ConvexBody, samples: usize, seed: u64) -> Result<f64, DriftError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = self.eval(body.interior_witness())?.norm();
        for x in sample_body(body, samples, &mut rng) {
            worst = worst.max(self.eval(&x)?.norm());
        }
        Ok(worst)
    }
}

/// Rejection samples from `body`; includes boundary-biased points by pushing
/// half of the samples outward along their ray from the witness.
pub(crate) fn sample_body(body: &ConvexBody, count: usize, rng: &mut impl Rng) -> Vec<Vector> {
    let n = body.dim();
    let r = body.bounding_radius();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 1000 * count.max(1) {
        attempts += 1;
        let x = Vector::from_fn(n, |_, _| rng.random_range(-r..=r));
        if body.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn ramp_down(alpha: f64) -> f64 {
    (1.0 - 4.0 * alpha).clamp(-1.0, 1.0)
}

fn ramp_up(beta: f64) -> f64 {
    (1.0 + 4.0 * beta).clamp(-1.0, 1.0)
}

fn segment_distance(x: &Vector, height: f64) -> f64 {
    let along = (x[0].abs() - 1.0).max(0.0);
    (along * along + x[1] * x[1] + (x[2] - height).powi(2)).sqrt()
}

/// The frozen counterexample field; see [`DriftKind::Counterexample`].
pub fn counterexample_field(x: &Vector) -> Vector {
    let w = x[2].clamp(0.0, 1.0);
    let first = w * ramp_down(x[0]) + (1.0 - w) * ramp_up(x[0]);
    let dist = segment_distance(x, 1.0).min(segment_distance(x, 0.0));
    let second = (TRAP_GAIN * dist).min(1.0);
    Vector::from_row_slice(&[first, second, 0.0])
}
