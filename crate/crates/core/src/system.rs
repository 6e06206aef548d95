//! The control system `ẏ = F(y) + B u`.

use thiserror::Error;

use crate::drift::{DriftError, DriftField};
use crate::geometry::{Basis, Matrix, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("control matrix is {rows}×{cols} but the drift acts on R^{n}")]
    DimensionMismatch { rows: usize, cols: usize, n: usize },
    #[error("control matrix has rank {rank}, expected {m}")]
    RankDeficient { rank: usize, m: usize },
    #[error("control matrix must have fewer columns than rows (m = {m}, n = {n})")]
    NoSlowDirections { m: usize, n: usize },
}

/// Dimensions, drift, control matrix and the derived orthonormal bases of
/// `ran(B)` (the fast directions) and `H = ran(B)^⊥` (the slow directions).
#[derive(Debug, Clone)]
pub struct ControlSystem {
    drift: DriftField,
    control: Matrix,
    range: Basis,
    slow: Basis,
    pseudo_inverse: Matrix,
}

impl ControlSystem {
    pub fn new(drift: DriftField, control: Matrix) -> Result<Self, SystemError> {
        let n = drift.dim();
        let (rows, m) = control.shape();
        if rows != n {
            return Err(SystemError::DimensionMismatch { rows, cols: m, n });
        }
        if m >= n {
            return Err(SystemError::NoSlowDirections { m, n });
        }
        let range = Basis::column_space(&control);
        if range.dim() != m {
            return Err(SystemError::RankDeficient { rank: range.dim(), m });
        }
        let slow = range.complement();
        let gram = control.transpose() * &control;
        let pseudo_inverse = gram
            .cholesky()
            .expect("full column rank implies a positive definite Gram matrix")
            .inverse()
            * control.transpose();
        Ok(Self {
            drift,
            control,
            range,
            slow,
            pseudo_inverse,
        })
    }

    pub fn n(&self) -> usize {
        self.control.nrows()
    }

    pub fn m(&self) -> usize {
        self.control.ncols()
    }

    pub fn drift(&self) -> &DriftField {
        &self.drift
    }

    pub fn drift_mut(&mut self) -> &mut DriftField {
        &mut self.drift
    }

    pub fn control_matrix(&self) -> &Matrix {
        &self.control
    }

    /// Orthonormal basis of `ran(B)`.
    pub fn range_basis(&self) -> &Basis {
        &self.range
    }

    /// Orthonormal basis of `H`.
    pub fn slow_basis(&self) -> &Basis {
        &self.slow
    }

    pub fn slow_dim(&self) -> usize {
        self.slow.dim()
    }

    /// `(BᵀB)⁻¹ Bᵀ`.
    pub fn pseudo_inverse(&self) -> &Matrix {
        &self.pseudo_inverse
    }

    /// Right-hand side `F(y) + B u`.
    pub fn velocity(&self, y: &Vector, u: &Vector) -> Result<Vector, DriftError> {
        Ok(self.drift.eval(y)? + &self.control * u)
    }

    /// Control `u` with `B u = v` for `v ∈ ran(B)`; the least-squares solution
    /// otherwise.
    pub fn control_for(&self, v: &Vector) -> Vector {
        &self.pseudo_inverse * v
    }
}
