//! Vectors, operators and orthogonal projections on the fiber `C^d`.
//!
//! The fiber carries the Hilbert-lattice structure of `C^d` with respect to the
//! standard basis: the modulus of a vector is taken componentwise, and the closed
//! ideals are exactly the coordinate subspaces.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

pub type C64 = Complex64;

/// Default algebraic tolerance for projection invariants.
pub const ALGEBRAIC_TOL: f64 = 1e-12;

/// Residual norm below which a Gram–Schmidt candidate is treated as dependent.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberVector(pub DVector<C64>);

impl FiberVector {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(FiberVector(DVector::from_vec(entries)))
    }

    pub fn from_slice(entries: &[C64]) -> Self {
        FiberVector(DVector::from_column_slice(entries))
    }

    pub fn zeros(d: usize) -> Self {
        FiberVector(DVector::zeros(d))
    }

    /// The `j`-th standard basis vector of `C^d`.
    pub fn basis(d: usize, j: usize) -> Self {
        let mut v = DVector::zeros(d);
        v[j] = C64::new(1.0, 0.0);
        FiberVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `(self | other)`, linear in `self`, antilinear in `other`.
    pub fn inner(&self, other: &FiberVector) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn scale(&self, c: C64) -> FiberVector {
        FiberVector(&self.0 * c)
    }
}

impl Add for &FiberVector {
    type Output = FiberVector;
    fn add(self, rhs: &FiberVector) -> FiberVector {
        FiberVector(&self.0 + &rhs.0)
    }
}

impl Sub for &FiberVector {
    type Output = FiberVector;
    fn sub(self, rhs: &FiberVector) -> FiberVector {
        FiberVector(&self.0 - &rhs.0)
    }
}

/// Componentwise modulus `|v|`: the lattice absolute value of `C^d`.
pub fn modulus(v: &FiberVector) -> FiberVector {
    FiberVector(v.0.map(|z| C64::new(z.norm(), 0.0)))
}

/// A `d x d` complex matrix acting on the fiber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberOperator(pub DMatrix<C64>);

impl FiberOperator {
    /// Builds an operator from row-major entries.
    pub fn from_row_major(d: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: entries.len(),
            });
        }
        if entries.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(FiberOperator(DMatrix::from_row_slice(d, d, entries)))
    }

    pub fn zeros(d: usize) -> Self {
        FiberOperator(DMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        FiberOperator(DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn row_major(&self) -> Vec<C64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> FiberOperator {
        FiberOperator(self.0.adjoint())
    }

    pub fn scale(&self, c: C64) -> FiberOperator {
        FiberOperator(&self.0 * c)
    }

    /// Largest singular value.
    pub fn norm(&self) -> f64 {
        operator_norm(&self.0)
    }

    pub fn apply(&self, v: &FiberVector) -> FiberVector {
        FiberVector(&self.0 * &v.0)
    }

    /// Applies the operator to a raw fiber slice, writing into `out`.
    pub fn apply_slice(&self, v: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.dim()) {
            *o = v.iter().enumerate().map(|(j, x)| self.0[(i, j)] * x).sum();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.is_finite())
    }
}

impl Add for &FiberOperator {
    type Output = FiberOperator;
    fn add(self, rhs: &FiberOperator) -> FiberOperator {
        FiberOperator(&self.0 + &rhs.0)
    }
}

impl Sub for &FiberOperator {
    type Output = FiberOperator;
    fn sub(self, rhs: &FiberOperator) -> FiberOperator {
        FiberOperator(&self.0 - &rhs.0)
    }
}

impl Mul for &FiberOperator {
    type Output = FiberOperator;
    fn mul(self, rhs: &FiberOperator) -> FiberOperator {
        FiberOperator(&self.0 * &rhs.0)
    }
}

/// Spectral norm of a dense complex matrix.
pub fn operator_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return 0.0;
    }
    m.singular_values().max()
}

/// An orthogonal projection: Hermitian and idempotent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    op: FiberOperator,
}

impl Projection {
    /// Validates `op` as an orthogonal projection at tolerance `tol`.
    ///
    /// Eigenvalues of a Hermitian `op` with `‖op² − op‖ ≤ tol` lie within `tol` of `{0, 1}`,
    /// so the two checks below suffice.
    pub fn new(op: FiberOperator, tol: f64) -> Result<Self> {
        if !op.is_finite() {
            return Err(Error::NonFinite);
        }
        let (idempotence, hermiticity) = projection_defects(&op.0);
        if idempotence > tol || hermiticity > tol {
            return Err(Error::NotAProjection {
                idempotence,
                hermiticity,
            });
        }
        Ok(Projection { op })
    }

    pub(crate) fn from_op_unchecked(op: FiberOperator) -> Self {
        Projection { op }
    }

    pub fn zero(d: usize) -> Self {
        Projection {
            op: FiberOperator::zeros(d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Projection {
            op: FiberOperator::identity(d),
        }
    }

    /// Orthogonal projection onto the coordinate subspace spanned by `{e_j : j ∈ coords}`.
    pub fn coordinate(d: usize, coords: &[usize]) -> Self {
        let mut m = DMatrix::zeros(d, d);
        for &j in coords {
            m[(j, j)] = C64::new(1.0, 0.0);
        }
        Projection {
            op: FiberOperator(m),
        }
    }

    pub fn op(&self) -> &FiberOperator {
        &self.op
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.op.0
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Trace, rounded: the dimension of the range.
    pub fn rank(&self) -> usize {
        self.op.0.trace().re.round().max(0.0) as usize
    }

    pub fn apply(&self, v: &FiberVector) -> FiberVector {
        self.op.apply(v)
    }

    pub fn defects(&self) -> (f64, f64) {
        projection_defects(&self.op.0)
    }
}

/// `(‖P² − P‖, ‖P − P†‖)` in operator norm.
pub fn projection_defects(m: &DMatrix<C64>) -> (f64, f64) {
    let idem = operator_norm(&(m * m - m));
    let herm = operator_norm(&(m - m.adjoint()));
    (idem, herm)
}

/// `Id − P`.
pub fn complement(p: &Projection) -> Projection {
    let d = p.dim();
    Projection::from_op_unchecked(FiberOperator(DMatrix::identity(d, d) - p.matrix()))
}

/// Orthonormal basis of the span of `vectors` by Gram–Schmidt with one
/// re-orthogonalization pass; candidates whose residual norm falls below `rank_tol`
/// are dropped.
pub fn orthonormal_basis(vectors: &[FiberVector], rank_tol: f64) -> Result<Vec<FiberVector>> {
    let d = match vectors.first() {
        Some(v) => v.dim(),
        None => return Err(Error::EmptySpan),
    };
    let mut basis: Vec<DVector<C64>> = Vec::new();
    for v in vectors {
        if v.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.dim(),
            });
        }
        let mut w = v.0.clone();
        for _pass in 0..2 {
            for q in &basis {
                let c = q.dotc(&w);
                w -= q * c;
            }
        }
        let n = w.norm();
        if n >= rank_tol {
            basis.push(w / C64::new(n, 0.0));
        }
    }
    if basis.is_empty() {
        return Err(Error::EmptySpan);
    }
    Ok(basis.into_iter().map(FiberVector).collect())
}

/// Orthogonal projection onto `span(vectors)`.
pub fn project_onto_span(vectors: &[FiberVector]) -> Result<Projection> {
    let basis = orthonormal_basis(vectors, RANK_TOL)?;
    let d = basis[0].dim();
    let mut m = DMatrix::zeros(d, d);
    for q in &basis {
        m += &q.0 * q.0.adjoint();
    }
    // Symmetrize away rounding in the outer products.
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    Ok(Projection::from_op_unchecked(FiberOperator(m)))
}
