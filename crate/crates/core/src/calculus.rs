//! Projection calculus: exponentials of projections, the block structure of the
//! gradient of a projection field, and the lattice test for ideal projections.

use crate::fiber::{complement, modulus, FiberOperator, FiberVector, Projection, C64};
use crate::grid::{OperatorField, ProjectionField};
use crate::rng::Ensemble;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Tolerance for both ideal-projection verdicts.
pub const IDEAL_TOL: f64 = 1e-10;

/// Complex exponent `z` of `e^{zP}`; `z = is` gives the unitary group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionExponent(pub C64);

impl ProjectionExponent {
    pub fn new(z: C64) -> Self {
        ProjectionExponent(z)
    }

    /// `z = i s`.
    pub fn imaginary(s: f64) -> Self {
        ProjectionExponent(C64::new(0.0, s))
    }
}

/// `e^{zP} = e^z P + (Id − P)`.
pub fn exp_projection(p: &Projection, z: ProjectionExponent) -> FiberOperator {
    let d = p.dim();
    let ez = z.0.exp();
    FiberOperator(p.matrix() * (ez - C64::new(1.0, 0.0)) + DMatrix::identity(d, d))
}

/// Forward-difference derivative `D_k P` of a projection field, one operator field per axis.
pub fn projection_gradient(p: &ProjectionField) -> Vec<OperatorField> {
    let grid = p.grid();
    (0..grid.dims())
        .map(|k| {
            let inv_h = C64::new(1.0 / grid.spacing()[k], 0.0);
            let values = (0..grid.cells())
                .map(|x| {
                    let y = grid.shift(x, k, true);
                    FiberOperator((p.at(y).matrix() - p.at(x).matrix()) * inv_h)
                })
                .collect();
            OperatorField::new(grid, values)
        })
        .collect()
}

/// Block decomposition of one axis component of `D P`.
#[derive(Debug, Clone)]
pub struct GradientSplit {
    /// `D_k P`.
    pub derivative: OperatorField,
    /// `P⊥ (D_k P) P`.
    pub perp_dp_p: OperatorField,
    /// `P (D_k P) P⊥`.
    pub p_dp_perp: OperatorField,
    /// Per cell `‖P (D_k P) P‖ + ‖P⊥ (D_k P) P⊥‖`; zero in the continuum.
    pub diagonal_residual: Vec<f64>,
}

impl GradientSplit {
    pub fn max_diagonal_residual(&self) -> f64 {
        self.diagonal_residual.iter().copied().fold(0.0, f64::max)
    }
}

/// Splits `D_k P` into its two off-diagonal blocks relative to `P_x` and records the
/// diagonal-block remainder, which vanishes in the continuum and is `O(h)` on the grid.
pub fn grad_offdiagonal_decompose(p: &ProjectionField) -> Vec<GradientSplit> {
    let grid = p.grid();
    projection_gradient(p)
        .into_iter()
        .map(|dp| {
            let mut lower = Vec::with_capacity(grid.cells());
            let mut upper = Vec::with_capacity(grid.cells());
            let mut resid = Vec::with_capacity(grid.cells());
            for x in 0..grid.cells() {
                let pm = p.at(x).matrix();
                let qm = complement(p.at(x)).matrix().clone();
                let g = &dp.at(x).0;
                lower.push(FiberOperator(&qm * g * pm));
                upper.push(FiberOperator(pm * g * &qm));
                let diag_p = FiberOperator(pm * g * pm).norm();
                let diag_q = FiberOperator(&qm * g * &qm).norm();
                resid.push(diag_p + diag_q);
            }
            GradientSplit {
                derivative: dp,
                perp_dp_p: OperatorField::new(grid, lower),
                p_dp_perp: OperatorField::new(grid, upper),
                diagonal_residual: resid,
            }
        })
        .collect()
}

/// The two sides of `e^{zP}(∇P) = e^z P(∇P)P⊥ + P⊥(∇P)P` at one cell.
#[derive(Debug, Clone)]
pub struct TwistPair {
    pub lhs: FiberOperator,
    pub rhs: FiberOperator,
}

impl TwistPair {
    pub fn defect(&self) -> f64 {
        (&self.lhs - &self.rhs).norm()
    }
}

/// Evaluates both sides of the twist identity for a single projection `p` and
/// derivative `dp`. The sides agree exactly when `dp` is off-diagonal with respect to `p`.
pub fn twist_pair(p: &Projection, dp: &FiberOperator, z: ProjectionExponent) -> TwistPair {
    let q = complement(p);
    let lhs = &exp_projection(p, z) * dp;
    let ez = z.0.exp();
    let a = FiberOperator(p.matrix() * &dp.0 * q.matrix() * ez);
    let b = FiberOperator(q.matrix() * &dp.0 * p.matrix());
    TwistPair { lhs, rhs: &a + &b }
}

/// Per axis, per cell: [`twist_pair`] with the discrete derivative `D_k P`.
pub fn exp_grad_twist(p: &ProjectionField, z: ProjectionExponent) -> Vec<Vec<TwistPair>> {
    projection_gradient(p)
        .iter()
        .map(|dp| {
            (0..p.grid().cells())
                .map(|x| twist_pair(p.at(x), dp.at(x), z))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdealVerdict {
    /// Sampled lattice criterion `|(Id−Q)v| = (Id−Q)|v|`.
    pub is_ideal: bool,
    pub worst_residual: f64,
    /// `Q` is a 0/1 diagonal matrix.
    pub structural: bool,
    pub agree: bool,
}

/// Tests whether the range of `q` is a closed ideal of `C^d` by the lattice criterion on
/// `Id − Q`, sampled on `samples` complex Gaussian vectors plus `±e_j`, alongside the
/// direct structural test.
pub fn is_ideal_projection(q: &Projection, samples: usize, rng: &mut Ensemble) -> IdealVerdict {
    let d = q.dim();
    let kernel = complement(q);
    let mut probes: Vec<FiberVector> = Vec::with_capacity(samples + 2 * d);
    for j in 0..d {
        let e = FiberVector::basis(d, j);
        probes.push(e.scale(C64::new(-1.0, 0.0)));
        probes.push(e);
    }
    for _ in 0..samples {
        probes.push(FiberVector::from_slice(&rng.complex_normals(d)));
    }
    let worst = probes
        .iter()
        .map(|v| {
            let lhs = modulus(&kernel.apply(v));
            let rhs = kernel.apply(&modulus(v));
            (&lhs - &rhs).norm()
        })
        .fold(0.0, f64::max);
    let is_ideal = worst <= IDEAL_TOL;
    let structural = is_coordinate_projection(q, IDEAL_TOL);
    IdealVerdict {
        is_ideal,
        worst_residual: worst,
        structural,
        agree: is_ideal == structural,
    }
}

/// `q` is diagonal with diagonal entries in `{0, 1}` up to `tol`.
pub fn is_coordinate_projection(q: &Projection, tol: f64) -> bool {
    let m = q.matrix();
    let d = q.dim();
    (0..d).all(|i| {
        (0..d).all(|j| {
            let z = m[(i, j)];
            if i == j {
                z.im.abs() <= tol && (z.re.abs() <= tol || (z.re - 1.0).abs() <= tol)
            } else {
                z.norm() <= tol
            }
        })
    })
}
