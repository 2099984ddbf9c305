//! Locality of projections on the whole discrete space.
//!
//! A [`GlobalOperator`] is a dense `(N·d) × (N·d)` matrix in cell-major block layout:
//! block `(x, y)` is the `d × d` coupling from cell `y` to cell `x`. On a finite grid the
//! cell indicators span all diagonal multipliers, so a projection is localizable exactly
//! when it commutes with every indicator `M_j`, i.e. when all off-diagonal blocks vanish.

use crate::calculus::is_ideal_projection;
use crate::error::{Error, Result};
use crate::fiber::{operator_norm, FiberOperator, Projection, C64};
use crate::grid::{Field, GridSpec, ProjectionField};
use crate::rng::Ensemble;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest `N·d` accepted for brute-force analysis.
pub const MAX_GLOBAL_DIM: usize = 2048;
pub const LOCALITY_TOL: f64 = 1e-10;
pub const GLOBAL_PROJECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOperator {
    grid: GridSpec,
    d: usize,
    matrix: DMatrix<C64>,
}

pub fn check_size(grid: &GridSpec, d: usize) -> Result<()> {
    let size = grid.cells() * d;
    if size > MAX_GLOBAL_DIM {
        return Err(Error::TooLarge {
            size,
            limit: MAX_GLOBAL_DIM,
        });
    }
    Ok(())
}

impl GlobalOperator {
    pub fn new(grid: &GridSpec, d: usize, matrix: DMatrix<C64>) -> Result<Self> {
        check_size(grid, d)?;
        let n = grid.cells() * d;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        if matrix.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(GlobalOperator {
            grid: grid.clone(),
            d,
            matrix,
        })
    }

    /// The block-diagonal operator `(𝒫f)(x) = P_x f(x)`.
    pub fn lift(p: &ProjectionField) -> Result<Self> {
        let grid = p.grid();
        let d = p.fiber_dim();
        check_size(grid, d)?;
        let n = grid.cells() * d;
        let mut m = DMatrix::zeros(n, n);
        for x in 0..grid.cells() {
            m.view_mut((x * d, x * d), (d, d))
                .copy_from(p.at(x).matrix());
        }
        Ok(GlobalOperator {
            grid: grid.clone(),
            d,
            matrix: m,
        })
    }

    /// Projection onto even fields: `(𝒫f)(x) = (f(x) + f(−x)) / 2`.
    pub fn even_part(grid: &GridSpec, d: usize) -> Result<Self> {
        check_size(grid, d)?;
        let n = grid.cells() * d;
        let mut m = DMatrix::zeros(n, n);
        let half = C64::new(0.5, 0.0);
        for x in 0..grid.cells() {
            let y = grid.reflect(x);
            for c in 0..d {
                m[(x * d + c, x * d + c)] += half;
                m[(x * d + c, y * d + c)] += half;
            }
        }
        Ok(GlobalOperator {
            grid: grid.clone(),
            d,
            matrix: m,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn fiber_dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn block(&self, x: usize, y: usize) -> DMatrix<C64> {
        let d = self.d;
        self.matrix.view((x * d, y * d), (d, d)).into_owned()
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        if f.grid() != &self.grid || f.fiber_dim() != self.d {
            return Err(Error::GridMismatch);
        }
        let v = nalgebra::DVector::from_column_slice(f.values());
        let out = &self.matrix * v;
        Field::from_values(&self.grid, self.d, out.as_slice().to_vec())
    }

    /// Frobenius norms of `G² − G` and `G − G†`; upper bounds for the operator norms.
    pub fn projection_defects(&self) -> (f64, f64) {
        let g = &self.matrix;
        ((g * g - g).norm(), (g - g.adjoint()).norm())
    }

    pub fn check_projection(&self) -> Result<()> {
        let (idempotence, hermiticity) = self.projection_defects();
        if idempotence > GLOBAL_PROJECTION_TOL || hermiticity > GLOBAL_PROJECTION_TOL {
            return Err(Error::NotAProjection {
                idempotence,
                hermiticity,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizabilityReport {
    pub localizable: bool,
    /// `max_j ‖[G, M_j]‖`.
    pub worst_commutator: f64,
    /// `max_{x≠y} ‖G_{xy}‖`.
    pub worst_offdiagonal_block: f64,
    /// The commutator and block tests gave the same verdict.
    pub agree: bool,
}

/// `‖[G, M_j]‖` for the indicator `M_j` of cell `j`.
///
/// `[G, M_j]` holds the blocks `G_{xj}` (x ≠ j) in column `j` and `−G_{jy}` (y ≠ j) in
/// row `j`; these occupy disjoint rows and columns, so the norm is the larger of the
/// column-stack and row-stack norms, each computed from a `d × d` Gram matrix.
pub fn commutator_norm(g: &GlobalOperator, j: usize) -> f64 {
    let d = g.d;
    let mut col_gram = DMatrix::<C64>::zeros(d, d);
    let mut row_gram = DMatrix::<C64>::zeros(d, d);
    for x in 0..g.grid.cells() {
        if x == j {
            continue;
        }
        let c = g.matrix.view((x * d, j * d), (d, d));
        let r = g.matrix.view((j * d, x * d), (d, d));
        col_gram += c.adjoint() * c;
        row_gram += r * r.adjoint();
    }
    operator_norm(&col_gram)
        .sqrt()
        .max(operator_norm(&row_gram).sqrt())
}

fn worst_offdiagonal_block(g: &GlobalOperator) -> f64 {
    let n = g.grid.cells();
    (0..n)
        .into_par_iter()
        .map(|x| {
            (0..n)
                .filter(|&y| y != x)
                .map(|y| operator_norm(&g.block(x, y)))
                .fold(0.0, f64::max)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Decides localizability by commutation with all cell indicators, cross-checked against
/// the vanishing of all off-diagonal blocks.
pub fn is_localizable(g: &GlobalOperator) -> Result<LocalizabilityReport> {
    g.check_projection()?;
    let worst_commutator = (0..g.grid.cells())
        .into_par_iter()
        .map(|j| commutator_norm(g, j))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);
    let worst_block = worst_offdiagonal_block(g);
    let by_commutator = worst_commutator <= LOCALITY_TOL;
    let by_blocks = worst_block <= LOCALITY_TOL;
    Ok(LocalizabilityReport {
        localizable: by_commutator && by_blocks,
        worst_commutator,
        worst_offdiagonal_block: worst_block,
        agree: by_commutator == by_blocks,
    })
}

/// The strictly local form `(P_x)` of a localizable projection.
pub fn extract_blocks(g: &GlobalOperator) -> Result<ProjectionField> {
    let rep = is_localizable(g)?;
    if !rep.localizable {
        return Err(Error::NotStrictlyLocal {
            worst: rep.worst_offdiagonal_block.max(rep.worst_commutator),
        });
    }
    let d = g.d;
    let blocks = (0..g.grid.cells())
        .map(|x| {
            let b = g.block(x, x);
            Projection::new(FiberOperator(b), LOCALITY_TOL)
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(blocks.iter().all(|b| b.dim() == d));
    ProjectionField::new(&g.grid, blocks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealSubspaceReport {
    pub is_ideal: bool,
    pub locality: LocalizabilityReport,
    /// Per-cell lattice verdicts; empty when the operator is not localizable.
    pub cell_verdicts: Vec<bool>,
    pub failing_cells: Vec<usize>,
}

/// The range of `g` is a closed ideal iff `g` is strictly local and every block projects
/// onto an ideal of the fiber.
pub fn is_ideal_subspace_projection(
    g: &GlobalOperator,
    samples: usize,
    rng: &mut Ensemble,
) -> Result<IdealSubspaceReport> {
    let locality = is_localizable(g)?;
    if !locality.localizable {
        return Ok(IdealSubspaceReport {
            is_ideal: false,
            locality,
            cell_verdicts: Vec::new(),
            failing_cells: Vec::new(),
        });
    }
    let field = extract_blocks(g)?;
    let cell_verdicts: Vec<bool> = field
        .values()
        .iter()
        .map(|p| is_ideal_projection(p, samples, rng).is_ideal)
        .collect();
    let failing_cells: Vec<usize> = cell_verdicts
        .iter()
        .enumerate()
        .filter(|(_, &ok)| !ok)
        .map(|(x, _)| x)
        .collect();
    Ok(IdealSubspaceReport {
        is_ideal: failing_cells.is_empty(),
        locality,
        cell_verdicts,
        failing_cells,
    })
}

fn unit_column(m: &DMatrix<C64>) -> Option<nalgebra::DVector<C64>> {
    (0..m.ncols())
        .map(|j| m.column(j).into_owned())
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .filter(|c| c.norm() > 0.5)
        .map(|c| c.normalize())
}

/// Lifts `p` and rotates a unit vector `u ∈ range P_a` towards a unit vector
/// `w ∈ ker P_b`, giving a global projection whose block `(b, a)` equals
/// `sin θ cos θ · w u†` with norm `magnitude`.
pub fn plant_offdiagonal(
    p: &ProjectionField,
    a: usize,
    b: usize,
    magnitude: f64,
) -> Result<GlobalOperator> {
    if a == b || !(0.0..=0.5).contains(&magnitude) {
        return Err(Error::InvalidArgument(
            "need distinct cells and magnitude in [0, 1/2]".into(),
        ));
    }
    let mut g = GlobalOperator::lift(p)?;
    let d = g.d;
    let u = unit_column(p.at(a).matrix())
        .ok_or_else(|| Error::InvalidArgument("range of P_a is trivial".into()))?;
    let kernel = DMatrix::<C64>::identity(d, d) - p.at(b).matrix();
    let w = unit_column(&kernel)
        .ok_or_else(|| Error::InvalidArgument("kernel of P_b is trivial".into()))?;
    let theta = 0.5 * (2.0 * magnitude).asin();
    let n = g.matrix.nrows();
    let mut uh = nalgebra::DVector::<C64>::zeros(n);
    uh.rows_mut(a * d, d).copy_from(&u);
    let mut v = nalgebra::DVector::<C64>::zeros(n);
    v.rows_mut(a * d, d)
        .copy_from(&(&u * C64::new(theta.cos(), 0.0)));
    v.rows_mut(b * d, d)
        .copy_from(&(&w * C64::new(theta.sin(), 0.0)));
    g.matrix -= &uh * uh.adjoint();
    g.matrix += &v * v.adjoint();
    Ok(g)
}

/// A random localizable-or-not test operator: the lift of a random projection field,
/// with a block of norm `magnitude` planted between two random distinct cells when
/// `magnitude > 0`. For `d = 1` the field is a random 0/1 indicator with the two chosen
/// cells forced to 1 and 0.
pub fn random_test_operator(
    grid: &GridSpec,
    d: usize,
    magnitude: f64,
    rng: &mut Ensemble,
) -> Result<GlobalOperator> {
    let n = grid.cells();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two cells".into()));
    }
    let a = rng.below(n);
    let b = (a + 1 + rng.below(n - 1)) % n;
    let field = if d == 1 {
        let values = (0..n)
            .map(|x| {
                let on = if x == a {
                    true
                } else if x == b {
                    false
                } else {
                    rng.below(2) == 1
                };
                Projection::coordinate(1, if on { &[0] } else { &[] })
            })
            .collect();
        ProjectionField::new(grid, values)?
    } else {
        crate::presets::random_smooth(grid, d, rng)?
    };
    if magnitude > 0.0 {
        plant_offdiagonal(&field, a, b, magnitude)
    } else {
        GlobalOperator::lift(&field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::apply_projection_field;
    use crate::presets;

    fn g1(n: usize) -> GridSpec {
        GridSpec::unit_torus(vec![n]).unwrap()
    }

    #[test]
    fn lifted_fields_are_localizable_and_round_trip() {
        let g = GridSpec::unit_torus(vec![6, 4]).unwrap();
        let mut e = Ensemble::new(1);
        let p = presets::random_smooth(&g, 2, &mut e).unwrap();
        let lifted = GlobalOperator::lift(&p).unwrap();
        let rep = is_localizable(&lifted).unwrap();
        assert!(rep.localizable && rep.agree);
        assert_eq!(rep.worst_commutator, 0.0);
        let back = extract_blocks(&lifted).unwrap();
        for (a, b) in back.values().iter().zip(p.values()) {
            assert!((a.matrix() - b.matrix()).norm() <= 1e-13);
        }
        let f = Field::random(&g, 2, &mut e);
        let lhs = lifted.apply(&f).unwrap();
        let rhs = apply_projection_field(&back, &f).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).norm() <= 1e-12);
        }
    }

    #[test]
    fn identity_is_localizable() {
        let g = g1(5);
        let id = GlobalOperator::new(&g, 2, DMatrix::identity(10, 10)).unwrap();
        assert!(is_localizable(&id).unwrap().localizable);
    }

    #[test]
    fn even_part_is_a_nonlocal_projection() {
        for n in [4usize, 7, 16] {
            let g = g1(n);
            let e = GlobalOperator::even_part(&g, 2).unwrap();
            e.check_projection().unwrap();
            let rep = is_localizable(&e).unwrap();
            assert!(!rep.localizable && rep.agree);
            assert!((rep.worst_commutator - 0.5).abs() < 1e-14);
            // Block (x, −x) is Id/2 for x ≠ −x.
            let b = e.block(1, n - 1);
            assert!((b - DMatrix::<C64>::identity(2, 2) * C64::new(0.5, 0.0)).norm() < 1e-15);
            assert!(matches!(
                extract_blocks(&e),
                Err(Error::NotStrictlyLocal { .. })
            ));
            let r = is_ideal_subspace_projection(&e, 100, &mut Ensemble::new(0)).unwrap();
            assert!(!r.is_ideal && r.cell_verdicts.is_empty());
        }
    }

    #[test]
    fn commutator_norm_matches_dense_computation() {
        let g = g1(5);
        let e = GlobalOperator::even_part(&g, 2).unwrap();
        let p = presets::rotating(&g, 2).unwrap();
        let planted = plant_offdiagonal(&p, 1, 3, 0.2).unwrap();
        for op in [&e, &planted] {
            for j in 0..5 {
                let mut m = DMatrix::<C64>::zeros(10, 10);
                for c in 0..2 {
                    m[(2 * j + c, 2 * j + c)] = C64::new(1.0, 0.0);
                }
                let dense = op.matrix() * &m - &m * op.matrix();
                let direct = operator_norm(&dense);
                assert!((commutator_norm(op, j) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn planted_block_has_requested_norm() {
        let g = g1(8);
        let p = presets::rotating(&g, 2).unwrap();
        let op = plant_offdiagonal(&p, 2, 5, 1e-6).unwrap();
        op.check_projection().unwrap();
        assert!((operator_norm(&op.block(5, 2)) - 1e-6).abs() < 1e-15);
        let rep = is_localizable(&op).unwrap();
        assert!(!rep.localizable && rep.agree);
    }

    #[test]
    fn commutator_and_block_tests_agree_on_random_operators() {
        let mut e = Ensemble::new(9);
        for (i, d) in (0..40).zip([1usize, 2, 3, 4].iter().cycle()) {
            let g = g1(6);
            let planted = i % 2 == 1;
            let op =
                random_test_operator(&g, *d, if planted { 1e-6 } else { 0.0 }, &mut e).unwrap();
            op.check_projection().unwrap();
            let rep = is_localizable(&op).unwrap();
            assert!(rep.agree);
            assert_eq!(rep.localizable, !planted);
        }
    }

    #[test]
    fn non_projection_rejected() {
        let g = g1(3);
        let m = DMatrix::from_element(3, 3, C64::new(1.0, 0.0));
        let op = GlobalOperator::new(&g, 1, m).unwrap();
        assert!(matches!(
            is_localizable(&op),
            Err(Error::NotAProjection { .. })
        ));
        assert!(matches!(
            GlobalOperator::even_part(&g1(1025), 2),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn ideal_subspace_classification() {
        let g = g1(16);
        let mut e = Ensemble::new(2);
        let step = GlobalOperator::lift(&presets::step(&g, 2).unwrap()).unwrap();
        assert!(
            is_ideal_subspace_projection(&step, 200, &mut e)
                .unwrap()
                .is_ideal
        );
        let rot = GlobalOperator::lift(&presets::rotating(&g, 2).unwrap()).unwrap();
        let r = is_ideal_subspace_projection(&rot, 200, &mut e).unwrap();
        assert!(r.locality.localizable && !r.is_ideal);
        // θ = 2πx: cells at multiples of π/2 are coordinate axes, all others fail.
        assert_eq!(r.failing_cells.len(), 12);
    }
}
