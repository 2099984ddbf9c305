//! Periodic grids and the discrete Bochner space `L²(torus; C^d)`.
//!
//! Cells are indexed row-major with the last axis varying fastest. A [`Field`]
//! stores its fiber vectors cell-major: component `c` of cell `x` lives at
//! `x * d + c`. The gradient is the forward difference with periodic wrap and the
//! Laplacian is the matching `−D†D` stencil, so summation by parts holds exactly.

use crate::error::{Error, Result};
use crate::fiber::{FiberOperator, FiberVector, Projection, C64};
use crate::rng::Ensemble;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    sizes: Vec<usize>,
    spacing: Vec<f64>,
}

impl GridSpec {
    /// Uniform spacing `h` on every axis; the torus has side length `N_k h`.
    pub fn new(sizes: Vec<usize>, h: f64) -> Result<Self> {
        let spacing = vec![h; sizes.len()];
        Self::with_spacing(sizes, spacing)
    }

    /// The unit torus `[0,1)^n`, spacing `1/N_k` per axis.
    pub fn unit_torus(sizes: Vec<usize>) -> Result<Self> {
        let spacing = sizes.iter().map(|&n| 1.0 / n.max(1) as f64).collect();
        Self::with_spacing(sizes, spacing)
    }

    fn with_spacing(sizes: Vec<usize>, spacing: Vec<f64>) -> Result<Self> {
        if sizes.is_empty() || sizes.len() > 3 {
            return Err(Error::InvalidGrid(format!(
                "spatial dimension must be 1..=3, got {}",
                sizes.len()
            )));
        }
        if let Some(&n) = sizes.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidGrid(format!("axis size {n} < 2")));
        }
        if spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidGrid("spacing must be positive".into()));
        }
        Ok(GridSpec { sizes, spacing })
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn cells(&self) -> usize {
        self.sizes.iter().product()
    }

    /// `hⁿ`, the weight of one cell in integrals.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    fn stride(&self, axis: usize) -> usize {
        self.sizes[axis + 1..].iter().product()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&i, &n)| acc * n + (i % n))
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        for k in (0..self.dims()).rev() {
            out[k] = index % self.sizes[k];
            index /= self.sizes[k];
        }
        out
    }

    /// Physical position of the cell's sample point.
    pub fn position(&self, index: usize) -> Vec<f64> {
        self.coords(index)
            .iter()
            .zip(&self.spacing)
            .map(|(&i, &h)| i as f64 * h)
            .collect()
    }

    /// Index of the neighbour of `index` one cell forward (`+1`) or backward (`-1`) along `axis`.
    pub fn shift(&self, index: usize, axis: usize, forward: bool) -> usize {
        let n = self.sizes[axis];
        let stride = self.stride(axis);
        let i = (index / stride) % n;
        let j = if forward {
            (i + 1) % n
        } else {
            (i + n - 1) % n
        };
        index - i * stride + j * stride
    }

    /// Index of the reflected cell `−x` on the torus.
    pub fn reflect(&self, index: usize) -> usize {
        let c: Vec<usize> = self
            .coords(index)
            .iter()
            .zip(&self.sizes)
            .map(|(&i, &n)| (n - i) % n)
            .collect();
        self.index(&c)
    }
}

/// A grid-indexed array of fiber vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: GridSpec,
    d: usize,
    values: Vec<C64>,
}

impl Field {
    pub fn zeros(grid: &GridSpec, d: usize) -> Self {
        Field {
            grid: grid.clone(),
            d,
            values: vec![C64::new(0.0, 0.0); grid.cells() * d],
        }
    }

    pub fn from_values(grid: &GridSpec, d: usize, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.cells() * d {
            return Err(Error::DimensionMismatch {
                expected: grid.cells() * d,
                found: values.len(),
            });
        }
        if values.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Field {
            grid: grid.clone(),
            d,
            values,
        })
    }

    /// Samples `f(position)` at every cell.
    pub fn from_fn(grid: &GridSpec, d: usize, mut f: impl FnMut(&[f64]) -> Vec<C64>) -> Self {
        let mut values = Vec::with_capacity(grid.cells() * d);
        for x in 0..grid.cells() {
            let v = f(&grid.position(x));
            assert_eq!(v.len(), d, "sampled fiber vector has wrong dimension");
            values.extend(v);
        }
        Field {
            grid: grid.clone(),
            d,
            values,
        }
    }

    /// A constant fiber vector in every cell.
    pub fn constant(grid: &GridSpec, v: &FiberVector) -> Self {
        Self::from_fn(grid, v.dim(), |_| v.entries().to_vec())
    }

    /// i.i.d. complex Gaussian entries.
    pub fn random(grid: &GridSpec, d: usize, rng: &mut Ensemble) -> Self {
        Field {
            grid: grid.clone(),
            d,
            values: rng.complex_normals(grid.cells() * d),
        }
    }

    /// `exp(2πi m·x) v` on the unit torus, with `m` given in integer wavenumbers.
    pub fn plane_wave(grid: &GridSpec, modes: &[i64], v: &FiberVector) -> Self {
        let lengths: Vec<f64> = grid
            .sizes()
            .iter()
            .zip(grid.spacing())
            .map(|(&n, &h)| n as f64 * h)
            .collect();
        Self::from_fn(grid, v.dim(), |x| {
            let phase: f64 = x
                .iter()
                .zip(modes)
                .zip(&lengths)
                .map(|((&xi, &m), &l)| std::f64::consts::TAU * m as f64 * xi / l)
                .sum();
            let e = C64::from_polar(1.0, phase);
            v.entries().iter().map(|&c| c * e).collect()
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn fiber_dim(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn cell(&self, x: usize) -> &[C64] {
        &self.values[x * self.d..(x + 1) * self.d]
    }

    pub fn cell_mut(&mut self, x: usize) -> &mut [C64] {
        let d = self.d;
        &mut self.values[x * d..(x + 1) * d]
    }

    pub fn fiber(&self, x: usize) -> FiberVector {
        FiberVector::from_slice(self.cell(x))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, c: C64) -> Field {
        self.map_values(|z| z * c)
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> Field {
        Field {
            grid: self.grid.clone(),
            d: self.d,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Result<Field> {
        check_compatible(self, other)?;
        Ok(Field {
            grid: self.grid.clone(),
            d: self.d,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Applies a fiber operator per cell.
    pub fn map_cells(&self, mut f: impl FnMut(usize, &[C64], &mut [C64])) -> Field {
        let mut out = Field::zeros(&self.grid, self.d);
        for x in 0..self.grid.cells() {
            let d = self.d;
            f(
                x,
                &self.values[x * d..(x + 1) * d],
                &mut out.values[x * d..(x + 1) * d],
            );
        }
        out
    }

    /// Cyclic shift by one cell along `axis`: `(Sf)(x) = f(x + h e_k)`.
    pub fn shifted(&self, axis: usize) -> Field {
        self.map_cells(|x, _, out| {
            let y = self.grid.shift(x, axis, true);
            out.copy_from_slice(self.cell(y));
        })
    }
}

pub(crate) fn check_compatible(f: &Field, g: &Field) -> Result<()> {
    if f.grid != g.grid || f.d != g.d {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// The family `(P_x)` of fiber projections, one per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionField {
    grid: GridSpec,
    d: usize,
    values: Vec<Projection>,
}

impl ProjectionField {
    pub fn new(grid: &GridSpec, values: Vec<Projection>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.cells(),
                found: values.len(),
            });
        }
        let d = values[0].dim();
        if let Some(p) = values.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.dim(),
            });
        }
        Ok(ProjectionField {
            grid: grid.clone(),
            d,
            values,
        })
    }

    pub fn constant(grid: &GridSpec, p: &Projection) -> Self {
        ProjectionField {
            grid: grid.clone(),
            d: p.dim(),
            values: vec![p.clone(); grid.cells()],
        }
    }

    pub fn from_fn(grid: &GridSpec, d: usize, mut f: impl FnMut(&[f64]) -> Projection) -> Self {
        let values = (0..grid.cells())
            .map(|x| {
                let p = f(&grid.position(x));
                assert_eq!(p.dim(), d);
                p
            })
            .collect();
        ProjectionField {
            grid: grid.clone(),
            d,
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn fiber_dim(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[Projection] {
        &self.values
    }

    pub fn at(&self, x: usize) -> &Projection {
        &self.values[x]
    }

    pub(crate) fn check_field(&self, f: &Field) -> Result<()> {
        if self.grid != *f.grid() || self.d != f.fiber_dim() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// A grid-indexed array of fiber operators, e.g. one axis component of `∇P`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorField {
    grid: GridSpec,
    values: Vec<FiberOperator>,
}

impl OperatorField {
    pub fn new(grid: &GridSpec, values: Vec<FiberOperator>) -> Self {
        assert_eq!(values.len(), grid.cells());
        OperatorField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[FiberOperator] {
        &self.values
    }

    pub fn at(&self, x: usize) -> &FiberOperator {
        &self.values[x]
    }

    /// Largest cellwise operator norm.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Cellwise operator norms.
    pub fn norms(&self) -> Vec<f64> {
        self.values.iter().map(|a| a.norm()).collect()
    }
}

/// Samples of a time-dependent field.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Field>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<Field>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                found: states.len(),
            });
        }
        if times
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::NonIncreasingTimes);
        }
        if let Some(first) = states.first() {
            for s in &states[1..] {
                check_compatible(first, s)?;
            }
        }
        Ok(Trajectory { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Field] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `(f|g) = hⁿ Σ_x (f(x)|g(x))`, linear in `f`.
pub fn inner(f: &Field, g: &Field) -> Result<C64> {
    check_compatible(f, g)?;
    Ok(raw_inner(f.values(), g.values()) * f.grid().cell_volume())
}

pub(crate) fn raw_inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Forward differences `D_k f(x) = (f(x + h e_k) − f(x)) / h`, one field per axis.
pub fn gradient(f: &Field) -> Vec<Field> {
    let grid = f.grid();
    (0..grid.dims())
        .map(|k| {
            let inv_h = 1.0 / grid.spacing()[k];
            f.map_cells(|x, fx, out| {
                let fy = f.cell(grid.shift(x, k, true));
                for c in 0..fx.len() {
                    out[c] = (fy[c] - fx[c]) * inv_h;
                }
            })
        })
        .collect()
}

/// `Σ_k (f(x + h e_k) + f(x − h e_k) − 2 f(x)) / h_k²`.
pub fn laplacian(f: &Field) -> Field {
    let grid = f.grid();
    f.map_cells(|x, fx, out| {
        for o in out.iter_mut() {
            *o = C64::new(0.0, 0.0);
        }
        for k in 0..grid.dims() {
            let w = 1.0 / (grid.spacing()[k] * grid.spacing()[k]);
            let fp = f.cell(grid.shift(x, k, true));
            let fm = f.cell(grid.shift(x, k, false));
            for c in 0..fx.len() {
                out[c] += (fp[c] + fm[c] - fx[c] * 2.0) * w;
            }
        }
    })
}

/// Dirichlet energy `a(f) = hⁿ Σ_x Σ_k ‖D_k f(x)‖²`.
pub fn form_a(f: &Field) -> f64 {
    gradient(f).iter().map(|g| g.norm_sqr()).sum()
}

/// `a(f, g) = hⁿ Σ_x Σ_k (D_k f(x) | D_k g(x))`.
pub fn form_a_sesq(f: &Field, g: &Field) -> Result<C64> {
    check_compatible(f, g)?;
    let gf = gradient(f);
    let gg = gradient(g);
    let mut acc = C64::new(0.0, 0.0);
    for (a, b) in gf.iter().zip(&gg) {
        acc += raw_inner(a.values(), b.values());
    }
    Ok(acc * f.grid().cell_volume())
}

/// `Σ_j dt_j [ i (φ̇_j | φ_j) + a(φ_j) ]` with `φ̇_j = (φ_{j+1} − φ_j) / dt_j`.
pub fn lagrangian(traj: &Trajectory) -> Result<C64> {
    if traj.len() < 2 {
        return Err(Error::TooFewSamples(traj.len()));
    }
    let i = C64::new(0.0, 1.0);
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..traj.len() - 1 {
        let dt = traj.times[j + 1] - traj.times[j];
        let phi = &traj.states[j];
        let dphi = traj.states[j + 1].sub(phi)?.scale(C64::new(1.0 / dt, 0.0));
        acc += (i * inner(&dphi, phi)? + form_a(phi)) * dt;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn grid1(n: usize) -> GridSpec {
        GridSpec::unit_torus(vec![n]).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::unit_torus(vec![1]).is_err());
        assert!(GridSpec::unit_torus(vec![]).is_err());
        assert!(GridSpec::unit_torus(vec![2, 2, 2, 2]).is_err());
        assert!(GridSpec::new(vec![4], 0.0).is_err());
        let g = GridSpec::unit_torus(vec![4, 3]).unwrap();
        assert_eq!(g.cells(), 12);
        for x in 0..12 {
            assert_eq!(g.index(&g.coords(x)), x);
            assert_eq!(g.shift(g.shift(x, 1, true), 1, false), x);
            assert_eq!(g.reflect(g.reflect(x)), x);
        }
        assert_eq!(g.coords(g.shift(g.index(&[3, 2]), 0, true)), vec![0, 2]);
    }

    #[test]
    fn inner_examples() {
        let g = grid1(8);
        let mut f = Field::zeros(&g, 2);
        f.cell_mut(3)[0] = c(1.0, 0.0);
        assert!((inner(&f, &f).unwrap() - c(1.0 / 8.0, 0.0)).norm() < 1e-16);

        let a = Field::constant(&g, &FiberVector::basis(2, 0));
        let b = Field::constant(&g, &FiberVector::basis(2, 1));
        assert_eq!(inner(&a, &b).unwrap(), c(0.0, 0.0));

        let mut e = Ensemble::new(1);
        let f = Field::random(&g, 2, &mut e);
        let h = Field::random(&g, 2, &mut e);
        // Oracle: direct double loop.
        let mut oracle = c(0.0, 0.0);
        for x in 0..8 {
            for k in 0..2 {
                oracle += f.cell(x)[k] * h.cell(x)[k].conj();
            }
        }
        oracle *= 1.0 / 8.0;
        let ip = inner(&f, &h).unwrap();
        assert!((ip - oracle).norm() < 1e-14);
        assert!((ip - inner(&h, &f).unwrap().conj()).norm() < 1e-14);
        assert!(matches!(
            inner(&f, &Field::zeros(&grid1(4), 2)),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn norm_matches_weighted_sum() {
        let g = GridSpec::unit_torus(vec![4, 8]).unwrap();
        let f = Field::random(&g, 3, &mut Ensemble::new(2));
        let direct: f64 = (0..g.cells()).map(|x| f.fiber(x).norm_sqr()).sum::<f64>() / 32.0;
        assert!((f.norm_sqr() - direct).abs() < 1e-13 * direct);
    }

    #[test]
    fn gradient_of_constant_and_plane_wave() {
        let g = grid1(16);
        let v = FiberVector::from_slice(&[c(1.0, 2.0), c(-0.5, 0.0)]);
        let f = Field::constant(&g, &v);
        assert!(gradient(&f)[0].values().iter().all(|z| z.norm() == 0.0));

        let w = Field::plane_wave(&g, &[1], &v);
        let h = 1.0 / 16.0;
        // Closed-form difference quotient of exp(2πix).
        let factor = (C64::from_polar(1.0, 2.0 * PI * h) - 1.0) / h;
        let expected = w.scale(factor);
        let got = &gradient(&w)[0];
        for (a, b) in got.values().iter().zip(expected.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_is_linear() {
        let g = GridSpec::unit_torus(vec![6, 5]).unwrap();
        let mut e = Ensemble::new(4);
        let f = Field::random(&g, 2, &mut e);
        let h = Field::random(&g, 2, &mut e);
        let lhs = gradient(&f.add(&h).unwrap());
        let (gf, gh) = (gradient(&f), gradient(&h));
        for k in 0..2 {
            let rhs = gf[k].add(&gh[k]).unwrap();
            for (a, b) in lhs[k].values().iter().zip(rhs.values()) {
                assert!((a - b).norm() < 1e-14 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn laplacian_plane_wave_eigenvalue() {
        let n = 16;
        let g = grid1(n);
        let h = 1.0 / n as f64;
        for m in 0..n as i64 {
            let f = Field::plane_wave(&g, &[m], &FiberVector::basis(1, 0));
            let lam = -(4.0 / (h * h)) * (PI * m as f64 / n as f64).sin().powi(2);
            let lf = laplacian(&f);
            for (a, b) in lf.values().iter().zip(f.values()) {
                assert!((a - b * lam).norm() < 1e-12 * (1.0 + lam.abs()));
            }
            let a = form_a(&f);
            assert!((a - f.norm_sqr() * lam.abs()).abs() < 1e-12 * (1.0 + lam.abs()));
        }
    }

    #[test]
    fn summation_by_parts_and_self_adjointness() {
        let g = GridSpec::unit_torus(vec![8, 8]).unwrap();
        let mut e = Ensemble::new(5);
        for _ in 0..100 {
            let f = Field::random(&g, 2, &mut e);
            let h = Field::random(&g, 2, &mut e);
            let a = form_a(&f);
            let sbp = inner(&laplacian(&f), &f).unwrap();
            assert!((sbp + a).norm() <= 1e-12 * (1.0 + a));
            let l = inner(&laplacian(&f), &h).unwrap();
            let r = inner(&f, &laplacian(&h)).unwrap();
            assert!((l - r).norm() <= 1e-12 * (1.0 + l.norm()));
        }
    }

    #[test]
    fn form_a_properties() {
        let g = grid1(12);
        let mut e = Ensemble::new(6);
        let f = Field::random(&g, 2, &mut e);
        let h = Field::random(&g, 2, &mut e);
        assert_eq!(form_a(&Field::constant(&g, &FiberVector::basis(2, 1))), 0.0);
        let cst = c(0.3, -1.7);
        assert!((form_a(&f.scale(cst)) - cst.norm_sqr() * form_a(&f)).abs() < 1e-12 * form_a(&f));
        let aff = form_a_sesq(&f, &f).unwrap();
        assert!(aff.im.abs() < 1e-12 && (aff.re - form_a(&f)).abs() < 1e-12 * aff.re);
        let afh = form_a_sesq(&f, &h).unwrap();
        let ahf = form_a_sesq(&h, &f).unwrap();
        assert!((afh - ahf.conj()).norm() < 1e-12 * (1.0 + afh.norm()));
        let k = Field::constant(&g, &FiberVector::basis(2, 0));
        assert_eq!(form_a_sesq(&f, &k).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn translation_equivariance() {
        let g = GridSpec::unit_torus(vec![5, 4]).unwrap();
        let f = Field::random(&g, 2, &mut Ensemble::new(8));
        for axis in 0..2 {
            assert_eq!(laplacian(&f.shifted(axis)), laplacian(&f).shifted(axis));
            for k in 0..2 {
                assert_eq!(gradient(&f.shifted(axis))[k], gradient(&f)[k].shifted(axis));
            }
        }
    }

    #[test]
    fn lagrangian_examples() {
        let g = grid1(8);
        let phi = Field::plane_wave(&g, &[1], &FiberVector::basis(2, 0));
        let times: Vec<f64> = (0..11).map(|j| j as f64 * 0.1).collect();
        let traj = Trajectory::new(times.clone(), vec![phi.clone(); 11]).unwrap();
        let l = lagrangian(&traj).unwrap();
        assert!((l - c(1.0 * form_a(&phi), 0.0)).norm() < 1e-12 * form_a(&phi));

        let zero = Trajectory::new(times.clone(), vec![Field::zeros(&g, 2); 11]).unwrap();
        assert_eq!(lagrangian(&zero).unwrap(), c(0.0, 0.0));

        let one = Trajectory::new(vec![0.0], vec![phi.clone()]).unwrap();
        assert!(matches!(lagrangian(&one), Err(Error::TooFewSamples(1))));

        // φ(t) = e^{iωt} φ0: the i(φ̇|φ) term tends to −ω‖φ0‖² T as dt → 0.
        let omega = 3.0;
        let t_end = 1.0;
        let mut last = f64::INFINITY;
        for &m in &[100usize, 1000, 10000] {
            let dt = t_end / m as f64;
            let times: Vec<f64> = (0..=m).map(|j| j as f64 * dt).collect();
            let states = times
                .iter()
                .map(|&t| phi.scale(C64::from_polar(1.0, omega * t)))
                .collect();
            let l = lagrangian(&Trajectory::new(times, states).unwrap()).unwrap();
            let kinetic = l - form_a(&phi) * t_end;
            let target = -omega * phi.norm_sqr() * t_end;
            // Closed form: (−sin(ω dt) + i(cos(ω dt) − 1)) / dt · T ‖φ0‖².
            let closed =
                c(-(omega * dt).sin(), (omega * dt).cos() - 1.0) * (t_end / dt) * phi.norm_sqr();
            assert!((kinetic - closed).norm() < 1e-9);
            let err = (kinetic.re - target).abs() + kinetic.im.abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-2);
    }
}
