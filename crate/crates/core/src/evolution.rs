//! Exact time evolution on the periodic grid.
//!
//! The discrete Laplacian is diagonal in the discrete Fourier basis with eigenvalue
//! `λ_m = −Σ_k (4/h_k²) sin²(π m_k / N_k)`, so the heat semigroup and the Schrödinger
//! group are applied mode by mode without any time-stepping error.

use crate::calculus::{exp_projection, ProjectionExponent};
use crate::error::{Error, Result};
use crate::fiber::C64;
use crate::grid::{Field, GridSpec, ProjectionField};
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Relative floor below which a cell counts as empty in support checks.
pub const SUPPORT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// FFT plans and the Laplacian eigenvalue table for one grid.
pub struct SpectralPlan {
    grid: GridSpec,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    eigenvalues: Vec<f64>,
}

impl SpectralPlan {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid
            .sizes()
            .iter()
            .map(|&n| planner.plan_fft_forward(n))
            .collect();
        let inverse = grid
            .sizes()
            .iter()
            .map(|&n| planner.plan_fft_inverse(n))
            .collect();
        let eigenvalues = (0..grid.cells())
            .map(|m| laplacian_eigenvalue(grid, &grid.coords(m)))
            .collect();
        SpectralPlan {
            grid: grid.clone(),
            forward,
            inverse,
            eigenvalues,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Eigenvalues indexed like cells (mode `m` at the index of coordinates `m`).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn transform(&self, buf: &mut [C64], inverse: bool) {
        let sizes = self.grid.sizes();
        let total = buf.len();
        let mut line = Vec::new();
        for axis in 0..sizes.len() {
            let n = sizes[axis];
            let stride: usize = sizes[axis + 1..].iter().product();
            let fft = if inverse {
                &self.inverse[axis]
            } else {
                &self.forward[axis]
            };
            line.resize(n, C64::new(0.0, 0.0));
            // Each line is identified by its start index: all indices with coordinate 0 on `axis`.
            for start in 0..total {
                if !(start / stride).is_multiple_of(n) {
                    continue;
                }
                for i in 0..n {
                    line[i] = buf[start + i * stride];
                }
                fft.process(&mut line);
                for i in 0..n {
                    buf[start + i * stride] = line[i];
                }
            }
        }
    }

    /// Multiplies Fourier mode `m` of every fiber component by `multiplier(λ_m)`.
    pub fn apply_multiplier(&self, f: &Field, multiplier: impl Fn(f64) -> C64) -> Result<Field> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.cells();
        let d = f.fiber_dim();
        let factors: Vec<C64> = self.eigenvalues.iter().map(|&l| multiplier(l)).collect();
        let mut out = f.clone();
        let mut buf = vec![C64::new(0.0, 0.0); n];
        let scale = 1.0 / n as f64;
        for c in 0..d {
            for (x, b) in buf.iter_mut().enumerate() {
                *b = f.values()[x * d + c];
            }
            self.transform(&mut buf, false);
            for (b, m) in buf.iter_mut().zip(&factors) {
                *b *= m * scale;
            }
            self.transform(&mut buf, true);
            let vals = out.values_mut();
            for (x, b) in buf.iter().enumerate() {
                vals[x * d + c] = *b;
            }
        }
        Ok(out)
    }

    pub fn heat(&self, f: &Field, t: f64) -> Result<Field> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if t == 0.0 {
            return Ok(f.clone());
        }
        self.apply_multiplier(f, |l| C64::new((t * l).exp(), 0.0))
    }

    pub fn schrodinger(&self, f: &Field, t: f64, sign: Sign) -> Result<Field> {
        if t == 0.0 {
            return Ok(f.clone());
        }
        let s = sign.value();
        self.apply_multiplier(f, |l| C64::from_polar(1.0, s * t * l))
    }
}

/// `−Σ_k (4/h_k²) sin²(π m_k / N_k)`.
pub fn laplacian_eigenvalue(grid: &GridSpec, modes: &[usize]) -> f64 {
    modes
        .iter()
        .zip(grid.sizes())
        .zip(grid.spacing())
        .map(|((&m, &n), &h)| -(4.0 / (h * h)) * (PI * m as f64 / n as f64).sin().powi(2))
        .sum()
}

/// `e^{tΔ} f`, `t ≥ 0`.
pub fn evolve_heat(f: &Field, t: f64) -> Result<Field> {
    SpectralPlan::new(f.grid()).heat(f, t)
}

/// `e^{±itΔ} f`.
pub fn evolve_schrodinger(f: &Field, t: f64, sign: Sign) -> Result<Field> {
    SpectralPlan::new(f.grid()).schrodinger(f, t, sign)
}

/// `(𝒫f)(x) = P_x f(x)`.
pub fn apply_projection_field(p: &ProjectionField, f: &Field) -> Result<Field> {
    p.check_field(f)?;
    Ok(f.map_cells(|x, v, out| p.at(x).op().apply_slice(v, out)))
}

/// `(e^{is𝒫}f)(x) = e^{isP_x} f(x)`.
pub fn apply_exp_group(p: &ProjectionField, s: f64, f: &Field) -> Result<Field> {
    p.check_field(f)?;
    let z = ProjectionExponent::imaginary(s);
    Ok(f.map_cells(|x, v, out| exp_projection(p.at(x), z).apply_slice(v, out)))
}

/// Leakage `‖(Id−𝒫) e^{tΔ} 𝒫f‖ / ‖𝒫f‖` for each `t`.
pub fn leakage(p: &ProjectionField, f: &Field, times: &[f64]) -> Result<Vec<f64>> {
    let plan = SpectralPlan::new(f.grid());
    leakage_with_plan(&plan, p, f, times)
}

pub fn leakage_with_plan(
    plan: &SpectralPlan,
    p: &ProjectionField,
    f: &Field,
    times: &[f64],
) -> Result<Vec<f64>> {
    let pf = apply_projection_field(p, f)?;
    let base = pf.norm();
    if base == 0.0 || base <= 1e-14 * f.norm() {
        return Err(Error::AnnihilatedByProjection);
    }
    times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                // (Id − 𝒫)𝒫 = 0
                return Ok(0.0);
            }
            let u = plan.heat(&pf, t)?;
            let inside = apply_projection_field(p, &u)?;
            Ok(u.sub(&inside)?.norm() / base)
        })
        .collect()
}

/// Smallest cell norm of `e^{tΔ}f`, relative to `‖f‖` measured cellwise (`max_x ‖f(x)‖`).
pub fn min_support_ratio(f: &Field, t: f64) -> Result<f64> {
    let u = evolve_heat(f, t)?;
    let scale = (0..f.grid().cells())
        .map(|x| f.fiber(x).norm())
        .fold(0.0, f64::max);
    let min = (0..u.grid().cells())
        .map(|x| u.fiber(x).norm())
        .fold(f64::INFINITY, f64::min);
    Ok(if scale > 0.0 { min / scale } else { 0.0 })
}

/// `true` iff every cell of `e^{tΔ}f` carries a fiber vector above `SUPPORT_TOL` relative.
pub fn has_full_support(f: &Field, t: f64) -> Result<bool> {
    Ok(min_support_ratio(f, t)? > SUPPORT_TOL)
}

/// Minimum of the real part of `e^{tΔ}f` over all cells and components (scalar positivity).
pub fn min_evolved_value(f: &Field, t: f64) -> Result<f64> {
    let u = evolve_heat(f, t)?;
    Ok(u.values()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min))
}
