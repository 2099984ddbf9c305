//! Projection-field presets used by the experiments.
//!
//! * `constant`: `P_x = diag(1, 0, …, 0)` everywhere.
//! * `step`: `diag(1, 0, …)` for `x₁ < 1/2`, its complement `diag(0, 1, …, 1)` elsewhere.
//! * `rotating`: `P_x = R(2πx₁) diag(1, 0, …) R(2πx₁)†`, `R` a rotation in the `(1,2)` fiber plane.
//!
//! Positions are read on the unit torus, i.e. relative to the length of axis 0.

use crate::error::{Error, Result};
use crate::fiber::{complement, project_onto_span, FiberVector, Projection, C64};
use crate::grid::{GridSpec, ProjectionField};
use crate::rng::Ensemble;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetKind {
    Constant,
    Step,
    Rotating,
    FromFile,
}

impl FromStr for PresetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(PresetKind::Constant),
            "step" => Ok(PresetKind::Step),
            "rotating" => Ok(PresetKind::Rotating),
            "from-file" => Ok(PresetKind::FromFile),
            other => Err(Error::Parse(format!("unknown preset {other:?}"))),
        }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PresetKind::Constant => "constant",
            PresetKind::Step => "step",
            PresetKind::Rotating => "rotating",
            PresetKind::FromFile => "from-file",
        };
        f.write_str(s)
    }
}

fn axis0_fraction(grid: &GridSpec, x: &[f64]) -> f64 {
    let len = grid.sizes()[0] as f64 * grid.spacing()[0];
    x[0] / len
}

fn need_two(d: usize, name: &str) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "preset {name} needs fiber dimension >= 2, got {d}"
        )));
    }
    Ok(())
}

pub fn constant(grid: &GridSpec, d: usize) -> ProjectionField {
    ProjectionField::constant(grid, &Projection::coordinate(d, &[0]))
}

pub fn step(grid: &GridSpec, d: usize) -> Result<ProjectionField> {
    need_two(d, "step")?;
    let left = Projection::coordinate(d, &[0]);
    let right = complement(&left);
    Ok(ProjectionField::from_fn(grid, d, |x| {
        if axis0_fraction(grid, x) < 0.5 {
            left.clone()
        } else {
            right.clone()
        }
    }))
}

/// Rank-one projection onto `cos θ e₁ + sin θ e₂`.
pub fn rotated_axis(d: usize, theta: f64) -> Projection {
    let mut v = vec![C64::new(0.0, 0.0); d];
    v[0] = C64::new(theta.cos(), 0.0);
    v[1] = C64::new(theta.sin(), 0.0);
    project_onto_span(&[FiberVector::from_slice(&v)]).expect("unit vector spans a line")
}

pub fn rotating(grid: &GridSpec, d: usize) -> Result<ProjectionField> {
    need_two(d, "rotating")?;
    Ok(ProjectionField::from_fn(grid, d, |x| {
        rotated_axis(d, TAU * axis0_fraction(grid, x))
    }))
}

/// A random constant projection of random rank in `0..=d`.
pub fn random_constant(grid: &GridSpec, d: usize, rng: &mut Ensemble) -> Result<ProjectionField> {
    let rank = rng.below(d + 1);
    let p = if rank == 0 {
        Projection::zero(d)
    } else {
        let vs: Vec<FiberVector> = (0..rank)
            .map(|_| FiberVector::from_slice(&rng.complex_normals(d)))
            .collect();
        project_onto_span(&vs)?
    };
    Ok(ProjectionField::constant(grid, &p))
}

/// Rank-one projection onto `v(x) = v₀ + Σ_k Σ_{m=1,2} (a_{km} cos 2πm x_k + b_{km} sin 2πm x_k)`
/// with complex Gaussian coefficients; `v₀` is scaled up so `v` stays away from zero.
pub fn random_smooth(grid: &GridSpec, d: usize, rng: &mut Ensemble) -> Result<ProjectionField> {
    let v0: Vec<C64> = rng.complex_normals(d).iter().map(|z| z * 2.0).collect();
    let mut coeffs = Vec::new();
    for _k in 0..grid.dims() {
        for _m in 1..=2 {
            coeffs.push((rng.complex_normals(d), rng.complex_normals(d)));
        }
    }
    let lengths: Vec<f64> = grid
        .sizes()
        .iter()
        .zip(grid.spacing())
        .map(|(&n, &h)| n as f64 * h)
        .collect();
    let mut values = Vec::with_capacity(grid.cells());
    for x in 0..grid.cells() {
        let pos = grid.position(x);
        let mut v = v0.clone();
        let mut idx = 0;
        for k in 0..grid.dims() {
            for m in 1..=2 {
                let phase = TAU * m as f64 * pos[k] / lengths[k];
                let (a, b) = &coeffs[idx];
                for c in 0..d {
                    v[c] += a[c] * phase.cos() + b[c] * phase.sin();
                }
                idx += 1;
            }
        }
        values.push(project_onto_span(&[FiberVector::from_slice(&v)])?);
    }
    ProjectionField::new(grid, values)
}
