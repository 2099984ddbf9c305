//! Symmetry analysis for the unitary groups `e^{is𝒫}` generated by projection fields.
//!
//! Three equivalent conditions are evaluated numerically for a projection field `𝒫`
//! and the discrete Laplacian:
//!
//! * (a) the range of `𝒫` is invariant under the heat semigroup (measured as leakage);
//! * (b) `a(𝒫ψ, ψ) = a(𝒫ψ, 𝒫ψ)`, i.e. `a(𝒫ψ, (Id−𝒫)ψ) = 0`;
//! * (c) `a(e^{is𝒫}ψ) = a(ψ)` for all real `s`.
//!
//! On a finite grid every field lies in the form domain, so the three conditions are
//! exactly equivalent and the verdicts must agree. The module also builds the gauge
//! field `A_{s,k} = (e^{is}−1) e^{−isP_x} (D_kP)(x)` that turns `a(e^{is𝒫}f)` into the
//! energy of a covariant derivative, detects locally constant projection fields and
//! scans for invariant ideals of the heat semigroup.

use crate::calculus::{
    exp_projection, grad_offdiagonal_decompose, is_ideal_projection, projection_gradient,
    ProjectionExponent,
};
use crate::error::{Error, Result};
use crate::evolution::{self, SpectralPlan};
use crate::fiber::{FiberOperator, FiberVector, Projection, C64};
use crate::grid::{self, Field, GridSpec, OperatorField, ProjectionField, Trajectory};
use crate::rng::Ensemble;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

pub const PASS_THRESHOLD: f64 = 1e-8;
pub const FAIL_THRESHOLD: f64 = 1e-3;
/// Sup-norm below which a gauge field counts as vanishing.
pub const GAUGE_TOL: f64 = 1e-10;
pub const CONST_TOL: f64 = 1e-8;
/// Leakage below which a coordinate ideal counts as invariant.
pub const IDEAL_LEAKAGE_TOL: f64 = 1e-10;
/// Relative mass that must escape a cell subset for it not to be invariant.
pub const OUTSIDE_MASS_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Symmetric,
    NotSymmetric,
    /// Between the pass and fail thresholds: refine `h`.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub pass: f64,
    pub fail: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            pass: PASS_THRESHOLD,
            fail: FAIL_THRESHOLD,
        }
    }
}

impl Thresholds {
    pub fn classify(&self, residual: f64) -> Verdict {
        if residual <= self.pass {
            Verdict::Symmetric
        } else if residual >= self.fail {
            Verdict::NotSymmetric
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOptions {
    pub trials: usize,
    pub seed: u64,
    pub s_samples: Vec<f64>,
    pub times: Vec<f64>,
    pub thresholds: Thresholds,
}

impl Default for CriterionOptions {
    fn default() -> Self {
        CriterionOptions {
            trials: 8,
            seed: 0,
            s_samples: vec![FRAC_PI_4, FRAC_PI_2, PI],
            times: vec![0.01, 0.1, 1.0],
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    /// `max_ψ |a(𝒫ψ, ψ − 𝒫ψ)| / (1 + a(ψ))`.
    pub residual_b: f64,
    /// `(s, max_ψ |a(e^{is𝒫}ψ) − a(ψ)| / (1 + a(ψ)))` for each sampled `s`.
    pub residual_c: Vec<(f64, f64)>,
    /// Criterion (c) at `s = π`, always evaluated.
    pub residual_c_pi: f64,
    /// `max_{ψ,t} ‖(Id−𝒫)e^{tΔ}𝒫ψ‖ / ‖𝒫ψ‖` over the time grid.
    pub max_leakage: f64,
    pub verdict_b: Verdict,
    pub verdict_c_pi: Verdict,
    pub verdict_leakage: Verdict,
    pub verdict: Verdict,
    /// Per-axis `max_x ‖D_kP(x)‖`.
    pub regularity: Vec<f64>,
    pub test_fields: usize,
    pub thresholds: Thresholds,
}

impl SymmetryReport {
    /// Pass/fail agreement of (a), (b) and (c at π) at the pass threshold.
    pub fn conditions_agree(&self) -> bool {
        let t = self.thresholds.pass;
        let b = self.residual_b <= t;
        let c = self.residual_c_pi <= t;
        let a = self.max_leakage <= t;
        a == b && b == c
    }
}

/// Deterministic test ensemble: the `2·d·n` plane waves `exp(±2πi x_k) e_j`, followed by
/// `trials` complex Gaussian fields drawn from substream 1 of `seed`.
pub fn test_ensemble(grid: &GridSpec, d: usize, trials: usize, seed: u64) -> Vec<Field> {
    let mut fields = Vec::with_capacity(2 * d * grid.dims() + trials);
    for k in 0..grid.dims() {
        for j in 0..d {
            for sign in [1i64, -1] {
                let mut modes = vec![0i64; grid.dims()];
                modes[k] = sign;
                fields.push(Field::plane_wave(grid, &modes, &FiberVector::basis(d, j)));
            }
        }
    }
    let mut rng = Ensemble::substream(seed, 1);
    for _ in 0..trials {
        fields.push(Field::random(grid, d, &mut rng));
    }
    fields
}

fn criterion_c_residual(p: &ProjectionField, s: f64, psi: &Field, a_psi: f64) -> Result<f64> {
    let rotated = evolution::apply_exp_group(p, s, psi)?;
    Ok((grid::form_a(&rotated) - a_psi).abs() / (1.0 + a_psi))
}

struct FieldResiduals {
    b: f64,
    c: Vec<f64>,
    c_pi: f64,
    leakage: f64,
}

fn field_residuals(
    plan: &SpectralPlan,
    p: &ProjectionField,
    psi: &Field,
    opts: &CriterionOptions,
) -> Result<FieldResiduals> {
    let a_psi = grid::form_a(psi);
    let ppsi = evolution::apply_projection_field(p, psi)?;
    let rest = psi.sub(&ppsi)?;
    let b = grid::form_a_sesq(&ppsi, &rest)?.norm() / (1.0 + a_psi);
    let c = opts
        .s_samples
        .iter()
        .map(|&s| criterion_c_residual(p, s, psi, a_psi))
        .collect::<Result<Vec<_>>>()?;
    let c_pi = criterion_c_residual(p, PI, psi, a_psi)?;
    let leakage = match evolution::leakage_with_plan(plan, p, psi, &opts.times) {
        Ok(l) => l.into_iter().fold(0.0, f64::max),
        // Nothing to leak.
        Err(Error::AnnihilatedByProjection) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(FieldResiduals {
        b,
        c,
        c_pi,
        leakage,
    })
}

/// Evaluates invariance criteria (a), (b) and (c) on the test ensemble.
pub fn check_invariance_criterion(
    p: &ProjectionField,
    opts: &CriterionOptions,
) -> Result<SymmetryReport> {
    let fields = test_ensemble(p.grid(), p.fiber_dim(), opts.trials, opts.seed);
    let plan = SpectralPlan::new(p.grid());
    let per_field: Vec<FieldResiduals> = fields
        .par_iter()
        .map(|psi| field_residuals(&plan, p, psi, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut residual_b = 0.0f64;
    let mut residual_c_pi = 0.0f64;
    let mut max_leakage = 0.0f64;
    let mut c_max = vec![0.0f64; opts.s_samples.len()];
    for r in &per_field {
        residual_b = residual_b.max(r.b);
        residual_c_pi = residual_c_pi.max(r.c_pi);
        max_leakage = max_leakage.max(r.leakage);
        for (m, &c) in c_max.iter_mut().zip(&r.c) {
            *m = m.max(c);
        }
    }
    let th = opts.thresholds;
    let worst = c_max
        .iter()
        .copied()
        .chain([residual_b, residual_c_pi, max_leakage])
        .fold(0.0, f64::max);
    Ok(SymmetryReport {
        residual_b,
        residual_c: opts.s_samples.iter().copied().zip(c_max).collect(),
        residual_c_pi,
        max_leakage,
        verdict_b: th.classify(residual_b),
        verdict_c_pi: th.classify(residual_c_pi),
        verdict_leakage: th.classify(max_leakage),
        verdict: th.classify(worst),
        regularity: projection_gradient(p)
            .iter()
            .map(|g| g.sup_norm())
            .collect(),
        test_fields: fields.len(),
        thresholds: th,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalSymmetry {
    pub symmetric: bool,
    pub residual: f64,
}

/// Whether `{e^{is𝒫}}` preserves the Dirichlet energy: the maximum criterion-(c)
/// residual over the sampled `s` (and `s = π`) is at most the pass threshold.
pub fn check_global_symmetry(
    p: &ProjectionField,
    opts: &CriterionOptions,
) -> Result<GlobalSymmetry> {
    let fields = test_ensemble(p.grid(), p.fiber_dim(), opts.trials, opts.seed);
    let mut samples = opts.s_samples.clone();
    samples.push(PI);
    let residuals: Vec<f64> = fields
        .par_iter()
        .map(|psi| {
            let a = grid::form_a(psi);
            samples
                .iter()
                .map(|&s| criterion_c_residual(p, s, psi, a))
                .try_fold(0.0f64, |m, r| r.map(|r| m.max(r)))
        })
        .collect::<Result<Vec<_>>>()?;
    let residual = residuals.into_iter().fold(0.0, f64::max);
    Ok(GlobalSymmetry {
        symmetric: residual <= opts.thresholds.pass,
        residual,
    })
}

/// Per-axis multiplier `A_{s,k}(x) = (e^{is}−1) e^{−isP_x} (D_kP)(x)`.
#[derive(Debug, Clone)]
pub struct GaugeField {
    pub grid: GridSpec,
    pub s: f64,
    pub components: Vec<OperatorField>,
}

impl GaugeField {
    pub fn sup_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.sup_norm())
            .fold(0.0, f64::max)
    }

    /// Cellwise `max_k ‖A_{s,k}(x)‖`.
    pub fn cell_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.grid.cells()];
        for c in &self.components {
            for (o, n) in out.iter_mut().zip(c.norms()) {
                *o = o.max(n);
            }
        }
        out
    }
}

pub fn gauge_field(p: &ProjectionField, s: f64) -> GaugeField {
    let s = s.rem_euclid(std::f64::consts::TAU);
    let factor = C64::from_polar(1.0, s) - 1.0;
    let back = ProjectionExponent::imaginary(-s);
    let components = projection_gradient(p)
        .into_iter()
        .map(|dp| {
            let values = (0..p.grid().cells())
                .map(|x| {
                    let twist = exp_projection(p.at(x), back);
                    FiberOperator(&twist.0 * &dp.at(x).0 * factor)
                })
                .collect();
            OperatorField::new(p.grid(), values)
        })
        .collect();
    GaugeField {
        grid: p.grid().clone(),
        s,
        components,
    }
}

/// Off-diagonal form `(1−e^{−is}) P(DP)P⊥ + (e^{is}−1) P⊥(DP)P`, equal to the gauge
/// field whenever `DP` has no diagonal blocks.
pub fn gauge_field_split(p: &ProjectionField, s: f64) -> GaugeField {
    let s = s.rem_euclid(std::f64::consts::TAU);
    let up = C64::new(1.0, 0.0) - C64::from_polar(1.0, -s);
    let down = C64::from_polar(1.0, s) - 1.0;
    let components = grad_offdiagonal_decompose(p)
        .into_iter()
        .map(|split| {
            let values = (0..p.grid().cells())
                .map(|x| {
                    FiberOperator(&split.p_dp_perp.at(x).0 * up + &split.perp_dp_p.at(x).0 * down)
                })
                .collect();
            OperatorField::new(p.grid(), values)
        })
        .collect();
    GaugeField {
        grid: p.grid().clone(),
        s,
        components,
    }
}

/// Per axis: `A_{s,k}(x) f(x + shift·h e_k) + D_k f(x)`.
fn covariant_gradient(gauge: &GaugeField, f: &Field, shifted: bool) -> Vec<Field> {
    let grad = grid::gradient(f);
    let grid = f.grid();
    let d = f.fiber_dim();
    grad.into_iter()
        .enumerate()
        .map(|(k, dk)| {
            let comp = &gauge.components[k];
            let mut tmp = vec![C64::new(0.0, 0.0); d];
            dk.map_cells(|x, dfx, out| {
                let src = if shifted { grid.shift(x, k, true) } else { x };
                comp.at(x).apply_slice(f.cell(src), &mut tmp);
                for c in 0..d {
                    out[c] = tmp[c] + dfx[c];
                }
            })
        })
        .collect()
}

/// `a_s(f) = hⁿ Σ_x Σ_k ‖A_{s,k}(x) f(x) + D_k f(x)‖²`; approximates `a(e^{is𝒫}f)` to `O(h)`.
pub fn form_a_s(p: &ProjectionField, s: f64, f: &Field) -> Result<f64> {
    p.check_field(f)?;
    let g = gauge_field(p, s);
    Ok(covariant_gradient(&g, f, false)
        .iter()
        .map(|c| c.norm_sqr())
        .sum())
}

/// Discrete Leibniz form `hⁿ Σ_x Σ_k ‖A_{s,k}(x) f(x + h e_k) + D_k f(x)‖²`, which equals
/// `a(e^{is𝒫}f)` up to rounding.
pub fn form_a_s_exact(p: &ProjectionField, s: f64, f: &Field) -> Result<f64> {
    p.check_field(f)?;
    let g = gauge_field(p, s);
    Ok(covariant_gradient(&g, f, true)
        .iter()
        .map(|c| c.norm_sqr())
        .sum())
}

/// `𝓛_s(φ) = Σ_j dt_j · hⁿ Σ_x Σ_k ‖A_{s,k}(x) φ_j(x)‖²` over the trajectory's intervals.
pub fn interaction_lagrangian(p: &ProjectionField, s: f64, traj: &Trajectory) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::TooFewSamples(traj.len()));
    }
    let g = gauge_field(p, s);
    let mut total = 0.0;
    for j in 0..traj.len() - 1 {
        let dt = traj.times()[j + 1] - traj.times()[j];
        let phi = &traj.states()[j];
        p.check_field(phi)?;
        let d = phi.fiber_dim();
        let mut tmp = vec![C64::new(0.0, 0.0); d];
        let mut acc = 0.0;
        for comp in &g.components {
            for x in 0..phi.grid().cells() {
                comp.at(x).apply_slice(phi.cell(x), &mut tmp);
                acc += tmp.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        total += dt * acc * phi.grid().cell_volume();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentLabel {
    Zero,
    Identity,
    CoordinateIdeal,
    General,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalConstancyPartition {
    /// Component id of every cell.
    pub component: Vec<usize>,
    /// First cell's projection in each component.
    pub representatives: Vec<Projection>,
    pub labels: Vec<ComponentLabel>,
    pub sizes: Vec<usize>,
    /// Largest adjacent-cell distance `‖P_x − P_y‖` inside a component.
    pub residual: f64,
    pub epsilon: f64,
}

impl LocalConstancyPartition {
    pub fn count(&self) -> usize {
        self.representatives.len()
    }
}

fn neighbours(grid: &GridSpec, x: usize) -> impl Iterator<Item = usize> + '_ {
    (0..grid.dims()).flat_map(move |k| [grid.shift(x, k, true), grid.shift(x, k, false)])
}

fn label_projection(p: &Projection, eps: f64) -> ComponentLabel {
    let d = p.dim();
    if p.op().norm() <= eps {
        ComponentLabel::Zero
    } else if (p.op() - &FiberOperator::identity(d)).norm() <= eps {
        ComponentLabel::Identity
    } else if is_ideal_projection(p, 1000, &mut Ensemble::new(0)).is_ideal {
        ComponentLabel::CoordinateIdeal
    } else {
        ComponentLabel::General
    }
}

/// Connected components of the graph joining adjacent cells whose projections differ by
/// at most `eps` in operator norm.
pub fn detect_locally_constant(p: &ProjectionField, eps: f64) -> LocalConstancyPartition {
    let grid = p.grid();
    let n = grid.cells();
    let mut component = vec![usize::MAX; n];
    let mut representatives = Vec::new();
    let mut sizes = Vec::new();
    let mut residual = 0.0f64;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = representatives.len();
        representatives.push(p.at(start).clone());
        sizes.push(0);
        component[start] = id;
        queue.push_back(start);
        while let Some(x) = queue.pop_front() {
            sizes[id] += 1;
            for y in neighbours(grid, x) {
                let dist = (p.at(x).op() - p.at(y).op()).norm();
                if dist <= eps {
                    residual = residual.max(dist);
                    if component[y] == usize::MAX {
                        component[y] = id;
                        queue.push_back(y);
                    }
                }
            }
        }
    }
    let labels = representatives
        .iter()
        .map(|r| label_projection(r, eps))
        .collect();
    LocalConstancyPartition {
        component,
        representatives,
        labels,
        sizes,
        residual,
        epsilon: eps,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NecessaryConditionReport {
    pub gauge_sup_norm_pi: f64,
    /// Cells where `‖A_{π,k}(x)‖` exceeds the gauge tolerance.
    pub gauge_support: Vec<usize>,
    pub criterion: SymmetryReport,
    pub components: usize,
    pub labels: Vec<ComponentLabel>,
    pub partition_residual: f64,
    pub gauge_vanishes: bool,
    pub single_component: bool,
    pub criterion_symmetric: bool,
    /// The three facts above coincide, as they must on a connected torus.
    pub consistent: bool,
}

/// Pairs the gauge field at `s = π` with the invariance criterion and the locally-constant
/// partition.
pub fn necessary_condition_experiment(
    p: &ProjectionField,
    opts: &CriterionOptions,
    eps_const: f64,
) -> Result<NecessaryConditionReport> {
    let gauge = gauge_field(p, PI);
    let norms = gauge.cell_norms();
    let gauge_sup_norm_pi = norms.iter().copied().fold(0.0, f64::max);
    let gauge_support = norms
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > GAUGE_TOL)
        .map(|(x, _)| x)
        .collect();
    let criterion = check_invariance_criterion(p, opts)?;
    let partition = detect_locally_constant(p, eps_const);
    let gauge_vanishes = gauge_sup_norm_pi <= GAUGE_TOL;
    let single_component = partition.count() == 1;
    let criterion_symmetric = criterion.verdict == Verdict::Symmetric;
    Ok(NecessaryConditionReport {
        gauge_sup_norm_pi,
        gauge_support,
        components: partition.count(),
        labels: partition.labels.clone(),
        partition_residual: partition.residual,
        consistent: gauge_vanishes == single_component && single_component == criterion_symmetric,
        gauge_vanishes,
        single_component,
        criterion_symmetric,
        criterion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibilityOptions {
    /// Cell counts up to this size are scanned exhaustively.
    pub exhaustive_limit: usize,
    pub random_subsets: usize,
    /// Random fields used as leakage probes for coordinate ideals.
    pub probes: usize,
    pub seed: u64,
}

impl Default for IrreducibilityOptions {
    fn default() -> Self {
        IrreducibilityOptions {
            exhaustive_limit: 12,
            random_subsets: 100,
            probes: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetLeakage {
    /// 1-based fiber coordinates spanning the ideal.
    pub subset: Vec<usize>,
    pub leakage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibilityReport {
    pub fiber_dim: usize,
    pub time: f64,
    pub irreducible: bool,
    /// First invariant coordinate ideal found (1-based coordinates).
    pub witness: Option<Vec<usize>>,
    /// Leakage of every nonempty proper coordinate ideal (`d ≥ 2`).
    pub ideal_leakage: Vec<SubsetLeakage>,
    /// Number of cell subsets examined (`d = 1`).
    pub cell_subsets_checked: usize,
    pub exhaustive: bool,
    /// Smallest relative mass escaping a cell subset (`d = 1`).
    pub min_outside_mass: Option<f64>,
    /// Smallest value of the heat flow of a nonnegative point mass (`d = 1`).
    pub positivity_min_value: Option<f64>,
    /// Smallest relative cell norm of the heat flow of a localized field.
    pub min_support_ratio: f64,
}

fn mask_to_coords(mask: u64, d: usize) -> Vec<usize> {
    (0..d).filter(|j| mask >> j & 1 == 1).collect()
}

/// Relative mass of `e^{tΔ} 1_ω` outside `ω`.
fn outside_mass(plan: &SpectralPlan, grid: &GridSpec, inside: &[bool], t: f64) -> Result<f64> {
    let values = inside
        .iter()
        .map(|&b| C64::new(if b { 1.0 } else { 0.0 }, 0.0))
        .collect();
    let f = Field::from_values(grid, 1, values)?;
    let u = plan.heat(&f, t)?;
    let out: f64 = inside
        .iter()
        .enumerate()
        .filter(|(_, &b)| !b)
        .map(|(x, _)| u.cell(x)[0].norm_sqr())
        .sum();
    Ok((out * grid.cell_volume()).sqrt() / f.norm())
}

/// Searches for nontrivial closed ideals invariant under the heat semigroup.
///
/// For `d ≥ 2` every nonempty proper coordinate ideal `L²(torus; span{e_j : j ∈ S})` is
/// tested; any with leakage at most [`IDEAL_LEAKAGE_TOL`] is a witness of reducibility.
/// For `d = 1` the ideals are `L²(ω)` for cell subsets `ω`, scanned exhaustively up to
/// `exhaustive_limit` cells and randomly beyond; mass escaping `ω` above
/// [`OUTSIDE_MASS_TOL`] rules `ω` out.
pub fn irreducibility_scan(
    grid: &GridSpec,
    d: usize,
    t: f64,
    opts: &IrreducibilityOptions,
) -> Result<IrreducibilityReport> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "fiber dimension must be >= 1".into(),
        ));
    }
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidArgument(format!("time must be > 0, got {t}")));
    }
    if d > 8 {
        return Err(Error::InvalidArgument(format!(
            "coordinate-ideal enumeration supports d <= 8, got {d}"
        )));
    }
    let plan = SpectralPlan::new(grid);
    let n = grid.cells();

    let mut localized = Field::zeros(grid, d);
    localized.cell_mut(0)[0] = C64::new(1.0, 0.0);
    let min_support_ratio = evolution::min_support_ratio(&localized, t)?;

    if d >= 2 {
        let mut rng = Ensemble::substream(opts.seed, 2);
        let probes: Vec<Field> = (0..opts.probes.max(1))
            .map(|_| Field::random(grid, d, &mut rng))
            .collect();
        let masks: Vec<u64> = (1..(1u64 << d) - 1).collect();
        let ideal_leakage = masks
            .par_iter()
            .map(|&mask| {
                let coords = mask_to_coords(mask, d);
                let pf = ProjectionField::constant(grid, &Projection::coordinate(d, &coords));
                let mut worst = 0.0f64;
                for f in &probes {
                    match evolution::leakage_with_plan(&plan, &pf, f, &[t]) {
                        Ok(l) => worst = worst.max(l[0]),
                        Err(Error::AnnihilatedByProjection) => {}
                        Err(e) => return Err(e),
                    }
                }
                Ok(SubsetLeakage {
                    subset: coords.iter().map(|j| j + 1).collect(),
                    leakage: worst,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let witness = ideal_leakage
            .iter()
            .find(|s| s.leakage <= IDEAL_LEAKAGE_TOL)
            .map(|s| s.subset.clone());
        return Ok(IrreducibilityReport {
            fiber_dim: d,
            time: t,
            irreducible: witness.is_none(),
            witness,
            ideal_leakage,
            cell_subsets_checked: 0,
            exhaustive: true,
            min_outside_mass: None,
            positivity_min_value: None,
            min_support_ratio,
        });
    }

    let exhaustive = n <= opts.exhaustive_limit;
    let subsets: Vec<Vec<bool>> = if exhaustive {
        (1..(1u64 << n) - 1)
            .map(|mask| (0..n).map(|x| mask >> x & 1 == 1).collect())
            .collect()
    } else {
        let mut rng = Ensemble::substream(opts.seed, 3);
        let mut out = Vec::with_capacity(opts.random_subsets);
        while out.len() < opts.random_subsets {
            let s: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.5).collect();
            let k = s.iter().filter(|&&b| b).count();
            if k > 0 && k < n {
                out.push(s);
            }
        }
        out
    };
    let masses = subsets
        .par_iter()
        .map(|s| outside_mass(&plan, grid, s, t))
        .collect::<Result<Vec<_>>>()?;
    let min_outside = masses.iter().copied().fold(f64::INFINITY, f64::min);
    let mut point = Field::zeros(grid, 1);
    point.cell_mut(0)[0] = C64::new(1.0, 0.0);
    let positivity = plan
        .heat(&point, t)?
        .values()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    Ok(IrreducibilityReport {
        fiber_dim: 1,
        time: t,
        irreducible: min_outside > OUTSIDE_MASS_TOL,
        witness: None,
        ideal_leakage: Vec::new(),
        cell_subsets_checked: subsets.len(),
        exhaustive,
        min_outside_mass: Some(min_outside),
        positivity_min_value: Some(positivity),
        min_support_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn g1(n: usize) -> GridSpec {
        GridSpec::unit_torus(vec![n]).unwrap()
    }

    #[test]
    fn thresholds_classify() {
        let t = Thresholds::default();
        assert_eq!(t.classify(0.0), Verdict::Symmetric);
        assert_eq!(t.classify(1e-5), Verdict::Inconclusive);
        assert_eq!(t.classify(0.1), Verdict::NotSymmetric);
    }

    #[test]
    fn constant_and_identity_fields_are_symmetric() {
        let g = g1(32);
        let opts = CriterionOptions::default();
        for p in [
            presets::constant(&g, 2),
            ProjectionField::constant(&g, &Projection::identity(2)),
        ] {
            let r = check_invariance_criterion(&p, &opts).unwrap();
            assert!(r.residual_b <= 1e-12, "{r:?}");
            assert!(r.residual_c.iter().all(|&(_, c)| c <= 1e-12));
            assert_eq!(r.verdict, Verdict::Symmetric);
            assert!(r.conditions_agree());
            assert!(check_global_symmetry(&p, &opts).unwrap().symmetric);
        }
    }

    #[test]
    fn rotating_field_is_not_symmetric() {
        let g = g1(64);
        let p = presets::rotating(&g, 2).unwrap();
        let opts = CriterionOptions::default();
        let r = check_invariance_criterion(&p, &opts).unwrap();
        assert!(r.residual_b > 1e-3);
        assert_eq!(r.verdict, Verdict::NotSymmetric);
        assert!(r.conditions_agree());
        let gs = check_global_symmetry(&p, &opts).unwrap();
        assert!(!gs.symmetric && gs.residual > 1e-3);
    }

    #[test]
    fn gauge_field_vanishing_cases() {
        let g = g1(32);
        let r = presets::rotating(&g, 2).unwrap();
        assert_eq!(gauge_field(&r, 0.0).sup_norm(), 0.0);
        assert_eq!(gauge_field(&presets::constant(&g, 2), 1.1).sup_norm(), 0.0);
    }

    #[test]
    fn gauge_field_at_pi_matches_direct_formula() {
        let g = g1(32);
        let p = presets::rotating(&g, 2).unwrap();
        let a = gauge_field(&p, PI);
        let h = 1.0 / 32.0;
        for x in 0..32 {
            // e^{−iπP} = Id − 2P, so A = −2 (Id − 2P) (P(x+h) − P(x)) / h.
            let pm = p.at(x).matrix();
            let dp = (p.at((x + 1) % 32).matrix() - pm) / C64::new(h, 0.0);
            let id = nalgebra::DMatrix::<C64>::identity(2, 2);
            let direct = (id - pm * C64::new(2.0, 0.0)) * dp * C64::new(-2.0, 0.0);
            assert!((&a.components[0].at(x).0 - direct).norm() < 1e-12 * 32.0);
        }
    }

    #[test]
    fn gauge_split_residual_bounded_by_diagonal_blocks() {
        let g = g1(64);
        let p = presets::rotating(&g, 2).unwrap();
        let splits = grad_offdiagonal_decompose(&p);
        for s in [0.3, FRAC_PI_2, PI, 5.0] {
            let a = gauge_field(&p, s);
            let b = gauge_field_split(&p, s);
            let factor = (C64::from_polar(1.0, s) - 1.0).norm();
            for x in 0..64 {
                let diff = (a.components[0].at(x) - b.components[0].at(x)).norm();
                assert!(diff <= factor * splits[0].diagonal_residual[x] + 1e-12);
            }
        }
    }

    #[test]
    fn form_a_s_identities() {
        let g = g1(32);
        let mut e = Ensemble::new(3);
        let f = Field::random(&g, 2, &mut e);
        let r = presets::rotating(&g, 2).unwrap();
        assert_eq!(form_a_s(&r, 0.0, &f).unwrap(), grid::form_a(&f));
        assert_eq!(form_a_s_exact(&r, 0.0, &f).unwrap(), grid::form_a(&f));
        let c = presets::constant(&g, 2);
        assert_eq!(form_a_s(&c, 1.0, &f).unwrap(), grid::form_a(&f));
        for s in [FRAC_PI_2, 1.0, PI, -2.5] {
            let exact = form_a_s_exact(&r, s, &f).unwrap();
            let direct = grid::form_a(&evolution::apply_exp_group(&r, s, &f).unwrap());
            assert!((exact - direct).abs() <= 1e-11 * (1.0 + grid::form_a(&f)));
            assert!(form_a_s(&r, s, &f).unwrap() >= 0.0);
        }
    }

    #[test]
    fn interaction_lagrangian_properties() {
        let g = g1(32);
        let mut e = Ensemble::new(4);
        let states: Vec<Field> = (0..4).map(|_| Field::random(&g, 2, &mut e)).collect();
        let traj = Trajectory::new(vec![0.0, 0.1, 0.25, 0.3], states).unwrap();
        let r = presets::rotating(&g, 2).unwrap();
        assert_eq!(interaction_lagrangian(&r, 0.0, &traj).unwrap(), 0.0);
        assert_eq!(
            interaction_lagrangian(&presets::constant(&g, 2), 1.0, &traj).unwrap(),
            0.0
        );
        let l = interaction_lagrangian(&r, 0.7, &traj).unwrap();
        let l2 = interaction_lagrangian(&r, 0.7 + std::f64::consts::TAU, &traj).unwrap();
        assert!(l > 0.0);
        assert!((l - l2).abs() <= 1e-12 * l);
    }

    #[test]
    fn locally_constant_partitions() {
        let g = g1(64);
        let c = detect_locally_constant(&presets::constant(&g, 2), CONST_TOL);
        assert_eq!(c.count(), 1);
        assert_eq!(c.labels, vec![ComponentLabel::CoordinateIdeal]);
        let s = detect_locally_constant(&presets::step(&g, 2).unwrap(), CONST_TOL);
        assert_eq!(s.count(), 2);
        assert_eq!(s.sizes, vec![32, 32]);
        assert!(s
            .labels
            .iter()
            .all(|&l| l == ComponentLabel::CoordinateIdeal));
        for x in 0..64 {
            assert_eq!(s.component[x], usize::from(x >= 32));
        }
        let r = detect_locally_constant(&presets::rotating(&g, 2).unwrap(), CONST_TOL);
        assert_eq!(r.count(), 64);
        let z = detect_locally_constant(
            &ProjectionField::constant(&g, &Projection::zero(2)),
            CONST_TOL,
        );
        assert_eq!(z.labels, vec![ComponentLabel::Zero]);
    }

    #[test]
    fn step_gauge_field_lives_on_interfaces() {
        let g = g1(64);
        let p = presets::step(&g, 2).unwrap();
        let rep =
            necessary_condition_experiment(&p, &CriterionOptions::default(), CONST_TOL).unwrap();
        assert_eq!(rep.gauge_support, vec![31, 63]);
        // ‖P_L − P_R‖ / h with the factor |e^{iπ} − 1| = 2.
        assert!((rep.gauge_sup_norm_pi - 2.0 * 64.0).abs() < 1e-9);
        assert!(!rep.criterion_symmetric && rep.consistent);
    }

    #[test]
    fn irreducibility_by_fiber_dimension() {
        let opts = IrreducibilityOptions::default();
        let r = irreducibility_scan(&g1(16), 2, 0.01, &opts).unwrap();
        assert!(!r.irreducible);
        assert_eq!(r.witness, Some(vec![1]));
        let r = irreducibility_scan(&g1(10), 1, 0.01, &opts).unwrap();
        assert!(r.irreducible && r.exhaustive);
        assert_eq!(r.cell_subsets_checked, (1 << 10) - 2);
        assert!(r.positivity_min_value.unwrap() > 0.0);
        let r = irreducibility_scan(&g1(64), 1, 0.01, &opts).unwrap();
        assert!(r.irreducible && !r.exhaustive);
        assert!(irreducibility_scan(&g1(8), 1, 0.0, &opts).is_err());
    }
}
