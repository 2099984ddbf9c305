//! Scenario configuration: flat UTF-8 `key = value` text with dotted keys.
//!
//! ```text
//! # comments run to the end of the line
//! grid.sizes = 32, 32
//! fiber.dim = 2
//! preset = rotating
//! s.samples = pi/4, pi/2, pi
//! ```
//!
//! Lists are comma separated. Real values accept decimal literals and the forms
//! `pi`, `a*pi`, `pi/b` and `a*pi/b`. Unknown or repeated keys are errors; every
//! diagnostic carries the offending line number.

use crate::error::{Error, Result};
use crate::presets::PresetKind;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulateKind {
    Heat,
    SchrodingerPlus,
    SchrodingerMinus,
}

impl FromStr for SimulateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat" => Ok(SimulateKind::Heat),
            "schrodinger" | "schrodinger-plus" => Ok(SimulateKind::SchrodingerPlus),
            "schrodinger-minus" => Ok(SimulateKind::SchrodingerMinus),
            other => Err(Error::Parse(format!("unknown simulation kind {other:?}"))),
        }
    }
}

impl fmt::Display for SimulateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimulateKind::Heat => "heat",
            SimulateKind::SchrodingerPlus => "schrodinger-plus",
            SimulateKind::SchrodingerMinus => "schrodinger-minus",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Projection invariants and algebraic identities.
    pub algebraic: f64,
    /// Minimum measured convergence order in refinement studies.
    pub discretization_order: f64,
    pub pass: f64,
    pub fail: f64,
    /// Adjacent-cell distance below which projections count as equal.
    pub locally_constant: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            algebraic: 1e-12,
            discretization_order: 0.9,
            pass: 1e-8,
            fail: 1e-3,
            locally_constant: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Cells per axis on the unit torus; `h = 1/N_k`.
    pub grid_sizes: Vec<usize>,
    pub fiber_dim: usize,
    pub preset: PresetKind,
    pub preset_file: Option<PathBuf>,
    pub s_samples: Vec<f64>,
    pub times: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
    pub expect_failure: bool,
    /// Cells per axis for the gauge refinement study.
    pub gauge_refinements: Vec<usize>,
    pub identity_samples: usize,
    pub irreducibility_time: f64,
    pub planted_trials: usize,
    pub simulate_kind: SimulateKind,
    /// Initial state for `simulate`; a seeded random field when absent.
    pub simulate_initial: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            grid_sizes: vec![64],
            fiber_dim: 2,
            preset: PresetKind::Constant,
            preset_file: None,
            s_samples: vec![FRAC_PI_4, FRAC_PI_2, PI],
            times: vec![0.01, 0.1, 1.0],
            trials: 8,
            seed: 0,
            tolerances: Tolerances::default(),
            output_dir: PathBuf::from("gflab-out"),
            expect_failure: false,
            gauge_refinements: vec![16, 32, 64],
            identity_samples: 100,
            irreducibility_time: 0.01,
            planted_trials: 20,
            simulate_kind: SimulateKind::Heat,
            simulate_initial: None,
        }
    }
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

/// Parses a real literal or a rational multiple of `pi`.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim().parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    let factor = match num.strip_suffix("pi") {
        Some("") => 1.0,
        Some(pre) => pre.trim().strip_suffix('*')?.trim().parse::<f64>().ok()?,
        None => return None,
    };
    let v = factor * PI / den;
    v.is_finite().then_some(v)
}

fn list<T>(v: &str, line: usize, key: &str, item: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    let out = v
        .split(',')
        .map(|s| {
            item(s.trim()).ok_or_else(|| bad(line, format!("{key}: bad entry {:?}", s.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(bad(line, format!("{key}: empty list")));
    }
    Ok(out)
}

fn scalar<T: FromStr>(v: &str, line: usize, key: &str) -> Result<T> {
    v.parse()
        .map_err(|_| bad(line, format!("{key}: cannot parse {v:?}")))
}

fn real(v: &str, line: usize, key: &str) -> Result<f64> {
    parse_real(v).ok_or_else(|| bad(line, format!("{key}: cannot parse {v:?} as a real number")))
}

fn positive(v: f64, line: usize, key: &str) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(bad(line, format!("{key}: must be > 0")))
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| bad(line, format!("expected `key = value`, found {content:?}")))?;
            let (key, v) = (key.trim(), value.trim());
            if v.is_empty() {
                return Err(bad(line, format!("{key}: missing value")));
            }
            if seen.iter().any(|k| k == key) {
                return Err(bad(line, format!("duplicate key {key}")));
            }
            seen.push(key.to_string());
            match key {
                "grid.sizes" => {
                    let sizes = list(v, line, key, |s| s.parse::<usize>().ok())?;
                    if sizes.len() > 3 || sizes.iter().any(|&n| n < 2) {
                        return Err(bad(
                            line,
                            "grid.sizes: 1 to 3 axes with at least 2 cells each",
                        ));
                    }
                    cfg.grid_sizes = sizes;
                }
                "fiber.dim" => {
                    cfg.fiber_dim = scalar(v, line, key)?;
                    if cfg.fiber_dim == 0 {
                        return Err(bad(line, "fiber.dim: must be >= 1"));
                    }
                }
                "preset" => cfg.preset = v.parse().map_err(|e: Error| bad(line, e.to_string()))?,
                "preset.file" => cfg.preset_file = Some(PathBuf::from(v)),
                "s.samples" => cfg.s_samples = list(v, line, key, parse_real)?,
                "time.grid" => {
                    let t = list(v, line, key, parse_real)?;
                    if t.iter().any(|&t| t < 0.0) || t.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(bad(line, "time.grid: nonnegative, strictly increasing"));
                    }
                    cfg.times = t;
                }
                "trials" => cfg.trials = scalar(v, line, key)?,
                "seed" => cfg.seed = scalar(v, line, key)?,
                "tol.algebraic" => {
                    cfg.tolerances.algebraic = positive(real(v, line, key)?, line, key)?
                }
                "tol.discretization" => cfg.tolerances.discretization_order = real(v, line, key)?,
                "tol.pass" => cfg.tolerances.pass = positive(real(v, line, key)?, line, key)?,
                "tol.fail" => cfg.tolerances.fail = positive(real(v, line, key)?, line, key)?,
                "tol.locally_constant" => {
                    cfg.tolerances.locally_constant = positive(real(v, line, key)?, line, key)?
                }
                "output.dir" => cfg.output_dir = PathBuf::from(v),
                "expect_failure" => cfg.expect_failure = scalar(v, line, key)?,
                "gauge.refinements" => {
                    cfg.gauge_refinements = list(v, line, key, |s| s.parse::<usize>().ok())?;
                    if cfg.gauge_refinements.len() < 2 {
                        return Err(bad(line, "gauge.refinements: need at least two sizes"));
                    }
                }
                "identities.samples" => cfg.identity_samples = scalar(v, line, key)?,
                "irreducibility.time" => {
                    cfg.irreducibility_time = positive(real(v, line, key)?, line, key)?
                }
                "locality.planted_trials" => cfg.planted_trials = scalar(v, line, key)?,
                "simulate.kind" => {
                    cfg.simulate_kind = v.parse().map_err(|e: Error| bad(line, e.to_string()))?
                }
                "simulate.initial" => cfg.simulate_initial = Some(PathBuf::from(v)),
                other => return Err(bad(line, format!("unknown key {other}"))),
            }
        }
        if cfg.tolerances.pass > cfg.tolerances.fail {
            return Err(Error::InvalidArgument(
                "tol.pass must not exceed tol.fail".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_apply_when_empty() {
        assert_eq!(
            ScenarioConfig::parse("# nothing\n\n").unwrap(),
            ScenarioConfig::default()
        );
    }

    #[test]
    fn parses_all_kinds_of_values() {
        let text = "grid.sizes = 32, 32  # two axes\nfiber.dim = 3\npreset = rotating\n\
                    s.samples = pi/4, 0.5*pi, pi, 2\ntime.grid = 0, 0.5, 1\nseed = 42\n\
                    tol.pass = 1e-9\nexpect_failure = true\nsimulate.kind = schrodinger\n";
        let c = ScenarioConfig::parse(text).unwrap();
        assert_eq!(c.grid_sizes, vec![32, 32]);
        assert_eq!(c.fiber_dim, 3);
        assert_eq!(c.preset, PresetKind::Rotating);
        assert_eq!(c.s_samples, vec![FRAC_PI_4, FRAC_PI_2, PI, 2.0]);
        assert_eq!(c.times, vec![0.0, 0.5, 1.0]);
        assert_eq!(c.seed, 42);
        assert_eq!(c.tolerances.pass, 1e-9);
        assert!(c.expect_failure);
        assert_eq!(c.simulate_kind, SimulateKind::SchrodingerPlus);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("seed = 1\nbogus.key = 3\n", 2),
            ("\n\ngrid.sizes = 1\n", 3),
            ("seed = x\n", 1),
            ("seed = 1\nseed = 2\n", 2),
            ("preset = spiral\n", 1),
            ("no equals sign\n", 1),
            ("time.grid = 1, 0.5\n", 1),
        ];
        for (text, expected) in cases {
            match ScenarioConfig::parse(text) {
                Err(Error::Config { line, .. }) => assert_eq!(line, expected, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn pi_forms() {
        assert_eq!(parse_real("pi"), Some(PI));
        assert_eq!(parse_real("3*pi/2"), Some(3.0 * PI / 2.0));
        assert_eq!(parse_real("-1e-3"), Some(-1e-3));
        assert_eq!(parse_real("pie"), None);
        assert_eq!(parse_real("inf"), None);
    }
}
