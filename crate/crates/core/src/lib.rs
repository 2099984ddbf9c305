//! Discrete laboratory for projection-generated symmetries of the vector-valued heat
//! and Schrödinger equations on a periodic grid.
//!
//! The fiber is `C^d`; fields live on a periodic torus grid; projection fields
//! `x ↦ P_x` act cellwise. The crate evaluates exponentials of projections, the
//! invariance criteria for the heat semigroup, the gauge field induced by a
//! non-constant projection field, locality of global projections, and
//! irreducibility of the heat semigroup.

pub mod calculus;
pub mod config;
pub mod error;
pub mod evolution;
pub mod fiber;
pub mod grid;
pub mod io;
pub mod locality;
pub mod presets;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod symmetry;

pub use error::{Error, Result};
