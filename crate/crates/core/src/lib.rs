//! Numerical lab for the rough-coefficient parabolic equation
//! `a(t,x) dw/dt - Lw = f` on bounded domains with Dirichlet data.

pub mod cert;
pub mod checks;
pub mod config;
pub mod duality;
pub mod error;
pub mod field;
pub mod grid;
pub mod heat_kernel;
pub mod ledger;
pub mod linalg;
pub mod plot;
pub mod reactions;
pub mod regularity;
pub mod rough;
pub mod scenario;

pub use cert::{Certification, Verdict};
pub use error::{Error, Result};
pub use field::{ExponentPair, ScalarField, SpaceTimeField, TimeGrid};
pub use grid::{DomainSpec, SpaceGrid};
