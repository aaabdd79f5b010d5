//! Hierarchical adaptive diffusion for flexible protein-protein docking.
//!
//! A complex is modelled as a global rigid-body pose of the ligand relative
//! to the receptor plus one rigid frame per residue of either chain. Global
//! pose noise follows a variance-exploding SDE (with isotropic Gaussian
//! noise on SO(3) for rotations); residue-level flexing is a flow-matching
//! process whose schedule adapts to the anticipated interface change.

pub mod autodiff;
pub mod error;
pub mod config;
pub mod diffusion;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod model;
pub mod nma;
pub mod optim;
pub mod sampler;
pub mod schedule;
pub mod loss;
pub mod synthetic;
pub mod train;
pub mod so3;

pub use error::{Error, Result};
