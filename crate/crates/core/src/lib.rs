//! Source estimation for diffusions spreading over regular trees.
//!
//! The crate is organised bottom-up:
//!
//! * [`tree`]: the infected subtree, rooted subtree sizes, distances and the
//!   JSON document format.
//! * [`diffusion`]: the uniform-boundary-edge diffusion on regular and glued
//!   host trees.
//! * [`estimators`]: rumor centrality, the subtree product and the maximum
//!   subtree estimator for every node in O(n).
//! * [`confidence`]: confidence sets built from those scores.
//! * [`bounds`]: closed-form error bounds and the parameter searches built on
//!   them.
//! * [`urn`]: Pólya urn samplers and limit-law checks.
//! * [`harness`]: seeded Monte Carlo campaigns and their CSV/JSON artifacts.

pub mod bounds;
pub mod confidence;
pub mod diffusion;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod seed;
pub mod stats;
pub mod tree;
pub mod urn;

pub use error::{Error, Result};
pub use tree::{GraphSpec, InfectionTree, Label, Side};
