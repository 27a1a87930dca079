//! Immersed isogeometric finite element kernel on quadtree-refined
//! truncated hierarchical B-splines.

pub mod bspline;
pub mod cut;
pub mod discretization;
pub mod enrichment;
pub mod error;
pub mod extraction;
pub mod levelset;
pub mod physics;
pub mod polytree;
pub mod quadrature;
pub mod registry;
pub mod thb;
pub mod union;

pub use error::{Error, Result};
