//! Two-scale graph surrogate for quasistatic compression of strut lattices.
//!
//! The pipeline generates beam lattices, solves a Neo-Hookean tetrahedral
//! FEM problem for ground truth, maps the results onto a reduced strut graph,
//! trains a reduced predictor (`Lgn1Model`) and a tetrahedral up-mapper
//! (`Lgn2Model`), rolls both out autoregressively and homogenizes the
//! predicted stress field into a feedback force.

// `!(x > 0.0)` is used on purpose so NaN fails validation; numeric kernels
// index several arrays in lockstep.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::module_inception
)]

pub mod config;
pub mod continuum;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lgn;
pub mod nn;
pub mod oracle;
pub mod pipeline;
pub mod rollout;

pub use error::{Error, Result};
