//! Conformal rigidity laboratory.
//!
//! Dirichlet spectra of `-Δ - R/(n-1)` on geodesic balls and other regions of
//! model spaces, conformal curvature calculus, Brown-York mass, and an explicit
//! construction of compactly supported conformal deformations that raise or
//! lower scalar curvature when the first eigenvalue is negative.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod par;
pub mod sparse;
pub mod conformal;
pub mod spectral;
pub mod mass;
pub mod deform;
pub mod lab;
