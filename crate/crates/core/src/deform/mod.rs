//! Compactly supported conformal deformations that raise (or lower) scalar
//! curvature on a domain whose first eigenvalue of `-Δ - R/(n-1)` is negative.
//!
//! Every factor in this module is handled through its logarithm `f = log u`,
//! where `g = u^{4/(n-2)} ḡ` for n >= 3 and `g = e^{2f} ḡ` for n = 2.

mod collar;
mod glue;
mod perturb;
mod pipeline;

pub use collar::{build_collar_metrics, collar_margin, inverse_exp, CollarMetricPair, CollarOutcome, EPSILON_SEARCH_DEPTH};
pub use glue::{glue, smooth_min, smoothstep, GlueInput, GlueOutcome, GlueSpec};
pub use perturb::{
    apply_matching, build_perturbation, matching_lower_bound, perturbation_margin, perturbed_log, MatchedFactor,
    PerturbationSpec,
};
pub use pipeline::{
    build_deformation, CollarCheck, CurvatureMargins, DeformConfig, DeformationReport, HostMesh, MeshSpec,
    RegionMargins,
};

use crate::conformal::{ConformalError, ConformalFactor, Convention};
use crate::geometry::{GeometryError, ScalarField};
use crate::spectral::SpectralError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Sign {
    /// Raise curvature: perturbation -ψ, collar 1 - e^{-1/φ}.
    Plus,
    /// Lower curvature: perturbation +ψ, collar 1 + e^{-1/φ}.
    Minus,
}

impl Sign {
    pub fn s(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn mirror(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Stage {
    Mesh,
    Certify,
    Collar,
    Perturbation,
    Matching,
    Glue,
    Verify,
}

#[derive(Debug, Error)]
pub enum DeformError {
    #[error("no ε in the search grid passed the collar and eigenvalue checks (smallest tried {smallest})")]
    NoValidEpsilon { smallest: f64 },
    #[error("empty t window: lower bound {t_low}, upper bound {t_high}")]
    EmptyTWindow { t_low: f64, t_high: f64 },
    #[error("mean curvature ordering fails at boundary vertex {vertex} (gap {gap:e})")]
    MeanCurvatureOrderingFailed { vertex: usize, gap: f64 },
    #[error("gluing slack {achieved:e} exceeds the budget {budget:e} after {retries} retries")]
    DeltaBudgetExceeded { achieved: f64, budget: f64, retries: usize },
    #[error("blend does not lock onto the inner factor at vertex {vertex}")]
    LockFailed { vertex: usize },
    #[error("first eigenvalue {0} is not negative")]
    CertifiedPositiveEigenvalue(f64),
    #[error("interior margin {margin:e} is below the strictness threshold {threshold:e}")]
    NotStrict { margin: f64, threshold: f64 },
    #[error("{stage:?} stage: {source}")]
    InStage {
        stage: Stage,
        #[source]
        source: Box<DeformError>,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl DeformError {
    pub fn at(self, stage: Stage) -> Self {
        match self {
            e @ DeformError::InStage { .. } => e,
            e => DeformError::InStage { stage, source: Box::new(e) },
        }
    }

    /// The underlying error with stage tags removed.
    pub fn root(&self) -> &DeformError {
        match self {
            DeformError::InStage { source, .. } => source.root(),
            e => e,
        }
    }
}

/// Conformal factor whose logarithm is `f`, in the convention for dimension n.
pub fn factor_from_log(n: usize, f: &[f64]) -> ConformalFactor {
    let (convention, values) = if n == 2 {
        (Convention::Exponential, f.to_vec())
    } else {
        (Convention::Power, f.iter().map(|v| v.exp()).collect())
    };
    ConformalFactor { convention, u: ScalarField::new(values), n }
}

/// Curvature scale used by the strictness threshold `10 h^2 scale`.
pub fn curvature_scale(r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        r.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_factor_conventions() {
        let f = factor_from_log(2, &[0.0, -0.5]);
        assert_eq!(f.convention, Convention::Exponential);
        assert_eq!(f.u.values, vec![0.0, -0.5]);
        let g = factor_from_log(3, &[0.0, 2f64.ln()]);
        assert_eq!(g.u.values[0], 1.0);
        assert!((g.u.values[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn stage_tags_nest_once() {
        let e = DeformError::EmptyTWindow { t_low: 1.0, t_high: 0.5 }.at(Stage::Perturbation).at(Stage::Glue);
        assert!(matches!(e, DeformError::InStage { stage: Stage::Perturbation, .. }));
        assert!(matches!(e.root(), DeformError::EmptyTWindow { .. }));
    }
}
