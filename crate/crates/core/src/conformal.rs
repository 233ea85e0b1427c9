//! Scalar and boundary mean curvature of conformally related metrics.
//!
//! Two conventions are supported: `g = e^{2u} ḡ` in dimension two and
//! `g = u^{4/(n-2)} ḡ` in dimension n >= 3.

use crate::geometry::{DiscreteDomain, GeometryError, ScalarField};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConformalError {
    #[error("power-convention factor must be positive; found {value} at vertex {vertex}")]
    NonPositiveFactor { vertex: usize, value: f64 },
    #[error("factor differs from the identity on the boundary at vertex {vertex} (value {value})")]
    NonIdentityBoundary { vertex: usize, value: f64 },
    #[error("delta = {0} must lie in (0, 1)")]
    InvalidDelta(f64),
    #[error("eigenvalue {0} must be positive")]
    NonPositiveEigenvalue(f64),
    #[error("{convention:?} convention does not apply in dimension {n}")]
    ConventionMismatch { convention: Convention, n: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Smallest admissible power-convention factor.
pub const POSITIVITY_MARGIN: f64 = 1e-10;
/// Allowed deviation from the identity on the boundary.
pub const BOUNDARY_IDENTITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Convention {
    /// g = e^{2u} ḡ, n = 2
    Exponential,
    /// g = u^{4/(n-2)} ḡ, n >= 3
    Power,
}

impl Convention {
    pub fn for_dim(n: usize) -> Self {
        if n == 2 {
            Convention::Exponential
        } else {
            Convention::Power
        }
    }

    pub fn identity_value(self) -> f64 {
        match self {
            Convention::Exponential => 0.0,
            Convention::Power => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalFactor {
    pub convention: Convention,
    pub u: ScalarField,
    pub n: usize,
}

impl ConformalFactor {
    pub fn new(convention: Convention, u: ScalarField, n: usize) -> Result<Self, ConformalError> {
        if (convention == Convention::Exponential) != (n == 2) {
            return Err(ConformalError::ConventionMismatch { convention, n });
        }
        if convention == Convention::Power {
            if let Some((vertex, &value)) =
                u.values.iter().enumerate().find(|(_, v)| !(**v >= POSITIVITY_MARGIN))
            {
                return Err(ConformalError::NonPositiveFactor { vertex, value });
            }
        }
        Ok(ConformalFactor { convention, u, n })
    }

    /// Factor with the natural convention for the domain's geometric dimension.
    pub fn on(domain: &DiscreteDomain, u: Vec<f64>) -> Result<Self, ConformalError> {
        let n = domain.n();
        let f = ConformalFactor::new(Convention::for_dim(n), ScalarField::new(u), n)?;
        f.u.check(domain)?;
        Ok(f)
    }

    pub fn identity(domain: &DiscreteDomain) -> Self {
        let c = Convention::for_dim(domain.n());
        ConformalFactor {
            convention: c,
            u: ScalarField::constant(domain.num_vertices(), c.identity_value()),
            n: domain.n(),
        }
    }

    /// log of the metric's length scale, i.e. g = e^{2 ell} ḡ.
    pub fn log_scale(&self) -> Vec<f64> {
        match self.convention {
            Convention::Exponential => self.u.values.clone(),
            Convention::Power => {
                let p = 2.0 / (self.n as f64 - 2.0);
                self.u.values.iter().map(|v| p * v.ln()).collect()
            }
        }
    }
}

/// Constant background scalar curvature sampled at every vertex.
pub fn background_curvature(domain: &DiscreteDomain) -> ScalarField {
    ScalarField::constant(domain.num_vertices(), domain.space.scalar_curvature())
}

/// Pointwise scalar curvature of the conformal metric at interior vertices.
/// Boundary entries are NaN.
pub fn scalar_curvature(cf: &ConformalFactor, domain: &DiscreteDomain) -> Result<ScalarField, ConformalError> {
    cf.u.check(domain)?;
    let r = domain.space.scalar_curvature();
    let u = &cf.u.values;
    let lap = domain.laplacian(u);
    let n = cf.n as f64;
    let vals = match cf.convention {
        Convention::Exponential => u
            .iter()
            .zip(&lap)
            .map(|(&ui, &li)| (-2.0 * ui).exp() * (r - 2.0 * li))
            .collect(),
        Convention::Power => {
            let c = 4.0 * (n - 1.0) / (n - 2.0);
            let e = -(n + 2.0) / (n - 2.0);
            u.iter()
                .zip(&lap)
                .map(|(&ui, &li)| ui.powf(e) * (r * ui - c * li))
                .collect()
        }
    };
    Ok(ScalarField::new(vals))
}

/// Linearization of the scalar curvature at the identity in direction v:
/// `-(4(n-1)/(n-2)) (Δv + R v/(n-1))`, or `-2 (Δv + R v)` for n = 2.
pub fn linearized_scalar_curvature(v: &ScalarField, domain: &DiscreteDomain) -> ScalarField {
    let n = domain.n() as f64;
    let r = domain.space.scalar_curvature();
    let c = lin_constant(domain.n());
    let lap = domain.laplacian(&v.values);
    ScalarField::new(
        v.values
            .iter()
            .zip(&lap)
            .map(|(&vi, &li)| -c * (li + r * vi / (n - 1.0)))
            .collect(),
    )
}

/// The constant c_n with DR = c_n 𝓛.
pub fn lin_constant(n: usize) -> f64 {
    if n == 2 {
        2.0
    } else {
        let n = n as f64;
        4.0 * (n - 1.0) / (n - 2.0)
    }
}

/// Boundary samples needed for mean curvature and mass.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub vertices: Vec<usize>,
    pub normal_derivative: Vec<f64>,
    pub hbar: Vec<f64>,
    pub weights: Vec<f64>,
    pub boundary_values: Vec<f64>,
}

impl BoundaryData {
    pub fn new(cf: &ConformalFactor, domain: &DiscreteDomain) -> Result<Self, ConformalError> {
        cf.u.check(domain)?;
        Ok(BoundaryData {
            vertices: domain.boundary.clone(),
            normal_derivative: domain.normal_derivative(&cf.u.values),
            hbar: domain.boundary_mean_curvature.clone(),
            weights: domain.boundary_weight.clone(),
            boundary_values: domain.boundary.iter().map(|&b| cf.u.values[b]).collect(),
        })
    }

    pub fn check_identity(&self, convention: Convention) -> Result<(), ConformalError> {
        let id = convention.identity_value();
        for (k, &v) in self.boundary_values.iter().enumerate() {
            if (v - id).abs() > BOUNDARY_IDENTITY_TOL {
                return Err(ConformalError::NonIdentityBoundary { vertex: self.vertices[k], value: v });
            }
        }
        Ok(())
    }
}

/// Coefficient of ∂νu in the boundary mean curvature formula.
pub fn mean_curvature_coefficient(n: usize) -> f64 {
    if n == 2 {
        2.0
    } else {
        let n = n as f64;
        2.0 * (n - 1.0) / (n - 2.0)
    }
}

/// Mean curvature of the boundary in the conformal metric; valid only where
/// the factor is the identity on the boundary.
pub fn mean_curvature(cf: &ConformalFactor, bd: &BoundaryData) -> Result<Vec<f64>, ConformalError> {
    bd.check_identity(cf.convention)?;
    let c = mean_curvature_coefficient(cf.n);
    Ok(bd.hbar.iter().zip(&bd.normal_derivative).map(|(h, d)| h + c * d).collect())
}

/// Operator-norm size of the metric relative to ḡ.
pub fn c0_norm(cf: &ConformalFactor) -> f64 {
    let n = cf.n as f64;
    let m = cf.u.max();
    match cf.convention {
        Convention::Power => n.sqrt() * m.powf(4.0 / (n - 2.0)),
        Convention::Exponential => 2f64.sqrt() * (2.0 * m).exp(),
    }
}

/// Rigidity threshold on the C0 norm; +inf when max R <= 0.
pub fn alpha_threshold(n: usize, delta: f64, lambda1: f64, max_r: f64) -> Result<f64, ConformalError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ConformalError::InvalidDelta(delta));
    }
    if !(lambda1 > 0.0) {
        return Err(ConformalError::NonPositiveEigenvalue(lambda1));
    }
    if max_r <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let n = n as f64;
    Ok(n.sqrt() * (1.0 + (n - 1.0) * delta * lambda1 / max_r).powf(4.0 / (n + 2.0)))
}

/// Curvature comparison rows at interior vertices.
pub fn curvature_csv(domain: &DiscreteDomain, rbar: &ScalarField, rg: &ScalarField) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["vertexIndex", "R_bar", "R_g", "difference"]).expect("in-memory write");
    for &i in &domain.interior {
        let (a, b) = (rbar.values[i], rg.values[i]);
        w.write_record([i.to_string(), a.to_string(), b.to_string(), (b - a).to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
