//! Truncated tubes `S^k × B_L` in the product `S^k × E²`, whose flat factor
//! has quadratic volume growth.

use super::LabError;
use crate::geometry::{build_radial_domain, Space};
use crate::spectral::{quadratic_form, radial_eigenvalue, OperatorKind, OperatorSpec, RadialOptions};
use serde::{Deserialize, Serialize};

/// Rayleigh quotient on the flat disk of radius L of the ramp equal to 1 on
/// `B_{L/2}` and falling linearly to 0 at ρ = L.
pub fn tube_ramp_quotient(l: f64) -> f64 {
    72.0 / (11.0 * l * l)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProductReport {
    pub k: usize,
    pub length: f64,
    /// Minimum scalar curvature `k(k-1)`.
    pub q: f64,
    pub quotient: f64,
    /// Same quotient by lumped quadrature on a radial grid.
    pub discrete_quotient: f64,
    /// λ₁ of the flat disk of radius L from the shooting solver.
    pub disk_lambda: f64,
    pub threshold: f64,
    /// `quotient - Q/(n-1)`, an upper bound for Λ₁ of the tube.
    pub lambda_bound: f64,
    /// `quotient - Q`, the bound in the form `λ₁ - Q`.
    pub lambda_minus_q: f64,
}

/// Bound Λ₁ of `S^k × B_L` from above through the flat-factor ramp. The
/// potential of 𝓛 is `Q/(n-1)` with n = k + 2, so a quotient below
/// `Q/(2(n-1))` certifies `Λ₁ < -Q/(2(n-1)) < 0`.
pub fn product_volume_growth_demo(k: usize, l: f64, grid_points: usize) -> Result<ProductReport, LabError> {
    if k < 2 {
        return Err(LabError::Config("the sphere factor needs k >= 2".into()));
    }
    if !(l > 0.0) || grid_points < 5 || grid_points % 2 == 0 {
        return Err(LabError::Config("truncation needs L > 0 and an odd grid of at least 5 points".into()));
    }
    let space = Space::ProductSphereCylinder { k };
    let n = space.dim() as f64;
    let q = space.scalar_curvature();
    let quotient = tube_ramp_quotient(l);
    let flat = Space::Euclidean { n: 2 };
    let d = build_radial_domain(flat, l, grid_points)?;
    let ramp: Vec<f64> = (0..d.num_vertices()).map(|i| (2.0 * (1.0 - d.radius_of(i) / l)).min(1.0)).collect();
    let den: f64 = ramp.iter().zip(&d.mass).map(|(f, m)| f * f * m).sum();
    let discrete_quotient = quadratic_form(&d, &OperatorSpec::new(&d, OperatorKind::Laplacian), &ramp) / den;
    let disk_lambda = radial_eigenvalue(flat, l, 0.0, RadialOptions::default())?.0;
    let threshold = q / (2.0 * (n - 1.0));
    if !(quotient < threshold) {
        return Err(LabError::TruncationTooSmall { quotient, threshold });
    }
    Ok(ProductReport {
        k,
        length: l,
        q,
        quotient,
        discrete_quotient,
        disk_lambda,
        threshold,
        lambda_bound: quotient - q / (n - 1.0),
        lambda_minus_q: quotient - q,
    })
}
