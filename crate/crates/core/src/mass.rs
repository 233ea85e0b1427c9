//! Brown-York mass of a conformal deformation that fixes the boundary metric.

use crate::conformal::{mean_curvature, mean_curvature_coefficient, BoundaryData, ConformalError, ConformalFactor};
use crate::geometry::DiscreteDomain;
use serde::{Deserialize, Serialize};

/// Agreement required between the curvature form and the ∂νu form of the mass.
pub const FORM_AGREEMENT: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MassReport {
    pub value: f64,
    /// H̄ - H_g at each boundary vertex, in boundary order.
    pub boundary_integrand_samples: Vec<f64>,
    pub boundary_weights: Vec<f64>,
    pub boundary_measure_total: f64,
    /// `-c ∫ ∂νu dσ`, the same quantity through the normal derivative.
    pub normal_derivative_form: f64,
    pub domain_hash: String,
}

impl MassReport {
    /// Weighted sum of the integrand samples; equals `value`.
    pub fn recompute(&self) -> f64 {
        self.boundary_integrand_samples.iter().zip(&self.boundary_weights).map(|(s, w)| s * w).sum()
    }
}

/// `∫ (H̄ - H_g) dσ` by the trapezoidal boundary rule.
pub fn brown_york_mass(
    cf: &ConformalFactor,
    domain: &DiscreteDomain,
    bd: &BoundaryData,
) -> Result<MassReport, ConformalError> {
    let hg = mean_curvature(cf, bd)?;
    let samples: Vec<f64> = bd.hbar.iter().zip(&hg).map(|(a, b)| a - b).collect();
    let value: f64 = samples.iter().zip(&bd.weights).map(|(s, w)| s * w).sum();
    let c = mean_curvature_coefficient(cf.n);
    let flux: f64 = bd.normal_derivative.iter().zip(&bd.weights).map(|(d, w)| d * w).sum();
    let normal_derivative_form = -c * flux;
    let scale = bd.weights.iter().sum::<f64>() * (1.0 + bd.normal_derivative.iter().fold(0.0_f64, |m, d| m.max(d.abs())));
    assert!(
        (value - normal_derivative_form).abs() <= FORM_AGREEMENT * scale.max(1.0),
        "mass forms disagree: {value} vs {normal_derivative_form}"
    );
    Ok(MassReport {
        value,
        boundary_integrand_samples: samples,
        boundary_weights: bd.weights.clone(),
        boundary_measure_total: bd.weights.iter().sum(),
        normal_derivative_form,
        domain_hash: domain.hash(),
    })
}

/// Mass of a factor on a domain, assembling the boundary data on the way.
pub fn mass_of(cf: &ConformalFactor, domain: &DiscreteDomain) -> Result<MassReport, ConformalError> {
    let bd = BoundaryData::new(cf, domain)?;
    brown_york_mass(cf, domain, &bd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, build_radial_domain, Region, Space};
    use std::f64::consts::PI;

    fn disk_family(d: &DiscreteDomain, t: f64) -> ConformalFactor {
        let mut u: Vec<f64> = d.vertices.iter().map(|x| t * (1.0 - x[0] * x[0] - x[1] * x[1])).collect();
        for &b in &d.boundary {
            u[b] = 0.0;
        }
        ConformalFactor::on(d, u).unwrap()
    }

    #[test]
    fn identity_has_zero_mass() {
        let d = build_domain(Space::Sphere { n: 2 }, &Region::ball(1.2), 0.1).unwrap();
        let m = mass_of(&ConformalFactor::identity(&d), &d).unwrap();
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn flat_disk_mass_is_eight_pi_t() {
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.02).unwrap();
        for t in [0.01, -0.01, 0.05, -0.05] {
            let m = mass_of(&disk_family(&d, t), &d).unwrap();
            let exact = 8.0 * PI * t;
            assert!(((m.value - exact) / exact).abs() < 0.01, "t={t}: {}", m.value);
            assert!((m.recompute() - m.value).abs() <= 1e-14 * m.value.abs().max(1.0));
        }
    }

    #[test]
    fn radial_three_ball_mass() {
        // u = 1 + t(1 - rho^2): ∂νu = -2t, c = 4, |S^2| = 4π
        let d = build_radial_domain(Space::Euclidean { n: 3 }, 1.0, 401).unwrap();
        let t = 0.02;
        let mut u: Vec<f64> = (0..d.num_vertices()).map(|i| 1.0 + t * (1.0 - d.radius_of(i).powi(2))).collect();
        *u.last_mut().unwrap() = 1.0;
        let m = mass_of(&ConformalFactor::on(&d, u).unwrap(), &d).unwrap();
        assert!((m.value - 32.0 * PI * t).abs() < 1e-6, "{}", m.value);
    }

    #[test]
    fn support_inside_gives_zero_mass() {
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.05).unwrap();
        let u: Vec<f64> = d
            .vertices
            .iter()
            .map(|x| {
                let r = x[0].hypot(x[1]);
                if r < 0.5 {
                    0.1 * (0.25 - r * r).powi(3)
                } else {
                    0.0
                }
            })
            .collect();
        let m = mass_of(&ConformalFactor::on(&d, u).unwrap(), &d).unwrap();
        assert!(m.value.abs() < 1e-12);
    }

    #[test]
    fn non_identity_boundary_is_rejected() {
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.1).unwrap();
        let cf = ConformalFactor::on(&d, vec![0.01; d.num_vertices()]).unwrap();
        assert!(matches!(mass_of(&cf, &d), Err(ConformalError::NonIdentityBoundary { .. })));
    }
}
