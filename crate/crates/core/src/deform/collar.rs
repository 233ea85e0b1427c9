//! Collar metrics `w± = 1 ∓ e^{-1/φ}` built from the first Laplace eigenfunction.

use super::DeformError;
use crate::geometry::{superlevel_domain, DiscreteDomain, GeometryError, ScalarField};
use crate::spectral::{first_eigenpair, OperatorKind, OperatorSpec, SpectralResult};

/// ε is searched over 2^{-1}, ..., 2^{-EPSILON_SEARCH_DEPTH}.
pub const EPSILON_SEARCH_DEPTH: u32 = 20;

/// `e^{-1/x}` for x > 0 and 0 otherwise.
pub fn inverse_exp(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct CollarMetricPair {
    /// On the host vertex set; exactly 1 outside Ω.
    pub w_plus: ScalarField,
    pub w_minus: ScalarField,
    pub epsilon: f64,
    /// Minimum of `|∇φ|^2 (1 - 2φ) - λ φ^3` over interior vertices with φ <= 2ε.
    pub subharmonicity_margin: f64,
}

#[derive(Clone, Debug)]
pub struct CollarOutcome {
    pub pair: CollarMetricPair,
    pub omega_eps: DiscreteDomain,
    /// First eigenpair of `-Δ - R/(n-1)` on Ω_ε.
    pub eigen_eps: SpectralResult,
    /// ε values rejected before the accepted one.
    pub rejected: Vec<f64>,
}

/// `|∇φ|^2 (1 - 2φ) - λ φ^3` at every vertex. Its sign is that of `Δ e^{-1/φ}`.
pub fn collar_margin(domain: &DiscreteDomain, phi: &[f64], lambda: f64) -> Vec<f64> {
    let g2 = domain.grad_sq(phi);
    phi.iter().zip(&g2).map(|(&p, &g)| g * (1.0 - 2.0 * p) - lambda * p.powi(3)).collect()
}

fn min_margin_below(domain: &DiscreteDomain, margin: &[f64], phi: &[f64], level: f64) -> f64 {
    domain
        .interior
        .iter()
        .filter(|&&i| phi[i] <= level)
        .map(|&i| margin[i])
        .fold(f64::INFINITY, f64::min)
}

/// Largest ε = 2^{-k} with a nonnegative collar margin on `{φ <= 2ε}` and a
/// negative first eigenvalue on `Ω_ε = {φ > ε}`.
///
/// `omega` must be a prefix of the host vertex set of size `host_len`.
pub fn build_collar_metrics(
    omega: &DiscreteDomain,
    phi: &ScalarField,
    lambda: f64,
    host_len: usize,
    tol: f64,
) -> Result<CollarOutcome, DeformError> {
    phi.check(omega)?;
    let p = &phi.values;
    let margin = collar_margin(omega, p, lambda);
    let mut rejected = Vec::new();
    for k in 1..=EPSILON_SEARCH_DEPTH {
        let eps = 0.5f64.powi(k as i32);
        let m = min_margin_below(omega, &margin, p, 2.0 * eps);
        if !(m >= 0.0) {
            rejected.push(eps);
            continue;
        }
        let omega_eps = match superlevel_domain(omega, phi, eps) {
            Ok(d) => d,
            Err(GeometryError::DisconnectedLevelSet(_)) | Err(GeometryError::EmptyLevelSet) => {
                rejected.push(eps);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let eig = first_eigenpair(&omega_eps, &OperatorSpec::new(&omega_eps, OperatorKind::Schrodinger), tol)?;
        if !(eig.eigenvalue < 0.0) {
            rejected.push(eps);
            continue;
        }
        let mut w_plus = vec![1.0; host_len];
        let mut w_minus = vec![1.0; host_len];
        for (i, &v) in p.iter().enumerate() {
            let e = inverse_exp(v);
            w_plus[i] = 1.0 - e;
            w_minus[i] = 1.0 + e;
        }
        return Ok(CollarOutcome {
            pair: CollarMetricPair {
                w_plus: ScalarField::new(w_plus),
                w_minus: ScalarField::new(w_minus),
                epsilon: eps,
                subharmonicity_margin: m,
            },
            omega_eps,
            eigen_eps: eig,
            rejected,
        });
    }
    Err(DeformError::NoValidEpsilon { smallest: 0.5f64.powi(EPSILON_SEARCH_DEPTH as i32) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, Region, Space};
    use proptest::prelude::*;

    #[test]
    fn flat_collar_has_no_valid_epsilon() {
        // φ is a tiny plateau next to the boundary: its gradient vanishes there
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.1).unwrap();
        let phi = ScalarField::from_fn(&d, |x| {
            let r = x[0].hypot(x[1]);
            if r > 0.6 {
                1e-7
            } else {
                1.0 - r * r
            }
        });
        let mut phi = phi;
        for &b in &d.boundary {
            phi.values[b] = 0.0;
        }
        let e = build_collar_metrics(&d, &phi, 5.78, d.num_vertices(), 1e-8).unwrap_err();
        assert!(matches!(e, DeformError::NoValidEpsilon { .. }));
    }

    #[test]
    fn disk_eigenfunction_margin_is_positive_near_boundary() {
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.05).unwrap();
        let r = first_eigenpair(&d, &OperatorSpec::new(&d, OperatorKind::Laplacian), 1e-8).unwrap();
        let m = collar_margin(&d, &r.eigenfunction.values, r.eigenvalue);
        let low = min_margin_below(&d, &m, &r.eigenfunction.values, 0.25);
        assert!(low > 0.0, "{low}");
    }

    proptest! {
        #[test]
        fn collar_pair_product_below_one(phi in 0.1f64..1.0) {
            let e = inverse_exp(phi);
            let (wp, wm) = (1.0 - e, 1.0 + e);
            prop_assert!(0.0 < wp && wp < 1.0 && wm > 1.0);
            prop_assert!((wp * wm - (1.0 - inverse_exp(phi / 2.0))).abs() < 1e-15);
            prop_assert!(wp * wm < 1.0);
        }
    }
}
