//! Eigenfunction perturbations of the background on Ω_ε and the constant
//! multiplier that matches them to the collar metric on ∂Ω_ε.

use super::collar::inverse_exp;
use super::{factor_from_log, DeformError, Sign};
use crate::conformal::{scalar_curvature, ConformalFactor};
use crate::geometry::{DiscreteDomain, ScalarField};

#[derive(Clone, Debug)]
pub struct PerturbationSpec {
    pub t: f64,
    /// Positive first eigenfunction of `-Δ - R/(n-1)` on Ω_ε, sup-normalized.
    pub psi: ScalarField,
    pub sign: Sign,
    /// Smallest t allowed by the mean curvature ordering on ∂Ω_ε.
    pub t_low: f64,
    /// Largest t (up to the cap) keeping `u_t > 1/2` and the curvature sign.
    pub t_high: f64,
    /// Minimum of `s (R_{g_t} - R)` over interior vertices of Ω_ε at the chosen t.
    pub min_margin: f64,
}

impl PerturbationSpec {
    /// `log u_t` at every vertex of Ω_ε.
    pub fn log_factor(&self, n: usize) -> Vec<f64> {
        perturbed_log(n, self.sign.s() * self.t, &self.psi.values)
    }
}

/// Log factor of the perturbation: `log(1 - st ψ)` for n >= 3, and `-st ψ`
/// for n = 2 where the metric is `e^{-2stψ} ḡ`.
pub fn perturbed_log(n: usize, st: f64, psi: &[f64]) -> Vec<f64> {
    if n == 2 {
        psi.iter().map(|p| -st * p).collect()
    } else {
        psi.iter().map(|p| (-st * p).ln_1p()).collect()
    }
}

/// Minimum over interior vertices of `s (R_{g_t} - R)`.
pub fn perturbation_margin(domain: &DiscreteDomain, psi: &[f64], t: f64, sign: Sign) -> Result<f64, DeformError> {
    margin_of_log(domain, &perturbed_log(domain.n(), sign.s() * t, psi), sign)
}

pub(crate) fn margin_of_log(domain: &DiscreteDomain, f: &[f64], sign: Sign) -> Result<f64, DeformError> {
    let r0 = domain.space.scalar_curvature();
    let rg = scalar_curvature(&factor_from_log(domain.n(), f), domain)?;
    Ok(domain
        .interior
        .iter()
        .map(|&i| sign.s() * (rg.values[i] - r0))
        .fold(f64::INFINITY, f64::min))
}

fn kappa(eps: f64, sign: Sign) -> f64 {
    let e = inverse_exp(eps);
    e / (eps * eps * (1.0 - sign.s() * e))
}

/// `max_b κ (-∂νφ) / (-∂νψ)` over boundary vertices of Ω_ε, with
/// `κ = e^{-1/ε} / (ε^2 (1 ∓ e^{-1/ε}))`.
pub fn matching_lower_bound(
    domain: &DiscreteDomain,
    phi: &[f64],
    psi: &[f64],
    eps: f64,
    sign: Sign,
) -> Result<f64, DeformError> {
    let dphi = domain.normal_derivative(phi);
    let dpsi = domain.normal_derivative(psi);
    let k = kappa(eps, sign);
    let mut t = 0.0_f64;
    for (b, (&a, &p)) in dphi.iter().zip(&dpsi).enumerate() {
        if !(p < 0.0) {
            return Err(DeformError::MeanCurvatureOrderingFailed { vertex: domain.boundary[b], gap: p });
        }
        t = t.max(k * (-a) / (-p));
    }
    Ok(t)
}

/// Choose t in `(t_low, t_high]`: `t_high` is found by bisection below `t_max`
/// on the exact discrete curvature sign and `u_t > 1/2`.
pub fn build_perturbation(
    domain: &DiscreteDomain,
    psi: &ScalarField,
    sign: Sign,
    t_max: f64,
    t_low: f64,
) -> Result<PerturbationSpec, DeformError> {
    psi.check(domain)?;
    let sup = psi.max();
    let admissible = |t: f64| -> Result<bool, DeformError> {
        if !(1.0 - sign.s() * t * sup > 0.5) {
            return Ok(false);
        }
        Ok(perturbation_margin(domain, &psi.values, t, sign)? > 0.0)
    };
    let t_high = if admissible(t_max)? {
        t_max
    } else {
        let (mut lo, mut hi) = (0.0, t_max);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if admissible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if !(t_high > t_low) {
        return Err(DeformError::EmptyTWindow { t_low, t_high });
    }
    let t = if 0.75 * t_high > t_low { 0.75 * t_high } else { 0.5 * (t_low + t_high) };
    let min_margin = perturbation_margin(domain, &psi.values, t, sign)?;
    Ok(PerturbationSpec { t, psi: psi.clone(), sign, t_low, t_high, min_margin })
}

#[derive(Clone, Debug)]
pub struct MatchedFactor {
    /// `1 ∓ e^{-1/ε}`.
    pub multiplier: f64,
    /// `log(multiplier · u_t)` on Ω_ε.
    pub log_inner: Vec<f64>,
    pub factor: ConformalFactor,
    /// `s (∂ν log û - ∂ν log w)` at each boundary vertex of Ω_ε; all positive.
    pub interface_gaps: Vec<f64>,
}

impl MatchedFactor {
    /// Mean of the interface gaps: the normal slope of the mismatch.
    pub fn interface_slope(&self) -> f64 {
        self.interface_gaps.iter().sum::<f64>() / self.interface_gaps.len().max(1) as f64
    }
}

/// Scale the perturbed factor by `1 ∓ e^{-1/ε}` and check the strict mean
/// curvature ordering against the collar metric on ∂Ω_ε.
pub fn apply_matching(
    domain: &DiscreteDomain,
    pert: &PerturbationSpec,
    phi: &[f64],
    eps: f64,
) -> Result<MatchedFactor, DeformError> {
    let s = pert.sign.s();
    let multiplier = 1.0 - s * inverse_exp(eps);
    let lm = multiplier.ln();
    let log_inner: Vec<f64> = pert.log_factor(domain.n()).iter().map(|f| lm + f).collect();
    let log_collar: Vec<f64> = phi.iter().map(|&p| (-s * inverse_exp(p)).ln_1p()).collect();
    let di = domain.normal_derivative(&log_inner);
    let dc = domain.normal_derivative(&log_collar);
    let gaps: Vec<f64> = di.iter().zip(&dc).map(|(a, b)| s * (a - b)).collect();
    if let Some((k, &g)) = gaps.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
        if !(g > 0.0) {
            return Err(DeformError::MeanCurvatureOrderingFailed { vertex: domain.boundary[k], gap: g });
        }
    }
    Ok(MatchedFactor {
        multiplier,
        factor: factor_from_log(domain.n(), &log_inner),
        log_inner,
        interface_gaps: gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_radial_domain, Space};
    use crate::spectral::{first_eigenpair, OperatorKind, OperatorSpec};

    #[test]
    fn multiplier_closed_form() {
        assert!((1.0 - inverse_exp(0.25) - 0.981_684_361_111_265_8).abs() < 1e-15);
    }

    fn cap() -> (DiscreteDomain, ScalarField) {
        let d = build_radial_domain(Space::Sphere { n: 2 }, 2.0, 401).unwrap();
        let r = first_eigenpair(&d, &OperatorSpec::new(&d, OperatorKind::Schrodinger), 1e-9).unwrap();
        assert!(r.eigenvalue < 0.0);
        (d, r.eigenfunction)
    }

    #[test]
    fn zero_t_is_identity() {
        let (d, psi) = cap();
        assert_eq!(perturbation_margin(&d, &psi.values, 0.0, Sign::Plus).unwrap(), 0.0);
    }

    #[test]
    fn signs_mirror_to_first_order() {
        let (d, psi) = cap();
        let t = 1e-3;
        let r0 = d.space.scalar_curvature();
        let field = |sign: Sign| {
            let f = perturbed_log(2, sign.s() * t, &psi.values);
            let r = scalar_curvature(&factor_from_log(2, &f), &d).unwrap();
            r.values.iter().map(|v| v - r0).collect::<Vec<_>>()
        };
        let (p, m) = (field(Sign::Plus), field(Sign::Minus));
        for &i in &d.interior {
            assert!(p[i] > 0.0 && m[i] < 0.0);
            assert!((p[i] + m[i]).abs() < 50.0 * t * t, "{} {}", p[i], m[i]);
        }
    }

    #[test]
    fn plus_perturbation_window() {
        let (d, psi) = cap();
        let p = build_perturbation(&d, &psi, Sign::Plus, 0.45, 0.0).unwrap();
        assert!(p.t > 0.0 && p.t <= p.t_high && p.min_margin > 0.0);
        let e = build_perturbation(&d, &psi, Sign::Plus, 0.45, 1.0).unwrap_err();
        assert!(matches!(e, DeformError::EmptyTWindow { .. }));
    }

    #[test]
    fn matched_factor_meets_collar_on_boundary() {
        let (d, psi) = cap();
        let pert = build_perturbation(&d, &psi, Sign::Plus, 0.45, 0.0).unwrap();
        let eps = 0.25;
        // a stand-in collar level function equal to ε on the boundary
        let phi: Vec<f64> = (0..d.num_vertices()).map(|i| eps + 0.5 * (2.0 - d.radius_of(i))).collect();
        let m = apply_matching(&d, &pert, &phi, eps).unwrap();
        let b = d.boundary[0];
        assert_eq!(m.factor.u.values[b], (1.0 - inverse_exp(eps)).ln());
    }
}
