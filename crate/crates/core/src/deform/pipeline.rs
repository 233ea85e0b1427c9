//! End-to-end construction on a geodesic ball: certify, collar, perturb,
//! match, glue, verify.

use super::collar::{build_collar_metrics, inverse_exp};
use super::glue::{glue, GlueInput, GlueSpec};
use super::perturb::{apply_matching, build_perturbation, margin_of_log, matching_lower_bound, perturbed_log};
use super::{curvature_scale, factor_from_log, DeformError, Sign, Stage};
use crate::conformal::{scalar_curvature, ConformalFactor};
use crate::geometry::{host_ring_mesh, radial_host, DiscreteDomain, Space, VertexOrigin};
use crate::mass::mass_of;
use crate::spectral::{first_eigenpair, OperatorKind, OperatorSpec, FEM_TOL};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Slack allowed in the pointwise collar inequality where `e^{-1/φ}` drops
/// below double precision, relative to the curvature scale.
pub const COLLAR_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum MeshSpec {
    /// Triangulated disk (n = 2 space forms).
    Surface { h: f64 },
    /// Radial grid of a rotationally symmetric ball.
    #[serde(rename_all = "camelCase")]
    Radial { grid_points: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeformConfig {
    pub space: Space,
    pub radius: f64,
    pub sign: Sign,
    pub mesh: MeshSpec,
    /// Width of the host annulus outside Ω.
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_collar_width")]
    pub collar_width: f64,
    /// Gluing budget as a fraction of the least inner margin.
    #[serde(default = "default_delta_fraction")]
    pub delta_fraction: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_margin() -> f64 {
    0.2
}
fn default_t_max() -> f64 {
    0.45
}
fn default_collar_width() -> f64 {
    0.2
}
fn default_delta_fraction() -> f64 {
    0.1
}
fn default_tol() -> f64 {
    FEM_TOL
}

impl DeformConfig {
    pub fn new(space: Space, radius: f64, sign: Sign, mesh: MeshSpec) -> Self {
        DeformConfig {
            space,
            radius,
            sign,
            mesh,
            margin: default_margin(),
            t_max: default_t_max(),
            collar_width: default_collar_width(),
            delta_fraction: default_delta_fraction(),
            tol: default_tol(),
        }
    }
}

/// Ω together with a larger mesh containing it; Ω's vertices are the first
/// `omega.num_vertices()` host vertices.
#[derive(Clone, Debug)]
pub struct HostMesh {
    pub host: DiscreteDomain,
    pub omega: DiscreteDomain,
}

impl HostMesh {
    pub fn new(space: Space, radius: f64, margin: f64, mesh: MeshSpec) -> Result<Self, DeformError> {
        match mesh {
            MeshSpec::Surface { h } => {
                let (rm, ring) = host_ring_mesh(space, radius, margin, h)?;
                let omega = rm.prefix(ring)?;
                Ok(HostMesh { host: rm.domain, omega })
            }
            MeshSpec::Radial { grid_points } => {
                let (host, omega) = radial_host(space, radius, margin, grid_points)?;
                Ok(HostMesh { host, omega })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegionMargins {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl RegionMargins {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let mut m = RegionMargins { min: f64::INFINITY, max: f64::NEG_INFINITY, count: 0 };
        for v in values {
            m.min = m.min.min(v);
            m.max = m.max.max(v);
            m.count += 1;
        }
        m
    }
}

/// `R_g - R` split by region.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurvatureMargins {
    /// Interior vertices of Ω_ε.
    pub inside: RegionMargins,
    /// Interior vertices of Ω outside Ω_ε.
    pub collar: RegionMargins,
    /// Interior host vertices on ∂Ω or outside Ω.
    pub outside: RegionMargins,
    pub min: f64,
    pub max: f64,
}

/// Pointwise check of `s (R_{w²ḡ} - R) > 0` on the outer collar.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CollarCheck {
    pub vertices: usize,
    pub strictly_positive: usize,
    /// Vertices below `-COLLAR_TOL · scale`.
    pub violations: usize,
    pub min: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Parameters {
    pub epsilon: f64,
    pub t: f64,
    pub t_low: f64,
    pub t_high: f64,
    pub multiplier: f64,
    pub collar_width: f64,
    pub blend_width: f64,
    pub glue_retries: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeformationReport {
    pub space: Space,
    pub radius: f64,
    pub sign: Sign,
    pub h: f64,
    pub host_hash: String,
    pub omega_vertices: usize,
    /// First eigenvalue of `-Δ - R/(n-1)` on Ω and on Ω_ε.
    pub lambda_omega: f64,
    pub lambda_eps: f64,
    /// First Laplace eigenvalue of Ω.
    pub laplace_lambda: f64,
    pub rejected_epsilons: Vec<f64>,
    pub subharmonicity_margin: f64,
    pub collar_check: CollarCheck,
    pub parameters: Parameters,
    /// Final factor on the host vertex set.
    pub factor: ConformalFactor,
    /// max |u - identity| over vertices not interior to Ω.
    pub support_certificate: f64,
    pub curvature_margins: CurvatureMargins,
    pub strict_threshold: f64,
    pub achieved_delta: f64,
    pub delta_budget: f64,
    pub brown_york_mass: f64,
    /// max |e^f - 1| with f the log factor.
    pub sup_deviation: f64,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

struct Clock {
    start: Instant,
    laps: Vec<(String, f64)>,
}

impl Clock {
    fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        self.laps.push((format!("{stage:?}"), (now - self.start).as_secs_f64()));
        self.start = now;
    }
}

pub fn build_deformation(cfg: &DeformConfig) -> Result<DeformationReport, DeformError> {
    let sign = cfg.sign;
    let s = sign.s();
    let mut clock = Clock { start: Instant::now(), laps: Vec::new() };

    let HostMesh { host, omega } =
        HostMesh::new(cfg.space, cfg.radius, cfg.margin, cfg.mesh).map_err(|e| e.at(Stage::Mesh))?;
    let no = omega.num_vertices();
    let n = host.n();
    let r0 = cfg.space.scalar_curvature();
    clock.lap(Stage::Mesh);

    let schrod = first_eigenpair(&omega, &OperatorSpec::new(&omega, OperatorKind::Schrodinger), cfg.tol)
        .map_err(|e| DeformError::from(e).at(Stage::Certify))?;
    if !(schrod.eigenvalue < 0.0) {
        return Err(DeformError::CertifiedPositiveEigenvalue(schrod.eigenvalue).at(Stage::Certify));
    }
    let lap = first_eigenpair(&omega, &OperatorSpec::new(&omega, OperatorKind::Laplacian), cfg.tol)
        .map_err(|e| DeformError::from(e).at(Stage::Certify))?;
    let phi_omega = &lap.eigenfunction.values;
    let mut phi = vec![0.0; host.num_vertices()];
    phi[..no].copy_from_slice(phi_omega);
    clock.lap(Stage::Certify);

    let collar = build_collar_metrics(&omega, &lap.eigenfunction, lap.eigenvalue, host.num_vertices(), cfg.tol)
        .map_err(|e| e.at(Stage::Collar))?;
    let eps = collar.pair.epsilon;
    let oe = &collar.omega_eps;
    let base_of: Vec<Option<usize>> = oe
        .origin
        .iter()
        .map(|o| match *o {
            VertexOrigin::Base(i) => Some(i),
            _ => None,
        })
        .collect();
    let phi_eps: Vec<f64> = oe
        .origin
        .iter()
        .map(|o| match *o {
            VertexOrigin::Base(i) => phi_omega[i],
            VertexOrigin::Edge(i, j, t) => (1.0 - t) * phi_omega[i] + t * phi_omega[j],
            VertexOrigin::New => f64::NAN,
        })
        .collect();
    let psi = &collar.eigen_eps.eigenfunction;
    let log_collar: Vec<f64> = phi_omega.iter().map(|&p| (-s * inverse_exp(p)).ln_1p()).collect();
    let rc = scalar_curvature(&factor_from_log(n, &{
        let mut f = vec![0.0; host.num_vertices()];
        f[..no].copy_from_slice(&log_collar);
        f
    }), &host)?
    .values;
    let scale = curvature_scale(r0);
    let mut collar_check = CollarCheck { vertices: 0, strictly_positive: 0, violations: 0, min: f64::INFINITY };
    for &i in &omega.interior {
        if phi[i] <= 2.0 * eps {
            let m = s * (rc[i] - r0);
            collar_check.vertices += 1;
            collar_check.min = collar_check.min.min(m);
            if m > 0.0 {
                collar_check.strictly_positive += 1;
            }
            if m < -COLLAR_TOL * scale {
                collar_check.violations += 1;
            }
        }
    }
    clock.lap(Stage::Collar);

    let t_low = matching_lower_bound(oe, &phi_eps, &psi.values, eps, sign).map_err(|e| e.at(Stage::Perturbation))?;
    let pert = build_perturbation(oe, psi, sign, cfg.t_max, t_low).map_err(|e| e.at(Stage::Perturbation))?;
    clock.lap(Stage::Perturbation);

    let matched = apply_matching(oe, &pert, &phi_eps, eps).map_err(|e| e.at(Stage::Matching))?;
    clock.lap(Stage::Matching);

    // inner factor on Ω: the matched factor on Ω_ε, continued outward through
    // a multiple of φ - ε with the same normal slope as ψ
    let dpsi = oe.normal_derivative(&psi.values);
    let dphi = oe.normal_derivative(&phi_eps);
    let k_ext = dpsi.iter().zip(&dphi).map(|(a, b)| a / b).sum::<f64>() / dpsi.len() as f64;
    let lm = matched.multiplier.ln();
    let ext: Vec<f64> = phi_omega.iter().map(|p| k_ext * (p - eps)).collect();
    let mut inner: Vec<f64> = perturbed_log(n, s * pert.t, &ext).iter().map(|v| lm + v).collect();
    let mut in_eps = vec![false; no];
    let mut in_eps_interior = vec![false; host.num_vertices()];
    for (k, b) in base_of.iter().enumerate() {
        if let Some(i) = *b {
            inner[i] = matched.log_inner[k];
            in_eps[i] = true;
            in_eps_interior[i] = !oe.is_boundary[k];
        }
    }
    let inner_margin = margin_of_log(oe, &matched.log_inner, sign)?;
    let r_inner = scalar_curvature(&matched.factor, oe)?.values;
    let pick = |a: f64, b: f64| if s > 0.0 { a.min(b) } else { a.max(b) };
    let start = if s > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    let mut reference = oe.interior.iter().map(|&k| r_inner[k]).fold(start, pick);
    for &i in &omega.interior {
        if !in_eps[i] {
            reference = pick(reference, rc[i]);
        }
    }
    let spec = GlueSpec {
        collar_width: cfg.collar_width,
        delta_budget: cfg.delta_fraction * inner_margin,
        max_retries: 6,
    };
    let input = GlueInput {
        host: &host,
        omega: &omega,
        phi: &phi,
        inner: &inner,
        collar: &log_collar,
        in_eps: &in_eps,
        sign,
        interface_slope: matched.interface_slope(),
        reference,
    };
    let glued = glue(&input, &spec).map_err(|e| e.at(Stage::Glue))?;
    clock.lap(Stage::Glue);

    let f = &glued.log_factor;
    let rg = &glued.curvature;
    let margins = CurvatureMargins {
        inside: RegionMargins::of((0..no).filter(|&i| in_eps_interior[i]).map(|i| rg[i] - r0)),
        collar: RegionMargins::of(omega.interior.iter().filter(|&&i| !in_eps_interior[i]).map(|&i| rg[i] - r0)),
        outside: RegionMargins::of(
            host.interior.iter().filter(|&&i| i >= no || omega.is_boundary[i]).map(|&i| rg[i] - r0),
        ),
        min: host.interior.iter().map(|&i| rg[i] - r0).fold(f64::INFINITY, f64::min),
        max: host.interior.iter().map(|&i| rg[i] - r0).fold(f64::NEG_INFINITY, f64::max),
    };
    let factor = factor_from_log(n, f);
    let identity = factor.convention.identity_value();
    let support_certificate = (0..host.num_vertices())
        .filter(|&i| i >= no || omega.is_boundary[i])
        .map(|i| (factor.u.values[i] - identity).abs())
        .fold(0.0, f64::max);
    let on_omega = factor_from_log(n, &f[..no]);
    let mass = mass_of(&on_omega, &omega)?;
    let threshold = 10.0 * omega.h * omega.h * scale;
    let inside_strict = if s > 0.0 { margins.inside.min } else { -margins.inside.max };
    clock.lap(Stage::Verify);
    if !(inside_strict >= threshold) {
        return Err(DeformError::NotStrict { margin: inside_strict, threshold }.at(Stage::Verify));
    }

    Ok(DeformationReport {
        space: cfg.space,
        radius: cfg.radius,
        sign,
        h: omega.h,
        host_hash: host.hash(),
        omega_vertices: no,
        lambda_omega: schrod.eigenvalue,
        lambda_eps: collar.eigen_eps.eigenvalue,
        laplace_lambda: lap.eigenvalue,
        rejected_epsilons: collar.rejected.clone(),
        subharmonicity_margin: collar.pair.subharmonicity_margin,
        collar_check,
        parameters: Parameters {
            epsilon: eps,
            t: pert.t,
            t_low: pert.t_low,
            t_high: pert.t_high,
            multiplier: matched.multiplier,
            collar_width: glued.collar_width,
            blend_width: glued.blend_width,
            glue_retries: glued.retries,
        },
        sup_deviation: f.iter().map(|v| v.exp_m1().abs()).fold(0.0, f64::max),
        factor,
        support_certificate,
        curvature_margins: margins,
        strict_threshold: threshold,
        achieved_delta: glued.achieved_delta,
        delta_budget: spec.delta_budget,
        brown_york_mass: mass.value,
        timings: clock.laps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial(space: Space, radius: f64, sign: Sign) -> DeformConfig {
        DeformConfig::new(space, radius, sign, MeshSpec::Radial { grid_points: 401 })
    }

    fn check(rep: &DeformationReport) {
        let s = rep.sign.s();
        assert_eq!(rep.support_certificate, 0.0);
        assert!(rep.achieved_delta <= rep.delta_budget);
        assert!(rep.brown_york_mass.abs() <= 1e-12, "{}", rep.brown_york_mass);
        assert!(rep.sup_deviation > 0.0);
        let strict = if s > 0.0 { rep.curvature_margins.inside.min } else { -rep.curvature_margins.inside.max };
        assert!(strict >= rep.strict_threshold);
        assert_eq!(rep.collar_check.violations, 0);
        assert_eq!(rep.curvature_margins.outside.min, 0.0);
        assert_eq!(rep.curvature_margins.outside.max, 0.0);
    }

    #[test]
    fn radial_sphere_caps_both_signs() {
        for space in [Space::Sphere { n: 2 }, Space::Sphere { n: 3 }] {
            for sign in [Sign::Plus, Sign::Minus] {
                let rep = build_deformation(&radial(space, 2.0, sign)).unwrap();
                assert!(rep.lambda_omega < 0.0);
                check(&rep);
            }
        }
    }

    #[test]
    fn sub_hemisphere_cap_is_refused() {
        let e = build_deformation(&radial(Space::Sphere { n: 2 }, 1.0, Sign::Plus)).unwrap_err();
        assert!(matches!(e.root(), DeformError::CertifiedPositiveEigenvalue(l) if *l > 0.0));
        assert!(matches!(e, DeformError::InStage { stage: Stage::Certify, .. }));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = DeformConfig::new(Space::Sphere { n: 2 }, 2.0, Sign::Minus, MeshSpec::Surface { h: 0.05 });
        let s = serde_json::to_string(&cfg).unwrap();
        let back: DeformConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back.mesh, cfg.mesh);
        assert_eq!(back.sign, Sign::Minus);
        let minimal: DeformConfig =
            serde_json::from_str(r#"{"space":{"kind":"sphere","n":2},"radius":2.0,"sign":"plus","mesh":{"kind":"radial","gridPoints":101}}"#)
                .unwrap();
        assert_eq!(minimal.t_max, 0.45);
    }
}
