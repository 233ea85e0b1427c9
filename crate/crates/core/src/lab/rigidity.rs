//! Penalized search for conformal factors that lower the Brown-York mass
//! without lowering scalar curvature anywhere in the interior.
//!
//! The objective is `m_BY(u) + μ ∫ (R̄ - R_g)_+^2`, minimized over factors that
//! agree with the identity on the boundary, with semismooth Newton steps taken
//! in the linearized curvature.

use super::LabError;
use crate::conformal::{lin_constant, mean_curvature_coefficient, scalar_curvature, Convention, ConformalFactor};
use crate::geometry::{DiscreteDomain, ScalarField};
use crate::mass::mass_of;
use crate::par;
use crate::sparse::{Csr, ProfileCholesky};
use crate::spectral::{first_eigenpair, OperatorKind, OperatorSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// No restart may end at a mass below `-MASS_FLOOR`.
pub const MASS_FLOOR: f64 = 1e-6;
/// The best point must lie within this sup-distance of the identity.
pub const IDENTITY_RADIUS: f64 = 1e-4;
/// Armijo sufficient-decrease constant.
const ARMIJO: f64 = 1e-4;
/// Relative predicted decrease below which a failed line search counts as stationary.
pub const KINK_STATIONARITY: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SearchSpec {
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_penalty_start")]
    pub penalty_start: f64,
    #[serde(default = "default_penalty_growth")]
    pub penalty_growth: f64,
    #[serde(default = "default_outer_loops")]
    pub outer_loops: usize,
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
    /// Sup-norm of the random starting fields.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Relative Newton-decrement level counted as first-order stationary.
    #[serde(default = "default_stationarity")]
    pub stationarity: f64,
}

fn default_restarts() -> usize {
    200
}
fn default_penalty_start() -> f64 {
    1e3
}
fn default_penalty_growth() -> f64 {
    10.0
}
fn default_outer_loops() -> usize {
    5
}
fn default_max_inner() -> usize {
    400
}
fn default_amplitude() -> f64 {
    1e-2
}
fn default_stationarity() -> f64 {
    1e-12
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            restarts: default_restarts(),
            penalty_start: default_penalty_start(),
            penalty_growth: default_penalty_growth(),
            outer_loops: default_outer_loops(),
            max_inner: default_max_inner(),
            amplitude: default_amplitude(),
            stationarity: default_stationarity(),
        }
    }
}

impl SearchSpec {
    pub fn final_penalty(&self) -> f64 {
        self.penalty_start * self.penalty_growth.powi(self.outer_loops.saturating_sub(1) as i32)
    }
}

/// Discrete objective on the interior unknowns `v = u - identity`.
pub struct Problem<'a> {
    pub domain: &'a DiscreteDomain,
    convention: Convention,
    n: usize,
    r0: f64,
    c: f64,
    k: Csr,
    chol: ProfileCholesky,
    m: Vec<f64>,
    mass_grad: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub objective: f64,
    pub mass: f64,
    /// `∫ (R̄ - R_g)_+^2` by lumped quadrature.
    pub penalty: f64,
    u: Vec<f64>,
    rg: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(domain: &'a DiscreteDomain) -> Self {
        let n = domain.n();
        let nint = domain.interior.len();
        let mut slot = vec![usize::MAX; domain.num_vertices()];
        for (k, &i) in domain.interior.iter().enumerate() {
            slot[i] = k;
        }
        // mass = -c_H Σ_b w_b Σ_j c_bj (u_j - u_b) is linear in the interior values
        let ch = mean_curvature_coefficient(n);
        let mut mass_grad = vec![0.0; nint];
        for (b, row) in domain.normal_stencil.iter().enumerate() {
            for &(j, c) in row {
                if slot[j] != usize::MAX {
                    mass_grad[slot[j]] -= ch * domain.boundary_weight[b] * c;
                }
            }
        }
        let k = domain.stiffness.restrict(&domain.interior);
        Problem {
            domain,
            convention: Convention::for_dim(n),
            n,
            r0: domain.space.scalar_curvature(),
            c: lin_constant(n),
            chol: ProfileCholesky::factor(&k).expect("Dirichlet stiffness is positive definite"),
            k,
            m: domain.interior.iter().map(|&i| domain.mass[i]).collect(),
            mass_grad,
        }
    }

    pub fn unknowns(&self) -> usize {
        self.m.len()
    }

    pub fn full(&self, v: &[f64]) -> Vec<f64> {
        let id = self.convention.identity_value();
        let mut u = vec![id; self.domain.num_vertices()];
        for (k, &i) in self.domain.interior.iter().enumerate() {
            u[i] = id + v[k];
        }
        u
    }

    /// None when the factor leaves the admissible set (u <= 0 for n >= 3).
    pub fn evaluate(&self, v: &[f64], mu: f64) -> Option<Evaluation> {
        let u = self.full(v);
        let cf = ConformalFactor::new(self.convention, ScalarField::new(u), self.n).ok()?;
        let rg = scalar_curvature(&cf, self.domain).ok()?.values;
        let int = &self.domain.interior;
        let penalty = par::sum_indexed(int.len(), |k| self.m[k] * (self.r0 - rg[int[k]]).max(0.0).powi(2));
        let mass = par::dot(&self.mass_grad, v);
        let objective = mass + mu * penalty;
        if !objective.is_finite() {
            return None;
        }
        Some(Evaluation { objective, mass, penalty, u: cf.u.values, rg })
    }

    pub fn gradient(&self, e: &Evaluation, mu: f64) -> Vec<f64> {
        let int = &self.domain.interior;
        let nint = int.len();
        let p: Vec<f64> = int.iter().map(|&i| (self.r0 - e.rg[i]).max(0.0)).collect();
        let (a, d) = self.coefficients(e);
        let q: Vec<f64> = p.iter().zip(&a).map(|(p, a)| p * a).collect();
        let kq = self.k.mul(&q);
        (0..nint)
            .map(|k| self.mass_grad[k] + mu * (-2.0 * self.m[k] * p[k] * d[k] - 2.0 * self.c * kq[k]))
            .collect()
    }

    /// `a = ∂R_g/∂(-cΔu) / c` and `D = ∂R_g/∂u` at fixed Δu, per interior vertex.
    fn coefficients(&self, e: &Evaluation) -> (Vec<f64>, Vec<f64>) {
        self.domain
            .interior
            .iter()
            .map(|&i| {
                let (u, r) = (e.u[i], e.rg[i]);
                match self.convention {
                    Convention::Exponential => ((-2.0 * u).exp(), -2.0 * r),
                    Convention::Power => {
                        let ex = -(self.n as f64 + 2.0) / (self.n as f64 - 2.0);
                        let a = u.powf(ex);
                        (a, ex * r / u + a * self.r0)
                    }
                }
            })
            .unzip()
    }

    /// Search direction for the gradient `g` at `e`.
    ///
    /// The curvature Jacobian is `diag(c a) M^{-1} S` with the symmetric
    /// `S = K + diag(m D / (c a))`, which at the identity is the discrete
    /// `-Δ - R/(n-1)`. In the variable `z = δR_g` the penalty is pointwise,
    /// so active vertices take a Newton step on the diagonal Hessian `2 μ m`
    /// and inactive vertices pushed downward first move to `R_g = R̄`.
    /// Returns the direction and the directional derivative `g · d`.
    pub fn direction(&self, e: &Evaluation, g: &[f64], mu: f64) -> (Vec<f64>, f64) {
        let int = &self.domain.interior;
        let (a, d) = self.coefficients(e);
        let ca: Vec<f64> = a.iter().map(|a| self.c * a).collect();
        let shift: Vec<f64> = (0..int.len()).map(|k| self.m[k] * d[k] / ca[k]).collect();
        let ones = vec![1.0; int.len()];
        let s = self.k.scaled(&ones, &ones, &shift);
        let chol = ProfileCholesky::factor(&s).unwrap_or_else(|| self.chol.clone());
        let sg = chol.solve(g);
        let gz: Vec<f64> = (0..int.len()).map(|k| self.m[k] * sg[k] / ca[k]).collect();
        let dz: Vec<f64> = (0..int.len())
            .map(|k| {
                let newton = -gz[k] / (2.0 * mu * self.m[k]);
                let slack = e.rg[int[k]] - self.r0;
                if slack > 0.0 && gz[k] > 0.0 {
                    newton - slack
                } else {
                    newton
                }
            })
            .collect();
        let slope = par::dot(&gz, &dz);
        let rhs: Vec<f64> = (0..int.len()).map(|k| self.m[k] * dz[k] / ca[k]).collect();
        (chol.solve(&rhs), slope)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RestartOutcome {
    pub restart: usize,
    pub objective: f64,
    pub mass: f64,
    pub infeasibility: f64,
    pub distance_from_identity: f64,
    pub iterations: usize,
    pub stationary: bool,
}

/// Penalty continuation from `v0`: for each penalty weight, descent with
/// Armijo backtracking until the directional derivative is negligible.
pub fn descend(problem: &Problem, v0: Vec<f64>, spec: &SearchSpec) -> (Vec<f64>, RestartOutcome) {
    let mut v = v0;
    let mut mu = spec.penalty_start;
    let mut iterations = 0;
    let mut stationary = false;
    let mut e = problem.evaluate(&v, mu).expect("starting point must be admissible");
    for outer in 0..spec.outer_loops {
        if outer > 0 {
            mu *= spec.penalty_growth;
            e = problem.evaluate(&v, mu).expect("accepted points are admissible");
        }
        let mut alpha: f64 = 1.0;
        stationary = false;
        for _ in 0..spec.max_inner {
            let g = problem.gradient(&e, mu);
            let (d, slope) = problem.direction(&e, &g, mu);
            if !(-slope > spec.stationarity * (e.objective.abs() + spec.stationarity)) {
                stationary = true;
                break;
            }
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = v.iter().zip(&d).map(|(x, y)| x + alpha * y).collect();
                if let Some(et) = problem.evaluate(&trial, mu) {
                    if et.objective < e.objective && et.objective <= e.objective + ARMIJO * alpha * slope {
                        accepted = Some((trial, et));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            iterations += 1;
            match accepted {
                Some((nv, ne)) => {
                    v = nv;
                    e = ne;
                    alpha = (2.0 * alpha).min(1.0);
                }
                None => {
                    // no representable decrease left at a kink of the penalty
                    stationary = -slope <= KINK_STATIONARITY * (e.objective.abs() + spec.stationarity);
                    break;
                }
            }
        }
    }
    let out = RestartOutcome {
        restart: 0,
        objective: e.objective,
        mass: e.mass,
        infeasibility: e.penalty,
        distance_from_identity: v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        iterations,
        stationary,
    };
    (v, out)
}

/// Uniform random start in `[-amplitude, amplitude]` per interior vertex,
/// one ChaCha stream per restart.
pub fn random_start(seed: u64, restart: usize, unknowns: usize, amplitude: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    (0..unknowns).map(|_| amplitude * rng.gen_range(-1.0..=1.0)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RigidityReport {
    pub lambda1: f64,
    pub seed: u64,
    pub restarts: usize,
    pub unknowns: usize,
    pub final_penalty: f64,
    pub best_objective: f64,
    /// Mass of the best point through the boundary-curvature form.
    pub best_mass: f64,
    pub best_infeasibility: f64,
    pub final_factor_distance_from_identity: f64,
    pub best_restart: usize,
    pub best_stationary: bool,
    pub iterations: usize,
    pub stalled: usize,
    pub min_restart_mass: f64,
    pub outcomes: Vec<RestartOutcome>,
}

/// Multi-start search on a domain with certified `Λ₁ > 0`.
pub fn rigidity_search(domain: &DiscreteDomain, spec: &SearchSpec, seed: u64, tol: f64) -> Result<RigidityReport, LabError> {
    let lambda1 = first_eigenpair(domain, &OperatorSpec::new(domain, OperatorKind::Schrodinger), tol)?.eigenvalue;
    if !(lambda1 > 0.0) {
        return Err(LabError::CertifiedNegativeEigenvalue(lambda1));
    }
    if spec.restarts == 0 {
        return Err(LabError::Config("rigidity search needs at least one restart".into()));
    }
    let problem = Problem::new(domain);
    let nint = problem.unknowns();
    let runs = par::map_indexed(spec.restarts, |r| {
        let v0 = random_start(seed, r, nint, spec.amplitude);
        let (v, mut out) = descend(&problem, v0, spec);
        out.restart = r;
        (v, out)
    });
    let (best_v, best) = runs
        .iter()
        .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective))
        .expect("at least one restart");
    let cf = ConformalFactor::new(problem.convention, ScalarField::new(problem.full(best_v)), problem.n)?;
    let best_mass = mass_of(&cf, domain)?.value;
    let outcomes: Vec<RestartOutcome> = runs.iter().map(|(_, o)| o.clone()).collect();
    let report = RigidityReport {
        lambda1,
        seed,
        restarts: spec.restarts,
        unknowns: nint,
        final_penalty: spec.final_penalty(),
        best_objective: best.objective,
        best_mass,
        best_infeasibility: best.infeasibility,
        final_factor_distance_from_identity: best.distance_from_identity,
        best_restart: best.restart,
        best_stationary: best.stationary,
        iterations: outcomes.iter().map(|o| o.iterations).sum(),
        stalled: outcomes.iter().filter(|o| !o.stationary).count(),
        min_restart_mass: outcomes.iter().map(|o| o.mass).fold(f64::INFINITY, f64::min),
        outcomes,
    };
    if report.stalled == report.restarts {
        return Err(LabError::OptimizerStall { best_objective: report.best_objective, report: Box::new(report) });
    }
    Ok(report)
}

/// Objective terms of a given factor on a Λ₁ < 0 domain.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ControlWitness {
    pub lambda1: f64,
    pub mass: f64,
    pub infeasibility: f64,
    pub distance_from_identity: f64,
    /// Least and greatest `R_g - R̄` over interior vertices.
    pub curvature_gain_min: f64,
    pub curvature_gain_max: f64,
}

pub fn control_witness(domain: &DiscreteDomain, factor: &ConformalFactor, tol: f64) -> Result<ControlWitness, LabError> {
    let lambda1 = first_eigenpair(domain, &OperatorSpec::new(domain, OperatorKind::Schrodinger), tol)?.eigenvalue;
    if !(lambda1 < 0.0) {
        return Err(crate::deform::DeformError::CertifiedPositiveEigenvalue(lambda1).into());
    }
    let id = factor.convention.identity_value();
    let problem = Problem::new(domain);
    let v: Vec<f64> = domain.interior.iter().map(|&i| factor.u.values[i] - id).collect();
    let e = problem
        .evaluate(&v, 1.0)
        .ok_or_else(|| LabError::WarmStartMismatch("warm start is not an admissible factor".into()))?;
    let r0 = domain.space.scalar_curvature();
    let gains = domain.interior.iter().map(|&i| e.rg[i] - r0);
    let (lo, hi) = gains.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    Ok(ControlWitness {
        lambda1,
        mass: mass_of(factor, domain)?.value,
        infeasibility: e.penalty,
        distance_from_identity: v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        curvature_gain_min: lo,
        curvature_gain_max: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, build_radial_domain, Region, Space};

    fn fd_check(domain: &DiscreteDomain, v: &[f64], mu: f64) {
        let p = Problem::new(domain);
        let e = p.evaluate(v, mu).unwrap();
        let g = p.gradient(&e, mu);
        let dir = random_start(7, 0, v.len(), 1.0);
        let h = 1e-6;
        let shift = |s: f64| -> Vec<f64> { v.iter().zip(&dir).map(|(a, b)| a + s * b).collect() };
        let fd = (p.evaluate(&shift(h), mu).unwrap().objective - p.evaluate(&shift(-h), mu).unwrap().objective) / (2.0 * h);
        let an = par::dot(&g, &dir);
        assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{fd} vs {an}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = build_domain(Space::Hyperbolic { n: 2 }, &Region::ball(1.0), 0.15).unwrap();
        let v = random_start(3, 1, d.interior.len(), 0.05);
        fd_check(&d, &v, 10.0);
        let r = build_radial_domain(Space::Sphere { n: 3 }, 1.0, 81).unwrap();
        let v: Vec<f64> = r.interior.iter().map(|&i| 0.1 * (1.0 - r.radius_of(i).powi(2))).collect();
        fd_check(&r, &v, 10.0);
    }

    #[test]
    fn linear_mass_matches_boundary_form() {
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.1).unwrap();
        let p = Problem::new(&d);
        let v = random_start(11, 4, p.unknowns(), 0.01);
        let e = p.evaluate(&v, 0.0).unwrap();
        let cf = ConformalFactor::on(&d, p.full(&v)).unwrap();
        assert!((e.mass - mass_of(&cf, &d).unwrap().value).abs() < 1e-13);
    }

    #[test]
    fn restarts_are_reproducible() {
        assert_eq!(random_start(5, 3, 10, 1.0), random_start(5, 3, 10, 1.0));
        assert_ne!(random_start(5, 3, 10, 1.0), random_start(5, 4, 10, 1.0));
    }

    #[test]
    fn negative_domain_is_refused() {
        let d = build_domain(Space::Sphere { n: 2 }, &Region::ball(2.0), 0.15).unwrap();
        let e = rigidity_search(&d, &SearchSpec::default(), 0, 1e-8).unwrap_err();
        assert!(matches!(e, LabError::CertifiedNegativeEigenvalue(l) if l < 0.0));
    }

    #[test]
    fn flat_disk_collapses_to_identity() {
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.1).unwrap();
        let spec = SearchSpec { restarts: 4, ..SearchSpec::default() };
        let rep = rigidity_search(&d, &spec, 1, 1e-8).unwrap();
        assert!(rep.min_restart_mass >= -MASS_FLOOR, "{}", rep.min_restart_mass);
        assert!(rep.final_factor_distance_from_identity < IDENTITY_RADIUS, "{}", rep.final_factor_distance_from_identity);
    }
}
