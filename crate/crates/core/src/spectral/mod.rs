//! First Dirichlet eigenpairs of the Laplacian and of `𝓛 = -Δ - R/(n-1)`.

mod radial;

pub use radial::{radial_eigenvalue, radial_first_eigenpair, RadialOptions};

use crate::geometry::{DiscreteDomain, ScalarField, ScalarFieldFile};
use crate::par;
use crate::sparse::{pcg, Csr};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("eigensolver did not converge in {iterations} iterations (residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },
    #[error("no sign change of the shooting predicate in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("domain has no interior vertices")]
    NoInteriorVertices,
    #[error("tolerance {0} outside [1e-12, 1e-4]")]
    InvalidTolerance(f64),
    #[error("eigenfunction is not positive at vertex {0}")]
    NonPositiveEigenfunction(usize),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Default residual tolerance of the discrete solver.
pub const FEM_TOL: f64 = 1e-8;
/// Default eigenvalue tolerance of the shooting solver.
pub const RADIAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum OperatorKind {
    Laplacian,
    Schrodinger,
}

/// Operator `-Δ - V` with Dirichlet conditions.
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub potential: Vec<f64>,
}

impl OperatorSpec {
    /// Laplacian (V = 0) or Schrödinger operator (V = R/(n-1)) on a domain.
    pub fn new(domain: &DiscreteDomain, kind: OperatorKind) -> Self {
        let v = match kind {
            OperatorKind::Laplacian => 0.0,
            OperatorKind::Schrodinger => schrodinger_potential(domain.space.scalar_curvature(), domain.n()),
        };
        OperatorSpec { kind, potential: vec![v; domain.num_vertices()] }
    }

    pub fn max_potential(&self) -> f64 {
        self.potential.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn schrodinger_potential(r: f64, n: usize) -> f64 {
    r / (n as f64 - 1.0)
}

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub eigenvalue: f64,
    /// Positive in the interior, zero on the boundary, sup-normalized.
    pub eigenfunction: ScalarField,
    pub residual: f64,
    pub iterations: usize,
    pub h: f64,
}

#[derive(Serialize, Deserialize)]
pub struct SpectralResultFile {
    pub eigenvalue: f64,
    pub residual: f64,
    pub iterations: usize,
    pub h: f64,
    pub field: ScalarFieldFile,
}

impl SpectralResult {
    pub fn to_file(&self, domain: &DiscreteDomain) -> SpectralResultFile {
        SpectralResultFile {
            eigenvalue: self.eigenvalue,
            residual: self.residual,
            iterations: self.iterations,
            h: self.h,
            field: self.eigenfunction.to_file(domain),
        }
    }
}

/// The Dirichlet-reduced operator on interior vertices as a generalized
/// pencil: stiffness minus potential-weighted mass, and the lumped mass.
pub fn assemble(domain: &DiscreteDomain, spec: &OperatorSpec) -> (Csr, Vec<f64>) {
    let k = domain.stiffness.restrict(&domain.interior);
    let m: Vec<f64> = domain.interior.iter().map(|&i| domain.mass[i]).collect();
    let shift: Vec<f64> = domain
        .interior
        .iter()
        .zip(&m)
        .map(|(&i, mi)| -spec.potential[i] * mi)
        .collect();
    let ones = vec![1.0; m.len()];
    (k.scaled(&ones, &ones, &shift), m)
}

/// Quadratic form `int |grad f|^2 - int V f^2` of a full vertex field.
pub fn quadratic_form(domain: &DiscreteDomain, spec: &OperatorSpec, f: &[f64]) -> f64 {
    let kf = domain.stiffness.mul(f);
    let energy = par::dot(f, &kf);
    let pot: f64 = (0..f.len()).map(|i| spec.potential[i] * f[i] * f[i] * domain.mass[i]).sum();
    energy - pot
}

/// Smallest eigenvalue and positive eigenfunction by shifted inverse iteration
/// on `M^{-1/2} K M^{-1/2} - V`, seeded with the constant field.
pub fn first_eigenpair(
    domain: &DiscreteDomain,
    spec: &OperatorSpec,
    tol: f64,
) -> Result<SpectralResult, SpectralError> {
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(SpectralError::InvalidTolerance(tol));
    }
    let nint = domain.interior.len();
    if nint == 0 {
        return Err(SpectralError::NoInteriorVertices);
    }
    let k = domain.stiffness.restrict(&domain.interior);
    let s: Vec<f64> = domain.interior.iter().map(|&i| 1.0 / domain.mass[i].sqrt()).collect();
    let v: Vec<f64> = domain.interior.iter().map(|&i| -spec.potential[i]).collect();
    let a = k.scaled(&s, &s, &v);
    // K is positive semi-definite, so A >= -max V
    let sigma = -spec.max_potential() - 1.0;
    let b = a.scaled(&vec![1.0; nint], &vec![1.0; nint], &vec![-sigma; nint]);

    let mut y: Vec<f64> = s.iter().map(|si| 1.0 / si).collect();
    normalize(&mut y);
    let mut x = vec![0.0; nint];
    let mut ay = a.mul(&y);
    let mut rq = par::dot(&y, &ay);
    let mut residual = f64::INFINITY;
    let max_iter = 2000;
    for it in 1..=max_iter {
        let scale = 1.0 / (rq - sigma);
        par::fill_indexed(&mut x, |i| y[i] * scale);
        pcg(&b, &y, &mut x, (1e-3 * tol).max(1e-14), 20 * nint + 100);
        y.copy_from_slice(&x);
        normalize(&mut y);
        a.mul_into(&y, &mut ay);
        rq = par::dot(&y, &ay);
        residual = par::sum_indexed(nint, |i| (ay[i] - rq * y[i]).powi(2)).sqrt();
        if residual <= tol {
            let phi = finish(domain, &s, &y)?;
            return Ok(SpectralResult {
                eigenvalue: rq,
                eigenfunction: phi,
                residual,
                iterations: it,
                h: domain.h,
            });
        }
    }
    Err(SpectralError::SolverDivergence { iterations: max_iter, residual })
}

fn normalize(y: &mut [f64]) {
    let l = par::norm(y);
    y.iter_mut().for_each(|v| *v /= l);
}

fn finish(domain: &DiscreteDomain, s: &[f64], y: &[f64]) -> Result<ScalarField, SpectralError> {
    let mut phi: Vec<f64> = y.iter().zip(s).map(|(a, b)| a * b).collect();
    let sign = if phi.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let sup = phi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    phi.iter_mut().for_each(|v| *v *= sign / sup);
    if let Some(k) = phi.iter().position(|&v| !(v > 0.0)) {
        return Err(SpectralError::NonPositiveEigenfunction(domain.interior[k]));
    }
    Ok(ScalarField::new(domain.extend_interior(&phi)))
}

/// Outward normal derivatives of the eigenfunction on the boundary.
pub fn hopf_boundary_check(domain: &DiscreteDomain, result: &SpectralResult) -> Vec<f64> {
    domain.normal_derivative(&result.eigenfunction.values)
}
