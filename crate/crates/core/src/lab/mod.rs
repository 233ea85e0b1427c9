//! Experiments, their configuration files and the report/exit-code contract
//! used by the `crl` binary.

mod product;
mod rigidity;
mod sweep;

pub use product::{product_volume_growth_demo, tube_ramp_quotient, ProductReport};
pub use rigidity::{
    control_witness, descend, random_start, rigidity_search, ControlWitness, Problem, RestartOutcome,
    RigidityReport, SearchSpec, IDENTITY_RADIUS, MASS_FLOOR,
};
pub use sweep::{
    complement_eigenvalue_sweep, critical_radius, fit_line, karp_pinsky_sweep, log_spaced, radial_lambda,
    ramp_quotient, ramp_volume_bound, ComplementReport, KarpPinskyReport, Sweep, SweepRow, CROSSING_TOL,
    MIN_SWEEP_POINTS,
};

use crate::conformal::{curvature_csv, background_curvature, scalar_curvature, ConformalError, ConformalFactor, Convention};
use crate::deform::{build_deformation, DeformConfig, DeformError, DeformationReport, HostMesh, MeshSpec, Sign};
use crate::geometry::{build_domain, DiscreteDomain, GeometryError, Region, ScalarField, ScalarFieldFile, Space};
use crate::mass::mass_of;
use crate::spectral::{
    first_eigenpair, hopf_boundary_check, radial_first_eigenpair, OperatorKind, OperatorSpec, SpectralError, FEM_TOL,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

/// Zero-mass tolerance for deformations that fix the boundary.
pub const ZERO_MASS_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("first eigenvalue {0} is negative; the rigidity search needs Λ₁ > 0 (set \"control\" for the flexibility control)")]
    CertifiedNegativeEigenvalue(f64),
    #[error("optimizer stalled in every restart (best objective {best_objective:e})")]
    OptimizerStall { best_objective: f64, report: Box<RigidityReport> },
    #[error("Λ₁ keeps one sign on [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },
    #[error("ramp quotient {quotient} is not below {threshold}; enlarge the truncation")]
    TruncationTooSmall { quotient: f64, threshold: f64 },
    #[error("warm start does not fit the search domain: {0}")]
    WarmStartMismatch(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => EXIT_CONFIG,
            LabError::Geometry(GeometryError::InvalidRegion(_) | GeometryError::UnsupportedCombination(_)) => EXIT_CONFIG,
            LabError::CertifiedNegativeEigenvalue(_) => EXIT_PRECONDITION,
            LabError::Deform(e) if matches!(e.root(), DeformError::CertifiedPositiveEigenvalue(_)) => EXIT_PRECONDITION,
            _ => EXIT_FAILURE,
        }
    }
}

fn default_operator() -> OperatorKind {
    OperatorKind::Schrodinger
}
fn default_tol() -> f64 {
    FEM_TOL
}
fn default_radial_points() -> usize {
    2001
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MeshJob {
    pub space: Space,
    pub region: Region,
    pub h: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RadialJob {
    pub space: Space,
    pub radius: f64,
    #[serde(default = "default_operator")]
    pub operator: OperatorKind,
    #[serde(default = "default_radial_points")]
    pub grid_points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EigJob {
    pub space: Space,
    pub region: Region,
    pub h: f64,
    #[serde(default = "default_operator")]
    pub operator: OperatorKind,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

/// Mass of a factor given either as a mesh file and a field file, or as
/// `u = identity + amplitude (1 - (ρ/r)^2)` on a geodesic ball.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MassJob {
    #[serde(rename_all = "camelCase")]
    Files { mesh: PathBuf, field: PathBuf },
    #[serde(rename_all = "camelCase")]
    Bump { space: Space, radius: f64, h: f64, amplitude: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct KarpPinskyJob {
    pub space: Space,
    pub r_min: f64,
    pub r_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub expected_slope: Option<f64>,
    #[serde(default = "default_slope_tol")]
    pub slope_tolerance: f64,
    #[serde(default)]
    pub expected_crossing: Option<f64>,
    #[serde(default = "default_crossing_tol")]
    pub crossing_tolerance: f64,
}

fn default_points() -> usize {
    9
}
fn default_slope_tol() -> f64 {
    0.01
}
fn default_crossing_tol() -> f64 {
    1e-5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ComplementJob {
    #[serde(default = "default_complement_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_complement_h")]
    pub h: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Allowed distance from 2 of λ₁ at the hemisphere.
    #[serde(default = "default_hemisphere_tol")]
    pub hemisphere_tolerance: f64,
}

pub fn default_complement_radii() -> Vec<f64> {
    vec![PI / 2.0, 1.3, 1.0, 0.8, 0.6, 0.4, 0.3, 0.2]
}
fn default_complement_h() -> f64 {
    0.05
}
fn default_hemisphere_tol() -> f64 {
    5e-3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProductJob {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_lengths")]
    pub lengths: Vec<f64>,
    #[serde(default = "default_product_grid")]
    pub grid_points: usize,
}

fn default_k() -> usize {
    2
}
fn default_lengths() -> Vec<f64> {
    vec![20.0, 40.0]
}
fn default_product_grid() -> usize {
    2001
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RigidityJob {
    pub space: Space,
    pub radius: f64,
    pub h: f64,
    #[serde(default)]
    pub search: SearchSpec,
    /// Run on a Λ₁ < 0 cap, checking the deformation as a witness instead.
    #[serde(default)]
    pub control: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Domains with `|Λ₁|` inside this band are tabulated and tagged inconclusive.
    #[serde(default = "default_critical_band")]
    pub critical_band: f64,
}

fn default_critical_band() -> f64 {
    0.05
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "camelCase")]
pub enum Experiment {
    Mesh(MeshJob),
    Radial(RadialJob),
    Eig(EigJob),
    Mass(MassJob),
    Deform(DeformConfig),
    KarpPinsky(KarpPinskyJob),
    Complement(ComplementJob),
    Product(ProductJob),
    Rigidity(RigidityJob),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Mesh(_) => "mesh",
            Experiment::Radial(_) => "radial",
            Experiment::Eig(_) => "eig",
            Experiment::Mass(_) => "mass",
            Experiment::Deform(_) => "deform",
            Experiment::KarpPinsky(_) => "karpPinsky",
            Experiment::Complement(_) => "complement",
            Experiment::Product(_) => "product",
            Experiment::Rigidity(_) => "rigidity",
        }
    }
}

/// Whether CLI subcommand `command` may run `experiment`. `verify` runs anything.
pub fn command_accepts(command: &str, experiment: &Experiment) -> bool {
    match (command, experiment) {
        ("verify", _) => true,
        ("sweep", Experiment::KarpPinsky(_) | Experiment::Complement(_) | Experiment::Product(_)) => true,
        (c, e) => c == e.kind(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub experiment: Experiment,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, LabError> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let s = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(s.as_bytes()))
    }

    /// Replace the mesh size of experiments that have one.
    pub fn with_h(mut self, h: f64) -> Self {
        match &mut self.experiment {
            Experiment::Mesh(j) => j.h = h,
            Experiment::Eig(j) => j.h = h,
            Experiment::Mass(MassJob::Bump { h: old, .. }) => *old = h,
            Experiment::Complement(j) => j.h = h,
            Experiment::Rigidity(j) => j.h = h,
            Experiment::Deform(c) => {
                if let MeshSpec::Surface { h: old } = &mut c.mesh {
                    *old = h;
                }
            }
            _ => {}
        }
        self
    }

    /// Make file paths inside the config relative to `base`.
    pub fn resolve_paths(mut self, base: &Path) -> Self {
        if let Experiment::Mass(MassJob::Files { mesh, field }) = &mut self.experiment {
            *mesh = base.join(&*mesh);
            *field = base.join(&*field);
        }
        self
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let positive = |what: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(LabError::Config(format!("{what} must be positive, got {x}")))
            }
        };
        let space_ok = |s: &Space| s.validate().map_err(|e| LabError::Config(e.to_string()));
        let region_ok = |s: &Space, r: &Region| r.validate(s).map_err(|e| LabError::Config(e.to_string()));
        match &self.experiment {
            Experiment::Mesh(j) => {
                space_ok(&j.space)?;
                region_ok(&j.space, &j.region)?;
                positive("h", j.h)?;
            }
            Experiment::Radial(j) => {
                space_ok(&j.space)?;
                region_ok(&j.space, &Region::ball(j.radius))?;
            }
            Experiment::Eig(j) => {
                space_ok(&j.space)?;
                region_ok(&j.space, &j.region)?;
                positive("h", j.h)?;
            }
            Experiment::Mass(MassJob::Bump { space, radius, h, .. }) => {
                space_ok(space)?;
                region_ok(space, &Region::ball(*radius))?;
                positive("h", *h)?;
            }
            Experiment::Mass(MassJob::Files { .. }) => {}
            Experiment::Deform(c) => {
                space_ok(&c.space)?;
                region_ok(&c.space, &Region::ball(c.radius))?;
            }
            Experiment::KarpPinsky(j) => {
                space_ok(&j.space)?;
                positive("rMin", j.r_min)?;
                if !(j.r_max > j.r_min && j.r_max < j.space.max_radius()) {
                    return Err(LabError::Config(format!("radius range [{}, {}] is invalid", j.r_min, j.r_max)));
                }
                if j.points < MIN_SWEEP_POINTS {
                    return Err(LabError::Config(format!("sweep needs at least {MIN_SWEEP_POINTS} points")));
                }
            }
            Experiment::Complement(j) => {
                positive("h", j.h)?;
                if j.radii.len() < MIN_SWEEP_POINTS {
                    return Err(LabError::Config(format!("sweep needs at least {MIN_SWEEP_POINTS} radii")));
                }
            }
            Experiment::Product(j) => {
                if j.lengths.is_empty() {
                    return Err(LabError::Config("no truncation lengths".into()));
                }
            }
            Experiment::Rigidity(j) => {
                space_ok(&j.space)?;
                region_ok(&j.space, &Region::ball(j.radius))?;
                positive("h", j.h)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabReport {
    pub name: String,
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub mesh_hash: Option<String>,
    pub tolerances: BTreeMap<String, f64>,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub error: Option<String>,
    pub result: Value,
}

/// Everything an experiment run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: LabReport,
    pub rows: Option<String>,
    /// Extra files, by name.
    pub artifacts: Vec<(String, String)>,
    pub timings: Vec<(String, f64)>,
    pub exit_code: i32,
}

#[derive(Default)]
struct Outcome {
    result: Value,
    rows: Option<String>,
    artifacts: Vec<(String, String)>,
    assertions: Vec<Assertion>,
    mesh_hash: Option<String>,
    tolerances: BTreeMap<String, f64>,
}

impl Outcome {
    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion { name: name.into(), passed, detail });
    }
    fn tol(&mut self, name: &str, v: f64) {
        self.tolerances.insert(name.into(), v);
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report serializes")
}

fn hash_all(hashes: &[String]) -> String {
    hex::encode(Sha256::digest(hashes.join(",").as_bytes()))
}

fn field_csv(name: &str, d: &DiscreteDomain, values: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["vertexIndex", "isBoundary", name]).expect("in-memory write");
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), d.is_boundary[i].to_string(), v.to_string()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Conformal factor `identity + amplitude (1 - (ρ/r)^2)`, exactly the identity on the boundary.
pub fn quadratic_bump(d: &DiscreteDomain, radius: f64, amplitude: f64) -> Result<ConformalFactor, LabError> {
    let id = Convention::for_dim(d.n()).identity_value();
    let center = d.space.default_center();
    let mut u: Vec<f64> = (0..d.num_vertices())
        .map(|i| {
            let rho = if d.dimension == 1 { d.radius_of(i) } else { d.space.distance(&d.vertices[i], &center) };
            id + amplitude * (1.0 - (rho / radius).powi(2))
        })
        .collect();
    for &b in &d.boundary {
        u[b] = id;
    }
    Ok(ConformalFactor::on(d, u)?)
}

fn ball(space: Space, radius: f64, h: f64) -> Result<DiscreteDomain, LabError> {
    Ok(build_domain(space, &Region::ball(radius), h)?)
}

/// Criterion-style checks on a deformation report.
pub fn deformation_assertions(rep: &DeformationReport) -> Vec<Assertion> {
    let mut o = Outcome::default();
    let s = rep.sign.s();
    let strict = if s > 0.0 { rep.curvature_margins.inside.min } else { -rep.curvature_margins.inside.max };
    o.check("supportCertificate", rep.support_certificate == 0.0, format!("{:e}", rep.support_certificate));
    o.check(
        "strictInterior",
        strict >= rep.strict_threshold,
        format!("margin {strict:e} vs threshold {:e}", rep.strict_threshold),
    );
    o.check(
        "deltaBudget",
        rep.achieved_delta <= rep.delta_budget,
        format!("{:e} <= {:e}", rep.achieved_delta, rep.delta_budget),
    );
    o.check("zeroMass", rep.brown_york_mass.abs() <= ZERO_MASS_TOL, format!("{:e}", rep.brown_york_mass));
    o.check("nontrivial", rep.sup_deviation > 0.0, format!("sup|u-1| = {:e}", rep.sup_deviation));
    o.check("collarInequality", rep.collar_check.violations == 0, format!("{} violations", rep.collar_check.violations));
    o.assertions
}

/// Run the deformation behind a rigidity control and return the search
/// domain (Ω of the host mesh) with the report.
pub fn control_deformation(space: Space, radius: f64, h: f64) -> Result<(DiscreteDomain, DeformationReport), LabError> {
    let cfg = DeformConfig::new(space, radius, Sign::Plus, MeshSpec::Surface { h });
    let rep = build_deformation(&cfg)?;
    let hm = HostMesh::new(space, radius, cfg.margin, cfg.mesh)?;
    Ok((hm.omega, rep))
}

/// Check a deformation as the flexibility witness on its own Ω.
pub fn control_from_report(
    omega: &DiscreteDomain,
    rep: &DeformationReport,
    tol: f64,
) -> Result<ControlWitness, LabError> {
    let no = omega.num_vertices();
    if rep.omega_vertices != no {
        return Err(LabError::WarmStartMismatch(format!("{} vertices vs {}", rep.omega_vertices, no)));
    }
    let f = ConformalFactor::new(rep.factor.convention, crate::geometry::ScalarField::new(rep.factor.u.values[..no].to_vec()), rep.factor.n)?;
    control_witness(omega, &f, tol)
}

fn execute(cfg: &ExperimentConfig, timings: &mut Vec<(String, f64)>) -> Result<Outcome, LabError> {
    let mut o = Outcome::default();
    let clock = Instant::now();
    match &cfg.experiment {
        Experiment::Mesh(j) => {
            let d = build_domain(j.space, &j.region, j.h)?;
            o.mesh_hash = Some(d.hash());
            o.result = serde_json::json!({
                "vertices": d.num_vertices(),
                "cells": d.cells.len(),
                "boundaryVertices": d.boundary.len(),
                "h": d.h,
                "volume": d.volume(),
                "boundaryMeasure": d.boundary_measure(),
            });
            o.check("noDuplicateVertices", !d.has_duplicate_vertices(1e-12), String::new());
            o.rows = Some(field_csv("mass", &d, &d.mass));
            o.artifacts.push(("mesh.json".into(), d.to_json()));
        }
        Experiment::Radial(j) => {
            let res = radial_first_eigenpair(j.space, j.radius, j.operator, j.grid_points)?;
            let d = crate::geometry::build_radial_domain(j.space, j.radius, j.grid_points)?;
            o.mesh_hash = Some(d.hash());
            o.tol("bracket", crate::spectral::RADIAL_TOL);
            o.check("positiveEigenfunction", d.interior.iter().all(|&i| res.eigenfunction.values[i] > 0.0), String::new());
            o.rows = Some(field_csv("phi", &d, &res.eigenfunction.values));
            o.result = to_value(&res.to_file(&d));
        }
        Experiment::Eig(j) => {
            let d = build_domain(j.space, &j.region, j.h)?;
            o.mesh_hash = Some(d.hash());
            o.tol("residual", j.tol);
            let res = first_eigenpair(&d, &OperatorSpec::new(&d, j.operator), j.tol)?;
            let hopf = hopf_boundary_check(&d, &res);
            o.check("hopf", hopf.iter().all(|&x| x < 0.0), format!("max ∂νφ = {:e}", hopf.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))));
            o.rows = Some(field_csv("phi", &d, &res.eigenfunction.values));
            o.result = to_value(&res.to_file(&d));
        }
        Experiment::Mass(j) => {
            let (d, cf) = match j {
                MassJob::Bump { space, radius, h, amplitude } => {
                    let d = ball(*space, *radius, *h)?;
                    let cf = quadratic_bump(&d, *radius, *amplitude)?;
                    (d, cf)
                }
                MassJob::Files { mesh, field } => {
                    let read = |p: &PathBuf| {
                        std::fs::read_to_string(p).map_err(|e| LabError::Config(format!("{}: {e}", p.display())))
                    };
                    let d = DiscreteDomain::from_json(&read(mesh)?)?;
                    let file: ScalarFieldFile =
                        serde_json::from_str(&read(field)?).map_err(|e| LabError::Config(e.to_string()))?;
                    let values = ScalarField::from_file(file, &d)?.values;
                    let cf = ConformalFactor::on(&d, values)?;
                    (d, cf)
                }
            };
            o.mesh_hash = Some(d.hash());
            let m = mass_of(&cf, &d)?;
            o.tol("formAgreement", crate::mass::FORM_AGREEMENT);
            o.check("formsAgree", (m.value - m.normal_derivative_form).abs() <= 1e-10 * m.value.abs().max(1.0), format!("{:e} vs {:e}", m.value, m.normal_derivative_form));
            let rg = scalar_curvature(&cf, &d)?;
            o.rows = Some(curvature_csv(&d, &background_curvature(&d), &rg));
            o.result = to_value(&m);
        }
        Experiment::Deform(c) => {
            let rep = build_deformation(c)?;
            let hm = HostMesh::new(c.space, c.radius, c.margin, c.mesh)?;
            o.mesh_hash = Some(rep.host_hash.clone());
            o.tol("zeroMass", ZERO_MASS_TOL);
            o.tol("solver", c.tol);
            o.assertions = deformation_assertions(&rep);
            o.check("hostHash", hm.host.hash() == rep.host_hash, String::new());
            let rg = scalar_curvature(&rep.factor, &hm.host)?;
            o.rows = Some(curvature_csv(&hm.host, &background_curvature(&hm.host), &rg));
            timings.extend(rep.timings.iter().cloned());
            o.result = to_value(&rep);
        }
        Experiment::KarpPinsky(j) => {
            let radii = log_spaced(j.r_min, j.r_max, j.points);
            let rep = karp_pinsky_sweep(j.space, &radii)?;
            o.tol("bracket", crate::spectral::RADIAL_TOL);
            o.tol("crossingBisection", CROSSING_TOL);
            let lam: Vec<f64> = rep.sweep.rows.iter().map(|r| r.value).collect();
            o.check("monotoneInRadius", lam.windows(2).all(|w| w[1] < w[0]), String::new());
            if let Some(s) = j.expected_slope {
                o.tol("slope", j.slope_tolerance);
                o.check("slope", (rep.fitted_slope - s).abs() <= j.slope_tolerance, format!("{} vs {s}", rep.fitted_slope));
            }
            if let Some(x) = j.expected_crossing {
                o.tol("crossing", j.crossing_tolerance);
                let r = rep.critical_radius.ok_or(LabError::NoCrossing { lo: j.r_min, hi: j.r_max })?;
                o.check("crossing", (r - x).abs() <= j.crossing_tolerance, format!("{r} vs {x}"));
            }
            o.rows = Some(rep.sweep.to_csv());
            o.result = to_value(&rep);
        }
        Experiment::Complement(j) => {
            let rep = complement_eigenvalue_sweep(&j.radii, j.h, j.tol)?;
            o.mesh_hash = Some(hash_all(&rep.mesh_hashes));
            o.tol("hemisphere", j.hemisphere_tolerance);
            o.tol("residual", j.tol);
            for a in complement_assertions(&rep, j.hemisphere_tolerance) {
                o.assertions.push(a);
            }
            o.rows = Some(rep.sweep.to_csv());
            o.result = to_value(&rep);
        }
        Experiment::Product(j) => {
            let mut reports = Vec::new();
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            for &l in &j.lengths {
                match product_volume_growth_demo(j.k, l, j.grid_points) {
                    Ok(r) => {
                        rows.push(SweepRow {
                            parameter: l,
                            value: r.quotient,
                            h: l / (j.grid_points - 1) as f64,
                            residual: (r.discrete_quotient - r.quotient).abs(),
                            aux: vec![r.discrete_quotient, r.lambda_bound],
                        });
                        reports.push(r);
                    }
                    Err(LabError::TruncationTooSmall { quotient, threshold }) => failures.push((l, quotient, threshold)),
                    Err(e) => return Err(e),
                }
            }
            let sweep = Sweep::new("L", "rampQuotient", &["discreteQuotient", "lambdaBound"], rows);
            let longest = j.lengths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            o.check(
                "longestCertifies",
                reports.iter().any(|r| r.length == longest),
                format!("{} lengths too short", failures.len()),
            );
            o.check("quotientDecreases", sweep.rows.windows(2).all(|w| w[1].value < w[0].value), String::new());
            o.check(
                "quadratureAgrees",
                reports.iter().all(|r| (r.discrete_quotient - r.quotient).abs() <= 1e-3 * r.quotient),
                String::new(),
            );
            o.rows = Some(sweep.to_csv());
            o.result = serde_json::json!({
                "certified": reports,
                "tooShort": failures.iter().map(|(l, q, t)| serde_json::json!({"length": l, "quotient": q, "threshold": t})).collect::<Vec<_>>(),
                "sweep": sweep,
            });
        }
        Experiment::Rigidity(j) => {
            o.tol("massFloor", MASS_FLOOR);
            o.tol("identityRadius", IDENTITY_RADIUS);
            o.tol("solver", j.tol);
            if j.control {
                let (omega, rep) = control_deformation(j.space, j.radius, j.h)?;
                o.mesh_hash = Some(omega.hash());
                let w = control_from_report(&omega, &rep, j.tol)?;
                o.assertions = control_assertions(&w);
                o.result = serde_json::json!({ "control": w, "deformation": rep.parameters });
            } else {
                let d = ball(j.space, j.radius, j.h)?;
                o.mesh_hash = Some(d.hash());
                o.tol("criticalBand", j.critical_band);
                let lambda1 = first_eigenpair(&d, &OperatorSpec::new(&d, OperatorKind::Schrodinger), j.tol)?.eigenvalue;
                let near_critical = lambda1.abs() <= j.critical_band;
                if near_critical && lambda1 <= 0.0 {
                    o.result = serde_json::json!({ "verdict": "inconclusive", "lambda1": lambda1 });
                    timings.push(("total".into(), clock.elapsed().as_secs_f64()));
                    return Ok(o);
                }
                let rep = rigidity_search(&d, &j.search, cfg.seed, j.tol)?;
                if !near_critical {
                    o.assertions = rigidity_assertions(&rep);
                }
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in &rep.outcomes {
                    w.serialize(r).expect("in-memory write");
                }
                o.rows = Some(String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
                o.result = to_value(&rep);
                o.result["verdict"] = (if near_critical { "inconclusive" } else { "rigid" }).into();
            }
        }
    }
    timings.push(("total".into(), clock.elapsed().as_secs_f64()));
    Ok(o)
}

pub fn complement_assertions(rep: &ComplementReport, hemisphere_tol: f64) -> Vec<Assertion> {
    let mut o = Outcome::default();
    let rows = &rep.sweep.rows;
    o.check("monotone", rows.windows(2).all(|w| w[0].value < w[1].value), "λ₁ increases with r".into());
    let below: Vec<f64> = rows.iter().filter(|r| r.parameter < PI / 2.0 - 1e-12).map(|r| r.value).collect();
    o.check("belowTwo", below.iter().all(|&v| v < 2.0), format!("max {:?}", below.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
    if let Some(h) = rows.iter().find(|r| (r.parameter - PI / 2.0).abs() < 1e-12) {
        o.check("hemisphere", (h.value - 2.0).abs() <= hemisphere_tol, format!("{}", h.value));
    }
    o.check(
        "rampUpperBound",
        rows.iter().all(|r| r.value <= r.aux[0] && r.value <= r.aux[1]),
        "λ₁ below both ramp quotients".into(),
    );
    o.assertions
}

pub fn rigidity_assertions(rep: &RigidityReport) -> Vec<Assertion> {
    let mut o = Outcome::default();
    o.check("noNegativeMass", rep.min_restart_mass >= -MASS_FLOOR, format!("{:e}", rep.min_restart_mass));
    o.check(
        "collapsesToIdentity",
        rep.final_factor_distance_from_identity < IDENTITY_RADIUS,
        format!("{:e}", rep.final_factor_distance_from_identity),
    );
    o.assertions
}

pub fn control_assertions(w: &ControlWitness) -> Vec<Assertion> {
    let mut o = Outcome::default();
    o.check("feasible", w.infeasibility == 0.0, format!("{:e}", w.infeasibility));
    o.check("zeroMass", w.mass.abs() <= ZERO_MASS_TOL, format!("{:e}", w.mass));
    o.check("nontrivial", w.distance_from_identity > 0.0, format!("{:e}", w.distance_from_identity));
    o.check("curvatureRaised", w.curvature_gain_max > 0.0 && w.curvature_gain_min >= 0.0, format!("[{:e}, {:e}]", w.curvature_gain_min, w.curvature_gain_max));
    o.assertions
}

/// Run a parsed config; errors end up in the report.
pub fn run(cfg: &ExperimentConfig) -> RunOutput {
    let mut timings = Vec::new();
    let base = LabReport {
        name: cfg.name.clone(),
        experiment: cfg.experiment.kind().into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        mesh_hash: None,
        tolerances: BTreeMap::new(),
        passed: false,
        assertions: Vec::new(),
        error: None,
        result: Value::Null,
    };
    match execute(cfg, &mut timings) {
        Ok(o) => {
            let passed = o.assertions.iter().all(|a| a.passed);
            RunOutput {
                report: LabReport {
                    mesh_hash: o.mesh_hash,
                    tolerances: o.tolerances,
                    passed,
                    assertions: o.assertions,
                    result: o.result,
                    ..base
                },
                rows: o.rows,
                artifacts: o.artifacts,
                timings,
                exit_code: if passed { EXIT_PASS } else { EXIT_FAILURE },
            }
        }
        Err(e) => {
            let code = e.exit_code();
            let result = match &e {
                LabError::OptimizerStall { report, .. } => to_value(report),
                _ => Value::Null,
            };
            RunOutput {
                report: LabReport { error: Some(e.to_string()), result, ..base },
                rows: None,
                artifacts: Vec::new(),
                timings,
                exit_code: code,
            }
        }
    }
}

/// Write `report.json`, `rows.csv` (when the experiment has rows), any
/// artifacts, and `timings.json` into `out`.
pub fn write_output(out: &Path, o: &RunOutput) -> Result<(), LabError> {
    std::fs::create_dir_all(out)?;
    let report = serde_json::to_string_pretty(&o.report).expect("report serializes");
    std::fs::write(out.join("report.json"), report + "\n")?;
    if let Some(rows) = &o.rows {
        std::fs::write(out.join("rows.csv"), rows)?;
    }
    for (name, body) in &o.artifacts {
        std::fs::write(out.join(name), body)?;
    }
    let t: BTreeMap<&str, f64> = o.timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    std::fs::write(out.join("timings.json"), serde_json::to_string_pretty(&t).expect("timings serialize") + "\n")?;
    Ok(())
}

/// Read a config file, apply overrides, run it, and write the outputs.
/// Returns the process exit status.
pub fn run_experiment(path: &Path, out: &Path, h: Option<f64>, seed: Option<u64>) -> (i32, Option<LabReport>) {
    run_command("verify", path, out, h, seed)
}

/// [`run_experiment`] for a CLI subcommand; a config of another family is a
/// config error.
pub fn run_command(
    command: &str,
    path: &Path,
    out: &Path,
    h: Option<f64>,
    seed: Option<u64>,
) -> (i32, Option<LabReport>) {
    let parsed = std::fs::read_to_string(path)
        .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
        .and_then(|s| ExperimentConfig::from_json(&s))
        .and_then(|c| {
            if command_accepts(command, &c.experiment) {
                Ok(c)
            } else {
                Err(LabError::Config(format!("`{command}` cannot run a {} experiment", c.experiment.kind())))
            }
        });
    let mut cfg = match parsed {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return (e.exit_code(), None);
        }
    };
    cfg = cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    if let Some(h) = h {
        cfg = cfg.with_h(h);
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("{e}");
        return (e.exit_code(), None);
    }
    let o = run(&cfg);
    if let Err(e) = write_output(out, &o) {
        eprintln!("{e}");
        return (EXIT_FAILURE, Some(o.report));
    }
    (o.exit_code, Some(o.report))
}
