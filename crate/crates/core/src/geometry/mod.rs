//! Model geometries, discretized regions and per-vertex fields.

mod build;
mod domain;
mod io;
mod superlevel;

pub use build::{
    ball_ring_mesh, build_domain, build_radial_domain, host_ring_mesh, radial_host, ring_mesh, RingMesh,
};
pub use domain::{BoundaryCurvature, DiscreteDomain, VertexOrigin};
pub use io::{MeshFile, ScalarFieldFile};
pub use superlevel::superlevel_domain;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("invalid radius {0}")]
    InvalidRadius(f64),
    #[error("level set is empty")]
    EmptyLevelSet,
    #[error("level set has {0} connected components")]
    DisconnectedLevelSet(usize),
    #[error("field has {got} values, domain has {expected} vertices")]
    FieldLength { expected: usize, got: usize },
    #[error("malformed mesh: {0}")]
    MalformedMesh(String),
}

/// Analytic background geometry. Spheres have unit radius, hyperbolic
/// spaces sectional curvature -1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Space {
    Euclidean { n: usize },
    Sphere { n: usize },
    Hyperbolic { n: usize },
    /// S^k x E^2
    ProductSphereCylinder { k: usize },
}

impl Space {
    pub fn dim(&self) -> usize {
        match *self {
            Space::Euclidean { n } | Space::Sphere { n } | Space::Hyperbolic { n } => n,
            Space::ProductSphereCylinder { k } => k + 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Space::Euclidean { .. } => "euclidean",
            Space::Sphere { .. } => "sphere",
            Space::Hyperbolic { .. } => "hyperbolic",
            Space::ProductSphereCylinder { .. } => "productSphereCylinder",
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = match *self {
            Space::ProductSphereCylinder { k } => k >= 1,
            _ => self.dim() >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(GeometryError::UnsupportedCombination(format!("{self:?}")))
        }
    }

    pub fn scalar_curvature(&self) -> f64 {
        let n = self.dim() as f64;
        match *self {
            Space::Euclidean { .. } => 0.0,
            Space::Sphere { .. } => n * (n - 1.0),
            Space::Hyperbolic { .. } => -n * (n - 1.0),
            Space::ProductSphereCylinder { k } => (k * k.saturating_sub(1)) as f64,
        }
    }

    pub fn is_space_form(&self) -> bool {
        !matches!(self, Space::ProductSphereCylinder { .. })
    }

    /// Radius function of geodesic polar coordinates.
    pub fn sn(&self, t: f64) -> f64 {
        match self {
            Space::Euclidean { .. } => t,
            Space::Sphere { .. } => t.sin(),
            Space::Hyperbolic { .. } => t.sinh(),
            Space::ProductSphereCylinder { .. } => t,
        }
    }

    pub fn cn(&self, t: f64) -> f64 {
        match self {
            Space::Euclidean { .. } => 1.0,
            Space::Sphere { .. } => t.cos(),
            Space::Hyperbolic { .. } => t.cosh(),
            Space::ProductSphereCylinder { .. } => 1.0,
        }
    }

    /// Largest admissible geodesic ball radius around a point.
    pub fn max_radius(&self) -> f64 {
        match self {
            Space::Sphere { .. } => PI,
            _ => f64::INFINITY,
        }
    }

    /// Mean curvature of the geodesic sphere of radius r (sum of principal curvatures).
    pub fn sphere_mean_curvature(&self, r: f64) -> f64 {
        (self.dim() as f64 - 1.0) * self.cn(r) / self.sn(r)
    }

    /// Volume of a geodesic ball, in closed form for n = 2 and by
    /// Gauss-Legendre quadrature otherwise.
    pub fn ball_volume(&self, r: f64) -> f64 {
        let n = self.dim();
        if n == 2 {
            return match self {
                Space::Euclidean { .. } => PI * r * r,
                Space::Sphere { .. } => 2.0 * PI * (1.0 - r.cos()),
                Space::Hyperbolic { .. } => 2.0 * PI * (r.cosh() - 1.0),
                Space::ProductSphereCylinder { .. } => PI * r * r,
            };
        }
        let w = |t: f64| unit_sphere_area(n - 1) * self.sn(t).powi(n as i32 - 1);
        integrate(w, 0.0, r, 256)
    }

    /// Conformal density sigma with g = sigma * (chart Euclidean metric).
    /// Spheres are charted by their embedding and use sigma = 1.
    pub fn chart_density(&self, x: &[f64]) -> f64 {
        match self {
            Space::Hyperbolic { .. } => {
                let q = 1.0 - dot(x, x);
                4.0 / (q * q)
            }
            _ => 1.0,
        }
    }

    /// Geodesic distance between chart points.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Space::Euclidean { .. } => dist(x, y),
            Space::Sphere { .. } => 2.0 * (0.5 * dist(x, y)).min(1.0).asin(),
            Space::Hyperbolic { .. } => {
                let d2 = dist(x, y).powi(2);
                let a = (1.0 - dot(x, x)) * (1.0 - dot(y, y));
                // acosh(1 + z) = log1p(z + sqrt(z (z + 2)))
                let z = 2.0 * d2 / a;
                (z + (z * (z + 2.0)).sqrt()).ln_1p()
            }
            Space::ProductSphereCylinder { k } => {
                let s = Space::Sphere { n: *k }.distance(&x[..k + 1], &y[..k + 1]);
                let f = dist(&x[k + 1..], &y[k + 1..]);
                s.hypot(f)
            }
        }
    }

    /// Dimension of chart coordinates used by two-dimensional meshes.
    pub fn chart_dim(&self) -> usize {
        match self {
            Space::Sphere { .. } => 3,
            _ => 2,
        }
    }

    /// Default center of geodesic balls: origin, or the north pole (0,0,1).
    pub fn default_center(&self) -> Vec<f64> {
        match self {
            Space::Sphere { .. } => vec![0.0, 0.0, 1.0],
            _ => vec![0.0, 0.0],
        }
    }
}

/// Area of the unit sphere S^m in R^{m+1}.
pub fn unit_sphere_area(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (m as f64 - 1.0) * unit_sphere_area(m - 2),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "camelCase")]
pub enum Region {
    GeodesicBall {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    ComplementOfBall {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    /// The whole of a closed background (only the sphere).
    Closed,
}

impl Region {
    pub fn ball(radius: f64) -> Self {
        Region::GeodesicBall { radius, center: None }
    }

    pub fn complement(radius: f64) -> Self {
        Region::ComplementOfBall { radius, center: None }
    }

    pub fn validate(&self, space: &Space) -> Result<(), GeometryError> {
        match self {
            Region::GeodesicBall { radius, .. } => {
                if !(*radius > 0.0 && *radius < space.max_radius()) {
                    return Err(GeometryError::InvalidRegion(format!(
                        "ball radius {radius} outside (0, {})",
                        space.max_radius()
                    )));
                }
            }
            Region::ComplementOfBall { radius, .. } => {
                if !matches!(space, Space::Sphere { .. }) {
                    return Err(GeometryError::InvalidRegion(
                        "complement of a ball is only bounded on the sphere".into(),
                    ));
                }
                if !(*radius > 0.0 && *radius < PI) {
                    return Err(GeometryError::InvalidRegion(format!(
                        "complement radius {radius} outside (0, pi)"
                    )));
                }
            }
            Region::Closed => {
                if !matches!(space, Space::Sphere { .. }) {
                    return Err(GeometryError::InvalidRegion("only the sphere is closed".into()));
                }
            }
        }
        Ok(())
    }
}

/// Values sampled at the vertices of a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        ScalarField { values: vec![c; n] }
    }

    pub fn from_fn(domain: &DiscreteDomain, f: impl Fn(&[f64]) -> f64) -> Self {
        ScalarField { values: domain.vertices.iter().map(|x| f(x)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, domain: &DiscreteDomain) -> Result<(), GeometryError> {
        if self.values.len() != domain.num_vertices() {
            return Err(GeometryError::FieldLength {
                expected: domain.num_vertices(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// L2 norm with background volume weights.
    pub fn l2(&self, domain: &DiscreteDomain) -> f64 {
        self.values
            .iter()
            .zip(&domain.mass)
            .map(|(v, m)| v * v * m)
            .sum::<f64>()
            .sqrt()
    }

    /// Dirichlet energy int |grad u|^2 with the background metric.
    pub fn dirichlet_energy(&self, domain: &DiscreteDomain) -> f64 {
        crate::par::dot(&self.values, &domain.stiffness.mul(&self.values))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Composite 4-point Gauss-Legendre quadrature.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    const X: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const W: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    let h = (b - a) / pieces as f64;
    let mut s = 0.0;
    for p in 0..pieces {
        let c = a + (p as f64 + 0.5) * h;
        for q in 0..4 {
            s += W[q] * f(c + 0.5 * h * X[q]);
        }
    }
    0.5 * h * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn curvature_constants() {
        assert_eq!(Space::Euclidean { n: 3 }.scalar_curvature(), 0.0);
        assert_eq!(Space::Sphere { n: 2 }.scalar_curvature(), 2.0);
        assert_eq!(Space::Sphere { n: 3 }.scalar_curvature(), 6.0);
        assert_eq!(Space::Hyperbolic { n: 2 }.scalar_curvature(), -2.0);
        assert_eq!(Space::ProductSphereCylinder { k: 2 }.scalar_curvature(), 2.0);
        assert_eq!(Space::ProductSphereCylinder { k: 2 }.dim(), 4);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(unit_sphere_area(2), 4.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(unit_sphere_area(3), 2.0 * PI * PI, epsilon = 1e-13);
    }

    #[test]
    fn ball_volume_quadrature_matches_closed_forms() {
        let e3 = Space::Euclidean { n: 3 };
        assert_relative_eq!(e3.ball_volume(1.0), 4.0 * PI / 3.0, max_relative = 1e-12);
        let s3 = Space::Sphere { n: 3 };
        // 4 pi int_0^r sin^2 = pi (2r - sin 2r)
        let r = 1.2_f64;
        assert_relative_eq!(s3.ball_volume(r), PI * (2.0 * r - (2.0 * r).sin()), max_relative = 1e-12);
    }

    #[test]
    fn hyperbolic_distance_from_origin() {
        let h = Space::Hyperbolic { n: 2 };
        let r = 0.8_f64;
        let a = (r / 2.0).tanh();
        assert_relative_eq!(h.distance(&[0.0, 0.0], &[a, 0.0]), r, epsilon = 1e-13);
    }

    #[test]
    fn sphere_distance_is_angle() {
        let s = Space::Sphere { n: 2 };
        let t = 2.5_f64;
        assert_relative_eq!(
            s.distance(&[0.0, 0.0, 1.0], &[t.sin(), 0.0, t.cos()]),
            t,
            epsilon = 1e-13
        );
    }
}
