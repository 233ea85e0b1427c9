//! Mesh generation: concentric-ring meshes in geodesic polar coordinates,
//! subdivided icosahedra for the closed sphere, and radial grids.

use super::domain::{BoundaryCurvature, DiscreteDomain, VertexOrigin};
use super::{cross, dot, GeometryError, Region, Space};
use std::collections::HashMap;
use std::f64::consts::PI;

/// A ring mesh together with its ring layout. Vertices are numbered from the
/// center outward, so every prefix of rings is itself a mesh of a smaller ball.
#[derive(Clone, Debug)]
pub struct RingMesh {
    pub domain: DiscreteDomain,
    /// First vertex index of ring j (ring 0 is the center); one extra entry at the end.
    pub ring_start: Vec<usize>,
    pub ring_radius: Vec<f64>,
    center: Vec<f64>,
}

impl RingMesh {
    /// The sub-mesh made of rings `0..=ring`. Vertex indices are preserved.
    pub fn prefix(&self, ring: usize) -> Result<DiscreteDomain, GeometryError> {
        let nv = self.ring_start[ring + 1];
        let cells: Vec<Vec<usize>> = self
            .domain
            .cells
            .iter()
            .filter(|c| c.iter().all(|&i| i < nv))
            .cloned()
            .collect();
        let r = self.ring_radius[ring];
        let s = &self.domain.space;
        DiscreteDomain::new(
            *s,
            2,
            self.domain.vertices[..nv].to_vec(),
            cells,
            BoundaryCurvature::Analytic(s.cn(r) / s.sn(r)),
            (0..nv).map(VertexOrigin::Base).collect(),
        )
    }

    /// Index of the ring at radius `r`, if one exists.
    pub fn ring_at(&self, r: f64) -> Option<usize> {
        self.ring_radius.iter().position(|&q| (q - r).abs() < 1e-12)
    }

    /// Geodesic distance of a chart point to the mesh center.
    pub fn radius_of_point(&self, x: &[f64]) -> f64 {
        self.domain.space.distance(&self.center, x)
    }
}

/// Mesh a geodesic disk of a two-dimensional space with concentric rings at
/// the given radii (strictly increasing, all positive) and target spacing
/// along each ring.
pub fn ring_mesh(
    space: Space,
    center: &[f64],
    radii: &[f64],
    spacing: f64,
) -> Result<RingMesh, GeometryError> {
    let mut vertices: Vec<Vec<f64>> = vec![center.to_vec()];
    let mut ring_start = vec![0, 1];
    let mut ring_radius = vec![0.0];
    let mut cells = Vec::new();
    let mut prev: Vec<(usize, f64)> = vec![(0, 0.0)];
    let frame = polar_frame(center);
    for (j, &rho) in radii.iter().enumerate() {
        let count = ((2.0 * PI * space.sn(rho) / spacing).round() as usize).max(6);
        let off = if j % 2 == 0 { 0.0 } else { 0.5 };
        let start = vertices.len();
        let ring: Vec<(usize, f64)> = (0..count)
            .map(|k| {
                let theta = 2.0 * PI * (k as f64 + off) / count as f64;
                vertices.push(frame.point(&space, rho, theta));
                (start + k, theta)
            })
            .collect();
        if prev.len() == 1 {
            for k in 0..count {
                cells.push(vec![0, ring[k].0, ring[(k + 1) % count].0]);
            }
        } else {
            stitch(&prev, &ring, &mut cells);
        }
        ring_start.push(vertices.len());
        ring_radius.push(rho);
        prev = ring;
    }
    let r = *radii.last().ok_or(GeometryError::InvalidRegion("no rings".into()))?;
    let nv = vertices.len();
    let domain = DiscreteDomain::new(
        space,
        2,
        vertices,
        cells,
        BoundaryCurvature::Analytic(space.cn(r) / space.sn(r)),
        vec![VertexOrigin::New; nv],
    )?;
    Ok(RingMesh { domain, ring_start, ring_radius, center: center.to_vec() })
}

/// Join two concentric rings of (index, angle) pairs by a greedy angular sweep.
fn stitch(a: &[(usize, f64)], b: &[(usize, f64)], cells: &mut Vec<Vec<usize>>) {
    let (na, nb) = (a.len(), b.len());
    let ang = |r: &[(usize, f64)], i: usize| r[i % r.len()].1 + if i >= r.len() { 2.0 * PI } else { 0.0 };
    let (mut i, mut j) = (0, 0);
    while i < na || j < nb {
        let adv_a = j == nb || (i < na && ang(a, i + 1) < ang(b, j + 1));
        if adv_a {
            cells.push(vec![a[i % na].0, a[(i + 1) % na].0, b[j % nb].0]);
            i += 1;
        } else {
            cells.push(vec![a[i % na].0, b[(j + 1) % nb].0, b[j % nb].0]);
            j += 1;
        }
    }
}

struct PolarFrame {
    center: Vec<f64>,
    e1: [f64; 3],
    e2: [f64; 3],
}

fn polar_frame(center: &[f64]) -> PolarFrame {
    if center.len() == 3 {
        let axis = if center[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let d = dot(&axis, center);
        let mut e1 = [axis[0] - d * center[0], axis[1] - d * center[1], axis[2] - d * center[2]];
        let l = dot(&e1, &e1).sqrt();
        e1.iter_mut().for_each(|v| *v /= l);
        let e2 = cross(center, &e1);
        PolarFrame { center: center.to_vec(), e1, e2 }
    } else {
        PolarFrame { center: center.to_vec(), e1: [1.0, 0.0, 0.0], e2: [0.0, 1.0, 0.0] }
    }
}

impl PolarFrame {
    fn point(&self, space: &Space, rho: f64, theta: f64) -> Vec<f64> {
        let (s, c) = theta.sin_cos();
        match space {
            Space::Sphere { .. } => {
                let (sr, cr) = rho.sin_cos();
                (0..3)
                    .map(|k| sr * (c * self.e1[k] + s * self.e2[k]) + cr * self.center[k])
                    .collect()
            }
            Space::Hyperbolic { .. } => {
                // Poincare disk: radius tanh(rho/2), then the Moebius map 0 -> center
                let a = (0.5 * rho).tanh();
                let (zx, zy) = (a * c, a * s);
                let (cx, cy) = (self.center[0], self.center[1]);
                let (nx, ny) = (zx + cx, zy + cy);
                let (dx, dy) = (1.0 + cx * zx + cy * zy, cx * zy - cy * zx);
                let den = dx * dx + dy * dy;
                vec![(nx * dx + ny * dy) / den, (ny * dx - nx * dy) / den]
            }
            _ => vec![self.center[0] + rho * c, self.center[1] + rho * s],
        }
    }
}

fn uniform_radii(r: f64, spacing: f64) -> Vec<f64> {
    let m = (r / spacing).ceil().max(2.0) as usize;
    (1..=m).map(|j| r * j as f64 / m as f64).collect()
}

/// Ring mesh of a geodesic ball with meshSize at most `h`.
pub fn ball_ring_mesh(space: Space, center: &[f64], r: f64, h: f64) -> Result<RingMesh, GeometryError> {
    let mut spacing = h / 1.5;
    for _ in 0..40 {
        let m = ring_mesh(space, center, &uniform_radii(r, spacing), spacing)?;
        if m.domain.h <= h {
            return Ok(m);
        }
        spacing *= 0.9;
    }
    Err(GeometryError::InvalidRegion(format!("could not reach mesh size {h}")))
}

/// A ring mesh of radius `r + margin` that has a ring exactly at `r`.
pub fn host_ring_mesh(
    space: Space,
    r: f64,
    margin: f64,
    h: f64,
) -> Result<(RingMesh, usize), GeometryError> {
    let center = space.default_center();
    let mut spacing = h / 1.5;
    for _ in 0..40 {
        let mut radii = uniform_radii(r, spacing);
        let step = r / radii.len() as f64;
        let extra = (margin / step).ceil() as usize;
        let inner = radii.len();
        radii.extend((1..=extra).map(|k| r + k as f64 * step));
        let m = ring_mesh(space, &center, &radii, spacing)?;
        if m.domain.h <= h {
            return Ok((m, inner));
        }
        spacing *= 0.9;
    }
    Err(GeometryError::InvalidRegion(format!("could not reach mesh size {h}")))
}

fn antipode(c: &[f64]) -> Vec<f64> {
    c.iter().map(|x| -x).collect()
}

fn check_center(space: &Space, center: &[f64]) -> Result<(), GeometryError> {
    let ok = match space {
        Space::Sphere { .. } => center.len() == 3 && (dot(center, center) - 1.0).abs() < 1e-12,
        Space::Hyperbolic { .. } => center.len() == 2 && dot(center, center) < 1.0,
        _ => center.len() == 2,
    };
    if ok {
        Ok(())
    } else {
        Err(GeometryError::InvalidRegion(format!("center {center:?} is not a point of the chart")))
    }
}

/// Triangulate a two-dimensional region with mesh size at most `h`.
pub fn build_domain(space: Space, region: &Region, h: f64) -> Result<DiscreteDomain, GeometryError> {
    space.validate()?;
    if !(h > 0.0) {
        return Err(GeometryError::InvalidRegion(format!("mesh size {h}")));
    }
    region.validate(&space)?;
    if space.dim() != 2 || !space.is_space_form() {
        return Err(GeometryError::UnsupportedCombination(format!(
            "two-dimensional meshing of {space:?}; use a radial grid"
        )));
    }
    match region {
        Region::GeodesicBall { radius, center } => {
            let c = center.clone().unwrap_or_else(|| space.default_center());
            check_center(&space, &c)?;
            Ok(ball_ring_mesh(space, &c, *radius, h)?.domain)
        }
        Region::ComplementOfBall { radius, center } => {
            let c = center.clone().unwrap_or_else(|| space.default_center());
            check_center(&space, &c)?;
            Ok(ball_ring_mesh(space, &antipode(&c), PI - radius, h)?.domain)
        }
        Region::Closed => icosphere(space, h),
    }
}

/// Subdivided icosahedron projected to the unit sphere.
fn icosphere(space: Space, h: f64) -> Result<DiscreteDomain, GeometryError> {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec<f64>> = [
        [-1.0, p, 0.0], [1.0, p, 0.0], [-1.0, -p, 0.0], [1.0, -p, 0.0],
        [0.0, -1.0, p], [0.0, 1.0, p], [0.0, -1.0, -p], [0.0, 1.0, -p],
        [p, 0.0, -1.0], [p, 0.0, 1.0], [-p, 0.0, -1.0], [-p, 0.0, 1.0],
    ]
    .iter()
    .map(|x| normalize(x))
    .collect();
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    loop {
        let longest = f
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
            .map(|(a, b)| space.distance(&v[a], &v[b]))
            .fold(0.0, f64::max);
        if longest <= h {
            break;
        }
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(4 * f.len());
        for t in &f {
            let mut m = [0; 3];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                m[k] = *mid.entry(key).or_insert_with(|| {
                    let x: Vec<f64> = (0..3).map(|d| v[a][d] + v[b][d]).collect();
                    v.push(normalize(&x));
                    v.len() - 1
                });
            }
            next.push([t[0], m[0], m[2]]);
            next.push([t[1], m[1], m[0]]);
            next.push([t[2], m[2], m[1]]);
            next.push(m);
        }
        f = next;
    }
    let nv = v.len();
    DiscreteDomain::new(
        space,
        2,
        v,
        f.into_iter().map(|t| t.to_vec()).collect(),
        BoundaryCurvature::Analytic(0.0),
        vec![VertexOrigin::New; nv],
    )
}

fn normalize(x: &[f64]) -> Vec<f64> {
    let l = dot(x, x).sqrt();
    x.iter().map(|a| a / l).collect()
}

/// Radial grid on `[0, r]` of a geodesic ball in a space form, weighted by
/// the volume density `|S^{n-1}| sn(t)^{n-1}`.
pub fn build_radial_domain(space: Space, r: f64, grid_points: usize) -> Result<DiscreteDomain, GeometryError> {
    space.validate()?;
    if !space.is_space_form() {
        return Err(GeometryError::UnsupportedCombination("radial grids need a space form".into()));
    }
    if !(r > 0.0 && r < space.max_radius()) {
        return Err(GeometryError::InvalidRadius(r));
    }
    if grid_points < 16 {
        return Err(GeometryError::InvalidRegion(format!("{grid_points} grid points (need 16)")));
    }
    let ts: Vec<f64> = (0..grid_points).map(|k| r * k as f64 / (grid_points - 1) as f64).collect();
    radial_from_points(space, ts, vec![])
}

/// Radial grid of a ball of radius `r + margin` with the same spacing as
/// `build_radial_domain(space, r, grid_points)`, together with the ball of
/// radius r as its prefix.
pub fn radial_host(
    space: Space,
    r: f64,
    margin: f64,
    grid_points: usize,
) -> Result<(DiscreteDomain, DiscreteDomain), GeometryError> {
    let omega = build_radial_domain(space, r, grid_points)?;
    let step = r / (grid_points - 1) as f64;
    let extra = (margin / step).ceil() as usize;
    if !(r + extra as f64 * step < space.max_radius()) {
        return Err(GeometryError::InvalidRadius(r + margin));
    }
    let ts: Vec<f64> = (0..grid_points + extra).map(|k| r * k as f64 / (grid_points - 1) as f64).collect();
    let host = radial_from_points(space, ts, vec![])?;
    Ok((host, omega))
}

pub(crate) fn radial_from_points(
    space: Space,
    ts: Vec<f64>,
    origin: Vec<VertexOrigin>,
) -> Result<DiscreteDomain, GeometryError> {
    let n = ts.len();
    let r = ts[n - 1];
    let hbar = space.sphere_mean_curvature(r);
    DiscreteDomain::new(
        space,
        1,
        ts.into_iter().map(|t| vec![t]).collect(),
        (0..n - 1).map(|k| vec![k, k + 1]).collect(),
        BoundaryCurvature::Analytic(hbar),
        origin,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::unit_sphere_area;
    use approx::assert_relative_eq;

    #[test]
    fn flat_disk_contained_and_sized() {
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.1).unwrap();
        assert!(d.h <= 0.1);
        assert!(d.vertices.iter().all(|x| x[0].hypot(x[1]) <= 1.0 + 1e-9));
        for &b in &d.boundary {
            let x = &d.vertices[b];
            assert!((x[0].hypot(x[1]) - 1.0).abs() < d.h * d.h);
        }
        assert!(!d.has_duplicate_vertices(1e-12));
        assert!(d.cell_volume.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn hemisphere_complement_boundary_is_equator() {
        let d = build_domain(Space::Sphere { n: 2 }, &Region::complement(PI / 2.0), 0.05).unwrap();
        for &b in &d.boundary {
            assert!(d.vertices[b][2].abs() < 0.05 * 0.05);
        }
        // the complement of the northern cap lies in the southern hemisphere
        assert!(d.vertices.iter().all(|x| x[2] <= 1e-12));
    }

    #[test]
    fn cap_area_matches_closed_form() {
        let d = build_domain(Space::Sphere { n: 2 }, &Region::ball(2.0), 0.05).unwrap();
        let exact = 2.0 * PI * (1.0 - 2f64.cos());
        assert!((d.volume() - exact).abs() < 0.01 * exact);
    }

    #[test]
    fn off_center_balls() {
        let s = Space::Sphere { n: 2 };
        let c = normalize(&[1.0, 1.0, 0.0]);
        let d = build_domain(s, &Region::GeodesicBall { radius: 0.7, center: Some(c.clone()) }, 0.1).unwrap();
        for &b in &d.boundary {
            assert_relative_eq!(s.distance(&c, &d.vertices[b]), 0.7, epsilon = 1e-12);
        }
        let hy = Space::Hyperbolic { n: 2 };
        let c = vec![0.3, -0.2];
        let d = build_domain(hy, &Region::GeodesicBall { radius: 0.5, center: Some(c.clone()) }, 0.1).unwrap();
        for &b in &d.boundary {
            assert_relative_eq!(hy.distance(&c, &d.vertices[b]), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn icosphere_tiles_the_sphere() {
        let d = build_domain(Space::Sphere { n: 2 }, &Region::Closed, 0.3).unwrap();
        assert!(d.boundary.is_empty());
        assert_relative_eq!(d.volume(), 4.0 * PI, epsilon = 1e-10);
    }

    #[test]
    fn radial_weights() {
        for (space, w) in [
            (Space::Euclidean { n: 3 }, Box::new(|t: f64| 4.0 * PI * t * t) as Box<dyn Fn(f64) -> f64>),
            (Space::Sphere { n: 2 }, Box::new(|t: f64| 2.0 * PI * t.sin())),
            (Space::Hyperbolic { n: 3 }, Box::new(|t: f64| 4.0 * PI * t.sinh().powi(2))),
        ] {
            let r = if matches!(space, Space::Sphere { .. }) { PI / 2.0 } else { 1.0 };
            let d = build_radial_domain(space, r, 512).unwrap();
            assert_relative_eq!(d.boundary_weight[0], w(r), max_relative = 1e-12);
            assert_relative_eq!(d.volume(), space.ball_volume(r), max_relative = 1e-10);
        }
        assert_relative_eq!(unit_sphere_area(1), 2.0 * PI);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            build_radial_domain(Space::Sphere { n: 2 }, 3.5, 64),
            Err(GeometryError::InvalidRadius(_))
        ));
        assert!(build_domain(Space::Euclidean { n: 2 }, &Region::complement(1.0), 0.1).is_err());
        assert!(matches!(
            build_domain(Space::Euclidean { n: 3 }, &Region::ball(1.0), 0.1),
            Err(GeometryError::UnsupportedCombination(_))
        ));
    }

    #[test]
    fn prefix_rings_form_sub_ball() {
        let (m, inner) = host_ring_mesh(Space::Sphere { n: 2 }, 2.0, 0.3, 0.1).unwrap();
        let omega = m.prefix(inner).unwrap();
        assert_relative_eq!(m.ring_radius[inner], 2.0, epsilon = 1e-12);
        for &b in &omega.boundary {
            assert_relative_eq!(m.radius_of_point(&omega.vertices[b]), 2.0, epsilon = 1e-12);
        }
        assert!(m.domain.num_vertices() > omega.num_vertices());
    }
}
