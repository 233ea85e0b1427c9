use super::{cross, dist, dot, integrate, sub, unit_sphere_area, GeometryError, Space};
use crate::sparse::{lu_solve, Csr};
use std::collections::HashMap;

/// Provenance of a vertex of a derived domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VertexOrigin {
    /// Freshly generated by a mesher.
    New,
    /// Copy of vertex `i` of the parent domain.
    Base(usize),
    /// Point `(1 - s) x_i + s x_j` on an edge of the parent domain.
    Edge(usize, usize, f64),
}

/// How the background mean curvature of the boundary is obtained.
#[derive(Clone, Copy, Debug)]
pub enum BoundaryCurvature {
    Analytic(f64),
    Discrete,
}

/// A discretized region of a background space.
///
/// Two-dimensional domains carry chart coordinates (planar for flat and
/// Poincare-disk charts, unit vectors in R^3 for the sphere). One-dimensional
/// domains are radial grids `[0, r]` of a geodesic ball, with the geometric
/// dimension entering through the volume density.
#[derive(Clone, Debug)]
pub struct DiscreteDomain {
    pub space: Space,
    pub dimension: usize,
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
    pub boundary: Vec<usize>,
    pub h: f64,
    pub is_boundary: Vec<bool>,
    pub interior: Vec<usize>,
    /// Lumped background volume per vertex.
    pub mass: Vec<f64>,
    pub cell_volume: Vec<f64>,
    /// Background Dirichlet form: `u^T K u = int |grad u|^2`.
    pub stiffness: Csr,
    /// Background boundary measure per boundary vertex (aligned with `boundary`).
    pub boundary_weight: Vec<f64>,
    /// Background mean curvature per boundary vertex.
    pub boundary_mean_curvature: Vec<f64>,
    /// Outward normal derivative as a linear stencil per boundary vertex.
    pub normal_stencil: Vec<Vec<(usize, f64)>>,
    pub neighbors: Vec<Vec<usize>>,
    pub origin: Vec<VertexOrigin>,
}

impl DiscreteDomain {
    /// Assemble all derived data from vertices and cells. Boundary vertices
    /// are inferred from the cell complex.
    pub fn new(
        space: Space,
        dimension: usize,
        vertices: Vec<Vec<f64>>,
        cells: Vec<Vec<usize>>,
        curvature: BoundaryCurvature,
        origin: Vec<VertexOrigin>,
    ) -> Result<Self, GeometryError> {
        let nv = vertices.len();
        if nv == 0 || cells.is_empty() {
            return Err(GeometryError::InvalidRegion("empty mesh".into()));
        }
        if cells.iter().flatten().any(|&i| i >= nv) {
            return Err(GeometryError::MalformedMesh("cell index out of range".into()));
        }
        let origin = if origin.len() == nv { origin } else { vec![VertexOrigin::New; nv] };
        let mut d = DiscreteDomain {
            space,
            dimension,
            vertices,
            cells,
            boundary: Vec::new(),
            h: 0.0,
            is_boundary: vec![false; nv],
            interior: Vec::new(),
            mass: vec![0.0; nv],
            cell_volume: Vec::new(),
            stiffness: Csr::identity(0),
            boundary_weight: Vec::new(),
            boundary_mean_curvature: Vec::new(),
            normal_stencil: Vec::new(),
            neighbors: vec![Vec::new(); nv],
            origin,
        };
        match dimension {
            1 => d.assemble_radial(curvature)?,
            2 => d.assemble_surface(curvature)?,
            _ => return Err(GeometryError::UnsupportedCombination(format!("dimension {dimension}"))),
        }
        d.interior = (0..nv).filter(|&i| !d.is_boundary[i]).collect();
        d.check_connected()?;
        Ok(d)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n(&self) -> usize {
        self.space.dim()
    }

    pub fn volume(&self) -> f64 {
        self.cell_volume.iter().sum()
    }

    pub fn boundary_measure(&self) -> f64 {
        self.boundary_weight.iter().sum()
    }

    /// Radial coordinate of a vertex of a one-dimensional domain.
    pub fn radius_of(&self, i: usize) -> f64 {
        self.vertices[i][0]
    }

    /// Discrete Laplace-Beltrami `-(K u)_i / m_i` at interior vertices, NaN on the boundary.
    /// Evaluated through differences `u_j - u_i` (rows of K sum to zero), so
    /// constants map to exactly zero.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        crate::par::fill_indexed(&mut out, |i| {
            if self.is_boundary[i] {
                f64::NAN
            } else {
                let mut s = 0.0;
                for (j, k) in self.stiffness.row(i) {
                    if j != i {
                        s -= k * (u[j] - u[i]);
                    }
                }
                s / self.mass[i]
            }
        });
        out
    }

    /// Outward normal derivative at boundary vertices (aligned with `boundary`).
    /// Differences against the boundary value keep constants exactly at 0.
    pub fn normal_derivative(&self, u: &[f64]) -> Vec<f64> {
        self.normal_stencil
            .iter()
            .zip(&self.boundary)
            .map(|(row, &b)| row.iter().map(|&(j, c)| c * (u[j] - u[b])).sum())
            .collect()
    }

    /// Boundary-measure integral of per-boundary-vertex samples.
    pub fn boundary_integral(&self, samples: &[f64]) -> f64 {
        samples.iter().zip(&self.boundary_weight).map(|(a, w)| a * w).sum()
    }

    pub fn integral(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.mass).map(|(a, m)| a * m).sum()
    }

    /// |grad u|^2 in the background metric, per vertex.
    pub fn grad_sq(&self, u: &[f64]) -> Vec<f64> {
        let nv = self.num_vertices();
        if self.dimension == 1 {
            return (0..nv)
                .map(|i| {
                    if i == 0 && self.radius_of(0) == 0.0 {
                        return 0.0;
                    }
                    let d = self.radial_derivative(u, i);
                    d * d
                })
                .collect();
        }
        let mut acc = vec![0.0; nv];
        let mut wsum = vec![0.0; nv];
        for c in &self.cells {
            let (g, area) = self.triangle_gradient(c, u);
            let g2 = dot(&g, &g);
            for &i in c {
                acc[i] += area * g2;
                wsum[i] += area;
            }
        }
        (0..nv)
            .map(|i| acc[i] / wsum[i] / self.space.chart_density(&self.vertices[i]))
            .collect()
    }

    /// Flat chart gradient of the P1 interpolant on a triangle, with its chart area.
    pub fn triangle_gradient(&self, c: &[usize], u: &[f64]) -> (Vec<f64>, f64) {
        let p: Vec<&[f64]> = c.iter().map(|&i| self.vertices[i].as_slice()).collect();
        let e1 = sub(p[1], p[0]);
        let e2 = sub(p[2], p[0]);
        if p[0].len() == 2 {
            let det = e1[0] * e2[1] - e1[1] * e2[0];
            let du1 = u[c[1]] - u[c[0]];
            let du2 = u[c[2]] - u[c[0]];
            let gx = (du1 * e2[1] - du2 * e1[1]) / det;
            let gy = (du2 * e1[0] - du1 * e2[0]) / det;
            (vec![gx, gy], 0.5 * det.abs())
        } else {
            let nrm = cross(&e1, &e2);
            let a2 = dot(&nrm, &nrm).sqrt();
            let nu = [nrm[0] / a2, nrm[1] / a2, nrm[2] / a2];
            let mut g = vec![0.0; 3];
            for k in 0..3 {
                let e = sub(p[(k + 2) % 3], p[(k + 1) % 3]);
                let r = cross(&nu, &e);
                for (gd, rd) in g.iter_mut().zip(r) {
                    *gd += u[c[k]] * rd / a2;
                }
            }
            (g, 0.5 * a2)
        }
    }

    fn radial_derivative(&self, u: &[f64], i: usize) -> f64 {
        let nv = self.num_vertices();
        let t = |k: usize| self.radius_of(k);
        if i == 0 {
            (u[1] - u[0]) / (t(1) - t(0))
        } else if i == nv - 1 {
            lagrange_end_derivative([t(i - 2), t(i - 1), t(i)], [u[i - 2], u[i - 1], u[i]])
        } else {
            let (a, b, c) = (t(i - 1), t(i), t(i + 1));
            let (h1, h2) = (b - a, c - b);
            (u[i + 1] * h1 * h1 - u[i - 1] * h2 * h2 + u[i] * (h2 * h2 - h1 * h1))
                / (h1 * h2 * (h1 + h2))
        }
    }

    fn radial_density(&self, t: f64) -> f64 {
        let n = self.space.dim();
        unit_sphere_area(n - 1) * self.space.sn(t).powi(n as i32 - 1)
    }

    fn assemble_radial(&mut self, curvature: BoundaryCurvature) -> Result<(), GeometryError> {
        if !self.space.is_space_form() {
            return Err(GeometryError::UnsupportedCombination(
                "radial grids need a space form".into(),
            ));
        }
        let nv = self.vertices.len();
        for w in self.vertices.windows(2) {
            if w[1][0] <= w[0][0] {
                return Err(GeometryError::MalformedMesh("radial grid must increase".into()));
            }
        }
        if self.vertices[0][0] != 0.0 {
            return Err(GeometryError::MalformedMesh("radial grid must start at 0".into()));
        }
        let mut trip = Vec::new();
        let mut h: f64 = 0.0;
        self.cell_volume.clear();
        for c in &self.cells {
            let (a, b) = (c[0], c[1]);
            let (ta, tb) = (self.vertices[a][0], self.vertices[b][0]);
            let mid = 0.5 * (ta + tb);
            let k = self.radial_density(mid) / (tb - ta);
            trip.extend([(a, a, k), (b, b, k), (a, b, -k), (b, a, -k)]);
            let w = |t: f64| self.radial_density(t);
            let ma = integrate(w, ta, mid, 2);
            let mb = integrate(w, mid, tb, 2);
            self.mass[a] += ma;
            self.mass[b] += mb;
            self.cell_volume.push(ma + mb);
            self.neighbors[a].push(b);
            self.neighbors[b].push(a);
            h = h.max(tb - ta);
        }
        self.h = h;
        self.stiffness = Csr::from_triplets(nv, &trip);
        let last = nv - 1;
        let r = self.vertices[last][0];
        self.is_boundary[last] = true;
        self.boundary = vec![last];
        self.boundary_weight = vec![self.radial_density(r)];
        self.boundary_mean_curvature = vec![match curvature {
            BoundaryCurvature::Analytic(v) => v,
            BoundaryCurvature::Discrete => self.space.sphere_mean_curvature(r),
        }];
        if nv < 3 {
            return Err(GeometryError::MalformedMesh("radial grid needs 3 points".into()));
        }
        let t = [self.vertices[last - 2][0], self.vertices[last - 1][0], r];
        let coef = lagrange_end_weights(t);
        self.normal_stencil = vec![vec![(last - 2, coef[0]), (last - 1, coef[1]), (last, coef[2])]];
        Ok(())
    }

    fn assemble_surface(&mut self, curvature: BoundaryCurvature) -> Result<(), GeometryError> {
        let nv = self.vertices.len();
        let cd = self.space.chart_dim();
        if self.vertices.iter().any(|v| v.len() != cd) {
            return Err(GeometryError::MalformedMesh(format!("expected {cd}-d chart coordinates")));
        }
        let sphere = matches!(self.space, Space::Sphere { .. });
        let mut trip = Vec::with_capacity(9 * self.cells.len());
        let mut edge_count: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut h: f64 = 0.0;
        self.cell_volume = Vec::with_capacity(self.cells.len());
        let mut circ_mass = vec![0.0; nv];
        let mut mixed_mass = vec![0.0; nv];
        for ci in 0..self.cells.len() {
            if self.cells[ci].len() != 3 {
                return Err(GeometryError::MalformedMesh("cells must be triangles".into()));
            }
            self.orient(ci);
            let c = self.cells[ci].clone();
            let p: Vec<&[f64]> = c.iter().map(|&i| self.vertices[i].as_slice()).collect();
            let mut twice_area = 0.0;
            for k in 0..3 {
                let (i, j, o) = (c[(k + 1) % 3], c[(k + 2) % 3], c[k]);
                let a = sub(p[(k + 1) % 3], p[k]);
                let b = sub(p[(k + 2) % 3], p[k]);
                let (cr, dt) = cross_dot(&a, &b);
                twice_area = cr;
                let cot = dt / cr;
                trip.extend([
                    (i, i, 0.5 * cot),
                    (j, j, 0.5 * cot),
                    (i, j, -0.5 * cot),
                    (j, i, -0.5 * cot),
                ]);
                let key = (i.min(j), i.max(j));
                let e = edge_count.entry(key).or_insert((0, o));
                e.0 += 1;
                e.1 = o;
                h = h.max(self.space.distance(p[(k + 1) % 3], p[(k + 2) % 3]));
            }
            if !(twice_area > 1e-300) {
                return Err(GeometryError::MalformedMesh(format!("degenerate cell {ci}")));
            }
            let vol = if sphere {
                spherical_triangle_area(p[0], p[1], p[2])
            } else {
                // edge-midpoint rule, exact for quadratic densities
                let s: f64 = (0..3)
                    .map(|k| {
                        let m: Vec<f64> =
                            p[k].iter().zip(p[(k + 1) % 3]).map(|(a, b)| 0.5 * (a + b)).collect();
                        self.space.chart_density(&m)
                    })
                    .sum();
                0.5 * twice_area * s / 3.0
            };
            if !(vol > 0.0) {
                return Err(GeometryError::MalformedMesh(format!("non-positive volume in cell {ci}")));
            }
            self.cell_volume.push(vol);
            let (circ, mixed) = voronoi_shares(&p);
            let flat_area = 0.5 * twice_area;
            for (k, &i) in c.iter().enumerate() {
                let w = if sphere { vol / flat_area } else { self.space.chart_density(p[k]) };
                circ_mass[i] += w * circ[k];
                mixed_mass[i] += w * mixed[k];
            }
        }
        self.h = h;
        self.stiffness = Csr::from_triplets(nv, &trip);
        for (&(i, j), _) in edge_count.iter() {
            self.neighbors[i].push(j);
            self.neighbors[j].push(i);
        }
        for nb in self.neighbors.iter_mut() {
            nb.sort_unstable();
        }
        // boundary edges belong to exactly one triangle
        let mut bnbr: HashMap<usize, Vec<usize>> = HashMap::new();
        for (&(i, j), &(cnt, _)) in edge_count.iter() {
            if cnt == 1 {
                bnbr.entry(i).or_default().push(j);
                bnbr.entry(j).or_default().push(i);
            } else if cnt > 2 {
                return Err(GeometryError::MalformedMesh("non-manifold edge".into()));
            }
        }
        let mut boundary: Vec<usize> = bnbr.keys().copied().collect();
        boundary.sort_unstable();
        for &b in &boundary {
            if bnbr[&b].len() != 2 {
                return Err(GeometryError::MalformedMesh(format!(
                    "boundary vertex {b} has {} boundary edges",
                    bnbr[&b].len()
                )));
            }
            self.is_boundary[b] = true;
        }
        // Signed circumcentric cells make the Laplacian exact on |x|^2 at
        // interior vertices; the mixed cells stay positive everywhere.
        for i in 0..nv {
            self.mass[i] = if !self.is_boundary[i] && circ_mass[i] > 0.0 { circ_mass[i] } else { mixed_mass[i] };
        }
        self.boundary_weight = boundary
            .iter()
            .map(|&b| {
                bnbr[&b]
                    .iter()
                    .map(|&o| 0.5 * self.space.distance(&self.vertices[b], &self.vertices[o]))
                    .sum()
            })
            .collect();
        let frames: Vec<LocalFrame> = boundary.iter().map(|&b| self.frame(b)).collect();
        let normals: Vec<[f64; 2]> = boundary
            .iter()
            .zip(&frames)
            .map(|(&b, f)| self.outward_normal(b, &bnbr[&b], f))
            .collect();
        self.boundary_mean_curvature = match curvature {
            BoundaryCurvature::Analytic(v) => vec![v; boundary.len()],
            BoundaryCurvature::Discrete => boundary
                .iter()
                .zip(&frames)
                .zip(&normals)
                .map(|((&b, f), nrm)| self.turning_curvature(b, &bnbr[&b], f, nrm))
                .collect(),
        };
        self.normal_stencil = boundary
            .iter()
            .zip(&frames)
            .zip(&normals)
            .map(|((&b, f), nrm)| self.quadratic_normal_stencil(b, f, nrm))
            .collect::<Result<_, _>>()?;
        self.boundary = boundary;
        Ok(())
    }

    /// Make the triangle positively oriented in the chart (outward for spheres).
    fn orient(&mut self, ci: usize) {
        let c = &self.cells[ci];
        let p: Vec<&[f64]> = c.iter().map(|&i| self.vertices[i].as_slice()).collect();
        let a = sub(p[1], p[0]);
        let b = sub(p[2], p[0]);
        let s = if p[0].len() == 2 {
            a[0] * b[1] - a[1] * b[0]
        } else {
            let n = cross(&a, &b);
            let centroid: Vec<f64> = (0..3).map(|d| p[0][d] + p[1][d] + p[2][d]).collect();
            dot(&n, &centroid)
        };
        if s < 0.0 {
            self.cells[ci].swap(1, 2);
        }
    }

    fn frame(&self, b: usize) -> LocalFrame {
        let x = &self.vertices[b];
        if x.len() == 2 {
            return LocalFrame { origin: x.clone(), e1: vec![1.0, 0.0], e2: vec![0.0, 1.0], sphere: false };
        }
        let axis = if x[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let d = dot(&axis, x);
        let mut e1: Vec<f64> = (0..3).map(|k| axis[k] - d * x[k]).collect();
        let l = dot(&e1, &e1).sqrt();
        e1.iter_mut().for_each(|v| *v /= l);
        let e2 = cross(x, &e1).to_vec();
        LocalFrame { origin: x.clone(), e1, e2, sphere: true }
    }

    fn outward_normal(&self, b: usize, bn: &[usize], f: &LocalFrame) -> [f64; 2] {
        let pa = f.coords(&self.vertices[bn[0]]);
        let pb = f.coords(&self.vertices[bn[1]]);
        let t = [pb[0] - pa[0], pb[1] - pa[1]];
        let l = t[0].hypot(t[1]);
        let mut n = [t[1] / l, -t[0] / l];
        let mut inward = [0.0, 0.0];
        for &j in &self.neighbors[b] {
            if !bn.contains(&j) {
                let q = f.coords(&self.vertices[j]);
                inward[0] += q[0];
                inward[1] += q[1];
            }
        }
        if inward == [0.0, 0.0] {
            // only boundary neighbours: fall back to the adjacent cells' centroids
            for c in self.cells.iter().filter(|c| c.contains(&b)) {
                for &j in c {
                    let q = f.coords(&self.vertices[j]);
                    inward[0] += q[0];
                    inward[1] += q[1];
                }
            }
        }
        if n[0] * inward[0] + n[1] * inward[1] > 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }

    /// Background geodesic curvature of the boundary polygon at `b` from the
    /// turning angle, with the conformal correction for non-flat charts.
    fn turning_curvature(&self, b: usize, bn: &[usize], f: &LocalFrame, nrm: &[f64; 2]) -> f64 {
        let pa = f.coords(&self.vertices[bn[0]]);
        let pb = f.coords(&self.vertices[bn[1]]);
        let la = pa[0].hypot(pa[1]);
        let lb = pb[0].hypot(pb[1]);
        let cosang = ((pa[0] * pb[0] + pa[1] * pb[1]) / (la * lb)).clamp(-1.0, 1.0);
        let turn = std::f64::consts::PI - cosang.acos();
        // convex toward the outside when the neighbours bend inward
        let mid = [0.5 * (pa[0] / la + pb[0] / lb), 0.5 * (pa[1] / la + pb[1] / lb)];
        let sign = if mid[0] * nrm[0] + mid[1] * nrm[1] < 0.0 { 1.0 } else { -1.0 };
        let kappa = sign * turn / (0.5 * (la + lb));
        match self.space {
            Space::Hyperbolic { .. } => {
                let x = &self.vertices[b];
                let q = 1.0 - dot(x, x);
                // g = lambda^2 dx^2, lambda = 2 / q, d(log lambda) = 2 x / q
                let dlog = 2.0 * (x[0] * nrm[0] + x[1] * nrm[1]) / q;
                (kappa + dlog) * q / 2.0
            }
            _ => kappa,
        }
    }

    fn quadratic_normal_stencil(
        &self,
        b: usize,
        f: &LocalFrame,
        nrm: &[f64; 2],
    ) -> Result<Vec<(usize, f64)>, GeometryError> {
        let mut ring: Vec<usize> = self.neighbors[b].clone();
        for &j in &self.neighbors[b] {
            ring.extend(self.neighbors[j].iter().copied());
        }
        ring.sort_unstable();
        ring.dedup();
        ring.retain(|&j| j != b);
        let pts: Vec<[f64; 2]> = ring.iter().map(|&j| f.coords(&self.vertices[j])).collect();
        let scale = pts.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
        let rows: Vec<[f64; 5]> = pts
            .iter()
            .map(|p| {
                let (x, y) = (p[0] / scale, p[1] / scale);
                [x, y, x * x, x * y, y * y]
            })
            .collect();
        let mut ata = vec![vec![0.0; 5]; 5];
        for r in &rows {
            for i in 0..5 {
                for j in 0..5 {
                    ata[i][j] += r[i] * r[j];
                }
            }
        }
        let rhs = vec![nrm[0], nrm[1], 0.0, 0.0, 0.0];
        let z = lu_solve(ata, rhs)
            .ok_or_else(|| GeometryError::MalformedMesh(format!("boundary vertex {b} stencil")))?;
        let metric = self.space.chart_density(&self.vertices[b]).sqrt();
        let mut st = Vec::with_capacity(ring.len() + 1);
        let mut diag = 0.0;
        for (j, r) in ring.iter().zip(&rows) {
            let c = (0..5).map(|k| r[k] * z[k]).sum::<f64>() / scale / metric;
            st.push((*j, c));
            diag -= c;
        }
        st.push((b, diag));
        Ok(st)
    }

    fn check_connected(&self) -> Result<(), GeometryError> {
        let nv = self.num_vertices();
        let mut seen = vec![false; nv];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(GeometryError::MalformedMesh("mesh is not connected".into()))
        }
    }

    /// Smallest distance between two distinct vertices is above `tol`.
    pub fn has_duplicate_vertices(&self, tol: f64) -> bool {
        let mut idx: Vec<usize> = (0..self.num_vertices()).collect();
        idx.sort_by(|&a, &b| self.vertices[a][0].total_cmp(&self.vertices[b][0]));
        for (k, &a) in idx.iter().enumerate() {
            for &b in &idx[k + 1..] {
                if self.vertices[b][0] - self.vertices[a][0] > tol {
                    break;
                }
                if dist(&self.vertices[a], &self.vertices[b]) <= tol {
                    return true;
                }
            }
        }
        false
    }

    /// Interior-vertex restriction of a full field.
    pub fn restrict_interior(&self, u: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&i| u[i]).collect()
    }

    /// Embed interior values into a full field with zero boundary values.
    pub fn extend_interior(&self, v: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.num_vertices()];
        for (k, &i) in self.interior.iter().enumerate() {
            u[i] = v[k];
        }
        u
    }
}

struct LocalFrame {
    origin: Vec<f64>,
    e1: Vec<f64>,
    e2: Vec<f64>,
    sphere: bool,
}

impl LocalFrame {
    /// Normal coordinates: chart offsets, or the sphere's logarithm map.
    fn coords(&self, y: &[f64]) -> [f64; 2] {
        let d = sub(y, &self.origin);
        if !self.sphere {
            return [d[0], d[1]];
        }
        let c = dot(y, &self.origin);
        let v: Vec<f64> = (0..3).map(|k| y[k] - c * self.origin[k]).collect();
        let s = dot(&v, &v).sqrt();
        let theta = s.atan2(c);
        let f = if s > 0.0 { theta / s } else { 1.0 };
        [f * dot(&v, &self.e1), f * dot(&v, &self.e2)]
    }
}

/// Signed circumcentric and mixed Voronoi areas of the corners of a triangle.
/// The mixed variant splits obtuse triangles 1/2, 1/4, 1/4.
fn voronoi_shares(p: &[&[f64]]) -> ([f64; 3], [f64; 3]) {
    let mut cot = [0.0; 3];
    let mut area = 0.0;
    for k in 0..3 {
        let a = sub(p[(k + 1) % 3], p[k]);
        let b = sub(p[(k + 2) % 3], p[k]);
        let (cr, dt) = cross_dot(&a, &b);
        cot[k] = dt / cr;
        area = 0.5 * cr;
    }
    let mut circ = [0.0; 3];
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        // edge (i, j) is opposite corner k
        let l2 = dist(p[i], p[j]).powi(2);
        circ[i] += l2 * cot[k] / 8.0;
        circ[j] += l2 * cot[k] / 8.0;
    }
    let mixed = match (0..3).find(|&k| cot[k] < 0.0) {
        Some(o) => {
            let mut s = [0.25 * area; 3];
            s[o] = 0.5 * area;
            s
        }
        None => circ,
    };
    (circ, mixed)
}

/// (|a x b|, a . b), sign-aware for planar vectors.
fn cross_dot(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d = dot(a, b);
    if a.len() == 2 {
        ((a[0] * b[1] - a[1] * b[0]).abs(), d)
    } else {
        let c = cross(a, b);
        (dot(&c, &c).sqrt(), d)
    }
}

/// Area of the geodesic triangle with unit-vector vertices.
pub(crate) fn spherical_triangle_area(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let num = dot(a, &cross(b, c)).abs();
    let den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    2.0 * num.atan2(den)
}

fn lagrange_end_weights(t: [f64; 3]) -> [f64; 3] {
    let [a, b, c] = t;
    [
        (c - b) / ((a - b) * (a - c)),
        (c - a) / ((b - a) * (b - c)),
        (2.0 * c - a - b) / ((c - a) * (c - b)),
    ]
}

fn lagrange_end_derivative(t: [f64; 3], u: [f64; 3]) -> f64 {
    let w = lagrange_end_weights(t);
    w[0] * u[0] + w[1] * u[1] + w[2] * u[2]
}
