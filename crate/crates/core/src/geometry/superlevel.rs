//! Extraction of `{x : f(x) > level}` from a discretized domain.

use super::build::radial_from_points;
use super::domain::{BoundaryCurvature, DiscreteDomain, VertexOrigin};
use super::{dot, GeometryError, ScalarField, Space};
use std::collections::HashMap;

/// Sub-mesh where the piecewise-linear field exceeds `level`. Cut edges get a
/// new boundary vertex at the linearly interpolated crossing.
pub fn superlevel_domain(
    base: &DiscreteDomain,
    field: &ScalarField,
    level: f64,
) -> Result<DiscreteDomain, GeometryError> {
    field.check(base)?;
    let f = &field.values;
    if !(level < field.max()) {
        return Err(GeometryError::EmptyLevelSet);
    }
    if field.min() > level {
        let mut copy = base.clone();
        copy.origin = (0..base.num_vertices()).map(VertexOrigin::Base).collect();
        return Ok(copy);
    }
    match base.dimension {
        1 => radial_cut(base, f, level),
        _ => surface_cut(base, f, level),
    }
}

fn radial_cut(base: &DiscreteDomain, f: &[f64], level: f64) -> Result<DiscreteDomain, GeometryError> {
    let above: Vec<usize> = (0..f.len()).filter(|&i| f[i] > level).collect();
    let k = above.len();
    if above.iter().enumerate().any(|(a, &b)| a != b) {
        return Err(GeometryError::DisconnectedLevelSet(2));
    }
    if k < 2 {
        return Err(GeometryError::EmptyLevelSet);
    }
    let mut ts: Vec<f64> = (0..k).map(|i| base.radius_of(i)).collect();
    let mut origin: Vec<VertexOrigin> = (0..k).map(VertexOrigin::Base).collect();
    let (a, b) = (f[k - 1] - level, f[k] - level);
    let s = a / (a - b);
    if s >= 1.0 {
        ts.push(base.radius_of(k));
        origin.push(VertexOrigin::Base(k));
    } else {
        ts.push(base.radius_of(k - 1) + s * (base.radius_of(k) - base.radius_of(k - 1)));
        origin.push(VertexOrigin::Edge(k - 1, k, s));
    }
    radial_from_points(base.space, ts, origin)
}

struct Cutter<'a> {
    base: &'a DiscreteDomain,
    a: Vec<f64>,
    sphere: bool,
    verts: Vec<Vec<f64>>,
    origin: Vec<VertexOrigin>,
    kept: HashMap<usize, usize>,
    cut: HashMap<(usize, usize), usize>,
}

impl Cutter<'_> {
    fn keep(&mut self, i: usize) -> usize {
        if let Some(&k) = self.kept.get(&i) {
            return k;
        }
        self.verts.push(self.base.vertices[i].clone());
        self.origin.push(VertexOrigin::Base(i));
        let k = self.verts.len() - 1;
        self.kept.insert(i, k);
        k
    }

    /// Crossing on the edge from inside vertex `i` to outside vertex `j`.
    fn edge(&mut self, i: usize, j: usize) -> usize {
        let s = self.a[i] / (self.a[i] - self.a[j]);
        if s >= 1.0 {
            return self.keep(j);
        }
        if let Some(&k) = self.cut.get(&(i, j)) {
            return k;
        }
        let x: Vec<f64> = self.base.vertices[i]
            .iter()
            .zip(&self.base.vertices[j])
            .map(|(p, q)| (1.0 - s) * p + s * q)
            .collect();
        let x = if self.sphere {
            let l = dot(&x, &x).sqrt();
            x.iter().map(|v| v / l).collect()
        } else {
            x
        };
        self.verts.push(x);
        self.origin.push(VertexOrigin::Edge(i, j, s));
        let k = self.verts.len() - 1;
        self.cut.insert((i, j), k);
        k
    }
}

fn surface_cut(base: &DiscreteDomain, f: &[f64], level: f64) -> Result<DiscreteDomain, GeometryError> {
    let mut cx = Cutter {
        base,
        a: f.iter().map(|v| v - level).collect(),
        sphere: matches!(base.space, Space::Sphere { .. }),
        verts: Vec::new(),
        origin: Vec::new(),
        kept: HashMap::new(),
        cut: HashMap::new(),
    };
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for c in &base.cells {
        let pos: Vec<usize> = c.iter().copied().filter(|&i| cx.a[i] > 0.0).collect();
        let neg: Vec<usize> = c.iter().copied().filter(|&i| cx.a[i] <= 0.0).collect();
        match pos.len() {
            0 => {}
            3 => {
                let t: Vec<usize> = c.iter().map(|&i| cx.keep(i)).collect();
                cells.push(t);
            }
            1 => {
                let p = cx.keep(pos[0]);
                let q = cx.edge(pos[0], neg[0]);
                let r = cx.edge(pos[0], neg[1]);
                if q != r {
                    cells.push(vec![p, q, r]);
                }
            }
            _ => {
                let p1 = cx.keep(pos[0]);
                let p2 = cx.keep(pos[1]);
                let c2 = cx.edge(pos[1], neg[0]);
                let c1 = cx.edge(pos[0], neg[0]);
                let (t1, t2) = best_split(&cx.verts, [p1, p2, c2, c1]);
                for t in [t1, t2] {
                    if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
                        cells.push(t.to_vec());
                    }
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(GeometryError::EmptyLevelSet);
    }
    let comps = components(cx.verts.len(), &cells);
    if comps > 1 {
        return Err(GeometryError::DisconnectedLevelSet(comps));
    }
    DiscreteDomain::new(base.space, 2, cx.verts, cells, BoundaryCurvature::Discrete, cx.origin)
}

/// Split a quad (cyclic order) along the diagonal maximizing the smallest angle.
fn best_split(v: &[Vec<f64>], q: [usize; 4]) -> ([usize; 3], [usize; 3]) {
    let a = ([q[0], q[1], q[2]], [q[0], q[2], q[3]]);
    let b = ([q[0], q[1], q[3]], [q[1], q[2], q[3]]);
    let score = |t: &([usize; 3], [usize; 3])| min_angle(v, t.0).min(min_angle(v, t.1));
    if score(&a) >= score(&b) {
        a
    } else {
        b
    }
}

fn min_angle(v: &[Vec<f64>], t: [usize; 3]) -> f64 {
    if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
        return std::f64::consts::PI;
    }
    (0..3)
        .map(|k| {
            let o = &v[t[k]];
            let x: Vec<f64> = v[t[(k + 1) % 3]].iter().zip(o).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = v[t[(k + 2) % 3]].iter().zip(o).map(|(a, b)| a - b).collect();
            let c = dot(&x, &y) / (dot(&x, &x).sqrt() * dot(&y, &y).sqrt());
            c.clamp(-1.0, 1.0).acos()
        })
        .fold(std::f64::consts::PI, f64::min)
}

fn components(n: usize, cells: &[Vec<usize>]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for c in cells {
        for k in 1..c.len() {
            let (a, b) = (find(&mut parent, c[0]), find(&mut parent, c[k]));
            if a != b {
                parent[a] = b;
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, build_radial_domain, Region};

    #[test]
    fn empty_when_level_reaches_max() {
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.2).unwrap();
        let f = ScalarField::from_fn(&d, |x| 1.0 - x[0] * x[0] - x[1] * x[1]);
        assert!(matches!(superlevel_domain(&d, &f, 1.0), Err(GeometryError::EmptyLevelSet)));
    }

    #[test]
    fn constant_field_gives_full_copy() {
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.2).unwrap();
        let f = ScalarField::constant(d.num_vertices(), 3.0);
        let s = superlevel_domain(&d, &f, 1.0).unwrap();
        assert_eq!(s.num_vertices(), d.num_vertices());
        assert_eq!(s.cells, d.cells);
    }

    #[test]
    fn paraboloid_cut_is_circle() {
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.05).unwrap();
        let f = ScalarField::from_fn(&d, |x| 1.0 - x[0] * x[0] - x[1] * x[1]);
        let s = superlevel_domain(&d, &f, 0.75).unwrap();
        for &b in &s.boundary {
            let x = &s.vertices[b];
            assert!((x[0].hypot(x[1]) - 0.5).abs() < 0.05 * 0.05);
        }
        // boundary curvature from the turning angle: a circle of radius 1/2
        let mean = s.boundary_integral(&s.boundary_mean_curvature) / s.boundary_measure();
        assert!((mean - 2.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn two_bumps_are_disconnected() {
        let d = build_domain(Space::Euclidean { n: 2 }, &Region::ball(1.0), 0.05).unwrap();
        let f = ScalarField::from_fn(&d, |x| {
            let a = (-(x[0] - 0.5).powi(2) * 40.0 - x[1] * x[1] * 40.0).exp();
            let b = (-(x[0] + 0.5).powi(2) * 40.0 - x[1] * x[1] * 40.0).exp();
            a + b
        });
        assert!(matches!(
            superlevel_domain(&d, &f, 0.5),
            Err(GeometryError::DisconnectedLevelSet(2))
        ));
    }

    #[test]
    fn radial_cut_places_endpoint() {
        let d = build_radial_domain(Space::Euclidean { n: 2 }, 1.0, 101).unwrap();
        let f = ScalarField::from_fn(&d, |t| 1.0 - t[0] * t[0]);
        let s = superlevel_domain(&d, &f, 0.5).unwrap();
        let r = s.radius_of(s.num_vertices() - 1);
        assert!((r - 0.5f64.sqrt()).abs() < 1e-4);
    }
}
