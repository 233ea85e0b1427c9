//! Shooting solver for the radial Dirichlet problem on a geodesic ball of a
//! space form:
//!
//! `φ'' + (n-1) (cn/sn) φ' + (Λ + V) φ = 0,  φ'(0) = 0,  φ(r) = 0`.

use super::{schrodinger_potential, OperatorKind, SpectralError, SpectralResult, RADIAL_TOL};
use crate::geometry::{build_radial_domain, ScalarField, Space};

#[derive(Clone, Copy, Debug)]
pub struct RadialOptions {
    /// Width of the final eigenvalue bracket.
    pub tol: f64,
    /// Largest integration step.
    pub max_step: f64,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions { tol: RADIAL_TOL, max_step: 2e-3 }
    }
}

const T0: f64 = 1e-6;

struct Shooter {
    space: Space,
    n: f64,
    r: f64,
    max_step: f64,
}

impl Shooter {
    fn rhs(&self, t: f64, mu: f64, y: [f64; 2]) -> [f64; 2] {
        let c = (self.n - 1.0) * self.space.cn(t) / self.space.sn(t);
        [y[1], -c * y[1] - mu * y[0]]
    }

    fn step(&self, t: f64, dt: f64, mu: f64, y: [f64; 2]) -> [f64; 2] {
        let k1 = self.rhs(t, mu, y);
        let y2 = [y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]];
        let k2 = self.rhs(t + 0.5 * dt, mu, y2);
        let y3 = [y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]];
        let k3 = self.rhs(t + 0.5 * dt, mu, y3);
        let y4 = [y[0] + dt * k3[0], y[1] + dt * k3[1]];
        let k4 = self.rhs(t + dt, mu, y4);
        [
            y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    /// Integrate from the series start near the origin, stopping at each of
    /// `stops` (increasing, within (T0, r]). Returns φ at the stops, or None
    /// as soon as φ reaches zero when `stop_on_zero` is set.
    fn run(&self, mu: f64, stops: &[f64], stop_on_zero: bool) -> Option<Vec<f64>> {
        let t0 = T0.min(0.5 * stops[0]);
        let mut t = t0;
        let mut y = [1.0 - mu * t * t / (2.0 * self.n), -mu * t / self.n];
        let mut out = Vec::with_capacity(stops.len());
        for &target in stops {
            while t < target {
                let dt = self.max_step.min(0.05 * t).min(target - t);
                y = self.step(t, dt, mu, y);
                t = if target - t - dt < 1e-15 * target { target } else { t + dt };
                if stop_on_zero && y[0] <= 0.0 {
                    return None;
                }
            }
            out.push(y[0]);
        }
        Some(out)
    }

    fn crosses(&self, mu: f64) -> bool {
        match self.run(mu, &[self.r], true) {
            None => true,
            Some(v) => v[0] <= 0.0,
        }
    }
}

/// First Dirichlet eigenvalue of `-Δ - v` on the ball of radius r, together
/// with the final bracket width.
pub fn radial_eigenvalue(space: Space, r: f64, v: f64, opts: RadialOptions) -> Result<(f64, f64), SpectralError> {
    if !space.is_space_form() {
        return Err(crate::geometry::GeometryError::UnsupportedCombination("radial solver needs a space form".into()).into());
    }
    if !(r > 0.0 && r < space.max_radius()) {
        return Err(crate::geometry::GeometryError::InvalidRadius(r).into());
    }
    let sh = Shooter { space, n: space.dim() as f64, r, max_step: opts.max_step.min(r / 64.0) };
    let rr = space.scalar_curvature().abs();
    let (mut lo, mut hi) = (-10.0 * rr - 100.0 / (r * r), 100.0 / (r * r) + 10.0 * rr);
    if sh.crosses(lo + v) || !sh.crosses(hi + v) {
        return Err(SpectralError::BracketFailure { lo, hi });
    }
    while hi - lo > opts.tol * hi.abs().max(lo.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if sh.crosses(mid + v) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi), hi - lo))
}

/// Eigenpair of the radial problem sampled on the uniform grid produced by
/// `build_radial_domain(space, r, grid_points)`.
pub fn radial_first_eigenpair(
    space: Space,
    r: f64,
    kind: OperatorKind,
    grid_points: usize,
) -> Result<SpectralResult, SpectralError> {
    let domain = build_radial_domain(space, r, grid_points)?;
    let v = match kind {
        OperatorKind::Laplacian => 0.0,
        OperatorKind::Schrodinger => schrodinger_potential(space.scalar_curvature(), space.dim()),
    };
    let opts = RadialOptions::default();
    let (lambda, width) = radial_eigenvalue(space, r, v, opts)?;
    let sh = Shooter { space, n: space.dim() as f64, r, max_step: opts.max_step.min(r / 64.0) };
    let stops: Vec<f64> = domain.vertices[1..].iter().map(|x| x[0]).collect();
    let tail = sh.run(lambda + v, &stops, false).expect("no early stop requested");
    let mut phi = Vec::with_capacity(grid_points);
    phi.push(1.0);
    phi.extend(tail);
    *phi.last_mut().expect("grid is nonempty") = 0.0;
    let sup = phi.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    phi.iter_mut().for_each(|x| *x /= sup);
    Ok(SpectralResult {
        eigenvalue: lambda,
        eigenfunction: ScalarField::new(phi),
        residual: width,
        iterations: 0,
        h: domain.h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    const J01: f64 = 2.404_825_557_695_773;

    #[test]
    fn flat_ball_oracles() {
        let o = RadialOptions::default();
        let (l3, _) = radial_eigenvalue(Space::Euclidean { n: 3 }, 1.0, 0.0, o).unwrap();
        assert_relative_eq!(l3, PI * PI, max_relative = 1e-7);
        let (l2, _) = radial_eigenvalue(Space::Euclidean { n: 2 }, 1.0, 0.0, o).unwrap();
        assert_relative_eq!(l2, J01 * J01, max_relative = 1e-7);
    }

    #[test]
    fn hemisphere_is_critical() {
        let r = radial_first_eigenpair(Space::Sphere { n: 2 }, FRAC_PI_2, OperatorKind::Schrodinger, 512).unwrap();
        assert!(r.eigenvalue.abs() < 1e-7, "{}", r.eigenvalue);
        // eigenfunction is cos t
        for (k, v) in r.eigenfunction.values.iter().enumerate() {
            let t = FRAC_PI_2 * k as f64 / 511.0;
            assert!((v - t.cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_scaling_law() {
        let o = RadialOptions::default();
        let (a, _) = radial_eigenvalue(Space::Euclidean { n: 4 }, 0.5, 0.0, o).unwrap();
        let (b, _) = radial_eigenvalue(Space::Euclidean { n: 4 }, 1.5, 0.0, o).unwrap();
        assert_relative_eq!(a / b, 9.0, max_relative = 1e-7);
    }

    #[test]
    fn product_space_is_rejected() {
        assert!(radial_eigenvalue(Space::ProductSphereCylinder { k: 2 }, 1.0, 0.0, RadialOptions::default()).is_err());
    }
}
