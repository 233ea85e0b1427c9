//! Radius sweeps: scaling of λ₁ on small balls, the critical cap, and the
//! spectrum of complements of shrinking caps on S².

use super::LabError;
use crate::geometry::{build_domain, Region, Space};
use crate::par;
use crate::spectral::{
    first_eigenpair, quadratic_form, radial_eigenvalue, schrodinger_potential, OperatorKind, OperatorSpec,
    RadialOptions,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Minimum number of radii in a sweep.
pub const MIN_SWEEP_POINTS: usize = 8;
/// Width at which the bisection for the critical radius stops.
pub const CROSSING_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub parameter: f64,
    pub value: f64,
    pub h: f64,
    pub residual: f64,
    /// Experiment-specific columns, named by the owning sweep.
    pub aux: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sweep {
    pub parameter_name: String,
    pub value_name: String,
    pub aux_names: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    /// Rows are sorted by parameter.
    pub fn new(parameter: &str, value: &str, aux: &[&str], mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
        Sweep {
            parameter_name: parameter.into(),
            value_name: value.into(),
            aux_names: aux.iter().map(|s| s.to_string()).collect(),
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.parameter_name.clone(), self.value_name.clone()];
        header.extend(self.aux_names.iter().cloned());
        header.extend(["h".to_string(), "residual".to_string()]);
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.parameter.to_string(), r.value.to_string()];
            rec.extend(r.aux.iter().map(|x| x.to_string()));
            rec.extend([r.h.to_string(), r.residual.to_string()]);
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// `n` radii spaced evenly in log r between `a` and `b`.
pub fn log_spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Least-squares slope and intercept of y against x.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn radial_opts() -> RadialOptions {
    RadialOptions::default()
}

/// Λ₁ of the geodesic ball of radius r by the shooting solver.
pub fn radial_lambda(space: Space, r: f64) -> Result<f64, LabError> {
    let v = schrodinger_potential(space.scalar_curvature(), space.dim());
    Ok(radial_eigenvalue(space, r, v, radial_opts())?.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KarpPinskyReport {
    pub space: Space,
    /// Columns: r, λ₁, Λ₁.
    pub sweep: Sweep,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    /// Radius where Λ₁ changes sign, if it does on the range.
    pub critical_radius: Option<f64>,
}

/// Radius in `[lo, hi]` where Λ₁ changes sign, by bisection.
pub fn critical_radius(space: Space, lo: f64, hi: f64) -> Result<f64, LabError> {
    let (mut a, mut b) = (lo, hi);
    let fa = radial_lambda(space, a)?;
    let fb = radial_lambda(space, b)?;
    if fa.signum() == fb.signum() {
        return Err(LabError::NoCrossing { lo, hi });
    }
    while b - a > CROSSING_TOL {
        let mid = 0.5 * (a + b);
        if radial_lambda(space, mid)?.signum() == fa.signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

pub fn karp_pinsky_sweep(space: Space, radii: &[f64]) -> Result<KarpPinskyReport, LabError> {
    if radii.len() < MIN_SWEEP_POINTS {
        return Err(LabError::Config(format!("sweep needs at least {MIN_SWEEP_POINTS} radii")));
    }
    let opts = radial_opts();
    let pot = schrodinger_potential(space.scalar_curvature(), space.dim());
    let rows = par::map_slice(radii, |&r| -> Result<SweepRow, LabError> {
        let (lam, width) = radial_eigenvalue(space, r, 0.0, opts)?;
        let (big, _) = radial_eigenvalue(space, r, pot, opts)?;
        Ok(SweepRow { parameter: r, value: lam, h: opts.max_step.min(r / 64.0), residual: width, aux: vec![big] })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let sweep = Sweep::new("r", "lambda1", &["Lambda1"], rows);
    let lx: Vec<f64> = sweep.rows.iter().map(|r| r.parameter.ln()).collect();
    let ly: Vec<f64> = sweep.rows.iter().map(|r| r.value.ln()).collect();
    let (slope, intercept) = fit_line(&lx, &ly);
    let mut crossing = None;
    for w in sweep.rows.windows(2) {
        if w[0].aux[0].signum() != w[1].aux[0].signum() {
            crossing = Some(critical_radius(space, w[0].parameter, w[1].parameter)?);
            break;
        }
    }
    Ok(KarpPinskyReport { space, sweep, fitted_slope: slope, fitted_intercept: intercept, critical_radius: crossing })
}

/// Rayleigh quotient on S² of the ramp that vanishes on `B_r`, equals 1
/// outside `B_{2r}` and is linear in distance between, for `r <= π/2`.
pub fn ramp_quotient(r: f64) -> f64 {
    let numerator = 2.0 * PI * (r.cos() - (2.0 * r).cos()) / (r * r);
    // ∫_0^r s^2 sin(s + r) ds
    let ramp = -r * r * (2.0 * r).cos() + 2.0 * r * (2.0 * r).sin() + 2.0 * (2.0 * r).cos() - 2.0 * r.cos();
    let denominator = 2.0 * PI * (ramp / (r * r) + 1.0 + (2.0 * r).cos());
    numerator / denominator
}

/// `(4/r^2) Vol(B_{2r}) / Vol(S² - B_{2r})`.
pub fn ramp_volume_bound(r: f64) -> f64 {
    4.0 / (r * r) * (1.0 - (2.0 * r).cos()) / (1.0 + (2.0 * r).cos())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComplementReport {
    /// Columns: r, λ₁, closed-form ramp quotient, discrete ramp quotient, volume bound.
    pub sweep: Sweep,
    pub mesh_hashes: Vec<String>,
}

pub fn complement_eigenvalue_sweep(radii: &[f64], h: f64, tol: f64) -> Result<ComplementReport, LabError> {
    if radii.iter().any(|&r| !(r > 0.0 && r <= PI / 2.0 + 1e-12)) {
        return Err(LabError::Config("complement radii must lie in (0, π/2]".into()));
    }
    let space = Space::Sphere { n: 2 };
    let center = space.default_center();
    let out = par::map_slice(radii, |&r| -> Result<(SweepRow, String), LabError> {
        let d = build_domain(space, &Region::complement(r), h)?;
        let lap = OperatorSpec::new(&d, OperatorKind::Laplacian);
        let res = first_eigenpair(&d, &lap, tol)?;
        let mut ramp: Vec<f64> =
            d.vertices.iter().map(|x| ((space.distance(x, &center) - r) / r).clamp(0.0, 1.0)).collect();
        for &b in &d.boundary {
            ramp[b] = 0.0;
        }
        let den: f64 = ramp.iter().zip(&d.mass).map(|(f, m)| f * f * m).sum();
        let discrete = quadratic_form(&d, &lap, &ramp) / den;
        let row = SweepRow {
            parameter: r,
            value: res.eigenvalue,
            h: d.h,
            residual: res.residual,
            aux: vec![ramp_quotient(r), discrete, ramp_volume_bound(r)],
        };
        Ok((row, d.hash()))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let (rows, mesh_hashes): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    Ok(ComplementReport {
        sweep: Sweep::new("r", "lambda1", &["rampQuotient", "discreteRampQuotient", "volumeBound"], rows),
        mesh_hashes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit_recovers_power_law() {
        let x: Vec<f64> = log_spaced(0.1, 1.0, 8).iter().map(|r| r.ln()).collect();
        let y: Vec<f64> = x.iter().map(|l| 3.0 - 2.0 * l).collect();
        let (s, c) = fit_line(&x, &y);
        assert!((s + 2.0).abs() < 1e-12 && (c - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ramp_quotient_matches_quadrature() {
        let midpoint = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
            let n = 20000;
            let dt = (b - a) / n as f64;
            (0..n).map(|k| f(a + (k as f64 + 0.5) * dt)).sum::<f64>() * dt
        };
        for r in [0.2, 0.7, PI / 2.0] {
            let num = midpoint(&|t: f64| t.sin() / (r * r), r, 2.0 * r);
            let den = midpoint(&|t: f64| ((t - r) / r).powi(2) * t.sin(), r, 2.0 * r) + midpoint(&|t: f64| t.sin(), 2.0 * r, PI);
            assert!((ramp_quotient(r) - num / den).abs() < 1e-8 * ramp_quotient(r), "{r}");
        }
    }

    #[test]
    fn short_sweep_is_rejected() {
        let e = karp_pinsky_sweep(Space::Euclidean { n: 2 }, &[0.1, 0.2]).unwrap_err();
        assert!(matches!(e, LabError::Config(_)));
    }

    #[test]
    fn flat_space_has_no_crossing() {
        let e = critical_radius(Space::Euclidean { n: 3 }, 0.1, 1.0).unwrap_err();
        assert!(matches!(e, LabError::NoCrossing { .. }));
    }

    #[test]
    fn csv_has_header_and_sorted_rows() {
        let rows = vec![
            SweepRow { parameter: 2.0, value: 1.0, h: 0.1, residual: 0.0, aux: vec![5.0] },
            SweepRow { parameter: 1.0, value: 2.0, h: 0.1, residual: 0.0, aux: vec![6.0] },
        ];
        let s = Sweep::new("r", "lambda1", &["x"], rows).to_csv();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "r,lambda1,x,h,residual");
        assert!(lines[1].starts_with("1,"));
    }
}
