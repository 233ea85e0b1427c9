//! Gluing the matched inner factor to the collar factor across ∂Ω_ε.
//!
//! The blend is a concave smooth minimum of the two logarithms (convex smooth
//! maximum for sign Minus). Where the inputs cross with the ordering checked
//! by the matching step this can only raise (lower) curvature, and the
//! remaining slack is measured afterwards.

use super::{factor_from_log, DeformError, Sign};
use crate::conformal::scalar_curvature;
use crate::geometry::DiscreteDomain;

/// Width in φ of the ramp that pins the blend to the inner factor deep inside Ω_ε.
pub const GAMMA_RAMP: f64 = 0.1;

#[derive(Clone, Copy, Debug)]
pub struct GlueSpec {
    /// Width of the blend band in background distance.
    pub collar_width: f64,
    pub delta_budget: f64,
    /// Halvings of `collar_width` tried after the first attempt.
    pub max_retries: usize,
}

/// Quintic `6s^5 - 15s^4 + 10s^3` clamped to [0, 1].
pub fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Concave C^3 smoothing of `min(x, 0)`: equal to x below -w and to 0 above w,
/// with slope `1 - smoothstep` in between. `w = 0` gives the exact minimum.
pub fn smooth_min(x: f64, w: f64) -> f64 {
    if w == 0.0 {
        return x.min(0.0);
    }
    if x <= -w {
        x
    } else if x >= w {
        0.0
    } else {
        let v = (x + w) / (2.0 * w);
        let anti = |v: f64| v - (v.powi(6) - 3.0 * v.powi(5) + 2.5 * v.powi(4));
        -2.0 * w * (anti(1.0) - anti(v))
    }
}

#[derive(Clone, Debug)]
pub struct GlueInput<'a> {
    pub host: &'a DiscreteDomain,
    /// Ω as a prefix of the host vertex set.
    pub omega: &'a DiscreteDomain,
    /// First Laplace eigenfunction of Ω on the host vertex set (0 outside Ω).
    pub phi: &'a [f64],
    /// Inner log factor on Ω, extended past ∂Ω_ε.
    pub inner: &'a [f64],
    /// Collar log factor on Ω.
    pub collar: &'a [f64],
    /// Host vertices lying in Ω_ε.
    pub in_eps: &'a [bool],
    pub sign: Sign,
    /// Normal slope of `s (inner - collar)` on ∂Ω_ε.
    pub interface_slope: f64,
    /// Least (sign Plus) or greatest (sign Minus) input curvature.
    pub reference: f64,
}

#[derive(Clone, Debug)]
pub struct GlueOutcome {
    /// Log factor on the host vertex set; exactly 0 on ∂Ω and outside Ω.
    pub log_factor: Vec<f64>,
    /// Scalar curvature of the glued metric on the host (NaN on the host boundary).
    pub curvature: Vec<f64>,
    pub achieved_delta: f64,
    pub collar_width: f64,
    pub blend_width: f64,
    pub phi_lock: f64,
    pub retries: usize,
}

pub fn glue(input: &GlueInput, spec: &GlueSpec) -> Result<GlueOutcome, DeformError> {
    let s = input.sign.s();
    let host = input.host;
    let no = input.omega.num_vertices();
    let d0: Vec<f64> = (0..no).map(|i| s * (input.inner[i] - input.collar[i])).collect();
    let (mut d_min, mut phi_lock) = (0.0, f64::INFINITY);
    for i in 0..no {
        if input.in_eps[i] && d0[i] < d_min {
            d_min = d0[i];
            phi_lock = input.phi[i];
        }
    }
    let gamma0 = 1.0 + d0.iter().copied().fold(0.0, f64::max);
    let gamma: Vec<f64> = (0..no)
        .map(|i| if d_min < 0.0 { gamma0 * smoothstep((input.phi[i] - phi_lock) / GAMMA_RAMP) } else { 0.0 })
        .collect();
    let mut last = DeformError::LockFailed { vertex: 0 };
    for retry in 0..=spec.max_retries {
        let cw = spec.collar_width * 0.5f64.powi(retry as i32);
        let w = if d_min < 0.0 { (0.5 * cw * input.interface_slope).min(0.5 * d_min.abs()) } else { 0.0 };
        let a: Vec<f64> = (0..no).map(|i| input.collar[i] + s * gamma[i]).collect();
        let gap: Vec<f64> = (0..no).map(|i| s * (input.inner[i] - a[i])).collect();
        // wherever the ramp is felt, the blend must already be the inner factor
        let unlocked = (0..no).find(|&i| {
            let felt = gamma[i] > 0.0 || host.neighbors[i].iter().any(|&j| j < no && gamma[j] > 0.0);
            felt && gap[i] > -w
        });
        if let Some(v) = unlocked {
            last = DeformError::LockFailed { vertex: v };
            continue;
        }
        let mut f = vec![0.0; host.num_vertices()];
        for &i in &input.omega.interior {
            f[i] = a[i] + s * smooth_min(gap[i], w);
        }
        let rg = scalar_curvature(&factor_from_log(host.n(), &f), host)?.values;
        let delta = input
            .omega
            .interior
            .iter()
            .map(|&i| s * (input.reference - rg[i]))
            .fold(0.0, f64::max);
        if delta <= spec.delta_budget {
            return Ok(GlueOutcome {
                log_factor: f,
                curvature: rg,
                achieved_delta: delta,
                collar_width: cw,
                blend_width: w,
                phi_lock,
                retries: retry,
            });
        }
        last = DeformError::DeltaBudgetExceeded { achieved: delta, budget: spec.delta_budget, retries: retry };
    }
    Err(last)
}
