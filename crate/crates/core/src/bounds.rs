//! Closed-form bounds: the input-dependent Lipschitz rate `θ(u)`, the input
//! mismatch term `γ`, the Grönwall reach radius, the interval half-width `w`
//! and the barrier-condition error bound `E`.

use crate::barrier::BarrierSpec;
use crate::dataset::SampleTriple;
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::LipschitzSpec;

/// Exponent above which `e^{Θ·dt}` is rejected as useless for synthesis.
pub const MAX_EXPONENT: f64 = 50.0;

/// `θ(u) = √Σ_j (L_fj + Σ_s L_gjs |u_s|)²`
pub fn theta(u: &[f64], spec: &LipschitzSpec) -> Result<f64> {
    check_dim("input", spec.input_dim(), u.len())?;
    Ok(spec
        .l_f()
        .iter()
        .zip(spec.l_g())
        .map(|(lf, row)| {
            let r = lf + row.iter().zip(u).map(|(lg, us)| lg * us.abs()).sum::<f64>();
            r * r
        })
        .sum::<f64>()
        .sqrt())
}

/// `γ(u, u_ref) = g_sup·‖u − u_ref‖₂`
pub fn gamma(u: &[f64], u_ref: &[f64], g_sup: f64) -> Result<f64> {
    check_dim("input", u.len(), u_ref.len())?;
    Ok(g_sup * linalg::dist(u, u_ref))
}

/// `(e^{Θ·dt} − 1)/Θ`, continuously extended by `dt` at `Θ = 0`.
pub fn growth_factor(theta_max: f64, dt: f64) -> Result<f64> {
    let exponent = theta_max * dt;
    if exponent > MAX_EXPONENT {
        return Err(Error::BoundOverflow { exponent });
    }
    if exponent < 1e-300 {
        return Ok(dt);
    }
    Ok(exponent.exp_m1() / theta_max)
}

/// `‖β‖₂/Θ·(e^{Θ·dt} − 1)`: how far the state can travel in `dt` under any held input.
pub fn reach_radius(dt: f64, spec: &LipschitzSpec) -> Result<f64> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidValue {
            what: "dt",
            reason: format!("must be nonnegative, got {dt}"),
        });
    }
    Ok(spec.beta_norm() * growth_factor(spec.theta_max(), dt)?)
}

/// `(L_h·Θ·‖β‖₂ + L_α)/Θ·(e^{Θ·dt} − 1)`, the sampling-period part of `E`.
pub fn gronwall_term(dt: f64, barrier: &BarrierSpec, spec: &LipschitzSpec) -> Result<f64> {
    let phi = growth_factor(spec.theta_max(), dt)?;
    Ok((barrier.l_h() * spec.theta_max() * spec.beta_norm() + barrier.l_alpha_eff()) * phi)
}

/// Half-width of the axis-uniform interval around a finite-difference rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WBound {
    /// `θ(u_k)‖x − x_k‖₂ + √n·θ(u_k)·‖β‖₂/Θ·(e^{Θ(t_{k+1}−t_k)} − 1)`
    pub fixed_part: f64,
    /// `γ(u, u_k)`
    pub gamma_part: f64,
    pub total: f64,
}

impl WBound {
    pub fn from_parts(fixed_part: f64, gamma_part: f64) -> Self {
        Self {
            fixed_part,
            gamma_part,
            total: fixed_part + gamma_part,
        }
    }
}

/// The input-independent part of [`w_bound`]; also the sample-selection score.
pub fn w_fixed_part(x_now: &[f64], sample: &SampleTriple, spec: &LipschitzSpec) -> Result<f64> {
    check_dim("state", spec.state_dim(), x_now.len())?;
    check_dim("sample state", spec.state_dim(), sample.x_start.len())?;
    let th = theta(&sample.u_held, spec)?;
    let n = spec.state_dim() as f64;
    let spread = n.sqrt() * spec.beta_norm() * growth_factor(spec.theta_max(), sample.duration())?;
    Ok(th * (linalg::dist(x_now, &sample.x_start) + spread))
}

pub fn w_bound(x_now: &[f64], sample: &SampleTriple, u: &[f64], spec: &LipschitzSpec) -> Result<WBound> {
    let fixed = w_fixed_part(x_now, sample, spec)?;
    let g = gamma(u, &sample.u_held, spec.g_sup())?;
    Ok(WBound::from_parts(fixed, g))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBound {
    pub gronwall_term: f64,
    /// `2L_h·max{‖ẋ + w·1‖₂, ‖ẋ − w·1‖₂}`
    pub dynamics_term: f64,
    pub total: f64,
}

pub fn error_bound(
    dt: f64,
    w: &WBound,
    xdot: &[f64],
    barrier: &BarrierSpec,
    spec: &LipschitzSpec,
) -> Result<ErrorBound> {
    let g = gronwall_term(dt, barrier, spec)?;
    let spread = linalg::shifted_norm(xdot, w.total).max(linalg::shifted_norm(xdot, -w.total));
    let d = 2.0 * barrier.l_h() * spread;
    Ok(ErrorBound {
        gronwall_term: g,
        dynamics_term: d,
        total: g + d,
    })
}

/// `θ(u)·‖x − x′‖₂`, bounding `‖f(x)+g(x)u − f(x′)−g(x′)u‖₂`.
pub fn derivative_deviation_bound(x: &[f64], x_prime: &[f64], u: &[f64], spec: &LipschitzSpec) -> Result<f64> {
    check_dim("state", x.len(), x_prime.len())?;
    Ok(theta(u, spec)? * linalg::dist(x, x_prime))
}
