//! Local bifurcation of traveling waves from the disk at `χ = χ*`.
//!
//! Along the branch `χ(s) = χ* + η s² + o(s²)` with `V(s) = s + o(s)`, so
//! `χ'(0) = 0` and `η = χ''(0)/2`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{chi_star, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// Waves appear for `χ > χ*`.
    Supercritical,
    /// Waves appear for `χ < χ*`.
    Subcritical,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationReport {
    pub chi_star: f64,
    pub chi_pp0: f64,
    pub eta: f64,
    pub classification: Classification,
    #[serde(rename = "Vprime0")]
    pub v_prime0: f64,
}

/// Relative size of `η` below which the branch is called degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// `χ''(0)` and the magnitude of its two contributions, from `f'`, `f''`, `f'''` at `c̃`.
fn second_derivative_from(params: &ModelParams, d1: f64, d2: f64, d3: f64) -> Result<(f64, f64)> {
    if !(d1 > 0.0) {
        return Err(Error::DegenerateForce(format!("f'(c̃) = {d1} is not positive")));
    }
    let r2 = params.r0 * params.r0;
    let pre = -params.a * params.mass * r2 / (2.0 * d1 * d1);
    let cubic = params.mass / (2.0 * PI * r2) * d3;
    Ok((pre * (cubic + d2), (pre * cubic).abs() + (pre * d2).abs()))
}

/// `χ''(0) = -(a M R0² / (2 f'(c̃)²)) ((M / (2π R0²)) f'''(c̃) + f''(c̃))`.
pub fn chi_second_derivative(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let [_, d1, d2, d3] = params.force.derivatives(params.c_tilde());
    Ok(second_derivative_from(params, d1, d2, d3)?.0)
}

/// The same coefficient with `f''` and `f'''` replaced by central differences
/// of `f'` with step `1e-4 c̃`.
pub fn chi_second_derivative_fd(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let c = params.c_tilde();
    let h = 1e-4 * c;
    let (lo, mid, hi) = (params.force.df(c - h), params.force.df(c), params.force.df(c + h));
    let d2 = (hi - lo) / (2.0 * h);
    let d3 = (hi - 2.0 * mid + lo) / (h * h);
    Ok(second_derivative_from(params, mid, d2, d3)?.0)
}

pub fn classify_branch(params: &ModelParams) -> Result<BifurcationReport> {
    params.validate()?;
    let chi_star = chi_star(params)?;
    let [_, d1, d2, d3] = params.force.derivatives(params.c_tilde());
    let (chi_pp0, scale) = second_derivative_from(params, d1, d2, d3)?;
    let eta = 0.5 * chi_pp0;
    let tol = DEGENERACY_TOL * 0.5 * scale;
    let classification = if eta > tol {
        Classification::Supercritical
    } else if eta < -tol {
        Classification::Subcritical
    } else {
        Classification::Degenerate
    };
    Ok(BifurcationReport {
        chi_star,
        chi_pp0,
        eta,
        classification,
        v_prime0: 1.0,
    })
}
