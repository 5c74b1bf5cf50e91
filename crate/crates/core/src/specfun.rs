//! Bessel functions of the first kind by power series.
//!
//! `J_m` and `I_m` are summed term by term with the factorials folded into the
//! term recurrence, so no factorial is ever formed explicitly. The series is
//! accurate for the moderate arguments used throughout the crate
//! (|z| up to a few tens); there is no asymptotic branch.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::gauss64;

/// Controls truncation of the power series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    /// Summation stops once a term is below this fraction of the partial sum.
    pub truncation_tolerance: f64,
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            truncation_tolerance: 1e-15,
            max_terms: 200,
        }
    }
}

impl SeriesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.truncation_tolerance > 0.0 && self.truncation_tolerance < 1e-6) {
            return Err(Error::InvalidParameters(format!(
                "series truncation tolerance must lie in (0, 1e-6), got {}",
                self.truncation_tolerance
            )));
        }
        if self.max_terms < 30 {
            return Err(Error::InvalidParameters(format!(
                "series max_terms must be at least 30, got {}",
                self.max_terms
            )));
        }
        Ok(())
    }
}

trait SeriesScalar: Copy + Add<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn one() -> Self;
    fn magnitude(self) -> f64;
    fn describe(self) -> String;
}

impl SeriesScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn describe(self) -> String {
        format!("{self}")
    }
}

impl SeriesScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn describe(self) -> String {
        format!("{self}")
    }
}

/// Sums `sum_p s^p / (p! (p+m)!) (z/2)^(2p+m)` with `s = -1` for J and `s = +1` for I.
fn series<T: SeriesScalar>(cfg: &SeriesConfig, m: u32, z: T, sign: f64) -> Result<T> {
    if z.magnitude() == 0.0 {
        return Ok(if m == 0 { T::one() } else { T::zero() });
    }
    let half = z * 0.5;
    let mut term = T::one();
    for k in 1..=m {
        term = term * half * (1.0 / k as f64);
    }
    let q = half * half * sign;
    let q_mag = q.magnitude();
    let mut sum = term;
    let mut largest = term.magnitude();
    for p in 0..cfg.max_terms {
        let pf = p as f64;
        let denom = (pf + 1.0) * (pf + 1.0 + m as f64);
        term = term * q * (1.0 / denom);
        sum = sum + term;
        let t = term.magnitude();
        largest = largest.max(t);
        // Terms decrease monotonically once denom exceeds |z/2|^2.
        if denom > q_mag
            && (t <= cfg.truncation_tolerance * sum.magnitude() || t <= f64::EPSILON * 1e-3 * largest)
        {
            return Ok(sum);
        }
    }
    Err(Error::SeriesNonConvergence {
        order: m,
        argument: z.describe(),
        terms: cfg.max_terms,
    })
}

pub fn bessel_j(m: u32, x: f64) -> Result<f64> {
    bessel_j_with(&SeriesConfig::default(), m, x)
}

pub fn bessel_j_with(cfg: &SeriesConfig, m: u32, x: f64) -> Result<f64> {
    series(cfg, m, x, -1.0)
}

pub fn bessel_i(m: u32, x: f64) -> Result<f64> {
    bessel_i_with(&SeriesConfig::default(), m, x)
}

pub fn bessel_i_with(cfg: &SeriesConfig, m: u32, x: f64) -> Result<f64> {
    series(cfg, m, x, 1.0)
}

pub fn bessel_i_complex(m: u32, z: Complex64) -> Result<Complex64> {
    bessel_i_complex_with(&SeriesConfig::default(), m, z)
}

pub fn bessel_i_complex_with(cfg: &SeriesConfig, m: u32, z: Complex64) -> Result<Complex64> {
    series(cfg, m, z, 1.0)
}

/// `J_m'(x) = (J_{m-1}(x) - J_{m+1}(x)) / 2`, with `J_{-1} = -J_1`.
pub fn bessel_j_prime(m: u32, x: f64) -> Result<f64> {
    let lower = if m == 0 {
        -bessel_j(1, x)?
    } else {
        bessel_j(m - 1, x)?
    };
    Ok(0.5 * (lower - bessel_j(m + 1, x)?))
}

/// `I_m'(x) = (I_{m-1}(x) + I_{m+1}(x)) / 2`, with `I_{-1} = I_1`.
pub fn bessel_i_prime(m: u32, x: f64) -> Result<f64> {
    let lower = if m == 0 { bessel_i(1, x)? } else { bessel_i(m - 1, x)? };
    Ok(0.5 * (lower + bessel_i(m + 1, x)?))
}

pub fn bessel_i_prime_complex(m: u32, z: Complex64) -> Result<Complex64> {
    let lower = if m == 0 {
        bessel_i_complex(1, z)?
    } else {
        bessel_i_complex(m - 1, z)?
    };
    Ok((lower + bessel_i_complex(m + 1, z)?) * 0.5)
}

const SCAN_START: f64 = 0.05;
const SCAN_STEP: f64 = 0.1;
/// Beyond this abscissa cancellation in the J series exceeds 1e-5 absolute.
const SCAN_LIMIT: f64 = 25.0;
const BISECTION_WIDTH: f64 = 1e-13;
const ROOT_RESIDUAL: f64 = 1e-12;

/// `floor(x)` bounds the round-off of `g(x)`; the residual target is the larger
/// of `ROOT_RESIDUAL` and that floor.
fn scan_roots<F, B>(g: F, floor: B, count: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
    B: Fn(f64) -> Result<f64>,
{
    let mut roots = Vec::with_capacity(count);
    if count == 0 {
        return Ok(roots);
    }
    let mut lo = SCAN_START;
    let mut g_lo = g(lo)?;
    while roots.len() < count {
        let hi = lo + SCAN_STEP;
        if hi > SCAN_LIMIT {
            return Err(Error::RootSearch {
                last_abscissa: lo,
                found: roots.len(),
                requested: count,
            });
        }
        let g_hi = g(hi)?;
        if g_lo == 0.0 {
            roots.push(lo);
        } else if g_lo * g_hi < 0.0 {
            let (mut a, mut b, mut ga) = (lo, hi, g_lo);
            while b - a > BISECTION_WIDTH {
                let mid = 0.5 * (a + b);
                let gm = g(mid)?;
                if gm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if ga * gm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    ga = gm;
                }
            }
            let root = 0.5 * (a + b);
            let residual = g(root)?.abs();
            let target = ROOT_RESIDUAL.max(floor(root)?);
            if residual > target {
                return Err(Error::RootRefinement(format!(
                    "residual {residual:e} at {root} exceeds {target:e}"
                )));
            }
            roots.push(root);
        }
        lo = hi;
        g_lo = g_hi;
    }
    Ok(roots)
}

/// First `count` positive roots of `J_m'`, strictly increasing.
///
/// The sum of absolute series terms of `J_m(x)` is `I_m(x)`, so the residual
/// target is relaxed to the round-off floor `16 eps I_m(x)` for large roots.
pub fn jprime_roots(m: u32, count: usize) -> Result<Vec<f64>> {
    scan_roots(
        |x| bessel_j_prime(m, x),
        |x| Ok(16.0 * f64::EPSILON * bessel_i_prime(m, x)?.abs().max(bessel_i(m + 1, x)?)),
        count,
    )
}

/// First `count` positive zeros of `J_m`, strictly increasing.
pub fn j_roots(m: u32, count: usize) -> Result<Vec<f64>> {
    scan_roots(
        |x| bessel_j(m, x),
        |x| Ok(16.0 * f64::EPSILON * bessel_i(m, x)?),
        count,
    )
}

/// Residual of the cross-product identity
/// `z I_{m+1}(z) I_m(z̄) - z̄ I_{m+1}(z̄) I_m(z) = (z² - z̄²) ∫_0^1 u I_m(uz) I_m(uz̄) du`,
/// with the integral evaluated by a 64-point Gauss-Legendre rule.
pub fn bessel_relation_residual(m: u32, z: Complex64) -> Result<f64> {
    let zc = z.conj();
    let lhs = z * bessel_i_complex(m + 1, z)? * bessel_i_complex(m, zc)?
        - zc * bessel_i_complex(m + 1, zc)? * bessel_i_complex(m, z)?;
    let rule = gauss64();
    let mut integral = Complex64::new(0.0, 0.0);
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let u = 0.5 * (t + 1.0);
        let term = bessel_i_complex(m, z * u)? * bessel_i_complex(m, zc * u)? * u;
        integral += term * (0.5 * w);
    }
    let rhs = (z * z - zc * zc) * integral;
    Ok((lhs - rhs).norm())
}
