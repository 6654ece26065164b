//! Closed-form rates of asymptotic regularity.
//!
//! With `b` bounding `‖x₀‖` and `‖x₀ − p‖`, `a` the uniform lower bound of the
//! weights, `θ` the rate of divergence and `γ` the Cauchy modulus:
//!
//! ```text
//! Δ(ε, m) = θ(m + ⌈b²/ε²⌉)
//! Φ(ε)    = θ(γ(ε/6b) + ⌈4b²/ε²⌉ + 1)
//! h(ε)    = ε + √((1 − a)/a)·√(ε² + 2bε)
//! P(ε)    = min{ε/2, √(aε²/(4(1 − a)) + b²) − b}
//! Φ′(ε)   = Φ(P(ε))
//! Φ″(ε)   = Φ′((1 − k)ε)
//! ```
//!
//! Every ceiling is taken on exact rationals. `P` is irrational in general, so
//! the rational fed into `Φ` is a certified lower bound of the true `P`; a
//! smaller argument can only enlarge `Φ`, so the certificate stays sound.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::exact;
use crate::schedules::{Gamma, ScheduleError, Theta};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("epsilon must be positive and finite, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("mixing bound a = {0} must lie in (0, 1]")]
    InvalidA(f64),
    #[error("bound b = {0} must be positive and finite")]
    InvalidB(f64),
    #[error("strictness constant k = {0} must lie in [0, 1)")]
    InvalidK(f64),
    #[error("rate value overflows u64")]
    Overflow,
    #[error("threshold P underflowed to zero")]
    Degenerate,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

fn positive_rational(eps: f64) -> Result<BigRational, RateError> {
    match exact::rational(eps) {
        Some(r) if exact::is_positive(&r) => Ok(r),
        _ => Err(RateError::NonPositiveEpsilon(eps)),
    }
}

fn check_b(b: f64) -> Result<BigRational, RateError> {
    match exact::rational(b) {
        Some(r) if exact::is_positive(&r) => Ok(r),
        _ => Err(RateError::InvalidB(b)),
    }
}

fn check_a(a: f64) -> Result<(), RateError> {
    if a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(RateError::InvalidA(a))
    }
}

fn check_k(k: f64) -> Result<(), RateError> {
    if (0.0..1.0).contains(&k) {
        Ok(())
    } else {
        Err(RateError::InvalidK(k))
    }
}

/// `⌈c·b²/ε²⌉`.
fn ceil_ratio_sq(c: u64, b: &BigRational, eps: &BigRational) -> Result<u64, RateError> {
    if eps.is_zero() {
        return Err(RateError::Degenerate);
    }
    let q = exact::integer(c) * b * b / (eps * eps);
    exact::ceil_u64(&q).ok_or(RateError::Overflow)
}

fn add(x: u64, y: u64) -> Result<u64, RateError> {
    x.checked_add(y).ok_or(RateError::Overflow)
}

pub fn delta_exact(b: &BigRational, theta: &Theta, eps: &BigRational, m: u64) -> Result<u64, RateError> {
    let arg = add(m, ceil_ratio_sq(1, b, eps)?)?;
    Ok(theta.eval(arg)?)
}

pub fn phi_exact(b: &BigRational, theta: &Theta, gamma: &Gamma, eps: &BigRational) -> Result<u64, RateError> {
    let g = gamma.eval(&(eps / (exact::integer(6) * b)))?;
    let arg = add(add(g, ceil_ratio_sq(4, b, eps)?)?, 1)?;
    Ok(theta.eval(arg)?)
}

/// Modulus of liminf `Δ(ε, m) = θ(m + ⌈b²/ε²⌉)`.
pub fn delta(b: f64, theta: &Theta, eps: f64, m: u64) -> Result<u64, RateError> {
    delta_exact(&check_b(b)?, theta, &positive_rational(eps)?, m)
}

/// Rate of `A_n`-asymptotic regularity `Φ(ε) = θ(γ(ε/6b) + ⌈4b²/ε²⌉ + 1)`.
pub fn phi(b: f64, theta: &Theta, gamma: &Gamma, eps: f64) -> Result<u64, RateError> {
    phi_exact(&check_b(b)?, theta, gamma, &positive_rational(eps)?)
}

/// `h_{a,b}(ε) = ε + √((1 − a)/a)·√(ε² + 2bε)`, with `h(0) = 0`.
pub fn h(a: f64, b: f64, eps: f64) -> Result<f64, RateError> {
    check_a(a)?;
    check_b(b)?;
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(RateError::NonPositiveEpsilon(eps));
    }
    Ok(eps + ((1.0 - a) / a).sqrt() * (eps * eps + 2.0 * b * eps).sqrt())
}

/// `aε²/(4(1 − a))`, the constant term of the quadratic whose positive root
/// is the second branch of `P`. Requires `a < 1`.
fn quadratic_rhs(a: f64, eps: f64) -> f64 {
    a * eps * eps / (4.0 * (1.0 - a))
}

/// `√(x + b²) − b` in the cancellation-free form `x/(√(x + b²) + b)`.
fn positive_root(x: f64, b: f64) -> f64 {
    x / ((x + b * b).sqrt() + b)
}

/// `P_{a,b}(ε) = min{ε/2, √(aε²/(4(1 − a)) + b²) − b}`, and `ε/2` when `a = 1`.
pub fn p_threshold(a: f64, b: f64, eps: f64) -> Result<f64, RateError> {
    check_a(a)?;
    check_b(b)?;
    positive_rational(eps)?;
    if a == 1.0 {
        return Ok(eps / 2.0);
    }
    Ok((eps / 2.0).min(positive_root(quadratic_rhs(a, eps), b)))
}

/// A rational `q ≤ P_{a,b}(ε)`, within a few ulps of it.
///
/// For `q ≥ 0`, `q` lies below the positive root of `X² + 2bX − c` exactly
/// when `q² + 2bq ≤ c`, which is decided on rationals.
pub fn p_threshold_lower(a: f64, b: f64, eps: f64) -> Result<BigRational, RateError> {
    check_a(a)?;
    let br = check_b(b)?;
    let er = positive_rational(eps)?;
    let half = &er / exact::integer(2);
    if a == 1.0 {
        return Ok(half);
    }
    let ar = exact::rational(a).unwrap();
    let c = &ar * &er * &er / (exact::integer(4) * (exact::one() - &ar));
    let mut x = positive_root(quadratic_rhs(a, eps), b);
    loop {
        if !(x > 0.0) {
            return Err(RateError::Degenerate);
        }
        let q = exact::rational(x).unwrap();
        if &q * &q + exact::integer(2) * &br * &q <= c {
            return Ok(if q < half { q } else { half });
        }
        x = x.next_down();
    }
}

/// Rate of `T_i`-asymptotic regularity for nonexpansive families,
/// `Φ′(ε) = Φ(P(ε))`.
pub fn phi_prime(a: f64, b: f64, theta: &Theta, gamma: &Gamma, eps: f64) -> Result<u64, RateError> {
    let p = p_threshold_lower(a, b, eps)?;
    phi_exact(&check_b(b)?, theta, gamma, &p)
}

/// Rate of `T_i`-asymptotic regularity for k-strict pseudocontractions,
/// `Φ″(ε) = Φ′((1 − k)ε)`.
pub fn phi_double_prime(a: f64, b: f64, k: f64, theta: &Theta, gamma: &Gamma, eps: f64) -> Result<u64, RateError> {
    check_k(k)?;
    let er = positive_rational(eps)?;
    let scaled = (exact::one() - exact::rational(k).unwrap()) * er;
    // (1 − k)ε is generally not a double; bound it from below first
    let scaled_f = exact::floor_f64(&scaled);
    phi_prime(a, b, theta, gamma, scaled_f)
}

/// `1 − 1/(θ(1) + 1)`: every admissible `k` lies at or below this.
pub fn k_ceiling(theta: &Theta) -> Result<f64, RateError> {
    let t1 = theta.eval(1)?;
    Ok(1.0 - 1.0 / (t1 as f64 + 1.0))
}

/// Parameters shared by all rates of one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateInputs {
    pub a: f64,
    pub b: f64,
    pub k: f64,
    pub theta: Theta,
    pub gamma: Gamma,
}

/// All rates at one `ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub eps: f64,
    pub m: u64,
    pub delta: u64,
    pub phi: u64,
    pub p_threshold: f64,
    pub h_at_p: f64,
    pub phi_prime: u64,
    pub phi_double_prime: u64,
}

impl RateInputs {
    pub fn new(a: f64, b: f64, k: f64, theta: Theta, gamma: Gamma) -> Result<Self, RateError> {
        check_a(a)?;
        check_b(b)?;
        check_k(k)?;
        Ok(RateInputs { a, b, k, theta, gamma })
    }

    pub fn delta(&self, eps: f64, m: u64) -> Result<u64, RateError> {
        delta(self.b, &self.theta, eps, m)
    }

    pub fn phi(&self, eps: f64) -> Result<u64, RateError> {
        phi(self.b, &self.theta, &self.gamma, eps)
    }

    pub fn phi_prime(&self, eps: f64) -> Result<u64, RateError> {
        phi_prime(self.a, self.b, &self.theta, &self.gamma, eps)
    }

    pub fn phi_double_prime(&self, eps: f64) -> Result<u64, RateError> {
        phi_double_prime(self.a, self.b, self.k, &self.theta, &self.gamma, eps)
    }

    pub fn k_ceiling(&self) -> Result<f64, RateError> {
        k_ceiling(&self.theta)
    }

    pub fn row(&self, eps: f64, m: u64) -> Result<RateRow, RateError> {
        let p = p_threshold(self.a, self.b, eps)?;
        Ok(RateRow {
            eps,
            m,
            delta: self.delta(eps, m)?,
            phi: self.phi(eps)?,
            p_threshold: p,
            h_at_p: h(self.a, self.b, p)?,
            phi_prime: self.phi_prime(eps)?,
            phi_double_prime: self.phi_double_prime(eps)?,
        })
    }
}
