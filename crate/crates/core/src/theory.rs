//! Closed-form results: error-probability bounds and exponent, the exact law of
//! the encoder's extremum, harmonic moments, and a Monte Carlo check of the
//! truncation inequality used in the lower bound.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::streams::sample_ccn;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `H(N) = sum_{n=1}^N 1/n`, summed from the small terms up.
pub fn harmonic_number(n: usize) -> f64 {
    (1..=n).rev().map(|i| 1.0 / i as f64).sum()
}

/// Mean and variance of `max_{n<N} |x[n]|^2` for i.i.d. unit-rate exponential
/// magnitudes: `(H(N), sum 1/n^2)`.
pub fn harmonic_moments(n: usize) -> (f64, f64) {
    let var = (1..=n).rev().map(|i| 1.0 / (i as f64 * i as f64)).sum();
    (harmonic_number(n), var)
}

pub fn harmonic_asymptotic(n: usize) -> f64 {
    (n as f64).ln() + EULER_GAMMA
}

/// `E(snr) = snr / (2 + snr)`.
pub fn error_exponent(snr: f64) -> Result<f64> {
    if snr.is_nan() || snr <= 0.0 {
        return domain(format!("error exponent needs snr > 0, got {snr}"));
    }
    if snr.is_infinite() {
        return Ok(1.0);
    }
    Ok(snr / (2.0 + snr))
}

/// Same exponent written in terms of `|rho|^2`.
pub fn error_exponent_from_rho_sq(rho_sq: f64) -> f64 {
    rho_sq / (2.0 - rho_sq)
}

/// Choice of the vanishing term `eps(k)` in the bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMode {
    #[default]
    Zero,
    /// `eps(k) = delta(k) / log N` with `delta(k) = ln(k ln 2)`.
    DeltaOverLogN,
}

/// `delta(k) = ln(ln N) = ln(k ln 2)`.
pub fn delta(k: u32) -> f64 {
    (k as f64 * LN_2).ln()
}

pub fn epsilon(k: u32, mode: EpsilonMode) -> f64 {
    match mode {
        EpsilonMode::Zero => 0.0,
        EpsilonMode::DeltaOverLogN => delta(k) / (k as f64 * LN_2),
    }
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        return domain("bounds need k >= 1");
    }
    Ok(())
}

/// `2 d_max (1 + snr) / (2 + snr)`.
pub fn upper_prefactor(snr: f64, d_max: u32) -> Result<f64> {
    error_exponent(snr)?;
    let ratio = if snr.is_infinite() {
        1.0
    } else {
        (1.0 + snr) / (2.0 + snr)
    };
    Ok(2.0 * d_max as f64 * ratio)
}

/// `2 d_max (1+snr)/(2+snr) * 2^{-k E(snr) (1 - eps(k))}`.
pub fn upper_bound(k: u32, snr: f64, d_max: u32, mode: EpsilonMode) -> Result<f64> {
    check_k(k)?;
    let e = error_exponent(snr)?;
    let pre = upper_prefactor(snr, d_max)?;
    Ok(pre * (-(k as f64) * e * (1.0 - epsilon(k, mode))).exp2())
}

/// `2^{-k E(snr) (1 + eps(k))}`.
pub fn lower_bound(k: u32, snr: f64, mode: EpsilonMode) -> Result<f64> {
    check_k(k)?;
    let e = error_exponent(snr)?;
    Ok((-(k as f64) * e * (1.0 + epsilon(k, mode))).exp2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub k: u32,
    /// Linear SNR.
    pub snr: f64,
    pub d_max: u32,
    pub exponent: f64,
    pub upper: f64,
    pub upper_clamped: f64,
    pub lower: f64,
    pub epsilon_mode: EpsilonMode,
}

impl BoundReport {
    pub fn evaluate(k: u32, snr: f64, d_max: u32, mode: EpsilonMode) -> Result<Self> {
        let upper = upper_bound(k, snr, d_max, mode)?;
        Ok(Self {
            k,
            snr,
            d_max,
            exponent: error_exponent(snr)?,
            upper,
            upper_clamped: upper.min(1.0),
            lower: lower_bound(k, snr, mode)?,
            epsilon_mode: mode,
        })
    }
}

/// `P(max |x|^2 < ln N + tau) = (1 - e^{-tau}/N)^N`, exactly, for `N` i.i.d.
/// unit-rate exponentials.
pub fn extremum_cdf_exact(tau: f64, n: usize) -> f64 {
    let q = (-tau).exp() / n as f64;
    if q >= 1.0 {
        return 0.0;
    }
    (n as f64 * (-q).ln_1p()).exp()
}

/// Gumbel limit `exp(-exp(-tau))`.
pub fn extremum_cdf_limit(tau: f64) -> f64 {
    (-(-tau).exp()).exp()
}

/// Result of one Monte Carlo check of
/// `P(|rho u + rho_bar z| > a) >= P(|v| > a) - 2 V e^{-V^2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Allowance for Monte Carlo error on `lhs`.
    pub slack: f64,
    pub holds: bool,
}

/// `u = min(|v|, V) v / |v|` with `v, z` independent unit circular normals.
/// `P(|v| > a) = e^{-a^2}` is used in closed form on the right-hand side.
pub fn truncation_check<R: Rng + ?Sized>(
    rho_sq: f64,
    v_max: f64,
    a: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<TruncationCheck> {
    if v_max.is_nan() || v_max <= std::f64::consts::FRAC_1_SQRT_2 {
        return domain(format!(
            "truncation level must exceed 1/sqrt(2), got {v_max}"
        ));
    }
    if a.is_nan() || a <= 0.0 {
        return domain(format!("threshold must be positive, got {a}"));
    }
    if !(0.0..=1.0).contains(&rho_sq) {
        return domain(format!("rho^2 must lie in [0, 1], got {rho_sq}"));
    }
    if n_samples == 0 {
        return domain("no samples");
    }
    let rho = rho_sq.sqrt();
    let rho_bar = (1.0 - rho_sq).sqrt();
    let a_sq = a * a;
    let mut hits = 0u64;
    for _ in 0..n_samples {
        let v = sample_ccn(rng);
        let z = sample_ccn(rng);
        let mag = v.norm();
        let u = if mag > v_max { v * (v_max / mag) } else { v };
        let s: Complex64 = u * rho + z * rho_bar;
        if s.norm_sqr() > a_sq {
            hits += 1;
        }
    }
    let m = n_samples as f64;
    let lhs = hits as f64 / m;
    let rhs = (-a_sq).exp() - 2.0 * v_max * (-v_max * v_max).exp();
    // 4 sigma, with a floor so lhs == 0 still gets a nonzero allowance
    let slack = 4.0 * (lhs.max(1.0 / m) * (1.0 - lhs).max(1.0 / m) / m).sqrt();
    Ok(TruncationCheck {
        lhs,
        rhs,
        slack,
        holds: lhs >= rhs - slack,
    })
}
