//! Delay estimators.
//!
//! * [`mmie_decode`]: argmax of `|y[J + l]|^2` over the delay spread, given the
//!   encoder's extremum index `J`. Reads exactly `2 d_max + 1` decoder samples.
//! * [`cce`]: the classical cross-correlation estimator, evaluated directly.
//!   [`Correlator`] computes the same decision through FFTs.
//! * [`rd_compress`] and [`one_bit_quantize`]: the two compression front-ends
//!   whose output replaces `x` in the cross-correlator for the baselines.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::codec::Message;
use crate::error::{invalid, Error, Result};
use crate::samples::Samples;
use crate::theory::harmonic_number;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    Mmie,
    Cce,
    RdCce,
    OnebitCce,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 4] = [Self::Mmie, Self::Cce, Self::RdCce, Self::OnebitCce];

    /// Tag used in CSV/JSON output.
    pub fn tag(self) -> &'static str {
        match self {
            Self::Mmie => "mmie",
            Self::Cce => "cce",
            Self::RdCce => "rd_cce",
            Self::OnebitCce => "onebit_cce",
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.tag() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown estimator '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayEstimate {
    pub d_hat: i64,
    pub estimator: EstimatorId,
    /// Objective over `l = -d_max..=d_max`, when the estimator keeps it.
    pub profile: Option<Vec<f64>>,
}

/// Index of the first maximum. NaN entries never win.
pub fn argmax_first<I: IntoIterator<Item = f64>>(values: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            None if !v.is_nan() => best = Some((i, v)),
            Some((_, b)) if v > b => best = Some((i, v)),
            _ => {}
        }
    }
    best.map(|(i, _)| i)
}

fn check_decoder_window<S: Samples + ?Sized>(y: &S, j: i64, d_max: u32) -> Result<()> {
    let d = d_max as i64;
    if !y.covers(j - d, j + d) {
        return invalid(format!(
            "decoder window [{}, {}) does not cover [{}, {}]",
            y.first_index(),
            y.end_index(),
            j - d,
            j + d
        ));
    }
    Ok(())
}

/// Maximum-magnitude-index estimator.
pub fn mmie_decode<S: Samples + ?Sized>(y: &S, msg: &Message, d_max: u32) -> Result<DelayEstimate> {
    let j = msg.index() as i64;
    check_decoder_window(y, j, d_max)?;
    let d = d_max as i64;
    let i = argmax_first((-d..=d).map(|l| y.sample(j + l).norm_sqr())).unwrap_or(0);
    Ok(DelayEstimate {
        d_hat: i as i64 - d,
        estimator: EstimatorId::Mmie,
        profile: None,
    })
}

/// `|y[J]|^2 / H(N)`: estimate of `|rho|^2` at zero lag.
pub fn rho_sq_mmie(y_at_j: Complex64, n: usize) -> f64 {
    y_at_j.norm_sqr() / harmonic_number(n)
}

/// `|y[J + l]|^2 / H(N)` for every lag in the spread.
pub fn rho_sq_profile<S: Samples + ?Sized>(
    y: &S,
    msg: &Message,
    d_max: u32,
    n: usize,
) -> Result<Vec<f64>> {
    let j = msg.index() as i64;
    check_decoder_window(y, j, d_max)?;
    let h = harmonic_number(n);
    let d = d_max as i64;
    Ok((-d..=d).map(|l| y.sample(j + l).norm_sqr() / h).collect())
}

fn check_cce_inputs<X, Y>(x_hat: &X, y: &Y, d_max: u32) -> Result<usize>
where
    X: Samples + ?Sized,
    Y: Samples + ?Sized,
{
    let len = x_hat.len();
    if len == 0 {
        return invalid("empty x_hat");
    }
    if x_hat.first_index() != 0 {
        return invalid("x_hat must be aligned to encoder index 0");
    }
    let d = d_max as i64;
    if !y.covers(-d, len as i64 - 1 + d) {
        return invalid(format!(
            "x_hat of length {len} needs decoder samples on [{}, {}], window is [{}, {})",
            -d,
            len as i64 - 1 + d,
            y.first_index(),
            y.end_index()
        ));
    }
    Ok(len)
}

/// Direct cross-correlation estimator:
/// `argmax_l |(1/L) sum_n x_hat[n] conj(y[n + l])|^2` with `L = len(x_hat)`.
pub fn cce<X, Y>(x_hat: &X, y: &Y, d_max: u32) -> Result<DelayEstimate>
where
    X: Samples + ?Sized,
    Y: Samples + ?Sized,
{
    let len = check_cce_inputs(x_hat, y, d_max)?;
    let d = d_max as i64;
    let inv = 1.0 / len as f64;
    let profile: Vec<f64> = (-d..=d)
        .map(|l| {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..len as i64 {
                acc += x_hat.sample(n) * y.sample(n + l).conj();
            }
            (acc * inv).norm_sqr()
        })
        .collect();
    let i = argmax_first(profile.iter().copied()).unwrap_or(0);
    Ok(DelayEstimate {
        d_hat: i as i64 - d,
        estimator: EstimatorId::Cce,
        profile: Some(profile),
    })
}

/// Smallest `2^a 3^b 5^c` that is at least `n`.
fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

type FftPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

/// Cross-correlation estimator with reusable FFT plans and buffers.
///
/// Short `x_hat` (the one-bit baseline sends a handful of samples) goes
/// through the direct sum; long inputs use zero-padded FFTs of a 5-smooth
/// length `>= len + 2 d_max`, for which circular and linear correlation agree
/// on every lag in the spread.
pub struct Correlator {
    planner: FftPlanner<f64>,
    /// Size with its forward and inverse plans.
    plans: Option<(usize, FftPair)>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Default for Correlator {
    fn default() -> Self {
        Self::new()
    }
}

impl Correlator {
    const DIRECT_MAX_LEN: usize = 64;

    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
            plans: None,
            a: Vec::new(),
            b: Vec::new(),
            scratch: Vec::new(),
        }
    }

    pub fn estimate<Y: Samples + ?Sized>(
        &mut self,
        x_hat: &[Complex64],
        y: &Y,
        d_max: u32,
        estimator: EstimatorId,
    ) -> Result<DelayEstimate> {
        if x_hat.len() <= Self::DIRECT_MAX_LEN {
            let mut est = cce(x_hat, y, d_max)?;
            est.estimator = estimator;
            return Ok(est);
        }
        let profile = self.profile_fft(x_hat, y, d_max)?;
        let i = argmax_first(profile.iter().copied()).unwrap_or(0);
        Ok(DelayEstimate {
            d_hat: i as i64 - d_max as i64,
            estimator,
            profile: Some(profile),
        })
    }

    /// Same objective as [`cce`], up to floating-point rounding.
    pub fn profile_fft<Y: Samples + ?Sized>(
        &mut self,
        x_hat: &[Complex64],
        y: &Y,
        d_max: u32,
    ) -> Result<Vec<f64>> {
        let len = check_cce_inputs(x_hat, y, d_max)?;
        let d = d_max as i64;
        let span = len + 2 * d_max as usize;
        let size = next_smooth(span);
        let (fwd, inv) = match &self.plans {
            Some((s, (f, i))) if *s == size => (f.clone(), i.clone()),
            _ => {
                let f = self.planner.plan_fft_forward(size);
                let i = self.planner.plan_fft_inverse(size);
                self.plans = Some((size, (f.clone(), i.clone())));
                (f, i)
            }
        };
        let zero = Complex64::new(0.0, 0.0);
        self.a.clear();
        self.a.extend_from_slice(x_hat);
        self.a.resize(size, zero);
        self.b.clear();
        self.b.extend((-d..len as i64 + d).map(|n| y.sample(n)));
        self.b.resize(size, zero);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        self.scratch.resize(scratch_len, zero);

        fwd.process_with_scratch(&mut self.a, &mut self.scratch);
        fwd.process_with_scratch(&mut self.b, &mut self.scratch);
        for (a, b) in self.a.iter_mut().zip(&self.b) {
            *a = a.conj() * b;
        }
        inv.process_with_scratch(&mut self.a, &mut self.scratch);
        // a[s] = conj(sum_n x_hat[n] conj(y[n + s - d])) * size
        let norm = 1.0 / (size as f64 * len as f64);
        Ok(self.a[..2 * d_max as usize + 1]
            .iter()
            .map(|c| (c * norm).norm_sqr())
            .collect())
    }
}

/// Distortion `D = sigma^2 2^{-2R}` of a real Gaussian source with variance
/// `sigma^2 = 1/2` coded at `R` bits per sample.
pub fn rd_distortion(rate_bits_per_real: f64) -> f64 {
    0.5 * (-2.0 * rate_bits_per_real).exp2()
}

/// Forward test channel at `rate` bits per real dimension, applied to the
/// real and imaginary parts independently:
/// `x_hat = (1 - D/sigma^2) x + v`, `v ~ N(0, D (1 - D/sigma^2))`.
pub fn rd_test_channel<R: Rng + ?Sized>(
    x: &[Complex64],
    rate_bits_per_real: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let sigma_sq = 0.5;
    let dist = rd_distortion(rate_bits_per_real);
    let gain = 1.0 - dist / sigma_sq;
    let sd = (dist * gain).max(0.0).sqrt();
    x.iter()
        .map(|s| {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            Complex64::new(gain * s.re + sd * re, gain * s.im + sd * im)
        })
        .collect()
}

/// Rate-distortion benchmark: `k` bits over `N` complex samples, `k/2` to each
/// of the real and imaginary sequences, i.e. `R = k / (2N)` per real sample.
pub fn rd_compress<R: Rng + ?Sized>(x: &[Complex64], k: u32, rng: &mut R) -> Vec<Complex64> {
    let rate = if x.is_empty() {
        0.0
    } else {
        k as f64 / (2.0 * x.len() as f64)
    };
    rd_test_channel(x, rate, rng)
}

/// How the one-bit baseline spends its bit budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneBitBudget {
    /// First `floor(k/2)` samples, two bits each: exactly within budget.
    #[default]
    Truncated,
    /// Every encoder sample (`2N` bits). Ignores the budget; reference only.
    FullSequence,
}

#[inline]
fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn one_bit_map(x: &[Complex64]) -> Vec<Complex64> {
    x.iter()
        .map(|s| Complex64::new(sign(s.re), sign(s.im)))
        .collect()
}

/// `sign(Re x) + j sign(Im x)` for the first `floor(budget_k / 2)` samples.
pub fn one_bit_quantize(x: &[Complex64], budget_k: u32) -> Result<Vec<Complex64>> {
    if budget_k < 2 {
        return invalid(format!(
            "one-bit baseline needs at least 2 bits, got {budget_k}"
        ));
    }
    let keep = (budget_k as usize / 2).min(x.len());
    Ok(one_bit_map(&x[..keep]))
}
