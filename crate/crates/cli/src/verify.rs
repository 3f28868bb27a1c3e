//! Statistical self-tests behind `xtde verify`.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use extremum_tde::signal_model::empirical_rho;
use extremum_tde::streams::Lane;
use extremum_tde::theory::{
    extremum_cdf_exact, harmonic_moments, harmonic_number, truncation_check,
};
use extremum_tde::{
    effective_rho, encode_max_index, generate_pair, generate_raw_pair, rho_sq_mmie, ModelParams,
    RawSensorParams, TrialStream,
};
use serde::Serialize;

/// Below this replicate count the confidence-based checks are not run.
pub const MIN_REPLICATES: u64 = 10_000;
pub const DEFAULT_REPLICATES: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    ExtremumMoments,
    GumbelCdf,
    RhoSqMmie,
    RawEquivalence,
    Truncation,
}

impl Check {
    pub const ALL: [Check; 5] = [
        Check::ExtremumMoments,
        Check::GumbelCdf,
        Check::RhoSqMmie,
        Check::RawEquivalence,
        Check::Truncation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::ExtremumMoments => "extremum_moments",
            Check::GumbelCdf => "gumbel_cdf",
            Check::RhoSqMmie => "rho_sq_mmie",
            Check::RawEquivalence => "raw_equivalence",
            Check::Truncation => "truncation",
        }
    }

    fn stream_offset(self) -> u64 {
        (Self::ALL.iter().position(|&c| c == self).unwrap() as u64) << 40
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Self::ALL.iter().map(|c| c.name()).collect();
                format!("unknown check '{s}' (known: {})", known.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: Check,
    pub status: Status,
    /// Observed deviation; the check passes when it does not exceed `threshold`.
    pub statistic: Option<f64>,
    pub threshold: Option<f64>,
    pub replicates: u64,
}

impl CheckResult {
    fn judged(check: Check, statistic: f64, threshold: f64, replicates: u64) -> Self {
        let status = if statistic <= threshold {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            check,
            status,
            statistic: Some(statistic),
            threshold: Some(threshold),
            replicates,
        }
    }
}

const EXTREMUM_K: u32 = 10;

/// `|x[J]|^2` for `replicates` independent encoder windows.
fn extremum_values(seed: u64, replicates: u64) -> Result<Vec<f64>> {
    let n = 1usize << EXTREMUM_K;
    let offset = Check::ExtremumMoments.stream_offset();
    let mut x = Vec::with_capacity(n);
    (0..replicates)
        .map(|r| {
            x.clear();
            x.extend(
                TrialStream::new(seed, offset + r)
                    .encoder_field()
                    .samples(0, n),
            );
            let msg = encode_max_index(&x[..])?;
            Ok(x[msg.index() as usize].norm_sqr())
        })
        .collect()
}

fn extremum_moments(values: &[f64]) -> CheckResult {
    let m = values.len() as f64;
    let (mean, var) = harmonic_moments(1 << EXTREMUM_K);
    let emp = values.iter().sum::<f64>() / m;
    CheckResult::judged(
        Check::ExtremumMoments,
        (emp - mean).abs(),
        3.0 * (var / m).sqrt(),
        values.len() as u64,
    )
}

/// Kolmogorov distance between the empirical law of `|x[J]|^2 - ln N` and
/// the exact extremum CDF, against the DKW band.
fn gumbel_cdf(values: &[f64]) -> CheckResult {
    let n = 1usize << EXTREMUM_K;
    let ln_n = (n as f64).ln();
    let mut tau: Vec<f64> = values.iter().map(|v| v - ln_n).collect();
    tau.sort_by(f64::total_cmp);
    let m = tau.len() as f64;
    let ks = tau
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = extremum_cdf_exact(t, n);
            ((i + 1) as f64 / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max);
    CheckResult::judged(Check::GumbelCdf, ks, 1.36 / m.sqrt(), tau.len() as u64)
}

/// Mean of `|y[J]|^2 / H(N)` at zero delay against its exact finite-N value
/// `|rho|^2 + (1 - |rho|^2) / H(N)`.
fn rho_sq_check(seed: u64, replicates: u64) -> Result<CheckResult> {
    let params = ModelParams::new(20.0, 0, 10)?;
    let offset = Check::RhoSqMmie.stream_offset();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for r in 0..replicates {
        let pair = generate_pair(&params, &TrialStream::new(seed, offset + r));
        let msg = encode_max_index(pair.encoder_window())?;
        let y = pair
            .y
            .get(msg.index() as i64)
            .expect("zero spread covers J");
        let v = rho_sq_mmie(y, params.n());
        sum += v;
        sum_sq += v * v;
    }
    let m = replicates as f64;
    let mean = sum / m;
    let var = (sum_sq - m * mean * mean) / (m - 1.0);
    let expected = params.rho_sq() + params.rho_bar_sq() / harmonic_number(params.n());
    Ok(CheckResult::judged(
        Check::RhoSqMmie,
        (mean - expected).abs(),
        4.0 * (var / m).sqrt(),
        replicates,
    ))
}

/// Largest distance between the empirical and analytic `rho` of the
/// normalized pair over three sensor settings, against `5 / sqrt(M)`.
fn raw_equivalence(seed: u64, replicates: u64) -> Result<CheckResult> {
    let settings = [
        RawSensorParams::new(1.0, 0.0, 1.0, 1.0)?,
        RawSensorParams::new(0.5, 1.0, 0.2, 0.3)?,
        RawSensorParams::new(2.0, 4.0, 0.1, 2.5)?,
    ];
    let offset = Check::RawEquivalence.stream_offset();
    let mut worst: f64 = 0.0;
    for (i, raw) in settings.iter().enumerate() {
        let mut rng = TrialStream::new(seed, offset + i as u64).rng(Lane::Auxiliary);
        let pair = generate_raw_pair(raw, 10, replicates as usize, &mut rng);
        worst = worst.max((empirical_rho(raw, &pair) - effective_rho(raw)).norm());
    }
    Ok(CheckResult::judged(
        Check::RawEquivalence,
        worst,
        5.0 / (replicates as f64).sqrt(),
        replicates,
    ))
}

/// Truncation inequality on the full grid. The statistic is the largest
/// shortfall `rhs - lhs - slack`, which must not be positive.
fn truncation(seed: u64, replicates: u64) -> Result<CheckResult> {
    let offset = Check::Truncation.stream_offset();
    let mut worst = f64::NEG_INFINITY;
    let mut cell = 0u64;
    for rho_sq in [0.5, 0.9, 0.99] {
        for v_max in [1.0, 2.0, 3.0] {
            for a in [0.5, 1.0, 2.0, 3.0] {
                let mut rng = TrialStream::new(seed, offset + cell).rng(Lane::Auxiliary);
                let c = truncation_check(rho_sq, v_max, a, replicates as usize, &mut rng)?;
                worst = worst.max(c.rhs - c.lhs - c.slack);
                cell += 1;
            }
        }
    }
    Ok(CheckResult::judged(
        Check::Truncation,
        worst,
        0.0,
        replicates,
    ))
}

pub fn run(checks: &[Check], replicates: u64, seed: u64) -> Result<Vec<CheckResult>> {
    if replicates < 2 {
        bail!("need at least 2 replicates");
    }
    if replicates < MIN_REPLICATES {
        return Ok(checks
            .iter()
            .map(|&check| CheckResult {
                check,
                status: Status::Inconclusive,
                statistic: None,
                threshold: None,
                replicates,
            })
            .collect());
    }
    let needs_extremum = checks
        .iter()
        .any(|c| matches!(c, Check::ExtremumMoments | Check::GumbelCdf));
    let values = if needs_extremum {
        extremum_values(seed, replicates)?
    } else {
        Vec::new()
    };
    checks
        .iter()
        .map(|&c| match c {
            Check::ExtremumMoments => Ok(extremum_moments(&values)),
            Check::GumbelCdf => Ok(gumbel_cdf(&values)),
            Check::RhoSqMmie => rho_sq_check(seed, replicates),
            Check::RawEquivalence => raw_equivalence(seed, replicates),
            Check::Truncation => truncation(seed, replicates),
        })
        .collect()
}
