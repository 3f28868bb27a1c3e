//! Trial harness.
//!
//! Trial `t` of an experiment draws every random quantity from
//! [`TrialStream::new(master_seed, t)`](TrialStream), and all estimators are
//! scored on that one realization. Aggregation is plain counting over trials
//! in index order, so results are identical for any worker count.
//!
//! Adaptive budgets stop at the first trial index at which every estimator has
//! reached `min_errors`, not at a batch boundary, so the reported counts do not
//! depend on how trials were batched either.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{encode_max_index, Message};
use crate::error::{Error, Result};
use crate::estimators::{
    mmie_decode, one_bit_map, one_bit_quantize, rd_compress, Correlator, EstimatorId, OneBitBudget,
};
use crate::signal_model::{decoder_samples, draw_delay, generate_pair, ModelParams};
use crate::streams::{Lane, TrialStream};
use crate::theory::{BoundReport, EpsilonMode};

pub const WILSON_Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialBudget {
    Fixed { trials: u64 },
    Adaptive { min_errors: u64, max_trials: u64 },
}

impl TrialBudget {
    pub const DEFAULT_MIN_ERRORS: u64 = 100;
    pub const DEFAULT_MAX_TRIALS: u64 = 1_000_000;

    pub fn max_trials(&self) -> u64 {
        match *self {
            Self::Fixed { trials } => trials,
            Self::Adaptive { max_trials, .. } => max_trials,
        }
    }
}

impl Default for TrialBudget {
    fn default() -> Self {
        Self::Adaptive {
            min_errors: Self::DEFAULT_MIN_ERRORS,
            max_trials: Self::DEFAULT_MAX_TRIALS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub estimators: Vec<EstimatorId>,
    pub budget: TrialBudget,
    pub master_seed: u64,
    #[serde(default)]
    pub onebit: OneBitBudget,
}

impl ExperimentConfig {
    pub fn new(
        params: ModelParams,
        estimators: Vec<EstimatorId>,
        budget: TrialBudget,
        master_seed: u64,
    ) -> Self {
        Self {
            params,
            estimators,
            budget,
            master_seed,
            onebit: OneBitBudget::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators requested".into()));
        }
        if self.estimators.len() > 8 {
            return Err(Error::Config("too many estimators".into()));
        }
        let mut seen = self.estimators.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.estimators.len() {
            return Err(Error::Config("duplicate estimator".into()));
        }
        if self.estimators.contains(&EstimatorId::OnebitCce)
            && self.onebit == OneBitBudget::Truncated
            && self.params.k < 2
        {
            return Err(Error::Config("one-bit baseline needs k >= 2".into()));
        }
        match self.budget {
            TrialBudget::Fixed { trials: 0 } => {
                Err(Error::Config("trials must be positive".into()))
            }
            TrialBudget::Adaptive { max_trials: 0, .. } => {
                Err(Error::Config("max_trials must be positive".into()))
            }
            TrialBudget::Adaptive { min_errors: 0, .. } => {
                Err(Error::Config("min_errors must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Per-estimator correctness of one trial, in `config.estimators` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub d_true: i64,
    pub correct: Vec<bool>,
}

/// Per-worker scratch state.
#[derive(Default)]
pub struct TrialWorkspace {
    words: Vec<u64>,
    correlator: Correlator,
}

impl TrialWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

pub fn run_trial(config: &ExperimentConfig, trial_index: u64) -> TrialOutcome {
    run_trial_with(config, trial_index, &mut TrialWorkspace::new())
}

pub fn run_trial_with(
    config: &ExperimentConfig,
    trial_index: u64,
    ws: &mut TrialWorkspace,
) -> TrialOutcome {
    let stream = TrialStream::new(config.master_seed, trial_index);
    if config.estimators == [EstimatorId::Mmie] {
        let (d_true, d_hat) = mmie_trial_local(&config.params, &stream, ws);
        return TrialOutcome {
            d_true,
            correct: vec![d_hat == d_true],
        };
    }
    materialized_trial(config, &stream, ws)
}

fn materialized_trial(
    config: &ExperimentConfig,
    stream: &TrialStream,
    ws: &mut TrialWorkspace,
) -> TrialOutcome {
    let p = &config.params;
    let pair = generate_pair(p, stream);
    let x = pair.encoder_window();
    let mut rd_cache: Option<Vec<Complex64>> = None;
    let correct = config
        .estimators
        .iter()
        .map(|&id| {
            let d_hat = match id {
                EstimatorId::Mmie => {
                    let msg = encode_max_index(x).expect("power-of-two window");
                    mmie_decode(&pair.y, &msg, p.d_max)
                        .expect("window covers spread")
                        .d_hat
                }
                EstimatorId::Cce => {
                    ws.correlator
                        .estimate(x, &pair.y, p.d_max, id)
                        .expect("aligned")
                        .d_hat
                }
                EstimatorId::RdCce => {
                    let xh = rd_cache.get_or_insert_with(|| {
                        rd_compress(x, p.k, &mut stream.rng(Lane::RateDistortion))
                    });
                    ws.correlator
                        .estimate(xh, &pair.y, p.d_max, id)
                        .expect("aligned")
                        .d_hat
                }
                EstimatorId::OnebitCce => {
                    let xh = match config.onebit {
                        OneBitBudget::Truncated => one_bit_quantize(x, p.k).expect("k >= 2"),
                        OneBitBudget::FullSequence => one_bit_map(x),
                    };
                    ws.correlator
                        .estimate(&xh, &pair.y, p.d_max, id)
                        .expect("aligned")
                        .d_hat
                }
            };
            d_hat == pair.d_true
        })
        .collect();
    TrialOutcome {
        d_true: pair.d_true,
        correct,
    }
}

/// MMIE trial that only touches what the scheme needs: the `N` encoder
/// magnitudes, then `2 d_max + 1` encoder and noise samples around `J`.
///
/// Samples are addressed by index in the trial stream, so the values equal
/// those of [`generate_pair`] for the same stream. The extremum is located
/// from the magnitude words directly (`|x|^2 = -ln U` is decreasing in `U`).
/// The two routes can disagree only when two encoder magnitudes agree to
/// within floating-point rounding.
pub fn mmie_trial_local(
    params: &ModelParams,
    stream: &TrialStream,
    ws: &mut TrialWorkspace,
) -> (i64, i64) {
    let d_true = draw_delay(params.d_max, stream);
    let msg = locate_extremum(params.k, stream, &mut ws.words);
    let dm = params.d_max as i64;
    let y = decoder_samples(
        params,
        stream,
        d_true,
        msg.index() as i64 - dm,
        2 * dm as usize + 1,
    );
    let est = mmie_decode(&y, &msg, params.d_max).expect("local window covers spread");
    (d_true, est.d_hat)
}

/// Encoder message for the realization in `stream`, found from the `2^k`
/// magnitude words alone. `words` is scratch space.
pub fn locate_extremum(k: u32, stream: &TrialStream, words: &mut Vec<u64>) -> Message {
    words.resize(1usize << k, 0);
    stream.encoder_field().magnitude_words(0, words);
    let mut j = 0usize;
    let mut best = u64::MAX;
    // smaller key -> larger magnitude; strict compare keeps the first maximum
    for (i, &w) in words.iter().enumerate() {
        let key = w >> 11;
        if key < best {
            best = key;
            j = i;
        }
    }
    Message::new(j as u64, k).expect("j < N")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateEstimate {
    pub estimator: EstimatorId,
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ErrorRateEstimate {
    pub fn from_counts(estimator: EstimatorId, errors: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, trials, WILSON_Z95);
        Self {
            estimator,
            trials,
            errors,
            p_hat: if trials == 0 {
                0.0
            } else {
                errors as f64 / trials as f64
            },
            ci_low,
            ci_high,
        }
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Wilson score interval, clamped so that `lo <= p_hat <= hi` in `[0, 1]`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

const FIRST_BATCH: u64 = 1024;
const MAX_BATCH: u64 = 1 << 16;

/// Runs an experiment on the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ErrorRateEstimate>> {
    config.validate()?;
    let n_est = config.estimators.len();
    let max_trials = config.budget.max_trials();
    let min_errors = match config.budget {
        TrialBudget::Adaptive { min_errors, .. } => Some(min_errors),
        TrialBudget::Fixed { .. } => None,
    };

    let mut errors = vec![0u64; n_est];
    let mut done = 0u64;
    let mut batch = FIRST_BATCH;
    'outer: while done < max_trials {
        let end = (done + batch).min(max_trials);
        let masks: Vec<u8> = (done..end)
            .into_par_iter()
            .map_init(TrialWorkspace::new, |ws, t| {
                let out = run_trial_with(config, t, ws);
                out.correct
                    .iter()
                    .enumerate()
                    .fold(0u8, |m, (i, &ok)| if ok { m } else { m | 1 << i })
            })
            .collect();
        for mask in masks {
            for (i, e) in errors.iter_mut().enumerate() {
                *e += u64::from(mask >> i & 1);
            }
            done += 1;
            if let Some(target) = min_errors {
                if errors.iter().all(|&e| e >= target) {
                    break 'outer;
                }
            }
        }
        batch = (batch * 2).min(MAX_BATCH);
    }

    Ok(config
        .estimators
        .iter()
        .zip(&errors)
        .map(|(&id, &e)| ErrorRateEstimate::from_counts(id, e, done))
        .collect())
}

/// Runs an experiment on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(
    config: &ExperimentConfig,
    workers: usize,
) -> Result<Vec<ErrorRateEstimate>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

/// One sweep point: the configuration it ran with, its estimates, and the
/// theoretical bounds when they are defined (`snr > 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub params: ModelParams,
    pub estimates: Vec<ErrorRateEstimate>,
    pub bounds: Option<BoundReport>,
}

impl SweepPoint {
    pub fn estimate(&self, id: EstimatorId) -> Option<&ErrorRateEstimate> {
        self.estimates.iter().find(|e| e.estimator == id)
    }
}

fn run_point(base: &ExperimentConfig, params: ModelParams) -> Result<SweepPoint> {
    let config = ExperimentConfig {
        params,
        ..base.clone()
    };
    let estimates = run_experiment(&config)?;
    let snr = params.snr();
    let bounds = if snr > 0.0 {
        Some(BoundReport::evaluate(
            params.k,
            snr,
            params.d_max,
            EpsilonMode::Zero,
        )?)
    } else {
        None
    };
    Ok(SweepPoint {
        params,
        estimates,
        bounds,
    })
}

pub fn sweep_k(base: &ExperimentConfig, k_values: &[u32]) -> Result<Vec<SweepPoint>> {
    if k_values.is_empty() {
        return Err(Error::Config("empty k sweep".into()));
    }
    k_values
        .iter()
        .map(|&k| {
            let params = ModelParams { k, ..base.params };
            params.validate()?;
            run_point(base, params)
        })
        .collect()
}

pub fn sweep_snr(base: &ExperimentConfig, snr_db_values: &[f64]) -> Result<Vec<SweepPoint>> {
    if snr_db_values.is_empty() {
        return Err(Error::Config("empty SNR sweep".into()));
    }
    snr_db_values
        .iter()
        .map(|&snr_db| {
            let params = ModelParams {
                snr_db,
                ..base.params
            };
            params.validate()?;
            run_point(base, params)
        })
        .collect()
}

fn positive_points(k_values: &[u32], p_hats: &[f64]) -> Result<Vec<(f64, f64)>> {
    if k_values.len() != p_hats.len() {
        return Err(Error::Fit(format!(
            "{} k values but {} probabilities",
            k_values.len(),
            p_hats.len()
        )));
    }
    let pts: Vec<(f64, f64)> = k_values
        .iter()
        .zip(p_hats)
        .filter(|(_, &p)| p > 0.0 && p.is_finite())
        .map(|(&k, &p)| (k as f64, p.log2()))
        .collect();
    if pts.is_empty() {
        return Err(Error::Fit("no positive error probabilities".into()));
    }
    Ok(pts)
}

/// Least-squares `c` in `p ~ c 2^{-k E}` on the log2 scale:
/// `log2 c = mean(log2 p_i + k_i E)`. Zero probabilities are skipped.
pub fn fit_constant(k_values: &[u32], p_hats: &[f64], exponent: f64) -> Result<f64> {
    let pts = positive_points(k_values, p_hats)?;
    let mean = pts.iter().map(|(k, lp)| lp + k * exponent).sum::<f64>() / pts.len() as f64;
    Ok(mean.exp2())
}

/// Ordinary least-squares slope of `log2 p` against `k`.
pub fn fit_log2_slope(k_values: &[u32], p_hats: &[f64]) -> Result<f64> {
    let pts = positive_points(k_values, p_hats)?;
    if pts.len() < 2 {
        return Err(Error::Fit("slope needs two positive points".into()));
    }
    let m = pts.len() as f64;
    let kb = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let lb = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - kb).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all k values equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - kb) * (p.1 - lb)).sum();
    Ok(sxy / sxx)
}
