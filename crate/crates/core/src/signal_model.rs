//! Two-sensor observation model.
//!
//! The normalized model pairs an encoder sequence `x[n]` with a decoder
//! sequence `y[n] = rho * x[n - d] + rho_bar * z[n]`, where `x` and `z` are
//! independent white unit-variance circular complex normal processes and `d`
//! is uniform on `{-d_max, ..., d_max}`. The raw model (attenuation, phase
//! rotation, arbitrary noise variances at each sensor) reduces to it after
//! variance normalization; [`effective_rho`] gives the equivalent `rho`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::samples::Window;
use crate::streams::{sample_ccn, Lane, TrialStream};

/// Largest supported message size; `N = 2^k` samples are held in memory.
pub const MAX_K: u32 = 30;

/// Returns `(|rho|^2, 1 - |rho|^2)` for an SNR given in dB.
pub fn rho_from_snr(snr_db: f64) -> (f64, f64) {
    let snr = 10f64.powf(snr_db / 10.0);
    let rho_sq = 1.0 / (1.0 + 1.0 / snr);
    (rho_sq, 1.0 - rho_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// SNR in dB. `+inf` is the noiseless model, `-inf` is `rho = 0`.
    pub snr_db: f64,
    pub d_max: u32,
    /// Message size in bits; the encoder window holds `2^k` samples.
    pub k: u32,
    /// Phase of `rho` in radians.
    pub theta: f64,
}

impl ModelParams {
    pub fn new(snr_db: f64, d_max: u32, k: u32) -> Result<Self> {
        let p = Self {
            snr_db,
            d_max,
            k,
            theta: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        self.theta = theta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() {
            return invalid("snr_db is NaN");
        }
        if self.k == 0 || self.k > MAX_K {
            return invalid(format!("k must be in 1..={MAX_K}, got {}", self.k));
        }
        if !(self.theta.is_finite() && (0.0..TAU).contains(&self.theta)) {
            return invalid(format!("theta must be in [0, 2pi), got {}", self.theta));
        }
        if self.d_max > 1 << 24 {
            return invalid(format!("d_max {} is unreasonably large", self.d_max));
        }
        Ok(())
    }

    /// Encoder window length `N = 2^k`.
    pub fn n(&self) -> usize {
        1usize << self.k
    }

    /// Linear SNR, `|rho|^2 / (1 - |rho|^2)`.
    pub fn snr(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn rho_sq(&self) -> f64 {
        rho_from_snr(self.snr_db).0
    }

    pub fn rho_bar_sq(&self) -> f64 {
        rho_from_snr(self.snr_db).1
    }

    pub fn rho(&self) -> Complex64 {
        Complex64::from_polar(self.rho_sq().sqrt(), self.theta)
    }

    /// `|D| = 2 d_max + 1`.
    pub fn delay_spread_len(&self) -> usize {
        2 * self.d_max as usize + 1
    }

    pub(crate) fn mixer(&self) -> DecoderMix {
        let (rho_sq, rho_bar_sq) = rho_from_snr(self.snr_db);
        DecoderMix {
            rho_abs: rho_sq.sqrt(),
            rho_bar: rho_bar_sq.sqrt(),
            rotation: (self.theta != 0.0).then(|| Complex64::from_polar(1.0, self.theta)),
        }
    }
}

/// Builds decoder samples from an encoder sample and a unit noise draw `w`.
///
/// The output is `e^{j theta} (|rho| x + rho_bar w)`, which is the model with
/// noise `z = e^{j theta} w`. Since `w` is circular, `z` is again white unit
/// circular normal, and every magnitude statistic is pathwise free of `theta`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DecoderMix {
    rho_abs: f64,
    rho_bar: f64,
    rotation: Option<Complex64>,
}

impl DecoderMix {
    #[inline]
    pub(crate) fn apply(&self, x: Complex64, w: Complex64) -> Complex64 {
        let v = x * self.rho_abs + w * self.rho_bar;
        match self.rotation {
            Some(r) => v * r,
            None => v,
        }
    }
}

/// One realization of the normalized model.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPair {
    /// Encoder signal on `[-2 d_max, N - 1 + 2 d_max]`; the encoder itself
    /// only looks at `[0, N - 1]`.
    pub x: Window,
    /// Decoder signal on `[-d_max, N - 1 + d_max]`.
    pub y: Window,
    pub d_true: i64,
    n: usize,
}

impl ObservationPair {
    /// The `N` samples the encoder observes.
    pub fn encoder_window(&self) -> &[Complex64] {
        self.x
            .range(0, self.n)
            .expect("encoder window inside x support")
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Uniform delay on `{-d_max, ..., d_max}` from the trial's delay lane.
pub fn draw_delay(d_max: u32, stream: &TrialStream) -> i64 {
    let d = d_max as i64;
    if d == 0 {
        return 0;
    }
    stream.rng(Lane::Delay).gen_range(-d..=d)
}

pub fn generate_pair(params: &ModelParams, stream: &TrialStream) -> ObservationPair {
    let n = params.n();
    let dm = params.d_max as i64;
    let d_true = draw_delay(params.d_max, stream);

    let x_start = -2 * dm;
    let x = stream.encoder_field().samples(x_start, n + 4 * dm as usize);
    let y_start = -dm;
    let y_len = n + 2 * dm as usize;
    let w = stream.noise_field().samples(y_start, y_len);

    let mix = params.mixer();
    let offset = (y_start - d_true - x_start) as usize;
    let y = w
        .iter()
        .zip(&x[offset..offset + y_len])
        .map(|(&w, &x)| mix.apply(x, w))
        .collect();

    ObservationPair {
        x: Window::new(x_start, x),
        y: Window::new(y_start, y),
        d_true,
        n,
    }
}

/// Decoder samples `y[start..start + len]` of the realization in `stream`
/// with delay `d_true`, generated directly from the indexed fields. The values
/// equal the corresponding samples of [`generate_pair`].
pub fn decoder_samples(
    params: &ModelParams,
    stream: &TrialStream,
    d_true: i64,
    start: i64,
    len: usize,
) -> Window {
    let xs = stream.encoder_field().samples(start - d_true, len);
    let w = stream.noise_field().samples(start, len);
    let mix = params.mixer();
    Window::new(
        start,
        xs.iter().zip(&w).map(|(&x, &w)| mix.apply(x, w)).collect(),
    )
}

/// Parameters of the raw two-sensor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSensorParams {
    pub alpha: f64,
    pub theta_tilde: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

impl RawSensorParams {
    pub fn new(alpha: f64, theta_tilde: f64, sigma1_sq: f64, sigma2_sq: f64) -> Result<Self> {
        let p = Self {
            alpha,
            theta_tilde,
            sigma1_sq,
            sigma2_sq,
        };
        p.validate()?;
        Ok(p)
    }

    /// Noise variances may be zero here so the noiseless identity is testable.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return invalid(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.theta_tilde.is_finite() && (0.0..TAU).contains(&self.theta_tilde)) {
            return invalid(format!(
                "theta_tilde must be in [0, 2pi), got {}",
                self.theta_tilde
            ));
        }
        for (name, v) in [("sigma1_sq", self.sigma1_sq), ("sigma2_sq", self.sigma2_sq)] {
            if !(v.is_finite() && v >= 0.0) {
                return invalid(format!("{name} must be a nonnegative variance, got {v}"));
            }
        }
        Ok(())
    }
}

/// Raw sensor outputs on `n = 0..n_samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPair {
    pub r1: Vec<Complex64>,
    pub r2: Vec<Complex64>,
    pub d_true: i64,
}

/// `r1[n] = s[n] + z1[n]`, `r2[n] = alpha e^{j theta~} s[n - d] + z2[n]`.
pub fn generate_raw_pair<R: Rng + ?Sized>(
    raw: &RawSensorParams,
    d_max: u32,
    n_samples: usize,
    rng: &mut R,
) -> RawPair {
    let dm = d_max as i64;
    let d_true = if dm == 0 { 0 } else { rng.gen_range(-dm..=dm) };
    // s on [-d_max, n_samples - 1 + d_max]
    let s: Vec<Complex64> = (0..n_samples + 2 * d_max as usize)
        .map(|_| sample_ccn(rng))
        .collect();
    let (sd1, sd2) = (raw.sigma1_sq.sqrt(), raw.sigma2_sq.sqrt());
    let gain = Complex64::from_polar(raw.alpha, raw.theta_tilde);
    let at = |n: i64| s[(n + dm) as usize];
    let r1 = (0..n_samples as i64)
        .map(|n| at(n) + sample_ccn(rng) * sd1)
        .collect();
    let r2 = (0..n_samples as i64)
        .map(|n| at(n - d_true) * gain + sample_ccn(rng) * sd2)
        .collect();
    RawPair { r1, r2, d_true }
}

/// Correlation coefficient of the variance-normalized raw pair, i.e. the
/// `rho` of the equivalent normalized model.
pub fn effective_rho(raw: &RawSensorParams) -> Complex64 {
    let scale = ((1.0 + raw.sigma1_sq) * (raw.alpha * raw.alpha + raw.sigma2_sq)).sqrt();
    Complex64::from_polar(raw.alpha / scale, raw.theta_tilde)
}

/// Empirical `E[r2[n + d] conj(r1[n])]` after normalizing each sensor by its
/// model variance.
pub fn empirical_rho(raw: &RawSensorParams, pair: &RawPair) -> Complex64 {
    let d = pair.d_true;
    let n = pair.r1.len() as i64;
    let lo = 0.max(-d);
    let hi = n.min(n - d);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in lo..hi {
        acc += pair.r2[(i + d) as usize] * pair.r1[i as usize].conj();
    }
    let scale = ((1.0 + raw.sigma1_sq) * (raw.alpha * raw.alpha + raw.sigma2_sq)).sqrt();
    acc / ((hi - lo) as f64 * scale)
}
