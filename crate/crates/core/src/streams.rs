//! Counter-addressed random streams.
//!
//! Every trial owns a ChaCha8 stream selected by `(master_seed, trial_index)`.
//! Inside that stream the word space is split into fixed lanes (encoder
//! magnitudes, encoder phases, decoder noise, ...). Sample `n` of a lane always
//! sits at the same word offset, so any sub-range of a signal can be
//! regenerated in isolation and matches a full materialization bit for bit.
//! Nothing depends on execution order or on the number of worker threads.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Word-space partitions of a trial stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Lane {
    EncoderMagnitude = 0,
    EncoderPhase = 1,
    NoiseMagnitude = 2,
    NoisePhase = 3,
    Delay = 4,
    RateDistortion = 5,
    Auxiliary = 6,
}

const LANE_SHIFT: u32 = 60;
/// Signed sample indices are shifted by this bias before addressing.
const INDEX_BIAS: i64 = 1 << 40;

fn word_pos(lane: Lane, n: i64) -> u128 {
    debug_assert!(n > -INDEX_BIAS && n < INDEX_BIAS);
    ((lane as u128) << LANE_SHIFT) + 2 * (n + INDEX_BIAS) as u128
}

/// Key of one trial's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialStream {
    pub master_seed: u64,
    pub trial: u64,
}

impl TrialStream {
    pub fn new(master_seed: u64, trial: u64) -> Self {
        Self { master_seed, trial }
    }

    fn base(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.trial);
        rng
    }

    /// Sequential generator positioned at the start of `lane`.
    pub fn rng(&self, lane: Lane) -> ChaCha8Rng {
        let mut rng = self.base();
        rng.set_word_pos(word_pos(lane, 0));
        rng
    }

    pub fn field(&self, magnitude: Lane, phase: Lane) -> NormalField {
        NormalField {
            base: self.base(),
            magnitude,
            phase,
        }
    }

    /// The encoder-side signal `x[n]`.
    pub fn encoder_field(&self) -> NormalField {
        self.field(Lane::EncoderMagnitude, Lane::EncoderPhase)
    }

    /// The decoder-side noise.
    pub fn noise_field(&self) -> NormalField {
        self.field(Lane::NoiseMagnitude, Lane::NoisePhase)
    }
}

/// An i.i.d. unit-variance circular complex normal sequence indexed by `i64`.
///
/// Sample `n` is `sqrt(E) * exp(j * phi)` with `E = -ln(U1) ~ Exp(1)` drawn from
/// the magnitude lane and `phi = 2*pi*U2` from the phase lane, both at word
/// offset `n`. Real and imaginary parts are then independent `N(0, 1/2)`.
#[derive(Clone)]
pub struct NormalField {
    base: ChaCha8Rng,
    magnitude: Lane,
    phase: Lane,
}

impl NormalField {
    fn lane_at(&self, lane: Lane, n: i64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_word_pos(word_pos(lane, n));
        rng
    }

    /// Raw magnitude words for indices `start..start + out.len()`.
    ///
    /// `|x[n]|^2` is a strictly decreasing function of `out[i] >> 11`, so
    /// the smallest word marks the largest magnitude.
    pub fn magnitude_words(&self, start: i64, out: &mut [u64]) {
        self.lane_at(self.magnitude, start).fill(out);
    }

    pub fn fill(&self, start: i64, out: &mut [Complex64]) {
        let mut mag = self.lane_at(self.magnitude, start);
        let mut phase = self.lane_at(self.phase, start);
        for s in out.iter_mut() {
            *s = ccn_from_words(mag.next_u64(), phase.next_u64());
        }
    }

    pub fn samples(&self, start: i64, len: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        self.fill(start, &mut out);
        out
    }

    pub fn sample(&self, n: i64) -> Complex64 {
        let mut mag = self.lane_at(self.magnitude, n);
        let mut phase = self.lane_at(self.phase, n);
        ccn_from_words(mag.next_u64(), phase.next_u64())
    }
}

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Uniform on `(0, 1]` from the top 53 bits.
#[inline]
pub fn open_unit(word: u64) -> f64 {
    ((word >> 11) + 1) as f64 * INV_2_53
}

/// Unit-rate exponential value carried by a magnitude word.
#[inline]
pub fn exp_from_word(word: u64) -> f64 {
    -open_unit(word).ln()
}

#[inline]
pub fn ccn_from_words(magnitude: u64, phase: u64) -> Complex64 {
    let r = exp_from_word(magnitude).sqrt();
    let phi = TAU * ((phase >> 11) as f64 * INV_2_53);
    Complex64::from_polar(r, phi)
}

/// One unit-variance circular complex normal draw from a sequential generator:
/// two independent standard normals scaled by `1/sqrt(2)`.
pub fn sample_ccn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(rand_distr::StandardNormal);
    let im: f64 = rng.sample(rand_distr::StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
