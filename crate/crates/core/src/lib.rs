//! Extremum-encoding time-delay estimation for complex baseband signals.
//!
//! Two sensors observe a common white circular complex normal signal with an
//! unknown integer delay. The encoder sends only `k` bits: the index of the
//! largest-magnitude sample in its `N = 2^k` sample window. The decoder
//! estimates the delay as the lag, within the delay spread around that index,
//! where its own signal has the largest magnitude (MMIE).
//!
//! Modules:
//! * [`signal_model`]: observation model and raw-sensor equivalence
//! * [`codec`]: the extremum encoder and message layout
//! * [`estimators`]: MMIE, cross-correlation, and the compressed baselines
//! * [`theory`]: bounds, error exponent, extremum law
//! * [`montecarlo`]: reproducible parallel error-rate experiments
//! * [`streams`]: counter-addressed random streams used by all of the above

pub mod codec;
pub mod error;
pub mod estimators;
pub mod montecarlo;
pub mod samples;
pub mod signal_model;
pub mod streams;
pub mod theory;

pub use codec::{encode_max_index, pack, unpack, Message};
pub use error::{Error, Result};
pub use estimators::{
    cce, mmie_decode, one_bit_quantize, rd_compress, rho_sq_mmie, rho_sq_profile, Correlator,
    DelayEstimate, EstimatorId, OneBitBudget,
};
pub use montecarlo::{
    fit_constant, fit_log2_slope, locate_extremum, run_experiment, run_experiment_with_workers,
    run_trial, sweep_k, sweep_snr, ErrorRateEstimate, ExperimentConfig, SweepPoint, TrialBudget,
};
pub use samples::{Counted, Samples, Window};
pub use signal_model::{
    decoder_samples, effective_rho, generate_pair, generate_raw_pair, rho_from_snr, ModelParams,
    ObservationPair, RawPair, RawSensorParams,
};
pub use streams::TrialStream;
pub use theory::{BoundReport, EpsilonMode};

pub use num_complex::Complex64;
