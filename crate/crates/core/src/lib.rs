//! Secure key rates and simulation for differential quadrature phase shift
//! (DQPS) quantum key distribution and its two-pulse phase-encoding BB84
//! special case.
//!
//! - [`tagging`]: tagging probability of an emitted block, closed form and
//!   brute-force oracle.
//! - [`keyrate`]: binary entropy, privacy amplification and the asymptotic
//!   key rate per pulse.
//! - [`optimizer`]: mean-photon-number optimization and sweeps over loss.
//! - [`protocol`]: photon-level Monte Carlo of the protocol.
//! - [`calibration`]: off-line coincidence measurements bounding `r_tag`.

pub mod calibration;
pub mod error;
pub mod keyrate;
mod numeric;
pub mod optimizer;
pub mod protocol;
pub mod rng;
pub mod tagging;

pub use calibration::{
    q3_bound, simulate_three_detector, simulate_two_detector, CalibMode, CalibSetup2, CalibSetup3,
    CalibrationReport, TrainEvent,
};
pub use error::{Error, Result};
pub use keyrate::{
    binary_entropy, channel_q, key_rate, privacy_amp_fraction, ErrorCorrection, KeyRateReport,
    PrivacyAmplification, RateInputs, ShannonLimit,
};
pub use numeric::KahanSum;
pub use optimizer::{
    asymptotic_refs, optimize_mu, sweep, AsymptoticOptimum, MuOptimum, OptimizerOptions, SweepRow,
    SweepSpec,
};
pub use protocol::{
    basis_independence_test, estimate_key_rate, run_simulation, ChannelModel, ObservedStats,
    ProtocolParams,
};
pub use tagging::{
    count_untagged_configs, is_untagged_config, rtag_bruteforce, rtag_coherent, rtag_general,
    BruteForce, OracleOptions, PhotonConfig, SourceDistribution, TagParams,
};
