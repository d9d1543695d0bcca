//! Binary decomposition of the peak- and average-constrained Gaussian
//! intensity-modulation / direct-detection channel.
//!
//! The channel `Y = X + Z` is turned into `N` binary bit-pipes coupled through
//! carry-over bits ([`vbc`]). On top of that this crate computes the noise-bit
//! statistics ([`noise`]), achievable rates of five per-pipe coding schemes and
//! their parameter optimization ([`rate`]), Blahut–Arimoto capacity references
//! ([`capacity`]), a polar codec ([`polar`]) and a polar-coded Monte Carlo link
//! simulator ([`sim`]).

pub mod capacity;
pub mod error;
pub mod noise;
pub mod polar;
pub mod rate;
pub mod sim;
pub mod vbc;

pub use capacity::{
    blahut_arimoto, imdd_capacity_proxy, BlahutArimoto, CapacityResult, DiscreteChannel,
    ProxyConfig,
};
pub use error::{Error, Result};
pub use noise::{montecarlo_noise_check, NoiseModel, StateSelection, StateTable};
pub use polar::{bsc_llr, ErasureFill, PolarCode, SoftCheck};
pub use rate::{
    binary_entropy, optimize_allocation, optimize_params, rate_cd, rate_cd_bac, rate_id,
    rate_sd, rate_sd_bsc, CdBacParams, ParamGrid, PipeAllocation, RateReport, Scheme,
    SchemeConfig,
};
pub use sim::{
    run_simulation, sweep_rates, ChannelMode, FrameOutcome, SimConfig, SimReport, SweepPoint,
    Tally,
};
pub use vbc::{
    binarize_noise, binarize_output, bit_width, carry_sequence, dac, erasure_bound, q_function,
    truncate_and_erase, BinaryWord, CarryState, ChannelParams, QuantizedOutput, VbcParams,
};
