//! Polar-coded Monte Carlo link simulation of the ID and SD-BSC schemes over
//! the Gaussian intensity channel.
//!
//! Frames are independent: frame `f` draws from a ChaCha8 generator keyed by
//! the master seed on stream `f`, and per-frame counters are summed, so the
//! report does not depend on the number of worker threads.

mod frame;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, StateSelection};
use crate::polar::{ErasureFill, PolarCode, SoftCheck};
use crate::rate::{binary_entropy, optimize_params, ParamGrid, Scheme, SchemeConfig};
use crate::vbc::{ChannelParams, VbcParams};

pub use frame::FrameOutcome;
use frame::{run_frame, scheme_is_simulated, Link, PipeDecoder};

/// Source of the per-slot noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    /// Real Gaussian channel with erasure and quantization.
    #[default]
    Gaussian,
    /// Noise words drawn from the analytic joint law and added modulo `2^N`.
    VbcInjected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub channel: ChannelParams,
    pub vbc: VbcParams,
    pub scheme: Scheme,
    /// State size for SD-BSC (the `q` pipes just below).
    pub q: usize,
    /// Block length, a power of two.
    pub n: usize,
    /// Information bits per pipe; pipes with `0` are idle and send zeros.
    pub info_lengths: Vec<usize>,
    pub frames: usize,
    pub seed: u64,
    /// Reconstruct carries from the true instead of the decoded bits.
    pub genie: bool,
    pub erasure_fill: ErasureFill,
    pub check: SoftCheck,
    pub mode: ChannelMode,
}

impl SimConfig {
    /// Configuration with `k_i = round(rate_i n)` on the listed pipes.
    pub fn from_rates(
        channel: ChannelParams,
        vbc: VbcParams,
        scheme: Scheme,
        n: usize,
        rates: &[(usize, f64)],
    ) -> Result<Self> {
        let mut info_lengths = vec![0; vbc.n_bits() as usize];
        for &(pipe, rate) in rates {
            if pipe >= info_lengths.len() {
                return Err(Error::param("pipe", format!("pipe {pipe} out of range")));
            }
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::param("rate", format!("{rate} is not a code rate")));
            }
            info_lengths[pipe] = (rate * n as f64).round() as usize;
        }
        Ok(Self {
            channel,
            vbc,
            scheme,
            q: 1,
            n,
            info_lengths,
            frames: 1000,
            seed: 1,
            genie: false,
            erasure_fill: ErasureFill::Neutral,
            check: SoftCheck::MinSum,
            mode: ChannelMode::Gaussian,
        })
    }

    pub fn active_pipes(&self) -> Vec<usize> {
        (0..self.info_lengths.len())
            .filter(|&i| self.info_lengths[i] > 0)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !scheme_is_simulated(self.scheme) {
            return Err(Error::param(
                "scheme",
                format!("only id and sd-bsc are simulated, got {}", self.scheme),
            ));
        }
        if self.n < 2 || !self.n.is_power_of_two() {
            return Err(Error::param("n", format!("block length {} is not a power of two", self.n)));
        }
        if self.frames == 0 {
            return Err(Error::param("frames", "need at least one frame"));
        }
        let n_bits = self.vbc.n_bits() as usize;
        if self.info_lengths.len() != n_bits {
            return Err(Error::LengthMismatch {
                expected: n_bits,
                actual: self.info_lengths.len(),
            });
        }
        if let Some(k) = self.info_lengths.iter().find(|&&k| k > self.n) {
            return Err(Error::param("k", format!("{k} exceeds the block length {}", self.n)));
        }
        let used: f64 = self.active_pipes().iter().map(|&i| (i as f64).exp2()).sum();
        let limit = self.vbc.gamma() * self.channel.peak();
        if used > limit + 1e-9 {
            return Err(Error::PeakViolation { used, limit });
        }
        Ok(())
    }
}

/// Commutative monoid of integer counters over frames.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub frames: u64,
    pub bit_errors: Vec<u64>,
    pub frame_errors: Vec<u64>,
    /// Frames in which any pipe erred.
    pub any_errors: u64,
    pub erasures: u64,
    pub channel_flips: Vec<u64>,
}

impl Tally {
    pub fn empty(n_bits: usize) -> Self {
        Self {
            frames: 0,
            bit_errors: vec![0; n_bits],
            frame_errors: vec![0; n_bits],
            any_errors: 0,
            erasures: 0,
            channel_flips: vec![0; n_bits],
        }
    }

    pub fn from_frame(outcome: &FrameOutcome) -> Self {
        Self {
            frames: 1,
            bit_errors: outcome.bit_errors.clone(),
            frame_errors: outcome.bit_errors.iter().map(|&e| u64::from(e > 0)).collect(),
            any_errors: u64::from(outcome.bit_errors.iter().any(|&e| e > 0)),
            erasures: outcome.erasures,
            channel_flips: outcome.channel_flips.clone(),
        }
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        fn add(a: &mut Vec<u64>, b: &[u64]) {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.frames += other.frames;
        add(&mut self.bit_errors, &other.bit_errors);
        add(&mut self.frame_errors, &other.frame_errors);
        add(&mut self.channel_flips, &other.channel_flips);
        self.any_errors += other.any_errors;
        self.erasures += other.erasures;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeReport {
    pub pipe: usize,
    /// Marginal noise-bit probability.
    pub alpha: f64,
    /// Crossover the code was designed for and the LLRs use.
    pub crossover: f64,
    /// `1 - h(crossover)`.
    pub capacity: f64,
    pub k: usize,
    pub code_rate: f64,
    pub ber: f64,
    pub fer: f64,
    /// Fraction of non-erased slots whose true noise bit is one.
    pub channel_flip_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub pipes: Vec<PipeReport>,
    pub overall_ber: f64,
    pub overall_fer: f64,
    pub erasures: u64,
    pub total_info_bits: u64,
    /// `sum_i k_i / n`.
    pub rate: f64,
    pub tally: Tally,
    pub elapsed_secs: f64,
}

impl SimReport {
    /// Error rates from raw counters; only active pipes are listed.
    pub fn from_tally(config: &SimConfig, pipes: &[(usize, f64, f64)], tally: Tally, elapsed_secs: f64) -> Self {
        let frames = tally.frames.max(1) as f64;
        let slots = frames * config.n as f64 - tally.erasures as f64;
        let mut errors = 0u64;
        let mut bits = 0u64;
        let reports = pipes
            .iter()
            .map(|&(pipe, alpha, crossover)| {
                let k = config.info_lengths[pipe];
                errors += tally.bit_errors[pipe];
                bits += k as u64;
                PipeReport {
                    pipe,
                    alpha,
                    crossover,
                    capacity: 1.0 - binary_entropy(crossover),
                    k,
                    code_rate: k as f64 / config.n as f64,
                    ber: tally.bit_errors[pipe] as f64 / (k as f64 * frames),
                    fer: tally.frame_errors[pipe] as f64 / frames,
                    channel_flip_rate: if slots > 0.0 {
                        tally.channel_flips[pipe] as f64 / slots
                    } else {
                        0.0
                    },
                }
            })
            .collect();
        Self {
            config: config.clone(),
            pipes: reports,
            overall_ber: if bits > 0 { errors as f64 / (bits as f64 * frames) } else { 0.0 },
            overall_fer: tally.any_errors as f64 / frames,
            erasures: tally.erasures,
            total_info_bits: bits * tally.frames,
            rate: bits as f64 / config.n as f64,
            tally,
            elapsed_secs,
        }
    }

    pub fn pipe(&self, i: usize) -> Option<&PipeReport> {
        self.pipes.iter().find(|p| p.pipe == i)
    }
}

fn design(crossover: f64) -> f64 {
    let c = crossover.min(1.0 - crossover);
    c.clamp(1e-9, 0.5)
}

/// `(pipe, alpha, decoder crossover)` of every coded pipe.
type PipeSummary = Vec<(usize, f64, f64)>;

/// Per-pipe decoders: codes designed for `alpha_i` (ID) or the flipped
/// crossover on the `q` lower noise bits (SD-BSC).
fn decoders(cfg: &SimConfig, noise: &NoiseModel) -> Result<(Vec<Option<PipeDecoder>>, PipeSummary)> {
    let n_bits = cfg.vbc.n_bits();
    let q = cfg.q.min(n_bits.saturating_sub(1) as usize);
    let selection = match (cfg.scheme, q) {
        (Scheme::SdBsc, q) if q > 0 => Some(StateSelection::previous(n_bits, q)?),
        _ => None,
    };
    let mut pipes = Vec::with_capacity(n_bits as usize);
    let mut summary = Vec::new();
    for i in 0..n_bits as usize {
        let k = cfg.info_lengths[i];
        if k == 0 {
            pipes.push(None);
            continue;
        }
        let alpha = noise.alpha(i);
        let (crossover, state) = match &selection {
            Some(sel) => {
                let table = noise.state_table(i, sel.set(i));
                (table.flipped_crossover(), Some((sel.set(i).to_vec(), table.flip_mask())))
            }
            None => (alpha, None),
        };
        summary.push((i, alpha, crossover));
        pipes.push(Some(PipeDecoder {
            code: PolarCode::construct(cfg.n, k, design(crossover))?,
            crossover,
            state,
        }));
    }
    Ok((pipes, summary))
}

/// Runs all frames (in parallel) and aggregates the counters.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let start = Instant::now();
    let noise = NoiseModel::build(&cfg.channel, &cfg.vbc)?;
    let (pipes, summary) = decoders(cfg, &noise)?;
    let link = Link::new(cfg, &noise, pipes);
    let n_bits = cfg.vbc.n_bits() as usize;
    let tally = (0..cfg.frames as u64)
        .into_par_iter()
        .map(|f| Tally::from_frame(&run_frame(&link, f)))
        .reduce(|| Tally::empty(n_bits), Tally::merge);
    Ok(SimReport::from_tally(cfg, &summary, tally, start.elapsed().as_secs_f64()))
}

/// Options of [`sweep_rates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub ratio: f64,
    pub target_fer: f64,
    pub grid: Option<ParamGrid>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            ratio: 1.0,
            target_fer: 0.1,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Achievable rate of the scheme at the chosen operating point.
    pub theoretical_rate: f64,
    /// `sum_i k_i / n` of the codes that met the FER target.
    pub achieved_rate: f64,
    pub info_lengths: Vec<usize>,
    pub overall_fer: f64,
    pub frames: usize,
}

/// For every SNR point: pick `(beta, gamma)` by the rate optimizer, start at
/// `k_i = floor(n C_i)` and lower the `k` of the worst pipe by `n/64` until
/// the overall FER meets the target.
pub fn sweep_rates(template: &SimConfig, snr_grid: &[f64], opts: &SweepOptions) -> Result<Vec<SweepPoint>> {
    if snr_grid.is_empty() {
        return Err(Error::param("snr", "grid must be nonempty"));
    }
    let step = (template.n / 64).max(1);
    let mut points = Vec::with_capacity(snr_grid.len());
    for &snr_db in snr_grid {
        let channel = ChannelParams::from_snr_db(snr_db, opts.ratio, template.channel.sigma())?;
        let grid = opts.grid.clone().unwrap_or_else(|| ParamGrid::default_for(&channel));
        let best = optimize_params(&channel, &SchemeConfig::new(template.scheme, template.q), &grid)?;
        let vbc = VbcParams::new(&channel, best.beta, best.gamma)?;
        let mut cfg = template.clone();
        cfg.channel = channel;
        cfg.vbc = vbc;
        cfg.info_lengths = best
            .per_pipe
            .iter()
            .zip(best.allocation.probs())
            .map(|(&r, &p)| if p > 0.0 { (r * template.n as f64).floor() as usize } else { 0 })
            .collect();
        let report = loop {
            let report = run_simulation(&cfg)?;
            if report.overall_fer <= opts.target_fer || cfg.info_lengths.iter().all(|&k| k == 0) {
                break report;
            }
            let worst = report
                .pipes
                .iter()
                .filter(|p| p.k > 0)
                .max_by(|a, b| a.fer.total_cmp(&b.fer).then(b.pipe.cmp(&a.pipe)))
                .map(|p| p.pipe)
                .unwrap_or(0);
            cfg.info_lengths[worst] = cfg.info_lengths[worst].saturating_sub(step);
        };
        points.push(SweepPoint {
            snr_db,
            beta: best.beta,
            gamma: best.gamma,
            theoretical_rate: best.total,
            achieved_rate: report.rate,
            info_lengths: cfg.info_lengths.clone(),
            overall_fer: report.overall_fer,
            frames: cfg.frames,
        });
    }
    Ok(points)
}
