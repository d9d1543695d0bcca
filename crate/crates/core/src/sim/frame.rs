use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ChannelMode, SimConfig};
use crate::noise::{state_of, NoiseModel};
use crate::polar::{bsc_llr, ErasureFill, PolarCode};
use crate::rate::Scheme;
use crate::vbc::{majority, mask, QuantizedOutput};

/// Decoder-side model of one pipe.
#[derive(Debug, Clone)]
pub(crate) struct PipeDecoder {
    pub code: PolarCode,
    /// Crossover the LLRs are computed with.
    pub crossover: f64,
    /// State members and the states that trigger a flip (SD-BSC).
    pub state: Option<(Vec<i64>, Vec<bool>)>,
}

/// Everything fixed across frames.
pub(crate) struct Link<'a> {
    pub cfg: &'a SimConfig,
    pub pipes: Vec<Option<PipeDecoder>>,
    pub noise_words: Option<WeightedIndex<f64>>,
}

impl<'a> Link<'a> {
    pub fn new(cfg: &'a SimConfig, noise: &NoiseModel, pipes: Vec<Option<PipeDecoder>>) -> Self {
        let noise_words = match cfg.mode {
            ChannelMode::VbcInjected => WeightedIndex::new(noise.joint_pmf()).ok(),
            ChannelMode::Gaussian => None,
        };
        Self {
            cfg,
            pipes,
            noise_words,
        }
    }
}

/// Raw counters of one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameOutcome {
    /// Information-bit errors per pipe.
    pub bit_errors: Vec<u64>,
    pub erasures: u64,
    /// Per pipe, the number of non-erased slots whose true noise bit is 1.
    pub channel_flips: Vec<u64>,
}

/// Simulates frame `frame` of the link: encode, transmit, decode pipe by
/// pipe from the least significant one with carry reconstruction.
pub(crate) fn run_frame(link: &Link<'_>, frame: u64) -> FrameOutcome {
    let cfg = link.cfg;
    let n_bits = cfg.vbc.n_bits() as usize;
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(frame);

    // transmitter
    let mut messages: Vec<Vec<u8>> = vec![Vec::new(); n_bits];
    let mut words = vec![0u64; n];
    for (i, pipe) in link.pipes.iter().enumerate() {
        let Some(p) = pipe else { continue };
        messages[i] = (0..p.code.k()).map(|_| rng.random::<u8>() & 1).collect();
        let codeword = p.code.encode(&messages[i]).expect("message length matches code");
        for (w, &c) in words.iter_mut().zip(&codeword) {
            *w |= u64::from(c) << i;
        }
    }

    // channel and receiver front end
    let word_mask = mask(n_bits as u32);
    let received: Vec<Option<u64>> = match cfg.mode {
        ChannelMode::Gaussian => words
            .iter()
            .map(|&x| {
                let sent = x as f64 / cfg.vbc.gamma();
                let z: f64 = cfg.channel.sigma() * rng.sample::<f64, _>(StandardNormal);
                match cfg.vbc.quantize(&cfg.channel, sent + z) {
                    QuantizedOutput::Word(w) => Some(w.value()),
                    QuantizedOutput::Erasure => None,
                }
            })
            .collect(),
        ChannelMode::VbcInjected => {
            let dist = link.noise_words.as_ref().expect("noise sampler built for injected mode");
            words
                .iter()
                .map(|&x| Some((x + dist.sample(&mut rng) as u64) & word_mask))
                .collect()
        }
    };

    let mut outcome = FrameOutcome {
        bit_errors: vec![0; n_bits],
        erasures: received.iter().filter(|y| y.is_none()).count() as u64,
        channel_flips: vec![0; n_bits],
    };
    for (&x, y) in words.iter().zip(&received) {
        if let Some(y) = y {
            let z = y.wrapping_sub(x) & word_mask;
            for (i, f) in outcome.channel_flips.iter_mut().enumerate() {
                *f += (z >> i) & 1;
            }
        }
    }

    // successive decoding
    let mut carry = vec![0u8; n];
    let mut noise_est = vec![0u64; n];
    let mut ybar = vec![0u8; n];
    let mut llrs = vec![0.0; n];
    for i in 0..n_bits {
        for t in 0..n {
            ybar[t] = match received[t] {
                Some(y) => ((y >> i) & 1) as u8 ^ carry[t],
                None => 0,
            };
        }
        let decided: Vec<u8> = match &link.pipes[i] {
            None => vec![0; n],
            Some(p) => {
                for t in 0..n {
                    llrs[t] = match received[t] {
                        None => match cfg.erasure_fill {
                            ErasureFill::Neutral => 0.0,
                            ErasureFill::Random => {
                                observe(p, noise_est[t], rng.random::<u8>() & 1)
                            }
                        },
                        Some(_) => observe(p, noise_est[t], ybar[t]),
                    };
                }
                let (message, codeword) = p
                    .code
                    .decode_full(&llrs, cfg.check)
                    .expect("llr length matches code");
                outcome.bit_errors[i] = message
                    .iter()
                    .zip(&messages[i])
                    .filter(|(a, b)| a != b)
                    .count() as u64;
                codeword
            }
        };
        for t in 0..n {
            if received[t].is_none() {
                carry[t] = 0;
                continue;
            }
            let x_bit = if cfg.genie {
                ((words[t] >> i) & 1) as u8
            } else {
                decided[t]
            };
            let z_bit = if cfg.genie {
                ((received[t].unwrap_or(0).wrapping_sub(words[t]) & word_mask) >> i) as u8 & 1
            } else {
                ybar[t] ^ x_bit
            };
            noise_est[t] |= u64::from(z_bit) << i;
            carry[t] = majority(x_bit, z_bit, carry[t]);
        }
    }
    outcome
}

/// LLR of one observation, after the state-driven flip for SD-BSC.
fn observe(p: &PipeDecoder, noise_est: u64, bit: u8) -> f64 {
    let bit = match &p.state {
        Some((members, flips)) if flips[state_of(noise_est, members)] => bit ^ 1,
        _ => bit,
    };
    bsc_llr(Some(bit), p.crossover)
}

pub(crate) fn scheme_is_simulated(scheme: Scheme) -> bool {
    matches!(scheme, Scheme::Id | Scheme::SdBsc)
}
