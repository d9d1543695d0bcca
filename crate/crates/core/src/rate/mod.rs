//! Achievable rates of the per-pipe coding schemes and their optimization.
//!
//! Every pipe carries an independent Bernoulli(`p_i`) codeword. The schemes
//! differ in what the decoder of pipe `i` observes:
//!
//! * ID: `Y_i ^ W_i` alone, a BSC(`alpha_i`).
//! * SD: additionally the already decoded noise bits on the state set `A_i`.
//! * SD-BSC: the SD observation collapsed to a BSC by flipping on bad states.
//! * CD: additionally the raw outputs `Y_{i+1..i+q}` of the pipes above.
//! * CD-BAC: the CD observation collapsed to an asymmetric binary channel.
//!
//! All rates are in bits per channel use and carry the erasure factor
//! `1 - 2 Q(beta)`.

mod carry;
mod optimize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, StateSelection};

pub use carry::{rate_cd, rate_cd_bac, rate_cd_montecarlo, CarryLaw, CdBacParams, FlipSets};
pub use optimize::{greedy_active_set, optimize_allocation, optimize_params, ParamGrid};

/// Default cap on enumerated (input word, noise word) pairs.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 1 << 24;

/// Binary entropy in bits, `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// `p * (1 - a) + (1 - p) * a`.
pub fn binary_convolution(p: f64, a: f64) -> f64 {
    p * (1.0 - a) + (1.0 - p) * a
}

/// `I(X; Y)` of a BSC(`crossover`) driven by Bernoulli(`p`).
pub fn bsc_mutual_information(p: f64, crossover: f64) -> f64 {
    (binary_entropy(binary_convolution(p, crossover)) - binary_entropy(crossover)).max(0.0)
}

/// Mutual information (bits) of a joint table `joint[x][y]` with binary `x`.
/// The table need not be normalized.
pub fn mutual_information(joint: &[Vec<f64>; 2]) -> f64 {
    let total: f64 = joint.iter().flatten().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let px = [
        joint[0].iter().sum::<f64>() / total,
        joint[1].iter().sum::<f64>() / total,
    ];
    let mut mi = 0.0;
    for y in 0..joint[0].len() {
        let py = (joint[0][y] + joint[1][y]) / total;
        for x in 0..2 {
            let pxy = joint[x][y] / total;
            if pxy > 0.0 {
                mi += pxy * (pxy / (px[x] * py)).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Bernoulli parameters `p_0..p_{N-1}` of the per-pipe codewords.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeAllocation {
    probs: Vec<f64>,
}

impl PipeAllocation {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::param("p", format!("{p} is not a probability")));
        }
        Ok(Self { probs })
    }

    /// `p` on the pipes in `active`, zero elsewhere.
    pub fn uniform(n_bits: u32, active: &[usize], p: f64) -> Result<Self> {
        let mut probs = vec![0.0; n_bits as usize];
        for &i in active {
            if i >= probs.len() {
                return Err(Error::param("active", format!("pipe {i} out of range")));
            }
            probs[i] = p;
        }
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Pipes with `p_i > 0`.
    pub fn active(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&i| self.probs[i] > 0.0).collect()
    }

    /// `sum_{i active} 2^i`, the largest transmitted word value.
    pub fn peak_usage(&self) -> f64 {
        self.active().iter().map(|&i| (i as f64).exp2()).sum()
    }

    /// `sum_i p_i 2^i`, the mean transmitted word value.
    pub fn average_usage(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * (i as f64).exp2())
            .sum()
    }

    /// Checks both constraints against `gamma A` and `gamma E`.
    pub fn check_feasible(&self, noise: &NoiseModel) -> Result<()> {
        let n = noise.n_bits() as usize;
        if self.probs.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: self.probs.len(),
            });
        }
        let g = noise.vbc().gamma();
        let peak = g * noise.channel().peak();
        let used = self.peak_usage();
        if used > peak + FEASIBILITY_SLACK {
            return Err(Error::PeakViolation { used, limit: peak });
        }
        let avg = g * noise.channel().average();
        let used = self.average_usage();
        if used > avg + FEASIBILITY_SLACK {
            return Err(Error::AverageViolation { used, limit: avg });
        }
        Ok(())
    }
}

pub(crate) const FEASIBILITY_SLACK: f64 = 1e-9;

/// Coding scheme identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Id,
    Sd,
    SdBsc,
    Cd,
    CdBac,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Id,
        Scheme::Sd,
        Scheme::SdBsc,
        Scheme::Cd,
        Scheme::CdBac,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Id => "id",
            Scheme::Sd => "sd",
            Scheme::SdBsc => "sd-bsc",
            Scheme::Cd => "cd",
            Scheme::CdBac => "cd-bac",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::param("scheme", format!("unknown scheme `{s}` (id, sd, sd-bsc, cd, cd-bac)")))
    }
}

/// Scheme together with its knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// State size (SD, SD-BSC) or number of upper outputs (CD, CD-BAC);
    /// clipped to `N - 1`, so `usize::MAX` means "all".
    pub q: usize,
    /// Search every state set of size `q` per pipe instead of the `q`
    /// immediately lower pipes.
    pub state_search: bool,
    pub enumeration_budget: u128,
    /// Monte Carlo sample count used when exact enumeration is over budget;
    /// `None` turns the fallback off.
    pub montecarlo_samples: Option<usize>,
    pub seed: u64,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, q: usize) -> Self {
        Self {
            scheme,
            q,
            state_search: false,
            enumeration_budget: DEFAULT_ENUMERATION_BUDGET,
            montecarlo_samples: None,
            seed: 1,
        }
    }

    /// `q` clipped to the number of lower (or upper) pipes.
    pub fn effective_q(&self, n_bits: u32) -> usize {
        self.q.min(n_bits.saturating_sub(1) as usize)
    }
}

/// Rate of one scheme at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub scheme: Scheme,
    pub q: usize,
    pub beta: f64,
    pub gamma: f64,
    pub n_bits: u32,
    pub eps_bar: f64,
    pub allocation: PipeAllocation,
    /// Per-pipe rates including the erasure factor.
    pub per_pipe: Vec<f64>,
    pub total: f64,
    /// State sets used by SD / SD-BSC.
    pub states: Option<StateSelection>,
    /// Flip sets and induced crossovers used by CD-BAC.
    pub cd_bac: Option<CdBacParams>,
    /// Standard error when the rate was estimated by Monte Carlo.
    pub std_error: Option<f64>,
}

impl RateReport {
    pub(crate) fn assemble(
        scheme: Scheme,
        q: usize,
        noise: &NoiseModel,
        alloc: &PipeAllocation,
        eps_bar: f64,
        raw: Vec<f64>,
    ) -> Self {
        let per_pipe: Vec<f64> = raw.iter().map(|r| (1.0 - eps_bar) * r.max(0.0)).collect();
        let total = per_pipe.iter().sum();
        Self {
            scheme,
            q,
            beta: noise.vbc().beta(),
            gamma: noise.vbc().gamma(),
            n_bits: noise.n_bits(),
            eps_bar,
            allocation: alloc.clone(),
            per_pipe,
            total,
            states: None,
            cd_bac: None,
            std_error: None,
        }
    }

    pub fn active_pipes(&self) -> Vec<usize> {
        self.allocation.active()
    }
}

fn check_lengths(noise: &NoiseModel, alloc: &PipeAllocation) -> Result<()> {
    let n = noise.n_bits() as usize;
    if alloc.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: alloc.len(),
        });
    }
    Ok(())
}

/// Independent decoding: `(1 - eps) sum_i [h(p_i * alpha_i) - h(alpha_i)]`.
pub fn rate_id(noise: &NoiseModel, alloc: &PipeAllocation, eps_bar: f64) -> Result<RateReport> {
    check_lengths(noise, alloc)?;
    let raw = alloc
        .probs()
        .iter()
        .zip(noise.marginals())
        .map(|(&p, &a)| bsc_mutual_information(p, a))
        .collect();
    Ok(RateReport::assemble(Scheme::Id, 0, noise, alloc, eps_bar, raw))
}

fn check_selection(noise: &NoiseModel, selection: &StateSelection) -> Result<()> {
    let n = noise.n_bits() as usize;
    if selection.sets().len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: selection.sets().len(),
        });
    }
    Ok(())
}

/// Per-pipe SD term `E_S[h(p * alpha(S)) - h(alpha(S))]`.
pub(crate) fn sd_pipe(noise: &NoiseModel, pipe: usize, set: &[i64], p: f64) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    let t = noise.state_table(pipe, set);
    t.probs
        .iter()
        .zip(&t.conditionals)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, &c)| w * bsc_mutual_information(p, c))
        .sum()
}

/// State-assisted decoding with the noise bits on `A_i` as decoder state.
pub fn rate_sd(
    noise: &NoiseModel,
    alloc: &PipeAllocation,
    selection: &StateSelection,
    eps_bar: f64,
) -> Result<RateReport> {
    check_lengths(noise, alloc)?;
    check_selection(noise, selection)?;
    let raw = (0..alloc.len())
        .map(|i| sd_pipe(noise, i, selection.set(i), alloc.probs()[i]))
        .collect();
    let mut report = RateReport::assemble(
        Scheme::Sd,
        selection.state_size(),
        noise,
        alloc,
        eps_bar,
        raw,
    );
    report.states = Some(selection.clone());
    Ok(report)
}

/// Crossover `E_S[min(c, 1 - c)]` seen after state-driven flipping.
pub fn flipped_crossover(noise: &NoiseModel, pipe: usize, set: &[i64]) -> f64 {
    noise.state_table(pipe, set).flipped_crossover()
}

/// State-assisted decoding reduced to a BSC by flipping on bad states.
pub fn rate_sd_bsc(
    noise: &NoiseModel,
    alloc: &PipeAllocation,
    selection: &StateSelection,
    eps_bar: f64,
) -> Result<RateReport> {
    check_lengths(noise, alloc)?;
    check_selection(noise, selection)?;
    let raw = (0..alloc.len())
        .map(|i| {
            let p = alloc.probs()[i];
            if p == 0.0 {
                0.0
            } else {
                bsc_mutual_information(p, flipped_crossover(noise, i, selection.set(i)))
            }
        })
        .collect();
    let mut report = RateReport::assemble(
        Scheme::SdBsc,
        selection.state_size(),
        noise,
        alloc,
        eps_bar,
        raw,
    );
    report.states = Some(selection.clone());
    Ok(report)
}

/// Default state selection (`q` lower pipes), or the best set per pipe
/// when `cfg.state_search` is on.
pub fn select_states(
    noise: &NoiseModel,
    alloc: &PipeAllocation,
    cfg: &SchemeConfig,
) -> Result<StateSelection> {
    let n = noise.n_bits();
    let q = cfg.effective_q(n);
    if q == 0 {
        return StateSelection::custom(n, vec![Vec::new(); n as usize]);
    }
    if !cfg.state_search {
        return StateSelection::previous(n, q);
    }
    let mut sets = Vec::with_capacity(n as usize);
    for i in 0..n as i64 {
        let candidates: Vec<i64> = (i - n as i64 + 1..i).collect();
        let p = alloc.probs()[i as usize];
        let mut best: Option<(f64, Vec<i64>)> = None;
        for set in combinations(&candidates, q) {
            let score = match cfg.scheme {
                Scheme::SdBsc => bsc_mutual_information(p, flipped_crossover(noise, i as usize, &set)),
                _ => sd_pipe(noise, i as usize, &set, p),
            };
            if best.as_ref().is_none_or(|(b, _)| score > *b + 1e-15) {
                best = Some((score, set));
            }
        }
        sets.push(best.map(|(_, s)| s).unwrap_or_default());
    }
    StateSelection::custom(n, sets)
}

fn combinations(items: &[i64], k: usize) -> Vec<Vec<i64>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if items.len() < k {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (idx, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[idx + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Rate of `cfg.scheme` at a fixed allocation.
pub fn evaluate(noise: &NoiseModel, alloc: &PipeAllocation, cfg: &SchemeConfig) -> Result<RateReport> {
    let eps_bar = noise.vbc().erasure_bound();
    let q = cfg.effective_q(noise.n_bits());
    match cfg.scheme {
        Scheme::Id => rate_id(noise, alloc, eps_bar),
        Scheme::Sd => rate_sd(noise, alloc, &select_states(noise, alloc, cfg)?, eps_bar),
        Scheme::SdBsc => rate_sd_bsc(noise, alloc, &select_states(noise, alloc, cfg)?, eps_bar),
        Scheme::Cd => match rate_cd(noise, alloc, q.max(1), eps_bar, cfg.enumeration_budget) {
            Err(Error::EnumerationBudget { .. }) if cfg.montecarlo_samples.is_some() => {
                rate_cd_montecarlo(
                    noise,
                    alloc,
                    q.max(1),
                    eps_bar,
                    cfg.montecarlo_samples.unwrap_or_default(),
                    cfg.seed,
                )
            }
            other => other,
        },
        Scheme::CdBac => rate_cd_bac(
            noise,
            alloc,
            q.max(1),
            &FlipSets::Auto,
            eps_bar,
            cfg.enumeration_budget,
        ),
    }
}
