//! Carry-assisted rates: the decoder of pipe `i` also looks at the raw
//! outputs of the `q` pipes above, which carry information about `X_i`
//! through the carry-over bit.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{binary_entropy, check_lengths, mutual_information, PipeAllocation, RateReport, Scheme};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::vbc::mask;

/// Joint law of `(X_i, Z_i, Y_{i+1..i+q})` for every active pipe.
///
/// `tables[i][x | z << 1 | t << 2]` with `t` the upper outputs packed LSB
/// first (`Y_{i+1}` in bit 0).
#[derive(Debug, Clone, PartialEq)]
pub struct CarryLaw {
    q: usize,
    tables: Vec<Option<Vec<f64>>>,
}

impl CarryLaw {
    /// Exact enumeration over input words on the active set and all noise
    /// words of nonzero probability.
    pub fn enumerate(
        noise: &NoiseModel,
        alloc: &PipeAllocation,
        q: usize,
        budget: u128,
    ) -> Result<Self> {
        check_lengths(noise, alloc)?;
        let active = alloc.active();
        let support: Vec<(u64, f64)> = noise
            .joint_pmf()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(z, &p)| (z as u64, p))
            .collect();
        let required = (1u128 << active.len()) * support.len() as u128;
        if required > budget {
            return Err(Error::EnumerationBudget { required, budget });
        }
        let n = noise.n_bits();
        let word_mask = mask(n);
        let mut law = Self::empty(n as usize, &active, q);
        for subset in 0..1u64 << active.len() {
            let (x, px) = input_word(alloc, &active, subset);
            if px == 0.0 {
                continue;
            }
            for &(z, pz) in &support {
                let y = (x + z) & word_mask;
                law.add(&active, x, z, y, px * pz);
            }
        }
        Ok(law)
    }

    fn empty(n_bits: usize, active: &[usize], q: usize) -> Self {
        let mut tables = vec![None; n_bits];
        for &i in active {
            tables[i] = Some(vec![0.0; 4 << q]);
        }
        Self { q, tables }
    }

    fn add(&mut self, active: &[usize], x: u64, z: u64, y: u64, weight: f64) {
        let upper = mask(self.q as u32);
        for &i in active {
            let idx = ((x >> i) & 1) | (((z >> i) & 1) << 1) | (((y >> (i + 1)) & upper) << 2);
            if let Some(t) = self.tables[i].as_mut() {
                t[idx as usize] += weight;
            }
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// `joint[x][ybar | t << 1]` with `ybar = x ^ z`.
    pub fn observation_joint(&self, pipe: usize) -> Option<[Vec<f64>; 2]> {
        let table = self.tables[pipe].as_ref()?;
        let mut joint = [vec![0.0; 2 << self.q], vec![0.0; 2 << self.q]];
        for (idx, &w) in table.iter().enumerate() {
            let (x, z, t) = (idx & 1, (idx >> 1) & 1, idx >> 2);
            joint[x][(x ^ z) | (t << 1)] += w;
        }
        Some(joint)
    }

    /// `I(X_i; X_i ^ Z_i, Y_{i+1..i+q})` in bits; zero for inactive pipes.
    pub fn pipe_information(&self, pipe: usize) -> f64 {
        self.observation_joint(pipe)
            .map_or(0.0, |j| mutual_information(&j))
    }

    /// `I(X_i; X_i ^ Z_i)`, the same law with the upper outputs dropped.
    pub fn pipe_information_without_upper(&self, pipe: usize) -> f64 {
        self.observation_joint(pipe).map_or(0.0, |j| {
            let fold = |row: &Vec<f64>| {
                let mut out = vec![0.0; 2];
                for (k, w) in row.iter().enumerate() {
                    out[k & 1] += w;
                }
                out
            };
            mutual_information(&[fold(&j[0]), fold(&j[1])])
        })
    }

    /// `P(T = t | X_i = b, Z_i = b)` for `b = 0` and `b = 1`.
    pub fn upper_given_agreement(&self, pipe: usize) -> Option<[Vec<f64>; 2]> {
        let table = self.tables[pipe].as_ref()?;
        let patterns = 1usize << self.q;
        let mut out = [vec![0.0; patterns], vec![0.0; patterns]];
        for (b, row) in out.iter_mut().enumerate() {
            let xz = b | (b << 1);
            for (t, cell) in row.iter_mut().enumerate() {
                *cell = table[xz | (t << 2)];
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|c| *c /= total);
            }
        }
        Some(out)
    }
}

fn input_word(alloc: &PipeAllocation, active: &[usize], subset: u64) -> (u64, f64) {
    let mut x = 0u64;
    let mut px = 1.0;
    for (j, &i) in active.iter().enumerate() {
        let p = alloc.probs()[i];
        if (subset >> j) & 1 == 1 {
            x |= 1 << i;
            px *= p;
        } else {
            px *= 1.0 - p;
        }
    }
    (x, px)
}

/// Carry-assisted decoding:
/// `(1 - eps) sum_i I(X_i; Ybar_i, Y_{i+1}, ..., Y_{i+q})`, by exact enumeration.
pub fn rate_cd(
    noise: &NoiseModel,
    alloc: &PipeAllocation,
    q: usize,
    eps_bar: f64,
    budget: u128,
) -> Result<RateReport> {
    let q = check_q(q)?;
    let law = CarryLaw::enumerate(noise, alloc, q, budget)?;
    let raw = (0..alloc.len()).map(|i| law.pipe_information(i)).collect();
    Ok(RateReport::assemble(Scheme::Cd, q, noise, alloc, eps_bar, raw))
}

fn check_q(q: usize) -> Result<usize> {
    if q == 0 || q > 16 {
        return Err(Error::param("q", format!("must lie in 1..=16, got {q}")));
    }
    Ok(q)
}

/// Monte Carlo estimate of [`rate_cd`] with a batch-means standard error.
pub fn rate_cd_montecarlo(
    noise: &NoiseModel,
    alloc: &PipeAllocation,
    q: usize,
    eps_bar: f64,
    samples: usize,
    seed: u64,
) -> Result<RateReport> {
    const BATCHES: usize = 10;
    let q = check_q(q)?;
    check_lengths(noise, alloc)?;
    if samples < BATCHES * 100 {
        return Err(Error::param("samples", format!("need at least {} samples", BATCHES * 100)));
    }
    let active = alloc.active();
    let words = WeightedIndex::new(noise.joint_pmf())
        .map_err(|e| Error::param("noise", e.to_string()))?;
    let n = noise.n_bits();
    let word_mask = mask(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut overall = CarryLaw::empty(n as usize, &active, q);
    let mut batch_totals = Vec::with_capacity(BATCHES);
    for b in 0..BATCHES {
        let count = samples / BATCHES + usize::from(b < samples % BATCHES);
        let mut batch = CarryLaw::empty(n as usize, &active, q);
        for _ in 0..count {
            let x = active
                .iter()
                .filter(|&&i| rng.random_bool(alloc.probs()[i]))
                .fold(0u64, |acc, &i| acc | (1 << i));
            let z = words.sample(&mut rng) as u64;
            let y = (x + z) & word_mask;
            batch.add(&active, x, z, y, 1.0);
            overall.add(&active, x, z, y, 1.0);
        }
        batch_totals.push((0..n as usize).map(|i| batch.pipe_information(i)).sum::<f64>());
    }
    let raw = (0..alloc.len()).map(|i| overall.pipe_information(i)).collect();
    let mean = batch_totals.iter().sum::<f64>() / BATCHES as f64;
    let var = batch_totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    let mut report = RateReport::assemble(Scheme::Cd, q, noise, alloc, eps_bar, raw);
    report.std_error = Some((1.0 - eps_bar) * (var / BATCHES as f64).sqrt());
    Ok(report)
}

/// How the CD-BAC flip sets are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FlipSets {
    /// Best set satisfying `(1 - alpha) theta - alpha theta_bar < 0`, or the
    /// empty set when none does.
    Auto,
    /// Per-pipe lists of upper-output patterns `t` that trigger a flip.
    Explicit(Vec<Vec<usize>>),
}

/// Flip sets and the asymmetric channel they induce, per pipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdBacParams {
    pub flip_sets: Vec<Vec<usize>>,
    pub theta: Vec<f64>,
    pub theta_bar: Vec<f64>,
    /// `P(flipped output = 1 | X_i = 0)`.
    pub alpha_tilde0: Vec<f64>,
    /// `P(flipped output = 0 | X_i = 1)`.
    pub alpha_tilde1: Vec<f64>,
}

/// Mutual information of a binary asymmetric channel with input Bernoulli(`p`),
/// `P(1 | 0) = a0`, `P(0 | 1) = a1`.
pub fn bac_information(p: f64, a0: f64, a1: f64) -> f64 {
    let one = (1.0 - p) * a0 + p * (1.0 - a1);
    (binary_entropy(one) - (1.0 - p) * binary_entropy(a0) - p * binary_entropy(a1)).max(0.0)
}

fn flip_probabilities(cond: &[Vec<f64>; 2], set: &[usize]) -> (f64, f64) {
    let theta = set.iter().map(|&t| cond[0][t]).sum();
    let theta_bar = set.iter().map(|&t| cond[1][t]).sum();
    (theta, theta_bar)
}

struct PipeChoice {
    set: Vec<usize>,
    theta: f64,
    theta_bar: f64,
}

fn choose_flip_set(cond: &[Vec<f64>; 2], alpha: f64, p: f64, q: usize) -> PipeChoice {
    let patterns = 1usize << q;
    let candidates: Box<dyn Iterator<Item = Vec<usize>>> = if q <= 3 {
        Box::new((1u64..1 << patterns).map(move |s| (0..patterns).filter(|&t| (s >> t) & 1 == 1).collect()))
    } else {
        let pointwise: Vec<usize> = (0..patterns)
            .filter(|&t| (1.0 - alpha) * cond[0][t] - alpha * cond[1][t] < 0.0)
            .collect();
        Box::new(std::iter::once(pointwise).filter(|s| !s.is_empty()))
    };
    let mut best: Option<(f64, PipeChoice)> = None;
    for set in candidates {
        let (theta, theta_bar) = flip_probabilities(cond, &set);
        if (1.0 - alpha) * theta - alpha * theta_bar >= 0.0 {
            continue;
        }
        let phi = bac_information(p, alpha + (1.0 - alpha) * theta, alpha - alpha * theta_bar);
        if best.as_ref().is_none_or(|(b, _)| phi > *b) {
            best = Some((phi, PipeChoice { set, theta, theta_bar }));
        }
    }
    best.map(|(_, c)| c).unwrap_or(PipeChoice {
        set: Vec::new(),
        theta: 0.0,
        theta_bar: 0.0,
    })
}

/// Carry-assisted decoding reduced to a binary asymmetric channel: a zero
/// on `Ybar_i` is flipped to one when the upper outputs fall in `T_i`.
pub fn rate_cd_bac(
    noise: &NoiseModel,
    alloc: &PipeAllocation,
    q: usize,
    flip_sets: &FlipSets,
    eps_bar: f64,
    budget: u128,
) -> Result<RateReport> {
    let q = check_q(q)?;
    let law = CarryLaw::enumerate(noise, alloc, q, budget)?;
    let n = alloc.len();
    if let FlipSets::Explicit(sets) = flip_sets {
        if sets.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: sets.len(),
            });
        }
        if sets.iter().flatten().any(|&t| t >> q != 0) {
            return Err(Error::param("flip_sets", format!("patterns must be below 2^{q}")));
        }
    }
    let mut params = CdBacParams {
        flip_sets: vec![Vec::new(); n],
        theta: vec![0.0; n],
        theta_bar: vec![0.0; n],
        alpha_tilde0: noise.marginals().to_vec(),
        alpha_tilde1: noise.marginals().to_vec(),
    };
    let mut raw = vec![0.0; n];
    for i in 0..n {
        let Some(cond) = law.upper_given_agreement(i) else {
            continue;
        };
        let alpha = noise.alpha(i);
        let p = alloc.probs()[i];
        let choice = match flip_sets {
            FlipSets::Auto => choose_flip_set(&cond, alpha, p, q),
            FlipSets::Explicit(sets) => {
                let (theta, theta_bar) = flip_probabilities(&cond, &sets[i]);
                PipeChoice {
                    set: sets[i].clone(),
                    theta,
                    theta_bar,
                }
            }
        };
        let a0 = alpha + (1.0 - alpha) * choice.theta;
        let a1 = alpha - alpha * choice.theta_bar;
        raw[i] = bac_information(p, a0, a1);
        params.flip_sets[i] = choice.set;
        params.theta[i] = choice.theta;
        params.theta_bar[i] = choice.theta_bar;
        params.alpha_tilde0[i] = a0;
        params.alpha_tilde1[i] = a1;
    }
    let mut report = RateReport::assemble(Scheme::CdBac, q, noise, alloc, eps_bar, raw);
    report.cd_bac = Some(params);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::{bsc_mutual_information, rate_id, DEFAULT_ENUMERATION_BUDGET};
    use crate::vbc::{ChannelParams, VbcParams};

    fn model(peak: f64, beta: f64, gamma: f64) -> NoiseModel {
        let ch = ChannelParams::peak_only(peak).unwrap();
        let vbc = VbcParams::new(&ch, beta, gamma).unwrap();
        NoiseModel::build(&ch, &vbc).unwrap()
    }

    #[test]
    fn top_pipe_has_no_upper_information() {
        let m = model(10.0, 5.0, 1.0);
        let n = m.n_bits() as usize;
        let alloc = PipeAllocation::uniform(m.n_bits(), &[n - 2], 0.5).unwrap();
        // the pipe above is never driven, but still sees the carry
        let cd = rate_cd(&m, &alloc, 1, 0.0, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let id = rate_id(&m, &alloc, 0.0).unwrap();
        assert!(cd.total >= id.total - 1e-12);
        let alloc = PipeAllocation::uniform(m.n_bits(), &[n - 1], 0.5).unwrap();
        let cd = rate_cd(&m, &alloc, 3, 0.0, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let id = rate_id(&m, &alloc, 0.0).unwrap();
        assert!((cd.total - id.total).abs() < 1e-12);
    }

    #[test]
    fn empty_flip_set_equals_id() {
        let m = model(4.0, 3.0, 1.0);
        let n = m.n_bits() as usize;
        let active = greedy(&m);
        let alloc = PipeAllocation::uniform(m.n_bits(), &active, 0.5).unwrap();
        let r = rate_cd_bac(
            &m,
            &alloc,
            1,
            &FlipSets::Explicit(vec![Vec::new(); n]),
            0.0,
            DEFAULT_ENUMERATION_BUDGET,
        )
        .unwrap();
        let id = rate_id(&m, &alloc, 0.0).unwrap();
        for i in 0..n {
            assert!((r.per_pipe[i] - id.per_pipe[i]).abs() < 1e-12);
        }
    }

    fn greedy(m: &NoiseModel) -> Vec<usize> {
        crate::rate::greedy_active_set(m.n_bits(), m.vbc().gamma() * m.channel().peak())
    }

    #[test]
    fn perfect_indicator_gives_z_channel() {
        let a = 0.2;
        let z = bac_information(0.5, a, a - a * 1.0);
        assert!(z > bsc_mutual_information(0.5, a));
        assert!((bac_information(0.5, a, a) - bsc_mutual_information(0.5, a)).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let m = model(10.0, 5.0, 4.0);
        let alloc = PipeAllocation::uniform(m.n_bits(), &greedy(&m), 0.5).unwrap();
        assert!(matches!(
            rate_cd(&m, &alloc, 1, 0.0, 10),
            Err(Error::EnumerationBudget { .. })
        ));
    }

    #[test]
    fn montecarlo_matches_enumeration() {
        let m = model(1.0, 7.5, 1.0);
        let alloc = PipeAllocation::uniform(m.n_bits(), &greedy(&m), 0.5).unwrap();
        let exact = rate_cd(&m, &alloc, 1, 0.0, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let mc = rate_cd_montecarlo(&m, &alloc, 1, 0.0, 400_000, 3).unwrap();
        let se = mc.std_error.unwrap();
        assert!((mc.total - exact.total).abs() < 4.0 * se + 2e-3, "{} vs {} (se {se})", mc.total, exact.total);
    }
}
