//! Distribution of the binarized noise word.
//!
//! `gamma (Z + beta)` is cut into unit intervals `[k, k+1)` over
//! `k = -ceil(gamma A) .. ceil(gamma (A + 2 beta)) - 1`; each interval is labelled
//! with its two's-complement `N`-bit word and its Gaussian mass (renormalized
//! to the unified support) is accumulated into a dense joint table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vbc::{binarize_noise, gaussian_mass, ChannelParams, VbcParams};

/// Default upper bound on the number of joint-table entries.
pub const DEFAULT_TABLE_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    channel: ChannelParams,
    vbc: VbcParams,
    joint: Vec<f64>,
    marginals: Vec<f64>,
    normalizer: f64,
}

impl NoiseModel {
    pub fn build(ch: &ChannelParams, vbc: &VbcParams) -> Result<Self> {
        Self::build_with_cap(ch, vbc, DEFAULT_TABLE_CAP)
    }

    pub fn build_with_cap(ch: &ChannelParams, vbc: &VbcParams, cap: usize) -> Result<Self> {
        let n = vbc.n_bits();
        if n >= usize::BITS - 1 || (1usize << n) > cap {
            return Err(Error::TableTooLarge { n_bits: n, cap });
        }
        let size = 1usize << n;
        let (lo, hi) = label_range(ch, vbc);
        let g = vbc.gamma();
        let shift = g * vbc.beta();
        let scale = g * ch.sigma();
        let normalizer = gaussian_mass((lo as f64 - shift) / scale, (hi as f64 - shift) / scale);

        let mut joint = vec![0.0; size];
        for k in lo..hi {
            let mass = gaussian_mass((k as f64 - shift) / scale, (k as f64 + 1.0 - shift) / scale);
            joint[k.rem_euclid(size as i64) as usize] += mass / normalizer;
        }
        let marginals = (0..n)
            .map(|i| {
                joint
                    .iter()
                    .enumerate()
                    .filter(|(w, _)| (w >> i) & 1 == 1)
                    .map(|(_, p)| p)
                    .sum()
            })
            .collect();
        Ok(Self {
            channel: *ch,
            vbc: *vbc,
            joint,
            marginals,
            normalizer,
        })
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn vbc(&self) -> &VbcParams {
        &self.vbc
    }

    pub fn n_bits(&self) -> u32 {
        self.vbc.n_bits()
    }

    /// Probability of each noise word, indexed by its value.
    pub fn joint_pmf(&self) -> &[f64] {
        &self.joint
    }

    /// `alpha_i = P(Z_i = 1)` for every bit.
    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.marginals[i]
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `P(Z_pipe = 1 | Z_j = b_j for (j, b_j) in condition)`.
    ///
    /// Negative indices are the constant-zero bits below pipe 0. A condition of
    /// probability zero yields the unconditional marginal.
    pub fn conditional_alpha(&self, pipe: usize, condition: &[(i64, u8)]) -> f64 {
        if condition.iter().any(|&(j, b)| j < 0 && b != 0) {
            return self.marginals[pipe];
        }
        let mut mask = 0usize;
        let mut want = 0usize;
        for &(j, b) in condition.iter().filter(|(j, _)| *j >= 0) {
            mask |= 1 << j;
            want |= usize::from(b != 0) << j;
        }
        let (mut total, mut ones) = (0.0, 0.0);
        for (w, &p) in self.joint.iter().enumerate() {
            if w & mask == want {
                total += p;
                if (w >> pipe) & 1 == 1 {
                    ones += p;
                }
            }
        }
        if total > 0.0 {
            ones / total
        } else {
            self.marginals[pipe]
        }
    }

    /// Law of the state bits `Z_{members[j]}` (bit `j` of the state value)
    /// together with the crossover of `pipe` given each state.
    pub fn state_table(&self, pipe: usize, members: &[i64]) -> StateTable {
        let q = members.len();
        let mut probs = vec![0.0; 1 << q];
        let mut ones = vec![0.0; 1 << q];
        for (w, &p) in self.joint.iter().enumerate() {
            let s = state_of(w as u64, members);
            probs[s] += p;
            if (w >> pipe) & 1 == 1 {
                ones[s] += p;
            }
        }
        let alpha = self.marginals[pipe];
        let conditionals = probs
            .iter()
            .zip(&ones)
            .map(|(&p, &o)| if p > 0.0 { o / p } else { alpha })
            .collect();
        StateTable {
            probs,
            conditionals,
        }
    }
}

/// Interval labels `[lo, hi)` covered by the unified noise support.
fn label_range(ch: &ChannelParams, vbc: &VbcParams) -> (i64, i64) {
    let g = vbc.gamma();
    let lo = -((g * ch.peak()).ceil() as i64);
    let hi = (g * (ch.peak() + 2.0 * vbc.beta())).ceil() as i64;
    (lo, hi)
}

/// Packs the bits of `word` at `members` (negative members read 0).
pub fn state_of(word: u64, members: &[i64]) -> usize {
    members.iter().enumerate().fold(0usize, |acc, (j, &m)| {
        if m >= 0 {
            acc | ((((word >> m) & 1) as usize) << j)
        } else {
            acc
        }
    })
}

/// State law and per-state crossover of one pipe.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTable {
    /// `P(S = s)`.
    pub probs: Vec<f64>,
    /// `P(Z_i = 1 | S = s)`; the marginal where `P(S = s) = 0`.
    pub conditionals: Vec<f64>,
}

impl StateTable {
    /// `E_S[min(c, 1 - c)]`: crossover after flipping on states with `c > 1/2`.
    pub fn flipped_crossover(&self) -> f64 {
        self.probs
            .iter()
            .zip(&self.conditionals)
            .map(|(p, c)| p * c.min(1.0 - c))
            .sum()
    }

    /// States whose conditional crossover exceeds one half.
    pub fn flip_mask(&self) -> Vec<bool> {
        self.conditionals.iter().map(|&c| c > 0.5).collect()
    }
}

/// Per-pipe state index sets `A_i`, all of the same size `q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSelection {
    sets: Vec<Vec<i64>>,
}

impl StateSelection {
    /// `A_i = {i - q, ..., i - 1}` for every pipe `i < n_bits`.
    pub fn previous(n_bits: u32, q: usize) -> Result<Self> {
        if q == 0 || q >= n_bits as usize {
            return Err(Error::param(
                "q",
                format!("state size must lie in 1..={}, got {q}", n_bits.saturating_sub(1)),
            ));
        }
        let sets = (0..n_bits as i64)
            .map(|i| (i - q as i64..i).collect())
            .collect();
        Ok(Self { sets })
    }

    /// Explicit sets; `sets[i]` must lie in `{i - N + 1, ..., i - 1}`.
    pub fn custom(n_bits: u32, sets: Vec<Vec<i64>>) -> Result<Self> {
        if sets.len() != n_bits as usize {
            return Err(Error::LengthMismatch {
                expected: n_bits as usize,
                actual: sets.len(),
            });
        }
        let q = sets.first().map_or(0, Vec::len);
        for (i, set) in sets.iter().enumerate() {
            let i = i as i64;
            if set.len() != q {
                return Err(Error::param("state", "all state sets must have the same size"));
            }
            if set.iter().any(|&m| m >= i || m <= i - n_bits as i64) {
                return Err(Error::param(
                    "state",
                    format!("members of the set for pipe {i} must lie in ({}, {i})", i - n_bits as i64),
                ));
            }
            let mut sorted = set.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != set.len() {
                return Err(Error::param("state", "state sets must not repeat members"));
            }
        }
        Ok(Self { sets })
    }

    pub fn state_size(&self) -> usize {
        self.sets.first().map_or(0, Vec::len)
    }

    pub fn set(&self, pipe: usize) -> &[i64] {
        &self.sets[pipe]
    }

    pub fn sets(&self) -> &[Vec<i64>] {
        &self.sets
    }
}

/// Empirical noise-word frequencies from `samples` Gaussian draws restricted
/// to `[-(A + beta), A + beta]`.
pub fn montecarlo_noise_check(
    ch: &ChannelParams,
    vbc: &VbcParams,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = ch.peak() + vbc.beta();
    let mut counts = vec![0u64; vbc.word_count()];
    let mut kept = 0;
    while kept < samples {
        let z: f64 = ch.sigma() * rng.sample::<f64, _>(StandardNormal);
        if z.abs() > bound {
            continue;
        }
        let w = binarize_noise(z, vbc.beta(), vbc.gamma(), vbc.n_bits());
        counts[w.value() as usize] += 1;
        kept += 1;
    }
    counts
        .into_iter()
        .map(|c| c as f64 / samples as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> NoiseModel {
        let ch = ChannelParams::peak_only(2.0).unwrap();
        let vbc = VbcParams::new(&ch, 3.0, 1.0).unwrap();
        NoiseModel::build(&ch, &vbc).unwrap()
    }

    #[test]
    fn table_one_marginals() {
        let ch = ChannelParams::peak_only(10.0).unwrap();
        let vbc = VbcParams::new(&ch, 5.0, 10.0).unwrap();
        let m = NoiseModel::build(&ch, &vbc).unwrap();
        let expected = [0.5, 0.5, 0.5, 0.5, 0.54, 0.88, 0.08, 0.0];
        for (a, e) in m.marginals().iter().zip(expected) {
            assert!((a - e).abs() < 0.005, "{a} vs {e}");
        }
        assert!((m.joint_pmf().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn toy_joint_and_conditionals() {
        let m = toy();
        assert_eq!(m.n_bits(), 3);
        let t = m.state_table(2, &[0, 1]);
        let joint = [0.1573, 0.1573, 0.3427, 0.3427];
        let cond = [0.8640, 0.1360, 0.0039, 0.0039];
        for s in 0..4 {
            assert!((t.probs[s] - joint[s]).abs() < 5e-4);
            assert!((t.conditionals[s] - cond[s]).abs() < 5e-4);
        }
        assert!((m.alpha(2) - 0.16).abs() < 5e-3);
        assert!((m.conditional_alpha(2, &[(0, 0), (1, 0)]) - 0.864).abs() < 5e-4);
        assert_eq!(m.conditional_alpha(2, &[]), m.alpha(2));
        assert!((t.flipped_crossover() - 0.0455).abs() < 5e-4);
    }

    #[test]
    fn impossible_condition_falls_back_to_marginal() {
        let m = toy();
        assert_eq!(m.conditional_alpha(2, &[(-1, 1)]), m.alpha(2));
        let t = m.state_table(1, &[-1]);
        assert_eq!(t.probs[1], 0.0);
        assert_eq!(t.conditionals[1], m.alpha(1));
    }

    #[test]
    fn table_cap_is_enforced() {
        let ch = ChannelParams::peak_only(10.0).unwrap();
        let vbc = VbcParams::new(&ch, 5.0, 10.0).unwrap();
        assert!(matches!(
            NoiseModel::build_with_cap(&ch, &vbc, 128),
            Err(Error::TableTooLarge { n_bits: 8, cap: 128 })
        ));
    }

    #[test]
    fn state_selection_rules() {
        let s = StateSelection::previous(4, 2).unwrap();
        assert_eq!(s.set(0), &[-2, -1]);
        assert_eq!(s.set(3), &[1, 2]);
        assert!(StateSelection::previous(4, 4).is_err());
        assert!(StateSelection::custom(2, vec![vec![-1], vec![1]]).is_err());
        assert!(StateSelection::custom(2, vec![vec![-1], vec![0]]).is_ok());
    }

    #[test]
    fn montecarlo_is_deterministic() {
        let m = toy();
        let a = montecarlo_noise_check(m.channel(), m.vbc(), 1000, 7);
        let b = montecarlo_noise_check(m.channel(), m.vbc(), 1000, 7);
        assert_eq!(a, b);
    }
}
