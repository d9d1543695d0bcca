use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    bsc_mutual_information, evaluate, flipped_crossover, rate_sd, rate_sd_bsc, select_states,
    PipeAllocation, RateReport, Scheme, SchemeConfig, FEASIBILITY_SLACK,
};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::vbc::{ChannelParams, VbcParams};

/// Pipes chosen from the most significant down while `sum 2^i <= peak_level`.
pub fn greedy_active_set(n_bits: u32, peak_level: f64) -> Vec<usize> {
    let mut used = 0.0;
    let mut active = Vec::new();
    for i in (0..n_bits as usize).rev() {
        let w = (i as f64).exp2();
        if used + w <= peak_level + FEASIBILITY_SLACK {
            used += w;
            active.push(i);
        }
    }
    active.reverse();
    active
}

fn usage(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(i, x)| x * (i as f64).exp2()).sum()
}

/// Lowers `p` on the active pipes (largest first, `keep` last) until the
/// mean word value fits the budget.
fn project(p: &mut [f64], active: &[usize], keep: Option<usize>, budget: f64) {
    let mut excess = usage(p) - budget;
    let order = active
        .iter()
        .rev()
        .copied()
        .filter(|&i| Some(i) != keep)
        .chain(keep);
    for i in order {
        if excess <= FEASIBILITY_SLACK {
            break;
        }
        let w = (i as f64).exp2();
        let cut = (excess / w).min(p[i]);
        p[i] -= cut;
        excess -= cut * w;
    }
}

/// Cyclic coordinate grid search over `p_i` on the active pipes, first on
/// `{0, 0.05, ..., 1}` then within `+-0.05` at step `0.005`.
fn coordinate_search(
    n_bits: usize,
    active: &[usize],
    budget: f64,
    objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    const MAX_CYCLES: usize = 25;
    let mut p = vec![0.0; n_bits];
    for &i in active {
        p[i] = 0.5;
    }
    project(&mut p, active, None, budget);
    let mut best = objective(&p)?;
    for refine in [false, true] {
        for _ in 0..MAX_CYCLES {
            let mut improved = false;
            for &i in active.iter().rev() {
                let center = p.clone();
                let candidates: Vec<f64> = if refine {
                    (-10..=10)
                        .map(|k| center[i] + k as f64 * 0.005)
                        .filter(|c| (0.0..=1.0).contains(c))
                        .collect()
                } else {
                    (0..=20).map(|k| k as f64 * 0.05).collect()
                };
                for c in candidates {
                    let mut trial = center.clone();
                    trial[i] = c;
                    project(&mut trial, active, Some(i), budget);
                    if trial == p {
                        continue;
                    }
                    let v = objective(&trial)?;
                    if v > best + 1e-12 {
                        best = v;
                        p = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    Ok(p)
}

/// Maximizes the rate of `cfg.scheme` over allocations on the greedy active set.
pub fn optimize_allocation(noise: &NoiseModel, cfg: &SchemeConfig) -> Result<RateReport> {
    let n = noise.n_bits();
    let g = noise.vbc().gamma();
    let active = greedy_active_set(n, g * noise.channel().peak());
    let budget = g * noise.channel().average();
    let eps_bar = noise.vbc().erasure_bound();
    let start = PipeAllocation::uniform(n, &active, 0.5)?;

    match cfg.scheme {
        Scheme::Id | Scheme::Sd | Scheme::SdBsc => {
            // separable objectives: per-pipe mixtures of BSC terms
            let selection = match cfg.scheme {
                Scheme::Id => None,
                _ => Some(select_states(noise, &start, cfg)?),
            };
            let mixtures: Vec<Vec<(f64, f64)>> = (0..n as usize)
                .map(|i| match (&selection, cfg.scheme) {
                    (None, _) => vec![(1.0, noise.alpha(i))],
                    (Some(sel), Scheme::SdBsc) => vec![(1.0, flipped_crossover(noise, i, sel.set(i)))],
                    (Some(sel), _) => {
                        let t = noise.state_table(i, sel.set(i));
                        t.probs.into_iter().zip(t.conditionals).filter(|(w, _)| *w > 0.0).collect()
                    }
                })
                .collect();
            let mut objective = |p: &[f64]| -> Result<f64> {
                Ok(p
                    .iter()
                    .zip(&mixtures)
                    .filter(|(&pi, _)| pi > 0.0)
                    .map(|(&pi, mix)| mix.iter().map(|&(w, c)| w * bsc_mutual_information(pi, c)).sum::<f64>())
                    .sum())
            };
            let p = coordinate_search(n as usize, &active, budget, &mut objective)?;
            let alloc = PipeAllocation::new(p)?;
            match (cfg.scheme, selection) {
                (Scheme::Sd, Some(sel)) => rate_sd(noise, &alloc, &sel, eps_bar),
                (Scheme::SdBsc, Some(sel)) => rate_sd_bsc(noise, &alloc, &sel, eps_bar),
                _ => evaluate(noise, &alloc, cfg),
            }
        }
        Scheme::Cd | Scheme::CdBac => {
            let mut objective = |p: &[f64]| -> Result<f64> {
                Ok(evaluate(noise, &PipeAllocation::new(p.to_vec())?, cfg)?.total)
            };
            let p = coordinate_search(n as usize, &active, budget, &mut objective)?;
            evaluate(noise, &PipeAllocation::new(p)?, cfg)
        }
    }
}

/// Margin and scale values swept by [`optimize_params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl ParamGrid {
    pub fn new(betas: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() || gammas.is_empty() {
            return Err(Error::param("grid", "beta and gamma grids must be nonempty"));
        }
        Ok(Self { betas, gammas })
    }

    /// `beta` in `{3, 3.25, ..., 8}` and 16 log-spaced `gamma` over `[1/sigma, 2/sigma)`.
    ///
    /// Doubling `gamma` only shifts the noise bits up by one pipe, so one
    /// octave covers every distinct operating point.
    pub fn default_for(ch: &ChannelParams) -> Self {
        Self {
            betas: (0..=20).map(|k| 3.0 + 0.25 * k as f64).collect(),
            gammas: (0..16).map(|j| (j as f64 / 16.0).exp2() / ch.sigma()).collect(),
        }
    }

    pub fn single(beta: f64, gamma: f64) -> Self {
        Self {
            betas: vec![beta],
            gammas: vec![gamma],
        }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.betas
            .iter()
            .flat_map(|&b| self.gammas.iter().map(move |&g| (b, g)))
            .collect()
    }
}

/// Best [`optimize_allocation`] result over the `(beta, gamma)` grid. Points
/// where the decomposition is undefined are skipped; ties keep the first
/// point in grid order.
pub fn optimize_params(ch: &ChannelParams, cfg: &SchemeConfig, grid: &ParamGrid) -> Result<RateReport> {
    let results: Vec<Result<Option<RateReport>>> = grid
        .points()
        .into_par_iter()
        .map(|(beta, gamma)| {
            let vbc = match VbcParams::new(ch, beta, gamma) {
                Ok(v) => v,
                Err(_) => return Ok(None),
            };
            let noise = match NoiseModel::build(ch, &vbc) {
                Ok(m) => m,
                Err(Error::TableTooLarge { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            optimize_allocation(&noise, cfg).map(Some)
        })
        .collect();
    let mut best: Option<RateReport> = None;
    for r in results {
        if let Some(report) = r? {
            if best.as_ref().is_none_or(|b| report.total > b.total) {
                best = Some(report);
            }
        }
    }
    best.ok_or_else(|| Error::param("grid", "no grid point yields a valid decomposition"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_matches_table_five() {
        // gamma A = 112.0025: pipe 7 (128) does not fit
        assert_eq!(greedy_active_set(8, 4.4801 * 25.0), vec![4, 5, 6]);
        assert_eq!(greedy_active_set(4, 10.0), vec![1, 3]);
        assert!(greedy_active_set(4, 0.5).is_empty());
    }

    #[test]
    fn projection_lowers_largest_pipes_first() {
        let mut p = vec![0.5, 0.5, 0.5];
        project(&mut p, &[0, 1, 2], None, 2.0);
        assert_eq!(p, vec![0.5, 0.5, 0.125]);
        let mut p = vec![0.5, 0.5, 0.5];
        project(&mut p, &[0, 1, 2], Some(2), 2.0);
        assert_eq!(p, vec![0.0, 0.0, 0.5]);
        let mut p = vec![0.5, 0.5, 1.0];
        project(&mut p, &[0, 1, 2], Some(2), 2.0);
        assert_eq!(p, vec![0.0, 0.0, 0.5]);
    }

    #[test]
    fn symmetric_optimum_is_half() {
        let ch = ChannelParams::peak_only(25.0).unwrap();
        let vbc = VbcParams::new(&ch, 5.0, 4.4801).unwrap();
        let noise = NoiseModel::build(&ch, &vbc).unwrap();
        let r = optimize_allocation(&noise, &SchemeConfig::new(Scheme::Id, 0)).unwrap();
        assert_eq!(r.active_pipes(), vec![4, 5, 6]);
        for i in [4, 5, 6] {
            assert_eq!(r.allocation.probs()[i], 0.5);
        }
    }
}
