//! Blahut–Arimoto capacity of discrete memoryless channels, with an optional
//! average input-cost constraint, applied to the quantized channel seen by the
//! decomposition and to a finely discretized intensity channel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vbc::{gaussian_mass, q_function, snap_floor, ChannelParams, VbcParams};

/// Largest bit width accepted by [`DiscreteChannel::from_vbc`].
pub const MAX_CHANNEL_BITS: u32 = 14;

/// Row entries below this are dropped from the banded storage.
const NEGLIGIBLE: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
struct Row {
    start: usize,
    probs: Vec<f64>,
    /// `sum_y W log2 W`.
    neg_entropy: f64,
}

/// Transition matrix `W(y | x)` with a per-input cost.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannel {
    costs: Vec<f64>,
    rows: Vec<Row>,
    n_outputs: usize,
}

impl DiscreteChannel {
    /// Dense constructor; every row must be a probability vector.
    pub fn from_matrix(costs: Vec<f64>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        if costs.len() != matrix.len() || matrix.is_empty() {
            return Err(Error::LengthMismatch {
                expected: costs.len(),
                actual: matrix.len(),
            });
        }
        let n_outputs = matrix[0].len();
        for row in &matrix {
            if row.len() != n_outputs {
                return Err(Error::LengthMismatch {
                    expected: n_outputs,
                    actual: row.len(),
                });
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::param("matrix", "rows must be probability vectors"));
            }
        }
        let rows = matrix.into_iter().map(band).collect();
        Ok(Self {
            costs,
            rows,
            n_outputs,
        })
    }

    /// Quantized channel from integer word `x` to the output word
    /// `floor(gamma (x / gamma + Z + beta))`, with everything outside
    /// `[0, gamma (A + 2 beta)]` sent to a final erasure output. Inputs are the
    /// words `0..=floor(gamma A)`, costs are their values.
    pub fn from_vbc(ch: &ChannelParams, vbc: &VbcParams) -> Result<Self> {
        if vbc.n_bits() > MAX_CHANNEL_BITS {
            return Err(Error::param(
                "gamma",
                format!("{} bits exceed the matrix limit of {MAX_CHANNEL_BITS}", vbc.n_bits()),
            ));
        }
        let g = vbc.gamma();
        let top = g * (ch.peak() + 2.0 * vbc.beta());
        let bins = top.ceil() as usize;
        let inputs = snap_floor(g * ch.peak()) as usize + 1;
        let scale = g * ch.sigma();
        let shift = g * vbc.beta();
        let rows: Vec<Row> = (0..inputs)
            .into_par_iter()
            .map(|x| {
                let mean = x as f64 + shift;
                let mut row: Vec<f64> = (0..bins)
                    .map(|j| {
                        let hi = ((j + 1) as f64).min(top);
                        gaussian_mass((j as f64 - mean) / scale, (hi - mean) / scale)
                    })
                    .collect();
                row.push(q_function(mean / scale) + q_function((top - mean) / scale));
                band(row)
            })
            .collect();
        Ok(Self {
            costs: (0..inputs).map(|x| x as f64).collect(),
            rows,
            n_outputs: bins + 1,
        })
    }

    /// Intensity channel with inputs on a uniform grid over `[0, A]` and
    /// outputs binned at `bin_width` over `[-tail, A + tail]`, plus one bin
    /// for each tail beyond.
    pub fn imdd_grid(ch: &ChannelParams, grid_points: usize, bin_width: f64, tail: f64) -> Result<Self> {
        if grid_points < 2 {
            return Err(Error::param("grid_points", "need at least two input points"));
        }
        if !(bin_width > 0.0 && tail > 0.0) {
            return Err(Error::param("bin_width", "bin width and tail must be positive"));
        }
        let a = ch.peak();
        let s = ch.sigma();
        let lo = -tail;
        let inner = ((a + 2.0 * tail) / bin_width).ceil() as usize;
        let hi = lo + inner as f64 * bin_width;
        let rows: Vec<Row> = (0..grid_points)
            .into_par_iter()
            .map(|k| {
                let x = a * k as f64 / (grid_points - 1) as f64;
                let mut row = Vec::with_capacity(inner + 2);
                row.push(q_function((x - lo) / s));
                row.extend((0..inner).map(|j| {
                    let e0 = lo + j as f64 * bin_width;
                    gaussian_mass((e0 - x) / s, (e0 + bin_width - x) / s)
                }));
                row.push(q_function((hi - x) / s));
                band(row)
            })
            .collect();
        Ok(Self {
            costs: (0..grid_points)
                .map(|k| a * k as f64 / (grid_points - 1) as f64)
                .collect(),
            rows,
            n_outputs: inner + 2,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Dense copy of row `x`.
    pub fn row(&self, x: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_outputs];
        let r = &self.rows[x];
        out[r.start..r.start + r.probs.len()].copy_from_slice(&r.probs);
        out
    }

    /// Mutual information (bits) for input law `p`.
    pub fn mutual_information(&self, p: &[f64]) -> f64 {
        let out = self.output_law(p);
        let d = self.divergences(&out);
        p.iter().zip(&d).map(|(a, b)| a * b).sum()
    }

    fn output_law(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_outputs];
        for (r, &px) in self.rows.iter().zip(p) {
            if px == 0.0 {
                continue;
            }
            for (o, w) in out[r.start..].iter_mut().zip(&r.probs) {
                *o += px * w;
            }
        }
        out
    }

    /// `D(W(.|x) || out)` for every input.
    fn divergences(&self, out: &[f64]) -> Vec<f64> {
        let log_out: Vec<f64> = out.iter().map(|o| if *o > 0.0 { o.log2() } else { 0.0 }).collect();
        self.rows
            .iter()
            .map(|r| {
                let cross: f64 = r.probs.iter().zip(&log_out[r.start..]).map(|(w, lo)| w * lo).sum();
                r.neg_entropy - cross
            })
            .collect()
    }
}

fn band(row: Vec<f64>) -> Row {
    let first = row.iter().position(|&w| w > NEGLIGIBLE).unwrap_or(0);
    let last = row.iter().rposition(|&w| w > NEGLIGIBLE).unwrap_or(0);
    let probs = row[first..=last.max(first)].to_vec();
    let neg_entropy = probs.iter().filter(|w| **w > 0.0).map(|w| w * w.log2()).sum();
    Row {
        start: first,
        probs,
        neg_entropy,
    }
}

/// Blahut–Arimoto options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlahutArimoto {
    /// Stop once the duality gap falls below this (bits).
    pub tol: f64,
    pub max_iters: usize,
    /// Upper bound on the mean input cost.
    pub avg_limit: Option<f64>,
    /// Record the objective after every iteration.
    pub trace: bool,
}

impl Default for BlahutArimoto {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: 10_000,
            avg_limit: None,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Bits per channel use.
    pub capacity: f64,
    pub input: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
    /// Lagrange multiplier on the mean cost (0 when the limit is inactive).
    pub multiplier: f64,
    pub mean_cost: f64,
    /// Objective `I(p) - s E[cost]` per iteration of the final run.
    pub trace: Vec<f64>,
}

struct Run {
    input: Vec<f64>,
    iterations: usize,
    gap: f64,
    trace: Vec<f64>,
}

/// One Blahut–Arimoto run maximizing `I(p) - s E_p[cost]`, started at `start`.
///
/// The multiplicative update is over-relaxed (`p * 2^(mu score)`) while that
/// keeps increasing the objective; `mu = 1` is the plain update, which never
/// decreases it.
fn run(chan: &DiscreteChannel, s: f64, start: Vec<f64>, opts: &BlahutArimoto) -> Result<Run> {
    const MU_MAX: f64 = 1e4;
    const POLISH_EVERY: usize = 200;
    let scores = |p: &[f64]| -> Vec<f64> {
        let d = chan.divergences(&chan.output_law(p));
        d.iter().zip(&chan.costs).map(|(d, c)| d - s * c).collect()
    };
    let objective = |p: &[f64], sc: &[f64]| -> f64 { p.iter().zip(sc).map(|(a, b)| a * b).sum() };
    let step = |p: &[f64], sc: &[f64], top: f64, mu: f64| -> Vec<f64> {
        let w: Vec<f64> = p.iter().zip(sc).map(|(a, x)| a * (mu * (x - top)).exp2()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    };

    let mut p = start;
    let mut score = scores(&p);
    let mut value = objective(&p, &score);
    let mut trace = Vec::new();
    let mut gap = f64::INFINITY;
    let mut mu = 1.0;
    for it in 1..=opts.max_iters {
        if it % POLISH_EVERY == 0 {
            if let Some(polished) = polish(chan, s, &p) {
                let polished_score = scores(&polished);
                let polished_value = objective(&polished, &polished_score);
                if polished_value >= value && duality_gap(&polished, &polished_score) < opts.tol {
                    p = polished;
                    score = polished_score;
                    value = polished_value;
                }
            }
        }
        if opts.trace {
            trace.push(value);
        }
        let top = score.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        gap = duality_gap(&p, &score);
        if gap < opts.tol {
            return Ok(Run {
                input: p,
                iterations: it,
                gap,
                trace,
            });
        }
        loop {
            let next = step(&p, &score, top, mu);
            let next_score = scores(&next);
            let next_value = objective(&next, &next_score);
            if mu == 1.0 || next_value >= value {
                p = next;
                score = next_score;
                value = next_value.max(value);
                if mu > 1.0 || it > 1 {
                    mu = (mu * 1.5).min(MU_MAX);
                }
                break;
            }
            mu = (mu / 4.0).max(1.0);
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        gap,
    })
}

/// `max score - log2 E_p[2^score]`, an upper bound on the distance of the
/// objective from its maximum.
fn duality_gap(p: &[f64], score: &[f64]) -> f64 {
    let top = score.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = p.iter().zip(score).map(|(a, x)| a * (x - top).exp2()).sum();
    -z.log2()
}

/// Newton iteration on the optimality conditions restricted to the inputs
/// that carry mass: equal scores on the support, unit total mass. Inputs that
/// hit zero leave the support and violators outside it are pulled in.
fn polish(chan: &DiscreteChannel, s: f64, start: &[f64]) -> Option<Vec<f64>> {
    let top = start.iter().cloned().fold(0.0, f64::max);
    let mut support: Vec<usize> = (0..start.len()).filter(|&x| start[x] > 1e-6 * top).collect();
    let mut p = vec![0.0; start.len()];
    let total: f64 = support.iter().map(|&x| start[x]).sum();
    for &x in &support {
        p[x] = start[x] / total;
    }
    let mut lambda = f64::NAN;
    for _ in 0..200 {
        let out = chan.output_law(&p);
        let score: Vec<f64> = chan
            .divergences(&out)
            .iter()
            .zip(&chan.costs)
            .map(|(d, c)| d - s * c)
            .collect();
        if lambda.is_nan() {
            lambda = p.iter().zip(&score).map(|(a, b)| a * b).sum();
        }
        let residual: Vec<f64> = support.iter().map(|&x| score[x] - lambda).collect();
        let mass: f64 = support.iter().map(|&x| p[x]).sum::<f64>() - 1.0;
        if residual.iter().all(|r| r.abs() < 1e-14) && mass.abs() < 1e-15 {
            // converged on this support; pull in the worst violator if any
            let worst = (0..p.len())
                .filter(|x| !support.contains(x))
                .max_by(|&a, &b| score[a].total_cmp(&score[b]));
            match worst {
                Some(x) if score[x] > lambda + 1e-14 => {
                    support.push(x);
                    support.sort_unstable();
                    continue;
                }
                _ => return Some(p),
            }
        }
        let m = support.len();
        let rows: Vec<Vec<f64>> = support.iter().map(|&x| chan.row(x)).collect();
        let inv: Vec<f64> = out.iter().map(|o| if *o > 0.0 { 1.0 / o } else { 0.0 }).collect();
        let mut a = vec![vec![0.0; m + 2]; m + 1];
        for i in 0..m {
            for j in i..m {
                let v: f64 = rows[i]
                    .iter()
                    .zip(&rows[j])
                    .zip(&inv)
                    .map(|((u, w), k)| u * w * k)
                    .sum::<f64>()
                    / -std::f64::consts::LN_2;
                a[i][j] = v;
                a[j][i] = v;
            }
            a[i][m] = -1.0;
            a[m][i] = 1.0;
            a[i][m + 1] = -residual[i];
        }
        a[m][m + 1] = -mass;
        let delta = solve(a)?;
        let mut t: f64 = 1.0;
        let mut blocking = None;
        for (i, &x) in support.iter().enumerate() {
            if delta[i] < 0.0 && p[x] + delta[i] < 0.0 {
                let ti = -p[x] / delta[i];
                if ti < t {
                    t = ti;
                    blocking = Some(i);
                }
            }
        }
        for (i, &x) in support.iter().enumerate() {
            p[x] = (p[x] + t * delta[i]).max(0.0);
        }
        lambda += t * delta[m];
        if let Some(i) = blocking {
            p[support[i]] = 0.0;
            support.remove(i);
            if support.is_empty() {
                return None;
            }
        }
    }
    None
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][n] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn mean_cost(chan: &DiscreteChannel, p: &[f64]) -> f64 {
    p.iter().zip(&chan.costs).map(|(a, c)| a * c).sum()
}

/// Capacity of `chan`, optionally under `E[cost] <= avg_limit`, which is
/// handled by bisection on the Lagrange multiplier.
pub fn blahut_arimoto(chan: &DiscreteChannel, opts: &BlahutArimoto) -> Result<CapacityResult> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::param("tol", "must be positive"));
    }
    let uniform = vec![1.0 / chan.n_inputs() as f64; chan.n_inputs()];
    let free = run(chan, 0.0, uniform, opts)?;
    let limit = match opts.avg_limit {
        Some(l) if mean_cost(chan, &free.input) > l * (1.0 + 1e-4) => l,
        _ => return Ok(finish(chan, free, 0.0)),
    };
    if chan.costs.iter().cloned().fold(f64::INFINITY, f64::min) > limit {
        return Err(Error::AverageViolation {
            used: chan.costs.iter().cloned().fold(f64::INFINITY, f64::min),
            limit,
        });
    }
    // bracket the multiplier: cost decreases as s grows
    let mut lo = 0.0;
    let mut hi = 1.0 / chan.costs.iter().cloned().fold(0.0, f64::max).max(1e-12);
    let mut warm = free.input;
    let mut best = loop {
        let r = run(chan, hi, warm.clone(), opts)?;
        if mean_cost(chan, &r.input) <= limit {
            break r;
        }
        lo = hi;
        hi *= 2.0;
        warm = r.input;
        if hi > 1e6 {
            return Err(Error::param("avg_limit", "cost limit cannot be met"));
        }
    };
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let r = run(chan, mid, best.input.clone(), opts)?;
        let c = mean_cost(chan, &r.input);
        if c > limit {
            lo = mid;
        } else {
            hi = mid;
            best = r;
            if c >= limit * (1.0 - 1e-6) {
                break;
            }
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    Ok(finish(chan, best, hi))
}

fn finish(chan: &DiscreteChannel, r: Run, multiplier: f64) -> CapacityResult {
    CapacityResult {
        capacity: chan.mutual_information(&r.input),
        mean_cost: mean_cost(chan, &r.input),
        input: r.input,
        iterations: r.iterations,
        gap: r.gap,
        multiplier,
        trace: r.trace,
    }
}

/// Discretization of the intensity-channel capacity reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyConfig {
    pub grid_points: usize,
    /// Output bin width in units of `sigma`.
    pub bin_width: f64,
    /// Binned output range beyond `[0, A]` in units of `sigma`.
    pub tail: f64,
    pub solver: BlahutArimoto,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            grid_points: 256,
            bin_width: 1.0 / 16.0,
            tail: 6.0,
            solver: BlahutArimoto::default(),
        }
    }
}

/// Capacity (bits) of the peak/average-constrained intensity channel on a
/// fine input grid, used as the reference curve.
pub fn imdd_capacity_proxy(ch: &ChannelParams, cfg: &ProxyConfig) -> Result<CapacityResult> {
    if cfg.grid_points < 256 {
        return Err(Error::param("grid_points", format!("need at least 256, got {}", cfg.grid_points)));
    }
    let chan = DiscreteChannel::imdd_grid(
        ch,
        cfg.grid_points,
        cfg.bin_width * ch.sigma(),
        cfg.tail * ch.sigma(),
    )?;
    let mut opts = cfg.solver.clone();
    opts.avg_limit = (ch.average() < ch.peak()).then_some(ch.average());
    blahut_arimoto(&chan, &opts)
}

/// Capacity of the quantized channel at `(beta, gamma)`, under `gamma E`
/// when the average constraint is tighter than the peak.
pub fn vbc_capacity(ch: &ChannelParams, vbc: &VbcParams, solver: &BlahutArimoto) -> Result<CapacityResult> {
    let chan = DiscreteChannel::from_vbc(ch, vbc)?;
    let mut opts = solver.clone();
    opts.avg_limit = (ch.average() < ch.peak()).then_some(vbc.gamma() * ch.average());
    blahut_arimoto(&chan, &opts)
}
