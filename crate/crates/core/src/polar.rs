//! Polar codes: Bhattacharyya construction for a design BSC, encoding by the
//! natural-order polar transform and successive-cancellation decoding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magnitude cap for channel LLRs.
pub const LLR_CAP: f64 = 40.0;

/// Check-node update used by the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SoftCheck {
    #[default]
    MinSum,
    Exact,
}

/// Treatment of erased channel outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErasureFill {
    /// LLR 0.
    #[default]
    Neutral,
    /// Replace the erased bit by a fair coin flip and treat it as received.
    Random,
}

/// LLR `ln(P(0)/P(1))` of a BSC(`crossover`) output; `None` is an erasure.
pub fn bsc_llr(received: Option<u8>, crossover: f64) -> f64 {
    let Some(bit) = received else {
        return 0.0;
    };
    let mag = ((1.0 - crossover) / crossover).ln().clamp(-LLR_CAP, LLR_CAP);
    if bit == 0 {
        mag
    } else {
        -mag
    }
}

/// In-place polar transform `x = u F^{(x)m}` (no bit reversal); self-inverse.
pub fn polar_transform(v: &mut [u8]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in v.chunks_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x ^= *y;
            }
        }
        h *= 2;
    }
}

/// Bhattacharyya parameter kept as `(ln z, ln(1 - z))` so that both
/// near-perfect and near-useless channels stay distinguishable.
#[derive(Debug, Clone, Copy)]
struct Bhat {
    ln_z: f64,
    ln_y: f64,
}

impl Bhat {
    fn from_crossover(a: f64) -> Self {
        let z = 2.0 * (a * (1.0 - a)).sqrt();
        // 1 - z = (sqrt(1 - a) - sqrt(a))^2
        let d = (1.0 - a).sqrt() - a.sqrt();
        Self {
            ln_z: z.ln(),
            ln_y: 2.0 * d.abs().ln(),
        }
    }

    /// `2z - z^2 = z (1 + (1 - z))`.
    fn minus(self) -> Self {
        Self {
            ln_z: self.ln_z + self.ln_y.exp().ln_1p(),
            ln_y: 2.0 * self.ln_y,
        }
    }

    /// `z^2`, with `1 - z^2 = (1 - z)(1 + z)`.
    fn plus(self) -> Self {
        Self {
            ln_z: 2.0 * self.ln_z,
            ln_y: self.ln_y + self.ln_z.exp().ln_1p(),
        }
    }

    /// Total order on reliability, larger is worse.
    fn badness(self) -> (u8, f64) {
        if self.ln_z > 0.5f64.ln() {
            (1, -self.ln_y)
        } else {
            (0, self.ln_z)
        }
    }
}

fn bhattacharyya(m: u32, a: f64) -> Vec<Bhat> {
    let mut level = vec![Bhat::from_crossover(a)];
    for _ in 0..m {
        // index bits are consumed from the most significant one down
        let mut next = Vec::with_capacity(level.len() * 2);
        next.extend(level.iter().map(|b| b.minus()));
        next.extend(level.iter().map(|b| b.plus()));
        // reorder so that the new (least significant) split is interleaved
        level = interleave(&next);
    }
    level
}

/// Maps the `[minus..., plus...]` layout to index order where the newest
/// split is the least significant bit.
fn interleave(v: &[Bhat]) -> Vec<Bhat> {
    let h = v.len() / 2;
    let mut out = Vec::with_capacity(v.len());
    for j in 0..h {
        out.push(v[j]);
        out.push(v[j + h]);
    }
    out
}

/// A polar code of length `n = 2^m` with `k` information positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarCode {
    n: usize,
    k: usize,
    design_crossover: f64,
    frozen: Vec<bool>,
    info: Vec<usize>,
    /// `frozen_before[j]` = number of frozen indices below `j`.
    frozen_before: Vec<u32>,
}

impl PolarCode {
    /// Freezes the `n - k` synthetic channels with the largest Bhattacharyya
    /// parameter for a BSC(`design_crossover`); ties freeze the lower index.
    pub fn construct(n: usize, k: usize, design_crossover: f64) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::param("n", format!("block length {n} is not a power of two")));
        }
        if k > n {
            return Err(Error::param("k", format!("{k} exceeds the block length {n}")));
        }
        if design_crossover == 0.0 {
            return Err(Error::param(
                "design_crossover",
                "0 gives no ordering; use a tiny floor such as 1e-9",
            ));
        }
        if !(design_crossover > 0.0 && design_crossover <= 0.5) {
            return Err(Error::param(
                "design_crossover",
                format!("must lie in (0, 0.5], got {design_crossover}"),
            ));
        }
        let params = bhattacharyya(n.trailing_zeros(), design_crossover);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (ca, va) = params[a].badness();
            let (cb, vb) = params[b].badness();
            cb.cmp(&ca)
                .then(vb.total_cmp(&va))
                .then(a.cmp(&b))
        });
        let mut frozen = vec![false; n];
        for &i in &order[..n - k] {
            frozen[i] = true;
        }
        Ok(Self::from_frozen(design_crossover, frozen))
    }

    fn from_frozen(design_crossover: f64, frozen: Vec<bool>) -> Self {
        let n = frozen.len();
        let info: Vec<usize> = (0..n).filter(|&i| !frozen[i]).collect();
        let mut frozen_before = Vec::with_capacity(n + 1);
        let mut count = 0u32;
        frozen_before.push(0);
        for &f in &frozen {
            count += u32::from(f);
            frozen_before.push(count);
        }
        Self {
            n,
            k: info.len(),
            design_crossover,
            frozen,
            info,
            frozen_before,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn design_crossover(&self) -> f64 {
        self.design_crossover
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    /// Indices carrying message bits, ascending.
    pub fn info_positions(&self) -> &[usize] {
        &self.info
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                actual: message.len(),
            });
        }
        let mut v = vec![0u8; self.n];
        for (&pos, &m) in self.info.iter().zip(message) {
            v[pos] = m & 1;
        }
        polar_transform(&mut v);
        Ok(v)
    }

    /// Successive-cancellation decoding; returns the message bits.
    pub fn decode(&self, llrs: &[f64], check: SoftCheck) -> Result<Vec<u8>> {
        self.decode_full(llrs, check).map(|(m, _)| m)
    }

    /// Successive-cancellation decoding; returns the message bits and the
    /// re-encoded codeword of the decisions.
    pub fn decode_full(&self, llrs: &[f64], check: SoftCheck) -> Result<(Vec<u8>, Vec<u8>)> {
        if llrs.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: llrs.len(),
            });
        }
        let mut u = vec![0u8; self.n];
        let mut x = vec![0u8; self.n];
        let mut scratch = vec![0.0; self.n.max(2)];
        self.node(llrs, 0, &mut scratch, &mut u, &mut x, check);
        let message = self.info.iter().map(|&i| u[i]).collect();
        Ok((message, x))
    }

    fn node(&self, llr: &[f64], offset: usize, scratch: &mut [f64], u: &mut [u8], x: &mut [u8], check: SoftCheck) {
        let size = llr.len();
        let frozen = (self.frozen_before[offset + size] - self.frozen_before[offset]) as usize;
        if frozen == size {
            x.fill(0);
            u.fill(0);
            return;
        }
        if size == 1 {
            let bit = u8::from(llr[0] < 0.0);
            u[0] = bit;
            x[0] = bit;
            return;
        }
        if frozen == 0 {
            for (xi, &l) in x.iter_mut().zip(llr) {
                *xi = u8::from(l < 0.0);
            }
            u.copy_from_slice(x);
            polar_transform(u);
            return;
        }
        let h = size / 2;
        let (child, rest) = scratch.split_at_mut(h);
        let (u_left, u_right) = u.split_at_mut(h);
        let (x_left, x_right) = x.split_at_mut(h);
        for j in 0..h {
            child[j] = check_node(llr[j], llr[j + h], check);
        }
        self.node(child, offset, rest, u_left, x_left, check);
        for j in 0..h {
            let a = llr[j];
            child[j] = if x_left[j] == 0 { llr[j + h] + a } else { llr[j + h] - a };
        }
        self.node(child, offset + h, rest, u_right, x_right, check);
        for j in 0..h {
            x_left[j] ^= x_right[j];
        }
    }
}

#[inline]
fn check_node(a: f64, b: f64, check: SoftCheck) -> f64 {
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    let min = a.abs().min(b.abs());
    match check {
        SoftCheck::MinSum => sign * min,
        SoftCheck::Exact => {
            sign * min + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
        }
    }
}
