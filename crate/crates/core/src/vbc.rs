//! Exact arithmetic of the vector binary channel (VBC) decomposition.
//!
//! The received intensity `Y = X + Z` is biased by the margin `beta`, erased when
//! it leaves `[0, A + 2*beta]`, scaled by `gamma` and cut into `N` bits. Noise is
//! binarized with a two's-complement wrap so that, bit by bit,
//! `Y_i = X_i ^ Z_i ^ W_i` where `W_i` is the ripple carry of the integer sum.
//!
//! Everything here is pure integer/bit manipulation apart from the floor at the
//! quantizer, which snaps values within [`FLOOR_SNAP`] of an integer.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values closer than this to an integer are floored to that integer.
pub const FLOOR_SNAP: f64 = 1e-9;

/// Largest supported bit width (words are stored in a `u64`).
pub const MAX_BITS: u32 = 62;

/// Standard Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `P(a <= N(0,1) < b)`, evaluated on whichever tail keeps full precision.
pub fn gaussian_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        q_function(a) - q_function(b)
    } else if b <= 0.0 {
        q_function(-b) - q_function(-a)
    } else {
        1.0 - q_function(-a) - q_function(b)
    }
}

/// Worst-case erasure probability `2 Q(beta)`.
pub fn erasure_bound(beta: f64) -> f64 {
    2.0 * q_function(beta)
}

/// Floor with snapping of near-integers.
pub fn snap_floor(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < FLOOR_SNAP {
        r
    } else {
        v.floor()
    }
}

/// Peak-, average-constrained Gaussian intensity channel `Y = X + Z`,
/// `0 <= X <= A`, `E[X] <= E`, `Z ~ N(0, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    peak: f64,
    average: f64,
    sigma: f64,
}

impl ChannelParams {
    pub fn new(peak: f64, average: f64, sigma: f64) -> Result<Self> {
        if !(peak.is_finite() && peak > 0.0) {
            return Err(Error::param("peak", format!("must be positive, got {peak}")));
        }
        if !(average.is_finite() && average > 0.0 && average <= peak) {
            return Err(Error::param(
                "average",
                format!("must lie in (0, peak = {peak}], got {average}"),
            ));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self {
            peak,
            average,
            sigma,
        })
    }

    /// Peak constraint only (`E = A`), unit noise.
    pub fn peak_only(peak: f64) -> Result<Self> {
        Self::new(peak, peak, 1.0)
    }

    /// Builds the channel from `A/sigma` in dB (`10 log10`) and `rho = E/A`.
    pub fn from_snr_db(snr_db: f64, ratio: f64, sigma: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::param("ratio", format!("must lie in (0, 1], got {ratio}")));
        }
        let peak = sigma * peak_ratio_from_db(snr_db);
        Self::new(peak, ratio * peak, sigma)
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn average(&self) -> f64 {
        self.average
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `rho = E / A`.
    pub fn ratio(&self) -> f64 {
        self.average / self.peak
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.peak / self.sigma).log10()
    }
}

/// `A/sigma` from its dB value. The axis convention is `10 log10(A/sigma)`.
pub fn peak_ratio_from_db(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// Smallest `N` with `2^N >= gamma (A + 2 beta)`.
pub fn bit_width(ch: &ChannelParams, beta: f64, gamma: f64) -> Result<u32> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("must be positive, got {beta}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
    }
    let span = gamma * (ch.peak() + 2.0 * beta);
    if span <= 1.0 {
        return Err(Error::param(
            "gamma",
            format!("gamma*(A+2*beta) = {span} must exceed 1"),
        ));
    }
    // An (almost) exact power of two needs no extra bit.
    let nearest = span.log2().round();
    if (span - nearest.exp2()).abs() <= 1e-9 * span {
        return checked_width(nearest as u32);
    }
    let mut n = span.log2().ceil() as u32;
    while n > 1 && ((n - 1) as f64).exp2() >= span {
        n -= 1;
    }
    while (n as f64).exp2() < span {
        n += 1;
    }
    checked_width(n)
}

fn checked_width(n: u32) -> Result<u32> {
    if n > MAX_BITS {
        Err(Error::param("gamma", format!("needs {n} bits, at most {MAX_BITS} supported")))
    } else {
        Ok(n)
    }
}

/// Margin, scale and the derived quantities of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VbcParams {
    beta: f64,
    gamma: f64,
    n_bits: u32,
    erasure_bound: f64,
}

impl VbcParams {
    pub fn new(ch: &ChannelParams, beta: f64, gamma: f64) -> Result<Self> {
        let n_bits = bit_width(ch, beta, gamma)?;
        Ok(Self {
            beta,
            gamma,
            n_bits,
            erasure_bound: erasure_bound(beta),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    /// Number of distinct `N`-bit words.
    pub fn word_count(&self) -> usize {
        1usize << self.n_bits
    }

    pub fn erasure_bound(&self) -> f64 {
        self.erasure_bound
    }

    /// Full receiver chain: bias, truncate/erase, scale and binarize.
    pub fn quantize(&self, ch: &ChannelParams, received: f64) -> QuantizedOutput {
        match truncate_and_erase(received + self.beta, ch.peak(), self.beta) {
            Some(kept) => QuantizedOutput::Word(binarize_output(kept, self.gamma, self.n_bits)),
            None => QuantizedOutput::Erasure,
        }
    }
}

/// An `N`-bit word, bit 0 least significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryWord {
    value: u64,
    width: u32,
}

impl BinaryWord {
    pub fn new(value: u64, width: u32) -> Result<Self> {
        if width > MAX_BITS {
            return Err(Error::param("width", format!("at most {MAX_BITS} bits")));
        }
        if value >> width != 0 {
            return Err(Error::param(
                "value",
                format!("{value} does not fit in {width} bits"),
            ));
        }
        Ok(Self { value, width })
    }

    /// Truncates `value` to its low `width` bits.
    pub fn wrapping(value: u64, width: u32) -> Self {
        Self {
            value: value & mask(width),
            width,
        }
    }

    /// Word from LSB-first bits; any nonzero entry counts as a one.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let width = bits.len() as u32;
        if width > MAX_BITS {
            return Err(Error::param("width", format!("at most {MAX_BITS} bits")));
        }
        let value = bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (u64::from(b != 0) << i));
        Ok(Self { value, width })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn bit(&self, i: u32) -> u8 {
        if i >= self.width {
            0
        } else {
            ((self.value >> i) & 1) as u8
        }
    }

    /// LSB-first bit vector.
    pub fn bits(&self) -> Vec<u8> {
        (0..self.width).map(|i| self.bit(i)).collect()
    }
}

pub(crate) fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Output of the receiver front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantizedOutput {
    Word(BinaryWord),
    Erasure,
}

impl QuantizedOutput {
    pub fn word(&self) -> Option<BinaryWord> {
        match self {
            QuantizedOutput::Word(w) => Some(*w),
            QuantizedOutput::Erasure => None,
        }
    }

    pub fn is_erasure(&self) -> bool {
        matches!(self, QuantizedOutput::Erasure)
    }
}

/// Keeps the biased output `y_tilde` when it lies in the closed interval
/// `[0, A + 2 beta]`, `None` (an erasure) otherwise.
pub fn truncate_and_erase(y_tilde: f64, peak: f64, beta: f64) -> Option<f64> {
    if (0.0..=peak + 2.0 * beta).contains(&y_tilde) {
        Some(y_tilde)
    } else {
        None
    }
}

/// Bits of `floor(gamma * y_prime)`.
///
/// The single point `gamma * y_prime == 2^N` (reachable only when
/// `gamma (A + 2 beta)` is a power of two) saturates to the all-ones word.
pub fn binarize_output(y_prime: f64, gamma: f64, n_bits: u32) -> BinaryWord {
    let level = snap_floor(gamma * y_prime).max(0.0) as u64;
    BinaryWord {
        value: level.min(mask(n_bits)),
        width: n_bits,
    }
}

/// Two's-complement binarization of `gamma (z + beta)`; carries out of the
/// top bit are dropped.
pub fn binarize_noise(z: f64, beta: f64, gamma: f64, n_bits: u32) -> BinaryWord {
    let scaled = gamma * (z + beta);
    let level = snap_floor(scaled) as i64;
    BinaryWord::wrapping(level.rem_euclid(1i64 << n_bits) as u64, n_bits)
}

/// Carry-over bits `W_0..W_{N-1}` of the ripple addition of two words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarryState {
    carries: Vec<u8>,
}

impl CarryState {
    pub fn carries(&self) -> &[u8] {
        &self.carries
    }

    pub fn carry(&self, i: usize) -> u8 {
        self.carries[i]
    }
}

/// Binary majority, i.e. the carry out of a full adder.
#[inline]
pub fn majority(a: u8, b: u8, c: u8) -> u8 {
    (a & b) | (a & c) | (b & c)
}

/// `W_0 = 0`, `W_i = maj(X_{i-1}, Z_{i-1}, W_{i-1})`.
pub fn carry_sequence(x: &BinaryWord, z: &BinaryWord) -> Result<CarryState> {
    if x.width() != z.width() {
        return Err(Error::LengthMismatch {
            expected: x.width() as usize,
            actual: z.width() as usize,
        });
    }
    let n = x.width();
    let mut carries = Vec::with_capacity(n as usize);
    let mut w = 0u8;
    for i in 0..n {
        carries.push(w);
        w = majority(x.bit(i), z.bit(i), w);
    }
    Ok(CarryState { carries })
}

/// Bitwise VBC relation `Y_i = X_i ^ Z_i ^ W_i`.
pub fn vbc_output(x: &BinaryWord, z: &BinaryWord, carries: &CarryState) -> BinaryWord {
    let value = (0..x.width()).fold(0u64, |acc, i| {
        let bit = x.bit(i) ^ z.bit(i) ^ carries.carry(i as usize);
        acc | (u64::from(bit) << i)
    });
    BinaryWord {
        value,
        width: x.width(),
    }
}

/// Transmitter mapping `X = value(word) / gamma`; rejects words above `gamma A`.
pub fn dac(x_word: &BinaryWord, gamma: f64, peak: f64) -> Result<f64> {
    let value = x_word.value() as f64;
    let limit = gamma * peak;
    if value > limit * (1.0 + 1e-12) {
        return Err(Error::PeakViolation { used: value, limit });
    }
    Ok(value / gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(bits: &[u8]) -> BinaryWord {
        BinaryWord::from_bits(bits).unwrap()
    }

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!((q_function(3.0) - 0.0013).abs() < 1e-4);
        assert!((q_function(-1.7) - (1.0 - q_function(1.7))).abs() < 1e-15);
        // reference value of Q(5) from tables
        assert!((q_function(5.0) - 2.866_515_718_791_939e-7).abs() < 1e-18);
    }

    #[test]
    fn erasure_bound_shrinks_with_margin() {
        assert!((erasure_bound(3.0) - 0.0026).abs() < 2e-4);
        let mut prev = 1.0;
        for k in 1..40 {
            let e = erasure_bound(k as f64 * 0.25);
            assert!(e < prev);
            prev = e;
        }
        assert!(erasure_bound(40.0) < 1e-300);
    }

    #[test]
    fn bit_width_examples() {
        let ch = ChannelParams::peak_only(10.0).unwrap();
        assert_eq!(bit_width(&ch, 5.0, 10.0).unwrap(), 8);
        assert_eq!(bit_width(&ch, 5.0, 0.5).unwrap(), 4);
        assert_eq!(bit_width(&ch, 5.0, 4.0).unwrap(), 7);
        let ch = ChannelParams::peak_only(2.0).unwrap();
        assert_eq!(bit_width(&ch, 1.0, 1.0).unwrap(), 2);
        // 4 * (2 + 2) = 16 exactly -> 4 bits, not 5
        assert_eq!(bit_width(&ch, 1.0, 4.0).unwrap(), 4);
        assert!(bit_width(&ch, 1.0, 0.25).is_err());
    }

    #[test]
    fn truncation_interval_is_closed() {
        assert_eq!(truncate_and_erase(-0.01, 10.0, 5.0), None);
        assert_eq!(truncate_and_erase(20.0, 10.0, 5.0), Some(20.0));
        assert_eq!(truncate_and_erase(0.0, 10.0, 5.0), Some(0.0));
        assert_eq!(truncate_and_erase(20.0 + 1e-12, 10.0, 5.0), None);
    }

    #[test]
    fn output_binarization() {
        assert_eq!(binarize_output(3.0, 1.0, 3).bits(), vec![1, 1, 0]);
        assert_eq!(binarize_output(0.0, 1.0, 3).value(), 0);
        // snapped just below an integer
        assert_eq!(binarize_output(3.0 - 1e-12, 1.0, 3).value(), 3);
        assert_eq!(binarize_output(2.999, 1.0, 3).value(), 2);
    }

    #[test]
    fn noise_binarization() {
        // the worked example: z = -3, beta = 2 -> gamma(z+beta) = -1 -> 7
        let z = binarize_noise(-3.0, 2.0, 1.0, 3);
        assert_eq!(z.value(), 7);
        assert_eq!(z.bits(), vec![1, 1, 1]);
        assert_eq!(binarize_noise(-2.0, 2.0, 1.0, 3).value(), 0);
        assert_eq!(binarize_noise(1.5, 3.0, 2.0, 4).bits(), vec![1, 0, 0, 1]);
    }

    #[test]
    fn carry_example_from_two_complement() {
        let x = word(&[0, 0, 1]);
        let z = word(&[1, 1, 1]);
        let w = carry_sequence(&x, &z).unwrap();
        assert_eq!(w.carries(), &[0, 0, 0]);
        assert_eq!(vbc_output(&x, &z, &w).bits(), vec![1, 1, 0]);
        let zero = word(&[0, 0, 0]);
        assert!(carry_sequence(&x, &zero).unwrap().carries().iter().all(|&c| c == 0));
        assert!(carry_sequence(&x, &word(&[1, 0])).is_err());
    }

    #[test]
    fn dac_mapping() {
        assert_eq!(dac(&BinaryWord::new(0, 8).unwrap(), 4.4801, 25.0).unwrap(), 0.0);
        let x = BinaryWord::new(112, 8).unwrap();
        assert!((dac(&x, 4.4801, 25.0).unwrap() - 25.0).abs() < 1e-3);
        let x = BinaryWord::new(128, 8).unwrap();
        assert!(matches!(
            dac(&x, 4.4801, 25.0),
            Err(Error::PeakViolation { .. })
        ));
    }

    #[test]
    fn dac_then_noiseless_quantize_recovers_word() {
        let ch = ChannelParams::peak_only(25.0).unwrap();
        let vbc = VbcParams::new(&ch, 5.0, 4.4801).unwrap();
        for v in 0..=112u64 {
            let x = BinaryWord::new(v, vbc.n_bits()).unwrap();
            let sent = dac(&x, vbc.gamma(), ch.peak()).unwrap();
            // beta-free path: scale back without bias
            assert_eq!(binarize_output(sent, vbc.gamma(), vbc.n_bits()), x);
        }
    }

    #[test]
    fn channel_params_validation() {
        assert!(ChannelParams::new(10.0, 11.0, 1.0).is_err());
        assert!(ChannelParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(ChannelParams::new(10.0, 5.0, 0.0).is_err());
        let ch = ChannelParams::from_snr_db(10.0, 1.0 / 3.0, 1.0).unwrap();
        assert!((ch.peak() - 10.0).abs() < 1e-12);
        assert!((ch.ratio() - 1.0 / 3.0).abs() < 1e-12);
        assert!((ch.snr_db() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn quantize_erases_outside_margin() {
        let ch = ChannelParams::peak_only(10.0).unwrap();
        let vbc = VbcParams::new(&ch, 5.0, 10.0).unwrap();
        assert!(vbc.quantize(&ch, -5.01).is_erasure());
        assert!(vbc.quantize(&ch, 15.01).is_erasure());
        assert_eq!(vbc.quantize(&ch, 0.0).word().unwrap().value(), 50);
    }
}
