use imdd_vbc::vbc::vbc_output;
use imdd_vbc::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Draws `(word, z)` pairs with an integer input word and noise that is not erased.
fn draw(rng: &mut ChaCha8Rng, ch: &ChannelParams, vbc: &VbcParams) -> (u64, f64) {
    let top = (vbc.gamma() * ch.peak()).floor() as u64;
    let word = rng.random_range(0..=top);
    loop {
        let z = ch.sigma() * rng.sample::<f64, _>(StandardNormal);
        let y = word as f64 / vbc.gamma() + z;
        if truncate_and_erase(y + vbc.beta(), ch.peak(), vbc.beta()).is_some() {
            return (word, z);
        }
    }
}

#[test]
fn receiver_bits_follow_the_bitwise_relation() {
    let setups = [(10.0, 5.0, 10.0), (25.0, 5.0, 4.4801), (2.0, 3.0, 1.0), (10.0, 3.0, 0.5), (100.0, 4.0, 1.3)];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0;
    let mut checked = 0;
    for &(peak, beta, gamma) in &setups {
        let ch = ChannelParams::peak_only(peak).unwrap();
        let vbc = VbcParams::new(&ch, beta, gamma).unwrap();
        for _ in 0..20_000 {
            let (word, z) = draw(&mut rng, &ch, &vbc);
            let x = BinaryWord::new(word, vbc.n_bits()).unwrap();
            let sent = dac(&x, gamma, peak).unwrap();
            let received = vbc.quantize(&ch, sent + z).word().expect("not erased");
            let zb = binarize_noise(z, beta, gamma, vbc.n_bits());
            let carries = carry_sequence(&x, &zb).unwrap();
            if vbc_output(&x, &zb, &carries) != received {
                mismatches += 1;
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 100_000);
    assert_eq!(mismatches, 0);
}

#[test]
fn erasure_rate_of_extreme_inputs_is_bounded() {
    let ch = ChannelParams::peak_only(4.0).unwrap();
    let beta = 2.0;
    let bound = erasure_bound(beta);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trials = 200_000;
    for x in [0.0, ch.peak()] {
        let erased = (0..trials)
            .filter(|_| {
                let z: f64 = rng.sample(StandardNormal);
                truncate_and_erase(x + z + beta, ch.peak(), beta).is_none()
            })
            .count();
        let freq = erased as f64 / trials as f64;
        let exact = q_function(beta) + q_function(ch.peak() + beta);
        let sd = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((freq - exact).abs() < 4.0 * sd, "x={x}: {freq} vs {exact}");
        assert!(freq <= bound + 4.0 * sd);
    }
}

#[test]
fn erasure_interval_is_closed() {
    assert_eq!(truncate_and_erase(0.0, 10.0, 5.0), Some(0.0));
    assert_eq!(truncate_and_erase(20.0, 10.0, 5.0), Some(20.0));
    assert_eq!(truncate_and_erase(-1e-12, 10.0, 5.0), None);
    assert_eq!(truncate_and_erase(20.0 + 1e-12, 10.0, 5.0), None);
}

#[test]
fn dac_rejects_words_above_the_peak() {
    let x = BinaryWord::new(101, 8).unwrap();
    assert!(matches!(dac(&x, 10.0, 10.0), Err(Error::PeakViolation { .. })));
    let x = BinaryWord::new(100, 8).unwrap();
    assert_eq!(dac(&x, 10.0, 10.0).unwrap(), 10.0);
}

proptest! {
    #[test]
    fn carries_reproduce_integer_addition(n in 1u32..=20, a in any::<u64>(), b in any::<u64>()) {
        let m = (1u64 << n) - 1;
        let x = BinaryWord::new(a & m, n).unwrap();
        let z = BinaryWord::new(b & m, n).unwrap();
        let w = carry_sequence(&x, &z).unwrap();
        prop_assert_eq!(w.carry(0), 0);
        let sum = ((a & m) + (b & m)) & m;
        prop_assert_eq!(vbc_output(&x, &z, &w).value(), sum);
        // each carry is the overflow of the lower bits
        for i in 1..n {
            let low = (1u64 << i) - 1;
            let overflow = (((a & low) + (b & low)) >> i) as u8;
            prop_assert_eq!(w.carry(i as usize), overflow);
        }
    }

    #[test]
    fn output_binarization_is_monotone(a in 0.0f64..30.0, d in 0.0f64..5.0, gamma in 0.1f64..20.0) {
        let n = 12;
        prop_assert!(binarize_output(a + d, gamma, n).value() >= binarize_output(a, gamma, n).value());
    }

    #[test]
    fn noise_word_is_twos_complement(k in -500i64..500, frac in 0.0f64..0.99, gamma in 0.5f64..4.0, beta in 3.0f64..6.0) {
        let n = 12;
        // pick z so that gamma (z + beta) = k + frac
        let z = (k as f64 + frac) / gamma - beta;
        let w = binarize_noise(z, beta, gamma, n);
        prop_assert_eq!(w.value(), k.rem_euclid(1 << n) as u64);
    }

    #[test]
    fn word_bits_round_trip(v in any::<u64>(), n in 1u32..=62) {
        let w = BinaryWord::wrapping(v, n);
        prop_assert_eq!(BinaryWord::from_bits(&w.bits()).unwrap(), w);
    }
}
