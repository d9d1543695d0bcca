use imdd_vbc::rate::{
    bsc_mutual_information, greedy_active_set, rate_cd_montecarlo, CarryLaw, FlipSets,
    DEFAULT_ENUMERATION_BUDGET,
};
use imdd_vbc::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(ch: &ChannelParams, beta: f64, gamma: f64) -> NoiseModel {
    NoiseModel::build(ch, &VbcParams::new(ch, beta, gamma).unwrap()).unwrap()
}

fn random_instance(rng: &mut ChaCha8Rng) -> (NoiseModel, PipeAllocation) {
    loop {
        let ch = ChannelParams::peak_only(rng.random_range(1.0..40.0)).unwrap();
        let Ok(vbc) = VbcParams::new(&ch, rng.random_range(3.0..6.0), rng.random_range(0.3..4.0)) else {
            continue;
        };
        if !(2..=10).contains(&vbc.n_bits()) {
            continue;
        }
        let noise = NoiseModel::build(&ch, &vbc).unwrap();
        let probs = (0..vbc.n_bits()).map(|_| rng.random_range(0.0..=1.0)).collect();
        return (noise, PipeAllocation::new(probs).unwrap());
    }
}

#[test]
fn state_toy_rates() {
    let ch = ChannelParams::peak_only(2.0).unwrap();
    let noise = model(&ch, 3.0, 1.0);
    let alloc = PipeAllocation::new(vec![0.5; 3]).unwrap();
    let sel = StateSelection::previous(3, 2).unwrap();
    let crossover = imdd_vbc::rate::flipped_crossover(&noise, 2, sel.set(2));
    assert!((crossover - 0.0455).abs() <= 5e-4, "{crossover}");
    // rates of the bare binary channels, without the erasure factor
    let id = rate_id(&noise, &alloc, 0.0).unwrap();
    let sd_bsc = rate_sd_bsc(&noise, &alloc, &sel, 0.0).unwrap();
    assert!((id.per_pipe[2] - 0.3657).abs() <= 0.002, "{}", id.per_pipe[2]);
    assert!((sd_bsc.per_pipe[2] - 0.733).abs() <= 0.002, "{}", sd_bsc.per_pipe[2]);
}

#[test]
fn state_information_dominates_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    for _ in 0..100 {
        let (noise, alloc) = random_instance(&mut rng);
        let n = noise.n_bits();
        let q = rng.random_range(1..n as usize);
        let sel = StateSelection::previous(n, q).unwrap();
        let eps = noise.vbc().erasure_bound();
        let sd = rate_sd(&noise, &alloc, &sel, eps).unwrap().total;
        let sd_bsc = rate_sd_bsc(&noise, &alloc, &sel, eps).unwrap().total;
        let id = rate_id(&noise, &alloc, eps).unwrap().total;
        if sd + 1e-9 < sd_bsc || sd + 1e-9 < id {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn larger_state_sets_never_hurt() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let (noise, alloc) = random_instance(&mut rng);
        let n = noise.n_bits();
        let eps = noise.vbc().erasure_bound();
        let mut last = rate_id(&noise, &alloc, eps).unwrap().total;
        for q in 1..n as usize {
            let r = rate_sd(&noise, &alloc, &StateSelection::previous(n, q).unwrap(), eps)
                .unwrap()
                .total;
            assert!(r + 1e-9 >= last, "q={q}: {r} < {last}");
            last = r;
        }
    }
}

#[test]
fn upper_outputs_only_add_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..30 {
        let (noise, alloc) = random_instance(&mut rng);
        let q = rng.random_range(1..=3);
        let law = CarryLaw::enumerate(&noise, &alloc, q, DEFAULT_ENUMERATION_BUDGET).unwrap();
        for i in 0..noise.n_bits() as usize {
            let with = law.pipe_information(i);
            let without = law.pipe_information_without_upper(i);
            assert!(with + 1e-12 >= without, "pipe {i}");
            // dropping the upper outputs leaves the plain BSC of the pipe
            let p = alloc.probs()[i];
            let bsc = if p > 0.0 { bsc_mutual_information(p, noise.alpha(i)) } else { 0.0 };
            assert!((without - bsc).abs() < 1e-9, "pipe {i}: {without} vs {bsc}");
        }
    }
}

#[test]
fn asymmetric_reduction_respects_the_sign_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (noise, alloc) = random_instance(&mut rng);
        let eps = noise.vbc().erasure_bound();
        let q = rng.random_range(1..=2);
        let bac = rate_cd_bac(&noise, &alloc, q, &FlipSets::Auto, eps, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let cd = rate_cd(&noise, &alloc, q, eps, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let params = bac.cd_bac.as_ref().unwrap();
        for i in 0..noise.n_bits() as usize {
            // a hard decision on the observation cannot beat the observation
            assert!(bac.per_pipe[i] <= cd.per_pipe[i] + 1e-12);
            let a = noise.alpha(i);
            if !params.flip_sets[i].is_empty() {
                assert!((1.0 - a) * params.theta[i] - a * params.theta_bar[i] < 0.0);
            }
        }
    }
}

#[test]
fn rates_scale_with_the_erasure_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let (noise, alloc) = random_instance(&mut rng);
        let sel = StateSelection::previous(noise.n_bits(), 1).unwrap();
        let pairs = [
            (rate_id(&noise, &alloc, 0.0).unwrap(), rate_id(&noise, &alloc, 0.2).unwrap()),
            (rate_sd(&noise, &alloc, &sel, 0.0).unwrap(), rate_sd(&noise, &alloc, &sel, 0.2).unwrap()),
            (
                rate_cd(&noise, &alloc, 1, 0.0, DEFAULT_ENUMERATION_BUDGET).unwrap(),
                rate_cd(&noise, &alloc, 1, 0.2, DEFAULT_ENUMERATION_BUDGET).unwrap(),
            ),
        ];
        for (full, scaled) in pairs {
            assert!((scaled.total - 0.8 * full.total).abs() < 1e-12);
        }
    }
}

#[test]
fn reports_reproduce_from_their_parameters() {
    let ch = ChannelParams::from_snr_db(12.0, 1.0 / 3.0, 1.0).unwrap();
    for scheme in [Scheme::Id, Scheme::Sd, Scheme::SdBsc, Scheme::Cd] {
        let cfg = SchemeConfig::new(scheme, 1);
        let grid = ParamGrid::new(vec![4.0, 5.0], vec![1.0, 1.5]).unwrap();
        let report = optimize_params(&ch, &cfg, &grid).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: RateReport = serde_json::from_str(&json).unwrap();
        let noise = model(&ch, back.beta, back.gamma);
        let again = rate::evaluate(&noise, &back.allocation, &cfg).unwrap();
        assert_eq!(again.total.to_bits(), report.total.to_bits(), "{scheme}");
        back.allocation.check_feasible(&noise).unwrap();
    }
}

#[test]
fn sampled_carry_rate_agrees_with_enumeration() {
    let ch = ChannelParams::peak_only(1.0).unwrap();
    let noise = model(&ch, 3.0, 2.0);
    let alloc = PipeAllocation::uniform(noise.n_bits(), &greedy_active_set(noise.n_bits(), 2.0), 0.5).unwrap();
    let eps = noise.vbc().erasure_bound();
    let exact = rate_cd(&noise, &alloc, 1, eps, DEFAULT_ENUMERATION_BUDGET).unwrap().total;
    let mc = rate_cd_montecarlo(&noise, &alloc, 1, eps, 400_000, 3).unwrap();
    let se = mc.std_error.unwrap();
    assert!((mc.total - exact).abs() <= 4.0 * se + 2e-3, "{} vs {exact} (se {se})", mc.total);
}

#[test]
fn enumeration_budget_is_reported() {
    let ch = ChannelParams::peak_only(10.0).unwrap();
    let noise = model(&ch, 5.0, 10.0);
    let alloc = PipeAllocation::new(vec![0.5; 8]).unwrap();
    assert!(matches!(
        rate_cd(&noise, &alloc, 1, 0.0, 1000),
        Err(Error::EnumerationBudget { .. })
    ));
}
