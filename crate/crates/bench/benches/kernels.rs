use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use imdd_vbc::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sc_decoder(c: &mut Criterion) {
    let mut group = c.benchmark_group("sc_decode");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &(n, k) in &[(64usize, 47usize), (1024, 512), (1 << 14, 1 << 13)] {
        let alpha = 0.02;
        let code = PolarCode::construct(n, k, alpha).unwrap();
        let msg: Vec<u8> = (0..k).map(|_| rng.random_range(0..=1)).collect();
        let llrs: Vec<f64> = code
            .encode(&msg)
            .unwrap()
            .into_iter()
            .map(|b| bsc_llr(Some(b ^ u8::from(rng.random_bool(alpha))), alpha))
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &llrs, |b, llrs| {
            b.iter(|| code.decode(black_box(llrs), SoftCheck::MinSum).unwrap())
        });
    }
    group.finish();
}

fn noise_model(c: &mut Criterion) {
    let ch = ChannelParams::peak_only(25.0).unwrap();
    let vbc = VbcParams::new(&ch, 5.0, 4.4801).unwrap();
    c.bench_function("noise_model_build", |b| {
        b.iter(|| NoiseModel::build(black_box(&ch), black_box(&vbc)).unwrap())
    });
}

fn capacity(c: &mut Criterion) {
    let ch = ChannelParams::peak_only(10.0).unwrap();
    let vbc = VbcParams::new(&ch, 5.0, 4.0).unwrap();
    let chan = DiscreteChannel::from_vbc(&ch, &vbc).unwrap();
    c.bench_function("blahut_arimoto_vbc", |b| {
        b.iter(|| blahut_arimoto(black_box(&chan), &BlahutArimoto::default()).unwrap())
    });
}

fn simulation_frame(c: &mut Criterion) {
    let ch = ChannelParams::peak_only(25.0).unwrap();
    let vbc = VbcParams::new(&ch, 5.0, 4.4801).unwrap();
    let mut cfg = SimConfig::from_rates(ch, vbc, Scheme::Id, 1024, &[(4, 0.399), (5, 0.722), (6, 0.999)]).unwrap();
    cfg.frames = 1;
    c.bench_function("simulation_frame_1024", |b| b.iter(|| run_simulation(black_box(&cfg)).unwrap()));
}

criterion_group!(benches, sc_decoder, noise_model, capacity, simulation_frame);
criterion_main!(benches);
