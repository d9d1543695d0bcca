use imdd_vbc::capacity::vbc_capacity;
use imdd_vbc::*;
use proptest::prelude::*;

#[test]
fn z_channel_matches_closed_form() {
    for e in [0.1, 0.3, 0.5] {
        let chan = DiscreteChannel::from_matrix(vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![e, 1.0 - e]]).unwrap();
        let r = blahut_arimoto(&chan, &BlahutArimoto::default()).unwrap();
        let exact = (1.0 + (1.0 - e) * e.powf(e / (1.0 - e))).log2();
        assert!((r.capacity - exact).abs() < 1e-6, "e={e}: {} vs {exact}", r.capacity);
    }
}

#[test]
fn binding_cost_limit_fixes_the_input() {
    let a: f64 = 0.05;
    let chan = DiscreteChannel::from_matrix(vec![0.0, 1.0], vec![vec![1.0 - a, a], vec![a, 1.0 - a]]).unwrap();
    let opts = BlahutArimoto {
        avg_limit: Some(0.2),
        ..BlahutArimoto::default()
    };
    let r = blahut_arimoto(&chan, &opts).unwrap();
    let one = 0.2 * (1.0 - a) + 0.8 * a;
    let exact = binary_entropy(one) - binary_entropy(a);
    assert!((r.capacity - exact).abs() < 1e-5);
    assert!(r.mean_cost <= 0.2 + 1e-6);
    assert!(r.multiplier > 0.0);
}

#[test]
fn objective_never_decreases() {
    let ch = ChannelParams::peak_only(10.0).unwrap();
    let vbc = VbcParams::new(&ch, 5.0, 1.5).unwrap();
    let chan = DiscreteChannel::from_vbc(&ch, &vbc).unwrap();
    let r = blahut_arimoto(&chan, &BlahutArimoto { trace: true, ..BlahutArimoto::default() }).unwrap();
    assert!(r.trace.len() > 1);
    for w in r.trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn quantized_capacity_grows_with_resolution_and_stays_below_the_reference() {
    let ch = ChannelParams::peak_only(10.0).unwrap();
    let solver = BlahutArimoto::default();
    let caps: Vec<f64> = [0.2, 0.5, 1.5, 4.0]
        .iter()
        .map(|&g| vbc_capacity(&ch, &VbcParams::new(&ch, 5.0, g).unwrap(), &solver).unwrap().capacity)
        .collect();
    for w in caps.windows(2) {
        assert!(w[1] + 1e-6 >= w[0], "{caps:?}");
    }
    let reference = imdd_capacity_proxy(&ch, &ProxyConfig::default()).unwrap().capacity;
    assert!(caps.iter().all(|&c| c <= reference + 1e-6), "{caps:?} vs {reference}");
}

#[test]
fn coarse_grids_are_rejected() {
    let ch = ChannelParams::peak_only(10.0).unwrap();
    let cfg = ProxyConfig { grid_points: 64, ..ProxyConfig::default() };
    assert!(imdd_capacity_proxy(&ch, &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Capacity is at least the information of any particular input law.
    #[test]
    fn capacity_bounds_every_input(rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 2..5), w in prop::collection::vec(0.01f64..1.0, 4)) {
        let matrix: Vec<Vec<f64>> = rows.iter().map(|r| { let s: f64 = r.iter().sum(); r.iter().map(|x| x / s).collect() }).collect();
        let chan = DiscreteChannel::from_matrix(vec![0.0; matrix.len()], matrix.clone()).unwrap();
        let r = blahut_arimoto(&chan, &BlahutArimoto::default()).unwrap();
        let p: Vec<f64> = w[..matrix.len()].to_vec();
        let s: f64 = p.iter().sum();
        let p: Vec<f64> = p.iter().map(|x| x / s).collect();
        prop_assert!(r.capacity + 1e-9 >= chan.mutual_information(&p));
        prop_assert!(r.gap <= 1e-7);
        prop_assert!(r.capacity <= (matrix.len() as f64).log2().min(3f64.log2()) + 1e-9);
    }
}
