use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use proxsample::asf::{run_chain, run_chains, ChainConfig};
use proxsample::bundle::ProxObjective;
use proxsample::potential::{
    make_dead_zone, make_l1, make_power_norm, make_quad_plus_l1, validate_profile, Potential, RegularizedTarget,
};
use proxsample::rgo::{build_envelope, rgo_sample, RgoConfig, RgoMode};

fn zoo(k: usize, d: usize) -> Arc<dyn Potential> {
    match k % 4 {
        0 => Arc::new(make_l1(d, 1.0).unwrap()),
        1 => Arc::new(make_power_norm(d, 0.5, 2.0).unwrap()),
        2 => Arc::new(make_quad_plus_l1(vec![0.5; d], 1.0).unwrap()),
        _ => Arc::new(make_dead_zone(d, 1.0).unwrap()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn h1_minorizes_the_rgo_potential(
        k in 0usize..4,
        d in 1usize..4,
        eta in 0.05f64..1.0,
        delta in 0.01f64..1.0,
        exact in any::<bool>(),
        y in proptest::collection::vec(-4.0f64..4.0, 3),
        probes in proptest::collection::vec(-3.0f64..3.0, 60),
    ) {
        let f = zoo(k, d);
        let mode = if exact && f.has_prox() { RgoMode::Exact } else { RgoMode::Bundle };
        let target = RegularizedTarget::new(f, 0.1, vec![1.0; d]).unwrap();
        let obj = ProxObjective::new(target, eta, y[..d].to_vec()).unwrap();
        let (h1, ..) = build_envelope(&obj, &RgoConfig::new(eta, delta, mode)).unwrap();
        for p in probes.chunks(d).filter(|c| c.len() == d) {
            let x: Vec<f64> = obj.y.iter().zip(p).map(|(a, b)| a + b).collect();
            prop_assert!(h1.eval(&x) <= obj.value(&x) + 1e-9);
        }
    }

    #[test]
    fn declared_profiles_hold(k in 0usize..4, d in 1usize..6, seed in any::<u64>()) {
        let f = zoo(k, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = validate_profile(f.as_ref(), &f.profile(), 200, 5.0, &mut rng).unwrap();
        prop_assert!(r.passed, "{:?}", r);
    }
}

#[test]
fn rgo_is_reproducible_per_seed() {
    let f: Arc<dyn Potential> = Arc::new(make_l1(3, 1.0).unwrap());
    let obj = ProxObjective::new(RegularizedTarget::plain(f), 0.1, vec![1.0, -2.0, 0.0]).unwrap();
    let cfg = RgoConfig::new(0.1, 0.1, RgoMode::Bundle);
    let draw = |s| rgo_sample(&obj, &cfg, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
    let (a, b, c) = (draw(5), draw(5), draw(6));
    assert_eq!(a.x, b.x);
    assert_ne!(a.x, c.x);
    assert!(a.proposals() >= 1);
    assert!(a.bundle_iters >= 1);
}

#[test]
fn parallel_chains_match_sequential_runs() {
    let f: Arc<dyn Potential> = Arc::new(make_quad_plus_l1(vec![1.0, 2.0], 0.5).unwrap());
    let mut cfg = ChainConfig::new(0.05, 0.1, 25, 11, 2);
    cfg.mu = 0.01;
    let x0 = [3.0, -3.0];
    let par = run_chains(f.clone(), &cfg, &x0, 3, 3).unwrap();
    for (i, t) in par.iter().enumerate() {
        let mut c = cfg.clone();
        c.seed = 11 + i as u64;
        let seq = run_chain(f.clone(), &c, &x0).unwrap();
        assert_eq!(t.iterates, seq.iterates);
        assert_eq!(t.diagnostics, seq.diagnostics);
    }
    assert_eq!(par[0].iterates.len(), 26);
    assert_eq!(par[0].iterates[0], x0.to_vec());
}
