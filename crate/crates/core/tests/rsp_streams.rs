use eqsim_core::rsp::sim::{broadcast, LinkModel};
use eqsim_core::rsp::RspConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bytes(n: usize, seed: u64) -> Vec<u8> {
    let mut v = vec![0u8; n];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut v);
    v
}

#[test]
fn ack_cadence_lossless() {
    let cfg = RspConfig::default();
    let data = random_bytes(cfg.max_payload() * 17 * 20, 1);
    let r = broadcast(&cfg, data, 3, LinkModel::default(), None, 4).unwrap();
    for m in &r.members[1..] {
        assert_eq!(m.stats.periodic_acks, 20);
    }
}

#[test]
fn large_stream_timing() {
    let data = random_bytes(16 << 20, 2);
    let t = std::time::Instant::now();
    let r = broadcast(&RspConfig::default(), data.clone(), 3, LinkModel::lossy(0.02, 0.02, 0.005), None, 9).unwrap();
    eprintln!("wall {:?} virtual {:?} ratio {:.4} deliveries {}", t.elapsed(), r.elapsed, r.retransmit_ratio(), r.deliveries);
    for rx in 1..=3 {
        assert!(r.received(rx, 0).unwrap() == &data[..]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]
    #[test]
    fn any_fault_pattern_delivers_exactly(
        len in 1usize..200_000,
        loss in 0.0f64..0.3,
        reorder in 0.0f64..0.3,
        dup in 0.0f64..0.2,
        seed in any::<u64>(),
    ) {
        let data = random_bytes(len, seed);
        let r = broadcast(&RspConfig::default(), data.clone(), 2, LinkModel::lossy(loss, reorder, dup), None, seed).unwrap();
        prop_assert!(r.received(1, 0).unwrap() == &data[..]);
        prop_assert!(r.received(2, 0).unwrap() == &data[..]);
    }
}

