use proptest::prelude::*;
use vpm::codec::{build_code, decode, encode, rate_accounting, CodeParams, Codebook};
use vpm::constraint::compute_rstar;
use vpm::deviation::{DeviationKind, DeviationSpec};
use vpm::radix::MixedRadix;
use vpm::repeated::{run_match, MonitoringLayer, SimConfig};
use vpm::{MonitoringStructure, ProductDistribution, StageGame};

fn pd() -> StageGame {
    StageGame::prisoners_dilemma()
}

fn noiseless_code(n: usize) -> Codebook {
    let g = pd();
    let m = MonitoringStructure::fig3(&g, 0.0, 4).unwrap();
    build_code(&g, &m, &ProductDistribution::uniform(&g), CodeParams::new(n, 0.05, 9).with_raw_threshold(n)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radix_index_roundtrip(radices in prop::collection::vec(1usize..6, 1..5), seed in any::<u64>()) {
        let r = MixedRadix::new(radices);
        let x = (seed % r.size() as u64) as usize;
        prop_assert_eq!(r.index(&r.digits(x)), x);
    }

    #[test]
    fn noiseless_roundtrip(seq in prop::collection::vec(0usize..4, 6)) {
        let code = noiseless_code(6);
        let g = code.game().clone();
        let msg = encode(&code, &seq).unwrap();
        for k in 0..2 {
            let signals: Vec<usize> = seq.iter().map(|&a| g.profiles().digit(a, 1 - k)).collect();
            let own: Vec<usize> = seq.iter().map(|&a| g.profiles().digit(a, k)).collect();
            prop_assert_eq!(decode(&code, k, &msg.public, &signals, &own).unwrap(), seq.clone());
        }
    }

    #[test]
    fn successful_encodes_fit_the_chain(seq in prop::collection::vec(prop::sample::select(vec![0usize, 0, 0, 0, 1, 2, 3]), 16)) {
        let g = pd();
        let m = MonitoringStructure::fig3(&g, 0.5, 3).unwrap();
        let p = ProductDistribution::new(vec![vec![0.9, 0.1], vec![0.9, 0.1]]).unwrap();
        let code = build_code(&g, &m, &p, CodeParams::new(16, 0.05, 1)).unwrap();
        if encode(&code, &seq).is_ok() {
            let acc = rate_accounting(&code, &seq).unwrap();
            prop_assert!(acc.holds(), "{:?}", acc.violations());
        }
    }

    #[test]
    fn region_shrinks_as_noise_grows(d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
        let g = pd();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let p = ProductDistribution::new(vec![vec![p1, 1.0 - p1], vec![p2, 1.0 - p2]]).unwrap();
        let at = |d: f64| compute_rstar(&g, &MonitoringStructure::fig3(&g, d, 3).unwrap(), &p).unwrap();
        let (a, b) = (at(lo), at(hi));
        prop_assert!(a.rstar <= b.rstar + 1e-12);
        prop_assert!(!b.satisfied || a.satisfied);
    }

    #[test]
    fn trace_invariants(seed in any::<u64>(), start in 1usize..6, action in 0usize..2, ideal in any::<bool>()) {
        let g = pd();
        let layer = if ideal { MonitoringLayer::Ideal } else { MonitoringLayer::Codec };
        let m = MonitoringStructure::fig3(&g, 0.02, 3).unwrap();
        let n = 8;
        let dev = DeviationSpec::from_block(1, DeviationKind::Constant { action }, start, n);
        let cfg = SimConfig::new(n, 6, 0.1, ProductDistribution::new(vec![vec![0.9, 0.1], vec![0.9, 0.1]]).unwrap())
            .with_layer(layer)
            .with_deviation(Some(dev))
            .with_seed(seed);
        let t = run_match(&g, &m, &cfg).unwrap();
        let replay = t.replay_utilities(&g);
        for k in 0..2 {
            prop_assert!((replay[k] - t.utilities[k]).abs() < 1e-12);
        }
        for w in t.blocks.windows(2) {
            for k in 0..2 {
                if let Some(i) = w[0].punishment[k] {
                    prop_assert_eq!(w[1].punishment[k], Some(i));
                }
            }
        }
        // decoded content of block b reaches the tests of block b + 2 only
        for b in &t.blocks {
            prop_assert_eq!(b.tested_block, b.block.checked_sub(2).filter(|&x| x >= 1));
            if b.block <= 2 {
                prop_assert!(b.punishment.iter().all(Option::is_none));
            }
        }
        // under punishment the honest player follows its punishment mix
        for b in &t.blocks {
            if b.punishment[0] == Some(1) {
                prop_assert!(b.profiles.iter().all(|&a| g.profiles().digit(a, 0) == 1));
            }
        }
    }
}
