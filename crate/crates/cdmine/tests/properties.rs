//! Property tests for the structural invariants: energy preservation,
//! round trips, compression consistency, waterfill feasibility and the
//! sandwich property.

use proptest::collection::vec;
use proptest::prelude::*;

use cdmine::bounds::distance_bounds;
use cdmine::compress::{compress_first, compress_top, deserialize, serialize};
use cdmine::transform::{
    dft_forward, dft_inverse, euclidean, forward, haar_forward, haar_inverse, Basis, Sequence,
};
use cdmine::waterfill::waterfill;

fn seq_strategy(max_pow: u32) -> impl Strategy<Value = Sequence> {
    (1u32..=max_pow)
        .prop_flat_map(|e| vec(-100.0f64..100.0, (1usize << e)..=(1usize << e)))
        .prop_map(|v| Sequence::new(v).unwrap())
}

fn seq_pair_strategy(max_pow: u32) -> impl Strategy<Value = (Sequence, Sequence)> {
    (2u32..=max_pow).prop_flat_map(|e| {
        let n = 1usize << e;
        (
            vec(-100.0f64..100.0, n..=n).prop_map(|v| Sequence::new(v).unwrap()),
            vec(-100.0f64..100.0, n..=n).prop_map(|v| Sequence::new(v).unwrap()),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_holds_for_both_bases(seq in seq_strategy(8)) {
        for basis in [Basis::Dft, Basis::Haar] {
            let spec = forward(&seq, basis).unwrap();
            let err = (spec.energy() - seq.energy()).abs();
            prop_assert!(err <= 1e-9 * seq.energy().max(1.0), "{basis:?}: {err}");
        }
    }

    #[test]
    fn transforms_round_trip(seq in seq_strategy(8)) {
        let back = dft_inverse(&dft_forward(&seq)).unwrap();
        for (a, b) in seq.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let back = haar_inverse(&haar_forward(&seq).unwrap()).unwrap();
        for (a, b) in seq.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn compression_consistency((seq, _) in seq_pair_strategy(7), frac in 0.1f64..1.0) {
        for basis in [Basis::Dft, Basis::Haar] {
            let spec = forward(&seq, basis).unwrap();
            let bins = spec.storable_bins();
            let s = ((bins as f64 * frac) as usize).clamp(1, bins);
            for c in [compress_top(&spec, s).unwrap(), compress_first(&spec, s).unwrap()] {
                c.validate().unwrap();
                let kept: f64 = c
                    .positions()
                    .iter()
                    .zip(c.values())
                    .map(|(&p, v)| c.weight(p) * v.norm_sqr())
                    .sum();
                let err = (c.norm_sq() - kept - c.residual()).abs();
                prop_assert!(err <= 1e-9 * c.norm_sq().max(1.0));
            }
            // Best-coefficient selection: every discarded magnitude is at
            // most the floor.
            let c = compress_top(&spec, s).unwrap();
            let a = c.floor();
            let kept: std::collections::HashSet<u32> = c.positions().iter().copied().collect();
            for l in 0..bins as u32 {
                if !kept.contains(&l) {
                    prop_assert!(spec.coeffs()[l as usize].norm() <= a + 1e-12);
                }
            }
        }
    }

    #[test]
    fn database_round_trip((seq, other) in seq_pair_strategy(6), s in 1usize..8) {
        let db: Vec<_> = [&seq, &other]
            .iter()
            .map(|x| {
                let spec = dft_forward(x);
                compress_top(&spec, s.min(spec.storable_bins())).unwrap()
            })
            .collect();
        let bytes = serialize(&db).unwrap();
        let back = deserialize(&bytes).unwrap();
        prop_assert_eq!(db, back);
    }

    #[test]
    fn waterfill_feasibility_and_sign(
        b in vec(0.0f64..5.0, 1..8),
        e_frac in 0.0f64..1.0,
        ceil in 0.1f64..3.0,
    ) {
        let cap = b.len() as f64 * ceil * ceil;
        let e = e_frac * cap;
        let r = waterfill(&b, e, ceil).unwrap();
        prop_assert!(r.v_opt <= 0.0);
        for &a in &r.a {
            prop_assert!((0.0..=ceil + 1e-12).contains(&a));
        }
        let spent = r.spent();
        prop_assert!(spent <= e * (1.0 + 1e-9) + 1e-12);
        if b.iter().all(|&x| x > 0.0) {
            prop_assert!((spent - e).abs() <= 1e-9 * e.max(1.0), "spent {spent} of {e}");
        }
    }

    #[test]
    fn sandwich_and_bound_relation((x, q) in seq_pair_strategy(6), s in 1usize..10) {
        let d = euclidean(&x, &q).unwrap();
        for basis in [Basis::Dft, Basis::Haar] {
            let sx = forward(&x, basis).unwrap();
            let sq = forward(&q, basis).unwrap();
            let s = s.min(sx.storable_bins());
            let cx = compress_top(&sx, s).unwrap();
            let cq = compress_top(&sq, s).unwrap();
            let b = distance_bounds(&cx, &cq).unwrap();
            prop_assert!(b.lb - 1e-9 * d.max(1.0) <= d, "{basis:?} lb {} d {d}", b.lb);
            prop_assert!(d <= b.ub + 1e-9 * d.max(1.0), "{basis:?} ub {} d {d}", b.ub);
            prop_assert!(b.lb >= 0.0 && b.ub >= b.lb);
            let relation = (b.lb * b.lb + b.ub * b.ub - 2.0 * b.d_hat).abs();
            prop_assert!(relation <= 1e-9 * b.d_hat.max(1.0));
        }
    }
}
