use mbgmn_core::autodiff::{SparseMatrix, Tape, Tensor};
use mbgmn_core::data::TestCase;
use mbgmn_core::eval::{rank_metrics, rank_of, ConstantScorer, Scorer, CUTOFFS};
use mbgmn_core::model::Ablation;
use mbgmn_core::RunConfig;
use proptest::prelude::*;

fn sparse_and_dense() -> impl Strategy<Value = (usize, usize, usize, Vec<(usize, usize, f64)>, Vec<f64>)> {
    (1usize..12, 1usize..12, 1usize..5).prop_flat_map(|(r, c, d)| {
        let cells = proptest::collection::btree_map((0..r, 0..c), -2.0f64..2.0, 0..=r * c);
        let dense = proptest::collection::vec(-2.0f64..2.0, c * d);
        (Just(r), Just(c), Just(d), cells.prop_map(|m| m.into_iter().map(|((a, b), v)| (a, b, v)).collect()), dense)
    })
}

proptest! {
    #[test]
    fn spmm_equals_dense_product((r, c, d, triplets, dense) in sparse_and_dense()) {
        let s = SparseMatrix::from_triplets(r, c, &triplets).unwrap();
        let b = Tensor::new(vec![c, d], dense).unwrap();
        let expect = s.to_dense().matmul(&b).unwrap();
        let mut tape = Tape::new();
        let bv = tape.constant(b);
        let out = tape.spmm(&std::sync::Arc::new(s), bv).unwrap();
        prop_assert!(tape.value(out).max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn softmax_is_shift_invariant(row in proptest::collection::vec(-20.0f64..20.0, 1..8), shift in -50.0f64..50.0) {
        let n = row.len();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, n], row.clone()).unwrap());
        let y = tape.constant(Tensor::new(vec![1, n], row.iter().map(|v| v + shift).collect()).unwrap());
        let (a, b) = (tape.softmax(x).unwrap(), tape.softmax(y).unwrap());
        prop_assert!(tape.value(a).max_abs_diff(tape.value(b)) < 1e-9);
        prop_assert!((tape.value(a).data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metric_identities(rank in 1usize..=100) {
        let mut prev = (0.0, 0.0);
        for &n in &CUTOFFS {
            let (hr, ndcg) = rank_metrics(rank, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&hr) && 0.0 <= ndcg && ndcg <= hr);
            prop_assert!(hr >= prev.0 && ndcg >= prev.1);
            prev = (hr, ndcg);
        }
        let (hr1, ndcg1) = rank_metrics(rank, 1).unwrap();
        prop_assert_eq!(hr1, ndcg1);
    }

    #[test]
    fn ranks_form_a_permutation(scores in proptest::collection::vec(0u8..4, 2..30)) {
        // Each candidate in turn plays the held-out item; ties are common.
        let n = scores.len();
        let items: Vec<usize> = (0..n).map(|i| (i * 7) % 31).collect();
        prop_assume!({ let mut s = items.clone(); s.sort(); s.dedup(); s.len() == n });
        let mut ranks: Vec<usize> = (0..n)
            .map(|h| {
                let mut c = vec![items[h]];
                let mut s = vec![scores[h] as f64];
                for j in (0..n).filter(|&j| j != h) {
                    c.push(items[j]);
                    s.push(scores[j] as f64);
                }
                rank_of(&c, &s)
            })
            .collect();
        ranks.sort();
        prop_assert_eq!(ranks, (1..=n).collect::<Vec<_>>());
    }

    #[test]
    fn constant_scorer_rank_counts_smaller_ids(
        pool in prop::sample::subsequence((0usize..200).collect::<Vec<_>>(), 100),
        pick in 0usize..100,
    ) {
        let item = pool[pick];
        let negs: Vec<usize> = pool.iter().copied().filter(|&j| j != item).collect();
        let case = TestCase { user: 0, item, negatives: negs.clone() };
        let s = ConstantScorer(1.0).score_cases(std::slice::from_ref(&case)).unwrap();
        let expect = 1 + negs.iter().filter(|&&j| j < item).count();
        prop_assert_eq!(rank_of(&case.candidates(), &s[0]), expect);
    }

    #[test]
    fn config_text_round_trips(
        seed in any::<u64>(),
        epochs in 1usize..100,
        lambda in prop::sample::select(vec![0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001]),
        flags in proptest::collection::vec(prop::sample::select(Ablation::FLAGS.to_vec()), 0..3),
    ) {
        let text = format!("seed = {seed}\nepochs = {epochs}\nlambda = {lambda}\nablate = {}\n", flags.join(","));
        let cfg = RunConfig::parse(&text).unwrap();
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.to_text(), cfg.to_text());
    }
}
