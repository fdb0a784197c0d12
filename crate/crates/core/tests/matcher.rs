use proptest::prelude::*;
use rltm::corpus::{TokenId, PAD};
use rltm::matcher::{kernel_features, matching_matrix, KernelBank, Matcher, MatcherConfig, MatcherKind};
use rltm::numeric::{init, DenseArray, ParamSet};
use rltm::rng::substream;

const VOCAB: usize = 16;
const DIM: usize = 5;

fn setup(kind: MatcherKind, seed: u64) -> (ParamSet<f64>, DenseArray<f64>, Matcher) {
    let mut cfg = MatcherConfig { kind, ..MatcherConfig::default() };
    cfg.pyramid.maps = 4;
    cfg.pyramid.hidden = 6;
    cfg.pyramid.rows = 6;
    cfg.pyramid.cols = 10;
    cfg.pyramid.pool_rows = 2;
    cfg.pyramid.pool_cols = 3;
    let mut rng = substream(seed, 1);
    let mut params = ParamSet::new();
    let m = Matcher::register(&mut params, &cfg, &mut rng).unwrap();
    let all: Vec<_> = params.ids().collect();
    for id in all {
        let shape = params.value(id).shape().to_vec();
        *params.value_mut(id) = init::uniform(&shape, 0.5, &mut rng);
    }
    let mut emb = init::uniform(&[VOCAB, DIM], 0.5, &mut rng);
    emb.row_mut(PAD as usize).fill(0.0);
    (params, emb, m)
}

fn tokens(max: usize) -> impl Strategy<Value = Vec<TokenId>> {
    prop::collection::vec(2..VOCAB as TokenId, 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn appending_pad_never_changes_psi(
        q in tokens(4),
        s in tokens(6),
        qpad in 0usize..2,
        spad in 0usize..4,
        seed in 0u64..1000,
        pyramid in any::<bool>(),
    ) {
        let kind = if pyramid { MatcherKind::MatchPyramid } else { MatcherKind::Knrm };
        let (params, emb, m) = setup(kind, seed);
        let base = m.psi(&params, &emb, &q, &s).unwrap();
        let mut qp = q.clone();
        qp.extend(std::iter::repeat(PAD).take(qpad));
        let mut sp = s.clone();
        sp.extend(std::iter::repeat(PAD).take(spad));
        let padded = m.psi(&params, &emb, &qp, &sp).unwrap();
        prop_assert!((base - padded).abs() <= 1e-12 * base.abs().max(1.0), "{} vs {}", base, padded);
    }

    #[test]
    fn kernel_features_are_finite(q in tokens(5), s in tokens(8), seed in 0u64..1000, pads in 0usize..3) {
        let (_, emb, _) = setup(MatcherKind::Knrm, seed);
        let mut s = s;
        s.extend(std::iter::repeat(PAD).take(pads));
        let f = kernel_features(&matching_matrix(&q, &s, &emb), &KernelBank::default());
        prop_assert!(f.phi.iter().all(|v| v.is_finite()));
        prop_assert!(f.soft_tf.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn matrix_entries_are_cosines(q in tokens(4), s in tokens(6), seed in 0u64..1000) {
        let (_, emb, _) = setup(MatcherKind::Knrm, seed);
        let m = matching_matrix(&q, &s, &emb);
        for (i, &a) in q.iter().enumerate() {
            for (j, &b) in s.iter().enumerate() {
                let (x, y) = (emb.row(a as usize), emb.row(b as usize));
                let dot: f64 = x.iter().zip(y).map(|(u, v)| u * v).sum();
                let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                let want = dot / (nx * ny + 1e-12);
                prop_assert!((m.get(i, j) - want).abs() < 1e-12);
                prop_assert!(m.get(i, j).abs() <= 1.0 + 1e-9);
            }
        }
    }
}

#[test]
fn all_pad_inputs_score_finitely() {
    for kind in [MatcherKind::Knrm, MatcherKind::MatchPyramid] {
        let (params, emb, m) = setup(kind, 3);
        for (q, s) in [(vec![PAD], vec![PAD, PAD]), (vec![2, 3], vec![PAD]), (vec![PAD, PAD], vec![4, 5])] {
            assert!(m.psi(&params, &emb, &q, &s).unwrap().is_finite(), "{kind:?}");
        }
    }
}

#[test]
fn exact_matches_raise_the_peak_kernel() {
    let (_, emb, _) = setup(MatcherKind::Knrm, 9);
    let bank = KernelBank::default();
    let hit = kernel_features(&matching_matrix(&[2, 3], &[2, 7, 8], &emb), &bank);
    let miss = kernel_features(&matching_matrix(&[2, 3], &[9, 7, 8], &emb), &bank);
    assert!(hit.phi[0] > miss.phi[0] + 10.0);
}

#[test]
fn pyramid_truncates_past_its_grid() {
    let (params, emb, m) = setup(MatcherKind::MatchPyramid, 1);
    let s: Vec<TokenId> = (0..10).map(|i| 2 + i as TokenId).collect();
    let mut long = s.clone();
    long.extend([3, 4, 5]);
    let a = m.psi(&params, &emb, &[2, 3], &s).unwrap();
    let b = m.psi(&params, &emb, &[2, 3], &long).unwrap();
    assert_eq!(a, b);
}
