//! End-to-end acceptance suite. Each test prints one verdict line to the
//! real stdout (bypassing capture) and then asserts it.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::Rng;
use rltm::baselines::{bm25_score, select_random, Bm25Params, CorpusStats};
use rltm::corpus::{synth_corpus, Caps, Dataset, EncodedDocument, Query, Split, SynthConfig, TokenId, Triple};
use rltm::eval::{
    average_precision, bench, evaluate, evaluate_with, ndcg_at_k, selection_precision, selection_precision_with,
    BenchConfig, EvalOptions, MetricsReport, RankedList, NDCG_CUTOFFS,
};
use rltm::gradients::{check_component, GradCheckSetup, GradComponent};
use rltm::matcher::MatcherKind;
use rltm::model::{Model, ModelConfig, SelectionMode};
use rltm::numeric::{init, AdamConfig};
use rltm::rng::substream;
use rltm::selector::{sample_k, select_topk, SamplingScheme, SelectedSentences, SelectionPolicy};
use rltm::trainer::{rltm_accumulate, train, BaselineState, TrainConfig, TrainMode};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: usize, pass: bool, what: &str, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "acceptance {n:>2} [{tag}] {what}: {detail}");
    let _ = out.flush();
}

// ---------------------------------------------------------------- 1

#[test]
fn c01_gradient_fidelity() {
    let _g = serial();
    let t = Instant::now();
    let setup = GradCheckSetup::default();
    let mut worst = BTreeMap::new();
    for c in GradComponent::ALL {
        let mut max = 0.0f64;
        for seed in 0..20 {
            max = max.max(check_component(&setup, c, seed).unwrap().max_rel_error);
        }
        worst.insert(c.as_str(), max);
    }
    let elapsed = t.elapsed();
    let max = worst.values().fold(0.0f64, |a, &b| a.max(b));
    let pass = max < 1e-4 && elapsed < Duration::from_secs(60);
    verdict(1, pass, "gradient fidelity", &format!("max rel error {worst:?} in {elapsed:.1?}"));
    assert!(pass);
}

// ---------------------------------------------------------------- 2

fn random_doc<R: Rng>(rng: &mut R, vocab: usize, t: usize) -> EncodedDocument {
    let words = |rng: &mut R, n: usize| (0..n).map(|_| rng.gen_range(2..vocab) as TokenId).collect::<Vec<_>>();
    let title = words(rng, 3);
    let sentences = (0..t)
        .map(|_| {
            let n = rng.gen_range(1..=8);
            words(rng, n)
        })
        .collect();
    EncodedDocument { doc_id: "d".into(), title, sentences, raw_sentence_count: t }
}

#[test]
fn c02_policy_correctness() {
    let _g = serial();
    let mut mc = ModelConfig::new(60);
    mc.embed_dim = 16;
    mc.hidden = 16;
    let mut model = Model::<f64>::new(mc, 7).unwrap();
    let mut rng = substream(2, 0);
    let ids: Vec<_> = model.params.ids().collect();
    for id in ids {
        let shape = model.params.value(id).shape().to_vec();
        *model.params.value_mut(id) = init::uniform(&shape, 1.0, &mut rng);
    }
    let q = Query { query_id: "q".into(), tokens: vec![2, 5, 9] };
    let mut worst_sum = 0.0f64;
    let mut deterministic = true;
    for i in 0..1000 {
        let d = random_doc(&mut rng, 60, 1 + i % 32);
        let policy = model.selector.policy(&model.params, &q, &d).unwrap();
        worst_sum = worst_sum.max((policy.probs.iter().sum::<f64>() - 1.0).abs());
        let a = select_topk(&policy, 3);
        let b = select_topk(&policy, 3);
        let sorted = a.indices.windows(2).all(|w| policy.probs[w[0]] >= policy.probs[w[1]]);
        deterministic &= a == b && sorted;
    }
    let tied = SelectionPolicy::from_scores(vec![0.0; 5]).unwrap();
    deterministic &= select_topk(&tied, 2).indices == vec![0, 1];

    let draws = 10_000;
    let mut worst_freq = 0.0f64;
    for t in 1..=8 {
        let scores: Vec<f64> = (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let policy = SelectionPolicy::from_scores(scores).unwrap();
        for scheme in [SamplingScheme::WithoutReplacement, SamplingScheme::WithReplacement] {
            let mut counts = vec![0usize; t];
            let mut srng = substream(t as u64, 9);
            for _ in 0..draws {
                counts[sample_k(&policy, 1, &mut srng, scheme).indices[0]] += 1;
            }
            for (c, p) in counts.iter().zip(&policy.probs) {
                worst_freq = worst_freq.max((*c as f64 / draws as f64 - p).abs());
            }
        }
    }
    let pass = worst_sum <= 1e-9 && deterministic && worst_freq <= 0.02;
    verdict(
        2,
        pass,
        "policy correctness",
        &format!("max |sum-1| {worst_sum:.2e}, top-K deterministic {deterministic}, max MC deviation {worst_freq:.4}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 3

fn tuples(t: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out.into_iter().flat_map(|p| (0..t).map(move |i| [p.clone(), vec![i]].concat())).collect();
    }
    out
}

/// Largest deviation between the enumeration-weighted implemented update and
/// a fourth-order central difference of `J = Σ Π π⁺ Π π⁻ (s⁺ − s⁻)`.
fn estimator_gap(t: usize, k: usize, seed: u64) -> f64 {
    let vocab = 14;
    let mut rng = substream(seed, 3);
    let q = Query { query_id: "q".into(), tokens: vec![2, 3, 4] };
    let mut pos = random_doc(&mut rng, vocab, t);
    pos.doc_id = "p".into();
    let mut neg = random_doc(&mut rng, vocab, t);
    neg.doc_id = "n".into();
    let mut mc = ModelConfig::new(vocab);
    mc.embed_dim = 6;
    mc.hidden = 5;
    mc.shared_embeddings = false;
    let mut m = Model::<f64>::new(mc, seed).unwrap();
    let ids: Vec<_> = m.params.ids().collect();
    for id in ids {
        let shape = m.params.value(id).shape().to_vec();
        *m.params.value_mut(id) = init::uniform(&shape, 0.5, &mut rng);
    }
    let cfg = TrainConfig::default();
    let triple = Triple { query: &q, positive: &pos, negative: &neg, grade_gap: 1 };
    let sel = |i: &[usize]| SelectedSentences::<f64> { indices: i.to_vec(), log_prob_sum: 0.0, includes_title: true };
    let all = tuples(t, k);
    let s_plus: Vec<f64> = all.iter().map(|a| m.score_units(&q, &pos, a).unwrap()).collect();
    let s_minus: Vec<f64> = all.iter().map(|b| m.score_units(&q, &neg, b).unwrap()).collect();
    let weight = |p: &[f64], a: &[usize]| a.iter().map(|&i| p[i]).product::<f64>();
    let objective = |m: &Model<f64>| {
        let pp = m.selector.policy(&m.params, &q, &pos).unwrap().probs;
        let pm = m.selector.policy(&m.params, &q, &neg).unwrap().probs;
        let mut j = 0.0;
        for (a, sp) in all.iter().zip(&s_plus) {
            for (b, sm) in all.iter().zip(&s_minus) {
                j += weight(&pp, a) * weight(&pm, b) * (sp - sm);
            }
        }
        j
    };
    let ids = m.selector_ids();
    let pp = m.selector.policy(&m.params, &q, &pos).unwrap().probs;
    let pm = m.selector.policy(&m.params, &q, &neg).unwrap().probs;
    let mut expected: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for a in &all {
        for b in &all {
            m.params.zero_grads();
            rltm_accumulate(&mut m, &triple, &sel(a), &sel(b), &cfg, &mut BaselineState::new(), 1.0).unwrap();
            let w = weight(&pp, a) * weight(&pm, b);
            for (ti, &id) in ids.iter().enumerate() {
                for (c, g) in m.params.tensor(id).grad.as_slice().iter().enumerate() {
                    *expected.entry((ti, c)).or_default() += w * g;
                }
            }
        }
    }
    m.params.zero_grads();
    let h = 1e-4;
    let mut worst = 0.0f64;
    for (ti, &id) in ids.iter().enumerate() {
        for c in 0..m.params.value(id).len() {
            let orig = m.params.value(id).as_slice()[c];
            let mut at = |x: f64| {
                m.params.value_mut(id).as_mut_slice()[c] = orig + x;
                objective(&m)
            };
            let d = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            m.params.value_mut(id).as_mut_slice()[c] = orig;
            // Accumulated gradients descend, so they estimate −∇J.
            let exact = -d;
            let err = (expected[&(ti, c)] - exact).abs() / exact.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn c03_estimator_exactness() {
    let _g = serial();
    let t0 = Instant::now();
    let mut worst = BTreeMap::new();
    for t in [2, 3, 4] {
        for k in [1, 2] {
            let gap = (0..3).map(|s| estimator_gap(t, k, 10 * t as u64 + s)).fold(0.0f64, f64::max);
            worst.insert(format!("T{t}K{k}"), gap);
        }
    }
    let max = worst.values().fold(0.0f64, |a, &b| a.max(b));
    let pass = max <= 1e-6;
    verdict(3, pass, "estimator exactness", &format!("max deviation {max:.2e} in {:.1?}", t0.elapsed()));
    assert!(pass, "{worst:?}");
}

// ---------------------------------------------------------------- 4

fn oracle_ndcg(grades: &[u8], k: usize) -> f64 {
    let gain = |g: u8| (1u32 << g) as f64 - 1.0;
    let dcg = |g: &[u8]| g.iter().take(k).enumerate().map(|(i, &r)| gain(r) / ((i + 2) as f64).log2()).sum::<f64>();
    let mut counts = [0usize; 5];
    grades.iter().for_each(|&g| counts[g as usize] += 1);
    let ideal: Vec<u8> = (0..5u8).rev().flat_map(|g| std::iter::repeat(g).take(counts[g as usize])).collect();
    let best = dcg(&ideal);
    if best == 0.0 {
        0.0
    } else {
        dcg(grades) / best
    }
}

fn oracle_ap(grades: &[u8], thr: u8) -> f64 {
    let rel: Vec<usize> = grades.iter().enumerate().filter(|(_, &g)| g >= thr).map(|(i, _)| i + 1).collect();
    if rel.is_empty() {
        return 0.0;
    }
    rel.iter().enumerate().map(|(hit, &rank)| (hit + 1) as f64 / rank as f64).sum::<f64>() / rel.len() as f64
}

#[test]
fn c04_metric_oracles() {
    let _g = serial();
    let mut rng = substream(4, 0);
    let mut worst = 0.0f64;
    let mut lists = Vec::new();
    for qi in 0..1000 {
        let n = rng.gen_range(1..=20);
        let items: Vec<(String, f64, u8)> =
            (0..n).map(|i| (format!("d{i:02}"), rng.gen::<f64>(), rng.gen_range(0..=4))).collect();
        let list = RankedList::from_scored(&format!("q{qi}"), items);
        for k in NDCG_CUTOFFS {
            worst = worst.max((ndcg_at_k(&list.grades, k).unwrap() - oracle_ndcg(&list.grades, k)).abs());
        }
        worst = worst.max((average_precision(&list.grades, 2) - oracle_ap(&list.grades, 2)).abs());
        lists.push(list);
    }
    let report = MetricsReport::standard(&lists).unwrap();
    for (i, k) in NDCG_CUTOFFS.iter().enumerate() {
        let mean = lists.iter().map(|l| oracle_ndcg(&l.grades, *k)).sum::<f64>() / lists.len() as f64;
        worst = worst.max((report.ndcg[i] - mean).abs());
    }
    let map = lists.iter().map(|l| oracle_ap(&l.grades, 2)).sum::<f64>() / lists.len() as f64;
    worst = worst.max((report.map - map).abs());
    let ideal = NDCG_CUTOFFS.iter().all(|&k| ndcg_at_k(&[4, 3, 3, 2, 1, 0], k).unwrap() == 1.0);
    let example = ndcg_at_k(&[0, 4], 2).unwrap();
    let pass = worst <= 1e-12 && ideal && (example - 0.6309).abs() < 1e-4;
    verdict(4, pass, "metric oracles", &format!("max deviation {worst:.1e}, ideal=1 {ideal}, [0,4]@2 = {example:.6}"));
    assert!(pass);
}

// ---------------------------------------------------------------- 5, 6, 8

const SEEDS: [u64; 3] = [1, 2, 3];
const MODES: [TrainMode; 3] = [TrainMode::Rltm, TrainMode::Pipeline, TrainMode::FullDoc];
const KINDS: [MatcherKind; 2] = [MatcherKind::Knrm, MatcherKind::MatchPyramid];
const K: usize = 5;

fn model_config(vocab: usize, kind: MatcherKind) -> ModelConfig {
    let mut mc = ModelConfig::new(vocab);
    mc.embed_dim = 64;
    mc.hidden = 64;
    mc.matcher.kind = kind;
    let mp = &mut mc.matcher.pyramid;
    mp.maps = 8;
    mp.hidden = 16;
    mp.rows = 4;
    mp.cols = 16;
    mp.pool_rows = 2;
    mp.pool_cols = 4;
    mc
}

fn train_config(mode: TrainMode, k: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        mode,
        k,
        adam: AdamConfig::with_learning_rate(1e-3),
        selector_pretrain_epochs: 3,
        matcher_pretrain_epochs: 1,
        joint_epochs: 2,
        margin: Some(1.0),
        freeze_selector_embeddings: true,
        seed,
        ..TrainConfig::default()
    }
}

struct SeedRun {
    /// Test NDCG@1 per matcher and training mode.
    ndcg1: BTreeMap<(&'static str, &'static str), f64>,
    /// RLTM K-NRM test NDCG@10 at K = 1, 5, 7.
    sweep: [f64; 3],
    selection: f64,
    random_measured: f64,
    random_expected: f64,
}

struct Experiments {
    runs: Vec<SeedRun>,
    comparison_time: Duration,
}

fn test_ndcg(model: &Model<f64>, ds: &Dataset, mode: TrainMode, k: usize) -> Vec<f64> {
    let opts = EvalOptions { mode: mode.eval_mode(), k, ..EvalOptions::default() };
    evaluate(model, ds, Split::Test, &opts).unwrap().report.ndcg
}

fn random_control(ds: &Dataset, seed: u64) -> (f64, f64) {
    let draws = 20;
    let mut hits = 0.0;
    for r in 0..draws {
        let p = selection_precision_with(ds, Split::Test, |q, d| {
            let key = rltm::rng::stream_for_key(&format!("{}|{}|{r}", q.query_id, d.doc_id));
            let mut rng = substream(seed, key);
            Ok(select_random::<f64, _>(d.sentence_count(), 1, &mut rng).indices)
        })
        .unwrap();
        hits += p.precision();
    }
    let relevant: Vec<_> = ds.split(Split::Test).iter().filter(|j| j.grade > 0).collect();
    let expected = relevant
        .iter()
        .map(|j| {
            let t = ds.doc(&j.doc_id).unwrap().sentence_count();
            ds.planted(&j.query_id, &j.doc_id).unwrap().len() as f64 / t as f64
        })
        .sum::<f64>()
        / relevant.len() as f64;
    (hits / draws as f64, expected)
}

fn experiments() -> &'static Experiments {
    static CELL: OnceLock<Experiments> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut runs = Vec::new();
        let mut comparison_time = Duration::ZERO;
        for seed in SEEDS {
            let synth = SynthConfig::default();
            let ds = Dataset::from_synth(&synth_corpus(&synth, seed).unwrap(), 100_000, Caps::default()).unwrap();
            let mut ndcg1 = BTreeMap::new();
            let mut sweep = [0.0; 3];
            let mut selection = 0.0;
            for kind in KINDS {
                for mode in MODES {
                    let t = Instant::now();
                    let out = train::<f64>(&ds, model_config(ds.vocab.len(), kind), &train_config(mode, K, seed)).unwrap();
                    comparison_time += t.elapsed();
                    let ndcg = test_ndcg(&out.model, &ds, mode, K);
                    ndcg1.insert((kind.as_str(), mode.as_str()), ndcg[0]);
                    if kind == MatcherKind::Knrm && mode == TrainMode::Rltm {
                        sweep[1] = ndcg[3];
                        selection = selection_precision(&out.model, &ds, Split::Test, SelectionMode::TopK, 1, seed)
                            .unwrap()
                            .precision();
                    }
                }
            }
            for (slot, k) in [(0, 1), (2, 7)] {
                let cfg = train_config(TrainMode::Rltm, k, seed);
                let out = train::<f64>(&ds, model_config(ds.vocab.len(), MatcherKind::Knrm), &cfg).unwrap();
                sweep[slot] = test_ndcg(&out.model, &ds, TrainMode::Rltm, k)[3];
            }
            let (random_measured, random_expected) = random_control(&ds, seed);
            runs.push(SeedRun { ndcg1, sweep, selection, random_measured, random_expected });
        }
        Experiments { runs, comparison_time }
    })
}

#[test]
fn c05_joint_training_beats_pipeline_and_fulldoc() {
    let _g = serial();
    let ex = experiments();
    let mut detail = Vec::new();
    let mut any = false;
    for kind in KINDS {
        let k = kind.as_str();
        let wins = ex
            .runs
            .iter()
            .filter(|r| r.ndcg1[&(k, "rltm")] > r.ndcg1[&(k, "pipeline")] && r.ndcg1[&(k, "rltm")] > r.ndcg1[&(k, "fulldoc")])
            .count();
        any |= wins >= 2;
        let per_seed: Vec<String> = ex
            .runs
            .iter()
            .map(|r| format!("{:.4}/{:.4}/{:.4}", r.ndcg1[&(k, "rltm")], r.ndcg1[&(k, "pipeline")], r.ndcg1[&(k, "fulldoc")]))
            .collect();
        detail.push(format!("{k} wins {wins}/3 (rltm/pipeline/fulldoc {})", per_seed.join(" ")));
    }
    let pass = any && ex.comparison_time < Duration::from_secs(30 * 60);
    detail.push(format!("{:.0?}", ex.comparison_time));
    verdict(5, pass, "rltm NDCG@1 above pipeline and fulldoc", &detail.join("; "));
    assert!(pass);
}

#[test]
fn c06_selection_quality() {
    let _g = serial();
    let ex = experiments();
    let sel: Vec<f64> = ex.runs.iter().map(|r| r.selection).collect();
    let control: Vec<(f64, f64)> = ex.runs.iter().map(|r| (r.random_measured, r.random_expected)).collect();
    let quality = sel.iter().all(|&p| p >= 0.90);
    let calibrated = control.iter().all(|(m, e)| (m - e).abs() <= 0.02);
    let pass = quality && calibrated;
    let control: Vec<String> = control.iter().map(|(m, e)| format!("{m:.4}~{e:.4}")).collect();
    verdict(
        6,
        pass,
        "top-1 planted selection",
        &format!("rltm hit rate {sel:.3?} (need >= 0.90); random control {}", control.join(" ")),
    );
    assert!(calibrated, "random control off");
    assert!(quality, "selection below 0.90");
}

#[test]
fn c08_k_sweep_trend() {
    let _g = serial();
    let ex = experiments();
    let ok = |s: &[f64; 3]| s[1] >= s[0] && s[2] - s[1] <= s[1] - s[0];
    let good = ex.runs.iter().filter(|r| ok(&r.sweep)).count();
    let sweeps: Vec<String> = ex.runs.iter().map(|r| format!("{:.4}/{:.4}/{:.4}", r.sweep[0], r.sweep[1], r.sweep[2])).collect();
    let pass = good >= 2;
    verdict(8, pass, "K-sweep diminishing returns", &format!("{good}/3 seeds; NDCG@10 at K=1/5/7 {}", sweeps.join(" ")));
    assert!(pass);
}

// ---------------------------------------------------------------- 7

#[test]
fn c07_topk_inference_speedup() {
    let _g = serial();
    let mut lines = Vec::new();
    let mut pass = true;
    for kind in KINDS {
        let mut mc = ModelConfig::new(5000);
        mc.matcher.kind = kind;
        let model = Model::<f64>::new(mc, 0).unwrap();
        let cfg = BenchConfig { repetitions: 20, warmup: 1, ..BenchConfig::default() };
        for row in bench(&model, &cfg).unwrap().iter().filter(|r| r.mode == SelectionMode::TopK) {
            pass &= row.speedup >= 3.0;
            lines.push(format!("{} b{} {:.1}x", kind.as_str(), row.batch, row.speedup));
        }
    }
    verdict(7, pass, "topk over fulldoc speedup", &lines.join(", "));
    assert!(pass);
}

// ---------------------------------------------------------------- 9

fn artifacts(dir: &std::path::Path) -> Vec<Vec<u8>> {
    let synth = SynthConfig { train_queries: 40, valid_queries: 5, test_queries: 10, ..SynthConfig::default() };
    let ds = Dataset::from_synth(&synth_corpus(&synth, 9).unwrap(), 100_000, Caps::default()).unwrap();
    let mut mc = model_config(ds.vocab.len(), MatcherKind::Knrm);
    mc.embed_dim = 8;
    mc.hidden = 8;
    let cfg = TrainConfig { k: 3, selector_pretrain_epochs: 1, matcher_pretrain_epochs: 1, joint_epochs: 1, seed: 9, ..train_config(TrainMode::Rltm, 3, 9) };
    let out = train::<f64>(&ds, mc, &cfg).unwrap();
    let meta = [("seed", "9".to_string())];
    ds.vocab.save(&dir.join("vocab.tsv"), &meta).unwrap();
    out.model.to_checkpoint(&ds.vocab.hash(), "fixed", 9).unwrap().save(&dir.join("checkpoint.json")).unwrap();
    let eval = evaluate(&out.model, &ds, Split::Test, &EvalOptions::default()).unwrap();
    std::fs::write(dir.join("report.txt"), eval.report.to_kv(&meta)).unwrap();
    ["vocab.tsv", "checkpoint.json", "report.txt"].iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect()
}

#[test]
fn c09_determinism() {
    let _g = serial();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (x, y) = (artifacts(a.path()), artifacts(b.path()));
    let same: Vec<bool> = x.iter().zip(&y).map(|(p, q)| p == q).collect();
    let pass = same.iter().all(|&s| s);
    verdict(9, pass, "byte-identical reruns", &format!("vocab/checkpoint/report identical {same:?}"));
    assert!(pass);
}

// ---------------------------------------------------------------- 10

#[test]
fn c10_bm25_sanity() {
    let _g = serial();
    let synth = SynthConfig { train_queries: 10, valid_queries: 10, test_queries: 300, distractor_rate: 0.0, exact_match: true, ..SynthConfig::default() };
    let ds = Dataset::from_synth(&synth_corpus(&synth, 10).unwrap(), 100_000, Caps::default()).unwrap();
    let stats = CorpusStats::build(ds.docs.iter().map(|d| d.all_tokens())).unwrap();
    let eval = evaluate_with(&ds, Split::Test, &EvalOptions::default(), |q, d| {
        let doc: Vec<TokenId> = d.all_tokens().collect();
        Ok(bm25_score(&q.tokens, &doc, &stats, Bm25Params::default()))
    })
    .unwrap();
    let with_top: Vec<_> = eval.lists.iter().filter(|l| l.grades.contains(&4)).collect();
    let first = with_top.iter().filter(|l| l.grades[0] == 4).count();
    let rate = first as f64 / with_top.len() as f64;

    let hand = CorpusStats::build([vec![2u32], vec![3u32]].iter().map(|d| d.iter().copied())).unwrap();
    let score = bm25_score(&[2], &[2], &hand, Bm25Params::default());
    let pass = rate >= 0.95 && (score - std::f64::consts::LN_2).abs() < 1e-9;
    verdict(
        10,
        pass,
        "bm25 sanity",
        &format!("grade-4 first on {first}/{} queries ({rate:.3}); hand example {score:.12}", with_top.len()),
    );
    assert!(pass);
}
