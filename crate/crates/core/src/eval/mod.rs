//! Ranking metrics, model evaluation over judged pairs, selection precision
//! against planted ground truth and inference timing.

pub mod bench;
pub mod metrics;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub use bench::{bench, format_bench, BenchConfig, BenchRow};
pub use metrics::{
    average_precision, dcg_at_k, map_score, ndcg_at_k, ndcg_at_k_base, MetricsReport, QueryMetrics,
    RankedList, DEFAULT_LOG_BASE, DEFAULT_MAP_THRESHOLD, NDCG_CUTOFFS,
};

use crate::corpus::{Dataset, EncodedDocument, GradedJudgment, Query, Split};
use crate::error::{Error, Result};
use crate::model::{Model, SelectionMode};
use crate::rng::{stream_for_key, substream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub mode: SelectionMode,
    pub k: usize,
    /// Upper bound on scoring threads.
    pub threads: usize,
    /// Seeds per-pair streams for random selection.
    pub seed: u64,
    pub cutoffs: Vec<usize>,
    pub map_threshold: u8,
    pub log_base: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            mode: SelectionMode::TopK,
            k: 3,
            threads: 1,
            seed: 0,
            cutoffs: NDCG_CUTOFFS.to_vec(),
            map_threshold: DEFAULT_MAP_THRESHOLD,
            log_base: DEFAULT_LOG_BASE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub lists: Vec<RankedList>,
}

impl Evaluation {
    /// Run-file lines `query_id doc_id rank score`, ranks from 1.
    pub fn run_file(&self) -> String {
        let mut out = String::new();
        for l in &self.lists {
            for (r, (d, s)) in l.doc_ids.iter().zip(&l.scores).enumerate() {
                let _ = writeln!(out, "{} {} {} {:.9}", l.query_id, d, r + 1, s);
            }
        }
        out
    }

    pub fn write_run(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.run_file())?;
        Ok(())
    }
}

fn group_by_query(judgments: &[GradedJudgment]) -> Vec<(&str, Vec<&GradedJudgment>)> {
    let mut by: BTreeMap<&str, Vec<&GradedJudgment>> = BTreeMap::new();
    for j in judgments {
        by.entry(j.query_id.as_str()).or_default().push(j);
    }
    by.into_iter().collect()
}

/// Maps `f` over `items` using up to `threads` scoped threads; results keep
/// input order.
pub(crate) fn parallel_map<T: Sync, U: Send, F>(items: &[T], threads: usize, f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                s.spawn(move || c.iter().map(f).collect::<Vec<U>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("scoring thread panicked")).collect()
    })
}

/// Ranks every judged pair of `split` by `scorer` and computes metrics.
pub fn evaluate_with<F>(dataset: &Dataset, split: Split, opts: &EvalOptions, scorer: F) -> Result<Evaluation>
where
    F: Fn(&Query, &EncodedDocument) -> Result<f64> + Sync,
{
    let groups = group_by_query(dataset.split(split));
    let lists = parallel_map(&groups, opts.threads, |(qid, js)| -> Result<RankedList> {
        let q = dataset
            .query(qid)
            .ok_or_else(|| Error::Data(format!("unknown query `{qid}`")))?;
        let mut items = Vec::with_capacity(js.len());
        for j in js {
            let d = dataset
                .doc(&j.doc_id)
                .ok_or_else(|| Error::Data(format!("unknown document `{}`", j.doc_id)))?;
            items.push((j.doc_id.clone(), scorer(q, d)?, j.grade));
        }
        Ok(RankedList::from_scored(qid, items))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let report = MetricsReport::from_lists(&lists, &opts.cutoffs, opts.map_threshold, opts.log_base)?;
    Ok(Evaluation { report, lists })
}

fn pair_rng(seed: u64, q: &Query, d: &EncodedDocument) -> rand_chacha::ChaCha8Rng {
    substream(seed, stream_for_key(&format!("{}\u{1f}{}", q.query_id, d.doc_id)))
}

pub fn evaluate<S: Scalar>(model: &Model<S>, dataset: &Dataset, split: Split, opts: &EvalOptions) -> Result<Evaluation> {
    evaluate_with(dataset, split, opts, |q, d| {
        let mut rng = pair_rng(opts.seed, q, d);
        Ok(model.score_document(q, d, opts.mode, opts.k, &mut rng)?.score.as_f64())
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionPrecision {
    pub hits: usize,
    pub total: usize,
}

impl SelectionPrecision {
    pub fn precision(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.hits as f64 / self.total as f64
        }
    }
}

/// Fraction of grade > 0 pairs whose selection contains a planted sentence.
pub fn selection_precision_with<F>(dataset: &Dataset, split: Split, select: F) -> Result<SelectionPrecision>
where
    F: Fn(&Query, &EncodedDocument) -> Result<Vec<usize>>,
{
    if !dataset.has_planted() {
        return Err(Error::Data("selection precision needs planted ground truth".into()));
    }
    let mut out = SelectionPrecision { hits: 0, total: 0 };
    for j in dataset.split(split).iter().filter(|j| j.grade > 0) {
        let (q, d) = match (dataset.query(&j.query_id), dataset.doc(&j.doc_id)) {
            (Some(q), Some(d)) => (q, d),
            _ => return Err(Error::Data(format!("unresolvable pair {} {}", j.query_id, j.doc_id))),
        };
        let planted = dataset.planted(&j.query_id, &j.doc_id).unwrap_or(&[]);
        let chosen = select(q, d)?;
        out.total += 1;
        if chosen.iter().any(|i| planted.contains(i)) {
            out.hits += 1;
        }
    }
    Ok(out)
}

/// Selection precision of a model's body selection in `mode`.
pub fn selection_precision<S: Scalar>(
    model: &Model<S>,
    dataset: &Dataset,
    split: Split,
    mode: SelectionMode,
    k: usize,
    seed: u64,
) -> Result<SelectionPrecision> {
    selection_precision_with(dataset, split, |q, d| {
        let mut rng = pair_rng(seed, q, d);
        Ok(model.select(q, d, mode, k, Default::default(), &mut rng)?.selected.indices)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, Caps, SynthConfig};

    fn dataset() -> Dataset {
        let cfg = SynthConfig { pool_size: 300, train_queries: 10, valid_queries: 2, test_queries: 6, ..Default::default() };
        Dataset::from_synth(&synth_corpus(&cfg, 3).unwrap(), 10_000, Caps::default()).unwrap()
    }

    fn grade_of(ds: &Dataset, q: &Query, d: &EncodedDocument) -> f64 {
        ds.test
            .iter()
            .find(|j| j.query_id == q.query_id && j.doc_id == d.doc_id)
            .map(|j| j.grade as f64)
            .unwrap()
    }

    #[test]
    fn oracle_scorer_is_perfect() {
        let ds = dataset();
        let e = evaluate_with(&ds, Split::Test, &EvalOptions::default(), |q, d| Ok(grade_of(&ds, q, d))).unwrap();
        assert!(e.report.ndcg.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_eq!(e.report.queries, 6);
    }

    #[test]
    fn negated_scorer_reverses_each_ranking() {
        let ds = dataset();
        let opts = EvalOptions::default();
        // distinct scores within each query: grade plus the document ordinal
        let score = |q: &Query, d: &EncodedDocument| {
            grade_of(&ds, q, d) * 100.0 + d.doc_id[d.doc_id.len() - 2..].parse::<f64>().unwrap()
        };
        let a = evaluate_with(&ds, Split::Test, &opts, |q, d| Ok(score(q, d))).unwrap();
        let b = evaluate_with(&ds, Split::Test, &opts, |q, d| Ok(-score(q, d))).unwrap();
        for (la, lb) in a.lists.iter().zip(&b.lists) {
            let mut rev = la.doc_ids.clone();
            rev.reverse();
            assert_eq!(lb.doc_ids, rev);
        }
    }

    #[test]
    fn threads_do_not_change_results() {
        let ds = dataset();
        let one = EvalOptions::default();
        let four = EvalOptions { threads: 4, ..Default::default() };
        let f = |q: &Query, d: &EncodedDocument| Ok((q.tokens[0] as f64 * 7.0 + d.sentences[0][0] as f64).sin());
        let a = evaluate_with(&ds, Split::Test, &one, f).unwrap();
        let b = evaluate_with(&ds, Split::Test, &four, f).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.run_file(), b.run_file());
    }

    #[test]
    fn run_file_lines() {
        let ds = dataset();
        let e = evaluate_with(&ds, Split::Test, &EvalOptions::default(), |q, d| Ok(grade_of(&ds, q, d))).unwrap();
        let first = e.run_file().lines().next().unwrap().to_owned();
        let cols: Vec<&str> = first.split(' ').collect();
        assert_eq!(cols.len(), 4);
        assert_eq!(cols[2], "1");
    }

    #[test]
    fn oracle_and_exhaustive_selection_are_perfect() {
        let ds = dataset();
        let oracle = selection_precision_with(&ds, Split::Test, |q, d| {
            Ok(ds.planted(&q.query_id, &d.doc_id).unwrap()[..1].to_vec())
        })
        .unwrap();
        assert_eq!(oracle.precision(), 1.0);
        let all = selection_precision_with(&ds, Split::Test, |_, d| Ok((0..d.sentence_count()).collect())).unwrap();
        assert_eq!(all.precision(), 1.0);
    }
}
