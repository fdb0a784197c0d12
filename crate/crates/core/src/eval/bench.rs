use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedDocument, Query, TokenId};
use crate::error::{Error, Result};
use crate::matcher::MatcherKind;
use crate::model::{Inference, Model, SelectionMode};
use crate::rng::{stream_for_key, substream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub batch_sizes: Vec<usize>,
    /// Body lengths in tokens.
    pub doc_tokens: Vec<usize>,
    /// Tokens per body sentence (the last one may be shorter).
    pub sentence_len: usize,
    pub title_len: usize,
    pub query_len: usize,
    pub k: usize,
    pub repetitions: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            batch_sizes: vec![32, 64, 128],
            doc_tokens: vec![2000],
            sentence_len: 64,
            title_len: 8,
            query_len: 4,
            k: 3,
            repetitions: 20,
            warmup: 2,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let nonzero = [
            ("sentence_len", self.sentence_len),
            ("query_len", self.query_len),
            ("k", self.k),
            ("repetitions", self.repetitions),
        ];
        if let Some((name, _)) = nonzero.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("bench {name} must be >= 1")));
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return Err(Error::InvalidConfig("bench batch sizes must be non-empty and positive".into()));
        }
        if self.doc_tokens.is_empty() || self.doc_tokens.contains(&0) {
            return Err(Error::InvalidConfig("bench document lengths must be non-empty and positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mode: SelectionMode,
    pub matcher: MatcherKind,
    pub batch: usize,
    pub doc_len: usize,
    pub median_ms: f64,
    /// Fulldoc median divided by this row's median.
    pub speedup: f64,
}

fn random_ids<R: Rng>(n: usize, vocab: usize, rng: &mut R) -> Vec<TokenId> {
    (0..n).map(|_| rng.gen_range(2..vocab) as TokenId).collect()
}

/// Random query/document pairs of the requested shape.
pub fn synthetic_batch(
    vocab_size: usize,
    batch: usize,
    doc_tokens: usize,
    cfg: &BenchConfig,
    seed: u64,
) -> Vec<(Query, EncodedDocument)> {
    let mut rng = substream(seed, stream_for_key(&format!("bench-{batch}-{doc_tokens}")));
    (0..batch)
        .map(|i| {
            let query = Query { query_id: format!("b{i}"), tokens: random_ids(cfg.query_len, vocab_size, &mut rng) };
            let mut sentences = Vec::new();
            let mut left = doc_tokens;
            while left > 0 {
                let n = left.min(cfg.sentence_len);
                sentences.push(random_ids(n, vocab_size, &mut rng));
                left -= n;
            }
            let doc = EncodedDocument {
                doc_id: format!("b{i}"),
                title: random_ids(cfg.title_len, vocab_size, &mut rng),
                raw_sentence_count: sentences.len(),
                sentences,
            };
            (query, doc)
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn time_batch<S: Scalar>(
    model: &Inference<'_, S>,
    batch: &[(Query, EncodedDocument)],
    mode: SelectionMode,
    k: usize,
) -> Result<f64> {
    let mut rng = substream(0, 0);
    let start = Instant::now();
    let mut sink = S::zero();
    for (q, d) in batch {
        sink += model.score_document(q, d, mode, k, &mut rng)?.score;
    }
    let ms = start.elapsed().as_secs_f64() * 1e3;
    std::hint::black_box(sink);
    Ok(ms)
}

/// Per-batch inference time of the model in fulldoc and topk modes on one
/// thread; medians over repetitions after warmup. Modes alternate within
/// each repetition. The selector projection is built once per model,
/// outside the timed region.
pub fn bench<S: Scalar>(model: &Model<S>, cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let inference = model.inference()?;
    let mut rows = Vec::new();
    for &doc_len in &cfg.doc_tokens {
        for &b in &cfg.batch_sizes {
            let batch = synthetic_batch(model.config.vocab_size, b, doc_len, cfg, cfg.seed);
            let modes = [SelectionMode::FullDoc, SelectionMode::TopK];
            for _ in 0..cfg.warmup {
                for mode in modes {
                    time_batch(&inference, &batch, mode, cfg.k)?;
                }
            }
            let mut times = [Vec::new(), Vec::new()];
            for _ in 0..cfg.repetitions {
                for (t, mode) in times.iter_mut().zip(modes) {
                    t.push(time_batch(&inference, &batch, mode, cfg.k)?);
                }
            }
            let medians: Vec<_> = modes.into_iter().zip(times.map(median)).collect();
            let full = medians[0].1;
            for (mode, m) in medians {
                rows.push(BenchRow {
                    mode,
                    matcher: model.matcher.kind(),
                    batch: b,
                    doc_len,
                    median_ms: m,
                    speedup: full / m,
                });
            }
        }
    }
    Ok(rows)
}

/// Tab-separated table with `# key=value` header lines.
pub fn format_bench(rows: &[BenchRow], meta: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str("mode\tmatcher\tbatch\tdoc_len\tmedian_ms\tspeedup\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.3}\t{:.2}",
            r.mode.as_str(),
            r.matcher.as_str(),
            r.batch,
            r.doc_len,
            r.median_ms,
            r.speedup
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_documents_have_the_requested_length() {
        let cfg = BenchConfig::default();
        let batch = synthetic_batch(100, 3, 2000, &cfg, 1);
        assert_eq!(batch.len(), 3);
        for (_, d) in &batch {
            assert_eq!(d.sentences.iter().map(Vec::len).sum::<usize>(), 2000);
            assert!(d.sentences.iter().all(|s| s.len() <= 64));
            assert_eq!(d.sentence_count(), 32);
        }
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn format_has_header_and_rows() {
        let rows = vec![BenchRow {
            mode: SelectionMode::TopK,
            matcher: MatcherKind::Knrm,
            batch: 32,
            doc_len: 2000,
            median_ms: 1.5,
            speedup: 4.0,
        }];
        let t = format_bench(&rows, &[("seed", "3".into())]);
        assert_eq!(t, "# seed=3\nmode\tmatcher\tbatch\tdoc_len\tmedian_ms\tspeedup\ntopk\tknrm\t32\t2000\t1.500\t4.00\n");
    }
}
