//! Synthetic corpora with planted relevance.
//!
//! Every document belongs to one query. A document of grade `g > 0` has
//! exactly `g` body sentences carrying at least half of the query's terms;
//! grade-0 bodies carry none. Non-planted sentences of relevant documents may
//! carry a single query term ("distractors") when the query is long enough
//! for one term to stay below the planting threshold.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::document::{GradedJudgment, MAX_GRADE};
use super::records::{write_jsonl, write_planted, write_qrels, DocRecord, PlantedRecord, QueryRecord};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Distinct word types the generator draws from.
    pub pool_size: usize,
    pub train_queries: usize,
    pub valid_queries: usize,
    pub test_queries: usize,
    pub docs_per_query: usize,
    pub sentences_per_doc: usize,
    pub sentence_len: usize,
    pub title_len: usize,
    pub query_len_min: usize,
    pub query_len_max: usize,
    /// Probability that a document is relevant (and therefore planted).
    pub planting_rate: f64,
    /// Probability that a non-planted sentence of a relevant document carries
    /// one query term.
    pub distractor_rate: f64,
    /// Planted sentences carry every query term rather than a random
    /// majority of them.
    #[serde(default)]
    pub exact_match: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            pool_size: 2000,
            train_queries: 2000,
            valid_queries: 100,
            test_queries: 200,
            docs_per_query: 10,
            sentences_per_doc: 16,
            sentence_len: 10,
            title_len: 4,
            query_len_min: 3,
            query_len_max: 4,
            planting_rate: 0.6,
            distractor_rate: 0.3,
            exact_match: false,
        }
    }
}

/// `⌈n/2⌉`: query terms a sentence needs to count as planted.
pub fn planting_threshold(query_len: usize) -> usize {
    query_len.div_ceil(2)
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.sentences_per_doc < MAX_GRADE as usize {
            return bad(format!(
                "grade {MAX_GRADE} needs {MAX_GRADE} planted sentences but sentences_per_doc = {}",
                self.sentences_per_doc
            ));
        }
        if self.query_len_min == 0 || self.query_len_min > self.query_len_max {
            return bad(format!(
                "query length range [{}, {}] is empty",
                self.query_len_min, self.query_len_max
            ));
        }
        if self.sentence_len < self.query_len_max {
            return bad(format!(
                "sentence_len {} cannot hold a planted query of {} terms",
                self.sentence_len, self.query_len_max
            ));
        }
        if self.pool_size < 2 * self.query_len_max + 2 {
            return bad(format!("pool_size {} too small", self.pool_size));
        }
        if self.docs_per_query == 0 || self.title_len == 0 {
            return bad("docs_per_query and title_len must be positive".into());
        }
        for (name, r) in [("planting_rate", self.planting_rate), ("distractor_rate", self.distractor_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1], got {r}"));
            }
        }
        Ok(())
    }

    pub fn total_queries(&self) -> usize {
        self.train_queries + self.valid_queries + self.test_queries
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub queries: Vec<QueryRecord>,
    pub docs: Vec<DocRecord>,
    pub train: Vec<GradedJudgment>,
    pub valid: Vec<GradedJudgment>,
    pub test: Vec<GradedJudgment>,
    pub planted: Vec<PlantedRecord>,
}

pub const QUERIES_FILE: &str = "queries.jsonl";
pub const DOCS_FILE: &str = "docs.jsonl";
pub const TRAIN_QRELS: &str = "train.qrels";
pub const VALID_QRELS: &str = "valid.qrels";
pub const TEST_QRELS: &str = "test.qrels";
pub const PLANTED_FILE: &str = "planted.tsv";

impl SynthCorpus {
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(QUERIES_FILE), &self.queries)?;
        write_jsonl(&dir.join(DOCS_FILE), &self.docs)?;
        write_qrels(&dir.join(TRAIN_QRELS), &self.train)?;
        write_qrels(&dir.join(VALID_QRELS), &self.valid)?;
        write_qrels(&dir.join(TEST_QRELS), &self.test)?;
        write_planted(&dir.join(PLANTED_FILE), &self.planted)?;
        Ok(())
    }
}

fn word(i: usize) -> String {
    format!("w{i:05}")
}

struct QueryGen<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    terms: Vec<usize>,
    term_set: HashSet<usize>,
}

impl QueryGen<'_> {
    fn filler(&mut self) -> usize {
        loop {
            let w = self.rng.gen_range(0..self.cfg.pool_size);
            if !self.term_set.contains(&w) {
                return w;
            }
        }
    }

    /// A sentence of filler with `n` distinct query terms at random positions.
    fn sentence_with_terms(&mut self, n: usize) -> Vec<usize> {
        let len = self.cfg.sentence_len;
        let mut words: Vec<usize> = (0..len).map(|_| self.filler()).collect();
        let which = index::sample(&mut self.rng, self.terms.len(), n).into_vec();
        let slots = index::sample(&mut self.rng, len, n).into_vec();
        for (t, s) in which.into_iter().zip(slots) {
            words[s] = self.terms[t];
        }
        words
    }
}

fn render(words: &[usize]) -> String {
    words.iter().map(|&w| word(w)).collect::<Vec<_>>().join(" ")
}

/// Generates a corpus; identical configs and seeds give identical output.
pub fn synth_corpus(cfg: &SynthConfig, seed: u64) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut out = SynthCorpus {
        queries: Vec::new(),
        docs: Vec::new(),
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
        planted: Vec::new(),
    };
    for qi in 0..cfg.total_queries() {
        let mut rng = substream(seed, qi as u64);
        let qlen = rng.gen_range(cfg.query_len_min..=cfg.query_len_max);
        let terms = index::sample(&mut rng, cfg.pool_size, qlen).into_vec();
        let term_set = terms.iter().copied().collect();
        let mut g = QueryGen {
            cfg,
            rng,
            terms,
            term_set,
        };
        let query_id = format!("q{qi:05}");
        out.queries.push(QueryRecord {
            query_id: query_id.clone(),
            text: render(&g.terms),
        });

        let mut grades: Vec<u8> = (0..cfg.docs_per_query)
            .map(|_| {
                if g.rng.gen_bool(cfg.planting_rate) {
                    g.rng.gen_range(1..=MAX_GRADE)
                } else {
                    0
                }
            })
            .collect();
        if grades.iter().all(|&x| x == 0) {
            grades[0] = g.rng.gen_range(1..=MAX_GRADE);
        }

        let threshold = planting_threshold(qlen);
        let judgments = match qi {
            i if i < cfg.train_queries => &mut out.train,
            i if i < cfg.train_queries + cfg.valid_queries => &mut out.valid,
            _ => &mut out.test,
        };
        for (di, &grade) in grades.iter().enumerate() {
            let doc_id = format!("{query_id}-d{di:02}");
            let mut planted = index::sample(&mut g.rng, cfg.sentences_per_doc, grade as usize).into_vec();
            planted.sort_unstable();
            let mut sentences = Vec::with_capacity(cfg.sentences_per_doc);
            for si in 0..cfg.sentences_per_doc {
                let words = if planted.binary_search(&si).is_ok() {
                    let n = if cfg.exact_match { qlen } else { g.rng.gen_range(threshold..=qlen) };
                    g.sentence_with_terms(n)
                } else if grade > 0 && threshold >= 2 && g.rng.gen_bool(cfg.distractor_rate) {
                    g.sentence_with_terms(1)
                } else {
                    g.sentence_with_terms(0)
                };
                sentences.push(render(&words));
            }
            let title: Vec<usize> = (0..cfg.title_len).map(|_| g.filler()).collect();
            out.docs.push(DocRecord {
                doc_id: doc_id.clone(),
                title: render(&title),
                body: format!("{}.", sentences.join(". ")),
            });
            judgments.push(GradedJudgment {
                query_id: query_id.clone(),
                doc_id: doc_id.clone(),
                grade,
            });
            out.planted.push(PlantedRecord {
                query_id: query_id.clone(),
                doc_id,
                indices: planted,
            });
        }
    }
    Ok(out)
}
