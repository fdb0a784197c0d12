//! A loaded collection: encoded queries and documents, graded splits and
//! (for synthetic data) the planted sentence positions.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::document::{encode_document, encode_query, Caps, EncodedDocument, GradedJudgment, Query};
use super::records::{read_jsonl, read_planted, read_qrels, DocRecord, PlantedRecord, QueryRecord};
use super::synth::{SynthCorpus, DOCS_FILE, PLANTED_FILE, QUERIES_FILE, TEST_QRELS, TRAIN_QRELS, VALID_QRELS};
use super::tokenize::{Tokenizer, WhitespaceTokenizer};
use super::triples::{make_triples, PairPlan, Triple};
use super::vocab::{VocabBuilder, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Valid => "valid",
            Self::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "valid" => Ok(Self::Valid),
            "test" => Ok(Self::Test),
            _ => Err(Error::InvalidConfig(format!("unknown split `{s}` (expected train, valid or test)"))),
        }
    }
}

/// Raw records of a collection before encoding.
#[derive(Debug, Clone, Default)]
pub struct RawCollection {
    pub queries: Vec<QueryRecord>,
    pub docs: Vec<DocRecord>,
    pub train: Vec<GradedJudgment>,
    pub valid: Vec<GradedJudgment>,
    pub test: Vec<GradedJudgment>,
    pub planted: Option<Vec<PlantedRecord>>,
}

impl RawCollection {
    /// Reads the standard file layout of a data directory. Missing split or
    /// planted files are treated as empty or absent.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let optional_qrels = |name: &str| -> Result<Vec<GradedJudgment>> {
            let p = dir.join(name);
            if p.exists() {
                read_qrels(&p)
            } else {
                Ok(Vec::new())
            }
        };
        let planted_path = dir.join(PLANTED_FILE);
        Ok(Self {
            queries: read_jsonl(&dir.join(QUERIES_FILE))?,
            docs: read_jsonl(&dir.join(DOCS_FILE))?,
            train: optional_qrels(TRAIN_QRELS)?,
            valid: optional_qrels(VALID_QRELS)?,
            test: optional_qrels(TEST_QRELS)?,
            planted: if planted_path.exists() { Some(read_planted(&planted_path)?) } else { None },
        })
    }

    pub fn from_synth(c: &SynthCorpus) -> Self {
        Self {
            queries: c.queries.clone(),
            docs: c.docs.clone(),
            train: c.train.clone(),
            valid: c.valid.clone(),
            test: c.test.clone(),
            planted: Some(c.planted.clone()),
        }
    }

    /// Vocabulary over the training split: its queries and the titles and
    /// bodies of its judged documents.
    pub fn train_vocab<T: Tokenizer + ?Sized>(&self, tokenizer: &T, max_size: usize) -> Result<Vocabulary> {
        let queries: BTreeSet<&str> = self.train.iter().map(|j| j.query_id.as_str()).collect();
        let docs: BTreeSet<&str> = self.train.iter().map(|j| j.doc_id.as_str()).collect();
        let mut b = VocabBuilder::new();
        for q in self.queries.iter().filter(|q| queries.contains(q.query_id.as_str())) {
            b.add_tokens(tokenizer.tokenize(&q.text));
        }
        for d in self.docs.iter().filter(|d| docs.contains(d.doc_id.as_str())) {
            b.add_tokens(tokenizer.tokenize(&d.title));
            b.add_tokens(tokenizer.tokenize(&d.body));
        }
        b.finish(max_size)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub caps: Caps,
    pub queries: Vec<Query>,
    pub docs: Vec<EncodedDocument>,
    pub train: Vec<GradedJudgment>,
    pub valid: Vec<GradedJudgment>,
    pub test: Vec<GradedJudgment>,
    planted: Option<HashMap<(String, String), Vec<usize>>>,
    query_index: HashMap<String, usize>,
    doc_index: HashMap<String, usize>,
}

impl Dataset {
    pub fn encode(raw: &RawCollection, vocab: Vocabulary, caps: Caps) -> Result<Self> {
        Self::encode_with(raw, vocab, caps, &WhitespaceTokenizer)
    }

    pub fn encode_with<T: Tokenizer + ?Sized>(
        raw: &RawCollection,
        vocab: Vocabulary,
        caps: Caps,
        tokenizer: &T,
    ) -> Result<Self> {
        caps.validate()?;
        let mut queries = Vec::with_capacity(raw.queries.len());
        let mut query_index = HashMap::new();
        for q in &raw.queries {
            if query_index.insert(q.query_id.clone(), queries.len()).is_some() {
                return Err(Error::Data(format!("duplicate query id `{}`", q.query_id)));
            }
            queries.push(encode_query(&q.query_id, &q.text, &vocab, tokenizer, &caps)?);
        }
        let mut docs = Vec::with_capacity(raw.docs.len());
        let mut doc_index = HashMap::new();
        for d in &raw.docs {
            if doc_index.insert(d.doc_id.clone(), docs.len()).is_some() {
                return Err(Error::Data(format!("duplicate document id `{}`", d.doc_id)));
            }
            docs.push(encode_document(&d.doc_id, &d.title, &d.body, &vocab, tokenizer, &caps));
        }
        for (name, split) in [("train", &raw.train), ("valid", &raw.valid), ("test", &raw.test)] {
            for j in split {
                if !query_index.contains_key(&j.query_id) {
                    return Err(Error::Data(format!("{name} judgment names unknown query `{}`", j.query_id)));
                }
                if !doc_index.contains_key(&j.doc_id) {
                    return Err(Error::Data(format!("{name} judgment names unknown document `{}`", j.doc_id)));
                }
            }
        }
        let planted = raw.planted.as_ref().map(|records| {
            records
                .iter()
                .map(|r| {
                    let limit = doc_index.get(&r.doc_id).map_or(0, |&i| docs[i].sentence_count());
                    let idx = r.indices.iter().copied().filter(|&i| i < limit).collect();
                    ((r.query_id.clone(), r.doc_id.clone()), idx)
                })
                .collect()
        });
        Ok(Self {
            vocab,
            caps,
            queries,
            docs,
            train: raw.train.clone(),
            valid: raw.valid.clone(),
            test: raw.test.clone(),
            planted,
            query_index,
            doc_index,
        })
    }

    /// Reads a data directory, building the vocabulary from its training
    /// split unless one is supplied.
    pub fn load_dir(dir: &Path, vocab: Option<Vocabulary>, vocab_size: usize, caps: Caps) -> Result<Self> {
        let raw = RawCollection::read_dir(dir)?;
        let vocab = match vocab {
            Some(v) => v,
            None => raw.train_vocab(&WhitespaceTokenizer, vocab_size)?,
        };
        Self::encode(&raw, vocab, caps)
    }

    pub fn from_synth(corpus: &SynthCorpus, vocab_size: usize, caps: Caps) -> Result<Self> {
        let raw = RawCollection::from_synth(corpus);
        let vocab = raw.train_vocab(&WhitespaceTokenizer, vocab_size)?;
        Self::encode(&raw, vocab, caps)
    }

    pub fn split(&self, split: Split) -> &[GradedJudgment] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.query_index.get(id).map(|&i| &self.queries[i])
    }

    pub fn doc(&self, id: &str) -> Option<&EncodedDocument> {
        self.doc_index.get(id).map(|&i| &self.docs[i])
    }

    pub fn has_planted(&self) -> bool {
        self.planted.is_some()
    }

    /// Planted body positions of a judged pair; `None` without ground truth.
    pub fn planted(&self, query_id: &str, doc_id: &str) -> Option<&[usize]> {
        self.planted
            .as_ref()?
            .get(&(query_id.to_owned(), doc_id.to_owned()))
            .map(Vec::as_slice)
    }

    pub fn pair_plans(&self, split: Split, budget: Option<usize>, seed: u64) -> Vec<PairPlan> {
        make_triples(self.split(split), budget, seed)
    }

    pub fn resolve<'a>(&'a self, plan: &PairPlan) -> Result<Triple<'a>> {
        let missing = |what: &str, id: &str| Error::Data(format!("pair refers to unknown {what} `{id}`"));
        Ok(Triple {
            query: self.query(&plan.query_id).ok_or_else(|| missing("query", &plan.query_id))?,
            positive: self.doc(&plan.positive_id).ok_or_else(|| missing("document", &plan.positive_id))?,
            negative: self.doc(&plan.negative_id).ok_or_else(|| missing("document", &plan.negative_id))?,
            grade_gap: plan.grade_gap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{synth_corpus, SynthConfig};

    fn small() -> SynthConfig {
        SynthConfig {
            pool_size: 300,
            train_queries: 20,
            valid_queries: 5,
            test_queries: 5,
            ..Default::default()
        }
    }

    #[test]
    fn synthetic_collection_encodes_with_ground_truth() {
        let c = synth_corpus(&small(), 7).unwrap();
        let ds = Dataset::from_synth(&c, 10_000, Caps::default()).unwrap();
        assert_eq!(ds.queries.len(), 30);
        assert_eq!(ds.docs.len(), 300);
        for j in ds.split(Split::Train) {
            let planted = ds.planted(&j.query_id, &j.doc_id).unwrap();
            assert_eq!(planted.len(), j.grade as usize);
            assert_eq!(ds.doc(&j.doc_id).unwrap().sentence_count(), 16);
        }
        let plans = ds.pair_plans(Split::Train, Some(10), 1);
        assert!(!plans.is_empty());
        let t = ds.resolve(&plans[0]).unwrap();
        assert_eq!(t.query.query_id, plans[0].query_id);
    }

    #[test]
    fn unknown_ids_in_judgments_are_data_errors() {
        let c = synth_corpus(&small(), 7).unwrap();
        let mut raw = RawCollection::from_synth(&c);
        raw.test.push(GradedJudgment { query_id: "nope".into(), doc_id: raw.docs[0].doc_id.clone(), grade: 1 });
        let vocab = raw.train_vocab(&WhitespaceTokenizer, 1000).unwrap();
        assert!(matches!(Dataset::encode(&raw, vocab, Caps::default()), Err(Error::Data(_))));
    }

    #[test]
    fn directory_round_trip() {
        let c = synth_corpus(&small(), 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        c.write_to_dir(dir.path()).unwrap();
        let a = Dataset::load_dir(dir.path(), None, 10_000, Caps::default()).unwrap();
        let b = Dataset::from_synth(&c, 10_000, Caps::default()).unwrap();
        assert_eq!(a.vocab.hash(), b.vocab.hash());
        assert_eq!(a.docs, b.docs);
        assert_eq!(a.planted("q00000", "q00000-d00"), b.planted("q00000", "q00000-d00"));
    }
}
