//! Text ingestion: tokenization, vocabulary, sentence segmentation, record
//! files, training pairs and synthetic corpora.

pub mod dataset;
pub mod document;
pub mod records;
pub mod synth;
pub mod tokenize;
pub mod triples;
pub mod vocab;

pub use dataset::{Dataset, RawCollection, Split};
pub use document::{
    encode_document, encode_query, segment_sentences, split_sentences, Caps, EncodedDocument,
    GradedJudgment, Query, MAX_GRADE,
};
pub use records::{DocRecord, PlantedRecord, QueryRecord};
pub use synth::{synth_corpus, SynthConfig, SynthCorpus};
pub use tokenize::{tokenize, Tokenizer, WhitespaceTokenizer};
pub use triples::{make_triples, PairPlan, Triple, DEFAULT_PAIR_BUDGET};
pub use vocab::{build_vocab, TokenId, VocabBuilder, Vocabulary, PAD, UNK};
