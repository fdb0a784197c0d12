use serde::{Deserialize, Serialize};

use super::tokenize::Tokenizer;
use super::vocab::{TokenId, Vocabulary};
use crate::error::{Error, Result};

/// Length limits applied while encoding text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub query_len: usize,
    pub sentence_len: usize,
    pub sentences: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            query_len: 16,
            sentence_len: 64,
            sentences: 64,
        }
    }
}

impl Caps {
    pub fn validate(&self) -> Result<()> {
        if self.query_len == 0 || self.sentence_len == 0 || self.sentences == 0 {
            return Err(Error::InvalidConfig(format!("caps must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub tokens: Vec<TokenId>,
}

/// A document split into a title and body sentences, all as token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedDocument {
    pub doc_id: String,
    pub title: Vec<TokenId>,
    pub sentences: Vec<Vec<TokenId>>,
    /// Non-empty sentence count before the sentence cap was applied.
    pub raw_sentence_count: usize,
}

impl EncodedDocument {
    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    /// Title followed by every body sentence, concatenated.
    pub fn all_tokens(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.title
            .iter()
            .chain(self.sentences.iter().flatten())
            .copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedJudgment {
    pub query_id: String,
    pub doc_id: String,
    pub grade: u8,
}

pub const MAX_GRADE: u8 = 4;

pub(crate) fn is_sentence_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '。' | '！' | '？')
}

/// Splits a body on sentence-terminal punctuation, trimming and dropping
/// empty segments. No cap is applied.
pub fn split_sentences(body: &str) -> impl Iterator<Item = &str> {
    body.split(is_sentence_terminal)
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

/// [`split_sentences`] truncated to the first `cap` sentences.
pub fn segment_sentences(body: &str, cap: usize) -> Vec<&str> {
    split_sentences(body).take(cap).collect()
}

pub fn encode_query<T: Tokenizer + ?Sized>(
    query_id: &str,
    text: &str,
    vocab: &Vocabulary,
    tokenizer: &T,
    caps: &Caps,
) -> Result<Query> {
    let mut tokens = vocab.encode(&tokenizer.tokenize(text));
    tokens.truncate(caps.query_len);
    if tokens.is_empty() {
        return Err(Error::Data(format!("query `{query_id}` is empty after tokenization")));
    }
    Ok(Query {
        query_id: query_id.to_owned(),
        tokens,
    })
}

pub fn encode_document<T: Tokenizer + ?Sized>(
    doc_id: &str,
    title: &str,
    body: &str,
    vocab: &Vocabulary,
    tokenizer: &T,
    caps: &Caps,
) -> EncodedDocument {
    let encode = |text: &str| {
        let mut ids = vocab.encode(&tokenizer.tokenize(text));
        ids.truncate(caps.sentence_len);
        ids
    };
    let mut sentences: Vec<Vec<TokenId>> = split_sentences(body)
        .map(encode)
        .filter(|s| !s.is_empty())
        .collect();
    let raw_sentence_count = sentences.len();
    sentences.truncate(caps.sentences);
    EncodedDocument {
        doc_id: doc_id.to_owned(),
        title: encode(title),
        sentences,
        raw_sentence_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize::WhitespaceTokenizer;
    use crate::corpus::vocab::{build_vocab, UNK};

    #[test]
    fn segments_on_terminals() {
        assert_eq!(segment_sentences("A. B! C?", 64), vec!["A", "B", "C"]);
        assert_eq!(segment_sentences("一。二！三？", 64), vec!["一", "二", "三"]);
    }

    #[test]
    fn no_terminal_is_one_sentence() {
        assert_eq!(segment_sentences("just some words", 64), vec!["just some words"]);
    }

    #[test]
    fn cap_keeps_prefix() {
        let body: String = (0..100).map(|i| format!("s{i}. ")).collect();
        let s = segment_sentences(&body, 64);
        assert_eq!(s.len(), 64);
        assert_eq!(s[0], "s0");
        assert_eq!(s[63], "s63");
    }

    #[test]
    fn encoding_drops_empty_sentences_and_caps() {
        let vocab = build_vocab([["hello", "world"]], 10).unwrap();
        let caps = Caps {
            query_len: 2,
            sentence_len: 1,
            sentences: 2,
        };
        let d = encode_document(
            "d",
            "hello there",
            "hello world. ... ! world. other. more",
            &vocab,
            &WhitespaceTokenizer,
            &caps,
        );
        assert_eq!(d.raw_sentence_count, 4);
        assert_eq!(d.sentences.len(), 2);
        assert!(d.sentences.iter().all(|s| s.len() == 1));
        assert_eq!(d.title, vec![vocab.id("hello")]);
        assert_eq!(d.sentences[1], vec![vocab.id("world")]);

        let unk = encode_document("d", "", "zzz", &vocab, &WhitespaceTokenizer, &caps);
        assert_eq!(unk.sentences, vec![vec![UNK]]);
        assert!(d.all_tokens().all(|id| (id as usize) < vocab.len()));
    }

    #[test]
    fn empty_query_is_an_error() {
        let vocab = build_vocab([["a"]], 10).unwrap();
        let caps = Caps::default();
        assert!(encode_query("q", " ,, ", &vocab, &WhitespaceTokenizer, &caps).is_err());
        let q = encode_query("q", "A a b", &vocab, &WhitespaceTokenizer, &caps).unwrap();
        assert_eq!(q.tokens, vec![2, 2, UNK]);
    }
}
