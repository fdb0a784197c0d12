//! The full ranking model: a shared embedding table, the sentence selector
//! and a fine-grained matcher.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{select_firstk, select_random};
use crate::corpus::{EncodedDocument, Query, Vocabulary};
use crate::error::{Error, Result};
use crate::matcher::{aggregate, Matcher, MatcherConfig};
use crate::numeric::{init, Checkpoint, DenseArray, ParamId, ParamSet};
use crate::rng::{stream_for_key, substream};
use crate::scalar::Scalar;
use crate::selector::{
    sample_k, select_topk, PolicyForward, ProjectedVocab, SamplingScheme, SelectedSentences, SelectorParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    /// When false the selector owns a separate embedding table.
    pub shared_embeddings: bool,
    pub matcher: MatcherConfig,
}

impl ModelConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 128,
            hidden: 128,
            shared_embeddings: true,
            matcher: MatcherConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 || self.embed_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig(format!(
                "model needs vocab_size >= 2 and positive dims, got vocab {} embed {} hidden {}",
                self.vocab_size, self.embed_dim, self.hidden
            )));
        }
        self.matcher.validate()
    }
}

/// How body sentences are chosen before matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Highest-probability K sentences.
    TopK,
    /// K sentences drawn from the policy.
    Sampled,
    /// Every body sentence.
    FullDoc,
    /// The first K sentences.
    FirstK,
    /// K uniformly random sentences.
    Random,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TopK => "topk",
            Self::Sampled => "sampled",
            Self::FullDoc => "fulldoc",
            Self::FirstK => "firstk",
            Self::Random => "random",
        }
    }

    pub fn uses_policy(self) -> bool {
        matches!(self, Self::TopK | Self::Sampled)
    }
}

impl std::str::FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "topk" => Self::TopK,
            "sampled" => Self::Sampled,
            "fulldoc" => Self::FullDoc,
            "firstk" => Self::FirstK,
            "random" => Self::Random,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown selection mode `{s}` (expected topk, sampled, fulldoc, firstk or random)"
                )))
            }
        })
    }
}

/// A selection plus, for policy modes, the forward pass that produced it.
#[derive(Debug, Clone)]
pub struct Selection<S> {
    pub selected: SelectedSentences<S>,
    pub forward: Option<PolicyForward<S>>,
}

/// Frozen-parameter scoring; top-K selection runs through the projected
/// vocabulary, every other mode defers to the model.
#[derive(Debug, Clone)]
pub struct Inference<'a, S> {
    pub model: &'a Model<S>,
    pub projected: ProjectedVocab<S>,
}

impl<S: Scalar> Inference<'_, S> {
    pub fn score_document<R: Rng + ?Sized>(
        &self,
        query: &Query,
        doc: &EncodedDocument,
        mode: SelectionMode,
        k: usize,
        rng: &mut R,
    ) -> Result<ScoredDocument<S>> {
        if mode != SelectionMode::TopK || doc.sentence_count() == 0 {
            return self.model.score_document(query, doc, mode, k, rng);
        }
        let m = self.model;
        let policy = m.selector.policy_projected(&m.params, &self.projected, query, doc)?;
        let indices = select_topk(&policy, k).indices;
        Ok(ScoredDocument { score: m.score_units(query, doc, &indices)?, indices })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDocument<S> {
    pub score: S,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Model<S> {
    pub config: ModelConfig,
    pub params: ParamSet<S>,
    pub embedding: ParamId,
    pub selector: SelectorParams,
    pub matcher: Matcher,
}

impl<S: Scalar> Model<S> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = substream(seed, stream_for_key("model-init"));
        let mut params = ParamSet::new();
        let shape = [config.vocab_size, config.embed_dim];
        let embedding = params.add("embedding", init::uniform(&shape, init::INIT_SCALE, &mut rng))?;
        let selector_embedding = if config.shared_embeddings {
            embedding
        } else {
            params.add("selector.embedding", init::uniform(&shape, init::INIT_SCALE, &mut rng))?
        };
        let selector = SelectorParams::register(&mut params, selector_embedding, config.hidden, &mut rng)?;
        let matcher = Matcher::register(&mut params, &config.matcher, &mut rng)?;
        Ok(Self { config, params, embedding, selector, matcher })
    }

    /// Gives the selector its own copy of the shared embedding table, so
    /// later matcher updates leave the selector's inputs untouched.
    pub fn fork_selector_embeddings(&mut self) -> Result<()> {
        if !self.config.shared_embeddings {
            return Ok(());
        }
        let copy: DenseArray<S> = self.params.value(self.embedding).clone();
        self.selector.embedding = self.params.add("selector.embedding", copy)?;
        self.config.shared_embeddings = false;
        Ok(())
    }

    /// Selector tensors, including its embedding table.
    pub fn selector_ids(&self) -> Vec<ParamId> {
        self.selector.ids()
    }

    /// Matcher tensors plus the matcher's embedding table.
    pub fn matcher_ids(&self) -> Vec<ParamId> {
        let mut ids = self.matcher.ids();
        ids.push(self.embedding);
        ids
    }

    pub fn all_ids(&self) -> Vec<ParamId> {
        self.params.ids().collect()
    }

    pub fn select<R: Rng + ?Sized>(
        &self,
        query: &Query,
        doc: &EncodedDocument,
        mode: SelectionMode,
        k: usize,
        scheme: SamplingScheme,
        rng: &mut R,
    ) -> Result<Selection<S>> {
        let t = doc.sentence_count();
        let empty = || SelectedSentences { indices: Vec::new(), log_prob_sum: S::zero(), includes_title: true };
        if t == 0 {
            return Ok(Selection { selected: empty(), forward: None });
        }
        Ok(match mode {
            SelectionMode::TopK | SelectionMode::Sampled => {
                let fwd = self.selector.forward(&self.params, query, doc)?;
                let selected = if mode == SelectionMode::TopK {
                    select_topk(&fwd.policy, k)
                } else {
                    sample_k(&fwd.policy, k, rng, scheme)
                };
                Selection { selected, forward: Some(fwd) }
            }
            SelectionMode::FullDoc => Selection {
                selected: SelectedSentences { indices: (0..t).collect(), ..empty() },
                forward: None,
            },
            SelectionMode::FirstK => Selection { selected: select_firstk(t, k), forward: None },
            SelectionMode::Random => Selection { selected: select_random(t, k, rng), forward: None },
        })
    }

    /// `Λ` over the title and the given body sentences, summed in document
    /// order so equal sets give bit-identical scores.
    pub fn score_units(&self, query: &Query, doc: &EncodedDocument, indices: &[usize]) -> Result<S> {
        let emb = self.params.value(self.embedding);
        let mut order = indices.to_vec();
        order.sort_unstable();
        let mut scores = Vec::with_capacity(order.len() + 1);
        scores.push(self.matcher.psi(&self.params, emb, &query.tokens, &doc.title)?);
        for &i in &order {
            scores.push(self.matcher.psi(&self.params, emb, &query.tokens, &doc.sentences[i])?);
        }
        let s = aggregate(&scores)?;
        if !s.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite score for query `{}` document `{}`",
                query.query_id, doc.doc_id
            )));
        }
        Ok(s)
    }

    pub fn score_document<R: Rng + ?Sized>(
        &self,
        query: &Query,
        doc: &EncodedDocument,
        mode: SelectionMode,
        k: usize,
        rng: &mut R,
    ) -> Result<ScoredDocument<S>> {
        let sel = self.select(query, doc, mode, k, SamplingScheme::default(), rng)?;
        let score = self.score_units(query, doc, &sel.selected.indices)?;
        Ok(ScoredDocument { score, indices: sel.selected.indices })
    }

    /// Inference view with the selector projection precomputed.
    pub fn inference(&self) -> Result<Inference<'_, S>> {
        Ok(Inference { model: self, projected: self.selector.project_vocab(&self.params)? })
    }

    /// Accumulates `g · ∇Λ` over the title and `indices` into matcher
    /// gradients (and the matcher's embedding table when requested).
    pub fn matcher_backward(
        &mut self,
        query: &Query,
        doc: &EncodedDocument,
        indices: &[usize],
        g: S,
        update_embeddings: bool,
    ) -> Result<()> {
        let mut view = self.params.grad_view();
        let q = &query.tokens;
        self.matcher.psi_backward(&mut view, self.embedding, update_embeddings, q, &doc.title, g)?;
        for &i in indices {
            self.matcher
                .psi_backward(&mut view, self.embedding, update_embeddings, q, &doc.sentences[i], g)?;
        }
        Ok(())
    }

    /// Accumulates `reward · ∇ Σ log π` for a previously computed selection.
    pub fn selector_backward(
        &mut self,
        forward: &PolicyForward<S>,
        query: &Query,
        doc: &EncodedDocument,
        selected: &SelectedSentences<S>,
        reward: S,
        update_embeddings: bool,
    ) {
        let mut view = self.params.grad_view();
        self.selector
            .policy_grad(&mut view, forward, query, doc, selected, reward, update_embeddings);
    }

    /// Accumulates `Σ_t d_scores[t] · ∇c_t` through the selector.
    pub fn selector_backward_scores(
        &mut self,
        forward: &PolicyForward<S>,
        query: &Query,
        doc: &EncodedDocument,
        d_scores: &[S],
        update_embeddings: bool,
    ) {
        let mut view = self.params.grad_view();
        self.selector
            .backward_from_scores(&mut view, forward, query, doc, d_scores, update_embeddings);
    }

    pub fn to_checkpoint(&self, vocab_hash: &str, config_hash: &str, seed: u64) -> Result<Checkpoint> {
        let model = serde_json::to_value(&self.config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Checkpoint::capture(&self.params, model, vocab_hash, config_hash, seed)
    }

    /// Rebuilds the architecture recorded in the checkpoint and restores its values.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: ModelConfig =
            serde_json::from_value(ck.model.clone()).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut model = Self::new(config, ck.seed)?;
        ck.restore_into(&mut model.params)?;
        Ok(model)
    }

    pub fn from_checkpoint_for(ck: &Checkpoint, vocab: &Vocabulary) -> Result<Self> {
        ck.check_vocab(&vocab.hash())?;
        Self::from_checkpoint(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::MatcherKind;

    fn tiny(kind: MatcherKind) -> ModelConfig {
        let mut c = ModelConfig::new(20);
        c.embed_dim = 6;
        c.hidden = 5;
        c.matcher.kind = kind;
        c.matcher.pyramid.maps = 3;
        c.matcher.pyramid.hidden = 4;
        c.matcher.pyramid.rows = 4;
        c.matcher.pyramid.cols = 8;
        c.matcher.pyramid.pool_rows = 2;
        c.matcher.pyramid.pool_cols = 3;
        c
    }

    fn doc() -> EncodedDocument {
        EncodedDocument {
            doc_id: "d".into(),
            title: vec![2, 3],
            sentences: vec![vec![4, 5, 6], vec![2, 7], vec![8, 9, 10, 11]],
            raw_sentence_count: 3,
        }
    }

    fn query() -> Query {
        Query { query_id: "q".into(), tokens: vec![2, 5] }
    }

    #[test]
    fn k_at_least_t_matches_fulldoc() {
        for kind in [MatcherKind::Knrm, MatcherKind::MatchPyramid] {
            let m = Model::<f64>::new(tiny(kind), 1).unwrap();
            let mut rng = substream(0, 0);
            let topk = m.score_document(&query(), &doc(), SelectionMode::TopK, 5, &mut rng).unwrap();
            let full = m.score_document(&query(), &doc(), SelectionMode::FullDoc, 5, &mut rng).unwrap();
            assert_eq!(topk.score, full.score);
        }
    }

    #[test]
    fn topk_equals_sum_of_individual_psi() {
        let m = Model::<f64>::new(tiny(MatcherKind::Knrm), 2).unwrap();
        let mut rng = substream(0, 0);
        let scored = m.score_document(&query(), &doc(), SelectionMode::TopK, 2, &mut rng).unwrap();
        let emb = m.params.value(m.embedding);
        let d = doc();
        let mut expected = m.matcher.psi(&m.params, emb, &query().tokens, &d.title).unwrap();
        for &i in &scored.indices {
            expected += m.matcher.psi(&m.params, emb, &query().tokens, &d.sentences[i]).unwrap();
        }
        assert_eq!(scored.score, expected);
    }

    #[test]
    fn single_sentence_modes_agree() {
        let m = Model::<f64>::new(tiny(MatcherKind::Knrm), 3).unwrap();
        let mut d = doc();
        d.sentences.truncate(1);
        let mut rng = substream(0, 0);
        let scores: Vec<f64> = [
            SelectionMode::TopK,
            SelectionMode::Sampled,
            SelectionMode::FullDoc,
            SelectionMode::FirstK,
            SelectionMode::Random,
        ]
        .iter()
        .map(|&mode| m.score_document(&query(), &d, mode, 2, &mut rng).unwrap().score)
        .collect();
        assert!(scores.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn empty_body_scores_title_only() {
        let m = Model::<f64>::new(tiny(MatcherKind::Knrm), 4).unwrap();
        let mut d = doc();
        d.sentences.clear();
        let mut rng = substream(0, 0);
        let s = m.score_document(&query(), &d, SelectionMode::TopK, 3, &mut rng).unwrap();
        let emb = m.params.value(m.embedding);
        assert_eq!(s.score, m.matcher.psi(&m.params, emb, &query().tokens, &d.title).unwrap());
        assert!(s.indices.is_empty());
    }

    #[test]
    fn checkpoint_round_trip_restores_scores() {
        let mut m = Model::<f64>::new(tiny(MatcherKind::MatchPyramid), 5).unwrap();
        m.fork_selector_embeddings().unwrap();
        let ck = m.to_checkpoint("v", "c", 5).unwrap();
        let back = Model::<f64>::from_checkpoint(&ck).unwrap();
        assert_eq!(back.config, m.config);
        for (name, t) in m.params.iter() {
            let id = back.params.find(name).unwrap();
            assert_eq!(back.params.value(id), &t.value, "{name}");
        }
    }

    #[test]
    fn fork_separates_tables() {
        let mut m = Model::<f64>::new(tiny(MatcherKind::Knrm), 6).unwrap();
        assert_eq!(m.selector.embedding, m.embedding);
        m.fork_selector_embeddings().unwrap();
        assert_ne!(m.selector.embedding, m.embedding);
        assert_eq!(m.params.value(m.selector.embedding), m.params.value(m.embedding));
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in ["topk", "sampled", "fulldoc", "firstk", "random"] {
            assert_eq!(mode.parse::<SelectionMode>().unwrap().as_str(), mode);
        }
        assert!("all".parse::<SelectionMode>().is_err());
    }
}
