//! Finite-difference checks of the analytic gradients of every trainable
//! component on tiny randomized instances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedDocument, Query, TokenId};
use crate::error::Result;
use crate::matcher::MatcherKind;
use crate::model::{Model, ModelConfig};
use crate::numeric::{grad_check, init, GradCheckReport};
use crate::rng::{stream_for_key, substream};
use crate::selector::{sample_k, SamplingScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradComponent {
    Selector,
    Knrm,
    MatchPyramid,
}

impl GradComponent {
    pub const ALL: [GradComponent; 3] = [Self::Selector, Self::Knrm, Self::MatchPyramid];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Selector => "selector",
            Self::Knrm => "knrm",
            Self::MatchPyramid => "matchpyramid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckSetup {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub maps: usize,
    pub query_len: usize,
    pub sentence_len: usize,
    pub sentences: usize,
    /// Coordinates probed per tensor.
    pub probes: usize,
}

impl Default for GradCheckSetup {
    fn default() -> Self {
        Self {
            vocab_size: 12,
            embed_dim: 8,
            hidden: 8,
            maps: 8,
            query_len: 3,
            sentence_len: 6,
            sentences: 4,
            probes: 32,
        }
    }
}

fn random_ids<R: Rng>(n: usize, vocab: usize, rng: &mut R) -> Vec<TokenId> {
    (0..n).map(|_| rng.gen_range(2..vocab) as TokenId).collect()
}

fn instance(setup: &GradCheckSetup, seed: u64) -> (Query, EncodedDocument) {
    let mut rng = substream(seed, stream_for_key("gradcheck-data"));
    let query = Query { query_id: "q".into(), tokens: random_ids(setup.query_len, setup.vocab_size, &mut rng) };
    let sentences = (0..setup.sentences)
        .map(|_| {
            let len = rng.gen_range(1..=setup.sentence_len);
            random_ids(len, setup.vocab_size, &mut rng)
        })
        .collect();
    let doc = EncodedDocument {
        doc_id: "d".into(),
        title: random_ids(2, setup.vocab_size, &mut rng),
        sentences,
        raw_sentence_count: setup.sentences,
    };
    (query, doc)
}

/// A model whose every tensor, biases included, is drawn from
/// uniform(−0.5, 0.5), so no unit sits exactly on a ReLU kink.
pub fn gradcheck_model(setup: &GradCheckSetup, kind: MatcherKind, seed: u64) -> Result<Model<f64>> {
    let mut config = ModelConfig::new(setup.vocab_size);
    config.embed_dim = setup.embed_dim;
    config.hidden = setup.hidden;
    config.matcher.kind = kind;
    let mp = &mut config.matcher.pyramid;
    mp.maps = setup.maps;
    mp.hidden = setup.hidden;
    mp.rows = setup.query_len.max(mp.window_rows) + 1;
    mp.cols = setup.sentence_len.max(mp.window_cols) + 2;
    mp.pool_rows = 2;
    mp.pool_cols = 3;
    let mut model = Model::new(config, seed)?;
    let mut rng = substream(seed, stream_for_key("gradcheck-init"));
    let ids: Vec<_> = model.params.ids().collect();
    for id in ids {
        let shape = model.params.value(id).shape().to_vec();
        *model.params.value_mut(id) = init::uniform(&shape, 0.5, &mut rng);
    }
    Ok(model)
}

pub fn check_component(setup: &GradCheckSetup, component: GradComponent, seed: u64) -> Result<GradCheckReport> {
    let kind = match component {
        GradComponent::MatchPyramid => MatcherKind::MatchPyramid,
        _ => MatcherKind::Knrm,
    };
    let mut model = gradcheck_model(setup, kind, seed)?;
    let (query, doc) = instance(setup, seed);
    let probes = setup.probes;
    let report = match component {
        GradComponent::Selector => {
            let selector = model.selector;
            let policy = selector.policy(&model.params, &query, &doc)?;
            let mut rng = substream(seed, stream_for_key("gradcheck-sample"));
            let k = 2.min(doc.sentence_count());
            let selected = sample_k(&policy, k, &mut rng, SamplingScheme::default());
            let reward = 0.7;
            let ids = selector.ids();
            grad_check(&mut model.params, &ids, probes, seed, |params, accumulate| {
                let fwd = selector.forward(params, &query, &doc).expect("policy forward");
                if accumulate {
                    let mut view = params.grad_view();
                    selector.policy_grad(&mut view, &fwd, &query, &doc, &selected, reward, true);
                }
                reward * fwd.policy.log_prob_sum(&selected.indices)
            })
        }
        GradComponent::Knrm | GradComponent::MatchPyramid => {
            let matcher = model.matcher.clone();
            let emb = model.embedding;
            let mut ids = matcher.ids();
            ids.push(emb);
            let units: Vec<Vec<TokenId>> =
                std::iter::once(doc.title.clone()).chain(doc.sentences.iter().cloned()).collect();
            grad_check(&mut model.params, &ids, probes, seed, |params, accumulate| {
                if accumulate {
                    let mut view = params.grad_view();
                    for u in &units {
                        matcher
                            .psi_backward(&mut view, emb, true, &query.tokens, u, 1.0)
                            .expect("matcher backward");
                    }
                }
                let table = params.value(emb);
                units
                    .iter()
                    .map(|u| matcher.psi(params, table, &query.tokens, u).expect("matcher forward"))
                    .sum()
            })
        }
    };
    Ok(report)
}
