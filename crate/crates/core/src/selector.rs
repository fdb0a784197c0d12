//! Coarse sentence selection: bag-of-words encodings projected through
//! `tanh` layers, cosine relevance per sentence and a softmax policy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedDocument, Query, TokenId, PAD};
use crate::error::{Error, Result};
use crate::numeric::ops::{affine, affine_tanh, cosine_backward_into, dot, norm, tanh_backward, COSINE_EPS};
use crate::numeric::{init, DenseArray, GradView, ParamId, ParamSet};
use crate::scalar::Scalar;

/// Arithmetic mean of the embedding rows of the non-PAD ids; the zero
/// vector when every id is PAD.
pub fn bow_encode<S: Scalar>(ids: &[TokenId], embeddings: &DenseArray<S>) -> Vec<S> {
    let dim = embeddings.row_len();
    let mut acc = vec![S::zero(); dim];
    let mut n = 0usize;
    for &id in ids.iter().filter(|&&id| id != PAD) {
        for (a, &e) in acc.iter_mut().zip(embeddings.row(id as usize)) {
            *a += e;
        }
        n += 1;
    }
    if n > 0 {
        let inv = S::one() / S::lit(n as f64);
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    acc
}

fn bow_backward<S: Scalar>(ids: &[TokenId], d_bow: &[S], dim: usize, d_emb: &mut [S]) {
    let n = ids.iter().filter(|&&id| id != PAD).count();
    if n == 0 {
        return;
    }
    let inv = S::one() / S::lit(n as f64);
    for &id in ids.iter().filter(|&&id| id != PAD) {
        let row = &mut d_emb[id as usize * dim..(id as usize + 1) * dim];
        for (r, &g) in row.iter_mut().zip(d_bow) {
            *r += g * inv;
        }
    }
}

/// Scores `c_t` and probabilities `π(u_t | q, d)` over body sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPolicy<S> {
    pub scores: Vec<S>,
    pub probs: Vec<S>,
}

impl<S: Scalar> SelectionPolicy<S> {
    pub fn from_scores(scores: Vec<S>) -> Result<Self> {
        let probs = crate::numeric::softmax(&scores)?;
        Ok(Self { scores, probs })
    }

    pub fn sentence_count(&self) -> usize {
        self.probs.len()
    }

    pub fn log_prob_sum(&self, indices: &[usize]) -> S {
        indices.iter().map(|&i| self.probs[i].ln()).sum()
    }
}

/// Body sentence positions chosen for fine-grained matching. The title is
/// always matched in addition when `includes_title` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedSentences<S> {
    pub indices: Vec<usize>,
    pub log_prob_sum: S,
    pub includes_title: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    /// Sequential draws with renormalization over the remaining sentences.
    #[default]
    WithoutReplacement,
    /// Independent draws from `π`; may repeat sentences.
    WithReplacement,
}

impl SamplingScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::WithoutReplacement => "without_replacement",
            Self::WithReplacement => "with_replacement",
        }
    }
}

impl std::str::FromStr for SamplingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "without_replacement" => Ok(Self::WithoutReplacement),
            "with_replacement" => Ok(Self::WithReplacement),
            _ => Err(Error::InvalidConfig(format!(
                "unknown sampling scheme `{s}` (expected without_replacement or with_replacement)"
            ))),
        }
    }
}

/// Deterministic top-K by probability; ties go to the lower index.
pub fn select_topk<S: Scalar>(policy: &SelectionPolicy<S>, k: usize) -> SelectedSentences<S> {
    let mut order: Vec<usize> = (0..policy.sentence_count()).collect();
    order.sort_by(|&a, &b| {
        policy.probs[b]
            .partial_cmp(&policy.probs[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    SelectedSentences {
        log_prob_sum: policy.log_prob_sum(&order),
        indices: order,
        includes_title: true,
    }
}

fn draw<R: Rng + ?Sized>(weights: &[f64], taken: &[bool], rng: &mut R) -> usize {
    let total: f64 = weights.iter().zip(taken).filter(|(_, &t)| !t).map(|(w, _)| w).sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, (&w, &t)) in weights.iter().zip(taken).enumerate() {
        if t {
            continue;
        }
        acc += w;
        last = Some(i);
        if u < acc {
            return i;
        }
    }
    last.expect("at least one sentence remains")
}

/// Draws K sentences from the policy. `log_prob_sum` always sums
/// `log π(u'_k)` of the original distribution. Without replacement, K ≥ T
/// yields a full random permutation.
pub fn sample_k<S: Scalar, R: Rng + ?Sized>(
    policy: &SelectionPolicy<S>,
    k: usize,
    rng: &mut R,
    scheme: SamplingScheme,
) -> SelectedSentences<S> {
    let t = policy.sentence_count();
    let weights: Vec<f64> = policy.probs.iter().map(|p| p.as_f64()).collect();
    let mut indices = Vec::with_capacity(k.min(t));
    match scheme {
        SamplingScheme::WithoutReplacement => {
            let mut taken = vec![false; t];
            for _ in 0..k.min(t) {
                let i = draw(&weights, &taken, rng);
                taken[i] = true;
                indices.push(i);
            }
        }
        SamplingScheme::WithReplacement => {
            let none = vec![false; t];
            for _ in 0..k {
                indices.push(draw(&weights, &none, rng));
            }
        }
    }
    SelectedSentences {
        log_prob_sum: policy.log_prob_sum(&indices),
        indices,
        includes_title: true,
    }
}

/// Parameter handles of the selection model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectorParams {
    pub w_q: ParamId,
    pub b_q: ParamId,
    pub w_u: ParamId,
    pub b_u: ParamId,
    pub embedding: ParamId,
}

/// Selector projection of every vocabulary row, `vocab × hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedVocab<S> {
    pub rows: DenseArray<S>,
}

/// Intermediate values of one policy evaluation, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct PolicyForward<S> {
    pub query_bow: Vec<S>,
    pub query_hidden: Vec<S>,
    pub sentence_bows: Vec<Vec<S>>,
    pub sentence_hidden: Vec<Vec<S>>,
    pub policy: SelectionPolicy<S>,
}

impl SelectorParams {
    pub fn register<S: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<S>,
        embedding: ParamId,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let embed = params.value(embedding).row_len();
        let scale = init::INIT_SCALE;
        Ok(Self {
            w_q: params.add("selector.w_q", init::uniform(&[hidden, embed], scale, rng))?,
            b_q: params.add("selector.b_q", DenseArray::zeros(&[hidden]))?,
            w_u: params.add("selector.w_u", init::uniform(&[hidden, embed], scale, rng))?,
            b_u: params.add("selector.b_u", DenseArray::zeros(&[hidden]))?,
            embedding,
        })
    }

    /// Trainable tensors of the selection path.
    pub fn ids(&self) -> Vec<ParamId> {
        vec![self.w_q, self.b_q, self.w_u, self.b_u, self.embedding]
    }

    pub fn forward<S: Scalar>(
        &self,
        params: &ParamSet<S>,
        query: &Query,
        doc: &EncodedDocument,
    ) -> Result<PolicyForward<S>> {
        if doc.sentences.is_empty() {
            return Err(Error::Data(format!(
                "document `{}` has no body sentences to select from",
                doc.doc_id
            )));
        }
        let emb = params.value(self.embedding);
        let query_bow = bow_encode(&query.tokens, emb);
        let query_hidden = affine_tanh(&query_bow, params.value(self.w_q), params.value(self.b_q).as_slice())?;
        let qn = norm(&query_hidden);
        let (w_u, b_u) = (params.value(self.w_u), params.value(self.b_u).as_slice());
        let mut sentence_bows = Vec::with_capacity(doc.sentences.len());
        let mut sentence_hidden = Vec::with_capacity(doc.sentences.len());
        let mut scores = Vec::with_capacity(doc.sentences.len());
        for s in &doc.sentences {
            let bow = bow_encode(s, emb);
            let h = affine_tanh(&bow, w_u, b_u)?;
            scores.push(dot(&query_hidden, &h) / (qn * norm(&h) + S::lit(COSINE_EPS)));
            sentence_bows.push(bow);
            sentence_hidden.push(h);
        }
        Ok(PolicyForward {
            query_bow,
            query_hidden,
            sentence_bows,
            sentence_hidden,
            policy: SelectionPolicy::from_scores(scores)?,
        })
    }

    pub fn policy<S: Scalar>(
        &self,
        params: &ParamSet<S>,
        query: &Query,
        doc: &EncodedDocument,
    ) -> Result<SelectionPolicy<S>> {
        Ok(self.forward(params, query, doc)?.policy)
    }

    /// `W_u e` for every embedding row. Averaging these rows equals
    /// `W_u BoW(u)` by linearity, which skips the per-sentence product.
    pub fn project_vocab<S: Scalar>(&self, params: &ParamSet<S>) -> Result<ProjectedVocab<S>> {
        let (emb, w) = (params.value(self.embedding), params.value(self.w_u));
        let zero = vec![S::zero(); w.rows()];
        let mut data = Vec::with_capacity(emb.rows() * w.rows());
        for r in 0..emb.rows() {
            data.extend(affine(emb.row(r), w, &zero)?);
        }
        Ok(ProjectedVocab { rows: DenseArray::from_vec(&[emb.rows(), w.rows()], data)? })
    }

    /// The policy computed through a projected vocabulary; matches
    /// [`Self::policy`] up to rounding. Stale once parameters change.
    pub fn policy_projected<S: Scalar>(
        &self,
        params: &ParamSet<S>,
        projected: &ProjectedVocab<S>,
        query: &Query,
        doc: &EncodedDocument,
    ) -> Result<SelectionPolicy<S>> {
        if doc.sentences.is_empty() {
            return Err(Error::Data(format!("document `{}` has no body sentences to select from", doc.doc_id)));
        }
        let emb = params.value(self.embedding);
        let query_bow = bow_encode(&query.tokens, emb);
        let qh = affine_tanh(&query_bow, params.value(self.w_q), params.value(self.b_q).as_slice())?;
        let qn = norm(&qh);
        let b_u = params.value(self.b_u).as_slice();
        let scores = doc
            .sentences
            .iter()
            .map(|s| {
                let mut h = bow_encode(s, &projected.rows);
                for (v, &b) in h.iter_mut().zip(b_u) {
                    *v = (*v + b).tanh();
                }
                dot(&qh, &h) / (qn * norm(&h) + S::lit(COSINE_EPS))
            })
            .collect();
        SelectionPolicy::from_scores(scores)
    }

    /// Accumulates `Σ_t d_scores[t] · ∂c_t/∂θ` into the gradient slots.
    /// Embedding gradients are skipped when `update_embeddings` is false.
    pub fn backward_from_scores<S: Scalar>(
        &self,
        view: &mut GradView<'_, S>,
        fwd: &PolicyForward<S>,
        query: &Query,
        doc: &EncodedDocument,
        d_scores: &[S],
        update_embeddings: bool,
    ) {
        let hidden = fwd.query_hidden.len();
        let embed = fwd.query_bow.len();
        let hq = &fwd.query_hidden;
        let qn = norm(hq);
        let mut d_hq = vec![S::zero(); hidden];
        let mut d_h = vec![S::zero(); hidden];
        let mut d_bow = vec![S::zero(); embed];
        let w_u = view.value(self.w_u);
        for (t, &g) in d_scores.iter().enumerate() {
            if g == S::zero() {
                continue;
            }
            let h = &fwd.sentence_hidden[t];
            d_h.iter_mut().for_each(|v| *v = S::zero());
            cosine_backward_into(hq, h, dot(hq, h), qn, norm(h), g, Some(&mut d_hq), Some(&mut d_h));
            let dz = tanh_backward(h, &d_h);
            accumulate_linear(view, self.w_u, self.b_u, &fwd.sentence_bows[t], &dz);
            if update_embeddings {
                d_bow.iter_mut().for_each(|v| *v = S::zero());
                for (r, &z) in dz.iter().enumerate() {
                    for (d, &w) in d_bow.iter_mut().zip(w_u.row(r)) {
                        *d += z * w;
                    }
                }
                bow_backward(&doc.sentences[t], &d_bow, embed, view.grad(self.embedding));
            }
        }
        let dzq = tanh_backward(hq, &d_hq);
        let w_q = view.value(self.w_q);
        accumulate_linear(view, self.w_q, self.b_q, &fwd.query_bow, &dzq);
        if update_embeddings {
            d_bow.iter_mut().for_each(|v| *v = S::zero());
            for (r, &z) in dzq.iter().enumerate() {
                for (d, &w) in d_bow.iter_mut().zip(w_q.row(r)) {
                    *d += z * w;
                }
            }
            bow_backward(&query.tokens, &d_bow, embed, view.grad(self.embedding));
        }
    }

    /// Accumulates `reward · ∇ Σ_k log π(u'_k | q, d)` (ascent direction).
    #[allow(clippy::too_many_arguments)]
    pub fn policy_grad<S: Scalar>(
        &self,
        view: &mut GradView<'_, S>,
        fwd: &PolicyForward<S>,
        query: &Query,
        doc: &EncodedDocument,
        selected: &SelectedSentences<S>,
        reward: S,
        update_embeddings: bool,
    ) {
        if reward == S::zero() || selected.indices.is_empty() {
            return;
        }
        let d_scores = log_prob_score_grad(&fwd.policy, &selected.indices, reward);
        self.backward_from_scores(view, fwd, query, doc, &d_scores, update_embeddings);
    }
}

fn accumulate_linear<S: Scalar>(view: &mut GradView<'_, S>, w: ParamId, b: ParamId, x: &[S], dz: &[S]) {
    let cols = x.len();
    let gw = view.grad(w);
    for (r, &z) in dz.iter().enumerate() {
        if z == S::zero() {
            continue;
        }
        for (g, &xv) in gw[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *g += z * xv;
        }
    }
    for (g, &z) in view.grad(b).iter_mut().zip(dz) {
        *g += z;
    }
}

/// `reward · ∂/∂c Σ_k log π_{i_k} = reward · (n_t − K π_t)`.
pub fn log_prob_score_grad<S: Scalar>(policy: &SelectionPolicy<S>, indices: &[usize], reward: S) -> Vec<S> {
    let k = S::lit(indices.len() as f64);
    let mut g: Vec<S> = policy.probs.iter().map(|&p| -k * p * reward).collect();
    for &i in indices {
        g[i] += reward;
    }
    g
}
