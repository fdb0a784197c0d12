//! Pairwise training: supervised warm starts for both components, the joint
//! policy-gradient phase, and the pipeline and whole-document variants.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, EncodedDocument, PairPlan, Query, Split, Triple, DEFAULT_PAIR_BUDGET};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions};
use crate::model::{Model, ModelConfig, SelectionMode};
use crate::numeric::{adam_step, clip_grad_norm, AdamConfig, ParamId, LEARNING_RATE_GRID};
use crate::rng::{stream_for_key, substream};
use crate::scalar::Scalar;
use crate::selector::{sample_k, PolicyForward, SamplingScheme, SelectedSentences};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Selector and matcher warm starts, then joint updates.
    #[default]
    Rltm,
    /// Selector warm start, then the matcher alone on the frozen top-K.
    Pipeline,
    /// The matcher alone on whole documents.
    FullDoc,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rltm => "rltm",
            Self::Pipeline => "pipeline",
            Self::FullDoc => "fulldoc",
        }
    }

    /// Selection used for validation and for the final ranking.
    pub fn eval_mode(self) -> SelectionMode {
        match self {
            Self::FullDoc => SelectionMode::FullDoc,
            _ => SelectionMode::TopK,
        }
    }
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rltm" => Ok(Self::Rltm),
            "pipeline" => Ok(Self::Pipeline),
            "fulldoc" => Ok(Self::FullDoc),
            _ => Err(Error::InvalidConfig(format!(
                "unknown training mode `{s}` (expected rltm, pipeline or fulldoc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardBaseline {
    #[default]
    None,
    MovingAverage,
}

impl std::str::FromStr for RewardBaseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "moving_average" => Ok(Self::MovingAverage),
            _ => Err(Error::InvalidConfig(format!(
                "unknown baseline `{s}` (expected none or moving_average)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Body sentences selected per document.
    pub k: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Candidates for [`sweep_learning_rates`].
    pub learning_rates: Vec<f64>,
    pub selector_pretrain_epochs: usize,
    pub matcher_pretrain_epochs: usize,
    pub joint_epochs: usize,
    pub seed: u64,
    /// Global gradient-norm bound; 0 disables clipping.
    pub clip_norm: f64,
    /// Hinge margin on `s⁺ − s⁻`; `None` keeps the raw gap.
    pub margin: Option<f64>,
    pub baseline: RewardBaseline,
    pub baseline_decay: f64,
    pub sampling: SamplingScheme,
    /// Pairs per query; `None` keeps every pair.
    pub pair_budget: Option<usize>,
    /// Selector-path updates leave the embedding table alone.
    pub freeze_selector_embeddings: bool,
    /// Matcher updates also train the embedding table.
    pub update_matcher_embeddings: bool,
    /// Validate after every epoch of the matcher phases.
    pub validate: bool,
    /// Threads for validation scoring.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Rltm,
            k: 3,
            batch_size: 32,
            adam: AdamConfig::default(),
            learning_rates: LEARNING_RATE_GRID.to_vec(),
            selector_pretrain_epochs: 1,
            matcher_pretrain_epochs: 1,
            joint_epochs: 3,
            seed: 0,
            clip_norm: 5.0,
            margin: None,
            baseline: RewardBaseline::None,
            baseline_decay: 0.99,
            sampling: SamplingScheme::WithoutReplacement,
            pair_budget: Some(DEFAULT_PAIR_BUDGET),
            freeze_selector_embeddings: false,
            update_matcher_embeddings: true,
            validate: true,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(Error::InvalidConfig(format!("clip_norm must be >= 0, got {}", self.clip_norm)));
        }
        if let Some(m) = self.margin {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidConfig(format!("margin must be finite and >= 0, got {m}")));
            }
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::InvalidConfig(format!("baseline_decay must be in [0, 1), got {}", self.baseline_decay)));
        }
        if self.pair_budget == Some(0) {
            return Err(Error::InvalidConfig("pair_budget must be >= 1".into()));
        }
        if self.learning_rates.iter().any(|&lr| !(lr >= 0.0) || !lr.is_finite()) {
            return Err(Error::InvalidConfig("learning-rate candidates must be finite and >= 0".into()));
        }
        self.adam.validate()
    }

    /// Epochs the matcher trains for in the single-phase modes, matching the
    /// rltm matcher budget.
    pub fn matcher_epochs(&self) -> usize {
        self.matcher_pretrain_epochs + self.joint_epochs
    }
}

/// Outcome of one sampled joint update.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardRecord<S> {
    pub s_plus: S,
    pub s_minus: S,
    /// `s_plus − s_minus`.
    pub reward: S,
    pub plus: SelectedSentences<S>,
    pub minus: SelectedSentences<S>,
}

/// Running reward mean subtracted in the selector term when enabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineState {
    pub value: f64,
    pub initialized: bool,
}

impl BaselineState {
    pub fn new() -> Self {
        Self { value: 0.0, initialized: false }
    }

    fn offset(&self, cfg: &TrainConfig) -> f64 {
        match cfg.baseline {
            RewardBaseline::MovingAverage if self.initialized => self.value,
            _ => 0.0,
        }
    }

    fn update(&mut self, cfg: &TrainConfig, reward: f64) {
        if cfg.baseline == RewardBaseline::None {
            return;
        }
        if self.initialized {
            self.value = cfg.baseline_decay * self.value + (1.0 - cfg.baseline_decay) * reward;
        } else {
            self.value = reward;
            self.initialized = true;
        }
    }
}

impl Default for BaselineState {
    fn default() -> Self {
        Self::new()
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub phase: String,
    pub epoch: usize,
    /// Optimizer steps taken so far across all phases.
    pub step: usize,
    pub mode: TrainMode,
    /// Mean reward (joint), objective (matcher) or cross-entropy (selector).
    pub mean_value: f64,
    pub valid_ndcg1: Option<f64>,
}

/// Clips and applies one Adam step to `ids`, leaving their gradients zero.
pub fn apply_update<S: Scalar>(model: &mut Model<S>, ids: &[ParamId], cfg: &TrainConfig) -> Result<()> {
    if cfg.clip_norm > 0.0 {
        clip_grad_norm(&mut model.params, ids, S::lit(cfg.clip_norm));
    }
    for &id in ids {
        adam_step(model.params.tensor_mut(id), &cfg.adam)?;
    }
    model.params.zero_grads();
    Ok(())
}

fn dedup(mut ids: Vec<ParamId>) -> Vec<ParamId> {
    let mut seen = HashSet::new();
    ids.retain(|id| seen.insert(*id));
    ids
}

/// Body position sharing the most distinct query terms; ties go to the lower
/// index. `None` when no sentence shares a term.
pub fn overlap_target(query: &Query, doc: &EncodedDocument) -> Option<usize> {
    let terms: HashSet<_> = query.tokens.iter().copied().collect();
    let mut best: Option<(usize, usize)> = None;
    for (i, s) in doc.sentences.iter().enumerate() {
        let hits = s.iter().copied().filter(|t| terms.contains(t)).collect::<HashSet<_>>().len();
        if hits > 0 && best.map_or(true, |(_, b)| hits > b) {
            best = Some((i, hits));
        }
    }
    best.map(|(i, _)| i)
}

/// One selector cross-entropy step on `(query, doc, target)` items. Returns
/// the mean loss before the update.
pub fn selector_pretrain_step<S: Scalar>(
    model: &mut Model<S>,
    items: &[(&Query, &EncodedDocument, usize)],
    cfg: &TrainConfig,
) -> Result<f64> {
    if items.is_empty() {
        return Ok(0.0);
    }
    let scale = S::one() / S::lit(items.len() as f64);
    let mut loss = 0.0;
    for &(q, d, target) in items {
        let fwd = model.selector.forward(&model.params, q, d)?;
        loss -= fwd.policy.probs[target].as_f64().ln();
        let mut d_scores: Vec<S> = fwd.policy.probs.iter().map(|&p| p * scale).collect();
        d_scores[target] -= scale;
        model.selector_backward_scores(&fwd, q, d, &d_scores, !cfg.freeze_selector_embeddings);
    }
    let ids = model.selector_ids();
    apply_update(model, &ids, cfg)?;
    Ok(loss / items.len() as f64)
}

/// Where the matcher-only phases take their sentences from.
#[derive(Debug, Clone)]
pub enum UnitSource<'a> {
    FirstK(usize),
    FullDoc,
    /// Precomputed body positions keyed by `(query_id, doc_id)`.
    Fixed(&'a BTreeMap<(String, String), Vec<usize>>),
}

impl UnitSource<'_> {
    fn indices(&self, q: &Query, d: &EncodedDocument) -> Vec<usize> {
        match self {
            Self::FirstK(k) => (0..(*k).min(d.sentence_count())).collect(),
            Self::FullDoc => (0..d.sentence_count()).collect(),
            Self::Fixed(map) => map.get(&(q.query_id.clone(), d.doc_id.clone())).cloned().unwrap_or_default(),
        }
    }
}

/// One matcher ascent step on `s⁺ − s⁻` (or its hinge) over the batch.
/// Returns the mean objective before the update.
pub fn matcher_step<S: Scalar>(
    model: &mut Model<S>,
    triples: &[Triple<'_>],
    units: &UnitSource<'_>,
    cfg: &TrainConfig,
) -> Result<f64> {
    if triples.is_empty() {
        return Ok(0.0);
    }
    let w = S::one() / S::lit(triples.len() as f64);
    let mut total = 0.0;
    for t in triples {
        let ip = units.indices(t.query, t.positive);
        let im = units.indices(t.query, t.negative);
        let sp = model.score_units(t.query, t.positive, &ip)?;
        let sm = model.score_units(t.query, t.negative, &im)?;
        let gap = sp - sm;
        let obj = match cfg.margin {
            Some(m) => -(m - gap.as_f64()).max(0.0),
            None => gap.as_f64(),
        };
        let active = hinge_active(cfg, gap);
        total += obj;
        if active {
            model.matcher_backward(t.query, t.positive, &ip, -w, cfg.update_matcher_embeddings)?;
            model.matcher_backward(t.query, t.negative, &im, w, cfg.update_matcher_embeddings)?;
        }
    }
    let ids = dedup(model.matcher_ids());
    apply_update(model, &ids, cfg)?;
    Ok(total / triples.len() as f64)
}

/// False once the gap clears the margin; always true without one.
fn hinge_active<S: Scalar>(cfg: &TrainConfig, gap: S) -> bool {
    cfg.margin.is_none_or(|m| gap < S::lit(m))
}

fn policy_or_none<S: Scalar>(model: &Model<S>, q: &Query, d: &EncodedDocument) -> Result<Option<PolicyForward<S>>> {
    if d.sentence_count() == 0 {
        Ok(None)
    } else {
        model.selector.forward(&model.params, q, d).map(Some)
    }
}

fn empty_selection<S: Scalar>() -> SelectedSentences<S> {
    SelectedSentences { indices: Vec::new(), log_prob_sum: S::zero(), includes_title: true }
}

/// Accumulates the joint-update gradients of one triple for fixed
/// selections, scaled by `scale`: the matcher ascends `s⁺ − s⁻` through the
/// selected units (subject to the hinge margin when set) and the selector ascends `(r − b) · Σ log π` on both
/// documents. Parameters are not stepped.
pub fn rltm_accumulate<S: Scalar>(
    model: &mut Model<S>,
    triple: &Triple<'_>,
    plus: &SelectedSentences<S>,
    minus: &SelectedSentences<S>,
    cfg: &TrainConfig,
    baseline: &mut BaselineState,
    scale: S,
) -> Result<RewardRecord<S>> {
    let fp = policy_or_none(model, triple.query, triple.positive)?;
    let fm = policy_or_none(model, triple.query, triple.negative)?;
    accumulate_with(model, triple, fp, fm, plus.clone(), minus.clone(), cfg, baseline, scale)
}

#[allow(clippy::too_many_arguments)]
fn accumulate_with<S: Scalar>(
    model: &mut Model<S>,
    triple: &Triple<'_>,
    fp: Option<PolicyForward<S>>,
    fm: Option<PolicyForward<S>>,
    plus: SelectedSentences<S>,
    minus: SelectedSentences<S>,
    cfg: &TrainConfig,
    baseline: &mut BaselineState,
    scale: S,
) -> Result<RewardRecord<S>> {
    let (q, dp, dm) = (triple.query, triple.positive, triple.negative);
    let s_plus = model.score_units(q, dp, &plus.indices)?;
    let s_minus = model.score_units(q, dm, &minus.indices)?;
    let reward = s_plus - s_minus;
    let adv = reward - S::lit(baseline.offset(cfg));
    baseline.update(cfg, reward.as_f64());
    let upd = cfg.update_matcher_embeddings;
    if hinge_active(cfg, reward) {
        model.matcher_backward(q, dp, &plus.indices, -scale, upd)?;
        model.matcher_backward(q, dm, &minus.indices, scale, upd)?;
    }
    let sel_emb = !cfg.freeze_selector_embeddings;
    if let Some(f) = &fp {
        model.selector_backward(f, q, dp, &plus, -adv * scale, sel_emb);
    }
    if let Some(f) = &fm {
        model.selector_backward(f, q, dm, &minus, -adv * scale, sel_emb);
    }
    Ok(RewardRecord { s_plus, s_minus, reward, plus, minus })
}

/// Samples `U⁺` and `U⁻` from the current policy and accumulates the joint
/// update of one triple (see [`rltm_accumulate`]).
pub fn rltm_step<S: Scalar, R: Rng + ?Sized>(
    model: &mut Model<S>,
    triple: &Triple<'_>,
    cfg: &TrainConfig,
    rng: &mut R,
    baseline: &mut BaselineState,
    scale: S,
) -> Result<RewardRecord<S>> {
    let fp = policy_or_none(model, triple.query, triple.positive)?;
    let fm = policy_or_none(model, triple.query, triple.negative)?;
    let plus = fp.as_ref().map_or_else(empty_selection, |f| sample_k(&f.policy, cfg.k, rng, cfg.sampling));
    let minus = fm.as_ref().map_or_else(empty_selection, |f| sample_k(&f.policy, cfg.k, rng, cfg.sampling));
    accumulate_with(model, triple, fp, fm, plus, minus, cfg, baseline, scale)
}

/// Joint update over a batch; each triple draws from its own stream.
pub fn joint_step<S: Scalar>(
    model: &mut Model<S>,
    triples: &[Triple<'_>],
    streams: &[u64],
    cfg: &TrainConfig,
    baseline: &mut BaselineState,
) -> Result<Vec<RewardRecord<S>>> {
    let scale = S::one() / S::lit(triples.len().max(1) as f64);
    let mut records = Vec::with_capacity(triples.len());
    for (t, &stream) in triples.iter().zip(streams) {
        let mut rng = substream(cfg.seed, stream);
        records.push(rltm_step(model, t, cfg, &mut rng, baseline, scale)?);
    }
    let ids = dedup(model.all_ids());
    apply_update(model, &ids, cfg)?;
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    /// Best-on-validation model (the final one when validation is off).
    pub model: Model<S>,
    pub log: Vec<LogRecord>,
    pub best_valid_ndcg1: Option<f64>,
    pub steps: usize,
}

impl<S> TrainOutcome<S> {
    /// The log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|r| serde_json::to_string(r).expect("log record serializes") + "\n")
            .collect()
    }
}

struct Run<'a, S> {
    cfg: &'a TrainConfig,
    dataset: &'a Dataset,
    plans: Vec<PairPlan>,
    model: Model<S>,
    best: Option<(f64, Model<S>)>,
    log: Vec<LogRecord>,
    steps: usize,
}

impl<'a, S: Scalar> Run<'a, S> {
    fn shuffled<T: Clone>(&self, items: &[T], phase: &str, epoch: usize) -> Vec<T> {
        let mut v = items.to_vec();
        let mut rng = substream(self.cfg.seed, stream_for_key(&format!("shuffle/{phase}/{epoch}")));
        v.shuffle(&mut rng);
        v
    }

    fn record(&mut self, phase: &str, epoch: usize, mean_value: f64, validate: bool) -> Result<()> {
        let valid = if validate && self.cfg.validate && !self.dataset.valid.is_empty() {
            let opts = EvalOptions {
                mode: self.cfg.mode.eval_mode(),
                k: self.cfg.k,
                threads: self.cfg.threads,
                seed: self.cfg.seed,
                ..Default::default()
            };
            let v = evaluate(&self.model, self.dataset, Split::Valid, &opts)?
                .report
                .ndcg_at(1)
                .unwrap_or(0.0);
            if self.best.as_ref().map_or(true, |(b, _)| v > *b) {
                self.best = Some((v, self.model.clone()));
            }
            Some(v)
        } else {
            None
        };
        self.log.push(LogRecord {
            phase: phase.to_owned(),
            epoch,
            step: self.steps,
            mode: self.cfg.mode,
            mean_value,
            valid_ndcg1: valid,
        });
        Ok(())
    }

    fn selector_pretrain(&mut self) -> Result<()> {
        let items: Vec<(String, String)> = self
            .dataset
            .train
            .iter()
            .filter(|j| j.grade > 0)
            .map(|j| (j.query_id.clone(), j.doc_id.clone()))
            .collect();
        let mut resolved = Vec::new();
        for (qid, did) in &items {
            let (Some(q), Some(d)) = (self.dataset.query(qid), self.dataset.doc(did)) else {
                return Err(Error::Data(format!("unresolvable training pair {qid} {did}")));
            };
            if let Some(t) = overlap_target(q, d) {
                resolved.push((q, d, t));
            }
        }
        for epoch in 0..self.cfg.selector_pretrain_epochs {
            let order = self.shuffled(&resolved, "selector", epoch);
            let mut sum = 0.0;
            let mut n = 0;
            for batch in order.chunks(self.cfg.batch_size) {
                sum += selector_pretrain_step(&mut self.model, batch, self.cfg)? * batch.len() as f64;
                n += batch.len();
                self.steps += 1;
            }
            self.record("selector_pretrain", epoch, sum / n.max(1) as f64, false)?;
        }
        Ok(())
    }

    fn matcher_phase(&mut self, phase: &str, epochs: usize, units: &UnitSource<'_>) -> Result<()> {
        for epoch in 0..epochs {
            let order = self.shuffled(&self.plans, phase, epoch);
            let mut sum = 0.0;
            for batch in order.chunks(self.cfg.batch_size) {
                let triples = batch.iter().map(|p| self.dataset.resolve(p)).collect::<Result<Vec<_>>>()?;
                sum += matcher_step(&mut self.model, &triples, units, self.cfg)? * batch.len() as f64;
                self.steps += 1;
            }
            self.record(phase, epoch, sum / order.len().max(1) as f64, true)?;
        }
        Ok(())
    }

    fn joint_phase(&mut self) -> Result<()> {
        let mut baseline = BaselineState::new();
        for epoch in 0..self.cfg.joint_epochs {
            let order = self.shuffled(&self.plans, "joint", epoch);
            let mut sum = 0.0;
            for (b, batch) in order.chunks(self.cfg.batch_size).enumerate() {
                let triples = batch.iter().map(|p| self.dataset.resolve(p)).collect::<Result<Vec<_>>>()?;
                let streams: Vec<u64> = (0..batch.len())
                    .map(|i| stream_for_key(&format!("joint/{epoch}/{b}/{i}")))
                    .collect();
                let recs = joint_step(&mut self.model, &triples, &streams, self.cfg, &mut baseline)?;
                sum += recs.iter().map(|r| r.reward.as_f64()).sum::<f64>();
                self.steps += 1;
            }
            self.record("joint", epoch, sum / order.len().max(1) as f64, true)?;
        }
        Ok(())
    }

    fn top_k_map(&self) -> Result<BTreeMap<(String, String), Vec<usize>>> {
        let mut map = BTreeMap::new();
        let mut rng = substream(self.cfg.seed, 0);
        for p in &self.plans {
            for did in [&p.positive_id, &p.negative_id] {
                let key = (p.query_id.clone(), did.clone());
                if map.contains_key(&key) {
                    continue;
                }
                let t = self.dataset.resolve(p)?;
                let d = if did == &p.positive_id { t.positive } else { t.negative };
                let sel = self.model.select(t.query, d, SelectionMode::TopK, self.cfg.k, self.cfg.sampling, &mut rng)?;
                map.insert(key, sel.selected.indices);
            }
        }
        Ok(map)
    }
}

/// Trains a fresh model of `model_config` on the dataset's training split.
pub fn train<S: Scalar>(dataset: &Dataset, model_config: ModelConfig, cfg: &TrainConfig) -> Result<TrainOutcome<S>> {
    let model = Model::new(model_config, cfg.seed)?;
    train_model(dataset, model, cfg)
}

/// Trains an existing model in the configured mode.
pub fn train_model<S: Scalar>(dataset: &Dataset, model: Model<S>, cfg: &TrainConfig) -> Result<TrainOutcome<S>> {
    cfg.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    let mut run = Run {
        cfg,
        dataset,
        plans: dataset.pair_plans(Split::Train, cfg.pair_budget, cfg.seed),
        model,
        best: None,
        log: Vec::new(),
        steps: 0,
    };
    match cfg.mode {
        TrainMode::Rltm => {
            run.selector_pretrain()?;
            run.matcher_phase("matcher_pretrain", cfg.matcher_pretrain_epochs, &UnitSource::FirstK(cfg.k))?;
            run.joint_phase()?;
        }
        TrainMode::Pipeline => {
            run.selector_pretrain()?;
            run.model.fork_selector_embeddings()?;
            let fixed = run.top_k_map()?;
            run.matcher_phase("matcher", cfg.matcher_epochs(), &UnitSource::Fixed(&fixed))?;
        }
        TrainMode::FullDoc => {
            run.matcher_phase("matcher", cfg.matcher_epochs(), &UnitSource::FullDoc)?;
        }
    }
    let (best_valid_ndcg1, model) = match run.best {
        Some((v, m)) => (Some(v), m),
        None => (None, run.model),
    };
    Ok(TrainOutcome { model, log: run.log, best_valid_ndcg1, steps: run.steps })
}

/// Validation NDCG@1 of each learning-rate candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub learning_rate: f64,
    pub valid_ndcg1: f64,
}

/// Trains once per candidate and reports validation NDCG@1; the best
/// candidate comes first, ties keeping candidate order.
pub fn sweep_learning_rates<S: Scalar>(
    dataset: &Dataset,
    model_config: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<Vec<SweepResult>> {
    let mut out = Vec::new();
    for &lr in &cfg.learning_rates {
        let mut c = cfg.clone();
        c.adam.learning_rate = lr;
        c.validate = true;
        let o = train::<S>(dataset, model_config.clone(), &c)?;
        let v = match o.best_valid_ndcg1 {
            Some(v) => v,
            None => {
                let opts = EvalOptions { mode: c.mode.eval_mode(), k: c.k, threads: c.threads, ..Default::default() };
                evaluate(&o.model, dataset, Split::Valid, &opts)?.report.ndcg_at(1).unwrap_or(0.0)
            }
        };
        out.push(SweepResult { learning_rate: lr, valid_ndcg1: v });
    }
    out.sort_by(|a, b| b.valid_ndcg1.total_cmp(&a.valid_ndcg1));
    Ok(out)
}
