//! Flat `key = value` run configuration shared by every subcommand.

use std::collections::BTreeMap;
use std::path::Path;

use rltm::baselines::Bm25Params;
use rltm::corpus::{Caps, Split, SynthConfig};
use rltm::eval::{BenchConfig, EvalOptions};
use rltm::matcher::{KernelBank, MatcherKind};
use rltm::model::{ModelConfig, SelectionMode};
use rltm::numeric::{AdamConfig, LEARNING_RATE_GRID};
use rltm::selector::SamplingScheme;
use rltm::trainer::{RewardBaseline, TrainConfig, TrainMode};
use rltm::{Error, Result};
use sha2::{Digest, Sha256};

/// Environment variable consulted for the default seed.
pub const SEED_ENV: &str = "RLTM_SEED";

/// What `evaluate` ranks with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scorer {
    Model,
    Bm25,
    /// The judged grade itself; a perfect-ranking reference.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

pub trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|e| format!("{e}"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
plain_value!(usize, u64, u8, f64, bool, String);

macro_rules! named_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|e: Error| e.to_string())
            }
            fn render(&self) -> String {
                self.as_str().to_owned()
            }
        }
    )*};
}
named_value!(MatcherKind, TrainMode, SelectionMode, SamplingScheme, Split);

impl ConfigValue for RewardBaseline {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.parse().map_err(|e: Error| e.to_string())
    }
    fn render(&self) -> String {
        match self {
            Self::None => "none",
            Self::MovingAverage => "moving_average",
        }
        .into()
    }
}

impl ConfigValue for Scorer {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        match s {
            "model" => Ok(Self::Model),
            "bm25" => Ok(Self::Bm25),
            "oracle" => Ok(Self::Oracle),
            _ => Err(format!("unknown scorer `{s}` (expected model, bm25 or oracle)")),
        }
    }
    fn render(&self) -> String {
        match self {
            Self::Model => "model",
            Self::Bm25 => "bm25",
            Self::Oracle => "oracle",
        }
        .into()
    }
}

impl ConfigValue for Precision {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        match s {
            "f32" => Ok(Self::F32),
            "f64" => Ok(Self::F64),
            _ => Err(format!("unknown precision `{s}` (expected f32 or f64)")),
        }
    }
    fn render(&self) -> String {
        match self {
            Self::F32 => "f32",
            Self::F64 => "f64",
        }
        .into()
    }
}

/// `none` stands for an absent value.
impl<T: ConfigValue> ConfigValue for Option<T> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        if s == "none" {
            Ok(None)
        } else {
            T::parse_value(s).map(Some)
        }
    }
    fn render(&self) -> String {
        self.as_ref().map_or_else(|| "none".into(), T::render)
    }
}

/// Comma-separated lists.
impl<T: ConfigValue> ConfigValue for Vec<T> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.split(',').map(|p| T::parse_value(p.trim())).collect()
    }
    fn render(&self) -> String {
        self.iter().map(T::render).collect::<Vec<_>>().join(",")
    }
}

macro_rules! run_config {
    ($($(#[doc = $doc:literal])* $key:ident : $t:ty = $default:expr;)*) => {
        /// Every knob of every subcommand. Keys are the field names.
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $($(#[doc = $doc])* pub $key: $t,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $($key: $default,)* }
            }
        }

        impl RunConfig {
            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                let key = key.replace('-', "_");
                match key.as_str() {
                    $(stringify!($key) => {
                        self.$key = <$t as ConfigValue>::parse_value(value).map_err(|e| {
                            Error::InvalidConfig(format!("bad value `{value}` for `{key}`: {e}"))
                        })?;
                    })*
                    _ => return Err(Error::InvalidConfig(format!("unknown config key `{key}`"))),
                }
                Ok(())
            }

            /// All keys with their rendered values, sorted by key.
            pub fn entries(&self) -> BTreeMap<&'static str, String> {
                let mut m = BTreeMap::new();
                $(m.insert(stringify!($key), self.$key.render());)*
                m
            }
        }
    };
}

run_config! {
    /// Dataset directory (queries.jsonl, docs.jsonl, *.qrels, optional planted.tsv).
    data: Option<String> = None;
    /// Vocabulary file; built from the training split when absent.
    vocab: Option<String> = None;
    checkpoint: Option<String> = None;
    out: String = "out".into();
    threads: usize = 1;
    seed: u64 = 0;
    precision: Precision = Precision::F64;

    vocab_size: usize = 100_000;
    max_query_len: usize = 16;
    max_sentence_len: usize = 64;
    max_sentences: usize = 64;

    synth_pool_size: usize = 2000;
    synth_train_queries: usize = 2000;
    synth_valid_queries: usize = 100;
    synth_test_queries: usize = 200;
    synth_docs_per_query: usize = 10;
    synth_sentences_per_doc: usize = 16;
    synth_sentence_len: usize = 10;
    synth_title_len: usize = 4;
    synth_query_len_min: usize = 3;
    synth_query_len_max: usize = 4;
    synth_planting_rate: f64 = 0.6;
    synth_distractor_rate: f64 = 0.3;
    synth_exact_match: bool = false;

    matcher: MatcherKind = MatcherKind::Knrm;
    embed_dim: usize = 128;
    hidden: usize = 128;
    shared_embeddings: bool = true;
    kernel_mus: Vec<f64> = KernelBank::default().mus;
    kernel_sigmas: Vec<f64> = KernelBank::default().sigmas;
    mp_maps: usize = 128;
    mp_window_rows: usize = 2;
    mp_window_cols: usize = 4;
    mp_pool_rows: usize = 4;
    mp_pool_cols: usize = 8;
    mp_hidden: usize = 128;
    mp_rows: usize = 16;
    mp_cols: usize = 64;

    mode: TrainMode = TrainMode::Rltm;
    k: usize = 3;
    batch_size: usize = 32;
    lr: f64 = 1e-3;
    beta1: f64 = 0.9;
    beta2: f64 = 0.999;
    adam_eps: f64 = 1e-8;
    learning_rates: Vec<f64> = LEARNING_RATE_GRID.to_vec();
    /// Pick `lr` from `learning_rates` by validation NDCG@1 before training.
    sweep: bool = false;
    selector_pretrain_epochs: usize = 1;
    matcher_pretrain_epochs: usize = 1;
    joint_epochs: usize = 3;
    clip_norm: f64 = 5.0;
    margin: Option<f64> = None;
    baseline: RewardBaseline = RewardBaseline::None;
    baseline_decay: f64 = 0.99;
    sampling: SamplingScheme = SamplingScheme::WithoutReplacement;
    pair_budget: Option<usize> = Some(rltm::corpus::DEFAULT_PAIR_BUDGET);
    freeze_selector_embeddings: bool = false;
    update_matcher_embeddings: bool = true;
    validate: bool = true;

    split: Split = Split::Test;
    /// Selection at evaluation time; follows `mode` when absent.
    eval_mode: Option<SelectionMode> = None;
    scorer: Scorer = Scorer::Model;
    map_threshold: u8 = rltm::eval::DEFAULT_MAP_THRESHOLD;
    log_base: f64 = rltm::eval::DEFAULT_LOG_BASE;
    bm25_k1: f64 = 1.2;
    bm25_b: f64 = 0.75;
    /// Pairs printed by `score`; `none` prints all.
    score_limit: Option<usize> = Some(20);

    bench_matchers: Vec<MatcherKind> = vec![MatcherKind::Knrm, MatcherKind::MatchPyramid];
    bench_batches: Vec<usize> = vec![32, 64, 128];
    bench_doc_tokens: Vec<usize> = vec![2000];
    bench_sentence_len: usize = 64;
    bench_title_len: usize = 8;
    bench_query_len: usize = 4;
    bench_repetitions: usize = 20;
    bench_warmup: usize = 2;

    gc_seeds: usize = 20;
    gc_probes: usize = 32;
    gc_tolerance: f64 = 1e-4;
}

/// File locations and the thread count stay out of the hash; artifacts
/// carry content digests for their inputs instead.
const UNHASHED: [&str; 5] = ["data", "vocab", "checkpoint", "out", "threads"];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_file_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!("config line {}: expected `key = value`, got `{raw}`", n + 1)));
        };
        out.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}

/// Splits `--key value` and `--key=value` overrides.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            return Err(Error::InvalidConfig(format!("expected `--key value`, got `{a}`")));
        };
        match flag.split_once('=') {
            Some((k, v)) => out.push((k.to_owned(), v.to_owned())),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::InvalidConfig(format!("missing value for `--{flag}`")))?;
                out.push((flag.to_owned(), v.clone()));
            }
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Defaults, then the seed from `env_seed`, then the file, then the
    /// command-line pairs.
    pub fn resolve(
        env_seed: Option<&str>,
        file: Option<&Path>,
        cli: &[(String, String)],
    ) -> Result<Self> {
        let mut c = Self::default();
        if let Some(s) = env_seed {
            c.set("seed", s)
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV} must be an unsigned integer, got `{s}`")))?;
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_file_text(&text)? {
                c.set(&k, &v)?;
            }
        }
        for (k, v) in cli {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.caps().validate()?;
        self.synth().validate()?;
        self.model(2).validate()?;
        self.train().validate()?;
        self.bm25().validate()?;
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        if !(1..=4).contains(&self.map_threshold) {
            return Err(Error::InvalidConfig(format!("map_threshold must be in 1..=4, got {}", self.map_threshold)));
        }
        if !(self.log_base > 1.0) {
            return Err(Error::InvalidConfig(format!("log_base must exceed 1, got {}", self.log_base)));
        }
        if self.gc_seeds == 0 || self.gc_probes == 0 {
            return Err(Error::InvalidConfig("gc_seeds and gc_probes must be >= 1".into()));
        }
        self.bench().validate()
    }

    /// The effective configuration, one `key = value` line per key.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 over every result-affecting key.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if !UNHASHED.contains(&k) {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `config_hash` and `seed`, embedded in every artifact.
    pub fn meta(&self) -> Vec<(&'static str, String)> {
        vec![("config_hash", self.hash()), ("seed", self.seed.to_string())]
    }

    pub fn caps(&self) -> Caps {
        Caps { query_len: self.max_query_len, sentence_len: self.max_sentence_len, sentences: self.max_sentences }
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            pool_size: self.synth_pool_size,
            train_queries: self.synth_train_queries,
            valid_queries: self.synth_valid_queries,
            test_queries: self.synth_test_queries,
            docs_per_query: self.synth_docs_per_query,
            sentences_per_doc: self.synth_sentences_per_doc,
            sentence_len: self.synth_sentence_len,
            title_len: self.synth_title_len,
            query_len_min: self.synth_query_len_min,
            query_len_max: self.synth_query_len_max,
            planting_rate: self.synth_planting_rate,
            distractor_rate: self.synth_distractor_rate,
            exact_match: self.synth_exact_match,
        }
    }

    pub fn model(&self, vocab_size: usize) -> ModelConfig {
        let mut m = ModelConfig::new(vocab_size);
        m.embed_dim = self.embed_dim;
        m.hidden = self.hidden;
        m.shared_embeddings = self.shared_embeddings;
        m.matcher.kind = self.matcher;
        m.matcher.bank = KernelBank { mus: self.kernel_mus.clone(), sigmas: self.kernel_sigmas.clone() };
        let p = &mut m.matcher.pyramid;
        p.maps = self.mp_maps;
        p.window_rows = self.mp_window_rows;
        p.window_cols = self.mp_window_cols;
        p.pool_rows = self.mp_pool_rows;
        p.pool_cols = self.mp_pool_cols;
        p.hidden = self.mp_hidden;
        p.rows = self.mp_rows;
        p.cols = self.mp_cols;
        m
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            mode: self.mode,
            k: self.k,
            batch_size: self.batch_size,
            adam: AdamConfig { learning_rate: self.lr, beta1: self.beta1, beta2: self.beta2, epsilon: self.adam_eps },
            learning_rates: self.learning_rates.clone(),
            selector_pretrain_epochs: self.selector_pretrain_epochs,
            matcher_pretrain_epochs: self.matcher_pretrain_epochs,
            joint_epochs: self.joint_epochs,
            seed: self.seed,
            clip_norm: self.clip_norm,
            margin: self.margin,
            baseline: self.baseline,
            baseline_decay: self.baseline_decay,
            sampling: self.sampling,
            pair_budget: self.pair_budget,
            freeze_selector_embeddings: self.freeze_selector_embeddings,
            update_matcher_embeddings: self.update_matcher_embeddings,
            validate: self.validate,
            threads: self.threads,
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            mode: self.eval_mode.unwrap_or_else(|| self.mode.eval_mode()),
            k: self.k,
            threads: self.threads,
            seed: self.seed,
            cutoffs: rltm::eval::NDCG_CUTOFFS.to_vec(),
            map_threshold: self.map_threshold,
            log_base: self.log_base,
        }
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params { k1: self.bm25_k1, b: self.bm25_b }
    }

    pub fn bench(&self) -> BenchConfig {
        BenchConfig {
            batch_sizes: self.bench_batches.clone(),
            doc_tokens: self.bench_doc_tokens.clone(),
            sentence_len: self.bench_sentence_len,
            title_len: self.bench_title_len,
            query_len: self.bench_query_len,
            k: self.k,
            repetitions: self.bench_repetitions,
            warmup: self.bench_warmup,
            seed: self.seed,
        }
    }
}
