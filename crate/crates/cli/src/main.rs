mod config;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rltm::baselines::{bm25_score, CorpusStats};
use rltm::corpus::{synth_corpus, Dataset, RawCollection, Vocabulary, WhitespaceTokenizer};
use rltm::eval::{bench, evaluate, evaluate_with, format_bench, Evaluation};
use rltm::gradients::{check_component, GradCheckSetup, GradComponent};
use rltm::model::Model;
use rltm::numeric::Checkpoint;
use rltm::rng::substream;
use rltm::trainer::{sweep_learning_rates, train};
use rltm::{Error, ErrorCategory, Result, Scalar};
use sha2::{Digest, Sha256};

use config::{parse_overrides, Precision, RunConfig, Scorer, SEED_ENV};

#[derive(Parser)]
#[command(name = "rltm", version, about = "Long-document ranking with learned sentence selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the training vocabulary of a dataset.
    BuildVocab(Common),
    /// Generate a synthetic dataset with planted relevance.
    Synth(Common),
    /// Train a model and write its checkpoint and log.
    Train(Common),
    /// Rank a split and write the metrics report and run file.
    Evaluate(Common),
    /// Time top-K against whole-document inference.
    Bench(Common),
    /// Print per-pair scores with the selected sentences.
    Score(Common),
    /// Compare analytic gradients with finite differences.
    GradCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Evaluation threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Any other key as `--key value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut pairs = Vec::new();
        if let Some(o) = &self.out {
            pairs.push(("out".to_owned(), o.clone()));
        }
        if let Some(t) = self.threads {
            pairs.push(("threads".to_owned(), t.to_string()));
        }
        pairs.extend(parse_overrides(&self.overrides)?);
        let env_seed = std::env::var(SEED_ENV).ok();
        RunConfig::resolve(env_seed.as_deref(), self.config.as_deref(), &pairs)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, label) = match e.category() {
                ErrorCategory::Config => (2, "config"),
                ErrorCategory::Data => (3, "data"),
                ErrorCategory::Numeric => (4, "numeric"),
            };
            eprintln!("error ({label}): {e}");
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Result<()> {
    let (common, f): (&Common, fn(&RunConfig) -> Result<()>) = match &command {
        Command::BuildVocab(c) => (c, build_vocab_cmd),
        Command::Synth(c) => (c, synth_cmd),
        Command::Train(c) => (c, train_cmd),
        Command::Evaluate(c) => (c, evaluate_cmd),
        Command::Bench(c) => (c, bench_cmd),
        Command::Score(c) => (c, score_cmd),
        Command::GradCheck(c) => (c, grad_check_cmd),
    };
    let cfg = common.resolve()?;
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(out_path(&cfg, "config.txt"), cfg.to_text())?;
    f(&cfg)
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    Path::new(&cfg.out).join(name)
}

fn required<'a>(v: &'a Option<String>, key: &str) -> Result<&'a str> {
    v.as_deref().ok_or_else(|| Error::InvalidConfig(format!("`{key}` is required for this command")))
}

fn header(meta: &[(&str, String)]) -> String {
    meta.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

fn load_dataset(cfg: &RunConfig, vocab: Option<Vocabulary>) -> Result<Dataset> {
    let dir = required(&cfg.data, "data")?;
    let vocab = match (vocab, &cfg.vocab) {
        (Some(v), _) => Some(v),
        (None, Some(p)) => Some(Vocabulary::load(Path::new(p))?),
        (None, None) => None,
    };
    Dataset::load_dir(Path::new(dir), vocab, cfg.vocab_size, cfg.caps())
}

fn build_vocab_cmd(cfg: &RunConfig) -> Result<()> {
    let raw = RawCollection::read_dir(Path::new(required(&cfg.data, "data")?))?;
    let vocab = raw.train_vocab(&WhitespaceTokenizer, cfg.vocab_size)?;
    let path = out_path(cfg, "vocab.tsv");
    vocab.save(&path, &cfg.meta())?;
    println!("vocabulary of {} entries written to {}", vocab.len(), path.display());
    Ok(())
}

fn synth_cmd(cfg: &RunConfig) -> Result<()> {
    let corpus = synth_corpus(&cfg.synth(), cfg.seed)?;
    corpus.write_to_dir(Path::new(&cfg.out))?;
    println!(
        "{} queries, {} documents ({} train / {} valid / {} test judgments) written to {}",
        corpus.queries.len(),
        corpus.docs.len(),
        corpus.train.len(),
        corpus.valid.len(),
        corpus.test.len(),
        cfg.out
    );
    Ok(())
}

fn train_cmd(cfg: &RunConfig) -> Result<()> {
    match cfg.precision {
        Precision::F32 => train_as::<f32>(cfg),
        Precision::F64 => train_as::<f64>(cfg),
    }
}

fn train_as<S: Scalar>(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(cfg, None)?;
    let model_cfg = cfg.model(ds.vocab.len());
    let mut tc = cfg.train();
    if cfg.sweep {
        let results = sweep_learning_rates::<S>(&ds, &model_cfg, &tc)?;
        let mut table = header(&cfg.meta());
        table.push_str("learning_rate\tvalid_ndcg1\n");
        for r in &results {
            let _ = writeln!(table, "{}\t{:.6}", r.learning_rate, r.valid_ndcg1);
        }
        std::fs::write(out_path(cfg, "sweep.tsv"), &table)?;
        print!("{table}");
        if let Some(best) = results.first() {
            tc.adam.learning_rate = best.learning_rate;
        }
    }
    let outcome = train::<S>(&ds, model_cfg, &tc)?;
    let hash = cfg.hash();
    outcome.model.to_checkpoint(&ds.vocab.hash(), &hash, cfg.seed)?.save(&out_path(cfg, "checkpoint.json"))?;
    ds.vocab.save(&out_path(cfg, "vocab.tsv"), &cfg.meta())?;
    std::fs::write(out_path(cfg, "train_log.jsonl"), outcome.log_jsonl())?;
    for r in &outcome.log {
        let valid = r.valid_ndcg1.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"));
        println!("{}\tepoch {}\tstep {}\tmean {:.4}\tvalid ndcg@1 {valid}", r.phase, r.epoch, r.step, r.mean_value);
    }
    println!("checkpoint written to {}", out_path(cfg, "checkpoint.json").display());
    Ok(())
}

/// Loads the checkpoint together with the vocabulary it was trained with:
/// the `vocab` key, else `vocab.tsv` beside the checkpoint.
fn load_checkpoint(cfg: &RunConfig) -> Result<(Checkpoint, Vocabulary)> {
    let path = PathBuf::from(required(&cfg.checkpoint, "checkpoint")?);
    let ck = Checkpoint::load(&path)?;
    let vocab_path = match &cfg.vocab {
        Some(p) => PathBuf::from(p),
        None => path.with_file_name("vocab.tsv"),
    };
    let vocab = Vocabulary::load(&vocab_path)?;
    ck.check_vocab(&vocab.hash())?;
    Ok((ck, vocab))
}

fn evaluate_cmd(cfg: &RunConfig) -> Result<()> {
    let opts = cfg.eval_options();
    let mut extra = Vec::new();
    let (ds, eval) = match cfg.scorer {
        Scorer::Model => {
            let (ck, vocab) = load_checkpoint(cfg)?;
            extra.push(("checkpoint_hash", file_digest(required(&cfg.checkpoint, "checkpoint")?)?));
            let ds = load_dataset(cfg, Some(vocab))?;
            let eval = if ck.precision == f32::NAME {
                evaluate(&Model::<f32>::from_checkpoint_for(&ck, &ds.vocab)?, &ds, cfg.split, &opts)?
            } else {
                evaluate(&Model::<f64>::from_checkpoint_for(&ck, &ds.vocab)?, &ds, cfg.split, &opts)?
            };
            (ds, eval)
        }
        Scorer::Bm25 => {
            let ds = load_dataset(cfg, None)?;
            let stats = CorpusStats::build(ds.docs.iter().map(|d| d.all_tokens()))?;
            let p = cfg.bm25();
            let eval = evaluate_with(&ds, cfg.split, &opts, |q, d| {
                let doc: Vec<_> = d.all_tokens().collect();
                Ok(bm25_score(&q.tokens, &doc, &stats, p))
            })?;
            (ds, eval)
        }
        Scorer::Oracle => {
            let ds = load_dataset(cfg, None)?;
            let grades: HashMap<(&str, &str), u8> = ds
                .split(cfg.split)
                .iter()
                .map(|j| ((j.query_id.as_str(), j.doc_id.as_str()), j.grade))
                .collect();
            let eval = evaluate_with(&ds, cfg.split, &opts, |q, d| {
                Ok(f64::from(grades[&(q.query_id.as_str(), d.doc_id.as_str())]))
            })?;
            (ds, eval)
        }
    };
    extra.insert(0, ("vocab_hash", ds.vocab.hash()));
    write_report(cfg, &eval, extra)
}

fn file_digest(path: &str) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn write_report(cfg: &RunConfig, eval: &Evaluation, extra: Vec<(&'static str, String)>) -> Result<()> {
    let opts = cfg.eval_options();
    let mut meta = cfg.meta();
    meta.extend(extra);
    meta.push(("scorer", config::ConfigValue::render(&cfg.scorer)));
    meta.push(("split", cfg.split.as_str().to_owned()));
    meta.push(("selection", opts.mode.as_str().to_owned()));
    meta.push(("k", opts.k.to_string()));
    std::fs::write(out_path(cfg, "report.txt"), eval.report.to_kv(&meta))?;
    eval.write_run(&out_path(cfg, "run.txt"))?;
    print!("{}", eval.report.to_table());
    Ok(())
}

fn bench_cmd(cfg: &RunConfig) -> Result<()> {
    let bc = cfg.bench();
    let mut rows = Vec::new();
    if cfg.checkpoint.is_some() {
        let (ck, _) = load_checkpoint(cfg)?;
        rows.extend(bench(&Model::<f64>::from_checkpoint(&ck)?, &bc)?);
    } else {
        for &kind in &cfg.bench_matchers {
            let mut mc = cfg.model(cfg.vocab_size);
            mc.matcher.kind = kind;
            rows.extend(bench(&Model::<f64>::new(mc, cfg.seed)?, &bc)?);
        }
    }
    let table = format_bench(&rows, &cfg.meta());
    std::fs::write(out_path(cfg, "bench.tsv"), &table)?;
    print!("{table}");
    Ok(())
}

fn score_cmd(cfg: &RunConfig) -> Result<()> {
    let (ck, vocab) = load_checkpoint(cfg)?;
    let ds = load_dataset(cfg, Some(vocab))?;
    let model = Model::<f64>::from_checkpoint_for(&ck, &ds.vocab)?;
    let opts = cfg.eval_options();
    let judgments = ds.split(cfg.split);
    let limit = cfg.score_limit.unwrap_or(judgments.len());
    let mut out = header(&cfg.meta());
    for j in judgments.iter().take(limit) {
        let (Some(q), Some(d)) = (ds.query(&j.query_id), ds.doc(&j.doc_id)) else {
            return Err(Error::Data(format!("unresolvable pair {} {}", j.query_id, j.doc_id)));
        };
        let mut rng = substream(cfg.seed, 0);
        let scored = model.score_document(q, d, opts.mode, opts.k, &mut rng)?;
        let idx = scored.indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "{}\t{}\tgrade={}\tscore={:.6}\tselected={idx}", j.query_id, j.doc_id, j.grade, scored.score);
        let _ = writeln!(out, "  query: {}", ds.vocab.decode(&q.tokens).join(" "));
        let _ = writeln!(out, "  title: {}", ds.vocab.decode(&d.title).join(" "));
        for &i in &scored.indices {
            let _ = writeln!(out, "  [{i}] {}", ds.vocab.decode(&d.sentences[i]).join(" "));
        }
    }
    std::fs::write(out_path(cfg, "scores.txt"), &out)?;
    print!("{out}");
    Ok(())
}

fn grad_check_cmd(cfg: &RunConfig) -> Result<()> {
    let setup = GradCheckSetup { probes: cfg.gc_probes, ..GradCheckSetup::default() };
    let mut out = header(&cfg.meta());
    out.push_str("component\tseeds\tprobes\tmax_rel_error\n");
    let mut worst = 0.0f64;
    for component in GradComponent::ALL {
        let mut max = 0.0f64;
        let mut probes = 0;
        for s in 0..cfg.gc_seeds as u64 {
            let r = check_component(&setup, component, cfg.seed.wrapping_add(s))?;
            max = max.max(r.max_rel_error);
            probes += r.probes;
        }
        worst = worst.max(max);
        let _ = writeln!(out, "{}\t{}\t{probes}\t{max:.3e}", component.as_str(), cfg.gc_seeds);
    }
    let _ = writeln!(out, "max_rel_error={worst:.3e}");
    std::fs::write(out_path(cfg, "gradcheck.txt"), &out)?;
    print!("{out}");
    if worst < cfg.gc_tolerance {
        Ok(())
    } else {
        Err(Error::Numeric(format!("gradient check failed: {worst:.3e} >= {}", cfg.gc_tolerance)))
    }
}
