use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use linda_core::augmentation::{augment_dataset, to_jsonl, LabelPolicy};
use linda_core::corpus::{
    build_vocabulary, load_corpus_lines, load_labeled_dataset, tokenize, LoadOptions, TaskKind,
    TokenSequence, Vocabulary,
};
use linda_core::decoding::interpolate_text;
use linda_core::evaluation::{
    alpha_sweep_parallel, experiment_suite, monotonicity_score, train_classifier, ExperimentConfig,
    PolicySpec,
};
use linda_core::model::checkpoint::{self, Checkpoint};
use linda_core::training::train_with;
use linda_core::{InterpModel, MixRatio};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{RunConfig, Task};

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    settings: &'a std::collections::BTreeMap<String, String>,
    inputs: Vec<(String, String)>,
    checkpoint_hash: Option<String>,
    outputs: Vec<String>,
}

struct OutDir {
    path: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self {
            path: path.to_owned(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path.join(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        self.written.push(name.to_owned());
        Ok(p)
    }

    fn finish(mut self, cfg: &RunConfig, seed: u64, checkpoint_hash: Option<String>) -> Result<()> {
        self.write("config.resolved.txt", cfg.settings.to_kv_string())?;
        let inputs = cfg
            .task
            .inputs()
            .into_iter()
            .map(|p| Ok((p.display().to_string(), checkpoint::file_hash(p)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut outputs = self.written.clone();
        outputs.push("manifest.json".into());
        let manifest = Manifest {
            command: cfg.task.name(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            settings: cfg.settings.as_map(),
            inputs,
            checkpoint_hash,
            outputs,
        };
        self.write("manifest.json", serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, String)> {
    let ck = checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok((ck, checkpoint::file_hash(path)?))
}

fn tokenize_lines(lines: &[String], vocab: &Vocabulary, max_len: usize) -> Result<Vec<TokenSequence>> {
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| tokenize(l, vocab, max_len).with_context(|| format!("line {}", i + 1)))
        .collect()
}

/// Executes a resolved run. Output files are complete when this returns Ok.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let s = &cfg.settings;
    let out = || -> Result<OutDir> {
        OutDir::create(cfg.out.as_deref().expect("subcommand has an output directory"))
    };
    match &cfg.task {
        Task::Train { corpus } => {
            let training = s.training()?;
            let lines = load_corpus_lines(corpus)?;
            let vocab = build_vocabulary(&lines, s.vocab_size()?)?;
            let seqs = tokenize_lines(&lines, &vocab, s.max_len()?)?;
            let mut rng = ChaCha8Rng::seed_from_u64(training.seed);
            let mut model = InterpModel::new(s.model(vocab.len())?, &mut rng)?;
            let mut dir = out()?;
            dir.write("vocab.txt", vocab.to_file_string())?;
            let dir_path = dir.path.clone();
            let final_step = training.steps;
            let mut saved = Vec::new();
            let log = train_with(&mut model, &seqs, &training, &mut |step, m| {
                if step < final_step {
                    let name = format!("model-step{step}.ckpt");
                    checkpoint::save(dir_path.join(&name), m, &vocab, step)?;
                    saved.push(name);
                }
                Ok(())
            })?;
            dir.written.extend(saved);
            dir.write("training_log.csv", log.to_csv())?;
            let bytes = checkpoint::to_bytes(&model, &vocab, training.steps)?;
            let ck = dir.write("model.ckpt", bytes)?;
            let hash = checkpoint::file_hash(&ck)?;
            println!("trained {} steps; sigma {:.4}; checkpoint {}", training.steps, model.sigma(), ck.display());
            dir.finish(cfg, training.seed, Some(hash))
        }
        Task::Interpolate {
            checkpoint,
            a,
            b,
            alpha,
        } => {
            let (ck, _) = load_checkpoint(checkpoint)?;
            let max_len = s.max_len()?;
            let xa = tokenize(a, &ck.vocab, max_len).context("tokenizing --a")?;
            let xb = tokenize(b, &ck.vocab, max_len).context("tokenizing --b")?;
            let r = interpolate_text(&ck.model, &xa, &xb, MixRatio::new(*alpha)?, &s.decode()?)?;
            println!("{}", ck.vocab.detokenize(&r.tokens));
            log::info!("log-probability {:.4}, finished {}", r.total_logprob, r.finished);
            Ok(())
        }
        Task::Augment { checkpoint, data } => {
            let (ck, hash) = load_checkpoint(checkpoint)?;
            let task = s.task()?;
            let dataset = load_labeled_dataset(
                data,
                s.data_format()?,
                task,
                LoadOptions {
                    vocab: &ck.vocab,
                    max_len: s.max_len()?,
                    num_classes: s.num_classes()?,
                },
            )?;
            let opts = s.augment()?;
            let decode = s.decode()?;
            let teacher;
            let policy = match s.policy()? {
                PolicySpec::Interpolated => LabelPolicy::Interpolated,
                PolicySpec::Sharpened { temperature } => LabelPolicy::Sharpened { temperature },
                PolicySpec::Teacher => {
                    let items = dataset
                        .examples
                        .iter()
                        .map(|ex| Ok((ex.text.classifier_ids(), ex.label.to_soft(dataset.num_classes)?)))
                        .collect::<linda_core::Result<Vec<_>>>()?;
                    let ccfg = linda_core::evaluation::ClassifierConfig {
                        seed: opts.seed,
                        ..s.classifier()?
                    };
                    teacher = train_classifier(&items, &ck.vocab, dataset.num_classes, &ccfg)?.model;
                    LabelPolicy::Teacher(&teacher)
                }
            };
            let records = augment_dataset(&dataset, &ck.model, &ck.vocab, policy, &decode, &opts)?;
            let mut dir = out()?;
            dir.write("augmented.jsonl", to_jsonl(&records, &ck.vocab)?)?;
            println!("wrote {} augmented records", records.len());
            dir.finish(cfg, opts.seed, Some(hash))
        }
        Task::Sweep { checkpoint, corpus } => {
            let (ck, hash) = load_checkpoint(checkpoint)?;
            let lines = load_corpus_lines(corpus)?;
            let seqs = tokenize_lines(&lines, &ck.vocab, s.max_len()?)?;
            if seqs.len() < 2 {
                bail!("sweep needs at least two sentences");
            }
            let seed = s.sweep_seed()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pairs: Vec<_> = (0..s.sweep_pairs()?)
                .map(|_| {
                    let i = rng.random_range(0..seqs.len());
                    let mut j = rng.random_range(0..seqs.len() - 1);
                    if j >= i {
                        j += 1;
                    }
                    (seqs[i].clone(), seqs[j].clone())
                })
                .collect();
            let curve = alpha_sweep_parallel(&ck.model, &pairs, &s.sweep_grid()?, &s.decode()?, cfg.workers)?;
            let mut dir = out()?;
            dir.write("sweep.csv", curve.to_csv())?;
            dir.write("sweep.svg", curve.to_svg())?;
            if curve.alphas.len() >= 3 {
                let m = monotonicity_score(&curve)?;
                let json = serde_json::json!({
                    "rho_a": m.a.rho,
                    "rho_a_degenerate": m.a.degenerate,
                    "rho_b": m.b.rho,
                    "rho_b_degenerate": m.b.degenerate,
                });
                dir.write("monotonicity.json", serde_json::to_string_pretty(&json)? + "\n")?;
                println!("rank correlation: vs a {:+.3}, vs b {:+.3}", m.a.rho, m.b.rho);
            }
            dir.finish(cfg, seed, Some(hash))
        }
        Task::Experiment {
            train,
            test,
            checkpoint,
        } => {
            let loaded = checkpoint.as_deref().map(load_checkpoint).transpose()?;
            let task = s.task()?;
            let max_len = s.max_len()?;
            let vocab = match &loaded {
                Some((ck, _)) => ck.vocab.clone(),
                None => {
                    let lines = training_text(train, s.data_format()?, task)?;
                    build_vocabulary(&lines, s.vocab_size()?)?
                }
            };
            let opts = LoadOptions {
                vocab: &vocab,
                max_len,
                num_classes: s.num_classes()?,
            };
            let format = s.data_format()?;
            let train_set = load_labeled_dataset(train, format, task, opts)?;
            let test_set = load_labeled_dataset(
                test,
                format,
                task,
                LoadOptions {
                    num_classes: Some(train_set.num_classes),
                    ..opts
                },
            )?;
            let exp = ExperimentConfig {
                shots: s.shots()?,
                methods: s.methods()?,
                seeds: s.seeds()?,
                classifier: s.classifier()?,
                decode: s.decode()?,
                augment: s.augment()?,
            };
            let results = experiment_suite(
                &train_set,
                &test_set,
                loaded.as_ref().map(|(ck, _)| &ck.model),
                &vocab,
                &exp,
            )?;
            let mut dir = out()?;
            dir.write("results.csv", results.to_csv())?;
            dir.write("summary.csv", results.summary_csv())?;
            for row in &results.summary {
                println!(
                    "{:<8} {:<13} shots={:<5} accuracy {:.4} ± {:.4} ({} runs)",
                    row.method, row.policy, row.shots, row.mean, row.std, row.runs
                );
            }
            dir.finish(cfg, exp.seeds[0], loaded.map(|(_, h)| h))
        }
        Task::InspectCkpt { checkpoint } => {
            let (ck, hash) = load_checkpoint(checkpoint)?;
            let c = ck.model.config();
            println!("file sha256: {hash}");
            println!("step: {}", ck.step);
            println!(
                "model: vocab {} d_model {} heads {} layers {}+{} ffn {}",
                c.vocab_size, c.d_model, c.n_heads, c.encoder_layers, c.decoder_layers, c.ffn_dim
            );
            println!("parameters: {}", ck.model.params().num_scalars());
            println!("sigma: {:.6}", ck.model.sigma());
            println!("vocabulary sha256: {}", ck.vocab.hash());
            Ok(())
        }
    }
}

/// Raw training text used to build a vocabulary when no checkpoint is given.
fn training_text(path: &Path, format: linda_core::corpus::DataFormat, task: TaskKind) -> Result<Vec<String>> {
    let contents = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for line in contents.lines().filter(|l| !l.trim().is_empty()) {
        match format {
            linda_core::corpus::DataFormat::Tsv => {
                // The last column is the label.
                let cols: Vec<&str> = line.split('\t').collect();
                let n = if task == TaskKind::SentencePair { 2 } else { 1 };
                let text_cols = cols.len().saturating_sub(1).clamp(1, n);
                out.extend(cols[..text_cols].iter().map(|c| c.to_string()));
            }
            linda_core::corpus::DataFormat::Jsonl => {
                let v: serde_json::Value = serde_json::from_str(line)?;
                for key in ["text", "premise", "hypothesis"] {
                    if let Some(t) = v.get(key).and_then(|t| t.as_str()) {
                        out.push(t.to_owned());
                    }
                }
            }
        }
    }
    Ok(out)
}
