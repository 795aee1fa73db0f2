//! Argument parsing and run orchestration for the `linda` binary.

pub mod config;
mod run;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

pub use config::Settings;
pub use run::run;

pub const OUTPUT_ROOT_ENV: &str = "LINDA_OUTPUT_ROOT";
pub const WORKERS_ENV: &str = "LINDA_WORKERS";

fn parse_alpha(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

#[derive(Parser, Debug)]
#[command(name = "linda", version, about = "Learned text interpolation for data augmentation")]
pub struct Cli {
    /// Config file of `key: value` lines (flags override it)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override any setting, e.g. `--set training.steps=500` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct DecodeFlags {
    /// beam, greedy or sample
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub beam_size: Option<usize>,
    #[arg(long)]
    pub max_decode_length: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train an interpolation model on an unlabeled corpus (one sentence per line)
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        vocab_size: Option<usize>,
    },
    /// Interpolate two sentences with a trained model
    Interpolate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, value_parser = parse_alpha)]
        alpha: f64,
        #[command(flatten)]
        decode: DecodeFlags,
    },
    /// Write one augmented example per input example as JSONL
    Augment {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// tsv or jsonl
        #[arg(long)]
        format: Option<String>,
        /// single or pair
        #[arg(long)]
        task: Option<String>,
        /// interpolated, sharpened or teacher
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        decode: DecodeFlags,
    },
    /// Decode random corpus pairs over an alpha grid and report unigram precision
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated alpha values
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        decode: DecodeFlags,
    },
    /// Compare downstream classifiers trained with and without augmentation
    Experiment {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Needed for linda methods
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Examples per class, or `full`
        #[arg(long)]
        shots: Option<String>,
        /// Comma-separated seeds
        #[arg(long)]
        seeds: Option<String>,
        /// Comma-separated: vanilla, linda:interpolated, linda:sharpened, linda:teacher
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        task: Option<String>,
        #[command(flatten)]
        decode: DecodeFlags,
    },
    /// Print a checkpoint's header
    InspectCkpt {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Train {
        corpus: PathBuf,
    },
    Interpolate {
        checkpoint: PathBuf,
        a: String,
        b: String,
        alpha: f64,
    },
    Augment {
        checkpoint: PathBuf,
        data: PathBuf,
    },
    Sweep {
        checkpoint: PathBuf,
        corpus: PathBuf,
    },
    Experiment {
        train: PathBuf,
        test: PathBuf,
        checkpoint: Option<PathBuf>,
    },
    InspectCkpt {
        checkpoint: PathBuf,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Train { .. } => "train",
            Task::Interpolate { .. } => "interpolate",
            Task::Augment { .. } => "augment",
            Task::Sweep { .. } => "sweep",
            Task::Experiment { .. } => "experiment",
            Task::InspectCkpt { .. } => "inspect-ckpt",
        }
    }

    fn inputs(&self) -> Vec<&Path> {
        match self {
            Task::Train { corpus } => vec![corpus],
            Task::Interpolate { checkpoint, .. } | Task::InspectCkpt { checkpoint } => vec![checkpoint],
            Task::Augment { checkpoint, data } => vec![checkpoint, data],
            Task::Sweep { checkpoint, corpus } => vec![checkpoint, corpus],
            Task::Experiment {
                train,
                test,
                checkpoint,
            } => {
                let mut v: Vec<&Path> = vec![train, test];
                v.extend(checkpoint.as_deref());
                v
            }
        }
    }
}

/// Fully resolved invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub out: Option<PathBuf>,
    pub settings: Settings,
    pub workers: usize,
}

fn set_opt<T: ToString>(s: &mut Settings, key: &str, v: &Option<T>) -> Result<()> {
    if let Some(v) = v {
        s.set(key, &v.to_string())?;
    }
    Ok(())
}

fn apply_decode(s: &mut Settings, d: &DecodeFlags) -> Result<()> {
    set_opt(s, "decode.strategy", &d.strategy)?;
    set_opt(s, "decode.beam_size", &d.beam_size)?;
    set_opt(s, "decode.max_length", &d.max_decode_length)
}

fn resolve_out(out: PathBuf, root: Option<&str>) -> PathBuf {
    match root {
        Some(root) if out.is_relative() && !root.is_empty() => Path::new(root).join(out),
        _ => out,
    }
}

/// Parses argv (program name first) into a validated [`RunConfig`].
///
/// Precedence: flag > config file > built-in default. Input paths must
/// exist.
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    resolve(cli)
}

pub fn resolve(cli: Cli) -> Result<RunConfig> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        s.apply_file(path)?;
    }
    let (task, out) = match cli.command {
        Command::Train {
            corpus,
            out,
            steps,
            batch_size,
            learning_rate,
            seed,
            vocab_size,
        } => {
            set_opt(&mut s, "training.steps", &steps)?;
            set_opt(&mut s, "training.batch_size", &batch_size)?;
            set_opt(&mut s, "training.learning_rate", &learning_rate)?;
            set_opt(&mut s, "training.seed", &seed)?;
            set_opt(&mut s, "data.vocab_size", &vocab_size)?;
            (Task::Train { corpus }, Some(out))
        }
        Command::Interpolate {
            checkpoint,
            a,
            b,
            alpha,
            decode,
        } => {
            apply_decode(&mut s, &decode)?;
            (
                Task::Interpolate {
                    checkpoint,
                    a,
                    b,
                    alpha,
                },
                None,
            )
        }
        Command::Augment {
            checkpoint,
            data,
            out,
            format,
            task,
            policy,
            temperature,
            seed,
            decode,
        } => {
            set_opt(&mut s, "data.format", &format)?;
            set_opt(&mut s, "data.task", &task)?;
            set_opt(&mut s, "augment.policy", &policy)?;
            set_opt(&mut s, "augment.temperature", &temperature)?;
            set_opt(&mut s, "augment.seed", &seed)?;
            apply_decode(&mut s, &decode)?;
            (Task::Augment { checkpoint, data }, Some(out))
        }
        Command::Sweep {
            checkpoint,
            corpus,
            out,
            grid,
            pairs,
            seed,
            decode,
        } => {
            set_opt(&mut s, "sweep.grid", &grid)?;
            set_opt(&mut s, "sweep.pairs", &pairs)?;
            set_opt(&mut s, "sweep.seed", &seed)?;
            apply_decode(&mut s, &decode)?;
            (Task::Sweep { checkpoint, corpus }, Some(out))
        }
        Command::Experiment {
            train,
            test,
            out,
            checkpoint,
            shots,
            seeds,
            methods,
            format,
            task,
            decode,
        } => {
            set_opt(&mut s, "experiment.shots", &shots)?;
            set_opt(&mut s, "experiment.seeds", &seeds)?;
            set_opt(&mut s, "experiment.methods", &methods)?;
            set_opt(&mut s, "data.format", &format)?;
            set_opt(&mut s, "data.task", &task)?;
            apply_decode(&mut s, &decode)?;
            (
                Task::Experiment {
                    train,
                    test,
                    checkpoint,
                },
                Some(out),
            )
        }
        Command::InspectCkpt { checkpoint } => (Task::InspectCkpt { checkpoint }, None),
    };
    for o in &cli.overrides {
        s.apply_assignment(o)?;
    }
    s.validate()?;
    if let Task::Experiment { checkpoint: None, .. } = &task {
        if s.methods()?.iter().any(|m| m.name() == "linda") {
            bail!("linda methods need --checkpoint");
        }
    }
    for p in task.inputs() {
        if !p.exists() {
            bail!("input path {} does not exist", p.display());
        }
    }
    let root = std::env::var(OUTPUT_ROOT_ENV).ok();
    let out = out.map(|o| resolve_out(o, root.as_deref()));
    let workers = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))?,
        Err(_) => 1,
    };
    Ok(RunConfig {
        task,
        out,
        settings: s,
        workers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "a b c\n").unwrap();
        f
    }

    #[test]
    fn train_defaults() {
        let c = corpus();
        let cfg = parse_args(["linda", "train", "--corpus", c.path().to_str().unwrap(), "--out", "run1/"]).unwrap();
        assert_eq!(cfg.task.name(), "train");
        assert_eq!(cfg.settings, Settings::default());
        assert_eq!(cfg.out.unwrap().file_name().unwrap(), "run1");
    }

    #[test]
    fn alpha_out_of_range_names_the_value() {
        let err = parse_args(["linda", "interpolate", "--checkpoint", "x", "--a", "p", "--b", "q", "--alpha", "1.5"])
            .unwrap_err()
            .to_string();
        assert!(err.contains("1.5") && err.contains("--alpha"), "{err}");
    }

    #[test]
    fn flag_beats_config_file() {
        let c = corpus();
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), "training.steps: 10\ntraining.seed: 3\n").unwrap();
        let cfg = parse_args([
            "linda",
            "--config",
            file.path().to_str().unwrap(),
            "train",
            "--corpus",
            c.path().to_str().unwrap(),
            "--out",
            "o",
            "--steps",
            "20",
        ])
        .unwrap();
        let t = cfg.settings.training().unwrap();
        assert_eq!((t.steps, t.seed), (20, 3));
    }

    #[test]
    fn missing_input_and_unknown_flag() {
        let err = parse_args(["linda", "train", "--corpus", "/no/such/file", "--out", "o"]).unwrap_err();
        assert!(err.to_string().contains("/no/such/file"));
        let err = parse_args(["linda", "train", "--corpuz", "x", "--out", "o"]).unwrap_err();
        assert!(err.to_string().contains("--corpuz"));
    }

    #[test]
    fn out_root() {
        assert_eq!(resolve_out("r".into(), Some("/tmp/x")), PathBuf::from("/tmp/x/r"));
        assert_eq!(resolve_out("/abs".into(), Some("/tmp/x")), PathBuf::from("/abs"));
        assert_eq!(resolve_out("r".into(), None), PathBuf::from("r"));
    }
}
