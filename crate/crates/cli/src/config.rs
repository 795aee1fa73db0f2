//! Flat `key: value` settings with dotted sections.
//!
//! Resolution order is built-in default, then config file, then command-line
//! flags. Every key is known up front, so typos in files or `--set` fail
//! loudly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use linda_core::augmentation::{AlphaDistribution, AugmentOptions, LabelOrientation};
use linda_core::corpus::{DataFormat, TaskKind};
use linda_core::decoding::{DecodeConfig, Strategy};
use linda_core::evaluation::{ClassifierConfig, Method, PolicySpec, Shots};
use linda_core::model::ModelConfig;
use linda_core::training::TrainingConfig;
use linda_core::MixRatio;

const DEFAULTS: &[(&str, &str)] = &[
    ("data.format", "tsv"),
    ("data.task", "single"),
    ("data.max_len", "64"),
    ("data.vocab_size", "1000"),
    ("data.num_classes", "auto"),
    ("model.d_model", "128"),
    ("model.n_heads", "4"),
    ("model.encoder_layers", "2"),
    ("model.decoder_layers", "2"),
    ("model.ffn_dim", "256"),
    ("model.init_sigma", "1"),
    ("decode.strategy", "beam"),
    ("decode.beam_size", "4"),
    ("decode.max_length", "auto"),
    ("decode.length_penalty", "0"),
    ("decode.seed", "0"),
    ("augment.policy", "interpolated"),
    ("augment.temperature", "0.5"),
    ("augment.alpha", "uniform"),
    ("augment.orientation", "tracks-text"),
    ("augment.seed", "0"),
    ("augment.max_redraws", "8"),
    ("sweep.grid", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"),
    ("sweep.pairs", "200"),
    ("sweep.seed", "0"),
    ("experiment.shots", "10"),
    ("experiment.seeds", "0,1,2,3,4"),
    ("experiment.methods", "vanilla,linda:interpolated"),
    ("classifier.embed_dim", "32"),
    ("classifier.hidden_dim", "32"),
    ("classifier.epochs", "40"),
    ("classifier.batch_size", "8"),
    ("classifier.learning_rate", "0.01"),
];

/// Resolved settings, keyed by dotted name.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Default for Settings {
    fn default() -> Self {
        let mut values: BTreeMap<String, String> = DEFAULTS
            .iter()
            .map(|(k, v)| ((*k).to_owned(), (*v).to_owned()))
            .collect();
        for (k, v) in TrainingConfig::default().entries() {
            values.insert(format!("training.{k}"), v);
        }
        Self { values }
    }
}

impl Settings {
    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("setting `{key}` has no default"))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_owned();
                Ok(())
            }
            None => bail!("unknown setting `{key}`"),
        }
    }

    /// Applies `key: value` lines; `#` starts a comment.
    pub fn apply_str(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| anyhow!("{origin}: line {}: expected `key: value`, got `{line}`", i + 1))?;
            self.set(key, value)
                .with_context(|| format!("{origin}: line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        self.apply_str(&text, &path.display().to_string())
    }

    /// Applies a `key=value` override.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects key=value, got `{assignment}`"))?;
        self.set(k, v)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key);
        raw.parse()
            .map_err(|_| anyhow!("setting `{key}`: cannot parse `{raw}`"))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| anyhow!("setting `{key}`: cannot parse `{s}`"))
            })
            .collect()
    }

    pub fn max_len(&self) -> Result<usize> {
        let n: usize = self.parse("data.max_len")?;
        if n == 0 {
            bail!("setting `data.max_len` must be positive");
        }
        Ok(n)
    }

    pub fn vocab_size(&self) -> Result<usize> {
        self.parse("data.vocab_size")
    }

    pub fn num_classes(&self) -> Result<Option<usize>> {
        match self.get("data.num_classes") {
            "auto" => Ok(None),
            _ => self.parse("data.num_classes").map(Some),
        }
    }

    pub fn data_format(&self) -> Result<DataFormat> {
        match self.get("data.format") {
            "tsv" => Ok(DataFormat::Tsv),
            "jsonl" => Ok(DataFormat::Jsonl),
            other => bail!("setting `data.format` must be tsv or jsonl, got `{other}`"),
        }
    }

    pub fn task(&self) -> Result<TaskKind> {
        match self.get("data.task") {
            "single" => Ok(TaskKind::SingleSentence),
            "pair" => Ok(TaskKind::SentencePair),
            other => bail!("setting `data.task` must be single or pair, got `{other}`"),
        }
    }

    pub fn model(&self, vocab_size: usize) -> Result<ModelConfig> {
        let config = ModelConfig {
            vocab_size,
            d_model: self.parse("model.d_model")?,
            n_heads: self.parse("model.n_heads")?,
            encoder_layers: self.parse("model.encoder_layers")?,
            decoder_layers: self.parse("model.decoder_layers")?,
            ffn_dim: self.parse("model.ffn_dim")?,
            init_sigma: self.parse("model.init_sigma")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn training(&self) -> Result<TrainingConfig> {
        let mut config = TrainingConfig::default();
        for (k, v) in &self.values {
            if let Some(field) = k.strip_prefix("training.") {
                config
                    .set(field, v)
                    .with_context(|| format!("setting `{k}`"))?;
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn decode(&self) -> Result<DecodeConfig> {
        let strategy: Strategy = self.get("decode.strategy").parse()?;
        let max_decode_length = match self.get("decode.max_length") {
            "auto" => None,
            _ => Some(self.parse("decode.max_length")?),
        };
        let config = DecodeConfig {
            strategy,
            beam_size: self.parse("decode.beam_size")?,
            max_decode_length,
            length_penalty: self.parse("decode.length_penalty")?,
            seed: self.parse("decode.seed")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn policy(&self) -> Result<PolicySpec> {
        parse_policy(self.get("augment.policy"), self.parse("augment.temperature")?)
    }

    pub fn augment(&self) -> Result<AugmentOptions> {
        let orientation = match self.get("augment.orientation") {
            "tracks-text" => LabelOrientation::TracksText,
            "literal" => LabelOrientation::Literal,
            other => bail!("setting `augment.orientation` must be tracks-text or literal, got `{other}`"),
        };
        Ok(AugmentOptions {
            alpha: parse_alpha_distribution(self.get("augment.alpha"))?,
            seed: self.parse("augment.seed")?,
            orientation,
            max_redraws: self.parse("augment.max_redraws")?,
        })
    }

    pub fn sweep_grid(&self) -> Result<Vec<f64>> {
        let grid: Vec<f64> = self.list("sweep.grid")?;
        if grid.is_empty() {
            bail!("setting `sweep.grid` is empty");
        }
        for &a in &grid {
            MixRatio::new(a).with_context(|| format!("setting `sweep.grid`: value {a}"))?;
        }
        Ok(grid)
    }

    pub fn sweep_pairs(&self) -> Result<usize> {
        self.parse("sweep.pairs")
    }

    pub fn sweep_seed(&self) -> Result<u64> {
        self.parse("sweep.seed")
    }

    pub fn shots(&self) -> Result<Shots> {
        Ok(self.get("experiment.shots").parse()?)
    }

    pub fn seeds(&self) -> Result<Vec<u64>> {
        let seeds: Vec<u64> = self.list("experiment.seeds")?;
        if seeds.is_empty() {
            bail!("setting `experiment.seeds` is empty");
        }
        Ok(seeds)
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        let temperature: f64 = self.parse("augment.temperature")?;
        let methods = self
            .get("experiment.methods")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|m| match m {
                "vanilla" => Ok(Method::Vanilla),
                _ => match m.strip_prefix("linda:") {
                    Some(p) => parse_policy(p, temperature).map(Method::Linda),
                    None if m == "linda" => parse_policy("interpolated", temperature).map(Method::Linda),
                    None => bail!("unknown method `{m}` (expected vanilla or linda:<policy>)"),
                },
            })
            .collect::<Result<Vec<_>>>()?;
        if methods.is_empty() {
            bail!("setting `experiment.methods` is empty");
        }
        Ok(methods)
    }

    pub fn classifier(&self) -> Result<ClassifierConfig> {
        Ok(ClassifierConfig {
            embed_dim: self.parse("classifier.embed_dim")?,
            hidden_dim: self.parse("classifier.hidden_dim")?,
            epochs: self.parse("classifier.epochs")?,
            batch_size: self.parse("classifier.batch_size")?,
            learning_rate: self.parse("classifier.learning_rate")?,
            seed: 0,
        })
    }

    /// Builds every typed view once so bad values fail before any work.
    pub fn validate(&self) -> Result<()> {
        self.max_len()?;
        self.vocab_size()?;
        self.num_classes()?;
        self.data_format()?;
        self.task()?;
        self.model(linda_core::corpus::NUM_SPECIAL + 1)?;
        self.training()?;
        self.decode()?;
        self.policy()?;
        self.augment()?;
        self.sweep_grid()?;
        self.sweep_pairs()?;
        self.sweep_seed()?;
        self.shots()?;
        self.seeds()?;
        self.methods()?;
        self.classifier()?;
        Ok(())
    }
}

fn parse_policy(name: &str, temperature: f64) -> Result<PolicySpec> {
    match name {
        "interpolated" => Ok(PolicySpec::Interpolated),
        "sharpened" => {
            if !(temperature > 0.0 && temperature.is_finite()) {
                bail!("setting `augment.temperature` must be positive, got {temperature}");
            }
            Ok(PolicySpec::Sharpened { temperature })
        }
        "teacher" => Ok(PolicySpec::Teacher),
        other => bail!("label policy must be interpolated, sharpened or teacher, got `{other}`"),
    }
}

/// `uniform`, `beta:A,B` or `choice:V1,V2,...`.
pub fn parse_alpha_distribution(text: &str) -> Result<AlphaDistribution> {
    let nums = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| anyhow!("alpha distribution: cannot parse `{v}`"))
            })
            .collect()
    };
    if text == "uniform" {
        return Ok(AlphaDistribution::Uniform);
    }
    if let Some(rest) = text.strip_prefix("beta:") {
        let v = nums(rest)?;
        if v.len() != 2 || v.iter().any(|x| !(*x > 0.0)) {
            bail!("alpha distribution `{text}`: beta needs two positive parameters");
        }
        return Ok(AlphaDistribution::Beta { a: v[0], b: v[1] });
    }
    if let Some(rest) = text.strip_prefix("choice:") {
        let v = nums(rest)?;
        for &a in &v {
            MixRatio::new(a).with_context(|| format!("alpha distribution `{text}`"))?;
        }
        if v.is_empty() {
            bail!("alpha distribution `{text}` has no values");
        }
        return Ok(AlphaDistribution::Choice(v));
    }
    bail!("alpha distribution must be uniform, beta:A,B or choice:V1,V2,..., got `{text}`")
}
