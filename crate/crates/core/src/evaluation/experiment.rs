//! Few-shot comparison of training with and without interpolation-based
//! augmentation.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augmentation::{augment_dataset, AugmentOptions, LabelPolicy, SoftLabel};
use crate::corpus::{Dataset, Vocabulary};
use crate::decoding::DecodeConfig;
use crate::error::{Error, Result};
use crate::model::InterpModel;

use super::classifier::{evaluate_classifier, train_classifier, ClassifierConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shots {
    Full,
    PerClass(usize),
}

impl Shots {
    pub fn label(&self) -> String {
        match self {
            Shots::Full => "full".into(),
            Shots::PerClass(k) => k.to_string(),
        }
    }
}

impl std::str::FromStr for Shots {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(Shots::Full);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(Shots::PerClass(k)),
            _ => Err(Error::Config(format!("shots must be `full` or a positive integer, got `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolicySpec {
    Interpolated,
    Sharpened { temperature: f64 },
    /// A teacher of the downstream architecture trained on the clean subset.
    Teacher,
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Interpolated => "interpolated",
            PolicySpec::Sharpened { .. } => "sharpened",
            PolicySpec::Teacher => "teacher",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Vanilla,
    Linda(PolicySpec),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Linda(_) => "linda",
        }
    }

    pub fn policy_name(&self) -> &'static str {
        match self {
            Method::Vanilla => "none",
            Method::Linda(p) => p.name(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub shots: Shots,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub classifier: ClassifierConfig,
    pub decode: DecodeConfig,
    /// Augmentation options; the seed is replaced by each run's seed.
    pub augment: AugmentOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub policy: String,
    pub shots: String,
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub policy: String,
    pub shots: String,
    pub mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub std: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

/// Class-balanced sample of `k` indices per class, in ascending order.
pub fn k_shot_indices(data: &Dataset, k: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(k * data.num_classes);
    for class in 0..data.num_classes {
        let mut pool: Vec<usize> = (0..data.len())
            .filter(|&i| data.examples[i].label.class() == class)
            .collect();
        if pool.len() < k {
            return Err(Error::InsufficientExamples {
                class,
                available: pool.len(),
                needed: k,
            });
        }
        pool.shuffle(&mut rng);
        out.extend_from_slice(&pool[..k]);
    }
    out.sort_unstable();
    Ok(out)
}

fn soft_items(data: &Dataset) -> Result<Vec<(Vec<usize>, SoftLabel)>> {
    data.examples
        .iter()
        .map(|ex| Ok((ex.text.classifier_ids(), ex.label.to_soft(data.num_classes)?)))
        .collect()
}

fn sample_std(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Trains one classifier per (method, seed) and reports test accuracy.
///
/// LINDA methods train on the subset plus one augmented record per subset
/// example. `interp` is required when any LINDA method is requested.
pub fn experiment_suite(
    train: &Dataset,
    test: &Dataset,
    interp: Option<&InterpModel>,
    vocab: &Vocabulary,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResults> {
    if cfg.methods.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::Config("experiment needs at least one method and one seed".into()));
    }
    if train.num_classes != test.num_classes {
        return Err(Error::Shape(format!(
            "train has {} classes, test has {}",
            train.num_classes, test.num_classes
        )));
    }
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let subset = match cfg.shots {
            Shots::Full => train.clone(),
            Shots::PerClass(k) => train.subset(&k_shot_indices(train, k, seed)?),
        };
        let clean = soft_items(&subset)?;
        let classifier_cfg = ClassifierConfig {
            seed,
            ..cfg.classifier.clone()
        };
        for method in &cfg.methods {
            let items = match method {
                Method::Vanilla => clean.clone(),
                Method::Linda(policy) => {
                    let model = interp.ok_or_else(|| {
                        Error::Config("LINDA methods need an interpolation model".into())
                    })?;
                    let teacher;
                    let label_policy = match policy {
                        PolicySpec::Interpolated => LabelPolicy::Interpolated,
                        PolicySpec::Sharpened { temperature } => LabelPolicy::Sharpened {
                            temperature: *temperature,
                        },
                        PolicySpec::Teacher => {
                            teacher = train_classifier(&clean, vocab, subset.num_classes, &classifier_cfg)?.model;
                            LabelPolicy::Teacher(&teacher)
                        }
                    };
                    let opts = AugmentOptions {
                        seed,
                        ..cfg.augment.clone()
                    };
                    let augmented = augment_dataset(&subset, model, vocab, label_policy, &cfg.decode, &opts)?;
                    let mut items = clean.clone();
                    items.extend(
                        augmented
                            .into_iter()
                            .map(|a| (a.text.classifier_ids(), a.soft_label)),
                    );
                    items
                }
            };
            let trained = train_classifier(&items, vocab, subset.num_classes, &classifier_cfg)?;
            let eval = evaluate_classifier(&trained.model, test)?;
            log::info!(
                "{} ({}) shots={} seed={seed}: accuracy {:.4}",
                method.name(),
                method.policy_name(),
                cfg.shots.label(),
                eval.accuracy
            );
            rows.push(ResultRow {
                method: method.name().into(),
                policy: method.policy_name().into(),
                shots: cfg.shots.label(),
                seed,
                accuracy: eval.accuracy,
            });
        }
    }
    let summary = cfg
        .methods
        .iter()
        .map(|m| {
            let accs: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == m.name() && r.policy == m.policy_name())
                .map(|r| r.accuracy)
                .collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            SummaryRow {
                method: m.name().into(),
                policy: m.policy_name().into(),
                shots: cfg.shots.label(),
                mean,
                std: sample_std(&accs, mean),
                runs: accs.len(),
            }
        })
        .collect();
    Ok(ExperimentResults { rows, summary })
}

impl ExperimentResults {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,policy,shots,seed,accuracy\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{:.6}", r.method, r.policy, r.shots, r.seed, r.accuracy);
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,policy,shots,mean_accuracy,std_accuracy,runs\n");
        for s in &self.summary {
            let _ = writeln!(out, "{},{},{},{:.6},{:.6},{}", s.method, s.policy, s.shots, s.mean, s.std, s.runs);
        }
        out
    }

    pub fn summary_for(&self, method: Method) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.method == method.name() && s.policy == method.policy_name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, LabeledExample, TaskKind, Text, TokenSequence};

    fn data(v: &Vocabulary, n_per_class: usize) -> Dataset {
        let pos = ["good", "great"];
        let neg = ["bad", "awful"];
        let mut examples = Vec::new();
        for i in 0..n_per_class {
            for (c, words) in [pos, neg].iter().enumerate() {
                let ids = vec![v.id("the").unwrap(), v.id(words[i % 2]).unwrap()];
                examples.push(LabeledExample {
                    text: Text::Single(TokenSequence::new(ids).unwrap()),
                    label: Label::Class(c),
                });
            }
        }
        Dataset {
            examples,
            num_classes: 2,
            task_kind: TaskKind::SingleSentence,
        }
    }

    #[test]
    fn k_shot_is_balanced_and_checked() {
        let v = Vocabulary::with_content(["the", "good", "great", "bad", "awful"]).unwrap();
        let d = data(&v, 8);
        let idx = k_shot_indices(&d, 5, 3).unwrap();
        assert_eq!(idx.len(), 10);
        let ones = idx.iter().filter(|&&i| d.examples[i].label.class() == 1).count();
        assert_eq!(ones, 5);
        assert_eq!(idx, k_shot_indices(&d, 5, 3).unwrap());
        assert!(matches!(
            k_shot_indices(&d, 9, 0),
            Err(Error::InsufficientExamples { .. })
        ));
    }

    #[test]
    fn vanilla_suite_rows_and_summary() {
        let v = Vocabulary::with_content(["the", "good", "great", "bad", "awful"]).unwrap();
        let train = data(&v, 10);
        let test = data(&v, 4);
        let cfg = ExperimentConfig {
            shots: Shots::PerClass(5),
            methods: vec![Method::Vanilla],
            seeds: vec![0, 1, 2, 3, 4],
            classifier: ClassifierConfig {
                epochs: 5,
                ..ClassifierConfig::default()
            },
            decode: DecodeConfig::greedy(),
            augment: AugmentOptions::default(),
        };
        let res = experiment_suite(&train, &test, None, &v, &cfg).unwrap();
        assert_eq!(res.rows.len(), 5);
        assert_eq!(res.summary.len(), 1);
        let s = &res.summary[0];
        assert_eq!(s.runs, 5);
        let accs: Vec<f64> = res.rows.iter().map(|r| r.accuracy).collect();
        let mean = accs.iter().sum::<f64>() / 5.0;
        let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((s.std - var.sqrt()).abs() < 1e-12);
        assert_eq!(res, experiment_suite(&train, &test, None, &v, &cfg).unwrap());
        assert!(res.to_csv().starts_with("method,policy,shots,seed,accuracy\n"));

        let linda = ExperimentConfig {
            methods: vec![Method::Linda(PolicySpec::Interpolated)],
            ..cfg
        };
        assert!(experiment_suite(&train, &test, None, &v, &linda).is_err());
    }

    #[test]
    fn shots_parse() {
        assert_eq!("full".parse::<Shots>().unwrap(), Shots::Full);
        assert_eq!("10".parse::<Shots>().unwrap(), Shots::PerClass(10));
        assert!("0".parse::<Shots>().is_err());
    }
}
