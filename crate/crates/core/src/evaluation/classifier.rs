//! Mean-pooled embedding classifier trained from scratch against soft
//! targets.

use linda_autograd::{Adam, AdamConfig, Graph, Matrix, ParamId, ParamStore};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::augmentation::SoftLabel;
use crate::corpus::{Dataset, Vocabulary, PAD};
use crate::error::{Error, Result};

/// Anything that maps token ids to a class distribution.
pub trait Predictor {
    fn num_classes(&self) -> usize;
    /// Hash of the vocabulary the predictor's inputs are tokenized with.
    fn vocab_hash(&self) -> &str;
    fn predict_proba(&self, ids: &[usize]) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            hidden_dim: 32,
            epochs: 40,
            batch_size: 8,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClassifierModel {
    params: ParamStore,
    embedding: ParamId,
    hidden_w: ParamId,
    hidden_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
    num_classes: usize,
    vocab_hash: String,
}

#[derive(Clone, Debug)]
pub struct TrainedClassifier {
    pub model: ClassifierModel,
    /// Mean minibatch loss after every optimizer step.
    pub step_losses: Vec<f64>,
}

fn normal(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let dist = Normal::new(0.0, std).expect("positive std");
    Matrix::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

impl ClassifierModel {
    fn new(vocab: &Vocabulary, num_classes: usize, cfg: &ClassifierConfig, rng: &mut ChaCha8Rng) -> Self {
        let (d, h) = (cfg.embed_dim, cfg.hidden_dim);
        let mut params = ParamStore::new();
        let embedding = params.add("embedding", normal(vocab.len(), d, 0.1, rng));
        let hidden_w = params.add("hidden.weight", normal(d, h, (2.0 / (d + h) as f64).sqrt(), rng));
        let hidden_b = params.add("hidden.bias", Matrix::zeros((1, h)));
        let out_w = params.add(
            "output.weight",
            normal(h, num_classes, (2.0 / (h + num_classes) as f64).sqrt(), rng),
        );
        let out_b = params.add("output.bias", Matrix::zeros((1, num_classes)));
        Self {
            params,
            embedding,
            hidden_w,
            hidden_b,
            out_w,
            out_b,
            num_classes,
            vocab_hash: vocab.hash(),
        }
    }

    /// Logits for a batch; an empty input is read as a single PAD token.
    fn logits_graph(&self, g: &mut Graph<'_>, batch: &[&[usize]]) -> linda_autograd::Var {
        let mut flat = Vec::new();
        let mut pool = Matrix::zeros((batch.len(), 0));
        let mut spans = Vec::with_capacity(batch.len());
        for ids in batch {
            let ids: &[usize] = if ids.is_empty() { &[PAD] } else { ids };
            spans.push((flat.len(), ids.len()));
            flat.extend_from_slice(ids);
        }
        if !flat.is_empty() {
            pool = Matrix::zeros((batch.len(), flat.len()));
            for (r, (start, len)) in spans.into_iter().enumerate() {
                for c in start..start + len {
                    pool[[r, c]] = 1.0 / len as f64;
                }
            }
        }
        let table = g.param(self.embedding);
        let rows = g.gather(table, &flat);
        let pool = g.constant(pool);
        let pooled = g.matmul(pool, rows);
        let w1 = g.param(self.hidden_w);
        let b1 = g.param(self.hidden_b);
        let h = g.matmul(pooled, w1);
        let h = g.add_row(h, b1);
        let h = g.gelu(h);
        let w2 = g.param(self.out_w);
        let b2 = g.param(self.out_b);
        let z = g.matmul(h, w2);
        g.add_row(z, b2)
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn predict_batch(&self, batch: &[&[usize]]) -> Vec<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let z = self.logits_graph(&mut g, batch);
        let p = g.softmax_rows(z);
        g.value(p).rows().into_iter().map(|r| r.to_vec()).collect()
    }

    pub fn predict_class(&self, ids: &[usize]) -> usize {
        argmax(&self.predict_proba(ids))
    }
}

impl Predictor for ClassifierModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    fn predict_proba(&self, ids: &[usize]) -> Vec<f64> {
        self.predict_batch(&[ids]).remove(0)
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

enum Targets<'a> {
    Soft(&'a [(Vec<usize>, SoftLabel)]),
    Hard(&'a [(Vec<usize>, usize)]),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Soft(d) => d.len(),
            Targets::Hard(d) => d.len(),
        }
    }

    fn ids(&self, i: usize) -> &[usize] {
        match self {
            Targets::Soft(d) => &d[i].0,
            Targets::Hard(d) => &d[i].0,
        }
    }
}

fn fit(
    data: Targets<'_>,
    vocab: &Vocabulary,
    num_classes: usize,
    cfg: &ClassifierConfig,
) -> Result<TrainedClassifier> {
    if data.len() == 0 {
        return Err(Error::EmptyBatch);
    }
    if num_classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {num_classes}")));
    }
    if cfg.batch_size == 0 || cfg.embed_dim == 0 || cfg.hidden_dim == 0 {
        return Err(Error::Config("classifier sizes must be positive".into()));
    }
    for i in 0..data.len() {
        if let Some(&id) = data.ids(i).iter().find(|&&id| id >= vocab.len()) {
            return Err(Error::TokenOutOfRange { id, size: vocab.len() });
        }
        match &data {
            Targets::Soft(d) if d[i].1.num_classes() != num_classes => {
                return Err(Error::Shape(format!(
                    "example {i} has {} classes, expected {num_classes}",
                    d[i].1.num_classes()
                )))
            }
            Targets::Hard(d) if d[i].1 >= num_classes => {
                return Err(Error::LabelOutOfRange {
                    label: d[i].1,
                    num_classes,
                })
            }
            _ => {}
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ClassifierModel::new(vocab, num_classes, cfg, &mut rng);
    let mut adam = Adam::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            clip_norm: Some(5.0),
            ..AdamConfig::default()
        },
        &model.params,
    );
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step_losses = Vec::new();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&[usize]> = chunk.iter().map(|&i| data.ids(i)).collect();
            let mut g = Graph::new(&model.params);
            let z = model.logits_graph(&mut g, &batch);
            let total = match &data {
                Targets::Soft(d) => {
                    let mut t = Matrix::zeros((chunk.len(), num_classes));
                    for (r, &i) in chunk.iter().enumerate() {
                        for (c, &p) in d[i].1.probs().iter().enumerate() {
                            t[[r, c]] = p;
                        }
                    }
                    g.soft_cross_entropy(z, t)
                }
                Targets::Hard(d) => {
                    let labels: Vec<usize> = chunk.iter().map(|&i| d[i].1).collect();
                    let ll = g.pick_log_softmax(z, &labels);
                    g.scale(ll, -1.0)
                }
            };
            let loss = g.scale(total, 1.0 / chunk.len() as f64);
            let value = g.scalar(loss);
            if !value.is_finite() {
                return Err(Error::NonFiniteClassifierLoss { epoch });
            }
            let grads = g.backward(loss).map_err(|e| Error::Invalid(e.to_string()))?;
            drop(g);
            adam.step(&mut model.params, &grads);
            step_losses.push(value);
        }
    }
    Ok(TrainedClassifier { model, step_losses })
}

/// Minimizes mean cross-entropy against soft targets; deterministic in
/// `cfg.seed`.
pub fn train_classifier(
    data: &[(Vec<usize>, SoftLabel)],
    vocab: &Vocabulary,
    num_classes: usize,
    cfg: &ClassifierConfig,
) -> Result<TrainedClassifier> {
    fit(Targets::Soft(data), vocab, num_classes, cfg)
}

/// Standard cross-entropy on class indices.
pub fn train_classifier_hard(
    data: &[(Vec<usize>, usize)],
    vocab: &Vocabulary,
    num_classes: usize,
    cfg: &ClassifierConfig,
) -> Result<TrainedClassifier> {
    fit(Targets::Hard(data), vocab, num_classes, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `(correct, total)` per gold class.
    pub per_class: Vec<(usize, usize)>,
}

/// Argmax accuracy on hard labels; ties go to the lower class index.
pub fn evaluate_classifier(model: &dyn Predictor, test: &Dataset) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut per_class = vec![(0, 0); test.num_classes];
    let mut correct = 0;
    for ex in &test.examples {
        let gold = ex.label.class();
        if gold >= test.num_classes {
            return Err(Error::LabelOutOfRange {
                label: gold,
                num_classes: test.num_classes,
            });
        }
        let pred = argmax(&model.predict_proba(&ex.text.classifier_ids()));
        per_class[gold].1 += 1;
        if pred == gold {
            per_class[gold].0 += 1;
            correct += 1;
        }
    }
    Ok(Evaluation {
        accuracy: correct as f64 / test.len() as f64,
        correct,
        total: test.len(),
        per_class,
    })
}
