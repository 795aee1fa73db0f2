//! Reconstruction objective, regularizers and the optimization loop.

use std::fmt::Write as _;

use linda_autograd::{Adam, AdamConfig, Gradients, Graph, Matrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{TokenSequence, EOS, MASK};
use crate::error::{Error, Result};
use crate::model::{EncodedSequence, InterpModel, MixRatio};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaSampling {
    PerExample,
    PerMinibatch,
}

impl AlphaSampling {
    pub fn as_str(self) -> &'static str {
        match self {
            AlphaSampling::PerExample => "per-example",
            AlphaSampling::PerMinibatch => "per-minibatch",
        }
    }
}

impl std::str::FromStr for AlphaSampling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-example" => Ok(Self::PerExample),
            "per-minibatch" => Ok(Self::PerMinibatch),
            other => Err(Error::Config(format!(
                "alpha_sampling must be per-example or per-minibatch, got `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub steps: u64,
    pub p_mask: f64,
    pub lambda: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub alpha_sampling: AlphaSampling,
    /// Write a checkpoint every N steps (0: only at the end).
    pub checkpoint_every: u64,
    /// Global gradient-norm clip (0 disables).
    pub clip_norm: f64,
    /// Linear learning-rate warmup length.
    pub warmup_steps: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            learning_rate: 1e-3,
            steps: 3000,
            p_mask: 0.1,
            lambda: 0.001,
            noise_std: 0.001,
            seed: 0,
            alpha_sampling: AlphaSampling::PerExample,
            checkpoint_every: 0,
            clip_norm: 1.0,
            warmup_steps: 100,
        }
    }
}

pub const TRAINING_KEYS: [&str; 11] = [
    "batch_size",
    "learning_rate",
    "steps",
    "p_mask",
    "lambda",
    "noise_std",
    "seed",
    "alpha_sampling",
    "checkpoint_every",
    "clip_norm",
    "warmup_steps",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

impl TrainingConfig {
    /// Large-model settings: batch 8, learning rate 1e-5.
    pub fn paper_preset() -> Self {
        Self {
            batch_size: 8,
            learning_rate: 1e-5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.p_mask) {
            return bad(format!("p_mask must be in [0, 1), got {}", self.p_mask));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be non-negative, got {}", self.noise_std));
        }
        if !(self.clip_norm >= 0.0) {
            return bad(format!("clip_norm must be non-negative, got {}", self.clip_norm));
        }
        Ok(())
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "steps" => self.steps = parse_num(key, value)?,
            "p_mask" => self.p_mask = parse_num(key, value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "noise_std" => self.noise_std = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "alpha_sampling" => self.alpha_sampling = value.parse()?,
            "checkpoint_every" => self.checkpoint_every = parse_num(key, value)?,
            "clip_norm" => self.clip_norm = parse_num(key, value)?,
            "warmup_steps" => self.warmup_steps = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown training key `{other}`"))),
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("steps", self.steps.to_string()),
            ("p_mask", self.p_mask.to_string()),
            ("lambda", self.lambda.to_string()),
            ("noise_std", self.noise_std.to_string()),
            ("seed", self.seed.to_string()),
            ("alpha_sampling", self.alpha_sampling.as_str().to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("clip_norm", self.clip_norm.to_string()),
            ("warmup_steps", self.warmup_steps.to_string()),
        ]
    }

    /// Parses `key: value` lines; `#` starts a comment. Unknown keys are errors.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once(':').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key: value`", i + 1))
            })?;
            config
                .set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }
}

/// Replaces each token by MASK independently with probability `p_mask`.
pub fn mask_tokens<R: Rng + ?Sized>(x: &TokenSequence, p_mask: f64, rng: &mut R) -> TokenSequence {
    if p_mask <= 0.0 {
        return x.clone();
    }
    let ids = x
        .ids()
        .iter()
        .map(|&id| if rng.random::<f64>() < p_mask { MASK } else { id })
        .collect();
    TokenSequence::new(ids).expect("masking preserves length")
}

/// Whether the regularizing perturbations (masking, noise) are applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug)]
pub struct BatchLoss {
    /// Regularized loss: `objective + penalty`.
    pub loss: f64,
    /// `-(1/M) Σ [α log p(x^a|·) + (1-α) log p(x^b|·)]`.
    pub objective: f64,
    /// `(λ/M) Σ ||h||²` over both encoder outputs of every pair.
    pub penalty: f64,
    /// Mean unweighted `-log p(x^a|·)` over the batch.
    pub recon_a: f64,
    pub recon_b: f64,
    pub alphas: Vec<f64>,
    pub max_abs_hidden: f64,
    /// Pre-noise encoder outputs, `(a, b)` per pair.
    pub encoder_outputs: Vec<(EncodedSequence, EncodedSequence)>,
    pub grads: Option<Gradients>,
}

/// The stochastic reconstruction objective over a minibatch with the hidden
/// norm penalty; returns gradients of the regularized loss when requested.
///
/// In [`Mode::Train`] the encoder inputs are masked and zero-mean Gaussian
/// noise is added to every encoder output before length conversion; the
/// reconstruction targets are always the clean sequences.
pub fn linda_batch_loss<R: Rng + ?Sized>(
    model: &InterpModel,
    pairs: &[(TokenSequence, TokenSequence)],
    alphas: &[MixRatio],
    config: &TrainingConfig,
    mode: Mode,
    rng: &mut R,
    with_grads: bool,
) -> Result<BatchLoss> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if pairs.len() != alphas.len() {
        return Err(Error::Shape(format!(
            "{} pairs but {} mixing ratios",
            pairs.len(),
            alphas.len()
        )));
    }
    let vocab = model.config().vocab_size;
    for (a, b) in pairs {
        a.validate(vocab)?;
        b.validate(vocab)?;
    }
    let m = pairs.len() as f64;
    let d = model.config().d_model;
    let noise = Normal::new(0.0, config.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(e.to_string()))?;

    let mut out = BatchLoss {
        loss: 0.0,
        objective: 0.0,
        penalty: 0.0,
        recon_a: 0.0,
        recon_b: 0.0,
        alphas: alphas.iter().map(|a| a.value()).collect(),
        max_abs_hidden: 0.0,
        encoder_outputs: Vec::with_capacity(pairs.len()),
        grads: with_grads.then(|| Gradients::zeros_like(model.params())),
    };

    for ((xa, xb), &alpha) in pairs.iter().zip(alphas) {
        let (a_in, b_in, perturb) = match mode {
            Mode::Train => {
                let a_in = mask_tokens(xa, config.p_mask, rng);
                let b_in = mask_tokens(xb, config.p_mask, rng);
                let perturb = (config.noise_std > 0.0).then(|| {
                    let mut draw = |rows: usize| {
                        Matrix::from_shape_simple_fn((rows, d), || noise.sample(&mut *rng))
                    };
                    (draw(xa.len()), draw(xb.len()))
                });
                (a_in, b_in, perturb)
            }
            Mode::Eval => (xa.clone(), xb.clone(), None),
        };

        let mut g = Graph::new(model.params());
        let nodes = model.forward_pair(
            &mut g,
            a_in.ids(),
            b_in.ids(),
            alpha,
            perturb.as_ref().map(|(ea, eb)| (ea, eb)),
        );
        let memory = model.memory_graph(&mut g, nodes.state);
        let target = |x: &TokenSequence| {
            let mut t = x.ids().to_vec();
            t.push(EOS);
            t
        };
        let lp_a = model.target_logprob_graph(&mut g, &memory, &target(xa));
        let lp_b = model.target_logprob_graph(&mut g, &memory, &target(xb));
        let wa = g.scale(lp_a, -alpha.value() / m);
        let wb = g.scale(lp_b, -alpha.complement() / m);
        let objective = g.add(wa, wb);
        let sa = g.sum_sq(nodes.hidden_a);
        let sb = g.sum_sq(nodes.hidden_b);
        let sq = g.add(sa, sb);
        let penalty = g.scale(sq, config.lambda / m);
        let total = g.add(objective, penalty);

        out.objective += g.scalar(objective);
        out.penalty += g.scalar(penalty);
        out.loss += g.scalar(total);
        out.recon_a -= g.scalar(lp_a) / m;
        out.recon_b -= g.scalar(lp_b) / m;
        let ha = g.value(nodes.hidden_a).clone();
        let hb = g.value(nodes.hidden_b).clone();
        let max_h = ha
            .iter()
            .chain(hb.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        out.max_abs_hidden = out.max_abs_hidden.max(max_h);
        out.encoder_outputs
            .push((EncodedSequence { vectors: ha }, EncodedSequence { vectors: hb }));
        if let Some(grads) = out.grads.as_mut() {
            grads.merge(g.backward(total).expect("scalar loss"));
        }
    }
    Ok(out)
}

/// `batch_loss + (λ / M) Σ_m Σ_i ||h_i^m||²` over the given encoder outputs.
pub fn regularized_loss(
    batch_loss: f64,
    encoder_outputs: &[EncodedSequence],
    lambda: f64,
    batch_size: usize,
) -> f64 {
    if lambda == 0.0 {
        return batch_loss;
    }
    let sq: f64 = encoder_outputs
        .iter()
        .map(|h| h.vectors.iter().map(|v| v * v).sum::<f64>())
        .sum();
    batch_loss + lambda / batch_size as f64 * sq
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub loss: f64,
    pub recon_a: f64,
    pub recon_b: f64,
    pub penalty: f64,
    pub alpha_mean: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub const HEADER: &'static str = "step,loss,recon_a,recon_b,penalty,alpha_mean";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.step, r.loss, r.recon_a, r.recon_b, r.penalty, r.alpha_mean
            );
        }
        out
    }

    /// Mean loss over a window of rows.
    pub fn mean_loss(&self, range: std::ops::Range<usize>) -> f64 {
        let rows = &self.rows[range];
        rows.iter().map(|r| r.loss).sum::<f64>() / rows.len() as f64
    }
}

/// Mutable optimization state carried across steps.
pub struct TrainingState {
    pub step: u64,
    pub smoothed_loss: Option<f64>,
    optimizer: Adam,
    rng: ChaCha8Rng,
}

impl TrainingState {
    pub fn new(model: &InterpModel, config: &TrainingConfig) -> Self {
        let adam = AdamConfig {
            learning_rate: config.learning_rate,
            clip_norm: (config.clip_norm > 0.0).then_some(config.clip_norm),
            ..AdamConfig::default()
        };
        Self {
            step: 0,
            smoothed_loss: None,
            optimizer: Adam::new(adam, model.params()),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        }
    }
}

/// Endless stream of random pairs: each epoch pairs a shuffled copy of the
/// corpus with an independently shuffled copy.
struct Pairing {
    n: usize,
    queue: Vec<(usize, usize)>,
}

impl Pairing {
    fn new(n: usize) -> Self {
        Self { n, queue: Vec::new() }
    }

    fn next<R: Rng>(&mut self, rng: &mut R) -> (usize, usize) {
        if self.queue.is_empty() {
            let mut a: Vec<usize> = (0..self.n).collect();
            let mut b = a.clone();
            a.shuffle(rng);
            b.shuffle(rng);
            self.queue = a.into_iter().zip(b).rev().collect();
        }
        self.queue.pop().expect("refilled above")
    }
}

pub fn train(
    model: &mut InterpModel,
    corpus: &[TokenSequence],
    config: &TrainingConfig,
) -> Result<TrainingLog> {
    train_with(model, corpus, config, &mut |_, _| Ok(()))
}

/// Runs `config.steps` Adam updates over random pairs from `corpus`.
/// `on_checkpoint` is called every `checkpoint_every` steps and after the
/// final step.
pub fn train_with(
    model: &mut InterpModel,
    corpus: &[TokenSequence],
    config: &TrainingConfig,
    on_checkpoint: &mut dyn FnMut(u64, &InterpModel) -> Result<()>,
) -> Result<TrainingLog> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut state = TrainingState::new(model, config);
    let mut pairing = Pairing::new(corpus.len());
    let mut log = TrainingLog::default();

    while state.step < config.steps {
        let step = state.step + 1;
        let lr = if config.warmup_steps > 0 && step <= config.warmup_steps {
            config.learning_rate * step as f64 / config.warmup_steps as f64
        } else {
            config.learning_rate
        };
        state.optimizer.set_learning_rate(lr);

        let batch: Vec<(TokenSequence, TokenSequence)> = (0..config.batch_size)
            .map(|_| {
                let (i, j) = pairing.next(&mut state.rng);
                (corpus[i].clone(), corpus[j].clone())
            })
            .collect();
        let alphas: Vec<MixRatio> = match config.alpha_sampling {
            AlphaSampling::PerExample => (0..batch.len())
                .map(|_| MixRatio::new(state.rng.random::<f64>()).expect("unit interval"))
                .collect(),
            AlphaSampling::PerMinibatch => {
                let a = MixRatio::new(state.rng.random::<f64>()).expect("unit interval");
                vec![a; batch.len()]
            }
        };
        let result = linda_batch_loss(
            model,
            &batch,
            &alphas,
            config,
            Mode::Train,
            &mut state.rng,
            true,
        )?;
        let grads = result.grads.as_ref().expect("requested gradients");
        if !result.loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                alphas: result.alphas,
                max_abs_hidden: result.max_abs_hidden,
            });
        }
        state.optimizer.step(model.params_mut(), grads);
        state.step = step;
        state.smoothed_loss = Some(match state.smoothed_loss {
            Some(s) => 0.98 * s + 0.02 * result.loss,
            None => result.loss,
        });
        log.rows.push(LogRow {
            step,
            loss: result.loss,
            recon_a: result.recon_a,
            recon_b: result.recon_b,
            penalty: result.penalty,
            alpha_mean: result.alphas.iter().sum::<f64>() / result.alphas.len() as f64,
        });
        if step % 100 == 0 {
            log::info!(
                "step {step} loss {:.4} smoothed {:.4} sigma {:.3}",
                result.loss,
                state.smoothed_loss.unwrap_or(f64::NAN),
                model.sigma()
            );
        }
        if config.checkpoint_every > 0 && step % config.checkpoint_every == 0 && step < config.steps
        {
            on_checkpoint(step, model)?;
        }
    }
    on_checkpoint(state.step, model)?;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny() -> InterpModel {
        let config = ModelConfig {
            vocab_size: 16,
            d_model: 8,
            n_heads: 2,
            encoder_layers: 1,
            decoder_layers: 1,
            ffn_dim: 16,
            init_sigma: 1.0,
        };
        InterpModel::new(config, &mut ChaCha8Rng::seed_from_u64(11)).unwrap()
    }

    fn seq(ids: &[usize]) -> TokenSequence {
        TokenSequence::new(ids.to_vec()).unwrap()
    }

    fn alpha(x: f64) -> MixRatio {
        MixRatio::new(x).unwrap()
    }

    #[test]
    fn masking_rates_and_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = seq(&[5; 10_000]);
        assert_eq!(mask_tokens(&x, 0.0, &mut rng), x);
        let masked = mask_tokens(&x, 0.5, &mut rng);
        assert_eq!(masked.len(), x.len());
        let frac = masked.ids().iter().filter(|&&t| t == MASK).count() as f64 / 1e4;
        // binomial sd = 0.005; 0.02 is four sd
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn alpha_one_self_pair_is_reconstruction_nll() {
        let m = tiny();
        let x = seq(&[5, 6, 7]);
        let cfg = TrainingConfig {
            lambda: 0.0,
            ..TrainingConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = linda_batch_loss(&m, &[(x.clone(), x.clone())], &[alpha(1.0)], &cfg, Mode::Eval, &mut rng, false)
            .unwrap();
        let st = m.interpolated_state(&x, &x, alpha(1.0)).unwrap();
        let nll = -m.decoder_logprob(&st, &x).unwrap();
        assert!((out.loss - nll).abs() < 1e-10);
    }

    #[test]
    fn alpha_zero_ignores_first_reconstruction() {
        let m = tiny();
        let cfg = TrainingConfig {
            lambda: 0.0,
            ..TrainingConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = seq(&[9, 10]);
        let l1 = linda_batch_loss(&m, &[(seq(&[5, 6]), b.clone())], &[alpha(0.0)], &cfg, Mode::Eval, &mut rng, false)
            .unwrap();
        let st = m.interpolated_state(&seq(&[5, 6]), &b, alpha(0.0)).unwrap();
        assert!((l1.loss + m.decoder_logprob(&st, &b).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn batch_is_mean_of_per_example_losses() {
        let m = tiny();
        let cfg = TrainingConfig {
            lambda: 0.0,
            ..TrainingConfig::default()
        };
        let pairs = vec![(seq(&[5, 6, 7]), seq(&[8])), (seq(&[9, 10]), seq(&[11, 12, 13, 14]))];
        let alphas = [alpha(0.25), alpha(0.8)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = linda_batch_loss(&m, &pairs, &alphas, &cfg, Mode::Eval, &mut rng, false).unwrap();
        let mut expected = 0.0;
        for ((a, b), al) in pairs.iter().zip(alphas) {
            let st = m.interpolated_state(a, b, al).unwrap();
            let per = -(al.value() * m.decoder_logprob(&st, a).unwrap()
                + al.complement() * m.decoder_logprob(&st, b).unwrap());
            expected += per / 2.0;
        }
        assert!((batch.loss - expected).abs() < 1e-10);
    }

    #[test]
    fn penalty_matches_pure_regularizer() {
        let m = tiny();
        let cfg = TrainingConfig {
            lambda: 0.01,
            ..TrainingConfig::default()
        };
        let pairs = vec![(seq(&[5, 6]), seq(&[7, 8, 9]))];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = linda_batch_loss(&m, &pairs, &[alpha(0.4)], &cfg, Mode::Eval, &mut rng, false).unwrap();
        let hs: Vec<EncodedSequence> = out
            .encoder_outputs
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect();
        let reg = regularized_loss(out.objective, &hs, 0.01, 1);
        assert!((reg - out.loss).abs() < 1e-12);
    }

    #[test]
    fn regularizer_examples() {
        use linda_autograd::ndarray::array;
        let h = vec![
            EncodedSequence {
                vectors: array![[1.0, 0.0]],
            },
            EncodedSequence {
                vectors: array![[0.0, 2.0]],
            },
        ];
        assert_eq!(regularized_loss(1.5, &h, 0.0, 1), 1.5);
        assert!((regularized_loss(0.0, &h, 0.001, 1) - 0.005).abs() < 1e-15);
        let zeros = vec![EncodedSequence {
            vectors: Matrix::zeros((3, 2)),
        }];
        assert_eq!(regularized_loss(2.0, &zeros, 0.5, 4), 2.0);
    }

    #[test]
    fn eval_mode_is_deterministic_train_mode_is_not() {
        let m = tiny();
        let cfg = TrainingConfig {
            p_mask: 0.5,
            noise_std: 0.5,
            ..TrainingConfig::default()
        };
        let pairs = vec![(seq(&[5, 6, 7, 8]), seq(&[9, 10, 11]))];
        let run = |mode, seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            linda_batch_loss(&m, &pairs, &[alpha(0.5)], &cfg, mode, &mut rng, false)
                .unwrap()
                .loss
        };
        assert_eq!(run(Mode::Eval, 1), run(Mode::Eval, 2));
        assert_ne!(run(Mode::Train, 1), run(Mode::Train, 2));
        assert_eq!(run(Mode::Train, 3), run(Mode::Train, 3));
    }

    #[test]
    fn empty_and_mismatched_batches() {
        let m = tiny();
        let cfg = TrainingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            linda_batch_loss(&m, &[], &[], &cfg, Mode::Eval, &mut rng, false),
            Err(Error::EmptyBatch)
        ));
        let pairs = vec![(seq(&[5]), seq(&[6]))];
        assert!(linda_batch_loss(&m, &pairs, &[], &cfg, Mode::Eval, &mut rng, false).is_err());
    }

    #[test]
    fn config_text_round_trip_and_rejections() {
        let cfg = TrainingConfig {
            seed: 9,
            alpha_sampling: AlphaSampling::PerMinibatch,
            ..TrainingConfig::default()
        };
        assert_eq!(TrainingConfig::from_kv_str(&cfg.to_kv_string()).unwrap(), cfg);
        assert!(TrainingConfig::from_kv_str("bogus: 1").is_err());
        assert!(TrainingConfig::from_kv_str("p_mask: 1.0").is_err());
        assert!(TrainingConfig::from_kv_str("lambda: -1").is_err());
        assert!(TrainingConfig::from_kv_str("steps = 3").is_err());
        let d = TrainingConfig::from_kv_str("# defaults\n").unwrap();
        assert_eq!(d.lambda, 0.001);
        assert_eq!(d.noise_std, 0.001);
        assert_eq!(d.p_mask, 0.1);
        let p = TrainingConfig::paper_preset();
        assert_eq!((p.batch_size, p.learning_rate), (8, 1e-5));
    }

    #[test]
    fn training_is_reproducible_and_checkpoints_fire() {
        let corpus: Vec<TokenSequence> = (0..6).map(|i| seq(&[5 + i, 6 + i, 7])).collect();
        let cfg = TrainingConfig {
            steps: 6,
            batch_size: 2,
            checkpoint_every: 4,
            seed: 5,
            ..TrainingConfig::default()
        };
        let mut fired = Vec::new();
        let mut m1 = tiny();
        let log1 = train_with(&mut m1, &corpus, &cfg, &mut |s, _| {
            fired.push(s);
            Ok(())
        })
        .unwrap();
        let mut m2 = tiny();
        let log2 = train(&mut m2, &corpus, &cfg).unwrap();
        assert_eq!(log1, log2);
        assert_eq!(m1.params(), m2.params());
        assert_eq!(fired, vec![4, 6]);
        assert_eq!(log1.rows.len(), 6);
        assert!(log1.to_csv().starts_with(TrainingLog::HEADER));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let mut m = tiny();
        assert!(matches!(
            train(&mut m, &[], &TrainingConfig::default()),
            Err(Error::EmptyCorpus)
        ));
    }
}
