//! Turning a labeled dataset into interpolated examples with soft labels.

use std::fmt::Write as _;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::Serialize;
use serde_json::Value;

use crate::corpus::{Dataset, Label, TaskKind, Text, TokenSequence, Vocabulary};
use crate::decoding::{interpolate_text, DecodeConfig, DecodeResult};
use crate::error::{Error, Result};
use crate::evaluation::classifier::Predictor;
use crate::model::{InterpModel, MixRatio};

const SIMPLEX_TOL: f64 = 1e-6;

/// Probability vector over classes.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftLabel(Vec<f64>);

impl SoftLabel {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Invalid("soft label needs at least one class".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Invalid(format!(
                "soft label entries must be finite and non-negative: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Invalid(format!("soft label sums to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    pub fn one_hot(class: usize, num_classes: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: class,
                num_classes,
            });
        }
        let mut p = vec![0.0; num_classes];
        p[class] = 1.0;
        Ok(Self(p))
    }

    pub fn uniform(num_classes: usize) -> Self {
        Self(vec![1.0 / num_classes as f64; num_classes])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    /// Index of the largest entry; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_on_simplex(&self) -> bool {
        self.0.iter().all(|&p| p >= 0.0) && (self.0.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
    }
}

/// Which source the mixing ratio weights in the label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LabelOrientation {
    /// `α · y^a + (1 - α) · y^b`: the label follows the text, which moves
    /// toward `x^a` as α grows.
    #[default]
    TracksText,
    /// `(1 - α) · y^a + α · y^b`.
    Literal,
}

fn convex(first: &[f64], second: &[f64], weight: f64) -> Vec<f64> {
    // weight >= 0.5 here, so 1 - weight is exact.
    let rest = 1.0 - weight;
    first
        .iter()
        .zip(second)
        .map(|(p, q)| weight * p + rest * q)
        .collect()
}

/// `α · y^a + (1 - α) · y^b`, with class indices promoted to one-hot.
///
/// The computation is canonicalized on the larger of the two weights, so
/// `interpolate_labels(a, b, α) == interpolate_labels(b, a, 1 - α)` holds
/// bit-for-bit.
pub fn interpolate_labels(
    ya: &Label,
    yb: &Label,
    alpha: MixRatio,
    num_classes: usize,
) -> Result<SoftLabel> {
    let pa = ya.to_soft(num_classes)?;
    let pb = yb.to_soft(num_classes)?;
    mix_soft(&pa, &pb, alpha)
}

pub fn mix_soft(ya: &SoftLabel, yb: &SoftLabel, alpha: MixRatio) -> Result<SoftLabel> {
    if ya.num_classes() != yb.num_classes() {
        return Err(Error::Shape(format!(
            "label dimensions differ: {} vs {}",
            ya.num_classes(),
            yb.num_classes()
        )));
    }
    let a = alpha.value();
    let probs = if a >= 0.5 {
        convex(ya.probs(), yb.probs(), a)
    } else {
        convex(yb.probs(), ya.probs(), 1.0 - a)
    };
    Ok(SoftLabel(probs))
}

fn oriented_mix(
    ya: &SoftLabel,
    yb: &SoftLabel,
    alpha: MixRatio,
    orientation: LabelOrientation,
) -> Result<SoftLabel> {
    match orientation {
        LabelOrientation::TracksText => mix_soft(ya, yb, alpha),
        LabelOrientation::Literal => mix_soft(yb, ya, alpha),
    }
}

/// Power-normalization `y_i^(1/T) / Σ_j y_j^(1/T)`; the identity at `T = 1`
/// and a hard label as `T → 0`.
pub fn sharpen(y: &SoftLabel, temperature: f64) -> Result<SoftLabel> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if temperature == 1.0 {
        return Ok(y.clone());
    }
    // log domain: small entries raised to large powers would underflow
    let logs: Vec<f64> = y.probs().iter().map(|p| p.ln() / temperature).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(SoftLabel(w.into_iter().map(|v| v / z).collect()))
}

/// The teacher's full predictive distribution for `ids`, which must be
/// tokenized with the teacher's vocabulary.
pub fn teacher_label(
    ids: &[usize],
    text_vocab: &Vocabulary,
    teacher: &dyn Predictor,
) -> Result<SoftLabel> {
    let expected = teacher.vocab_hash();
    let found = text_vocab.hash();
    if expected != found {
        return Err(Error::VocabMismatch {
            expected: expected.to_owned(),
            found,
        });
    }
    SoftLabel::new(teacher.predict_proba(ids))
}

#[derive(Clone, Copy)]
pub enum LabelPolicy<'t> {
    Interpolated,
    Sharpened { temperature: f64 },
    Teacher(&'t dyn Predictor),
}

impl LabelPolicy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            LabelPolicy::Interpolated => "interpolated",
            LabelPolicy::Sharpened { .. } => "sharpened",
            LabelPolicy::Teacher(_) => "teacher",
        }
    }
}

/// Distribution of the mixing ratio for augmentation.
#[derive(Clone, Debug, PartialEq)]
pub enum AlphaDistribution {
    Uniform,
    Beta { a: f64, b: f64 },
    /// Uniform over a fixed set of values.
    Choice(Vec<f64>),
}

impl AlphaDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MixRatio> {
        let v = match self {
            AlphaDistribution::Uniform => rng.random::<f64>(),
            AlphaDistribution::Beta { a, b } => Beta::new(*a, *b)
                .map_err(|e| Error::Config(format!("beta distribution: {e}")))?
                .sample(rng),
            AlphaDistribution::Choice(values) => {
                if values.is_empty() {
                    return Err(Error::Config("empty alpha choice set".into()));
                }
                values[rng.random_range(0..values.len())]
            }
        };
        MixRatio::new(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AugmentedText {
    Single(Vec<usize>),
    Pair {
        premise: Vec<usize>,
        hypothesis: Vec<usize>,
    },
}

impl AugmentedText {
    pub fn classifier_ids(&self) -> Vec<usize> {
        match self {
            AugmentedText::Single(ids) => ids.clone(),
            AugmentedText::Pair {
                premise,
                hypothesis,
            } => {
                let mut ids = premise.clone();
                ids.push(crate::corpus::EOS);
                ids.extend_from_slice(hypothesis);
                ids
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeMeta {
    pub total_logprob: f64,
    pub finished: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedExample {
    pub text: AugmentedText,
    pub soft_label: SoftLabel,
    pub alpha: MixRatio,
    pub source_a: usize,
    pub source_b: usize,
    /// One entry per generated sequence.
    pub decode: Vec<DecodeMeta>,
}

#[derive(Clone, Debug)]
pub struct AugmentOptions {
    pub alpha: AlphaDistribution,
    pub seed: u64,
    pub orientation: LabelOrientation,
    /// Redraws allowed per record after a decode failure.
    pub max_redraws: usize,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self {
            alpha: AlphaDistribution::Uniform,
            seed: 0,
            orientation: LabelOrientation::default(),
            max_redraws: 8,
        }
    }
}

fn decode_pair(
    model: &InterpModel,
    a: &TokenSequence,
    b: &TokenSequence,
    alpha: MixRatio,
    cfg: &DecodeConfig,
) -> Result<DecodeResult> {
    interpolate_text(model, a, b, alpha, cfg)
}

/// Produces exactly one augmented example per input example.
///
/// Record `i` pairs example `i` (the `a` side) with a uniformly drawn
/// partner, using a random stream derived from `(seed, i)` so output does not
/// depend on processing order. Pair tasks interpolate premise and hypothesis
/// separately with the same ratio.
pub fn augment_dataset(
    data: &Dataset,
    model: &InterpModel,
    vocab: &Vocabulary,
    policy: LabelPolicy<'_>,
    cfg: &DecodeConfig,
    opts: &AugmentOptions,
) -> Result<Vec<AugmentedExample>> {
    if data.task_kind == TaskKind::UnlabeledCorpus {
        return Err(Error::Invalid("augmentation needs a labeled dataset".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if vocab.len() != model.config().vocab_size {
        return Err(Error::Invalid(format!(
            "vocabulary has {} tokens, model expects {}",
            vocab.len(),
            model.config().vocab_size
        )));
    }
    if let LabelPolicy::Sharpened { temperature } = policy {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Invalid(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
    }
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    let mut degenerate = 0usize;
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64);
        let mut attempt = 0;
        let record = loop {
            let j = rng.random_range(0..n);
            let alpha = opts.alpha.sample(&mut rng)?;
            let decode_cfg = DecodeConfig {
                seed: rng.next_u64(),
                ..cfg.clone()
            };
            match augment_one(data, model, vocab, policy, &decode_cfg, opts, i, j, alpha) {
                Ok(rec) => break rec,
                Err(e) if attempt < opts.max_redraws => {
                    log::warn!("augmenting record {i} with partner {j} failed ({e}); redrawing");
                    attempt += 1;
                }
                Err(e) => {
                    return Err(Error::Item {
                        index: i,
                        source: Box::new(e),
                    })
                }
            }
        };
        if is_degenerate(&record, data) {
            degenerate += 1;
        }
        out.push(record);
    }
    if degenerate > 0 {
        log::info!("{degenerate} of {n} augmented records are empty or copy a source");
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn augment_one(
    data: &Dataset,
    model: &InterpModel,
    vocab: &Vocabulary,
    policy: LabelPolicy<'_>,
    cfg: &DecodeConfig,
    opts: &AugmentOptions,
    i: usize,
    j: usize,
    alpha: MixRatio,
) -> Result<AugmentedExample> {
    let (ea, eb) = (&data.examples[i], &data.examples[j]);
    let (text, decode) = match (&ea.text, &eb.text) {
        (Text::Single(a), Text::Single(b)) => {
            let r = decode_pair(model, a, b, alpha, cfg)?;
            let meta = DecodeMeta {
                total_logprob: r.total_logprob,
                finished: r.finished,
            };
            (AugmentedText::Single(r.tokens), vec![meta])
        }
        (
            Text::Pair {
                premise: pa,
                hypothesis: ha,
            },
            Text::Pair {
                premise: pb,
                hypothesis: hb,
            },
        ) => {
            let rp = decode_pair(model, pa, pb, alpha, cfg)?;
            let rh = decode_pair(model, ha, hb, alpha, cfg)?;
            let meta = [&rp, &rh].map(|r| DecodeMeta {
                total_logprob: r.total_logprob,
                finished: r.finished,
            });
            (
                AugmentedText::Pair {
                    premise: rp.tokens,
                    hypothesis: rh.tokens,
                },
                meta.to_vec(),
            )
        }
        _ => return Err(Error::Invalid("dataset mixes single and pair examples".into())),
    };
    let ya = ea.label.to_soft(data.num_classes)?;
    let yb = eb.label.to_soft(data.num_classes)?;
    let mixed = oriented_mix(&ya, &yb, alpha, opts.orientation)?;
    let soft_label = match policy {
        LabelPolicy::Interpolated => mixed,
        LabelPolicy::Sharpened { temperature } => sharpen(&mixed, temperature)?,
        LabelPolicy::Teacher(teacher) => {
            if teacher.num_classes() != data.num_classes {
                return Err(Error::Invalid(format!(
                    "teacher predicts {} classes, dataset has {}",
                    teacher.num_classes(),
                    data.num_classes
                )));
            }
            teacher_label(&text.classifier_ids(), vocab, teacher)?
        }
    };
    Ok(AugmentedExample {
        text,
        soft_label,
        alpha,
        source_a: i,
        source_b: j,
        decode,
    })
}

fn is_degenerate(rec: &AugmentedExample, data: &Dataset) -> bool {
    let copies = |gen: &[usize], src: &TokenSequence| gen == src.ids();
    match (&rec.text, &data.examples[rec.source_a].text, &data.examples[rec.source_b].text) {
        (AugmentedText::Single(g), Text::Single(a), Text::Single(b)) => {
            g.is_empty() || copies(g, a) || copies(g, b)
        }
        (AugmentedText::Pair { premise, hypothesis }, _, _) => {
            premise.is_empty() || hypothesis.is_empty()
        }
        _ => false,
    }
}

#[derive(Serialize)]
struct Record<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    premise: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hypothesis: Option<String>,
    soft_label: &'a [f64],
    alpha: f64,
    source_a: usize,
    source_b: usize,
}

/// One JSON object per line.
pub fn to_jsonl(examples: &[AugmentedExample], vocab: &Vocabulary) -> Result<String> {
    let mut out = String::new();
    for ex in examples {
        let (text, premise, hypothesis) = match &ex.text {
            AugmentedText::Single(ids) => (Some(vocab.detokenize(ids)), None, None),
            AugmentedText::Pair {
                premise,
                hypothesis,
            } => (
                None,
                Some(vocab.detokenize(premise)),
                Some(vocab.detokenize(hypothesis)),
            ),
        };
        let rec = Record {
            text,
            premise,
            hypothesis,
            soft_label: ex.soft_label.probs(),
            alpha: ex.alpha.value(),
            source_a: ex.source_a,
            source_b: ex.source_b,
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&rec)?);
    }
    Ok(out)
}

/// Checks one parsed output record against the augmentation schema.
pub fn validate_record(value: &Value, task: TaskKind, num_classes: usize) -> Result<()> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Invalid("record is not an object".into()))?;
    let text_keys: &[&str] = match task {
        TaskKind::SentencePair => &["premise", "hypothesis"],
        _ => &["text"],
    };
    for key in text_keys {
        if !obj.get(*key).is_some_and(Value::is_string) {
            return Err(Error::Invalid(format!("missing string field `{key}`")));
        }
    }
    let allowed = ["text", "premise", "hypothesis", "soft_label", "alpha", "source_a", "source_b"];
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Invalid(format!("unexpected field `{k}`")));
    }
    let probs: Vec<f64> = obj
        .get("soft_label")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Invalid("missing array field `soft_label`".into()))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| Error::Invalid("non-numeric soft_label entry".into())))
        .collect::<Result<_>>()?;
    if probs.len() != num_classes {
        return Err(Error::Invalid(format!(
            "soft_label has {} entries, expected {num_classes}",
            probs.len()
        )));
    }
    SoftLabel::new(probs)?;
    let alpha = obj
        .get("alpha")
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Invalid("missing numeric field `alpha`".into()))?;
    MixRatio::new(alpha)?;
    for key in ["source_a", "source_b"] {
        if !obj.get(key).is_some_and(Value::is_u64) {
            return Err(Error::Invalid(format!("missing index field `{key}`")));
        }
    }
    Ok(())
}

/// Reads augmented JSONL back as classifier training items.
pub fn read_augmented_jsonl(
    contents: &str,
    task: TaskKind,
    vocab: &Vocabulary,
    max_len: usize,
    num_classes: usize,
) -> Result<Vec<(Vec<usize>, SoftLabel)>> {
    let mut out = Vec::new();
    for (i, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let wrap = |e: Error| Error::Parse {
            path: "<augmented>".into(),
            line: i + 1,
            message: e.to_string(),
        };
        let value: Value = serde_json::from_str(line).map_err(|e| wrap(e.into()))?;
        validate_record(&value, task, num_classes).map_err(wrap)?;
        let ids_of = |key: &str| -> Vec<usize> {
            let text = value[key].as_str().unwrap_or_default();
            text.split_whitespace()
                .take(max_len)
                .map(|t| vocab.id(t).unwrap_or(crate::corpus::UNK))
                .collect()
        };
        let ids = match task {
            TaskKind::SentencePair => {
                let mut ids = ids_of("premise");
                ids.push(crate::corpus::EOS);
                ids.extend(ids_of("hypothesis"));
                ids
            }
            _ => ids_of("text"),
        };
        let probs = value["soft_label"]
            .as_array()
            .expect("validated")
            .iter()
            .map(|v| v.as_f64().expect("validated"))
            .collect();
        out.push((ids, SoftLabel::new(probs).map_err(wrap)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn alpha(x: f64) -> MixRatio {
        MixRatio::new(x).unwrap()
    }

    #[test]
    fn interpolation_examples() {
        let l = |c| Label::Class(c);
        let y = interpolate_labels(&l(0), &l(1), alpha(1.0), 2).unwrap();
        assert_eq!(y.probs(), &[1.0, 0.0]);
        let y = interpolate_labels(&l(0), &l(1), alpha(0.5), 2).unwrap();
        assert_eq!(y.probs(), &[0.5, 0.5]);
        let y = interpolate_labels(&l(2), &l(0), alpha(0.7), 3).unwrap();
        assert!((y.probs()[0] - 0.3).abs() < 1e-12);
        assert_eq!(y.probs()[1], 0.0);
        assert!((y.probs()[2] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn interpolation_dimension_mismatch() {
        let a = SoftLabel::new(vec![0.5, 0.5]).unwrap();
        let b = SoftLabel::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(mix_soft(&a, &b, alpha(0.5)).is_err());
        assert!(interpolate_labels(&Label::Class(3), &Label::Class(0), alpha(0.5), 2).is_err());
    }

    #[test]
    fn literal_orientation_swaps_weights() {
        let a = SoftLabel::one_hot(0, 2).unwrap();
        let b = SoftLabel::one_hot(1, 2).unwrap();
        let y = oriented_mix(&a, &b, alpha(0.8), LabelOrientation::Literal).unwrap();
        assert!((y.probs()[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn sharpen_examples() {
        let y = SoftLabel::new(vec![0.6, 0.4]).unwrap();
        assert_eq!(sharpen(&y, 1.0).unwrap(), y);
        let hard = sharpen(&y, 0.01).unwrap();
        assert!((hard.probs()[0] - 1.0).abs() < 1e-6 && hard.probs()[1] < 1e-6);
        let half = sharpen(&y, 0.5).unwrap();
        assert!((half.probs()[0] - 0.36 / 0.52).abs() < 1e-12);
        assert!((half.probs()[1] - 0.16 / 0.52).abs() < 1e-12);
        assert!(sharpen(&y, 0.0).is_err());
        let tied = SoftLabel::new(vec![0.4, 0.4, 0.2]).unwrap();
        let s = sharpen(&tied, 0.3).unwrap();
        assert_eq!(s.probs()[0], s.probs()[1]);
    }

    struct Fixed {
        hash: String,
        logits: Vec<f64>,
    }

    impl Predictor for Fixed {
        fn num_classes(&self) -> usize {
            self.logits.len()
        }
        fn vocab_hash(&self) -> &str {
            &self.hash
        }
        fn predict_proba(&self, _: &[usize]) -> Vec<f64> {
            let z: f64 = self.logits.iter().map(|v| v.exp()).sum();
            self.logits.iter().map(|v| v.exp() / z).collect()
        }
    }

    #[test]
    fn teacher_labels() {
        let vocab = Vocabulary::with_content(["a"]).unwrap();
        let t = Fixed {
            hash: vocab.hash(),
            logits: vec![2.0, 0.0],
        };
        let y = teacher_label(&[5], &vocab, &t).unwrap();
        assert!((y.probs()[0] - 0.8807971).abs() < 1e-6);
        assert!((y.probs()[1] - 0.1192029).abs() < 1e-6);
        let u = Fixed {
            hash: vocab.hash(),
            logits: vec![0.0; 3],
        };
        assert_eq!(teacher_label(&[5], &vocab, &u).unwrap(), SoftLabel::uniform(3));
        let other = Vocabulary::with_content(["b"]).unwrap();
        assert!(matches!(
            teacher_label(&[5], &other, &t),
            Err(Error::VocabMismatch { .. })
        ));
    }

    #[test]
    fn alpha_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = AlphaDistribution::Choice(vec![0.0, 1.0]).sample(&mut rng).unwrap();
            assert!(a.value() == 0.0 || a.value() == 1.0);
            let b = AlphaDistribution::Beta { a: 0.4, b: 0.4 }.sample(&mut rng).unwrap();
            assert!((0.0..=1.0).contains(&b.value()));
        }
        assert!(AlphaDistribution::Choice(vec![]).sample(&mut rng).is_err());
    }

    #[test]
    fn record_schema() {
        let good: Value = serde_json::from_str(
            r#"{"text":"a b","soft_label":[0.25,0.75],"alpha":0.3,"source_a":1,"source_b":0}"#,
        )
        .unwrap();
        validate_record(&good, TaskKind::SingleSentence, 2).unwrap();
        assert!(validate_record(&good, TaskKind::SingleSentence, 3).is_err());
        assert!(validate_record(&good, TaskKind::SentencePair, 2).is_err());
        let bad: Value = serde_json::from_str(
            r#"{"text":"a","soft_label":[0.5,0.6],"alpha":0.3,"source_a":1,"source_b":0}"#,
        )
        .unwrap();
        assert!(validate_record(&bad, TaskKind::SingleSentence, 2).is_err());
    }

    proptest! {
        #[test]
        fn swap_identity_is_exact(p in 0.0f64..1.0, q in 0.0f64..1.0, a in 0.0f64..=1.0) {
            let ya = SoftLabel::new(vec![p, 1.0 - p]).unwrap();
            let yb = SoftLabel::new(vec![q, 1.0 - q]).unwrap();
            let lhs = mix_soft(&ya, &yb, alpha(a)).unwrap();
            let rhs = mix_soft(&yb, &ya, alpha(1.0 - a)).unwrap();
            for (x, y) in lhs.probs().iter().zip(rhs.probs()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
            prop_assert!(lhs.is_on_simplex());
        }

        #[test]
        fn sharpen_keeps_argmax(raw in prop::collection::vec(0.01f64..1.0, 2..6), t in 0.05f64..5.0) {
            let z: f64 = raw.iter().sum();
            let y = SoftLabel::new(raw.iter().map(|v| v / z).collect()).unwrap();
            let s = sharpen(&y, t).unwrap();
            prop_assert!(s.is_on_simplex());
            prop_assert_eq!(s.argmax(), y.argmax());
        }
    }
}
