use linda_core::augmentation::{augment_dataset, to_jsonl, validate_record, AugmentOptions, AugmentedText, LabelPolicy};
use linda_core::corpus::{build_vocabulary, tokenize, Dataset, Label, LabeledExample, TaskKind, Text, TokenSequence};
use linda_core::decoding::{interpolate_text, DecodeConfig, Strategy};
use linda_core::model::checkpoint;
use linda_core::synthetic::toy_corpus;
use linda_core::training::train;
use linda_core::{InterpModel, MixRatio, ModelConfig, TrainingConfig, Vocabulary};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config(vocab_size: usize) -> ModelConfig {
    ModelConfig {
        vocab_size,
        d_model: 16,
        n_heads: 2,
        encoder_layers: 1,
        decoder_layers: 1,
        ffn_dim: 32,
        init_sigma: 1.0,
    }
}

fn setup() -> (Vocabulary, Vec<TokenSequence>) {
    let lines = toy_corpus(200, 3);
    let vocab = build_vocabulary(&lines, 500).unwrap();
    let seqs = lines.iter().map(|l| tokenize(l, &vocab, 64).unwrap()).collect();
    (vocab, seqs)
}

#[test]
fn short_training_reduces_loss_and_survives_a_checkpoint() {
    let (vocab, seqs) = setup();
    let mut model = InterpModel::new(small_config(vocab.len()), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let config = TrainingConfig {
        steps: 60,
        batch_size: 4,
        warmup_steps: 5,
        ..TrainingConfig::default()
    };
    let log = train(&mut model, &seqs, &config).unwrap();
    assert!(log.mean_loss(50..60) < log.mean_loss(0..10));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    checkpoint::save(&path, &model, &vocab, 60).unwrap();
    let restored = checkpoint::load_with_vocab(&path, &vocab).unwrap().model;
    let cfg = DecodeConfig::beam(3);
    for alpha in [0.0, 0.4, 1.0] {
        let alpha = MixRatio::new(alpha).unwrap();
        let a = interpolate_text(&model, &seqs[0], &seqs[1], alpha, &cfg).unwrap();
        let b = interpolate_text(&restored, &seqs[0], &seqs[1], alpha, &cfg).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn pair_task_augmentation_shares_the_ratio() {
    let (vocab, seqs) = setup();
    let model = InterpModel::new(small_config(vocab.len()), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let data = Dataset {
        examples: (0..8)
            .map(|i| LabeledExample {
                text: Text::Pair {
                    premise: seqs[2 * i].clone(),
                    hypothesis: seqs[2 * i + 1].clone(),
                },
                label: Label::Class(i % 3),
            })
            .collect(),
        num_classes: 3,
        task_kind: TaskKind::SentencePair,
    };
    let cfg = DecodeConfig {
        max_decode_length: Some(8),
        ..DecodeConfig::greedy()
    };
    let recs = augment_dataset(&data, &model, &vocab, LabelPolicy::Interpolated, &cfg, &AugmentOptions::default()).unwrap();
    assert_eq!(recs.len(), 8);
    for (i, r) in recs.iter().enumerate() {
        assert_eq!(r.source_a, i);
        assert!(matches!(r.text, AugmentedText::Pair { .. }));
        assert_eq!(r.decode.len(), 2);
        let ya = r.alpha.value();
        let ca = data.examples[r.source_a].label.class();
        let cb = data.examples[r.source_b].label.class();
        let expected = if ca == cb { 1.0 } else { ya };
        assert!((r.soft_label.probs()[ca] - expected).abs() < 1e-12);
    }
    for line in to_jsonl(&recs, &vocab).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        validate_record(&v, TaskKind::SentencePair, 3).unwrap();
        assert!(v.get("text").is_none());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn beam_never_scores_below_greedy(
        seed in 0u64..1000,
        a in prop::collection::vec(5usize..20, 1..6),
        b in prop::collection::vec(5usize..20, 1..6),
        alpha in 0.0f64..=1.0,
        beam in 2usize..5,
    ) {
        let model = InterpModel::new(small_config(20), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let (a, b) = (TokenSequence::new(a).unwrap(), TokenSequence::new(b).unwrap());
        let alpha = MixRatio::new(alpha).unwrap();
        let cap = Some(8);
        let greedy = interpolate_text(&model, &a, &b, alpha, &DecodeConfig { max_decode_length: cap, ..DecodeConfig::greedy() }).unwrap();
        let beamed = interpolate_text(&model, &a, &b, alpha, &DecodeConfig { max_decode_length: cap, ..DecodeConfig::beam(beam) }).unwrap();
        prop_assert!(beamed.total_logprob >= greedy.total_logprob - 1e-12);
        let sampled = interpolate_text(&model, &a, &b, alpha, &DecodeConfig {
            strategy: Strategy::Sample,
            max_decode_length: cap,
            ..DecodeConfig::default()
        }).unwrap();
        prop_assert!(sampled.tokens.len() <= 8);
    }
}
