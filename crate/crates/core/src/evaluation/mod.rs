//! Unigram precision, the mixing-ratio sweep, and a small downstream
//! classifier harness for comparing augmentation methods.

pub mod classifier;
pub mod experiment;
pub mod metrics;
pub mod sweep;

pub use classifier::{
    evaluate_classifier, train_classifier, train_classifier_hard, ClassifierConfig,
    ClassifierModel, Evaluation, Predictor, TrainedClassifier,
};
pub use experiment::{
    experiment_suite, k_shot_indices, ExperimentConfig, ExperimentResults, Method, PolicySpec,
    ResultRow, Shots, SummaryRow,
};
pub use metrics::{monotonicity_score, spearman, unigram_precision, Correlation, MonotonicityScore};
pub use sweep::{alpha_sweep, alpha_sweep_parallel, PrecisionCurve};
