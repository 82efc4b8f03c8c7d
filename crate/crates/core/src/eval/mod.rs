//! Scoring: entity accuracy, external COMET, their harmonic mean, and the
//! label-similarity correlation analysis.

mod analysis;
mod meta;
pub mod metrics;
mod report;
mod scorer;

pub use analysis::{analyze_label_similarity, CorrelationEntry, CorrelationReport};
pub use meta::{
    gold_surfaces, meta_aggregate, meta_match, normalize_surface, MetaError, MetaOutcome,
};
pub use metrics::{
    average_ranks, edit_distance, harmonic_mean, levenshtein_ratio, pearson, point_biserial_r,
    spearman_rho, DegenerateInput,
};
pub use report::{
    evaluate, format_method_table, EntityMap, Evaluation, LanguageCounts, LanguageScores,
    PredictionLine, ScoreReport,
};
pub use scorer::{comet_scores, ExternalScorer, HttpScorer, ScorePair, ScorerError};
