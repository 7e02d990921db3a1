//! Offline metrics, performance ratings and self-play calibration.

mod elo;
mod metrics;
mod report;
mod selfplay;

use thiserror::Error;

pub use elo::{performance_elo, rating_difference, skill_calibration, CalibrationBin, CalibrationReport, GameResult, CALIBRATION_BIN};
pub use metrics::{
    evaluate_entries, evaluate_game, evaluate_games, legality_metrics, move_matching, move_matching_with, pearson,
    progress_bucket, resignation_rates, time_correlation, time_pairs, value_reliability, LegalityStratum, MoveCategory,
    MoveMatching, PositionEval, Proportion, ResignationReport, Source, TimeBucket, TimeReport, ValueBucket, ELO_BIN,
    PROGRESS_BUCKETS, TIME_EDGES,
};
pub use report::{metric_report, MetricReport};
pub use selfplay::{
    default_ladder, play_game, play_match, selfplay_calibration, LadderGame, MatchResult, SelfPlayConfig,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("a series has zero variance")]
    DegenerateVariance,
    #[error("{0}")]
    Empty(String),
    #[error(transparent)]
    Chess(#[from] crate::chess::ChessError),
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
}
