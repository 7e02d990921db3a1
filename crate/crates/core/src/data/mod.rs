//! Game logs: PGN ingest, records, Elo-binned dataset construction and
//! generators for random and synthetic corpora.

mod dataset;
mod pgn;
mod random;
mod record;
mod synth;

use thiserror::Error;

use crate::chess::ChessError;

pub use dataset::{
    build_dataset, decode_line, eligibility, encode_line, read_dataset, read_split, write_dataset, write_split, BinStats,
    Dataset, DatasetConfig, DatasetEntry, DatasetManifest,
};
pub use pgn::{
    format_clock, parse_clock_comment, parse_pgn, split_games, think_times_from_clocks, write_pgn, PgnDiagnostic,
    PgnErrorKind, PgnParse,
};
pub use random::{random_games, RANDOM_GAME_ELO, RANDOM_GAME_TC};
pub use record::{GameRecord, Termination, TimeControl};
pub use synth::{synthesize_game, synthesize_games, synthesize_pgn, SynthConfig};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad time control {0:?}")]
    BadTimeControl(String),
    #[error("inconsistent record: {0}")]
    Inconsistent(String),
    #[error("bad dataset config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Chess(#[from] ChessError),
}
