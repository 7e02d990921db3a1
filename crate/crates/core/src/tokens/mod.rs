//! Token vocabulary, game encoding and the soft Elo interpolation.

mod encode;
mod vocab;

use thiserror::Error;

use crate::chess::ChessError;

pub use encode::{
    decode_tokens, encode_game, encode_moves, header, inference_input, resolve_termination, training_examples,
    window_start, DecodedGame, Example, GameTokens, ELO_SLOTS, HEADER_LEN,
};
pub use vocab::{
    is_move, is_termination, termination_id, termination_token, time_control_id, time_control_of, TokenId, Vocab,
    ABANDONED, BOS, CHECKMATE, DRAW, ELO_STRONG, ELO_WEAK, N_MOVE_TOKENS, PAD, RESIGN, SPECIAL_TOKENS, TC_OTHER,
    TIMEOUT, VOCAB_SIZE,
};

#[derive(Debug, Error)]
pub enum TokenError {
    #[error("move {0} has no token")]
    NotInVocab(String),
    #[error("malformed token sequence: {0}")]
    Malformed(String),
    #[error(transparent)]
    Chess(#[from] ChessError),
}

pub const SOFT_ELO_MIN: f64 = 500.0;
pub const SOFT_ELO_MAX: f64 = 3000.0;

/// Weight of the `<elo_weak>` embedding for rating `elo`; the remainder goes
/// to `<elo_strong>`. Ratings are clamped to [500, 3000].
pub fn soft_elo_weight(elo: f64) -> f64 {
    let k = elo.clamp(SOFT_ELO_MIN, SOFT_ELO_MAX);
    (SOFT_ELO_MAX - k) / (SOFT_ELO_MAX - SOFT_ELO_MIN)
}

/// Interpolated Elo embedding.
pub fn soft_elo_embedding<F: num_traits::Float>(elo: f64, weak: &[F], strong: &[F]) -> Vec<F> {
    assert_eq!(weak.len(), strong.len());
    let g = F::from(soft_elo_weight(elo)).expect("weight in [0, 1]");
    weak.iter().zip(strong).map(|(&w, &s)| g * w + (F::one() - g) * s).collect()
}
