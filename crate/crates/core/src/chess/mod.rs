//! Chess rules: board representation, legal move generation, game
//! termination and the perft oracle.

pub mod attacks;
mod movegen;
mod perft;
mod position;
mod san;
mod status;
mod types;

use thiserror::Error;

pub use perft::{perft, perft_divide};
pub use position::{Position, START_FEN};
pub use status::GameStatus;
pub use types::{CastlingRights, Color, Move, Piece, PieceKind, Square};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ChessError {
    #[error("illegal move {uci} in position {fen}")]
    IllegalMove { uci: String, fen: String },
    #[error("malformed UCI move {0:?}")]
    BadUci(String),
    #[error("malformed square {0:?}")]
    BadSquare(String),
    #[error("invalid FEN ({0})")]
    BadFen(String),
    #[error("cannot resolve SAN {san:?} in position {fen}")]
    BadSan { san: String, fen: String },
}

/// Replay UCI moves from the initial position, returning every position
/// (the initial one included).
pub fn replay(moves: &[Move]) -> Result<Vec<Position>, ChessError> {
    let mut positions = Vec::with_capacity(moves.len() + 1);
    let mut pos = Position::startpos();
    for &m in moves {
        let next = pos.apply_move(m)?;
        positions.push(pos);
        pos = next;
    }
    positions.push(pos);
    Ok(positions)
}
