use serde::{Deserialize, Serialize};

use super::attacks::squares;
use super::position::Position;
use super::types::{Color, PieceKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameStatus {
    Ongoing,
    Checkmate { winner: Color },
    Stalemate,
    DrawByRepetition,
    DrawBy50Move,
    DrawByInsufficientMaterial,
}

impl GameStatus {
    pub fn is_over(self) -> bool {
        self != GameStatus::Ongoing
    }

    pub fn is_draw(self) -> bool {
        matches!(
            self,
            GameStatus::Stalemate
                | GameStatus::DrawByRepetition
                | GameStatus::DrawBy50Move
                | GameStatus::DrawByInsufficientMaterial
        )
    }

    /// Outcome from white's perspective, `None` while the game is ongoing.
    pub fn outcome(self) -> Option<i8> {
        match self {
            GameStatus::Ongoing => None,
            GameStatus::Checkmate { winner: Color::White } => Some(1),
            GameStatus::Checkmate { winner: Color::Black } => Some(-1),
            _ => Some(0),
        }
    }
}

impl Position {
    /// Threefold repetition and the 50-move rule terminate the game
    /// automatically; fivefold/75-move rules are not modelled.
    pub fn game_status(&self) -> GameStatus {
        if !self.has_legal_move() {
            return if self.in_check() {
                GameStatus::Checkmate {
                    winner: self.side_to_move().opposite(),
                }
            } else {
                GameStatus::Stalemate
            };
        }
        if self.repetition_count() >= 3 {
            return GameStatus::DrawByRepetition;
        }
        if self.halfmove_clock() >= 100 {
            return GameStatus::DrawBy50Move;
        }
        if self.insufficient_material() {
            return GameStatus::DrawByInsufficientMaterial;
        }
        GameStatus::Ongoing
    }

    /// Whether `color` keeps enough material to be credited with a win when
    /// the opponent flags: any pawn, rook or queen, or at least two minors.
    pub fn has_mating_material(&self, color: Color) -> bool {
        let heavy = self.pieces(color, PieceKind::Pawn)
            | self.pieces(color, PieceKind::Rook)
            | self.pieces(color, PieceKind::Queen);
        let minors = (self.pieces(color, PieceKind::Knight) | self.pieces(color, PieceKind::Bishop)).count_ones();
        heavy != 0 || minors >= 2
    }

    /// K v K, K+minor v K, and K+B v K+B with same-colored bishops.
    pub fn insufficient_material(&self) -> bool {
        let heavy = self.kind_bb(PieceKind::Pawn)
            | self.kind_bb(PieceKind::Rook)
            | self.kind_bb(PieceKind::Queen);
        if heavy != 0 {
            return false;
        }
        let knights = self.kind_bb(PieceKind::Knight);
        let bishops = self.kind_bb(PieceKind::Bishop);
        let minors = (knights | bishops).count_ones();
        match minors {
            0 | 1 => true,
            2 => {
                if knights != 0 {
                    return false;
                }
                let white = self.pieces(Color::White, PieceKind::Bishop);
                let black = self.pieces(Color::Black, PieceKind::Bishop);
                if white.count_ones() != 1 || black.count_ones() != 1 {
                    return false;
                }
                let colors: Vec<bool> = squares(bishops).map(|s| s.is_light()).collect();
                colors[0] == colors[1]
            }
            _ => false,
        }
    }
}
