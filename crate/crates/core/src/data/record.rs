use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chess::{self, Color, GameStatus, Move, Position};

use super::DataError;

/// Base clock and increment, both in whole seconds ("180+2").
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeControl {
    pub base: u32,
    pub increment: u32,
}

impl TimeControl {
    pub const fn new(base: u32, increment: u32) -> TimeControl {
        TimeControl { base, increment }
    }
}

impl fmt::Display for TimeControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.base, self.increment)
    }
}

impl FromStr for TimeControl {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DataError::BadTimeControl(s.to_string());
        let (base, inc) = s.split_once('+').ok_or_else(bad)?;
        Ok(TimeControl {
            base: base.trim().parse().map_err(|_| bad())?,
            increment: inc.trim().parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for TimeControl {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeControl {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// How a game ended. The color carried by `Resignation`/`Timeout` is the
/// side that resigned or lost on time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Checkmate,
    Resignation(Color),
    Timeout(Color),
    DrawAgreed,
    RuleDraw,
    Abandoned,
    /// Still in progress, or cut off without a result ("*").
    Unterminated,
}

/// One parsed game: metadata, moves, per-move think times and the outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub white_elo: i32,
    pub black_elo: i32,
    pub time_control: TimeControl,
    pub moves: Vec<Move>,
    /// Seconds spent before each move; `None` when the log had no clocks.
    pub think_times: Option<Vec<f32>>,
    /// Remaining clock (seconds) of the mover right after each move.
    pub clocks: Option<Vec<f32>>,
    /// White-perspective result: +1 white won, 0 draw, -1 black won.
    pub outcome: i8,
    pub termination: Termination,
}

impl GameRecord {
    pub fn mean_elo(&self) -> f64 {
        (self.white_elo as f64 + self.black_elo as f64) / 2.0
    }

    pub fn elo_of(&self, color: Color) -> i32 {
        match color {
            Color::White => self.white_elo,
            Color::Black => self.black_elo,
        }
    }

    /// Mover's remaining clock before each move, derived from the clock
    /// readings (the first move of each side starts from the base time).
    pub fn pre_move_clocks(&self) -> Option<Vec<f32>> {
        let clocks = self.clocks.as_ref()?;
        let base = self.time_control.base as f32;
        Some(
            (0..clocks.len())
                .map(|i| if i >= 2 { clocks[i - 2] } else { base })
                .collect(),
        )
    }

    /// Replay the moves, returning every position including the final one.
    pub fn positions(&self) -> Result<Vec<Position>, chess::ChessError> {
        chess::replay(&self.moves)
    }

    pub fn final_position(&self) -> Result<Position, chess::ChessError> {
        Ok(self.positions()?.pop().expect("replay yields at least one position"))
    }

    /// Check length alignment, legality and outcome/termination consistency.
    pub fn validate(&self) -> Result<(), DataError> {
        for (name, series) in [("think_times", &self.think_times), ("clocks", &self.clocks)] {
            if let Some(v) = series {
                if v.len() != self.moves.len() {
                    return Err(DataError::Inconsistent(format!(
                        "{name} has {} entries for {} moves",
                        v.len(),
                        self.moves.len()
                    )));
                }
            }
        }
        let last = self.final_position()?;
        let status = last.game_status();
        let bad = |why: &str| Err(DataError::Inconsistent(why.to_string()));
        match self.termination {
            Termination::Checkmate => match status {
                GameStatus::Checkmate { winner } => {
                    if self.outcome as f32 != winner.sign() {
                        return bad("checkmate outcome does not match the mating side");
                    }
                }
                _ => return bad("checkmate termination but final position is not mate"),
            },
            Termination::Resignation(side) => {
                if self.outcome as f32 != -side.sign() {
                    return bad("resigning side must lose");
                }
            }
            Termination::Timeout(side) => {
                if self.outcome != 0 && self.outcome as f32 != -side.sign() {
                    return bad("flagged side cannot win");
                }
            }
            Termination::DrawAgreed | Termination::RuleDraw => {
                if self.outcome != 0 {
                    return bad("draw with a decisive outcome");
                }
            }
            Termination::Abandoned | Termination::Unterminated => {}
        }
        if !(-1..=1).contains(&self.outcome) {
            return bad("outcome out of range");
        }
        Ok(())
    }

    /// PGN result string for the header and movetext.
    pub fn result_string(&self) -> &'static str {
        if self.termination == Termination::Unterminated {
            return "*";
        }
        match self.outcome {
            1 => "1-0",
            -1 => "0-1",
            _ => "1/2-1/2",
        }
    }
}
