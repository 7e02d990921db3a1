use serde::{Deserialize, Serialize};

use crate::chess::{GameStatus, Move, Position};
use crate::data::{GameRecord, Termination, TimeControl};

use super::vocab::*;
use super::TokenError;

/// `<bos>`, the two Elo slots (white then black) and the time control.
pub const HEADER_LEN: usize = 4;
/// Sequence index of the white and black Elo slots.
pub const ELO_SLOTS: [usize; 2] = [1, 2];

/// A game as a token sequence plus the Elo ratings that feed the two slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameTokens {
    pub ids: Vec<TokenId>,
    pub white_elo: f32,
    pub black_elo: f32,
}

impl GameTokens {
    pub fn elo(&self) -> [f32; 2] {
        [self.white_elo, self.black_elo]
    }
}

/// Header for a game that has not started yet.
pub fn header(tc: TimeControl) -> [TokenId; HEADER_LEN] {
    // The slot ids are placeholders; the model replaces their embedding.
    [BOS, ELO_WEAK, ELO_WEAK, time_control_id(tc)]
}

pub fn encode_moves(moves: &[Move]) -> Result<Vec<TokenId>, TokenError> {
    let vocab = Vocab::get();
    moves
        .iter()
        .map(|&m| vocab.move_id(m).ok_or(TokenError::NotInVocab(m.to_string())))
        .collect()
}

pub fn encode_game(rec: &GameRecord) -> Result<GameTokens, TokenError> {
    let mut ids = header(rec.time_control).to_vec();
    ids.extend(encode_moves(&rec.moves)?);
    ids.extend(termination_id(rec.termination));
    Ok(GameTokens {
        ids,
        white_elo: rec.white_elo as f32,
        black_elo: rec.black_elo as f32,
    })
}

/// What can be recovered from a token sequence alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedGame {
    pub white_elo: f32,
    pub black_elo: f32,
    /// `None` for controls folded into `<tc_other>`.
    pub time_control: Option<TimeControl>,
    pub moves: Vec<Move>,
    pub termination: Termination,
    pub outcome: i8,
}

/// Outcome implied by a termination token in the final position. Resigning
/// and flagging are attributed to the side to move.
pub fn resolve_termination(id: TokenId, last: &Position) -> Result<(Termination, i8), TokenError> {
    let mover = last.side_to_move();
    let loss = -(mover.sign() as i8);
    Ok(match id {
        CHECKMATE => match last.game_status() {
            GameStatus::Checkmate { winner } => (Termination::Checkmate, winner.sign() as i8),
            _ => return Err(TokenError::Malformed("<checkmate> without mate on the board".into())),
        },
        RESIGN => (Termination::Resignation(mover), loss),
        TIMEOUT => {
            let outcome = if last.has_mating_material(mover.opposite()) { loss } else { 0 };
            (Termination::Timeout(mover), outcome)
        }
        DRAW if last.game_status().is_draw() => (Termination::RuleDraw, 0),
        DRAW => (Termination::DrawAgreed, 0),
        ABANDONED => (Termination::Abandoned, 0),
        _ => return Err(TokenError::Malformed(format!("token {id} is not a termination"))),
    })
}

pub fn decode_tokens(game: &GameTokens) -> Result<DecodedGame, TokenError> {
    let ids = &game.ids;
    if ids.len() < HEADER_LEN || ids[0] != BOS {
        return Err(TokenError::Malformed("missing header".into()));
    }
    let tc_id = ids[3];
    if tc_id != TC_OTHER && time_control_of(tc_id).is_none() {
        return Err(TokenError::Malformed("fourth token is not a time control".into()));
    }
    let vocab = Vocab::get();
    let mut pos = Position::startpos();
    let mut moves = Vec::new();
    let mut end = None;
    for (i, &id) in ids[HEADER_LEN..].iter().enumerate() {
        if let Some(m) = vocab.id_move(id) {
            if end.is_some() {
                return Err(TokenError::Malformed("move after termination".into()));
            }
            pos = pos.apply_move(m)?;
            moves.push(m);
        } else if is_termination(id) && HEADER_LEN + i == ids.len() - 1 {
            end = Some(resolve_termination(id, &pos)?);
        } else {
            return Err(TokenError::Malformed(format!("unexpected token {}", vocab.token(id))));
        }
    }
    let (termination, outcome) = end.unwrap_or((Termination::Unterminated, 0));
    Ok(DecodedGame {
        white_elo: game.white_elo,
        black_elo: game.black_elo,
        time_control: time_control_of(tc_id),
        moves,
        termination,
        outcome,
    })
}

/// One training sequence with next-token targets and per-head masks.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub tokens: Vec<TokenId>,
    pub elo: [f32; 2],
    pub targets: Vec<TokenId>,
    pub policy_mask: Vec<bool>,
    pub time_target: Vec<f32>,
    pub time_mask: Vec<bool>,
    pub value_target: Vec<f32>,
    pub value_mask: Vec<bool>,
    /// Ply of the move predicted at each position (the move count for a
    /// termination target), or -1 where nothing is predicted.
    pub ply: Vec<i32>,
}

impl Example {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Body tokens per window when a game exceeds `context` input positions.
fn window_width(context: usize) -> usize {
    assert!(context > HEADER_LEN + 1, "context too short");
    context - (HEADER_LEN - 1)
}

fn window_stride(context: usize) -> usize {
    (window_width(context) / 2).max(1)
}

/// First body index of the window in which body token `q` is a trained
/// target. Inference on long games uses the same window so that positions
/// are seen exactly as in training.
pub fn window_start(q: usize, context: usize) -> usize {
    let w = window_width(context);
    if q < w {
        return 0;
    }
    let stride = window_stride(context);
    ((q - w) / stride + 1) * stride
}

/// Model input used to predict body token `q` given the body so far.
pub fn inference_input(header: &[TokenId; HEADER_LEN], body: &[TokenId], context: usize) -> Vec<TokenId> {
    let q = body.len();
    let s = window_start(q, context);
    let mut out = header.to_vec();
    out.extend_from_slice(&body[s..q]);
    out
}

/// Split a game into training sequences of at most `context` positions.
/// Long games are cut into half-overlapping windows that all keep the
/// header; targets already covered by an earlier window are masked.
pub fn training_examples(rec: &GameRecord, context: usize) -> Result<Vec<Example>, TokenError> {
    let game = encode_game(rec)?;
    let head: [TokenId; HEADER_LEN] = game.ids[..HEADER_LEN].try_into().expect("header present");
    let body = &game.ids[HEADER_LEN..];
    let n_moves = rec.moves.len();
    let value_known = rec.termination != Termination::Unterminated;
    let w = window_width(context);
    let stride = window_stride(context);

    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + w).min(body.len());
        let first_new = if start == 0 { 0 } else { start + w - stride };
        let mut tokens = head.to_vec();
        tokens.extend_from_slice(&body[start..end.saturating_sub(1).max(start)]);
        let n = tokens.len();
        let mut ex = Example {
            tokens,
            elo: game.elo(),
            targets: vec![PAD; n],
            policy_mask: vec![false; n],
            time_target: vec![0.0; n],
            time_mask: vec![false; n],
            value_target: vec![0.0; n],
            value_mask: vec![false; n],
            ply: vec![-1; n],
        };
        for q in start..end {
            // Position predicting body[q]: the TC slot for the window's first
            // body token, otherwise the previous body token.
            let i = HEADER_LEN - 1 + (q - start);
            if i >= n {
                break;
            }
            ex.targets[i] = body[q];
            ex.ply[i] = q as i32;
            if q < first_new {
                continue;
            }
            ex.policy_mask[i] = true;
            if value_known {
                ex.value_target[i] = rec.outcome as f32;
                ex.value_mask[i] = true;
            }
            if q < n_moves {
                if let Some(t) = rec.think_times.as_ref() {
                    ex.time_target[i] = t[q];
                    ex.time_mask[i] = true;
                }
            }
        }
        out.push(ex);
        if end >= body.len() {
            break;
        }
        start += stride;
    }
    Ok(out)
}
