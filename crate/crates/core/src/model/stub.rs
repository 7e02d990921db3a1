use std::sync::Arc;

use crate::chess::{Move, Position};
use crate::data::TimeControl;
use crate::tokens::{TokenId, Vocab};

use super::{EvalSession, Evaluator, Prediction};

type PredictFn = dyn Fn(&Position, &[Move]) -> Prediction + Send + Sync;

/// Evaluator defined by a function of the current position and move list.
/// Handy for tests and scripted opponents.
#[derive(Clone)]
pub struct PositionEvaluator {
    f: Arc<PredictFn>,
}

impl PositionEvaluator {
    pub fn new(f: impl Fn(&Position, &[Move]) -> Prediction + Send + Sync + 'static) -> Self {
        PositionEvaluator { f: Arc::new(f) }
    }

    /// Uniform over the whole vocabulary, fixed time and value.
    pub fn uniform(time: f32, value: f32) -> Self {
        PositionEvaluator::new(move |_, _| {
            let v = Vocab::get().len();
            Prediction {
                policy: vec![1.0 / v as f32; v],
                time,
                value,
            }
        })
    }
}

pub struct PositionSession {
    f: Arc<PredictFn>,
    body: Vec<TokenId>,
    moves: Vec<Move>,
    pos: Position,
}

impl Evaluator for PositionEvaluator {
    type Session = PositionSession;

    fn session(&self, _tc: TimeControl, _elo: [f32; 2]) -> PositionSession {
        PositionSession {
            f: self.f.clone(),
            body: Vec::new(),
            moves: Vec::new(),
            pos: Position::startpos(),
        }
    }
}

impl EvalSession for PositionSession {
    fn push(&mut self, token: TokenId) {
        self.body.push(token);
        if let Some(m) = Vocab::get().id_move(token) {
            if self.pos.is_legal(m) {
                self.pos = self.pos.play(m);
                self.moves.push(m);
            }
        }
    }

    fn predict(&mut self, extra: &[TokenId]) -> Prediction {
        let vocab = Vocab::get();
        let mut pos = self.pos.clone();
        let mut moves = self.moves.clone();
        for &t in extra {
            if let Some(m) = vocab.id_move(t) {
                if pos.is_legal(m) {
                    pos = pos.play(m);
                    moves.push(m);
                }
            }
        }
        (self.f)(&pos, &moves)
    }

    fn body(&self) -> &[TokenId] {
        &self.body
    }
}
