use std::collections::HashMap;
use std::sync::OnceLock;

use serde::Serialize;

use crate::chess::{Move, PieceKind, Square};
use crate::data::{Termination, TimeControl};

pub type TokenId = u32;

/// Move tokens: every queen- or knight-shaped (from, to) pair plus the
/// under- and full promotions from the seventh to the eighth rank.
pub const N_MOVE_TOKENS: usize = 1968;

pub const SPECIAL_TOKENS: [&str; 18] = [
    "<pad>",
    "<bos>",
    "<elo_weak>",
    "<elo_strong>",
    "<resign>",
    "<checkmate>",
    "<timeout>",
    "<draw>",
    "<abandoned>",
    "<tc_60+0>",
    "<tc_120+1>",
    "<tc_180+0>",
    "<tc_180+2>",
    "<tc_300+0>",
    "<tc_300+3>",
    "<tc_600+0>",
    "<tc_600+5>",
    "<tc_other>",
];

pub const VOCAB_SIZE: usize = N_MOVE_TOKENS + SPECIAL_TOKENS.len();

const fn special(i: usize) -> TokenId {
    (N_MOVE_TOKENS + i) as TokenId
}

pub const PAD: TokenId = special(0);
pub const BOS: TokenId = special(1);
pub const ELO_WEAK: TokenId = special(2);
pub const ELO_STRONG: TokenId = special(3);
pub const RESIGN: TokenId = special(4);
pub const CHECKMATE: TokenId = special(5);
pub const TIMEOUT: TokenId = special(6);
pub const DRAW: TokenId = special(7);
pub const ABANDONED: TokenId = special(8);
const TC_FIRST: usize = 9;
pub const TC_OTHER: TokenId = special(17);

/// Token emitted after the last move of a game, if it has a known ending.
pub fn termination_token(t: Termination) -> Option<&'static str> {
    termination_id(t).map(|id| SPECIAL_TOKENS[id as usize - N_MOVE_TOKENS])
}

pub fn termination_id(t: Termination) -> Option<TokenId> {
    match t {
        Termination::Checkmate => Some(CHECKMATE),
        Termination::Resignation(_) => Some(RESIGN),
        Termination::Timeout(_) => Some(TIMEOUT),
        Termination::DrawAgreed | Termination::RuleDraw => Some(DRAW),
        Termination::Abandoned => Some(ABANDONED),
        Termination::Unterminated => None,
    }
}

pub fn is_termination(id: TokenId) -> bool {
    (RESIGN..=ABANDONED).contains(&id)
}

pub fn is_move(id: TokenId) -> bool {
    (id as usize) < N_MOVE_TOKENS
}

/// Token for a time control; unlisted controls share `<tc_other>`.
pub fn time_control_id(tc: TimeControl) -> TokenId {
    let name = format!("<tc_{tc}>");
    SPECIAL_TOKENS[TC_FIRST..TC_FIRST + 8]
        .iter()
        .position(|t| *t == name)
        .map(|i| special(TC_FIRST + i))
        .unwrap_or(TC_OTHER)
}

pub fn time_control_of(id: TokenId) -> Option<TimeControl> {
    if id == TC_OTHER || !(special(TC_FIRST)..TC_OTHER).contains(&id) {
        return None;
    }
    let name = SPECIAL_TOKENS[id as usize - N_MOVE_TOKENS];
    name.trim_start_matches("<tc_").trim_end_matches('>').parse().ok()
}

/// The fixed token table and its reverse index.
#[derive(Debug, Serialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, TokenId>,
    #[serde(skip)]
    moves: Vec<Move>,
}

fn move_strings() -> Vec<String> {
    let mut out = Vec::with_capacity(N_MOVE_TOKENS);
    for from in Square::all() {
        for to in Square::all() {
            if from == to {
                continue;
            }
            let df = (to.file() as i32 - from.file() as i32).abs();
            let dr = (to.rank() as i32 - from.rank() as i32).abs();
            let queen = df == 0 || dr == 0 || df == dr;
            let knight = (df == 1 && dr == 2) || (df == 2 && dr == 1);
            if queen || knight {
                out.push(format!("{from}{to}"));
            }
            let promo = df <= 1 && ((from.rank() == 6 && to.rank() == 7) || (from.rank() == 1 && to.rank() == 0));
            if promo {
                for p in PieceKind::PROMOTIONS {
                    out.push(format!("{from}{to}{}", p.char()));
                }
            }
        }
    }
    out.sort();
    out
}

impl Vocab {
    fn build() -> Vocab {
        let mut tokens = move_strings();
        assert_eq!(tokens.len(), N_MOVE_TOKENS);
        let moves = tokens.iter().map(|t| t.parse().expect("vocab move parses")).collect();
        tokens.extend(SPECIAL_TOKENS.iter().map(|s| s.to_string()));
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as TokenId)).collect();
        Vocab { tokens, index, moves }
    }

    pub fn get() -> &'static Vocab {
        static VOCAB: OnceLock<Vocab> = OnceLock::new();
        VOCAB.get_or_init(Vocab::build)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn move_id(&self, m: Move) -> Option<TokenId> {
        // Sorted table, so a binary search on the UCI string suffices.
        let key = m.to_string();
        self.tokens[..N_MOVE_TOKENS].binary_search(&key).ok().map(|i| i as TokenId)
    }

    pub fn id_move(&self, id: TokenId) -> Option<Move> {
        self.moves.get(id as usize).copied()
    }

    /// JSON description for clients: the ordered token list plus the
    /// boundaries between move and special tokens.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "size": self.len(),
            "n_moves": N_MOVE_TOKENS,
            "tokens": self.tokens,
            "specials": SPECIAL_TOKENS
                .iter()
                .enumerate()
                .map(|(i, s)| (s.to_string(), serde_json::json!(N_MOVE_TOKENS + i)))
                .collect::<serde_json::Map<_, _>>(),
        })
    }
}
