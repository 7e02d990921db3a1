//! Playable engine configurations, the resignation rule and a UCI front.

mod uci;

use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chess::{ChessError, Color, Move, Position};
use crate::data::TimeControl;
use crate::model::{EvalSession, Evaluator, Prediction};
use crate::search::{run_mcts, SearchError, SearchParams, SearchResult};
use crate::tokens::{Vocab, RESIGN};

pub use uci::{uci_serve, UciOptions};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("the game is already over")]
    GameOver,
    #[error(transparent)]
    Chess(#[from] ChessError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Policy,
    Greedy,
    Search,
    AdaptiveSearch,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Policy, Variant::Greedy, Variant::Search, Variant::AdaptiveSearch];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Policy => "policy",
            Variant::Greedy => "greedy",
            Variant::Search => "search",
            Variant::AdaptiveSearch => "adaptive_search",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['-', ' '], "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm || (norm == "adaptive" && *v == Variant::AdaptiveSearch))
            .ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

/// Conditioning Elo used by the greedy configuration.
pub const GREEDY_ELO: f32 = 2500.0;
pub const RESIGN_THRESHOLD: f64 = -0.9;
/// Resignation is not considered before this ply.
pub const RESIGN_MIN_PLY: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub variant: Variant,
    /// Own conditioning Elo; `None` mirrors the opponent (greedy uses
    /// [`GREEDY_ELO`]).
    pub own_elo: Option<f32>,
    pub opponent_elo: f32,
    /// Sampling temperature for the policy variant; 0 is argmax.
    pub temperature: f64,
    pub search: SearchParams,
    pub resign_threshold: f64,
    pub resign_min_ply: usize,
    pub allow_resign: bool,
    /// Sleep before replying in live play to mimic human timing.
    pub ponder_realism: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            variant: Variant::Policy,
            own_elo: None,
            opponent_elo: 1500.0,
            temperature: 1.0,
            search: SearchParams::default(),
            resign_threshold: RESIGN_THRESHOLD,
            resign_min_ply: RESIGN_MIN_PLY,
            allow_resign: true,
            ponder_realism: false,
        }
    }
}

impl EngineConfig {
    /// Standard settings for a variant. `c_time` is only used by adaptive
    /// search.
    pub fn for_variant(variant: Variant, opponent_elo: f32, c_time: f64) -> Self {
        let search = match variant {
            Variant::AdaptiveSearch => SearchParams::adaptive(c_time),
            _ => SearchParams::fixed(50),
        };
        EngineConfig {
            variant,
            opponent_elo,
            temperature: if variant == Variant::Greedy { 0.0 } else { 1.0 },
            search,
            ..Default::default()
        }
    }

    pub fn conditioning_elo(&self) -> f32 {
        match (self.variant, self.own_elo) {
            (_, Some(e)) => e,
            (Variant::Greedy, None) => GREEDY_ELO,
            (_, None) => self.opponent_elo,
        }
    }

    /// [white, black] conditioning when the engine plays `color`.
    pub fn elo_pair(&self, color: Color) -> [f32; 2] {
        let own = self.conditioning_elo();
        match color {
            Color::White => [own, self.opponent_elo],
            Color::Black => [self.opponent_elo, own],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "move", rename_all = "snake_case")]
pub enum Action {
    Move(Move),
    Resign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineDecision {
    pub action: Action,
    /// Predicted think time, clamped to the remaining clock when known.
    pub ponder_seconds: f64,
    /// Value for the side to move.
    pub value: f64,
    pub resign_prob: f64,
    /// Most likely legal moves under the raw policy.
    pub top_moves: Vec<(Move, f64)>,
    pub search: Option<SearchResult>,
}

impl EngineDecision {
    pub fn n_sim(&self) -> Option<usize> {
        self.search.as_ref().map(|s| s.n_sim)
    }

    /// The move to play, or `None` on resignation.
    pub fn chosen_move(&self) -> Option<Move> {
        match self.action {
            Action::Move(m) => Some(m),
            Action::Resign => None,
        }
    }
}

/// Resign iff `<resign>` beats every legal move under the full-vocabulary
/// policy and the side-to-move value is below `threshold`.
pub fn should_resign(policy: &[f32], value: f64, legal: &[Move], threshold: f64) -> bool {
    let vocab = Vocab::get();
    let p_resign = policy.get(RESIGN as usize).copied().unwrap_or(0.0);
    let best_legal = legal
        .iter()
        .filter_map(|&m| vocab.move_id(m))
        .map(|id| policy.get(id as usize).copied().unwrap_or(0.0))
        .fold(0.0f32, f32::max);
    p_resign > best_legal && value < threshold
}

/// Delay before replying in live play: the predicted time, capped at a
/// tenth of the remaining clock.
pub fn ponder_delay(decision: &EngineDecision, remaining: Option<f64>) -> Duration {
    let mut t = decision.ponder_seconds.max(0.0);
    if let Some(r) = remaining {
        t = t.min(r.max(0.0) / 10.0);
    }
    Duration::from_secs_f64(if t.is_finite() { t } else { 0.0 })
}

fn legal_distribution(pred: &Prediction, legal: &[Move]) -> Vec<f64> {
    let vocab = Vocab::get();
    let raw: Vec<f64> = legal
        .iter()
        .map(|&m| {
            let id = vocab.move_id(m).expect("legal moves are in the vocabulary");
            let p = pred.policy.get(id as usize).copied().unwrap_or(0.0) as f64;
            if p.is_finite() && p > 0.0 {
                p
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|p| p / total).collect()
    } else {
        vec![1.0 / legal.len() as f64; legal.len()]
    }
}

fn argmax(xs: &[f64]) -> usize {
    // First maximum, so ties resolve by move order.
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn sample_tempered(p: &[f64], temperature: f64, rng: &mut impl Rng) -> usize {
    if temperature <= 0.0 {
        return argmax(p);
    }
    let w: Vec<f64> = p.iter().map(|&x| if x > 0.0 { x.powf(1.0 / temperature) } else { 0.0 }).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return argmax(p);
    }
    let mut x = rng.gen::<f64>() * total;
    let mut idx = w.iter().rposition(|&v| v > 0.0).unwrap_or(0);
    for (i, &v) in w.iter().enumerate() {
        if v > 0.0 && x < v {
            idx = i;
            break;
        }
        x -= v;
    }
    idx
}

/// One side of a game: the engine's model session, the current position
/// and its own random stream.
pub struct Player<S: EvalSession> {
    pub config: EngineConfig,
    pub color: Color,
    session: S,
    pos: Position,
    moves: Vec<Move>,
    rng: ChaCha8Rng,
}

impl<S: EvalSession> Player<S> {
    pub fn new<E: Evaluator<Session = S>>(
        evaluator: &E,
        config: EngineConfig,
        color: Color,
        tc: TimeControl,
        seed: u64,
    ) -> Self {
        let session = evaluator.session(tc, config.elo_pair(color));
        Player {
            config,
            color,
            session,
            pos: Position::startpos(),
            moves: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn position(&self) -> &Position {
        &self.pos
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    /// Play a move by either side.
    pub fn apply(&mut self, m: Move) -> Result<(), EngineError> {
        let next = self.pos.apply_move(m)?;
        let id = Vocab::get().move_id(m).expect("legal moves are in the vocabulary");
        self.session.push(id);
        self.pos = next;
        self.moves.push(m);
        Ok(())
    }

    /// Network prediction for the current position.
    pub fn predict(&mut self) -> Prediction {
        self.session.predict(&[])
    }

    /// Pick the next action for the side to move. `remaining` is that
    /// side's clock in seconds, `deadline` caps search wall time.
    pub fn decide(&mut self, remaining: Option<f64>, deadline: Option<Instant>) -> Result<EngineDecision, EngineError> {
        if self.pos.game_status().is_over() {
            return Err(EngineError::GameOver);
        }
        let pred = self.session.predict(&[]);
        let legal = self.pos.legal_moves();
        let value = {
            let v = pred.value as f64 * self.pos.side_to_move().sign() as f64;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let mut ponder = pred.time as f64;
        if !ponder.is_finite() || ponder < 0.0 {
            ponder = 0.0;
        }
        if let Some(r) = remaining {
            ponder = ponder.min(r.max(0.0));
        }
        let dist = legal_distribution(&pred, &legal);
        let mut order: Vec<usize> = (0..legal.len()).collect();
        order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]));
        let top_moves = order.iter().take(5).map(|&i| (legal[i], dist[i])).collect();
        let resign_prob = pred.policy.get(RESIGN as usize).copied().unwrap_or(0.0) as f64;

        let mut decision = EngineDecision {
            action: Action::Resign,
            ponder_seconds: ponder,
            value,
            resign_prob,
            top_moves,
            search: None,
        };
        if self.config.allow_resign
            && self.moves.len() >= self.config.resign_min_ply
            && should_resign(&pred.policy, value, &legal, self.config.resign_threshold)
        {
            return Ok(decision);
        }
        let mv = match self.config.variant {
            Variant::Policy => legal[sample_tempered(&dist, self.config.temperature, &mut self.rng)],
            Variant::Greedy => legal[argmax(&dist)],
            Variant::Search | Variant::AdaptiveSearch => {
                let mut params = self.config.search.clone();
                params.adaptive = self.config.variant == Variant::AdaptiveSearch;
                let r = run_mcts(&mut self.session, &self.pos, &pred, &params, deadline, &mut self.rng)?;
                let m = r.chosen;
                decision.search = Some(r);
                m
            }
        };
        decision.action = Action::Move(mv);
        Ok(decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PositionEvaluator;

    fn policy_with(resign: f32, best: f32, best_move: &str) -> Vec<f32> {
        let v = Vocab::get();
        let mut p = vec![0.0f32; v.len()];
        p[RESIGN as usize] = resign;
        p[v.move_id(best_move.parse().unwrap()).unwrap() as usize] = best;
        p
    }

    #[test]
    fn resign_truth_table() {
        let legal = Position::startpos().legal_moves();
        let cases = [
            (0.4, 0.3, -0.95, true),
            (0.4, 0.3, -0.5, false),
            (0.2, 0.3, -0.99, false),
            (0.2, 0.3, -0.5, false),
        ];
        for (r, b, v, want) in cases {
            assert_eq!(should_resign(&policy_with(r, b, "e2e4"), v, &legal, RESIGN_THRESHOLD), want, "{r} {b} {v}");
        }
        // Mass on an illegal move does not count as a legal alternative.
        let p = policy_with(0.4, 0.5, "e7e5");
        assert!(should_resign(&p, -0.95, &legal, RESIGN_THRESHOLD));
    }

    #[test]
    fn variant_conditioning() {
        let g = EngineConfig::for_variant(Variant::Greedy, 1200.0, 1.0);
        assert_eq!(g.elo_pair(Color::Black), [1200.0, GREEDY_ELO]);
        assert_eq!(g.temperature, 0.0);
        let p = EngineConfig::for_variant(Variant::Policy, 1200.0, 1.0);
        assert_eq!(p.elo_pair(Color::White), [1200.0, 1200.0]);
        let a = EngineConfig::for_variant(Variant::AdaptiveSearch, 1200.0, 7.0);
        assert!(a.search.adaptive && a.search.c_time == 7.0);
        assert_eq!("adaptive-search".parse::<Variant>().unwrap(), Variant::AdaptiveSearch);
    }

    #[test]
    fn single_legal_move_is_forced() {
        // After 1.e4 f5 2.Qh5+ black's only legal reply is g6.
        let ev = PositionEvaluator::uniform(2.0, 0.0);
        let cfg = EngineConfig::for_variant(Variant::Policy, 1500.0, 1.0);
        let mut p = Player::new(&ev, cfg, Color::Black, TimeControl::new(180, 0), 3);
        for m in ["e2e4", "f7f5", "d1h5"] {
            p.apply(m.parse().unwrap()).unwrap();
        }
        assert_eq!(p.position().legal_moves().len(), 1);
        for _ in 0..10 {
            let d = p.decide(None, None).unwrap();
            assert_eq!(d.chosen_move().unwrap().uci(), "g7g6");
        }
    }

    #[test]
    fn zero_temperature_policy_matches_greedy() {
        let ev = PositionEvaluator::new(|pos, _| {
            let v = Vocab::get();
            let mut policy = vec![1e-4f32; v.len()];
            let legal = pos.legal_moves();
            policy[v.move_id(legal[legal.len() / 2]).unwrap() as usize] = 0.5;
            Prediction::from_logits(&policy.iter().map(|p| p.ln()).collect::<Vec<_>>(), 1.0, 0.0)
        });
        let mut cfg = EngineConfig::for_variant(Variant::Policy, 1500.0, 1.0);
        cfg.temperature = 0.0;
        let mut a = Player::new(&ev, cfg, Color::White, TimeControl::new(180, 0), 1);
        let g = EngineConfig::for_variant(Variant::Greedy, 1500.0, 1.0);
        let mut b = Player::new(&ev, g, Color::White, TimeControl::new(180, 0), 2);
        assert_eq!(a.decide(None, None).unwrap().action, b.decide(None, None).unwrap().action);
    }

    #[test]
    fn resignation_waits_for_min_ply_and_ponder_is_clamped() {
        let ev = PositionEvaluator::new(|_, _| {
            let mut policy = vec![0.0f32; Vocab::get().len()];
            policy[RESIGN as usize] = 1.0;
            Prediction {
                policy,
                time: 30.0,
                value: 1.0,
            }
        });
        let cfg = EngineConfig::default();
        let mut p = Player::new(&ev, cfg, Color::Black, TimeControl::new(180, 0), 0);
        p.apply("e2e4".parse().unwrap()).unwrap();
        // Black to move, white value +1 means black is lost, but ply < 10.
        let d = p.decide(Some(12.0), None).unwrap();
        assert!(d.chosen_move().is_some());
        assert_eq!(d.ponder_seconds, 12.0);
        assert_eq!(ponder_delay(&d, Some(12.0)), Duration::from_secs_f64(1.2));
        for m in ["e7e5", "g1f3", "b8c6", "f1c4", "g8f6", "b1c3", "f8c5", "d2d3", "d7d6"] {
            p.apply(m.parse().unwrap()).unwrap();
        }
        p.apply("c1g5".parse().unwrap()).unwrap();
        assert_eq!(p.decide(None, None).unwrap().action, Action::Resign);
    }
}
