use std::time::Instant;

use ponder::chess::{Color, GameStatus, Move};
use ponder::data::{write_pgn, GameRecord, Termination, TimeControl};
use ponder::engine::{Action, EngineConfig, EngineDecision, Player, Variant};
use ponder::model::{EvalSession, Evaluator};
use ponder::tokens::soft_elo_weight;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ServiceError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColorChoice {
    #[default]
    White,
    Black,
    Random,
}

/// Body of a create-game request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateGame {
    #[serde(default = "default_variant")]
    pub variant: Variant,
    /// Self-reported rating of the human player.
    pub human_elo: f32,
    /// `base+increment` in seconds.
    #[serde(default = "default_tc")]
    pub time_control: String,
    /// The human's colour.
    #[serde(default)]
    pub color: ColorChoice,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_variant() -> Variant {
    Variant::AdaptiveSearch
}

fn default_tc() -> String {
    "180+0".into()
}

impl CreateGame {
    pub fn validate(&self) -> Result<TimeControl, ServiceError> {
        if !self.human_elo.is_finite() || !(100.0..=4000.0).contains(&self.human_elo) {
            return Err(ServiceError::BadConfig(format!("human_elo {} outside [100, 4000]", self.human_elo)));
        }
        let tc: TimeControl = self
            .time_control
            .parse()
            .map_err(|_| ServiceError::BadConfig(format!("bad time control {:?}", self.time_control)))?;
        if tc.base == 0 {
            return Err(ServiceError::BadConfig("base time must be positive".into()));
        }
        Ok(tc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Status {
    Ongoing,
    Finished { termination: Termination, outcome: i8 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveEntry {
    #[serde(rename = "move")]
    pub mv: Move,
    pub san: String,
    pub color: Color,
    pub think_seconds: f64,
    /// Mover's clock after the move (increment included).
    pub clock_after: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_time_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<EngineDecision>,
}

/// Everything that changes a session, in the order it happened. The event
/// log on disk stores exactly these.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum GameEvent {
    Created {
        id: String,
        request: CreateGame,
        human_color: Color,
        seed: u64,
    },
    Move(MoveEntry),
    Finished { termination: Termination, outcome: i8 },
}

/// Service-wide engine settings applied to every new session.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineDefaults {
    pub c_time: f64,
    pub ponder_realism: bool,
}

impl Default for EngineDefaults {
    fn default() -> Self {
        EngineDefaults {
            c_time: ponder::search::SearchParams::default().c_time,
            ponder_realism: false,
        }
    }
}

/// One live game. All mutation goes through methods that return the
/// events to persist and broadcast.
pub struct GameSession<S: EvalSession> {
    pub id: String,
    pub request: CreateGame,
    pub time_control: TimeControl,
    pub human_color: Color,
    pub seed: u64,
    engine: Player<S>,
    /// Remaining seconds at the start of the current turn.
    clocks: [f64; 2],
    turn_started: Instant,
    pub moves: Vec<MoveEntry>,
    pub status: Status,
}

impl<S: EvalSession> GameSession<S> {
    pub fn new<E: Evaluator<Session = S>>(
        ev: &E,
        id: String,
        request: CreateGame,
        human_color: Color,
        seed: u64,
        defaults: &EngineDefaults,
        now: Instant,
    ) -> Result<Self, ServiceError> {
        let tc = request.validate()?;
        let mut cfg = EngineConfig::for_variant(request.variant, request.human_elo, defaults.c_time);
        cfg.ponder_realism = defaults.ponder_realism;
        let engine = Player::new(ev, cfg, human_color.opposite(), tc, seed);
        Ok(GameSession {
            id,
            request,
            time_control: tc,
            human_color,
            seed,
            engine,
            clocks: [tc.base as f64; 2],
            turn_started: now,
            moves: Vec::new(),
            status: Status::Ongoing,
        })
    }

    pub fn engine_color(&self) -> Color {
        self.human_color.opposite()
    }

    pub fn engine_config(&self) -> &EngineConfig {
        &self.engine.config
    }

    pub fn side_to_move(&self) -> Color {
        self.engine.position().side_to_move()
    }

    pub fn is_ongoing(&self) -> bool {
        self.status == Status::Ongoing
    }

    pub fn engine_to_move(&self) -> bool {
        self.is_ongoing() && self.side_to_move() == self.engine_color()
    }

    /// Clocks as of `now`, with the running side's elapsed time deducted.
    pub fn live_clocks(&self, now: Instant) -> [f64; 2] {
        let mut c = self.clocks;
        if self.is_ongoing() {
            let i = self.side_to_move().index();
            c[i] = (c[i] - now.saturating_duration_since(self.turn_started).as_secs_f64()).max(0.0);
        }
        c
    }

    /// Remaining time of the side to move at `now`.
    pub fn remaining(&self, now: Instant) -> f64 {
        self.live_clocks(now)[self.side_to_move().index()]
    }

    fn finish(&mut self, termination: Termination, outcome: i8) -> GameEvent {
        self.status = Status::Finished { termination, outcome };
        GameEvent::Finished { termination, outcome }
    }

    /// End the game on time if the side to move has run out.
    pub fn check_flag(&mut self, now: Instant) -> Option<GameEvent> {
        if !self.is_ongoing() || self.remaining(now) > 0.0 {
            return None;
        }
        let loser = self.side_to_move();
        self.clocks = self.live_clocks(now);
        self.turn_started = now;
        let winner_can_mate = self.engine.position().has_mating_material(loser.opposite());
        let outcome = if winner_can_mate { -(loser.sign() as i8) } else { 0 };
        Some(self.finish(Termination::Timeout(loser), outcome))
    }

    /// Commit a legal move, charging the mover's clock with `think`
    /// seconds (or the recorded clock when replaying a log).
    fn commit(
        &mut self,
        mv: Move,
        think: f64,
        clock_after: Option<f64>,
        client_time_ms: Option<u64>,
        diagnostics: Option<EngineDecision>,
        now: Instant,
    ) -> Result<Vec<GameEvent>, ServiceError> {
        let color = self.side_to_move();
        let san = self.engine.position().san(mv);
        self.engine.apply(mv).map_err(|e| ServiceError::IllegalMove(e.to_string()))?;
        let i = color.index();
        let after = clock_after.unwrap_or_else(|| (self.clocks[i] - think).max(0.0) + self.time_control.increment as f64);
        self.clocks[i] = after;
        self.turn_started = now;
        let entry = MoveEntry {
            mv,
            san,
            color,
            think_seconds: think,
            clock_after: after,
            client_time_ms,
            diagnostics,
        };
        self.moves.push(entry.clone());
        let mut events = vec![GameEvent::Move(entry)];
        match self.engine.position().game_status() {
            GameStatus::Ongoing => {}
            GameStatus::Checkmate { winner } => events.push(self.finish(Termination::Checkmate, winner.sign() as i8)),
            _ => events.push(self.finish(Termination::RuleDraw, 0)),
        }
        Ok(events)
    }

    /// Validate and play the human's move. On error nothing changes,
    /// except that a flag fall ends the game first.
    pub fn human_move(&mut self, uci: &str, client_time_ms: Option<u64>, now: Instant) -> Result<Vec<GameEvent>, ServiceError> {
        if !self.is_ongoing() {
            return Err(ServiceError::SessionFinished);
        }
        if self.side_to_move() != self.human_color {
            return Err(ServiceError::NotYourTurn);
        }
        let mv: Move = uci.trim().parse().map_err(|_| ServiceError::IllegalMove(uci.to_string()))?;
        if !self.engine.position().is_legal(mv) {
            return Err(ServiceError::IllegalMove(uci.to_string()));
        }
        if let Some(ev) = self.check_flag(now) {
            return Ok(vec![ev]);
        }
        let think = now.saturating_duration_since(self.turn_started).as_secs_f64();
        self.commit(mv, think, None, client_time_ms, None, now)
    }

    pub fn human_resign(&mut self) -> Result<Vec<GameEvent>, ServiceError> {
        if !self.is_ongoing() {
            return Err(ServiceError::SessionFinished);
        }
        let c = self.human_color;
        Ok(vec![self.finish(Termination::Resignation(c), -(c.sign() as i8))])
    }

    /// The engine's decision for the current position (no state change
    /// besides the engine's model cache and random stream).
    pub fn engine_decide(&mut self, now: Instant) -> Result<EngineDecision, ServiceError> {
        if !self.engine_to_move() {
            return Err(ServiceError::NotYourTurn);
        }
        let remaining = self.remaining(now);
        self.engine.decide(Some(remaining), None).map_err(|e| ServiceError::Engine(e.to_string()))
    }

    /// Apply an engine decision computed for the current position.
    pub fn engine_commit(&mut self, decision: EngineDecision, now: Instant) -> Result<Vec<GameEvent>, ServiceError> {
        if !self.engine_to_move() {
            return Err(ServiceError::NotYourTurn);
        }
        if let Some(ev) = self.check_flag(now) {
            return Ok(vec![ev]);
        }
        match decision.action {
            Action::Resign => {
                let c = self.engine_color();
                Ok(vec![self.finish(Termination::Resignation(c), -(c.sign() as i8))])
            }
            Action::Move(mv) => {
                let think = now.saturating_duration_since(self.turn_started).as_secs_f64();
                self.commit(mv, think, None, None, Some(decision), now)
            }
        }
    }

    /// Re-apply a persisted event (log replay after a restart).
    pub fn replay(&mut self, event: &GameEvent, now: Instant) -> Result<(), ServiceError> {
        match event {
            GameEvent::Created { .. } => Ok(()),
            GameEvent::Move(m) => {
                if !self.engine.position().is_legal(m.mv) {
                    return Err(ServiceError::IllegalMove(m.mv.to_string()));
                }
                self.commit(m.mv, m.think_seconds, Some(m.clock_after), m.client_time_ms, m.diagnostics.clone(), now)?;
                Ok(())
            }
            GameEvent::Finished { termination, outcome } => {
                self.finish(*termination, *outcome);
                Ok(())
            }
        }
    }

    pub fn record(&self) -> GameRecord {
        let (termination, outcome) = match &self.status {
            Status::Ongoing => (Termination::Unterminated, 0),
            Status::Finished { termination, outcome } => (*termination, *outcome),
        };
        let human = self.request.human_elo.round() as i32;
        let engine = self.engine.config.conditioning_elo().round() as i32;
        let (white_elo, black_elo) = match self.human_color {
            Color::White => (human, engine),
            Color::Black => (engine, human),
        };
        GameRecord {
            white_elo,
            black_elo,
            time_control: self.time_control,
            moves: self.moves.iter().map(|m| m.mv).collect(),
            think_times: Some(self.moves.iter().map(|m| m.think_seconds as f32).collect()),
            clocks: Some(self.moves.iter().map(|m| m.clock_after as f32).collect()),
            outcome,
            termination,
        }
    }

    pub fn pgn(&self) -> String {
        let engine_name = format!("Ponder ({})", self.engine.config.variant.name());
        let (white, black) = match self.human_color {
            Color::White => ("Human".to_string(), engine_name),
            Color::Black => (engine_name, "Human".to_string()),
        };
        write_pgn(
            &self.record(),
            &[
                ("Event", "Casual game".to_string()),
                ("White", white),
                ("Black", black),
                ("GameId", self.id.clone()),
            ],
        )
    }

    pub fn diagnostics(&self) -> Value {
        let items: Vec<Value> = self
            .moves
            .iter()
            .enumerate()
            .filter_map(|(ply, m)| m.diagnostics.as_ref().map(|d| json!({ "ply": ply, "move": m.mv, "decision": d })))
            .collect();
        Value::Array(items)
    }

    pub fn state(&self, now: Instant) -> Value {
        let clocks = self.live_clocks(now);
        let cfg = &self.engine.config;
        let engine_elo = cfg.conditioning_elo();
        let (result, termination) = match &self.status {
            Status::Ongoing => ("*".to_string(), None),
            Status::Finished { termination, outcome } => (
                match outcome {
                    1 => "1-0",
                    -1 => "0-1",
                    _ => "1/2-1/2",
                }
                .to_string(),
                Some(termination),
            ),
        };
        json!({
            "id": self.id,
            "status": if self.is_ongoing() { "ongoing" } else { "finished" },
            "result": result,
            "termination": termination,
            "fen": self.engine.position().to_fen(),
            "to_move": self.side_to_move(),
            "human_color": self.human_color,
            "human_elo": self.request.human_elo,
            "time_control": self.time_control.to_string(),
            "clocks": { "white": clocks[0], "black": clocks[1] },
            "moves": self.moves.iter().map(|m| m.mv).collect::<Vec<_>>(),
            "san": self.moves.iter().map(|m| m.san.clone()).collect::<Vec<_>>(),
            "engine": {
                "variant": cfg.variant,
                "color": self.engine_color(),
                "own_elo": engine_elo,
                "opponent_elo": cfg.opponent_elo,
                "gamma_own": soft_elo_weight(engine_elo as f64),
                "gamma_opponent": soft_elo_weight(cfg.opponent_elo as f64),
            },
            "last_engine": self.moves.iter().rev().find_map(|m| m.diagnostics.as_ref()),
        })
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use ponder::model::PositionEvaluator;

    use super::*;

    fn new_game(color: Color) -> GameSession<ponder::model::PositionSession> {
        let ev = PositionEvaluator::uniform(2.0, 0.0);
        let req = CreateGame {
            variant: Variant::Policy,
            human_elo: 1750.0,
            time_control: "60+1".into(),
            color: ColorChoice::White,
            seed: Some(1),
        };
        GameSession::new(&ev, "g".into(), req, color, 1, &EngineDefaults::default(), Instant::now()).unwrap()
    }

    #[test]
    fn turn_order_and_illegal_moves() {
        let mut g = new_game(Color::Black);
        let now = Instant::now();
        assert!(matches!(g.human_move("e7e5", None, now), Err(ServiceError::NotYourTurn)));
        let d = g.engine_decide(now).unwrap();
        g.engine_commit(d, now).unwrap();
        assert!(matches!(g.human_move("e7e4", None, now), Err(ServiceError::IllegalMove(_))));
        assert!(matches!(g.human_move("zz", None, now), Err(ServiceError::IllegalMove(_))));
        assert_eq!(g.moves.len(), 1);
        g.human_move("e7e5", None, now).unwrap();
        assert_eq!(g.moves.len(), 2);
    }

    #[test]
    fn clock_is_server_side_and_flag_ends_game() {
        let mut g = new_game(Color::White);
        let t0 = g.turn_started;
        let ev = g.human_move("e2e4", Some(1), t0 + Duration::from_secs(10)).unwrap();
        assert_eq!(ev.len(), 1);
        // 60 - 10 + 1 increment.
        assert!((g.moves[0].clock_after - 51.0).abs() < 1e-9);
        let d = g.engine_decide(t0 + Duration::from_secs(10)).unwrap();
        g.engine_commit(d, t0 + Duration::from_secs(12)).unwrap();
        let late = t0 + Duration::from_secs(12 + 52);
        assert_eq!(g.live_clocks(late)[0], 0.0);
        let ev = g.human_move("d2d4", None, late).unwrap();
        assert_eq!(
            ev,
            vec![GameEvent::Finished {
                termination: Termination::Timeout(Color::White),
                outcome: -1
            }]
        );
        assert!(matches!(g.human_move("d2d4", None, late), Err(ServiceError::SessionFinished)));
        assert!(g.live_clocks(late + Duration::from_secs(100)).iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn conditioning_reported() {
        let g = new_game(Color::White);
        let s = g.state(Instant::now());
        assert_eq!(s["engine"]["gamma_opponent"], 0.5);
        assert_eq!(s["engine"]["own_elo"], 1750.0);
    }
}
