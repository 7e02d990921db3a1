use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chess::{Color, GameStatus};
use crate::data::{GameRecord, Termination, TimeControl};
use crate::engine::{Action, EngineConfig, Player, Variant};
use crate::model::Evaluator;

use super::elo::GameResult;
use super::EvalError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfPlayConfig {
    /// Games reaching this many plies are adjudicated as draws.
    pub max_plies: usize,
    pub time_control: TimeControl,
    pub seed: u64,
}

impl Default for SelfPlayConfig {
    fn default() -> Self {
        SelfPlayConfig {
            max_plies: 300,
            time_control: TimeControl::new(180, 0),
            seed: 0,
        }
    }
}

fn player_seed(game_seed: u64, color: Color) -> u64 {
    game_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ color.index() as u64
}

/// Play one game between two configurations. Think times are the engines'
/// predicted ponder times; clocks are not enforced.
pub fn play_game<E: Evaluator>(
    ev: &E,
    white: &EngineConfig,
    black: &EngineConfig,
    cfg: &SelfPlayConfig,
    game_seed: u64,
) -> Result<GameRecord, EvalError> {
    let tc = cfg.time_control;
    let mut players = [
        Player::new(ev, white.clone(), Color::White, tc, player_seed(game_seed, Color::White)),
        Player::new(ev, black.clone(), Color::Black, tc, player_seed(game_seed, Color::Black)),
    ];
    let mut moves = Vec::new();
    let mut times = Vec::new();
    let (termination, outcome) = loop {
        let pos = players[0].position().clone();
        match pos.game_status() {
            GameStatus::Ongoing => {}
            GameStatus::Checkmate { winner } => break (Termination::Checkmate, winner.sign() as i8),
            _ => break (Termination::RuleDraw, 0),
        }
        if moves.len() >= cfg.max_plies {
            break (Termination::DrawAgreed, 0);
        }
        let mover = pos.side_to_move();
        let d = players[mover.index()].decide(None, None)?;
        match d.action {
            Action::Resign => break (Termination::Resignation(mover), -(mover.sign() as i8)),
            Action::Move(m) => {
                for p in &mut players {
                    p.apply(m)?;
                }
                moves.push(m);
                times.push(d.ponder_seconds as f32);
            }
        }
    };
    Ok(GameRecord {
        white_elo: white.conditioning_elo().round() as i32,
        black_elo: black.conditioning_elo().round() as i32,
        time_control: tc,
        moves,
        think_times: Some(times),
        clocks: None,
        outcome,
        termination,
    })
}

/// Score of `a` over `games` games against `b`, alternating colours.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub games: usize,
    pub score: f64,
    pub wins: usize,
    pub draws: usize,
    pub losses: usize,
    /// Half-width of a 95% interval on the mean score.
    pub ci95: f64,
}

pub fn play_match<E: Evaluator>(
    ev: &E,
    a: &EngineConfig,
    b: &EngineConfig,
    games: usize,
    cfg: &SelfPlayConfig,
) -> Result<(MatchResult, Vec<GameRecord>), EvalError> {
    let records: Result<Vec<(f64, GameRecord)>, EvalError> = (0..games)
        .into_par_iter()
        .map(|g| {
            let seed = cfg.seed.wrapping_add(g as u64);
            if g % 2 == 0 {
                let r = play_game(ev, a, b, cfg, seed)?;
                Ok(((r.outcome as f64 + 1.0) / 2.0, r))
            } else {
                let r = play_game(ev, b, a, cfg, seed)?;
                Ok(((1.0 - r.outcome as f64) / 2.0, r))
            }
        })
        .collect();
    let records = records?;
    let n = records.len().max(1) as f64;
    let scores: Vec<f64> = records.iter().map(|r| r.0).collect();
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let result = MatchResult {
        games: records.len(),
        score: mean,
        wins: scores.iter().filter(|&&s| s == 1.0).count(),
        draws: scores.iter().filter(|&&s| s == 0.5).count(),
        losses: scores.iter().filter(|&&s| s == 0.0).count(),
        ci95: 1.96 * (var / n).sqrt(),
    };
    Ok((result, records.into_iter().map(|r| r.1).collect()))
}

/// Default opponent ladder: policy engines at 1000, 1200, ..., 2600.
pub fn default_ladder() -> Vec<f32> {
    (0..9).map(|i| 1000.0 + 200.0 * i as f32).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderGame {
    pub opponent_elo: f64,
    pub engine_color: Color,
    pub score: f64,
    pub plies: usize,
    pub termination: Termination,
}

impl From<&LadderGame> for GameResult {
    fn from(g: &LadderGame) -> GameResult {
        GameResult {
            opponent_elo: g.opponent_elo,
            score: g.score,
        }
    }
}

/// Play `engine` against policy opponents conditioned at each ladder Elo.
/// The engine's opponent slot is set to the rung's Elo. Game seeds depend
/// only on (seed, rung, game), so different engines meet identical seeds.
pub fn selfplay_calibration<E: Evaluator>(
    ev: &E,
    engine: &EngineConfig,
    ladder: &[f32],
    games_per_rung: usize,
    cfg: &SelfPlayConfig,
) -> Result<Vec<LadderGame>, EvalError> {
    let jobs: Vec<(usize, usize)> = (0..ladder.len())
        .flat_map(|r| (0..games_per_rung).map(move |g| (r, g)))
        .collect();
    jobs.into_par_iter()
        .map(|(r, g)| {
            let elo = ladder[r];
            let mut me = engine.clone();
            me.opponent_elo = elo;
            let opp = EngineConfig::for_variant(Variant::Policy, elo, 0.0);
            let seed = cfg.seed.wrapping_add((r as u64) << 20).wrapping_add(g as u64);
            let engine_color = if g % 2 == 0 { Color::White } else { Color::Black };
            let rec = match engine_color {
                Color::White => play_game(ev, &me, &opp, cfg, seed)?,
                Color::Black => play_game(ev, &opp, &me, cfg, seed)?,
            };
            let white_score = (rec.outcome as f64 + 1.0) / 2.0;
            Ok(LadderGame {
                opponent_elo: elo as f64,
                engine_color,
                score: if engine_color == Color::White { white_score } else { 1.0 - white_score },
                plies: rec.moves.len(),
                termination: rec.termination,
            })
        })
        .collect()
}
