//! Synthetic "human" blitz logs for desk-scale experiments.
//!
//! Each player is a one-ply evaluator (material, hanging pieces, a little
//! opening sense) whose move choice is a softmax with an Elo-dependent
//! temperature. Think times follow a log-normal around a complexity- and
//! clock-dependent mean; clocks, flag falls, resignations and draw offers are
//! simulated so the output exercises the whole PGN pipeline.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::chess::attacks::squares;
use crate::chess::{Color, GameStatus, Move, PieceKind, Position};

use super::pgn::write_pgn;
use super::record::{GameRecord, Termination, TimeControl};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub games: usize,
    pub seed: u64,
    pub max_plies: usize,
    pub elo_mean: f64,
    pub elo_sd: f64,
    /// Time controls with sampling weights.
    pub time_controls: Vec<(TimeControl, f64)>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            games: 1000,
            seed: 0,
            max_plies: 300,
            elo_mean: 1500.0,
            elo_sd: 400.0,
            time_controls: vec![
                (TimeControl::new(180, 0), 0.4),
                (TimeControl::new(180, 2), 0.2),
                (TimeControl::new(300, 0), 0.25),
                (TimeControl::new(300, 3), 0.15),
            ],
        }
    }
}

/// Normalized skill in [0, 1].
fn skill(elo: i32) -> f64 {
    ((elo as f64 - 600.0) / 2000.0).clamp(0.0, 1.0)
}

/// One-ply heuristic score of `m` for the side to move, in centipawns.
fn score_move(pos: &Position, m: Move, ply: usize, s: f64) -> (f64, Position) {
    let us = pos.side_to_move();
    let them = us.opposite();
    let mover = pos.piece_at(m.from).expect("legal move has a piece").kind;
    let mut gain = 0.0;
    if let Some(captured) = pos.piece_at(m.to) {
        gain += captured.kind.value() as f64;
    } else if pos.is_en_passant(m) {
        gain += 100.0;
    }
    if let Some(p) = m.promotion {
        gain += (p.value() - 100) as f64;
    }
    let next = pos.play(m);

    // Largest material loss to an immediate recapture/capture.
    let mut risk = 0.0f64;
    for kind in [PieceKind::Pawn, PieceKind::Knight, PieceKind::Bishop, PieceKind::Rook, PieceKind::Queen] {
        for sq in squares(next.pieces(us, kind)) {
            let attackers = next.attackers(sq, them);
            if attackers == 0 {
                continue;
            }
            let cheapest = squares(attackers)
                .filter_map(|a| next.piece_at(a))
                .map(|p| if p.kind == PieceKind::King { 2000 } else { p.kind.value() })
                .min()
                .unwrap_or(0);
            let defended = next.attackers(sq, us) != 0;
            let loss = if !defended {
                kind.value()
            } else {
                (kind.value() - cheapest).max(0)
            };
            risk = risk.max(loss as f64);
        }
    }

    let mut positional = 0.0;
    let to_center = 3.5 - ((m.to.file() as f64 - 3.5).abs() + (m.to.rank() as f64 - 3.5).abs()) / 2.0;
    let from_center = 3.5 - ((m.from.file() as f64 - 3.5).abs() + (m.from.rank() as f64 - 3.5).abs()) / 2.0;
    positional += 6.0 * (to_center - from_center);
    let home_rank = if us == Color::White { 0 } else { 7 };
    if ply < 20 {
        match mover {
            PieceKind::Knight | PieceKind::Bishop if m.from.rank() == home_rank => positional += 30.0,
            PieceKind::Queen => positional -= 20.0,
            PieceKind::Pawn if (3..=4).contains(&m.to.file()) => positional += 20.0,
            PieceKind::Rook => positional -= 10.0,
            _ => {}
        }
    }
    if pos.is_castling(m) {
        positional += 60.0;
    } else if mover == PieceKind::King && next.kind_bb(PieceKind::Queen) != 0 {
        positional -= 35.0;
    }
    if mover == PieceKind::Pawn && next.kind_bb(PieceKind::Queen) == 0 {
        let advance = if us == Color::White { m.to.rank() } else { 7 - m.to.rank() };
        positional += 4.0 * advance as f64;
    }
    if next.in_check() {
        positional += 15.0 + 20.0 * s;
    }
    let score = gain - risk * (0.45 + 0.55 * s) + positional;
    (score, next)
}

struct Choice {
    mv: Move,
    /// Number of moves scored within 60cp of the best one.
    candidates: usize,
}

fn choose_move(pos: &Position, elo: i32, ply: usize, rng: &mut ChaCha8Rng) -> Choice {
    let s = skill(elo);
    let legal = pos.legal_moves();
    let mut scored: Vec<(Move, f64)> = Vec::with_capacity(legal.len());
    let mut mates = Vec::new();
    for &m in &legal {
        let (score, next) = score_move(pos, m, ply, s);
        if next.in_check() && !next.has_legal_move() {
            mates.push(m);
        }
        scored.push((m, score));
    }
    let best = scored.iter().map(|x| x.1).fold(f64::MIN, f64::max);
    let candidates = scored.iter().filter(|x| x.1 >= best - 60.0).count();
    if !mates.is_empty() && rng.gen_bool(0.35 + 0.6 * s) {
        return Choice {
            mv: mates[rng.gen_range(0..mates.len())],
            candidates,
        };
    }
    let temperature = 20.0 + 100.0 * (1.0 - s).powi(2);
    let weights: Vec<f64> = scored.iter().map(|x| ((x.1 - best) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut r = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        r -= w;
        if r <= 0.0 {
            return Choice {
                mv: scored[i].0,
                candidates,
            };
        }
    }
    Choice {
        mv: scored.last().expect("at least one legal move").0,
        candidates,
    }
}

fn pick_time_control(config: &SynthConfig, rng: &mut ChaCha8Rng) -> TimeControl {
    let total: f64 = config.time_controls.iter().map(|x| x.1).sum();
    let mut r = rng.gen::<f64>() * total;
    for (tc, w) in &config.time_controls {
        r -= w;
        if r <= 0.0 {
            return *tc;
        }
    }
    config.time_controls.last().map(|x| x.0).unwrap_or(TimeControl::new(180, 0))
}

/// Play one synthetic game.
pub fn synthesize_game(white_elo: i32, black_elo: i32, tc: TimeControl, max_plies: usize, rng: &mut ChaCha8Rng) -> GameRecord {
    let mut pos = Position::startpos();
    let mut moves = Vec::new();
    let mut clocks_exact = [tc.base as f64, tc.base as f64];
    let mut clocks = Vec::new();
    let mut finish: Option<(i8, Termination)> = None;

    while moves.len() < max_plies {
        let ply = moves.len();
        let us = pos.side_to_move();
        let elo = if us == Color::White { white_elo } else { black_elo };
        let s = skill(elo);

        if ply >= 20 {
            let deficit = -pos.material(us) as f64;
            if deficit >= 450.0 + 600.0 * (1.0 - s) && rng.gen_bool(0.3) {
                finish = Some((-(us.sign() as i8), Termination::Resignation(us)));
                break;
            }
            if ply >= 60 && pos.material(us).abs() <= 100 && s > 0.5 && rng.gen_bool(0.01) {
                finish = Some((0, Termination::DrawAgreed));
                break;
            }
        }

        let choice = choose_move(&pos, elo, ply, rng);
        let remaining = clocks_exact[us.index()];
        let mut mean = tc.base as f64 / 45.0;
        if ply < 12 {
            mean *= 0.35;
        }
        mean *= 1.0 + 0.15 * (choice.candidates.min(6) as f64);
        if pos.in_check() {
            mean *= 1.3;
        }
        mean *= 0.8 + 0.4 * s;
        let mut think = LogNormal::new(mean.ln(), 0.7).expect("valid lognormal").sample(rng);
        if remaining < 30.0 {
            think = think.min(0.4 + remaining * 0.08);
        }
        if think >= remaining {
            // Flag fall before the move is made.
            let opponent = us.opposite();
            let outcome = if pos.has_mating_material(opponent) {
                -(us.sign() as i8)
            } else {
                0
            };
            finish = Some((outcome, Termination::Timeout(us)));
            break;
        }
        clocks_exact[us.index()] = remaining - think + tc.increment as f64;
        clocks.push(clocks_exact[us.index()].floor() as f32);
        pos = pos.play(choice.mv);
        moves.push(choice.mv);

        match pos.game_status() {
            GameStatus::Ongoing => {}
            GameStatus::Checkmate { winner } => {
                finish = Some((winner.sign() as i8, Termination::Checkmate));
                break;
            }
            _ => {
                finish = Some((0, Termination::RuleDraw));
                break;
            }
        }
    }
    let (outcome, termination) = finish.unwrap_or((0, Termination::DrawAgreed));
    let think_times = super::pgn::think_times_from_clocks(&clocks, tc);
    GameRecord {
        white_elo,
        black_elo,
        time_control: tc,
        moves,
        think_times: Some(think_times),
        clocks: Some(clocks),
        outcome,
        termination,
    }
}

/// Deterministic corpus of synthetic games.
pub fn synthesize_games(config: &SynthConfig) -> Vec<GameRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let elo_dist = Normal::new(config.elo_mean, config.elo_sd).expect("valid elo distribution");
    let gap = Normal::new(0.0, 150.0).expect("valid gap distribution");
    (0..config.games)
        .map(|_| {
            let white = elo_dist.sample(&mut rng).clamp(600.0, 2800.0);
            let black = (white + gap.sample(&mut rng)).clamp(600.0, 2800.0);
            let tc = pick_time_control(config, &mut rng);
            synthesize_game(white.round() as i32, black.round() as i32, tc, config.max_plies, &mut rng)
        })
        .collect()
}

/// The same corpus rendered as one PGN file.
pub fn synthesize_pgn(config: &SynthConfig) -> String {
    synthesize_games(config)
        .iter()
        .enumerate()
        .map(|(i, g)| write_pgn(g, &[("Site", format!("synthetic/{}/{i}", config.seed))]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_pgn;

    #[test]
    fn games_are_valid_and_reparse() {
        let config = SynthConfig {
            games: 12,
            seed: 3,
            ..Default::default()
        };
        let games = synthesize_games(&config);
        for g in &games {
            g.validate().unwrap();
        }
        let parsed = parse_pgn(&synthesize_pgn(&config));
        assert!(parsed.errors.is_empty(), "{:?}", parsed.errors);
        assert_eq!(parsed.games, games);
    }

    #[test]
    fn deterministic() {
        let config = SynthConfig {
            games: 3,
            seed: 8,
            ..Default::default()
        };
        assert_eq!(synthesize_games(&config), synthesize_games(&config));
    }

    #[test]
    fn stronger_players_keep_material() {
        // Over a handful of games, strong-vs-weak should favor the strong side.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut score = 0i32;
        for i in 0..10 {
            let (w, b) = if i % 2 == 0 { (2400, 800) } else { (800, 2400) };
            let g = synthesize_game(w, b, TimeControl::new(300, 0), 200, &mut rng);
            let strong_sign = if i % 2 == 0 { 1 } else { -1 };
            score += g.outcome as i32 * strong_sign;
        }
        assert!(score > 3, "strong side net score {score}");
    }
}
