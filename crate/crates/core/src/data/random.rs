use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chess::{GameStatus, Position};

use super::record::{GameRecord, Termination, TimeControl};

/// Nominal metadata attached to random games (they have no real players).
pub const RANDOM_GAME_ELO: i32 = 1500;
pub const RANDOM_GAME_TC: TimeControl = TimeControl::new(180, 0);

/// Games of uniformly random legal moves, played until the game ends or
/// `max_plies` is reached. Deterministic in `seed`.
pub fn random_games(seed: u64, n_games: usize, max_plies: usize) -> Vec<GameRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_games).map(|_| random_game(&mut rng, max_plies)).collect()
}

fn random_game(rng: &mut ChaCha8Rng, max_plies: usize) -> GameRecord {
    let mut pos = Position::startpos();
    let mut moves = Vec::new();
    let mut status = GameStatus::Ongoing;
    while moves.len() < max_plies {
        let legal = pos.legal_moves();
        let m = *legal.choose(rng).expect("ongoing position has legal moves");
        pos = pos.play(m);
        moves.push(m);
        status = pos.game_status();
        if status.is_over() {
            break;
        }
    }
    let (outcome, termination) = match status {
        GameStatus::Ongoing => (0, Termination::Unterminated),
        GameStatus::Checkmate { winner } => (winner.sign() as i8, Termination::Checkmate),
        _ => (0, Termination::RuleDraw),
    };
    GameRecord {
        white_elo: RANDOM_GAME_ELO,
        black_elo: RANDOM_GAME_ELO,
        time_control: RANDOM_GAME_TC,
        moves,
        think_times: None,
        clocks: None,
        outcome,
        termination,
    }
}
