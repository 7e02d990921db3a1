use std::io::{self, BufRead, Write};
use std::time::{Duration, Instant};

use crate::chess::{Move, Position};
use crate::data::TimeControl;
use crate::model::Evaluator;

use super::{Action, EngineConfig, EngineError, Player};

#[derive(Clone, Debug)]
pub struct UciOptions {
    pub seed: u64,
    pub time_control: TimeControl,
}

impl Default for UciOptions {
    fn default() -> Self {
        UciOptions {
            seed: 0,
            time_control: TimeControl::new(180, 0),
        }
    }
}

struct State {
    config: EngineConfig,
    seed: u64,
    games: u64,
    moves: Vec<Move>,
}

fn parse_position(args: &[&str]) -> Result<Vec<Move>, String> {
    match args.first() {
        Some(&"startpos") => {}
        Some(&"fen") => return Err("only startpos positions are supported".into()),
        _ => return Err("expected 'position startpos [moves ...]'".into()),
    }
    let mut moves = Vec::new();
    let mut pos = Position::startpos();
    let rest = &args[1..];
    let list = match rest.first() {
        None => &[][..],
        Some(&"moves") => &rest[1..],
        Some(other) => return Err(format!("unexpected token {other:?}")),
    };
    for s in list {
        let m: Move = s.parse().map_err(|_| format!("bad move {s:?}"))?;
        pos = pos.apply_move(m).map_err(|_| format!("illegal move {s}"))?;
        moves.push(m);
    }
    Ok(moves)
}

fn go_limits(args: &[&str], white_to_move: bool) -> (Option<Duration>, Option<f64>) {
    let mut movetime = None;
    let mut remaining = None;
    let mut it = args.iter();
    while let Some(&k) = it.next() {
        let v = it.clone().next().and_then(|v| v.parse::<u64>().ok());
        match (k, v) {
            ("movetime", Some(ms)) => movetime = Some(Duration::from_millis(ms)),
            ("wtime", Some(ms)) if white_to_move => remaining = Some(ms as f64 / 1000.0),
            ("btime", Some(ms)) if !white_to_move => remaining = Some(ms as f64 / 1000.0),
            _ => {}
        }
    }
    (movetime, remaining)
}

fn set_option(state: &mut State, args: &[&str]) -> Result<(), String> {
    let joined = args.join(" ");
    let rest = joined.strip_prefix("name ").ok_or("expected 'setoption name <id> value <x>'")?;
    let (name, value) = rest.split_once(" value ").ok_or("missing value")?;
    let value = value.trim();
    let num = || value.parse::<f32>().map_err(|_| format!("bad number {value:?}"));
    match name.trim().to_ascii_lowercase().as_str() {
        "variant" => {
            let v = value.parse()?;
            let c_time = state.config.search.c_time;
            let opp = state.config.opponent_elo;
            state.config = EngineConfig::for_variant(v, opp, c_time);
        }
        "ownelo" => state.config.own_elo = Some(num()?),
        "opponentelo" | "uci_elo" => state.config.opponent_elo = num()?,
        "seed" => state.seed = value.parse().map_err(|_| format!("bad seed {value:?}"))?,
        other => return Err(format!("unknown option {other:?}")),
    }
    Ok(())
}

fn go<E: Evaluator>(
    evaluator: &E,
    state: &State,
    opts: &UciOptions,
    args: &[&str],
    out: &mut impl Write,
) -> io::Result<()> {
    let white = state.moves.len() % 2 == 0;
    let (movetime, remaining) = go_limits(args, white);
    let started = Instant::now();
    let color = if white { crate::chess::Color::White } else { crate::chess::Color::Black };
    // Seeded by game and ply so that replies do not depend on history of
    // earlier commands.
    let seed = state.seed ^ (state.games << 32) ^ state.moves.len() as u64;
    let mut player = Player::new(evaluator, state.config.clone(), color, opts.time_control, seed);
    for &m in &state.moves {
        if player.apply(m).is_err() {
            writeln!(out, "info string internal error replaying {m}")?;
            return writeln!(out, "bestmove 0000");
        }
    }
    match player.decide(remaining, movetime.map(|d| started + d)) {
        Ok(d) => {
            let nodes = d.n_sim().unwrap_or(1);
            writeln!(
                out,
                "info depth 1 nodes {nodes} score cp {} string value {:.4} ponder {:.2}",
                (d.value.clamp(-0.999, 0.999).atanh() * 400.0).round() as i64,
                d.value,
                d.ponder_seconds
            )?;
            match d.action {
                Action::Move(m) => writeln!(out, "bestmove {m}"),
                Action::Resign => {
                    writeln!(out, "info string resign")?;
                    let fallback = d.top_moves.first().map(|(m, _)| m.to_string()).unwrap_or("0000".into());
                    writeln!(out, "bestmove {fallback}")
                }
            }
        }
        Err(EngineError::GameOver) => {
            writeln!(out, "info string game over")?;
            writeln!(out, "bestmove 0000")
        }
        Err(e) => {
            writeln!(out, "info string error: {e}")?;
            writeln!(out, "bestmove 0000")
        }
    }
}

/// Serve the UCI protocol until `quit` or end of input. Searches run to
/// completion before `go` returns, so `stop` has nothing to interrupt.
pub fn uci_serve<E: Evaluator>(
    evaluator: &E,
    config: EngineConfig,
    opts: UciOptions,
    input: impl BufRead,
    out: &mut impl Write,
) -> io::Result<()> {
    let mut state = State {
        config,
        seed: opts.seed,
        games: 0,
        moves: Vec::new(),
    };
    for line in input.lines() {
        let line = line?;
        let words: Vec<&str> = line.split_whitespace().collect();
        let Some((&cmd, args)) = words.split_first() else {
            continue;
        };
        match cmd {
            "uci" => {
                writeln!(out, "id name Ponder {}", env!("CARGO_PKG_VERSION"))?;
                writeln!(out, "id author Ponder developers")?;
                writeln!(out, "option name Variant type combo default {} var policy var greedy var search var adaptive_search", state.config.variant.name())?;
                writeln!(out, "option name OpponentElo type spin default {} min 500 max 3000", state.config.opponent_elo)?;
                writeln!(out, "option name OwnElo type spin default {} min 500 max 3000", state.config.conditioning_elo())?;
                writeln!(out, "option name Seed type spin default {} min 0 max 4294967295", state.seed)?;
                writeln!(out, "uciok")?;
            }
            "isready" => writeln!(out, "readyok")?,
            "ucinewgame" => {
                state.games += 1;
                state.moves.clear();
            }
            "position" => match parse_position(args) {
                Ok(m) => state.moves = m,
                Err(e) => writeln!(out, "info string {e}")?,
            },
            "setoption" => {
                if let Err(e) = set_option(&mut state, args) {
                    writeln!(out, "info string {e}")?;
                }
            }
            "go" => go(evaluator, &state, &opts, args, out)?,
            "stop" | "ponderhit" => {}
            "quit" => break,
            other => writeln!(out, "info string unknown command {other:?}")?,
        }
        out.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Variant;
    use crate::model::PositionEvaluator;

    fn run(script: &str, variant: Variant) -> String {
        let ev = PositionEvaluator::uniform(2.0, 0.1);
        let cfg = EngineConfig::for_variant(variant, 1500.0, 10.0);
        let mut out = Vec::new();
        uci_serve(&ev, cfg, UciOptions::default(), script.as_bytes(), &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn handshake_and_bestmove() {
        let out = run("uci\nisready\nposition startpos moves e2e4\ngo\nquit\n", Variant::Policy);
        assert!(out.contains("uciok"));
        assert!(out.contains("readyok"));
        let best = out.lines().find_map(|l| l.strip_prefix("bestmove ")).unwrap();
        let pos = Position::startpos().apply_uci("e2e4").unwrap();
        assert!(pos.is_legal(best.parse().unwrap()));
    }

    #[test]
    fn errors_become_info_strings() {
        let out = run("position startpos moves e2e5\nposition fen 8/8/8/8/8/8/8/8 w - - 0 1\nfoo\nsetoption name Bogus value 1\ngo\n", Variant::Search);
        assert_eq!(out.lines().filter(|l| l.starts_with("info string")).count(), 4);
        assert!(out.lines().any(|l| l.starts_with("bestmove ")));
    }

    #[test]
    fn byte_stable_given_seed() {
        let script = "uci\nsetoption name Variant value search\nucinewgame\nisready\nposition startpos\ngo movetime 5000\nposition startpos moves d2d4 d7d5\ngo wtime 60000 btime 60000\nstop\nquit\n";
        assert_eq!(run(script, Variant::Policy), run(script, Variant::Policy));
    }
}
