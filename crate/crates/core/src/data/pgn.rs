//! Lichess-style PGN: headers, SAN movetext and `[%clk H:MM:SS]` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::chess::{Color, GameStatus, Move, Position};

use super::record::{GameRecord, Termination, TimeControl};

/// Why a single game was skipped. Never fatal for the whole file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PgnDiagnostic {
    /// Zero-based index of the game within the input.
    pub game: usize,
    pub kind: PgnErrorKind,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PgnErrorKind {
    ParseError,
    IllegalMoveInSource,
}

#[derive(Clone, Debug, Default)]
pub struct PgnParse {
    pub games: Vec<GameRecord>,
    pub errors: Vec<PgnDiagnostic>,
}

/// Split a PGN file into per-game chunks (header block + movetext).
pub fn split_games(text: &str) -> Vec<&str> {
    let mut chunks = Vec::new();
    let mut start: Option<usize> = None;
    let mut seen_movetext = false;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            if seen_movetext {
                if let Some(s) = start {
                    chunks.push(&text[s..offset]);
                }
                start = None;
                seen_movetext = false;
            }
            if start.is_none() {
                start = Some(offset);
            }
        } else if !trimmed.is_empty() {
            if start.is_none() {
                start = Some(offset);
            }
            seen_movetext = true;
        }
        offset += line.len();
    }
    if let Some(s) = start {
        if !text[s..].trim().is_empty() {
            chunks.push(&text[s..]);
        }
    }
    chunks
}

/// Parse every game in `text`. Malformed games are reported in `errors` and
/// skipped; output order follows input order.
pub fn parse_pgn(text: &str) -> PgnParse {
    let chunks = split_games(text);
    let results: Vec<Result<GameRecord, PgnDiagnostic>> = chunks
        .par_iter()
        .enumerate()
        .map(|(i, chunk)| parse_game(chunk).map_err(|(kind, message)| PgnDiagnostic { game: i, kind, message }))
        .collect();
    let mut out = PgnParse::default();
    for r in results {
        match r {
            Ok(g) => out.games.push(g),
            Err(d) => out.errors.push(d),
        }
    }
    out
}

type GameError = (PgnErrorKind, String);

fn parse_err(msg: impl Into<String>) -> GameError {
    (PgnErrorKind::ParseError, msg.into())
}

fn parse_headers(chunk: &str) -> Result<(BTreeMap<String, String>, String), GameError> {
    let mut headers = BTreeMap::new();
    let mut movetext = String::new();
    for line in chunk.lines() {
        let t = line.trim();
        if t.starts_with('[') && movetext.trim().is_empty() {
            let inner = t
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| parse_err(format!("malformed header line {t:?}")))?;
            let (key, rest) = inner
                .split_once(char::is_whitespace)
                .ok_or_else(|| parse_err(format!("malformed header line {t:?}")))?;
            let value = rest
                .trim()
                .strip_prefix('"')
                .and_then(|s| s.strip_suffix('"'))
                .ok_or_else(|| parse_err(format!("unquoted header value {t:?}")))?;
            headers.insert(key.to_string(), value.replace("\\\"", "\""));
        } else {
            movetext.push_str(line);
            movetext.push('\n');
        }
    }
    Ok((headers, movetext))
}

#[derive(Debug, PartialEq)]
enum Token<'a> {
    San(&'a str),
    Comment(&'a str),
    Result(&'a str),
}

fn tokenize(movetext: &str) -> Result<Vec<Token<'_>>, GameError> {
    let mut tokens = Vec::new();
    let bytes = movetext.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b if b.is_ascii_whitespace() => i += 1,
            b'{' => {
                let end = movetext[i..]
                    .find('}')
                    .ok_or_else(|| parse_err("unterminated comment"))?;
                tokens.push(Token::Comment(&movetext[i + 1..i + end]));
                i += end + 1;
            }
            b';' => {
                let end = movetext[i..].find('\n').unwrap_or(movetext.len() - i);
                tokens.push(Token::Comment(&movetext[i + 1..i + end]));
                i += end;
            }
            b'(' => {
                // Variations are skipped entirely.
                let mut depth = 0;
                while i < bytes.len() {
                    match bytes[i] {
                        b'(' => depth += 1,
                        b')' => {
                            depth -= 1;
                            if depth == 0 {
                                i += 1;
                                break;
                            }
                        }
                        b'{' => {
                            let end = movetext[i..]
                                .find('}')
                                .ok_or_else(|| parse_err("unterminated comment"))?;
                            i += end;
                        }
                        _ => {}
                    }
                    i += 1;
                }
                if depth != 0 {
                    return Err(parse_err("unbalanced variation"));
                }
            }
            b')' => return Err(parse_err("unbalanced variation")),
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !b"{}();".contains(&bytes[i]) {
                    i += 1;
                }
                let word = &movetext[start..i];
                if matches!(word, "1-0" | "0-1" | "1/2-1/2" | "*") {
                    tokens.push(Token::Result(word));
                } else if word.starts_with('$') {
                    // NAG
                } else {
                    // Strip move numbers: "12." "12..." "12...e5".
                    let stripped = word.trim_start_matches(|c: char| c.is_ascii_digit());
                    let stripped = if stripped.len() < word.len() {
                        stripped.trim_start_matches('.')
                    } else {
                        stripped
                    };
                    if !stripped.is_empty() {
                        tokens.push(Token::San(stripped));
                    }
                }
            }
        }
    }
    Ok(tokens)
}

/// Extract `[%clk H:MM:SS(.f)]` from a comment body, in seconds.
pub fn parse_clock_comment(comment: &str) -> Option<f32> {
    let idx = comment.find("[%clk")?;
    let rest = comment[idx + 5..].trim_start();
    let end = rest.find(']')?;
    let parts: Vec<&str> = rest[..end].trim().split(':').collect();
    let mut secs = 0f64;
    for p in &parts {
        secs = secs * 60.0 + p.parse::<f64>().ok()?;
    }
    if parts.is_empty() || parts.len() > 3 {
        return None;
    }
    Some(secs as f32)
}

fn parse_elo(headers: &BTreeMap<String, String>, key: &str) -> Result<i32, GameError> {
    headers
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(format!("missing or invalid {key}")))
}

fn parse_game(chunk: &str) -> Result<GameRecord, GameError> {
    let (headers, movetext) = parse_headers(chunk)?;
    if headers.get("SetUp").map(String::as_str) == Some("1") || headers.contains_key("FEN") {
        return Err(parse_err("games from a custom start position are not supported"));
    }
    let white_elo = parse_elo(&headers, "WhiteElo")?;
    let black_elo = parse_elo(&headers, "BlackElo")?;
    let time_control: TimeControl = headers
        .get("TimeControl")
        .ok_or_else(|| parse_err("missing TimeControl"))?
        .parse()
        .map_err(|e: super::DataError| parse_err(e.to_string()))?;
    let result = headers
        .get("Result")
        .cloned()
        .ok_or_else(|| parse_err("missing Result"))?;

    let mut pos = Position::startpos();
    let mut moves: Vec<Move> = Vec::new();
    let mut clocks: Vec<Option<f32>> = Vec::new();
    let mut result_token = None;
    for tok in tokenize(&movetext)? {
        match tok {
            Token::San(san) => {
                if result_token.is_some() {
                    return Err(parse_err("moves after the result token"));
                }
                let m = pos.parse_san(san).map_err(|e| {
                    (
                        PgnErrorKind::IllegalMoveInSource,
                        format!("ply {}: {e}", moves.len() + 1),
                    )
                })?;
                pos = pos.play(m);
                moves.push(m);
                clocks.push(None);
            }
            Token::Comment(c) => {
                if let (Some(slot), Some(secs)) = (clocks.last_mut(), parse_clock_comment(c)) {
                    *slot = Some(secs);
                }
            }
            Token::Result(r) => result_token = Some(r.to_string()),
        }
    }
    if let Some(r) = &result_token {
        if *r != result {
            return Err(parse_err(format!("movetext result {r} disagrees with header {result}")));
        }
    }

    let outcome: i8 = match result.as_str() {
        "1-0" => 1,
        "0-1" => -1,
        "1/2-1/2" | "*" => 0,
        other => return Err(parse_err(format!("unknown result {other:?}"))),
    };
    let termination = termination_from_headers(&headers, &result, outcome, &pos)?;

    let (clocks, think_times) = if !clocks.is_empty() && clocks.iter().all(Option::is_some) {
        let clocks: Vec<f32> = clocks.into_iter().map(Option::unwrap).collect();
        let think = think_times_from_clocks(&clocks, time_control);
        (Some(clocks), Some(think))
    } else {
        (None, None)
    };

    let record = GameRecord {
        white_elo,
        black_elo,
        time_control,
        moves,
        think_times,
        clocks,
        outcome,
        termination,
    };
    record.validate().map_err(|e| parse_err(e.to_string()))?;
    Ok(record)
}

/// think time = (clock before) - (clock after) + increment, clamped at 0.
pub fn think_times_from_clocks(clocks: &[f32], tc: TimeControl) -> Vec<f32> {
    let base = tc.base as f32;
    let inc = tc.increment as f32;
    (0..clocks.len())
        .map(|i| {
            let before = if i >= 2 { clocks[i - 2] } else { base };
            (before - clocks[i] + inc).max(0.0)
        })
        .collect()
}

fn termination_from_headers(
    headers: &BTreeMap<String, String>,
    result: &str,
    outcome: i8,
    last: &Position,
) -> Result<Termination, GameError> {
    if result == "*" {
        return Ok(Termination::Unterminated);
    }
    let kind = headers.get("Termination").map(String::as_str).unwrap_or("Normal");
    let loser = match outcome {
        1 => Some(Color::Black),
        -1 => Some(Color::White),
        _ => None,
    };
    let status = last.game_status();
    Ok(match kind {
        "Time forfeit" => Termination::Timeout(loser.unwrap_or(last.side_to_move())),
        "Abandoned" => Termination::Abandoned,
        "Unterminated" => Termination::Unterminated,
        // "Normal", "Rules infraction" and anything else.
        _ => match (loser, status) {
            (Some(_), GameStatus::Checkmate { .. }) => Termination::Checkmate,
            (Some(side), _) => Termination::Resignation(side),
            (None, s) if s.is_draw() => Termination::RuleDraw,
            (None, _) => Termination::DrawAgreed,
        },
    })
}

pub fn format_clock(secs: f32) -> String {
    let tenths = (secs.max(0.0) as f64 * 10.0).round() as u64;
    let whole = tenths / 10;
    let (h, m, s) = (whole / 3600, (whole / 60) % 60, whole % 60);
    if tenths % 10 == 0 {
        format!("{h}:{m:02}:{s:02}")
    } else {
        format!("{h}:{m:02}:{s:02}.{}", tenths % 10)
    }
}

/// Render a game as Lichess-style PGN. `extra` headers are written after the
/// standard ones (in the given order).
pub fn write_pgn(rec: &GameRecord, extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    let result = rec.result_string();
    let termination = match rec.termination {
        Termination::Timeout(_) => "Time forfeit",
        Termination::Abandoned => "Abandoned",
        Termination::Unterminated => "Unterminated",
        _ => "Normal",
    };
    let mut headers: Vec<(&str, String)> = vec![
        ("Event", "Rated Blitz game".to_string()),
        ("Site", "?".to_string()),
        ("White", "?".to_string()),
        ("Black", "?".to_string()),
        ("Result", result.to_string()),
        ("WhiteElo", rec.white_elo.to_string()),
        ("BlackElo", rec.black_elo.to_string()),
        ("TimeControl", rec.time_control.to_string()),
        ("Termination", termination.to_string()),
    ];
    for (k, v) in extra {
        if let Some(slot) = headers.iter_mut().find(|(hk, _)| hk == k) {
            slot.1 = v.clone();
        } else {
            headers.push((k, v.clone()));
        }
    }
    for (k, v) in headers {
        let _ = writeln!(out, "[{k} \"{}\"]", v.replace('"', "\\\""));
    }
    out.push('\n');
    let mut pos = Position::startpos();
    let mut parts: Vec<String> = Vec::with_capacity(rec.moves.len() * 2 + 1);
    for (i, &m) in rec.moves.iter().enumerate() {
        let number = i / 2 + 1;
        let prefix = if i % 2 == 0 {
            format!("{number}. ")
        } else if rec.clocks.is_some() {
            format!("{number}... ")
        } else {
            String::new()
        };
        let mut part = format!("{prefix}{}", pos.san(m));
        if let Some(clocks) = &rec.clocks {
            let _ = write!(part, " {{ [%clk {}] }}", format_clock(clocks[i]));
        }
        parts.push(part);
        pos = pos.play(m);
    }
    parts.push(result.to_string());
    out.push_str(&parts.join(" "));
    out.push_str("\n\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PLY: &str = r#"[Event "Rated Blitz game"]
[Site "https://lichess.org/abcdefgh"]
[White "a"]
[Black "b"]
[Result "0-1"]
[WhiteElo "1500"]
[BlackElo "1620"]
[TimeControl "180+2"]
[Termination "Normal"]

1. e4 { [%clk 0:02:55] } 1... e5 { [%clk 0:02:58] } 0-1
"#;

    #[test]
    fn clock_arithmetic() {
        let parsed = parse_pgn(TWO_PLY);
        assert!(parsed.errors.is_empty(), "{:?}", parsed.errors);
        let g = &parsed.games[0];
        assert_eq!(g.think_times.as_deref(), Some(&[7.0f32, 4.0][..]));
        assert_eq!(g.termination, Termination::Resignation(Color::White));
        assert_eq!(g.outcome, -1);
        assert_eq!(g.white_elo, 1500);
        assert_eq!(g.black_elo, 1620);
    }

    #[test]
    fn draw_result_is_zero() {
        let text = TWO_PLY.replace("0-1", "1/2-1/2");
        let parsed = parse_pgn(&text);
        assert_eq!(parsed.games[0].outcome, 0);
        assert_eq!(parsed.games[0].termination, Termination::DrawAgreed);
    }

    #[test]
    fn negative_think_time_clamped() {
        let text = TWO_PLY.replace("0:02:55", "0:03:05");
        let g = &parse_pgn(&text).games[0];
        assert_eq!(g.think_times.as_ref().unwrap()[0], 0.0);
    }

    #[test]
    fn missing_clocks_mark_times_absent() {
        let text = TWO_PLY.replace(" { [%clk 0:02:58] }", "");
        let g = &parse_pgn(&text).games[0];
        assert!(g.think_times.is_none());
        assert_eq!(g.moves.len(), 2);
    }

    #[test]
    fn bad_games_are_skipped_not_fatal() {
        let illegal = TWO_PLY.replace("1... e5", "1... e4");
        let no_elo = TWO_PLY.replace("[WhiteElo \"1500\"]\n", "");
        let text = format!("{illegal}\n{no_elo}\n{TWO_PLY}");
        let parsed = parse_pgn(&text);
        assert_eq!(parsed.games.len(), 1);
        assert_eq!(parsed.errors.len(), 2);
        assert_eq!(parsed.errors[0].game, 0);
        assert_eq!(parsed.errors[0].kind, PgnErrorKind::IllegalMoveInSource);
        assert_eq!(parsed.errors[1].kind, PgnErrorKind::ParseError);
    }

    #[test]
    fn lichess_export_replays_legally() {
        // A real-world shaped export with NAGs, annotations and a variation.
        let text = r#"[Event "Rated Blitz game"]
[Site "https://lichess.org/x"]
[Result "1-0"]
[WhiteElo "1850"]
[BlackElo "1790"]
[TimeControl "300+0"]
[Termination "Normal"]

1. e4 { [%clk 0:05:00] } 1... e5 { [%clk 0:05:00] } 2. Bc4 { [%clk 0:04:58] } 2... Nc6 { [%clk 0:04:57] }
3. Qh5 { [%clk 0:04:55] } 3... Nf6?? $4 { [%clk 0:04:50] } (3... g6 4. Qf3) 4. Qxf7# { [%clk 0:04:53] } 1-0
"#;
        let parsed = parse_pgn(text);
        assert!(parsed.errors.is_empty(), "{:?}", parsed.errors);
        let g = &parsed.games[0];
        assert_eq!(g.moves.len(), 7);
        assert_eq!(g.termination, Termination::Checkmate);
        assert!(g.positions().is_ok());
        assert_eq!(g.think_times.as_ref().unwrap()[6], 2.0);
    }

    #[test]
    fn clock_comment_formats() {
        assert_eq!(parse_clock_comment(" [%clk 0:02:55] "), Some(175.0));
        assert_eq!(parse_clock_comment("[%clk 1:00:00.5]"), Some(3600.5));
        assert_eq!(parse_clock_comment("[%eval 0.3] [%clk 0:00:09]"), Some(9.0));
        assert_eq!(parse_clock_comment("no clock"), None);
        assert_eq!(format_clock(175.0), "0:02:55");
        assert_eq!(format_clock(3600.5), "1:00:00.5");
    }

    #[test]
    fn write_then_parse_roundtrip() {
        let g = parse_pgn(TWO_PLY).games.remove(0);
        let text = write_pgn(&g, &[]);
        let back = parse_pgn(&text);
        assert!(back.errors.is_empty(), "{:?}", back.errors);
        assert_eq!(back.games[0], g);
    }
}
