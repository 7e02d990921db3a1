//! Standard algebraic notation, as found in PGN movetext.

use super::position::Position;
use super::types::{Move, PieceKind, Square};
use super::ChessError;

impl Position {
    /// Resolve a SAN token (e.g. `Nbd7`, `exd6`, `O-O`, `e8=Q+`) to a legal move.
    pub fn parse_san(&self, san: &str) -> Result<Move, ChessError> {
        let err = || ChessError::BadSan {
            san: san.to_string(),
            fen: self.to_fen(),
        };
        let text = san.trim_end_matches(['+', '#', '!', '?']);
        let legal = self.legal_moves();

        if matches!(text, "O-O" | "0-0" | "O-O-O" | "0-0-0") {
            let long = text.len() == 5;
            return legal
                .into_iter()
                .find(|&m| self.is_castling(m) && (m.to.file() == 2) == long)
                .ok_or_else(err);
        }

        let bytes = text.as_bytes();
        if bytes.len() < 2 {
            return Err(err());
        }
        let (kind, rest) = match bytes[0] {
            b'N' => (PieceKind::Knight, &text[1..]),
            b'B' => (PieceKind::Bishop, &text[1..]),
            b'R' => (PieceKind::Rook, &text[1..]),
            b'Q' => (PieceKind::Queen, &text[1..]),
            b'K' => (PieceKind::King, &text[1..]),
            _ => (PieceKind::Pawn, text),
        };

        let (body, promotion) = match rest.find('=') {
            Some(i) => {
                let p = rest[i + 1..].chars().next().and_then(PieceKind::from_char);
                (&rest[..i], Some(p.ok_or_else(err)?))
            }
            None => {
                // Some exporters omit the '=' ("e8Q").
                let last = rest.chars().last().ok_or_else(err)?;
                if kind == PieceKind::Pawn && "QRBN".contains(last) && rest.len() >= 3 {
                    (&rest[..rest.len() - 1], PieceKind::from_char(last))
                } else {
                    (rest, None)
                }
            }
        };
        let body: String = body.chars().filter(|&c| c != 'x' && c != '-').collect();
        if body.len() < 2 {
            return Err(err());
        }
        let to: Square = body[body.len() - 2..].parse().map_err(|_| err())?;
        let disambig = &body[..body.len() - 2];
        let mut from_file = None;
        let mut from_rank = None;
        for c in disambig.chars() {
            match c {
                'a'..='h' => from_file = Some(c as u8 - b'a'),
                '1'..='8' => from_rank = Some(c as u8 - b'1'),
                _ => return Err(err()),
            }
        }

        let mut found = None;
        for m in legal {
            let Some(piece) = self.piece_at(m.from) else {
                continue;
            };
            if piece.kind != kind || m.to != to || m.promotion != promotion {
                continue;
            }
            if from_file.is_some_and(|f| f != m.from.file()) || from_rank.is_some_and(|r| r != m.from.rank()) {
                continue;
            }
            if found.is_some() {
                return Err(err());
            }
            found = Some(m);
        }
        found.ok_or_else(err)
    }

    /// Format a legal move in SAN, including check/mate suffixes.
    pub fn san(&self, m: Move) -> String {
        let mut out = String::new();
        let piece = self.piece_at(m.from).expect("san of a move from an empty square");
        if self.is_castling(m) {
            out.push_str(if m.to.file() == 6 { "O-O" } else { "O-O-O" });
        } else {
            let capture = self.is_capture(m);
            if piece.kind == PieceKind::Pawn {
                if capture {
                    out.push((b'a' + m.from.file()) as char);
                }
            } else {
                out.push(piece.kind.char().to_ascii_uppercase());
                let rivals: Vec<Move> = self
                    .legal_moves()
                    .into_iter()
                    .filter(|o| {
                        o.to == m.to
                            && o.from != m.from
                            && self.piece_at(o.from).map(|p| p.kind) == Some(piece.kind)
                    })
                    .collect();
                if !rivals.is_empty() {
                    let same_file = rivals.iter().any(|o| o.from.file() == m.from.file());
                    let same_rank = rivals.iter().any(|o| o.from.rank() == m.from.rank());
                    if !same_file {
                        out.push((b'a' + m.from.file()) as char);
                    } else if !same_rank {
                        out.push((b'1' + m.from.rank()) as char);
                    } else {
                        out.push_str(&m.from.to_string());
                    }
                }
            }
            if capture {
                out.push('x');
            }
            out.push_str(&m.to.to_string());
            if let Some(p) = m.promotion {
                out.push('=');
                out.push(p.char().to_ascii_uppercase());
            }
        }
        let next = self.play(m);
        if next.in_check() {
            out.push(if next.has_legal_move() { '+' } else { '#' });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        let pos = Position::startpos();
        assert_eq!(pos.parse_san("e4").unwrap().to_string(), "e2e4");
        assert_eq!(pos.parse_san("Nf3").unwrap().to_string(), "g1f3");
        assert!(pos.parse_san("Ke2").is_err());
        assert!(pos.parse_san("Qxd7").is_err());
    }

    #[test]
    fn disambiguation_and_promotion() {
        let pos = Position::from_fen("k7/4P3/8/8/8/8/8/KN3N2 w - - 0 1").unwrap();
        assert_eq!(pos.parse_san("Nbd2").unwrap().to_string(), "b1d2");
        assert_eq!(pos.parse_san("Nfd2").unwrap().to_string(), "f1d2");
        assert!(pos.parse_san("Nd2").is_err());
        assert_eq!(pos.parse_san("e8=Q+").unwrap().to_string(), "e7e8q");
        assert_eq!(pos.parse_san("e8N").unwrap().to_string(), "e7e8n");
        assert_eq!(pos.san("b1d2".parse().unwrap()), "Nbd2");
        assert_eq!(pos.san("e7e8q".parse().unwrap()), "e8=Q+");
    }

    #[test]
    fn castling_and_mate_suffix() {
        let pos = Position::from_fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1").unwrap();
        assert_eq!(pos.parse_san("O-O").unwrap().to_string(), "e1g1");
        assert_eq!(pos.parse_san("O-O-O").unwrap().to_string(), "e1c1");
        assert_eq!(pos.san("e1g1".parse().unwrap()), "O-O");
        let mate = Position::from_fen("6k1/5ppp/8/8/8/8/8/R5K1 w - - 0 1").unwrap();
        assert_eq!(mate.san("a1a8".parse().unwrap()), "Ra8#");
    }

    #[test]
    fn san_roundtrip_over_random_walk() {
        let mut pos = Position::startpos();
        let mut seed = 7u64;
        for _ in 0..200 {
            let moves = pos.legal_moves();
            if moves.is_empty() || pos.game_status().is_over() {
                break;
            }
            for &m in &moves {
                assert_eq!(pos.parse_san(&pos.san(m)).unwrap(), m);
            }
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            pos = pos.play(moves[(seed >> 33) as usize % moves.len()]);
        }
    }
}
