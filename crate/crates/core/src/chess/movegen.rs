//! Legal move generation: pseudo-legal generation filtered by a king-safety
//! test on a copied set of bitboards.

use super::attacks::{self, squares};
use super::position::Position;
use super::types::{CastlingRights, Color, Move, PieceKind, Square};

const RANK_1: u64 = 0xff;
const RANK_8: u64 = 0xff << 56;

impl Position {
    /// All legal moves, in generation order (stable across runs).
    pub fn legal_moves(&self) -> Vec<Move> {
        let mut moves = Vec::with_capacity(48);
        self.pseudo_legal(&mut moves, u64::MAX);
        moves.retain(|&m| self.is_legal_unchecked(m));
        moves
    }

    /// Legal moves that capture something (including en passant).
    pub fn legal_captures(&self) -> Vec<Move> {
        let them = self.color_bb(self.side_to_move().opposite());
        let mut targets = them;
        if let Some(ep) = self.ep_square() {
            targets |= ep.bb();
        }
        let mut moves = Vec::with_capacity(16);
        self.pseudo_legal(&mut moves, targets);
        moves.retain(|&m| {
            let is_capture = self.piece_at(m.to).is_some()
                || (Some(m.to) == self.ep_square()
                    && self.piece_at(m.from).map(|p| p.kind) == Some(PieceKind::Pawn)
                    && m.from.file() != m.to.file());
            is_capture && self.is_legal_unchecked(m)
        });
        moves
    }

    /// Cheaper than `legal_moves().is_empty()`: stops at the first legal move.
    pub fn has_legal_move(&self) -> bool {
        let mut moves = Vec::with_capacity(48);
        self.pseudo_legal(&mut moves, u64::MAX);
        moves.into_iter().any(|m| self.is_legal_unchecked(m))
    }

    pub fn is_legal(&self, m: Move) -> bool {
        // Cheap rejections first; the authoritative answer is membership.
        match self.piece_at(m.from) {
            Some(p) if p.color == self.side_to_move() => {}
            _ => return false,
        }
        self.legal_moves().contains(&m)
    }

    /// Whether the move captures a piece (en passant included).
    pub fn is_capture(&self, m: Move) -> bool {
        self.piece_at(m.to).is_some() || self.is_en_passant(m)
    }

    pub fn is_en_passant(&self, m: Move) -> bool {
        Some(m.to) == self.ep_square()
            && m.from.file() != m.to.file()
            && self.piece_at(m.from).map(|p| p.kind) == Some(PieceKind::Pawn)
            && self.piece_at(m.to).is_none()
    }

    pub fn is_castling(&self, m: Move) -> bool {
        self.piece_at(m.from).map(|p| p.kind) == Some(PieceKind::King)
            && (m.from.file() as i8 - m.to.file() as i8).abs() == 2
    }

    fn pseudo_legal(&self, out: &mut Vec<Move>, targets: u64) {
        let us = self.side_to_move();
        let own = self.color_bb(us);
        let enemy = self.color_bb(us.opposite());
        let occ = self.occupied();
        let allowed = !own & targets;

        self.pawn_moves(out, us, enemy, occ, targets);

        for from in squares(self.pieces(us, PieceKind::Knight)) {
            push_all(out, from, attacks::knight(from) & allowed);
        }
        for from in squares(self.pieces(us, PieceKind::Bishop)) {
            push_all(out, from, attacks::bishop(from, occ) & allowed);
        }
        for from in squares(self.pieces(us, PieceKind::Rook)) {
            push_all(out, from, attacks::rook(from, occ) & allowed);
        }
        for from in squares(self.pieces(us, PieceKind::Queen)) {
            push_all(out, from, attacks::queen(from, occ) & allowed);
        }
        let king = self.king_square(us);
        push_all(out, king, attacks::king(king) & allowed);
        if targets == u64::MAX {
            self.castling_moves(out, us, king, occ);
        }
    }

    fn pawn_moves(&self, out: &mut Vec<Move>, us: Color, enemy: u64, occ: u64, targets: u64) {
        let (dir, start_rank, last_rank) = match us {
            Color::White => (1i8, 1u8, RANK_8),
            Color::Black => (-1i8, 6u8, RANK_1),
        };
        let ep_bb = self.ep_square().map(|s| s.bb()).unwrap_or(0);
        for from in squares(self.pieces(us, PieceKind::Pawn)) {
            if let Some(one) = from.offset(0, dir) {
                if occ & one.bb() == 0 {
                    if targets & one.bb() != 0 {
                        push_pawn(out, from, one, last_rank);
                    }
                    if from.rank() == start_rank {
                        let two = one.offset(0, dir).expect("double push stays on board");
                        if occ & two.bb() == 0 && targets & two.bb() != 0 {
                            out.push(Move::new(from, two));
                        }
                    }
                }
            }
            let caps = attacks::pawn(us, from) & (enemy | ep_bb) & targets;
            for to in squares(caps) {
                push_pawn(out, from, to, last_rank);
            }
        }
    }

    fn castling_moves(&self, out: &mut Vec<Move>, us: Color, king: Square, occ: u64) {
        let rights = self.castling();
        let them = us.opposite();
        let rank = king.rank();
        let home = match us {
            Color::White => 0,
            Color::Black => 7,
        };
        if rank != home || king.file() != 4 {
            return;
        }
        if rights.has(CastlingRights::kingside(us)) {
            let f = Square::from_coords(5, rank);
            let g = Square::from_coords(6, rank);
            if occ & (f.bb() | g.bb()) == 0
                && !self.is_attacked(king, them)
                && !self.is_attacked(f, them)
                && !self.is_attacked(g, them)
            {
                out.push(Move::new(king, g));
            }
        }
        if rights.has(CastlingRights::queenside(us)) {
            let d = Square::from_coords(3, rank);
            let c = Square::from_coords(2, rank);
            let b = Square::from_coords(1, rank);
            if occ & (d.bb() | c.bb() | b.bb()) == 0
                && !self.is_attacked(king, them)
                && !self.is_attacked(d, them)
                && !self.is_attacked(c, them)
            {
                out.push(Move::new(king, c));
            }
        }
    }
}

fn push_all(out: &mut Vec<Move>, from: Square, targets: u64) {
    out.extend(squares(targets).map(|to| Move::new(from, to)));
}

fn push_pawn(out: &mut Vec<Move>, from: Square, to: Square, last_rank: u64) {
    if to.bb() & last_rank != 0 {
        for kind in PieceKind::PROMOTIONS {
            out.push(Move::with_promotion(from, to, kind));
        }
    } else {
        out.push(Move::new(from, to));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uci_set(pos: &Position) -> Vec<String> {
        let mut v: Vec<String> = pos.legal_moves().iter().map(|m| m.to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn twenty_opening_moves() {
        assert_eq!(Position::startpos().legal_moves().len(), 20);
    }

    #[test]
    fn all_four_promotions() {
        let pos = Position::from_fen("7k/4P3/8/8/8/8/8/K7 w - - 0 1").unwrap();
        let moves = uci_set(&pos);
        for m in ["e7e8q", "e7e8r", "e7e8b", "e7e8n"] {
            assert!(moves.contains(&m.to_string()), "missing {m}");
        }
        assert!(!moves.contains(&"e7e8".to_string()));
    }

    #[test]
    fn check_evasions_are_safe() {
        // Black king on e8 checked by the rook on e1.
        let pos = Position::from_fen("4k3/8/8/8/8/8/3P4/4R1K1 b - - 0 1").unwrap();
        assert!(pos.in_check());
        let moves = pos.legal_moves();
        assert!(!moves.is_empty());
        for m in moves {
            let next = pos.play(m);
            assert!(!next.is_attacked(next.king_square(Color::Black), Color::White));
        }
    }

    #[test]
    fn castling_blocked_through_check() {
        // f1 attacked by the bishop on c4: kingside castling illegal.
        let pos = Position::from_fen("4k3/8/8/8/2b5/8/8/4K2R w K - 0 1").unwrap();
        assert!(!uci_set(&pos).contains(&"e1g1".to_string()));
        let pos = Position::from_fen("4k3/8/8/8/8/8/8/4K2R w K - 0 1").unwrap();
        assert!(uci_set(&pos).contains(&"e1g1".to_string()));
    }

    #[test]
    fn en_passant_capture_generated() {
        let pos = Position::from_fen("4k3/8/8/3pP3/8/8/8/4K3 w - d6 0 1").unwrap();
        let m: Move = "e5d6".parse().unwrap();
        assert!(pos.legal_moves().contains(&m));
        assert!(pos.is_en_passant(m));
        let next = pos.play(m);
        assert!(next.piece_at("d5".parse().unwrap()).is_none());
    }

    #[test]
    fn en_passant_pin_respected() {
        // Capturing en passant would expose the white king on the rank.
        let pos = Position::from_fen("8/8/8/K2pP2r/8/8/8/7k w - d6 0 1").unwrap();
        assert!(!pos.legal_moves().contains(&"e5d6".parse().unwrap()));
    }
}
