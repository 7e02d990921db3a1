use std::fmt;
use std::sync::OnceLock;

use super::attacks;
use super::types::{CastlingRights, Color, Move, Piece, PieceKind, Square};
use super::ChessError;

pub const START_FEN: &str = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";

struct Zobrist {
    pieces: [[[u64; 64]; 6]; 2],
    side: u64,
    castling: [u64; 16],
    ep_file: [u64; 8],
}

fn zobrist() -> &'static Zobrist {
    static KEYS: OnceLock<Zobrist> = OnceLock::new();
    KEYS.get_or_init(|| {
        // splitmix64 with a fixed seed: keys are stable across runs and builds.
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        let mut next = || {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        };
        let mut z = Zobrist {
            pieces: [[[0; 64]; 6]; 2],
            side: 0,
            castling: [0; 16],
            ep_file: [0; 8],
        };
        for c in 0..2 {
            for k in 0..6 {
                for s in 0..64 {
                    z.pieces[c][k][s] = next();
                }
            }
        }
        z.side = next();
        for c in z.castling.iter_mut() {
            *c = next();
        }
        for f in z.ep_file.iter_mut() {
            *f = next();
        }
        z
    })
}

/// Full game state. Positions are values: `play` returns a new position.
///
/// `history` holds the repetition keys of earlier positions since the last
/// pawn move or capture, oldest first.
#[derive(Clone, Debug)]
pub struct Position {
    by_color: [u64; 2],
    by_kind: [u64; 6],
    board: [Option<Piece>; 64],
    side: Color,
    castling: CastlingRights,
    ep: Option<Square>,
    halfmove: u32,
    fullmove: u32,
    key: u64,
    history: Vec<u64>,
}

impl PartialEq for Position {
    /// FIDE identity: placement, side to move, castling rights and en passant
    /// only when a legal en passant capture exists.
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
            && self.board == other.board
            && self.side == other.side
            && self.castling == other.castling
    }
}

impl Eq for Position {}

impl Default for Position {
    fn default() -> Self {
        Position::startpos()
    }
}

impl Position {
    pub fn startpos() -> Position {
        Position::from_fen(START_FEN).expect("start FEN is valid")
    }

    fn empty() -> Position {
        Position {
            by_color: [0; 2],
            by_kind: [0; 6],
            board: [None; 64],
            side: Color::White,
            castling: CastlingRights::default(),
            ep: None,
            halfmove: 0,
            fullmove: 1,
            key: 0,
            history: Vec::new(),
        }
    }

    pub fn from_fen(fen: &str) -> Result<Position, ChessError> {
        let bad = |why: &str| ChessError::BadFen(format!("{why}: {fen}"));
        let fields: Vec<&str> = fen.split_whitespace().collect();
        if fields.len() < 4 || fields.len() > 6 {
            return Err(bad("expected 4 to 6 fields"));
        }
        let mut pos = Position::empty();
        let ranks: Vec<&str> = fields[0].split('/').collect();
        if ranks.len() != 8 {
            return Err(bad("expected 8 ranks"));
        }
        for (i, row) in ranks.iter().enumerate() {
            let rank = 7 - i as u8;
            let mut file = 0u8;
            for c in row.chars() {
                if let Some(d) = c.to_digit(10) {
                    if !(1..=8).contains(&d) {
                        return Err(bad("bad empty-square count"));
                    }
                    file += d as u8;
                } else {
                    let piece = Piece::from_fen_char(c).ok_or_else(|| bad("bad piece char"))?;
                    if file >= 8 {
                        return Err(bad("rank overflow"));
                    }
                    pos.put(Square::from_coords(file, rank), piece);
                    file += 1;
                }
                if file > 8 {
                    return Err(bad("rank overflow"));
                }
            }
            if file != 8 {
                return Err(bad("rank underflow"));
            }
        }
        pos.side = match fields[1] {
            "w" => Color::White,
            "b" => Color::Black,
            _ => return Err(bad("bad side to move")),
        };
        let mut rights = 0u8;
        if fields[2] != "-" {
            for c in fields[2].chars() {
                rights |= match c {
                    'K' => CastlingRights::WHITE_KING,
                    'Q' => CastlingRights::WHITE_QUEEN,
                    'k' => CastlingRights::BLACK_KING,
                    'q' => CastlingRights::BLACK_QUEEN,
                    _ => return Err(bad("bad castling field")),
                };
            }
        }
        pos.castling = CastlingRights(rights);
        pos.sanitize_castling();
        pos.ep = match fields[3] {
            "-" => None,
            s => {
                let sq: Square = s.parse().map_err(|_| bad("bad en passant square"))?;
                let expected_rank = if pos.side == Color::White { 5 } else { 2 };
                if sq.rank() != expected_rank {
                    return Err(bad("en passant square on wrong rank"));
                }
                Some(sq)
            }
        };
        pos.halfmove = match fields.get(4) {
            Some(s) => s.parse().map_err(|_| bad("bad halfmove clock"))?,
            None => 0,
        };
        pos.fullmove = match fields.get(5) {
            Some(s) => s.parse().map_err(|_| bad("bad fullmove number"))?,
            None => 1,
        };
        for color in [Color::White, Color::Black] {
            if (pos.pieces(color, PieceKind::King)).count_ones() != 1 {
                return Err(bad("each side needs exactly one king"));
            }
        }
        if pos.is_attacked(pos.king_square(pos.side.opposite()), pos.side) {
            return Err(bad("side not to move is in check"));
        }
        pos.key = pos.compute_key();
        Ok(pos)
    }

    pub fn to_fen(&self) -> String {
        let mut out = String::new();
        for rank in (0..8).rev() {
            let mut empty = 0;
            for file in 0..8 {
                match self.board[Square::from_coords(file, rank).index()] {
                    None => empty += 1,
                    Some(p) => {
                        if empty > 0 {
                            out.push_str(&empty.to_string());
                            empty = 0;
                        }
                        out.push(p.fen_char());
                    }
                }
            }
            if empty > 0 {
                out.push_str(&empty.to_string());
            }
            if rank > 0 {
                out.push('/');
            }
        }
        out.push(' ');
        out.push(if self.side == Color::White { 'w' } else { 'b' });
        out.push(' ');
        if self.castling.0 == 0 {
            out.push('-');
        } else {
            for (flag, c) in [
                (CastlingRights::WHITE_KING, 'K'),
                (CastlingRights::WHITE_QUEEN, 'Q'),
                (CastlingRights::BLACK_KING, 'k'),
                (CastlingRights::BLACK_QUEEN, 'q'),
            ] {
                if self.castling.has(flag) {
                    out.push(c);
                }
            }
        }
        out.push(' ');
        match self.ep {
            Some(sq) => out.push_str(&sq.to_string()),
            None => out.push('-'),
        }
        out.push_str(&format!(" {} {}", self.halfmove, self.fullmove));
        out
    }

    // Drop castling flags whose king or rook is not on its home square.
    fn sanitize_castling(&mut self) {
        let mut rights = self.castling.0;
        for (flag, king_sq, rook_sq, color) in [
            (CastlingRights::WHITE_KING, 4u8, 7u8, Color::White),
            (CastlingRights::WHITE_QUEEN, 4, 0, Color::White),
            (CastlingRights::BLACK_KING, 60, 63, Color::Black),
            (CastlingRights::BLACK_QUEEN, 60, 56, Color::Black),
        ] {
            let king_ok = self.board[king_sq as usize] == Some(Piece::new(color, PieceKind::King));
            let rook_ok = self.board[rook_sq as usize] == Some(Piece::new(color, PieceKind::Rook));
            if !(king_ok && rook_ok) {
                rights &= !flag;
            }
        }
        self.castling = CastlingRights(rights);
    }

    fn put(&mut self, sq: Square, piece: Piece) {
        self.board[sq.index()] = Some(piece);
        self.by_color[piece.color.index()] |= sq.bb();
        self.by_kind[piece.kind.index()] |= sq.bb();
    }

    fn remove(&mut self, sq: Square) -> Option<Piece> {
        let piece = self.board[sq.index()].take()?;
        self.by_color[piece.color.index()] &= !sq.bb();
        self.by_kind[piece.kind.index()] &= !sq.bb();
        Some(piece)
    }

    #[inline]
    pub fn side_to_move(&self) -> Color {
        self.side
    }

    #[inline]
    pub fn piece_at(&self, sq: Square) -> Option<Piece> {
        self.board[sq.index()]
    }

    #[inline]
    pub fn pieces(&self, color: Color, kind: PieceKind) -> u64 {
        self.by_color[color.index()] & self.by_kind[kind.index()]
    }

    #[inline]
    pub fn color_bb(&self, color: Color) -> u64 {
        self.by_color[color.index()]
    }

    #[inline]
    pub fn kind_bb(&self, kind: PieceKind) -> u64 {
        self.by_kind[kind.index()]
    }

    #[inline]
    pub fn occupied(&self) -> u64 {
        self.by_color[0] | self.by_color[1]
    }

    pub fn castling(&self) -> CastlingRights {
        self.castling
    }

    /// En passant target square as it would appear in FEN (set after any
    /// double pawn push, whether or not a capture is possible).
    pub fn ep_square(&self) -> Option<Square> {
        self.ep
    }

    pub fn halfmove_clock(&self) -> u32 {
        self.halfmove
    }

    pub fn fullmove_number(&self) -> u32 {
        self.fullmove
    }

    /// Repetition key: equal keys mean FIDE-identical positions.
    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn history(&self) -> &[u64] {
        &self.history
    }

    pub fn king_square(&self, color: Color) -> Square {
        let bb = self.pieces(color, PieceKind::King);
        debug_assert!(bb != 0, "missing king");
        Square::new(bb.trailing_zeros() as u8)
    }

    pub fn in_check(&self) -> bool {
        self.is_attacked(self.king_square(self.side), self.side.opposite())
    }

    /// Is `sq` attacked by any piece of `by`?
    pub fn is_attacked(&self, sq: Square, by: Color) -> bool {
        attacked_with(&self.by_color, &self.by_kind, sq, by)
    }

    /// Bitboard of pieces of `by` attacking `sq` with the current occupancy.
    pub fn attackers(&self, sq: Square, by: Color) -> u64 {
        let occ = self.occupied();
        let them = self.by_color[by.index()];
        let diag = self.by_kind[PieceKind::Bishop.index()] | self.by_kind[PieceKind::Queen.index()];
        let ortho = self.by_kind[PieceKind::Rook.index()] | self.by_kind[PieceKind::Queen.index()];
        them & ((attacks::pawn(by.opposite(), sq) & self.by_kind[PieceKind::Pawn.index()])
            | (attacks::knight(sq) & self.by_kind[PieceKind::Knight.index()])
            | (attacks::king(sq) & self.by_kind[PieceKind::King.index()])
            | (attacks::bishop(sq, occ) & diag)
            | (attacks::rook(sq, occ) & ortho))
    }

    fn compute_key(&self) -> u64 {
        let z = zobrist();
        let mut key = 0u64;
        for sq in Square::all() {
            if let Some(p) = self.board[sq.index()] {
                key ^= z.pieces[p.color.index()][p.kind.index()][sq.index()];
            }
        }
        if self.side == Color::Black {
            key ^= z.side;
        }
        key ^= z.castling[self.castling.0 as usize];
        if let Some(ep) = self.ep {
            if self.ep_capture_possible(ep) {
                key ^= z.ep_file[ep.file() as usize];
            }
        }
        key
    }

    /// Whether the side to move has a legal en passant capture onto `ep`.
    fn ep_capture_possible(&self, ep: Square) -> bool {
        let us = self.side;
        let capturers = attacks::pawn(us.opposite(), ep) & self.pieces(us, PieceKind::Pawn);
        attacks::squares(capturers).any(|from| self.is_legal_unchecked(Move::new(from, ep)))
    }

    /// True when `m` (assumed pseudo-legal) does not leave the mover in check.
    pub(crate) fn is_legal_unchecked(&self, m: Move) -> bool {
        let us = self.side;
        let them = us.opposite();
        let mut by_color = self.by_color;
        let mut by_kind = self.by_kind;
        let Some(piece) = self.board[m.from.index()] else {
            return false;
        };
        let from_bb = m.from.bb();
        let to_bb = m.to.bb();
        if let Some(captured) = self.board[m.to.index()] {
            by_color[captured.color.index()] &= !to_bb;
            by_kind[captured.kind.index()] &= !to_bb;
        }
        if piece.kind == PieceKind::Pawn
            && Some(m.to) == self.ep
            && m.from.file() != m.to.file()
            && self.board[m.to.index()].is_none()
        {
            let cap_sq = Square::from_coords(m.to.file(), m.from.rank());
            by_color[them.index()] &= !cap_sq.bb();
            by_kind[PieceKind::Pawn.index()] &= !cap_sq.bb();
        }
        by_color[us.index()] ^= from_bb | to_bb;
        by_kind[piece.kind.index()] ^= from_bb | to_bb;
        let king_sq = if piece.kind == PieceKind::King {
            m.to
        } else {
            self.king_square(us)
        };
        !attacked_with(&by_color, &by_kind, king_sq, them)
    }

    /// Play a move known to be legal. Use [`Position::apply_move`] for
    /// untrusted input.
    pub fn play(&self, m: Move) -> Position {
        let mut next = self.clone();
        next.play_in_place(m);
        next
    }

    pub(crate) fn play_in_place(&mut self, m: Move) {
        let us = self.side;
        let them = us.opposite();
        let piece = self.board[m.from.index()].expect("move from an empty square");
        let mut irreversible = piece.kind == PieceKind::Pawn;
        let prev_key = self.key;

        if let Some(captured) = self.remove(m.to) {
            debug_assert!(captured.color == them);
            irreversible = true;
        }
        if piece.kind == PieceKind::Pawn && Some(m.to) == self.ep && m.from.file() != m.to.file() {
            let cap_sq = Square::from_coords(m.to.file(), m.from.rank());
            if self.board[cap_sq.index()] == Some(Piece::new(them, PieceKind::Pawn)) {
                self.remove(cap_sq);
            }
        }
        self.remove(m.from);
        let placed = match m.promotion {
            Some(kind) => Piece::new(us, kind),
            None => piece,
        };
        self.put(m.to, placed);

        if piece.kind == PieceKind::King && (m.from.file() as i8 - m.to.file() as i8).abs() == 2 {
            let rank = m.from.rank();
            let (rook_from, rook_to) = if m.to.file() == 6 {
                (Square::from_coords(7, rank), Square::from_coords(5, rank))
            } else {
                (Square::from_coords(0, rank), Square::from_coords(3, rank))
            };
            if let Some(rook) = self.remove(rook_from) {
                self.put(rook_to, rook);
            }
        }

        let mut rights = self.castling.0;
        for sq in [m.from, m.to] {
            rights &= match sq.index() {
                0 => !CastlingRights::WHITE_QUEEN,
                7 => !CastlingRights::WHITE_KING,
                4 => !(CastlingRights::WHITE_KING | CastlingRights::WHITE_QUEEN),
                56 => !CastlingRights::BLACK_QUEEN,
                63 => !CastlingRights::BLACK_KING,
                60 => !(CastlingRights::BLACK_KING | CastlingRights::BLACK_QUEEN),
                _ => 0xff,
            };
        }
        self.castling = CastlingRights(rights);

        self.ep = None;
        if piece.kind == PieceKind::Pawn && (m.from.rank() as i8 - m.to.rank() as i8).abs() == 2 {
            self.ep = Some(Square::from_coords(m.from.file(), (m.from.rank() + m.to.rank()) / 2));
        }

        if irreversible {
            self.halfmove = 0;
            self.history.clear();
        } else {
            self.halfmove += 1;
            self.history.push(prev_key);
        }
        if us == Color::Black {
            self.fullmove += 1;
        }
        self.side = them;
        self.key = self.compute_key();
    }

    /// Validate `m` against the legal move list and play it.
    pub fn apply_move(&self, m: Move) -> Result<Position, ChessError> {
        if self.is_legal(m) {
            Ok(self.play(m))
        } else {
            Err(ChessError::IllegalMove {
                uci: m.to_string(),
                fen: self.to_fen(),
            })
        }
    }

    /// Parse a UCI string and apply it.
    pub fn apply_uci(&self, uci: &str) -> Result<Position, ChessError> {
        let m: Move = uci.parse()?;
        self.apply_move(m)
    }

    /// Number of occurrences of the current position among itself and its
    /// reversible history.
    pub fn repetition_count(&self) -> usize {
        1 + self.history.iter().filter(|&&k| k == self.key).count()
    }

    /// Material balance in centipawns from `color`'s point of view.
    pub fn material(&self, color: Color) -> i32 {
        let mut total = 0;
        for kind in PieceKind::ALL {
            let diff = self.pieces(color, kind).count_ones() as i32
                - self.pieces(color.opposite(), kind).count_ones() as i32;
            total += diff * kind.value();
        }
        total
    }
}

fn attacked_with(by_color: &[u64; 2], by_kind: &[u64; 6], sq: Square, by: Color) -> bool {
    let them = by_color[by.index()];
    let occ = by_color[0] | by_color[1];
    if attacks::pawn(by.opposite(), sq) & them & by_kind[PieceKind::Pawn.index()] != 0 {
        return true;
    }
    if attacks::knight(sq) & them & by_kind[PieceKind::Knight.index()] != 0 {
        return true;
    }
    if attacks::king(sq) & them & by_kind[PieceKind::King.index()] != 0 {
        return true;
    }
    let queens = by_kind[PieceKind::Queen.index()];
    let diag = them & (by_kind[PieceKind::Bishop.index()] | queens);
    if diag != 0 && attacks::bishop(sq, occ) & diag != 0 {
        return true;
    }
    let ortho = them & (by_kind[PieceKind::Rook.index()] | queens);
    ortho != 0 && attacks::rook(sq, occ) & ortho != 0
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rank in (0..8).rev() {
            for file in 0..8 {
                let c = self.board[Square::from_coords(file, rank).index()]
                    .map(|p| p.fen_char())
                    .unwrap_or('.');
                write!(f, "{c}")?;
                if file < 7 {
                    write!(f, " ")?;
                }
            }
            writeln!(f)?;
        }
        write!(f, "{}", self.to_fen())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fen_roundtrip() {
        for fen in [
            START_FEN,
            "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1",
            "8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1",
            "rnbqkbnr/pppp1ppp/8/4p3/4P3/8/PPPP1PPP/RNBQKBNR w KQkq e6 0 2",
        ] {
            assert_eq!(Position::from_fen(fen).unwrap().to_fen(), fen);
        }
    }

    #[test]
    fn rejects_bad_fens() {
        assert!(Position::from_fen("8/8/8/8/8/8/8/8 w - - 0 1").is_err());
        assert!(Position::from_fen("rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP w KQkq - 0 1").is_err());
        // Side not to move (black) is in check.
        assert!(Position::from_fen("4k3/8/8/8/8/8/8/4R1K1 w - - 0 1").is_err());
    }

    #[test]
    fn double_push_sets_ep_square() {
        let pos = Position::startpos().apply_uci("e2e4").unwrap();
        assert_eq!(pos.side_to_move(), Color::Black);
        assert_eq!(pos.ep_square(), Some("e3".parse().unwrap()));
    }

    #[test]
    fn ep_only_hashed_when_capturable() {
        // After 1.e4 no black pawn can take en passant: key equals the same
        // placement without the ep square.
        let after = Position::startpos().apply_uci("e2e4").unwrap();
        let no_ep =
            Position::from_fen("rnbqkbnr/pppppppp/8/8/4P3/8/PPPP1PPP/RNBQKBNR b KQkq - 0 1").unwrap();
        assert_eq!(after.key(), no_ep.key());
        assert_eq!(after, no_ep);

        let with_cap =
            Position::from_fen("4k3/8/8/8/3pP3/8/8/4K3 b - e3 0 1").unwrap();
        let without =
            Position::from_fen("4k3/8/8/8/3pP3/8/8/4K3 b - - 0 1").unwrap();
        assert_ne!(with_cap.key(), without.key());
    }

    #[test]
    fn capture_resets_halfmove_clock() {
        let mut pos = Position::startpos();
        for m in ["e2e4", "d7d5", "g1f3", "b8c6"] {
            pos = pos.apply_uci(m).unwrap();
        }
        assert_eq!(pos.halfmove_clock(), 2);
        let pos = pos.apply_uci("e4d5").unwrap();
        assert_eq!(pos.halfmove_clock(), 0);
        assert!(pos.history().is_empty());
    }

    #[test]
    fn illegal_move_rejected() {
        let err = Position::startpos().apply_uci("e2e5").unwrap_err();
        assert!(matches!(err, ChessError::IllegalMove { .. }));
    }
}
