//! Precomputed attack tables and classical ray-scan slider attacks.

use std::sync::OnceLock;

use super::types::{Color, Square};

struct Tables {
    knight: [u64; 64],
    king: [u64; 64],
    /// Squares attacked by a pawn of the given color standing on the square.
    pawn: [[u64; 64]; 2],
    /// Rays in the 8 compass directions, excluding the origin square.
    rays: [[u64; 64]; 8],
}

// Direction order: N, NE, E, SE, S, SW, W, NW.
const DIRS: [(i8, i8); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

// Directions whose square indices increase along the ray.
const POSITIVE: [bool; 8] = [true, true, true, false, false, false, false, true];

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(build_tables)
}

fn build_tables() -> Tables {
    let mut t = Tables {
        knight: [0; 64],
        king: [0; 64],
        pawn: [[0; 64]; 2],
        rays: [[0; 64]; 8],
    };
    for sq in Square::all() {
        let i = sq.index();
        for (df, dr) in [
            (1, 2),
            (2, 1),
            (2, -1),
            (1, -2),
            (-1, -2),
            (-2, -1),
            (-2, 1),
            (-1, 2),
        ] {
            if let Some(to) = sq.offset(df, dr) {
                t.knight[i] |= to.bb();
            }
        }
        for (df, dr) in DIRS {
            if let Some(to) = sq.offset(df, dr) {
                t.king[i] |= to.bb();
            }
        }
        for df in [-1, 1] {
            if let Some(to) = sq.offset(df, 1) {
                t.pawn[Color::White.index()][i] |= to.bb();
            }
            if let Some(to) = sq.offset(df, -1) {
                t.pawn[Color::Black.index()][i] |= to.bb();
            }
        }
        for (d, (df, dr)) in DIRS.iter().enumerate() {
            let mut cur = sq;
            while let Some(next) = cur.offset(*df, *dr) {
                t.rays[d][i] |= next.bb();
                cur = next;
            }
        }
    }
    t
}

#[inline]
pub fn knight(sq: Square) -> u64 {
    tables().knight[sq.index()]
}

#[inline]
pub fn king(sq: Square) -> u64 {
    tables().king[sq.index()]
}

#[inline]
pub fn pawn(color: Color, sq: Square) -> u64 {
    tables().pawn[color.index()][sq.index()]
}

#[inline]
fn ray_attacks(dir: usize, sq: Square, occ: u64) -> u64 {
    let t = tables();
    let ray = t.rays[dir][sq.index()];
    let blockers = ray & occ;
    if blockers == 0 {
        return ray;
    }
    let first = if POSITIVE[dir] {
        blockers.trailing_zeros()
    } else {
        63 - blockers.leading_zeros()
    };
    ray ^ t.rays[dir][first as usize]
}

#[inline]
pub fn rook(sq: Square, occ: u64) -> u64 {
    ray_attacks(0, sq, occ) | ray_attacks(2, sq, occ) | ray_attacks(4, sq, occ) | ray_attacks(6, sq, occ)
}

#[inline]
pub fn bishop(sq: Square, occ: u64) -> u64 {
    ray_attacks(1, sq, occ) | ray_attacks(3, sq, occ) | ray_attacks(5, sq, occ) | ray_attacks(7, sq, occ)
}

#[inline]
pub fn queen(sq: Square, occ: u64) -> u64 {
    rook(sq, occ) | bishop(sq, occ)
}

/// Iterate the squares of a bitboard, lowest index first.
pub fn squares(mut bb: u64) -> impl Iterator<Item = Square> {
    std::iter::from_fn(move || {
        if bb == 0 {
            None
        } else {
            let sq = bb.trailing_zeros() as u8;
            bb &= bb - 1;
            Some(Square::new(sq))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_counts() {
        let a1: Square = "a1".parse().unwrap();
        let d4: Square = "d4".parse().unwrap();
        assert_eq!(knight(a1).count_ones(), 2);
        assert_eq!(knight(d4).count_ones(), 8);
        assert_eq!(king(a1).count_ones(), 3);
        assert_eq!(rook(d4, 0).count_ones(), 14);
        assert_eq!(bishop(d4, 0).count_ones(), 13);
    }

    #[test]
    fn blockers_stop_rays() {
        let a1: Square = "a1".parse().unwrap();
        let a4: Square = "a4".parse().unwrap();
        let d1: Square = "d1".parse().unwrap();
        let att = rook(a1, a4.bb() | d1.bb());
        // a2 a3 a4 b1 c1 d1
        assert_eq!(att.count_ones(), 6);
        assert!(att & a4.bb() != 0);
        let h8: Square = "h8".parse().unwrap();
        let e5: Square = "e5".parse().unwrap();
        // g7 f6 e5
        assert_eq!(bishop(h8, e5.bb()).count_ones(), 3);
    }
}
