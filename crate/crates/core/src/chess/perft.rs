use super::position::Position;

/// Number of leaf nodes of the legal move tree at exactly `depth` plies.
pub fn perft(pos: &Position, depth: u32) -> u64 {
    if depth == 0 {
        return 1;
    }
    let moves = pos.legal_moves();
    if depth == 1 {
        return moves.len() as u64;
    }
    let mut child = pos.clone();
    let mut total = 0;
    for m in moves {
        child.clone_from(pos);
        child.play_in_place(m);
        total += perft(&child, depth - 1);
    }
    total
}

/// Per-root-move leaf counts, sorted by UCI string (the usual "divide" output).
pub fn perft_divide(pos: &Position, depth: u32) -> Vec<(String, u64)> {
    let mut out: Vec<(String, u64)> = pos
        .legal_moves()
        .into_iter()
        .map(|m| (m.to_string(), perft(&pos.play(m), depth.saturating_sub(1))))
        .collect();
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shallow_startpos() {
        let pos = Position::startpos();
        assert_eq!(perft(&pos, 0), 1);
        assert_eq!(perft(&pos, 1), 20);
        assert_eq!(perft(&pos, 2), 400);
        assert_eq!(perft(&pos, 3), 8902);
        let divide = perft_divide(&pos, 2);
        assert_eq!(divide.len(), 20);
        assert_eq!(divide.iter().map(|(_, n)| n).sum::<u64>(), 400);
    }
}
