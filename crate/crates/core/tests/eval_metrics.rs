use std::collections::HashMap;
use std::sync::Arc;

use ponder::chess::{Move, Position};
use ponder::data::{random_games, synthesize_games, DatasetEntry, GameRecord, SynthConfig, Termination};
use ponder::eval::{
    evaluate_game, evaluate_games, legality_metrics, move_matching, move_matching_with, pearson, resignation_rates, time_correlation,
    time_pairs, value_reliability, EvalError, PositionEval, Source,
};
use ponder::model::{PositionEvaluator, Prediction};
use ponder::tokens::{TokenId, Vocab, N_MOVE_TOKENS, RESIGN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(n: usize) -> Vec<GameRecord> {
    synthesize_games(&SynthConfig {
        games: n,
        seed: 11,
        ..Default::default()
    })
}

fn one_hot(token: TokenId, time: f32, value: f32) -> Prediction {
    let mut policy = vec![0.0f32; Vocab::get().len()];
    policy[token as usize] = 1.0;
    Prediction { policy, time, value }
}

/// Evaluate each game with its own evaluator (openings repeat across games).
fn per_game(games: &[GameRecord], make: impl Fn(&[GameRecord]) -> PositionEvaluator) -> Vec<PositionEval> {
    games
        .iter()
        .enumerate()
        .flat_map(|(i, g)| evaluate_game(&make(std::slice::from_ref(g)), i, g, None, Source::Human).unwrap())
        .collect()
}

/// Knows the games: plays the recorded move, the recorded think time, the
/// final outcome as its value, and resigns exactly where the game was resigned.
fn oracle(games: &[GameRecord]) -> PositionEvaluator {
    let vocab = Vocab::get();
    let mut next: HashMap<Vec<Move>, (TokenId, f32, f32)> = HashMap::new();
    for g in games {
        for i in 0..=g.moves.len() {
            let time = g.think_times.as_ref().and_then(|t| t.get(i)).copied().unwrap_or(1.0);
            let tok = match g.moves.get(i) {
                Some(&m) => vocab.move_id(m).unwrap(),
                None if matches!(g.termination, Termination::Resignation(_)) => RESIGN,
                None => 0,
            };
            next.insert(g.moves[..i].to_vec(), (tok, time, g.outcome as f32));
        }
    }
    let next = Arc::new(next);
    PositionEvaluator::new(move |_, hist| {
        let (tok, time, value) = next[hist];
        one_hot(tok, time, value)
    })
}

#[test]
fn oracle_scores_perfectly() {
    let games = corpus(40);
    let evals = per_game(&games, oracle);
    assert_eq!(evals.len(), games.iter().map(|g| g.moves.len() + 1).sum::<usize>());

    let mm = move_matching(&evals);
    assert_eq!(mm.overall.p, 1.0);
    assert_eq!(mm.overall.n, games.iter().map(|g| g.moves.len()).sum::<usize>());
    for p in &mm.by_progress {
        assert!(p.n == 0 || p.p == 1.0);
    }

    for s in legality_metrics(&evals).iter().filter(|s| s.source == Source::Human) {
        assert_eq!(s.top1_valid.p, 1.0);
        assert!(s.invalid_mass.abs() < 1e-12);
    }

    let pairs = time_pairs(&evals);
    assert!(!pairs.is_empty());
    let t = time_correlation(&pairs).unwrap();
    assert!((t.r - 1.0).abs() < 1e-9);
    assert_eq!(t.buckets.iter().map(|b| b.n).sum::<usize>(), pairs.len());

    let r = resignation_rates(&evals);
    assert!(r.positives > 0, "corpus needs resignations");
    assert_eq!((r.tpr, r.fpr), (1.0, 0.0));

    let buckets = value_reliability(&evals);
    assert!(buckets.iter().any(|b| b.r.is_some()));
    for b in buckets {
        if let Some(r) = b.r {
            assert!((r - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn inverted_value_correlates_negatively() {
    let games = corpus(40);
    let evals = per_game(&games, |g| {
        let v = -(g[0].outcome as f32);
        PositionEvaluator::new(move |_, _| one_hot(0, 1.0, v))
    });
    for b in value_reliability(&evals) {
        if let Some(r) = b.r {
            assert!((r + 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn uniform_policy_invalid_mass_closed_form() {
    let games = random_games(5, 10, 80);
    let ev = PositionEvaluator::uniform(1.0, 0.0);
    let evals = evaluate_games(&ev, &games, None, Source::Random).unwrap();
    let v = Vocab::get().len() as f64;
    for (e, pos) in evals.iter().zip(games.iter().flat_map(|g| g.positions().unwrap())) {
        let legal = pos.legal_moves().len() as f64;
        let expected = (N_MOVE_TOKENS as f64 - legal) / v;
        assert!((e.invalid_mass - expected).abs() < 1e-5, "{} vs {expected}", e.invalid_mass);
    }
    let strata = legality_metrics(&evals);
    let random_all = strata.iter().find(|s| s.source == Source::Random && !s.in_check_only).unwrap();
    let random_check = strata.iter().find(|s| s.source == Source::Random && s.in_check_only).unwrap();
    let with_moves = evals.iter().filter(|e| e.has_legal_move && e.human_move.is_some()).count();
    assert_eq!(random_all.positions, with_moves);
    assert_eq!(
        random_check.positions,
        evals.iter().filter(|e| e.has_legal_move && e.human_move.is_some() && e.in_check).count()
    );
    assert!(strata.iter().filter(|s| s.source == Source::Human).all(|s| s.positions == 0));
}

#[test]
fn random_mover_matches_one_over_k() {
    let entries: Vec<DatasetEntry> = corpus(60)
        .into_iter()
        .map(|record| DatasetEntry {
            eligible: vec![true; record.moves.len()],
            record,
        })
        .collect();
    let mut expected = 0.0;
    let mut var = 0.0;
    let mut n = 0usize;
    for e in &entries {
        for pos in &e.record.positions().unwrap()[..e.record.moves.len()] {
            let k = pos.legal_moves().len() as f64;
            expected += 1.0 / k;
            var += (1.0 / k) * (1.0 - 1.0 / k);
            n += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let got = move_matching_with(&entries, |_, _, pos: &Position| {
        let legal = pos.legal_moves();
        Some(legal[rng.gen_range(0..legal.len())])
    })
    .unwrap();
    assert_eq!(got.n, n);
    let mean = expected / n as f64;
    let sd = var.sqrt() / n as f64;
    assert!((got.p - mean).abs() < 4.0 * sd, "{} vs {mean} (sd {sd})", got.p);
}

#[test]
fn pearson_hand_examples() {
    let xs = [1.0, 2.0, 3.0, 4.0];
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
    assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
    // Sxy = 8, Sxx = Syy = 10.
    let r = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
    assert!((r - 0.8).abs() < 1e-12);
    assert!(matches!(pearson(&xs, &[2.0; 4]), Err(EvalError::DegenerateVariance)));
    assert!(matches!(time_correlation(&[(1.0, 2.0)]), Err(EvalError::Empty(_))));
}
