use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chess::{Move, Position};
use crate::data::{DatasetEntry, GameRecord, Termination};
use crate::engine::{should_resign, RESIGN_MIN_PLY, RESIGN_THRESHOLD};
use crate::model::{EvalSession, Evaluator};
use crate::tokens::{TokenId, Vocab, N_MOVE_TOKENS, RESIGN};

use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Human,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveCategory {
    Castling,
    EnPassant,
    Promotion,
    /// The move completed a threefold repetition.
    Threefold,
}

impl MoveCategory {
    pub fn of(pos: &Position, m: Move) -> Vec<MoveCategory> {
        let mut out = Vec::new();
        if pos.is_castling(m) {
            out.push(MoveCategory::Castling);
        }
        if pos.is_en_passant(m) {
            out.push(MoveCategory::EnPassant);
        }
        if m.promotion.is_some() {
            out.push(MoveCategory::Promotion);
        }
        if pos.play(m).repetition_count() >= 3 {
            out.push(MoveCategory::Threefold);
        }
        out
    }

    pub fn name(self) -> &'static str {
        match self {
            MoveCategory::Castling => "castling",
            MoveCategory::EnPassant => "en_passant",
            MoveCategory::Promotion => "promotion",
            MoveCategory::Threefold => "threefold",
        }
    }
}

/// Model outputs summarized at one position of a game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionEval {
    pub game: usize,
    pub ply: usize,
    pub game_len: usize,
    pub source: Source,
    pub mover_elo: i32,
    /// Counts for move matching and resignation.
    pub eligible: bool,
    pub in_check: bool,
    pub has_legal_move: bool,
    /// Human move played here (`None` at the final position).
    pub human_move: Option<Move>,
    pub categories: Vec<MoveCategory>,
    /// Argmax of the raw policy over the whole vocabulary.
    pub top1: TokenId,
    /// The argmax is a legal move or `<resign>`.
    pub top1_valid: bool,
    pub matched: bool,
    /// Probability on move tokens that are illegal here.
    pub invalid_mass: f64,
    pub pred_time: f64,
    pub human_time: Option<f64>,
    /// White-perspective value prediction and final outcome.
    pub value: f64,
    pub outcome: Option<i8>,
    pub resign_predicted: bool,
    pub resigned_here: bool,
}

fn outcome_known(t: Termination) -> bool {
    !matches!(t, Termination::Unterminated | Termination::Abandoned)
}

/// Run `ev` over one game, one prediction per position including the
/// final one.
pub fn evaluate_game<E: Evaluator>(
    ev: &E,
    game: usize,
    rec: &GameRecord,
    eligible: Option<&[bool]>,
    source: Source,
) -> Result<Vec<PositionEval>, EvalError> {
    let positions = rec.positions()?;
    let vocab = Vocab::get();
    let n = rec.moves.len();
    let mut session = ev.session(rec.time_control, [rec.white_elo as f32, rec.black_elo as f32]);
    let mut out = Vec::with_capacity(n + 1);
    for (ply, pos) in positions.iter().enumerate() {
        let pred = session.predict(&[]);
        let legal = pos.legal_moves();
        let mut legal_mask = vec![false; N_MOVE_TOKENS];
        for &m in &legal {
            legal_mask[vocab.move_id(m).expect("legal move in vocabulary") as usize] = true;
        }
        let top1 = (0..pred.policy.len())
            .max_by(|&a, &b| pred.policy[a].total_cmp(&pred.policy[b]).then(b.cmp(&a)))
            .unwrap_or(0) as TokenId;
        let top1_valid = top1 == RESIGN || legal_mask.get(top1 as usize).copied().unwrap_or(false);
        let invalid_mass: f64 = (0..N_MOVE_TOKENS)
            .filter(|&i| !legal_mask[i])
            .map(|i| pred.policy[i] as f64)
            .sum();
        let human_move = rec.moves.get(ply).copied();
        let mover = pos.side_to_move();
        let stm_value = pred.value as f64 * mover.sign() as f64;
        let resigned_here = ply == n && rec.termination == Termination::Resignation(mover);
        let eligible_here = match human_move {
            Some(_) => eligible.map_or(true, |e| e.get(ply).copied().unwrap_or(false)),
            None => !legal.is_empty(),
        };
        out.push(PositionEval {
            game,
            ply,
            game_len: n,
            source,
            mover_elo: rec.elo_of(mover),
            eligible: eligible_here,
            in_check: pos.in_check(),
            has_legal_move: !legal.is_empty(),
            human_move,
            categories: human_move.map(|m| MoveCategory::of(pos, m)).unwrap_or_default(),
            top1,
            top1_valid,
            matched: human_move.is_some_and(|m| vocab.move_id(m) == Some(top1)),
            invalid_mass,
            pred_time: pred.time as f64,
            human_time: rec.think_times.as_ref().and_then(|t| t.get(ply)).map(|&t| t as f64),
            value: pred.value as f64,
            outcome: outcome_known(rec.termination).then_some(rec.outcome),
            resign_predicted: !legal.is_empty() && should_resign(&pred.policy, stm_value, &legal, RESIGN_THRESHOLD),
            resigned_here,
        });
        if let Some(m) = human_move {
            session.push(vocab.move_id(m).expect("legal move in vocabulary"));
        }
    }
    Ok(out)
}

/// [`evaluate_game`] over many games in parallel; output is in game order.
pub fn evaluate_games<E: Evaluator>(
    ev: &E,
    games: &[GameRecord],
    eligible: Option<&[Vec<bool>]>,
    source: Source,
) -> Result<Vec<PositionEval>, EvalError> {
    let per_game: Result<Vec<Vec<PositionEval>>, EvalError> = games
        .par_iter()
        .enumerate()
        .map(|(i, g)| evaluate_game(ev, i, g, eligible.map(|e| e[i].as_slice()), source))
        .collect();
    Ok(per_game?.into_iter().flatten().collect())
}

pub fn evaluate_entries<E: Evaluator>(ev: &E, entries: &[DatasetEntry]) -> Result<Vec<PositionEval>, EvalError> {
    let games: Vec<GameRecord> = entries.iter().map(|e| e.record.clone()).collect();
    let flags: Vec<Vec<bool>> = entries.iter().map(|e| e.eligible.clone()).collect();
    evaluate_games(ev, &games, Some(&flags), Source::Human)
}

/// A binomial proportion with its 95% normal-approximation half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub p: f64,
    pub n: usize,
    pub ci95: f64,
}

impl Proportion {
    pub fn new(hits: usize, n: usize) -> Proportion {
        if n == 0 {
            return Proportion { p: 0.0, n: 0, ci95: 0.0 };
        }
        let p = hits as f64 / n as f64;
        Proportion {
            p,
            n,
            ci95: 1.96 * (p * (1.0 - p) / n as f64).sqrt(),
        }
    }

    fn of<'a>(xs: impl Iterator<Item = &'a PositionEval>, hit: impl Fn(&PositionEval) -> bool) -> Proportion {
        let (mut h, mut n) = (0, 0);
        for x in xs {
            n += 1;
            if hit(x) {
                h += 1;
            }
        }
        Proportion::new(h, n)
    }
}

pub const ELO_BIN: i32 = 200;
pub const PROGRESS_BUCKETS: usize = 10;

/// Progress bucket: fraction of the final game length.
pub fn progress_bucket(ply: usize, game_len: usize) -> usize {
    if game_len == 0 {
        return 0;
    }
    ((ply * PROGRESS_BUCKETS) / game_len).min(PROGRESS_BUCKETS - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveMatching {
    pub overall: Proportion,
    pub by_category: BTreeMap<String, Proportion>,
    pub by_elo: BTreeMap<i32, Proportion>,
    pub by_progress: Vec<Proportion>,
}

/// Top-1 agreement with the human move on eligible positions.
pub fn move_matching(evals: &[PositionEval]) -> MoveMatching {
    let rows: Vec<&PositionEval> = evals.iter().filter(|e| e.eligible && e.human_move.is_some()).collect();
    let overall = Proportion::of(rows.iter().copied(), |e| e.matched);
    let mut by_category = BTreeMap::new();
    for c in [MoveCategory::Castling, MoveCategory::EnPassant, MoveCategory::Promotion, MoveCategory::Threefold] {
        by_category.insert(
            c.name().to_string(),
            Proportion::of(rows.iter().copied().filter(|e| e.categories.contains(&c)), |e| e.matched),
        );
    }
    let mut elo_groups: BTreeMap<i32, Vec<&PositionEval>> = BTreeMap::new();
    for e in &rows {
        elo_groups.entry(e.mover_elo.div_euclid(ELO_BIN) * ELO_BIN).or_default().push(e);
    }
    let by_elo = elo_groups
        .into_iter()
        .map(|(k, v)| (k, Proportion::of(v.into_iter(), |e| e.matched)))
        .collect();
    let by_progress = (0..PROGRESS_BUCKETS)
        .map(|b| {
            Proportion::of(rows.iter().copied().filter(|e| progress_bucket(e.ply, e.game_len) == b), |e| e.matched)
        })
        .collect();
    MoveMatching {
        overall,
        by_category,
        by_elo,
        by_progress,
    }
}

/// Move matching for an arbitrary move chooser (an engine, a baseline),
/// called on every eligible position.
pub fn move_matching_with(
    entries: &[DatasetEntry],
    mut choose: impl FnMut(&GameRecord, usize, &Position) -> Option<Move>,
) -> Result<Proportion, EvalError> {
    let (mut hits, mut n) = (0, 0);
    for e in entries {
        let positions = e.record.positions()?;
        for (ply, &m) in e.record.moves.iter().enumerate() {
            if !e.eligible.get(ply).copied().unwrap_or(false) {
                continue;
            }
            n += 1;
            if choose(&e.record, ply, &positions[ply]) == Some(m) {
                hits += 1;
            }
        }
    }
    Ok(Proportion::new(hits, n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegalityStratum {
    pub source: Source,
    pub in_check_only: bool,
    pub positions: usize,
    pub top1_valid: Proportion,
    pub invalid_mass: f64,
}

/// Top-1 validity and illegal probability mass in four strata: human and
/// random games, all positions and positions in check.
pub fn legality_metrics(evals: &[PositionEval]) -> Vec<LegalityStratum> {
    let mut out = Vec::new();
    for source in [Source::Human, Source::Random] {
        for check in [false, true] {
            let rows: Vec<&PositionEval> = evals
                .iter()
                .filter(|e| e.source == source && e.has_legal_move && e.human_move.is_some() && (!check || e.in_check))
                .collect();
            let mass = if rows.is_empty() {
                0.0
            } else {
                rows.iter().map(|e| e.invalid_mass).sum::<f64>() / rows.len() as f64
            };
            out.push(LegalityStratum {
                source,
                in_check_only: check,
                positions: rows.len(),
                top1_valid: Proportion::of(rows.iter().copied(), |e| e.top1_valid),
                invalid_mass: mass,
            });
        }
    }
    out
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(EvalError::Empty("need at least two paired values".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::DegenerateVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeBucket {
    /// Human think time range in seconds.
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeReport {
    pub r: f64,
    pub n: usize,
    pub buckets: Vec<TimeBucket>,
}

pub const TIME_EDGES: [f64; 9] = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, f64::INFINITY];

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Pearson r between predicted and human think times, plus the median and
/// interquartile range of predictions per human-time bucket.
pub fn time_correlation(pairs: &[(f64, f64)]) -> Result<TimeReport, EvalError> {
    let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let human: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let r = pearson(&pred, &human)?;
    let buckets = TIME_EDGES
        .windows(2)
        .map(|w| {
            let mut v: Vec<f64> = pairs.iter().filter(|p| p.1 >= w[0] && p.1 < w[1]).map(|p| p.0).collect();
            v.sort_by(f64::total_cmp);
            TimeBucket {
                lo: w[0],
                hi: w[1],
                n: v.len(),
                median: quantile(&v, 0.5),
                q25: quantile(&v, 0.25),
                q75: quantile(&v, 0.75),
            }
        })
        .collect();
    Ok(TimeReport { r, n: pairs.len(), buckets })
}

pub fn time_pairs(evals: &[PositionEval]) -> Vec<(f64, f64)> {
    evals
        .iter()
        .filter(|e| e.eligible && e.human_move.is_some())
        .filter_map(|e| e.human_time.map(|h| (e.pred_time, h)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResignationReport {
    pub tpr: f64,
    pub fpr: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// Apply the resignation rule at every eligible position from the minimum
/// resignation ply on. Positives are positions where the human resigned.
pub fn resignation_rates(evals: &[PositionEval]) -> ResignationReport {
    let rows = evals
        .iter()
        .filter(|e| e.eligible && e.has_legal_move && e.ply >= RESIGN_MIN_PLY);
    let (mut tp, mut p, mut fp, mut neg) = (0, 0, 0, 0);
    for e in rows {
        if e.resigned_here {
            p += 1;
            tp += e.resign_predicted as usize;
        } else {
            neg += 1;
            fp += e.resign_predicted as usize;
        }
    }
    let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    ResignationReport {
        tpr: rate(tp, p),
        fpr: rate(fp, neg),
        positives: p,
        negatives: neg,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueBucket {
    pub bucket: usize,
    pub n: usize,
    /// `None` when either series is constant in the bucket.
    pub r: Option<f64>,
}

/// Correlation between predicted value and final outcome (both from
/// white's side) per game-progress bucket.
pub fn value_reliability(evals: &[PositionEval]) -> Vec<ValueBucket> {
    (0..PROGRESS_BUCKETS)
        .map(|b| {
            let (v, o): (Vec<f64>, Vec<f64>) = evals
                .iter()
                .filter(|e| e.source == Source::Human && progress_bucket(e.ply, e.game_len) == b)
                .filter_map(|e| e.outcome.map(|o| (e.value, o as f64)))
                .unzip();
            ValueBucket {
                bucket: b,
                n: v.len(),
                r: pearson(&v, &o).ok(),
            }
        })
        .collect()
}
