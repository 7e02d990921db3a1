use serde::{Deserialize, Serialize};

use super::EvalError;

/// Rating difference for scores 0.50, 0.51, ..., 1.00 (FIDE handbook B.02
/// conversion table). Lower scores mirror with a negative sign.
const DP: [i32; 51] = [
    0, 7, 14, 21, 29, 36, 43, 50, 57, 65, 72, 80, 87, 95, 102, 110, 117, 125, 133, 141, 149, 158, 166, 175, 184, 193,
    202, 211, 220, 230, 240, 251, 262, 273, 284, 296, 309, 322, 336, 351, 366, 383, 401, 422, 444, 470, 501, 538, 589,
    677, 800,
];

/// Rating difference for a score fraction, quantized to the table's 0.01
/// grain.
pub fn rating_difference(p: f64) -> Result<i32, EvalError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(EvalError::OutOfRange(p));
    }
    let cents = (p * 100.0).round() as i32;
    Ok(if cents >= 50 {
        DP[(cents - 50) as usize]
    } else {
        -DP[(50 - cents) as usize]
    })
}

/// Average opponent rating plus the rating difference for the score.
pub fn performance_elo(avg_opponent_elo: f64, avg_score: f64) -> Result<f64, EvalError> {
    Ok(avg_opponent_elo + rating_difference(avg_score)? as f64)
}

/// One finished game from the engine's point of view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub opponent_elo: f64,
    /// 0, 0.5 or 1.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub bin_start: i32,
    pub games: usize,
    pub human_elo: f64,
    pub score: f64,
    pub system_elo: f64,
    pub sce: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bin_width: i32,
    pub bins: Vec<CalibrationBin>,
    pub mean_sce: f64,
    pub max_sce: f64,
}

pub const CALIBRATION_BIN: i32 = 200;

/// Bin games by opponent Elo, compute the performance rating per bin and
/// the absolute gap to the bin's mean opponent rating.
pub fn skill_calibration(log: &[GameResult]) -> Result<CalibrationReport, EvalError> {
    let mut bins: std::collections::BTreeMap<i32, Vec<&GameResult>> = Default::default();
    for g in log {
        if !(0.0..=1.0).contains(&g.score) {
            return Err(EvalError::OutOfRange(g.score));
        }
        let b = (g.opponent_elo / CALIBRATION_BIN as f64).floor() as i32 * CALIBRATION_BIN;
        bins.entry(b).or_default().push(g);
    }
    let mut out = Vec::new();
    for (bin_start, games) in bins {
        let n = games.len() as f64;
        let human_elo = games.iter().map(|g| g.opponent_elo).sum::<f64>() / n;
        let score = games.iter().map(|g| g.score).sum::<f64>() / n;
        let system_elo = performance_elo(human_elo, score)?;
        out.push(CalibrationBin {
            bin_start,
            games: games.len(),
            human_elo,
            score,
            system_elo,
            sce: (system_elo - human_elo).abs(),
        });
    }
    if out.is_empty() {
        return Err(EvalError::Empty("no games to calibrate".into()));
    }
    let mean_sce = out.iter().map(|b| b.sce).sum::<f64>() / out.len() as f64;
    let max_sce = out.iter().map(|b| b.sce).fold(0.0, f64::max);
    Ok(CalibrationReport {
        bin_width: CALIBRATION_BIN,
        bins: out,
        mean_sce,
        max_sce,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_values() {
        assert_eq!(performance_elo(2000.0, 0.5).unwrap(), 2000.0);
        assert_eq!(performance_elo(2000.0, 0.75).unwrap(), 2193.0);
        assert_eq!(performance_elo(2000.0, 1.0).unwrap(), 2800.0);
        assert_eq!(performance_elo(2000.0, 0.0).unwrap(), 1200.0);
        assert_eq!(rating_difference(0.25).unwrap(), -193);
        assert!(matches!(performance_elo(2000.0, 1.01), Err(EvalError::OutOfRange(_))));
        assert!(performance_elo(2000.0, -0.1).is_err());
    }

    #[test]
    fn hand_calibration() {
        let log = vec![
            GameResult { opponent_elo: 2000.0, score: 1.0 },
            GameResult { opponent_elo: 2000.0, score: 0.5 },
            GameResult { opponent_elo: 2000.0, score: 1.0 },
            GameResult { opponent_elo: 2000.0, score: 0.5 },
        ];
        let r = skill_calibration(&log).unwrap();
        assert_eq!(r.bins.len(), 1);
        assert_eq!(r.bins[0].sce, 193.0);
        let even: Vec<GameResult> = [1000.0, 1250.0, 1900.0]
            .iter()
            .flat_map(|&e| [GameResult { opponent_elo: e, score: 0.0 }, GameResult { opponent_elo: e, score: 1.0 }])
            .collect();
        let r = skill_calibration(&even).unwrap();
        assert_eq!(r.bins.len(), 3);
        assert!(r.bins.iter().all(|b| b.sce == 0.0));
    }

    proptest! {
        #[test]
        fn monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(rating_difference(lo).unwrap() <= rating_difference(hi).unwrap());
        }

        #[test]
        fn mean_below_max(scores in prop::collection::vec((0usize..3, 600.0f64..2800.0), 1..60)) {
            let log: Vec<GameResult> = scores.iter().map(|&(s, e)| GameResult { opponent_elo: e, score: s as f64 / 2.0 }).collect();
            let r = skill_calibration(&log).unwrap();
            prop_assert!(r.mean_sce <= r.max_sce + 1e-12);
            prop_assert!(r.bins.iter().all(|b| b.sce >= 0.0));
        }
    }
}
