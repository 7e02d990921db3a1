//! Elo-bin downsampling, evaluation filters, splits and the on-disk format.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chess::Move;

use super::record::{GameRecord, Termination, TimeControl};
use super::DataError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Width of the mean-Elo bins used for downsampling.
    pub bin_width: i32,
    /// Maximum games kept per bin.
    pub bin_cap: usize,
    /// Allowed shortfall below `bin_cap` before a bin is reported underfull.
    pub bin_tolerance: usize,
    /// Train / validation / test fractions; must sum to 1.
    pub splits: [f64; 3],
    pub seed: u64,
    /// Leading plies excluded from accuracy metrics (5 full moves = 10 plies).
    pub skip_opening_plies: usize,
    /// Moves made with less than this many seconds on the mover's clock are
    /// excluded from accuracy metrics.
    pub min_clock_seconds: f32,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            bin_width: 100,
            bin_cap: 1000,
            bin_tolerance: 0,
            splits: [0.8, 0.1, 0.1],
            seed: 0,
            skip_opening_plies: 10,
            min_clock_seconds: 30.0,
        }
    }
}

impl DatasetConfig {
    pub fn check(&self) -> Result<(), DataError> {
        let sum: f64 = self.splits.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.splits.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
            return Err(DataError::Config(format!(
                "split fractions {:?} must be in [0,1] and sum to 1",
                self.splits
            )));
        }
        if self.bin_width <= 0 || self.bin_cap == 0 {
            return Err(DataError::Config("bin width and cap must be positive".into()));
        }
        Ok(())
    }
}

/// A game plus its per-ply metric eligibility flags.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetEntry {
    pub record: GameRecord,
    pub eligible: Vec<bool>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<DatasetEntry>,
    pub val: Vec<DatasetEntry>,
    pub test: Vec<DatasetEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub bin_start: i32,
    pub available: usize,
    pub kept: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub train_games: usize,
    pub val_games: usize,
    pub test_games: usize,
    pub bins: Vec<BinStats>,
    pub config: DatasetConfig,
    /// Bins that came in more than `bin_tolerance` below the cap.
    pub warnings: Vec<String>,
    /// SHA-256 over the serialized split files, in train/val/test order.
    pub content_hash: String,
}

/// Per-ply flags: `false` for the opening plies and for moves made under
/// time pressure (pre-move clock below the threshold).
pub fn eligibility(rec: &GameRecord, config: &DatasetConfig) -> Vec<bool> {
    let pre = rec.pre_move_clocks();
    (0..rec.moves.len())
        .map(|i| {
            let past_opening = i >= config.skip_opening_plies;
            let has_time = pre
                .as_ref()
                .map(|c| c[i] >= config.min_clock_seconds)
                .unwrap_or(true);
            past_opening && has_time
        })
        .collect()
}

fn bin_of(rec: &GameRecord, width: i32) -> i32 {
    (rec.mean_elo() / width as f64).floor() as i32 * width
}

/// Downsample by Elo bin, flag evaluation eligibility and split.
///
/// Games inside a bin are sampled uniformly with the configured seed and
/// then restored to source order, so the result depends only on
/// `(games, config)`.
pub fn build_dataset(games: Vec<GameRecord>, config: &DatasetConfig) -> Result<(DatasetManifest, Dataset), DataError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut bins: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, g) in games.iter().enumerate() {
        bins.entry(bin_of(g, config.bin_width)).or_default().push(i);
    }
    let mut kept: Vec<usize> = Vec::new();
    let mut stats = Vec::new();
    let mut warnings = Vec::new();
    for (&bin_start, idx) in &bins {
        let mut chosen = idx.clone();
        if chosen.len() > config.bin_cap {
            chosen.shuffle(&mut rng);
            chosen.truncate(config.bin_cap);
            chosen.sort_unstable();
        }
        if chosen.len() + config.bin_tolerance < config.bin_cap {
            let msg = format!(
                "bin {bin_start}-{} holds {} games, below cap {}",
                bin_start + config.bin_width - 1,
                chosen.len(),
                config.bin_cap
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        stats.push(BinStats {
            bin_start,
            available: idx.len(),
            kept: chosen.len(),
        });
        kept.extend(chosen);
    }
    kept.sort_unstable();
    kept.shuffle(&mut rng);

    let n = kept.len();
    let n_train = (config.splits[0] * n as f64).round() as usize;
    let n_val = ((config.splits[1] * n as f64).round() as usize).min(n - n_train);
    let mut assign: Vec<u8> = vec![2; games.len()];
    let mut in_set = vec![false; games.len()];
    for (rank, &i) in kept.iter().enumerate() {
        in_set[i] = true;
        assign[i] = if rank < n_train {
            0
        } else if rank < n_train + n_val {
            1
        } else {
            2
        };
    }

    let mut ds = Dataset::default();
    for (i, record) in games.into_iter().enumerate() {
        if !in_set[i] {
            continue;
        }
        let eligible = eligibility(&record, config);
        let entry = DatasetEntry { record, eligible };
        match assign[i] {
            0 => ds.train.push(entry),
            1 => ds.val.push(entry),
            _ => ds.test.push(entry),
        }
    }

    let mut hasher = Sha256::new();
    for split in [&ds.train, &ds.val, &ds.test] {
        for e in split {
            hasher.update(encode_line(e).as_bytes());
            hasher.update(b"\n");
        }
        hasher.update(b"--split--\n");
    }
    let manifest = DatasetManifest {
        train_games: ds.train.len(),
        val_games: ds.val.len(),
        test_games: ds.test.len(),
        bins: stats,
        config: config.clone(),
        warnings,
        content_hash: hex::encode(hasher.finalize()),
    };
    Ok((manifest, ds))
}

/// One JSON line per game: UCI moves (plus termination token) as a single
/// space-separated string, with parallel arrays for times and flags.
#[derive(Serialize, Deserialize)]
struct StoredGame {
    white_elo: i32,
    black_elo: i32,
    time_control: TimeControl,
    tokens: String,
    outcome: i8,
    termination: Termination,
    think_times: Option<Vec<f32>>,
    clocks: Option<Vec<f32>>,
    eligible: String,
}

pub fn encode_line(e: &DatasetEntry) -> String {
    let r = &e.record;
    let mut tokens: Vec<String> = r.moves.iter().map(Move::to_string).collect();
    if let Some(t) = crate::tokens::termination_token(r.termination) {
        tokens.push(t.to_string());
    }
    let stored = StoredGame {
        white_elo: r.white_elo,
        black_elo: r.black_elo,
        time_control: r.time_control,
        tokens: tokens.join(" "),
        outcome: r.outcome,
        termination: r.termination,
        think_times: r.think_times.clone(),
        clocks: r.clocks.clone(),
        eligible: e.eligible.iter().map(|&b| if b { '1' } else { '0' }).collect(),
    };
    serde_json::to_string(&stored).expect("dataset line serializes")
}

pub fn decode_line(line: &str) -> Result<DatasetEntry, DataError> {
    let s: StoredGame = serde_json::from_str(line)?;
    let moves = s
        .tokens
        .split_whitespace()
        .filter(|t| !t.starts_with('<'))
        .map(|t| t.parse::<Move>())
        .collect::<Result<Vec<_>, _>>()?;
    let eligible: Vec<bool> = s.eligible.chars().map(|c| c == '1').collect();
    if eligible.len() != moves.len() {
        return Err(DataError::Inconsistent("eligibility flags misaligned with moves".into()));
    }
    let record = GameRecord {
        white_elo: s.white_elo,
        black_elo: s.black_elo,
        time_control: s.time_control,
        moves,
        think_times: s.think_times,
        clocks: s.clocks,
        outcome: s.outcome,
        termination: s.termination,
    };
    record.validate()?;
    Ok(DatasetEntry { record, eligible })
}

pub fn write_split(path: &Path, entries: &[DatasetEntry]) -> Result<(), DataError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for e in entries {
        writeln!(w, "{}", encode_line(e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_split(path: &Path) -> Result<Vec<DatasetEntry>, DataError> {
    let r = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(decode_line(&line)?);
        }
    }
    Ok(out)
}

/// Write `train.jsonl`, `val.jsonl`, `test.jsonl` and `manifest.json`.
pub fn write_dataset(dir: &Path, manifest: &DatasetManifest, ds: &Dataset) -> Result<(), DataError> {
    fs::create_dir_all(dir)?;
    write_split(&dir.join("train.jsonl"), &ds.train)?;
    write_split(&dir.join("val.jsonl"), &ds.val)?;
    write_split(&dir.join("test.jsonl"), &ds.test)?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Dataset), DataError> {
    let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let ds = Dataset {
        train: read_split(&dir.join("train.jsonl"))?,
        val: read_split(&dir.join("val.jsonl"))?,
        test: read_split(&dir.join("test.jsonl"))?,
    };
    Ok((manifest, ds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::random_games;

    fn with_elo(mut g: GameRecord, elo: i32) -> GameRecord {
        g.white_elo = elo;
        g.black_elo = elo;
        g
    }

    #[test]
    fn downsample_to_cap() {
        let base = random_games(1, 110, 4);
        let mut games = Vec::new();
        for (i, g) in base.into_iter().enumerate() {
            games.push(with_elo(g, if i < 100 { 1550 } else { 1650 }));
        }
        let config = DatasetConfig {
            bin_cap: 10,
            splits: [1.0, 0.0, 0.0],
            ..Default::default()
        };
        let (m, ds) = build_dataset(games, &config).unwrap();
        assert_eq!(m.bins.len(), 2);
        assert_eq!(m.bins[0].kept, 10);
        assert_eq!(m.bins[1].kept, 10);
        assert_eq!(ds.train.len(), 20);
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn opening_plies_excluded() {
        let g = random_games(3, 1, 60).remove(0);
        let n = g.moves.len();
        let flags = eligibility(&g, &DatasetConfig::default());
        assert_eq!(flags.iter().filter(|&&b| b).count(), n.saturating_sub(10));
        assert!(flags[..10.min(n)].iter().all(|&b| !b));
    }

    #[test]
    fn time_pressure_excluded() {
        let mut g = random_games(5, 1, 14).remove(0);
        let n = g.moves.len();
        assert_eq!(n, 14);
        // Mover's clock falls below 30 s from ply 12 on (pre-move clock of
        // ply i is the reading after ply i-2).
        let clocks: Vec<f32> = (0..n).map(|i| if i >= 10 { 20.0 } else { 150.0 }).collect();
        g.clocks = Some(clocks);
        let flags = eligibility(&g, &DatasetConfig::default());
        assert_eq!(flags[10], true);
        assert_eq!(flags[11], true);
        assert_eq!(flags[12], false);
        assert_eq!(flags[13], false);
    }

    #[test]
    fn deterministic_and_idempotent() {
        let games = random_games(9, 200, 20);
        let config = DatasetConfig {
            bin_cap: 50,
            seed: 42,
            ..Default::default()
        };
        let (a, da) = build_dataset(games.clone(), &config).unwrap();
        let (b, _) = build_dataset(games, &config).unwrap();
        assert_eq!(a.content_hash, b.content_hash);
        // Re-running the filters over already-built data changes nothing.
        for e in da.train.iter().chain(&da.test) {
            assert_eq!(eligibility(&e.record, &config), e.eligible);
        }
    }

    #[test]
    fn bad_fractions_rejected() {
        let config = DatasetConfig {
            splits: [0.5, 0.2, 0.2],
            ..Default::default()
        };
        assert!(matches!(build_dataset(vec![], &config), Err(DataError::Config(_))));
    }

    #[test]
    fn split_file_roundtrip() {
        let games = random_games(11, 30, 40);
        let config = DatasetConfig {
            bin_cap: 100,
            ..Default::default()
        };
        let (m, ds) = build_dataset(games, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &m, &ds).unwrap();
        let (m2, ds2) = read_dataset(dir.path()).unwrap();
        assert_eq!(m, m2);
        assert_eq!(ds, ds2);
    }
}
