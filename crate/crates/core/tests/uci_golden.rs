use std::path::PathBuf;

use ponder::engine::{uci_serve, EngineConfig, UciOptions, Variant};
use ponder::model::{PositionEvaluator, Prediction};
use ponder::tokens::Vocab;

/// Deterministic, non-uniform stand-in for a trained model.
fn evaluator() -> PositionEvaluator {
    PositionEvaluator::new(|pos, hist| {
        let vocab = Vocab::get();
        let logits: Vec<f32> = (0..vocab.len()).map(|t| ((t * 7919) % 13) as f32 * 0.25).collect();
        let value = if pos.side_to_move() == ponder::chess::Color::White { 0.1 } else { -0.05 };
        Prediction::from_logits(&logits, 3.0 + hist.len() as f32 * 0.1, value)
    })
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn session() -> String {
    let script = std::fs::read_to_string(data("uci_session.in")).unwrap();
    let cfg = EngineConfig::for_variant(Variant::Policy, 1500.0, 5.0);
    let opts = UciOptions {
        seed: 42,
        ..Default::default()
    };
    let mut out = Vec::new();
    uci_serve(&evaluator(), cfg, opts, script.as_bytes(), &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn uci_session_matches_golden_file() {
    let got = session();
    let path = data("uci_session.out");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &got).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert_eq!(got, want);
    assert_eq!(session(), got);
}
