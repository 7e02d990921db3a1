use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ponder::chess::Position;
use ponder::model::{EvalSession, Evaluator, Model, ModelConfig, ModelEvaluator, PositionEvaluator};
use ponder::search::{run_mcts, SearchParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bench_search<E: Evaluator>(c: &mut Criterion, name: &str, ev: &E, budgets: &[usize]) {
    let mut g = c.benchmark_group(name);
    for &n in budgets {
        g.bench_with_input(BenchmarkId::new("mcts", n), &n, |b, &n| {
            b.iter(|| {
                let mut session = ev.session("180+0".parse().unwrap(), [1500.0, 1500.0]);
                let pred = session.predict(&[]);
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                run_mcts(&mut session, &Position::startpos(), &pred, &SearchParams::fixed(n), None, &mut rng).unwrap()
            })
        });
    }
    g.finish();
}

fn benches(c: &mut Criterion) {
    bench_search(c, "search_stub", &PositionEvaluator::uniform(1.0, 0.0), &[50, 400]);
    let model = Model::new(ModelConfig { log_time: true, ..ModelConfig::small() }).unwrap();
    bench_search(c, "search_model", &ModelEvaluator::new(model), &[50]);
}

criterion_group! {
    name = search;
    config = Criterion::default().sample_size(10);
    targets = benches
}
criterion_main!(search);
