use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ponder::chess::Color;
use ponder::data::{
    build_dataset, parse_pgn, random_games, read_dataset, synthesize_pgn, write_dataset, write_pgn, DatasetConfig,
    DatasetEntry, SynthConfig, TimeControl,
};
use ponder::engine::{uci_serve, EngineConfig, Player, UciOptions};
use ponder::eval::{
    evaluate_entries, evaluate_games, metric_report, play_match, selfplay_calibration, skill_calibration, default_ladder,
    GameResult, SelfPlayConfig, Source,
};
use ponder::model::{
    examples_from_records, grad_check, load_checkpoint, save_checkpoint, train_until, GradCheckConfig, Model,
    ModelConfig, ModelEvaluator, TrainConfig, TrainState,
};
use ponder::search::calibrate_c_time;
use ponder_service::{AppState, EngineDefaults, ServiceConfig};
use serde::Serialize;

use crate::{CalibrateArgs, DataCmd, EngineArgs, EvalCmd, Format, PlayArgs, Preset, SelfplayArgs, ServeArgs, TrainArgs, UciArgs};

fn print_json(v: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn load_model(path: &Path) -> Result<ModelEvaluator> {
    let ckpt = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(ModelEvaluator::new(ckpt.model))
}

fn engine_config(args: &EngineArgs) -> EngineConfig {
    EngineConfig::for_variant(args.variant, args.opponent_elo, args.c_time)
}

fn split<'a>(ds: &'a ponder::data::Dataset, name: &str) -> Result<&'a [DatasetEntry]> {
    Ok(match name {
        "train" => &ds.train,
        "val" => &ds.val,
        "test" => &ds.test,
        other => bail!("unknown split {other:?} (train, val or test)"),
    })
}

pub fn data(cmd: DataCmd) -> Result<()> {
    match cmd {
        DataCmd::Parse { pgn } => {
            let parsed = parse_pgn(&fs::read_to_string(&pgn)?);
            let plies: usize = parsed.games.iter().map(|g| g.moves.len()).sum();
            print_json(&serde_json::json!({
                "games": parsed.games.len(),
                "plies": plies,
                "errors": parsed.errors,
            }))
        }
        DataCmd::Build { pgn, out, bin_width, bin_cap, seed } => {
            let parsed = parse_pgn(&fs::read_to_string(&pgn)?);
            if !parsed.errors.is_empty() {
                log::warn!("{} games rejected while parsing", parsed.errors.len());
            }
            let config = DatasetConfig {
                bin_width,
                bin_cap,
                seed,
                ..Default::default()
            };
            let (manifest, ds) = build_dataset(parsed.games, &config)?;
            for w in &manifest.warnings {
                log::warn!("{w}");
            }
            write_dataset(&out, &manifest, &ds)?;
            print_json(&manifest)
        }
        DataCmd::Random { games, max_plies, seed, out } => {
            let text: String = random_games(seed, games, max_plies).iter().map(|g| write_pgn(g, &[]) + "\n").collect();
            fs::write(out, text)?;
            Ok(())
        }
        DataCmd::Synth { games, seed, out } => {
            fs::write(out, synthesize_pgn(&SynthConfig { games, seed, ..Default::default() }))?;
            Ok(())
        }
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let (_, ds) = read_dataset(&args.data)?;
    let tc = TrainConfig {
        steps: args.steps,
        batch_size: args.batch_size,
        lr_max: args.lr,
        eval_every: args.eval_every,
        seed: args.seed,
        ..Default::default()
    };
    let (mut model, mut state) = match &args.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            let state = ckpt.state.unwrap_or_else(|| TrainState::new(&ckpt.model, &tc));
            (ckpt.model, state)
        }
        None => {
            let config = match args.preset {
                Preset::Desk => ModelConfig::desk(),
                Preset::Small => ModelConfig { log_time: true, ..ModelConfig::small() },
                Preset::Tiny => ModelConfig::tiny(),
            };
            let model = Model::new(config)?;
            let state = TrainState::new(&model, &tc);
            (model, state)
        }
    };
    let records = |entries: &[DatasetEntry]| entries.iter().map(|e| e.record.clone()).collect::<Vec<_>>();
    let train_set = examples_from_records(&records(&ds.train), model.config.context)?;
    let val_set = examples_from_records(&records(&ds.val), model.config.context)?;
    log::info!(
        "{} parameters, {} train / {} val windows, from step {}",
        model.n_params(),
        train_set.len(),
        val_set.len(),
        state.step
    );
    let every = if args.save_every == 0 { tc.steps } else { args.save_every };
    while state.step < tc.steps {
        let until = (state.step / every + 1) * every;
        train_until(&mut model, &mut state, &tc, &train_set, &val_set, until, |e| {
            if let Some(v) = e.val_nll {
                log::info!("step {} lr {:.2e} train {:.4} val {:.4}", e.step, e.lr, e.nll, v);
            }
        })?;
        save_checkpoint(&args.out, &model, Some(&state), Some(&tc))?;
    }
    Ok(())
}

pub fn gradcheck(seed: u64) -> Result<()> {
    let report = grad_check(&GradCheckConfig { seed, ..Default::default() })?;
    print_json(&report)
}

pub fn play(args: PlayArgs) -> Result<()> {
    let ev = load_model(&args.engine.checkpoint)?;
    let tc: TimeControl = args.time_control.parse()?;
    let moves: Vec<&str> = args.moves.split_whitespace().collect();
    let color = if moves.len() % 2 == 0 { Color::White } else { Color::Black };
    let mut player = Player::new(&ev, engine_config(&args.engine), color, tc, args.seed);
    for m in moves {
        let mv = m.parse().with_context(|| format!("bad move {m:?}"))?;
        player.apply(mv)?;
    }
    let decision = player.decide(args.remaining, None)?;
    print_json(&decision)
}

pub fn selfplay(args: SelfplayArgs) -> Result<()> {
    let ev = load_model(&args.checkpoint)?;
    let a = EngineConfig::for_variant(args.a, args.elo, ponder::search::SearchParams::default().c_time);
    let b = EngineConfig::for_variant(args.b, args.elo, ponder::search::SearchParams::default().c_time);
    let cfg = SelfPlayConfig {
        time_control: args.time_control.parse()?,
        seed: args.seed,
        ..Default::default()
    };
    let (result, games) = play_match(&ev, &a, &b, args.games, &cfg)?;
    if let Some(path) = args.pgn {
        let text: String = games.iter().map(|g| write_pgn(g, &[]) + "\n").collect();
        fs::write(path, text)?;
    }
    print_json(&result)
}

pub fn uci(args: UciArgs) -> Result<()> {
    let ev = load_model(&args.engine.checkpoint)?;
    let opts = UciOptions {
        seed: args.seed,
        time_control: args.time_control.parse()?,
    };
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    uci_serve(&ev, engine_config(&args.engine), opts, stdin.lock(), &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn eval(cmd: EvalCmd) -> Result<()> {
    match cmd {
        EvalCmd::Report { checkpoint, data, split: name, random_games: n_random, format } => {
            let ev = load_model(&checkpoint)?;
            let (_, ds) = read_dataset(&data)?;
            let mut evals = evaluate_entries(&ev, split(&ds, &name)?)?;
            if n_random > 0 {
                evals.extend(evaluate_games(&ev, &random_games(1, n_random, 200), None, Source::Random)?);
            }
            let report = metric_report(&evals);
            match format {
                Format::Csv => print!("{}", report.to_csv()),
                Format::Json => print_json(&report)?,
            }
            Ok(())
        }
        EvalCmd::Skill { engine, games_per_rung, time_control, seed } => {
            let ev = load_model(&engine.checkpoint)?;
            let cfg = SelfPlayConfig {
                time_control: time_control.parse()?,
                seed,
                ..Default::default()
            };
            let games = selfplay_calibration(&ev, &engine_config(&engine), &default_ladder(), games_per_rung, &cfg)?;
            let log: Vec<GameResult> = games.iter().map(GameResult::from).collect();
            print_json(&skill_calibration(&log)?)
        }
    }
}

pub fn calibrate(args: CalibrateArgs) -> Result<()> {
    let ev = load_model(&args.checkpoint)?;
    let (_, ds) = read_dataset(&args.data)?;
    let evals = evaluate_entries(&ev, split(&ds, &args.split)?)?;
    let times: Vec<f64> = evals.iter().filter(|e| e.human_move.is_some()).map(|e| e.pred_time).collect();
    let defaults = ponder::search::SearchParams::default();
    match calibrate_c_time(&times, args.target, defaults.n_min, defaults.n_max) {
        Some(c) => print_json(&serde_json::json!({ "c_time": c, "positions": times.len(), "target": args.target })),
        None => bail!("target {} simulations is out of reach with n_max {}", args.target, defaults.n_max),
    }
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let ev = Arc::new(load_model(&args.checkpoint)?);
    let config = ServiceConfig {
        port: args.port,
        max_sessions: args.max_sessions,
        data_dir: args.data_dir,
        static_dir: args.static_dir,
        engine: EngineDefaults {
            c_time: args.c_time,
            ponder_realism: args.realism,
        },
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let state = AppState::new(ev, config)?;
        ponder_service::serve(state).await
    })?;
    Ok(())
}
