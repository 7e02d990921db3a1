mod commands;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ponder::engine::Variant;

#[derive(Parser)]
#[command(name = "ponder", version, about = "Human-like chess engine toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus tools.
    #[command(subcommand)]
    Data(DataCmd),
    /// Train a model on a built dataset.
    Train(TrainArgs),
    /// Compare analytic and finite-difference gradients on a tiny model.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Ask the engine for one move after a sequence of UCI moves.
    Play(PlayArgs),
    /// Play two engine variants against each other.
    Selfplay(SelfplayArgs),
    /// Speak UCI on stdin/stdout.
    Uci(UciArgs),
    /// Metrics and calibration.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Choose c_time so the mean search budget hits a target.
    Calibrate(CalibrateArgs),
    /// Run the game server.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum DataCmd {
    /// Parse a PGN file and report diagnostics.
    Parse { pgn: PathBuf },
    /// Build Elo-balanced train/val/test splits from a PGN file.
    Build {
        pgn: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        bin_width: i32,
        #[arg(long, default_value_t = 1000)]
        bin_cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write uniformly random legal games as PGN.
    Random {
        #[arg(long, default_value_t = 100)]
        games: usize,
        #[arg(long, default_value_t = 200)]
        max_plies: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic human-like corpus as PGN.
    Synth {
        #[arg(long, default_value_t = 1000)]
        games: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Small,
    Tiny,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory written by `data build`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "small")]
    preset: Preset,
    /// Continue from this checkpoint (model, optimizer and step).
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, default_value_t = 6000)]
    steps: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 2e-3)]
    lr: f64,
    #[arg(long, default_value_t = 250)]
    eval_every: usize,
    /// Save a checkpoint every this many steps (0 = only at the end).
    #[arg(long, default_value_t = 1000)]
    save_every: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "adaptive_search")]
    variant: Variant,
    /// Elo of the opponent the engine should mirror.
    #[arg(long, default_value_t = 1500.0)]
    opponent_elo: f32,
    #[arg(long, default_value_t = ponder::search::SearchParams::default().c_time)]
    c_time: f64,
}

#[derive(Args)]
struct PlayArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Moves played so far, in UCI notation.
    #[arg(long, default_value = "")]
    moves: String,
    #[arg(long, default_value = "180+0")]
    time_control: String,
    /// Engine clock in seconds.
    #[arg(long)]
    remaining: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SelfplayArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "adaptive_search")]
    a: Variant,
    #[arg(long, default_value = "policy")]
    b: Variant,
    #[arg(long, default_value_t = 1500.0)]
    elo: f32,
    #[arg(long, default_value_t = 100)]
    games: usize,
    #[arg(long, default_value = "180+0")]
    time_control: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the games as PGN.
    #[arg(long)]
    pgn: Option<PathBuf>,
}

#[derive(Args)]
struct UciArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value = "180+0")]
    time_control: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Move matching, legality, think time, resignation and value metrics.
    Report {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Random legal games added for the legality strata.
        #[arg(long, default_value_t = 100)]
        random_games: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Skill calibration against a ladder of policy opponents.
    Skill {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = 10)]
        games_per_rung: usize,
        #[arg(long, default_value = "180+0")]
        time_control: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "val")]
    split: String,
    /// Desired mean number of simulations per move.
    #[arg(long, default_value_t = 50.0)]
    target: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "PONDER_CHECKPOINT")]
    checkpoint: PathBuf,
    #[arg(long, env = "PONDER_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "PONDER_MAX_SESSIONS", default_value_t = 64)]
    max_sessions: usize,
    /// Event logs for crash recovery; in-memory only when unset.
    #[arg(long, env = "PONDER_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Built web client to serve at `/`.
    #[arg(long, env = "PONDER_STATIC_DIR")]
    static_dir: Option<PathBuf>,
    #[arg(long, env = "PONDER_C_TIME", default_value_t = ponder::search::SearchParams::default().c_time)]
    c_time: f64,
    /// Delay engine replies by the predicted think time.
    #[arg(long, env = "PONDER_REALISM")]
    realism: bool,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Data(cmd) => commands::data(cmd),
        Command::Train(args) => commands::train(args),
        Command::Gradcheck { seed } => commands::gradcheck(seed),
        Command::Play(args) => commands::play(args),
        Command::Selfplay(args) => commands::selfplay(args),
        Command::Uci(args) => commands::uci(args),
        Command::Eval(cmd) => commands::eval(cmd),
        Command::Calibrate(args) => commands::calibrate(args),
        Command::Serve(args) => commands::serve(args),
    }
}
