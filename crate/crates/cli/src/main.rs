use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use pencilph_cli::{combined_status, env_atol, process_all, report_path, write_atomic, Command, Flags, Format, Status};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Analyze,
    RecastDh,
    Stabilize,
    RecastPh,
    Geometry,
    Simulate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Analyze => Command::Analyze,
            Cmd::RecastDh => Command::RecastDh,
            Cmd::Stabilize => Command::Stabilize,
            Cmd::RecastPh => Command::RecastPh,
            Cmd::Geometry => Command::Geometry,
            Cmd::Simulate => Command::Simulate,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InputFormat {
    Json,
    Mtx,
}

/// Regularity, stability and port-Hamiltonian analysis of matrix pencils.
#[derive(Debug, Parser)]
#[command(name = "pencilph", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Problem files (JSON) or Matrix Market bundle directories.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    /// Simulation horizon.
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    /// Number of simulation samples.
    #[arg(long, default_value_t = 201)]
    samples: usize,
    /// Input format; detected from the path when omitted.
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Write `<stem>.<command>.json` reports here instead of printing them.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (one file per worker).
    #[arg(long, short = 'j')]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    let env = match env_atol() {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(64);
        }
    };
    let flags = Flags { atol: cli.atol, rtol: cli.rtol, horizon: cli.horizon, samples: cli.samples };
    let format = cli.format.map(|f| match f {
        InputFormat::Json => Format::Json,
        InputFormat::Mtx => Format::MatrixMarket,
    });
    let cmd = Command::from(cli.command);
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let reports = process_all(cmd, &cli.paths, format, &flags, env, jobs);
    let mut status = combined_status(&reports);
    for (path, r) in cli.paths.iter().zip(&reports) {
        match &cli.out {
            Some(dir) => {
                let target = report_path(dir, path, cmd);
                if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| write_atomic(&target, &r.to_pretty())) {
                    eprintln!("error: cannot write {}: {e}", target.display());
                    status = Status::Error;
                }
            }
            None => print!("{}", r.to_pretty()),
        }
        if let Some(msg) = r.json.get("error").and_then(|v| v.as_str()) {
            eprintln!("{}: {msg}", path.display());
        }
    }
    ExitCode::from(status.exit_code() as u8)
}
