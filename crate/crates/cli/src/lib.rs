//! File handling and batch execution behind the `pencilph` binary.

pub mod commands;
pub mod problem;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

pub use commands::{run_command, Command, Flags, Report, Status};
pub use problem::{emit_problem, parse_problem, Format, Kind, ParseError, ProblemFile};

/// Environment variable overriding `atol`.
pub const TOLERANCE_ENV: &str = "PENCILPH_TOLERANCE";

pub fn env_atol() -> Result<Option<f64>, String> {
    match std::env::var(TOLERANCE_ENV) {
        Ok(s) => s
            .trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| format!("{TOLERANCE_ENV} must be a number, got {s:?}")),
        Err(_) => Ok(None),
    }
}

fn source_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Parses and runs one problem file.
pub fn process(cmd: Command, path: &Path, format: Option<Format>, flags: &Flags, env_atol: Option<f64>) -> Report {
    let source = source_name(path);
    let format = format.unwrap_or_else(|| problem::detect_format(path));
    let problem = match parse_problem(path, format) {
        Ok(p) => p,
        Err(e) => return commands::error_report(cmd, &source, &e.to_string(), Status::Error),
    };
    match commands::resolve_tolerances(flags, env_atol, &problem) {
        Ok(tol) => run_command(cmd, &problem, &source, flags, &tol),
        Err(e) => commands::error_report(cmd, &source, &e.to_string(), Status::Usage),
    }
}

/// Runs every file with up to `jobs` workers; results keep the input order.
pub fn process_all(
    cmd: Command,
    paths: &[PathBuf],
    format: Option<Format>,
    flags: &Flags,
    env_atol: Option<f64>,
    jobs: usize,
) -> Vec<Report> {
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Report>> = vec![None; paths.len()];
    let workers = jobs.clamp(1, paths.len().max(1));
    let done: Vec<Vec<(usize, Report)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(p) = paths.get(i) else { break };
                        out.push((i, process(cmd, p, format, flags, env_atol)));
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for (i, r) in done.into_iter().flatten() {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|r| r.expect("every file processed")).collect()
}

/// Writes `contents` through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// Report file name for an input: `<stem>.<command>.json`.
pub fn report_path(out_dir: &Path, input: &Path, cmd: Command) -> PathBuf {
    let stem = input.file_stem().map_or_else(|| "problem".into(), |s| s.to_string_lossy().into_owned());
    out_dir.join(format!("{stem}.{}.json", cmd.as_str()))
}

/// Worst status across a batch: usage, error, negative, inconclusive, success.
pub fn combined_status(reports: &[Report]) -> Status {
    let rank = |s: Status| match s {
        Status::Usage => 4,
        Status::Error => 3,
        Status::Negative => 2,
        Status::Inconclusive => 1,
        Status::Success => 0,
    };
    reports.iter().map(|r| r.status).max_by_key(|&s| rank(s)).unwrap_or(Status::Success)
}
