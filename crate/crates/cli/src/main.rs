//! `adalidar`: design sweeps, scan planning, simulated capture, depth
//! completion and evaluation.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error.

mod args;
mod optics_cmd;
mod parse;
mod pipeline;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use serde::{Deserialize, Serialize};

use args::{Cli, Command};
use parse::{usage, UsageError};

/// Contents of `run.json`. The job count is deliberately absent so runs with
/// different `--jobs` produce identical files.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: Command,
}

fn write_run_json(out: &Path, command: &Command) -> anyhow::Result<()> {
    let record = RunRecord {
        tool: "adalidar".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.clone(),
    };
    let path = out.join("run.json");
    let text = serde_json::to_string_pretty(&record)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn execute(command: Command) -> anyhow::Result<()> {
    let command = match command {
        Command::Replay(r) => {
            let text = fs::read_to_string(&r.run_json).with_context(|| format!("reading {}", r.run_json.display()))?;
            let mut record: RunRecord = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{} is not a run record: {e}", r.run_json.display())))?;
            if let Command::Replay(_) = record.command {
                return Err(usage("a run record cannot replay another replay"));
            }
            if let Some(out) = r.out {
                *record.command.out_mut().expect("non-replay commands have an output") = out;
            }
            record.command
        }
        c => c,
    };
    let out: PathBuf = command.out().expect("non-replay commands have an output").clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_run_json(&out, &command)?;
    match &command {
        Command::OpticsSweep(a) => optics_cmd::optics_sweep(a),
        Command::FitBudget(a) => optics_cmd::fit_budget(a),
        Command::GenScene(a) => pipeline::gen_scene(a),
        Command::Scan(a) => pipeline::scan(a),
        Command::Capture(a) => pipeline::capture(a),
        Command::Fovea(a) => pipeline::fovea(a),
        Command::Complete(a) => pipeline::complete(a),
        Command::Eval(a) => pipeline::eval(a),
        Command::Replay(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // sources are often already spelled out in their parent's message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
