//! The `srcr` command-line tool as a library, so it can be driven in-process.

mod args;
mod commands;
mod config_file;
mod output;

use std::ffi::OsString;
use std::time::Instant;

use clap::{CommandFactory, Parser};
use srcr_core::error_lab::ErrorLabError;
use srcr_core::numerics::NumericsError;
use srcr_core::pruning::PruningError;
use srcr_core::quantization::QuantizationError;

use args::Cli;
use output::{RunManifest, RunRecorder};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Bad flag combinations that clap cannot express.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn is_numerical(cause: &(dyn std::error::Error + 'static)) -> bool {
    if let Some(e) = cause.downcast_ref::<NumericsError>() {
        return e.is_numerical();
    }
    if let Some(e) = cause.downcast_ref::<PruningError>() {
        return e.is_numerical();
    }
    if let Some(e) = cause.downcast_ref::<QuantizationError>() {
        return e.is_numerical();
    }
    if let Some(e) = cause.downcast_ref::<ErrorLabError>() {
        return e.is_numerical();
    }
    false
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|c| c.is::<UsageError>()) {
        EXIT_USAGE
    } else if err.chain().any(is_numerical) {
        EXIT_NUMERICAL
    } else {
        EXIT_DATA
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .try_init()
        .ok();
}

/// Result of one invocation: exit status plus everything destined for stdout and
/// stderr. Log records go straight to stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

/// Run the tool on `argv` (program name first).
pub fn run<I: IntoIterator<Item = OsString>>(argv: I) -> Outcome {
    let started = Instant::now();
    let subcommands: Vec<String> = Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect();
    let names: Vec<&str> = subcommands.iter().map(String::as_str).collect();
    let argv: Vec<OsString> = argv.into_iter().collect();
    let argv = match config_file::merge_into_args(argv, &names) {
        Ok(a) => a,
        Err(e) => {
            return Outcome {
                code: EXIT_USAGE,
                stdout: String::new(),
                stderr: format!("error: {e:#}\n"),
            }
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code: 0,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    init_logging(cli.global.verbose);

    let mut rec = RunRecorder::default();
    let mut stdout = String::new();
    let mut stderr = String::new();
    let mut stdout_digest = None;
    let result = commands::run(&cli.command, &mut rec).and_then(|rendered| {
        let text = rendered.render(cli.global.format);
        match &cli.global.output {
            Some(path) => rec.write_output(path, text.as_bytes()),
            None => {
                stdout_digest = Some(output::sha256_hex(text.as_bytes()));
                stdout = text;
                Ok(())
            }
        }
    });
    let mut code = match &result {
        Ok(()) => 0,
        Err(e) => {
            stderr.push_str(&format!("error: {e:#}\n"));
            exit_code(e)
        }
    };

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name(),
        parameters: serde_json::json!({
            "global": &cli.global,
            "command": &cli.command,
        }),
        input_digests: rec.inputs,
        output_paths: rec.outputs,
        stdout_sha256: stdout_digest,
        exit_status: i32::from(code),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let manifest_json = serde_json::to_string(&manifest).expect("manifest serializes");
    match &cli.global.manifest {
        Some(path) => {
            if let Err(e) = output::write_atomic(path, format!("{manifest_json}\n").as_bytes()) {
                stderr.push_str(&format!("error: writing manifest: {e:#}\n"));
                code = EXIT_DATA;
            }
        }
        None => stderr.push_str(&format!("manifest: {manifest_json}\n")),
    }
    Outcome {
        code,
        stdout,
        stderr,
    }
}
