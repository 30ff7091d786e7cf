use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trgeo_cli::scenario::OPERATIONS;
use trgeo_cli::{execute, run, write_artifacts, CliError, RunOptions, EXIT_VALIDATION};

#[derive(Parser)]
#[command(name = "trgeo", version, about = "J-volume, its variations and holomorphic geodesics of totally real tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (JSON, "version": 1).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's "output" or out/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to TRGEO_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Multiplies every pass/fail tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Runs whatever operation the scenario names.
    Run(Common),
    /// Laurent curves: analyze | classify | geodesic | length | secondvar.
    Curve { action: String, #[command(flatten)] common: Common },
    /// J-volume: compute | hj.
    Jvol { action: String, #[command(flatten)] common: Common },
    /// Geodesics: run | bvp | uniqueness.
    Flow { action: String, #[command(flatten)] common: Common },
    /// Variations: first | second | density | convexity | mixed | stability.
    Variation { action: String, #[command(flatten)] common: Common },
    /// Ambient charts: verify.
    Ambient { action: String, #[command(flatten)] common: Common },
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(k) = flag {
        return Ok(Some(k));
    }
    match std::env::var("TRGEO_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::invalid(format!("TRGEO_THREADS={s:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (expected, common) = match cli.command {
        Command::Run(c) => (None, c),
        Command::Curve { action, common } => (Some(("curve", action)), common),
        Command::Jvol { action, common } => (Some(("jvol", action)), common),
        Command::Flow { action, common } => (Some(("flow", action)), common),
        Command::Variation { action, common } => (Some(("variation", action)), common),
        Command::Ambient { action, common } => (Some(("ambient", action)), common),
    };
    let code = match drive(expected, &common) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("trgeo: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn drive(expected: Option<(&str, String)>, common: &Common) -> Result<i32, CliError> {
    if let Some(k) = threads(common.threads)? {
        if k == 0 {
            return Err(CliError::invalid("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::invalid(e.to_string()))?;
    }
    let (sc, base) = run::load(&common.scenario)?;
    if let Some((group, action)) = expected {
        let op = OPERATIONS
            .iter()
            .find(|(_, g, a)| *g == group && *a == action)
            .map(|(op, _, _)| *op)
            .ok_or_else(|| CliError::UnknownOperation(format!("{group} {action}")))?;
        if op != sc.task.op() {
            return Err(CliError::invalid(format!(
                "scenario runs {} but the command asks for {group} {action}",
                sc.task.op()
            )));
        }
    }
    let out = match (&common.out, &sc.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("out").join(&sc.name),
    };
    let opts = RunOptions {
        base_dir: base,
        tol_scale: common.tol_scale,
    };
    let outcome = execute(&sc, &opts);
    write_artifacts(&out, &sc, &outcome, common.tol_scale)?;
    match outcome {
        Ok(_) => Ok(0),
        Err(e) => {
            eprintln!("trgeo: {e}");
            Ok(if e.exit_code() == 0 { EXIT_VALIDATION } else { e.exit_code() })
        }
    }
}
