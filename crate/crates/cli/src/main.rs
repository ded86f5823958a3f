use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use shellvar::io::{dispatch, error_json, parse_config, Command};
use shellvar::ShellError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Per-node geometry CSV and curvature summary.
    Curvature,
    /// Total energy and admissibility of the configured deformation.
    Evaluate,
    /// Polyconvexity, coercivity and blow-up probes.
    Verify,
    /// Constrained minimization from the configured deformation.
    Minimize,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Curvature => Command::Curvature,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::Verify => Command::Verify,
            Cmd::Minimize => Command::Minimize,
        }
    }
}

/// Shell geometry, energies, certification probes and minimization.
///
/// Exit status: 0 on success, 1 when a probe fails, an evaluated
/// configuration is inadmissible or a minimization does not converge,
/// 2 on input errors. Errors are also written to stderr as JSON.
#[derive(Debug, Parser)]
#[command(name = "shellvar", version)]
struct Args {
    command: Cmd,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: &Args) -> Result<i32, ShellError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = parse_config(&text)?;
    if let Some(o) = &args.out {
        cfg.output.dir = o.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let base = args.config.parent().unwrap_or(Path::new("."));
    let out = dispatch(args.command.into(), &cfg, base)?;
    print!("{}", out.report);
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = ShellError::validation("arguments", e.to_string().trim());
            eprintln!("{}", error_json(&err));
            return ExitCode::from(2);
        }
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(2)
        }
    }
}
