//! `kstree`: spectra, critical sets, moment controls and simulations for the
//! linear Kuramoto-Sivashinsky equation on star-shaped trees.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 on a structured refusal.

mod commands;
mod emit;
mod experiment;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use kstree::Parallelism;

use commands::Context;
use emit::Outcome;
use experiment::{eval_expression, ExperimentSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: kstree::Error },
}

impl CliError {
    fn payload(&self) -> Value {
        match self {
            CliError::Input(msg) => json!({"status": "error", "code": "invalid_input", "message": msg}),
            CliError::Io { .. } => json!({"status": "error", "code": "io", "message": self.to_string()}),
            CliError::Stage { stage, source } => {
                let detail = match source {
                    kstree::Error::Uncontrollable(d) => json!(d),
                    kstree::Error::Conditioning { condition, limit } => json!({"condition": condition, "limit": limit}),
                    _ => Value::Null,
                };
                let status = if source.is_refusal() { "refused" } else { "error" };
                json!({"status": status, "code": source.code(), "stage": stage, "message": source.to_string(), "detail": detail})
            }
        }
    }

    fn is_refusal(&self) -> bool {
        matches!(self, CliError::Stage { source, .. } if source.is_refusal())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "kstree", version, about = "Boundary null-control of the linear Kuramoto-Sivashinsky equation on star trees")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Experiment spec or bare tree configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Named worked example, used instead of --config.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Write every artifact into this directory instead of printing the main one.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of distinct eigenvalues to retain.
    #[arg(long, global = true, value_name = "K")]
    modes: Option<usize>,
    /// Active-channel bit string in channel order, e.g. 110.
    #[arg(long, global = true, value_name = "MASK")]
    channels: Option<String>,
    /// Comma-separated inactive channel names, e.g. a3,b3.
    #[arg(long, global = true, value_delimiter = ',', value_name = "NAMES")]
    inactive: Option<Vec<String>>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Override λ; accepts expressions such as 5*pi^2/2.
    #[arg(long, global = true, value_name = "EXPR")]
    lambda: Option<String>,
    /// Route difference-type eigenvalues through the b-channels.
    #[arg(long, global = true)]
    route_b: bool,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Modes kept by the simulator (default: modes + 4).
    #[arg(long, value_name = "K")]
    sim_modes: Option<usize>,
    /// Output samples over [0, T].
    #[arg(long)]
    steps: Option<usize>,
    /// Points of the control CSV.
    #[arg(long)]
    samples: Option<usize>,
    /// Reconstructed state on a per-edge grid, given as x-grid=K.
    #[arg(long, value_name = "x-grid=K")]
    dump_state: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenpairs of the scalar problems P1, P2, E1, E2.
    Spectrum {
        /// Comma-separated problem names, or all.
        #[arg(long, default_value = "all")]
        problem: String,
        /// Number of positive eigenvalues per problem.
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Membership of λ in every critical set.
    Critical,
    /// Eigenspaces of the tree operator with boundary traces.
    Assemble,
    /// Biorthogonal family to the retained exponentials.
    Biorthogonal,
    /// Moment targets and boundary controls.
    Synthesize {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Modal simulation under the synthesized (or zero) control.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Simulate without control.
        #[arg(long)]
        zero_control: bool,
    },
    /// Full null-control chain; refuses when the retained modes are not driven to zero.
    Verify {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Rank check of the channel pattern; refuses with the uncontrollable direction.
    Obstruct,
    /// Single-interval systems at three values of λ.
    IntervalDemo,
}

fn parse_dump(s: &str) -> Result<usize, CliError> {
    s.strip_prefix("x-grid=")
        .and_then(|k| k.parse().ok())
        .filter(|&k: &usize| k > 0)
        .ok_or_else(|| CliError::Input(format!("--dump-state expects x-grid=K with K >= 1, got {s:?}")))
}

fn build_context(cli: &Cli) -> Result<Context, CliError> {
    let g = &cli.global;
    let mut spec = match (&g.config, &g.preset) {
        (Some(_), Some(_)) => return Err(CliError::Input("--config and --preset are mutually exclusive".into())),
        (Some(path), None) => ExperimentSpec::load(path)?,
        (None, Some(name)) => experiment::preset(name)?,
        (None, None) => ExperimentSpec::default_tree(),
    };
    if let Some(expr) = &g.lambda {
        let lambda = eval_expression(expr).map_err(|e| CliError::Input(format!("--lambda: {e}")))?;
        spec.config = spec.config.with_lambda(lambda).map_err(|e| CliError::Input(format!("--lambda: {e}")))?;
    }
    if let Some(m) = g.modes {
        spec.modes = m;
    }
    if let Some(bits) = &g.channels {
        spec.channels = Some(bits.clone());
        spec.inactive.clear();
    }
    if let Some(names) = &g.inactive {
        spec.inactive = names.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        if g.channels.is_none() {
            spec.channels = None;
        }
    }
    spec.route_b |= g.route_b;
    let mut dump_grid = None;
    let run = match &cli.command {
        Command::Synthesize { run } | Command::Verify { run } => Some(run),
        Command::Simulate { run, zero_control } => {
            spec.zero_control |= *zero_control;
            Some(run)
        }
        _ => None,
    };
    if let Some(run) = run {
        if let Some(k) = run.sim_modes {
            spec.sim_modes = Some(k);
        }
        if let Some(s) = run.steps {
            spec.steps = s;
        }
        if let Some(s) = run.samples {
            spec.samples = s;
        }
        if let Some(d) = &run.dump_state {
            dump_grid = Some(parse_dump(d)?);
        }
    }
    let par = if g.sequential { Parallelism::Sequential } else { Parallelism::default() };
    Ok(Context { spec, format: g.format, par, dump_grid })
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let ctx = build_context(cli)?;
    match &cli.command {
        Command::Spectrum { problem, count } => commands::spectrum(&ctx, problem, *count),
        Command::Critical => commands::critical(&ctx),
        Command::Assemble => commands::assemble(&ctx),
        Command::Biorthogonal => commands::biorthogonal(&ctx),
        Command::Synthesize { .. } => commands::synthesize(&ctx),
        Command::Simulate { .. } => commands::simulate(&ctx),
        Command::Verify { .. } => commands::verify(&ctx),
        Command::Obstruct => commands::obstruct(&ctx),
        Command::IntervalDemo => commands::interval_demo(&ctx),
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value") + "\n"
}

fn emit(out: &Option<PathBuf>, outcome: &Outcome) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    let io = |e| CliError::Io { path: PathBuf::from("<stdout>"), source: e };
    match out {
        Some(dir) => {
            for path in outcome.write_to(dir)? {
                eprintln!("wrote {}", path.display());
            }
            if let Some(r) = &outcome.refusal {
                let path = dir.join("refusal.json");
                std::fs::write(&path, pretty(r)).map_err(|e| CliError::Io { path, source: e })?;
                stdout.write_all(pretty(r).as_bytes()).map_err(io)?;
            }
        }
        None => match &outcome.refusal {
            Some(r) => stdout.write_all(pretty(r).as_bytes()).map_err(io)?,
            None => {
                if let Some(a) = outcome.artifacts.get(outcome.primary) {
                    stdout.write_all(a.body.as_bytes()).map_err(io)?;
                }
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = dispatch(&cli).and_then(|outcome| {
        emit(&cli.global.out, &outcome)?;
        Ok(outcome.refusal.is_some())
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) if e.is_refusal() => {
            let payload = e.payload();
            if let Some(dir) = &cli.global.out {
                let written = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("refusal.json"), pretty(&payload)));
                if let Err(io) = written {
                    eprintln!("{}: {io}", dir.display());
                }
            }
            print!("{}", pretty(&payload));
            ExitCode::from(2)
        }
        Err(e) => {
            eprint!("{}", pretty(&e.payload()));
            ExitCode::from(1)
        }
    }
}
