mod config;
mod error;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use crate::config::{ExperimentSpec, Kind};
use crate::error::{CliError, CliResult};
use crate::output::{Manifest, OutDir};
use crate::run::{dispatch, load_model, Context};

/// Run lattice-dynamics experiments described by JSON config files.
#[derive(Parser)]
#[command(name = "latflow", version)]
struct Args {
    /// Experiment kind; must match the `kind` field of the config.
    #[arg(value_enum)]
    kind: Kind,

    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,

    /// Worker threads (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,

    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(args: &Args) -> CliResult<()> {
    let start = Instant::now();
    let spec = ExperimentSpec::load(&args.config)?;
    if spec.kind != args.kind {
        return Err(CliError::Validation(format!(
            "command `{}` does not match config kind `{}`",
            args.kind.name(),
            spec.kind.name()
        )));
    }
    let dir = match (&args.out, &spec.output) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => spec.resolve(d),
        (None, None) => PathBuf::from("out").join(spec.kind.name()),
    };
    let model = load_model(&spec)?;
    let mut ctx = Context {
        spec: &spec,
        model,
        out: OutDir::create(dir)?,
    };
    let result = latflow_core::par::install(args.workers, || dispatch(&mut ctx));
    let manifest = Manifest {
        kind: spec.kind.name(),
        version: latflow_core::VERSION,
        seed: spec.seed,
        workers: args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs: ctx.out.written.clone(),
        spec: spec.echo(),
    };
    output::write_json(&ctx.out.dir.join("manifest.json"), &manifest)?;
    result
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
