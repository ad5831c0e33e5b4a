//! Command-line front end: config parsing, flag handling and the classify,
//! train, evaluate, sort and synth commands.

pub mod args;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{normalize_args, Cli, Mode};
pub use commands::{CliError, Classifier, Context, EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, EXIT_USAGE};
pub use config::{parse_config, parse_config_str, AppConfig, ConfigError};
pub use pageclass::dataset::{parse_page_ref, PageRef, UnparseableName};

const DEFAULT_CONFIG: &str = "config.txt";

fn load_config(cli: &Cli) -> Result<AppConfig, CliError> {
    let explicit = cli.config.as_deref();
    let path = explicit.unwrap_or(Path::new(DEFAULT_CONFIG));
    if explicit.is_none() && !path.exists() {
        return Ok(AppConfig::default());
    }
    let (cfg, warnings) = parse_config(path).map_err(|e| CliError::Usage(e.to_string()))?;
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli, mode: Mode, ctx: &Context, out: &mut (dyn Write + Send)) -> Result<i32, CliError> {
    match mode {
        Mode::File(path) => {
            let classifier = commands::load_classifier(ctx)?;
            commands::classify_file(ctx, &classifier, &path, out)?;
            Ok(EXIT_OK)
        }
        Mode::Directory(dir) => {
            let classifier = commands::load_classifier(ctx)?;
            Ok(commands::classify_directory(ctx, &classifier, &dir, out)?.exit_code())
        }
        Mode::Train => Ok(commands::train_command(ctx, out)?.exit_code()),
        Mode::Eval => {
            let (_, failed) = commands::eval_command(ctx, out)?;
            Ok(if failed == 0 { EXIT_OK } else { EXIT_PARTIAL })
        }
        Mode::Sort => {
            let (Some(csv), Some(src), Some(dst)) = (&cli.sort, &cli.source, &cli.dest) else {
                return Err(CliError::Usage("--sort needs --source and --dest".into()));
            };
            commands::sort_command(csv, src, dst, cli.verify, out)
        }
        Mode::Synth(dir) => {
            commands::synth_command(&dir, cli.synth_count, ctx.config.forest.seed, out)?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs one invocation and returns the process exit code. Normal output goes
/// to `out`, errors to stderr.
pub fn run<I, T>(argv: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let cli = match Cli::try_parse_from(normalize_args(argv)) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{e}");
            return EXIT_USAGE;
        }
    };
    let result = load_config(&cli).and_then(|mut cfg| {
        cli.apply_overrides(&mut cfg);
        let mode = cli.mode(&cfg).map_err(CliError::Usage)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
        let mut ctx = Context::new(cfg);
        ctx.recursive = cli.inner;
        ctx.raw = cli.raw;
        ctx.normalize = cli.normalize;
        pool.install(|| dispatch(&cli, mode, &ctx, out))
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
