use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lamperti::commands::{
    cmd_check, cmd_compare, cmd_converge, cmd_self_test, cmd_simulate, CliError, DumpFormat,
    RunOptions, SimulateOptions, EXIT_CONFIG, EXIT_INADMISSIBLE, EXIT_OK, EXIT_SOLVER, EXIT_USAGE,
};
use lamperti::config::ExperimentConfig;
use lamperti::core::SchemeId;
use lamperti::presets;

/// Domain-preserving simulation of scalar SDEs and strong-convergence studies.
#[derive(Parser)]
#[command(name = "lamperti", version)]
struct Cli {
    /// Run the built-in self-test (synthetic fits, zero-noise fixed points) and exit.
    #[arg(long)]
    self_test: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate model parameters and step sizes.
    Check(Common),
    /// Simulate paths and write trajectories.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of paths.
        #[arg(long)]
        paths: Option<usize>,
        /// Schemes to run on each path (default: scheme.id from the config).
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
        /// Also dump the Brownian increments.
        #[arg(long, value_enum)]
        dump_brownian: Option<Dump>,
    },
    /// Estimate strong errors over the step ladder and fit the convergence order.
    Converge(Common),
    /// Compare drift-implicit Milstein with LBE for CIR.
    Compare(Common),
    /// Same as --self-test.
    SelfTest,
    /// List presets, or print one as a config file.
    Presets { name: Option<String> },
}

#[derive(Clone, Copy, ValueEnum)]
enum Dump {
    Binary,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(
        long,
        short,
        conflicts_with = "preset",
        required_unless_present = "preset"
    )]
    config: Option<PathBuf>,
    /// Built-in config instead of a file (see `lamperti presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Override a config key, e.g. --set model.sigma=0.4 (repeatable).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (default: output.dir, then $LAMPERTI_OUT_DIR, then ./lamperti-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for path batches; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Monte Carlo paths (overrides monte_carlo.n_paths).
    #[arg(long)]
    n_paths: Option<usize>,
    /// Seed stream (overrides monte_carlo.stream).
    #[arg(long)]
    stream: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, RunOptions), CliError> {
        let base = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => presets::by_name(name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown preset {name:?} (known: {})",
                    presets::NAMES.join(", ")
                ))
            })?,
            (None, None) => unreachable!("clap requires --config or --preset"),
        };
        let mut sets = self.set.clone();
        if let Some(n) = self.n_paths {
            sets.push(format!("monte_carlo.n_paths={n}"));
        }
        if let Some(s) = self.stream {
            sets.push(format!("monte_carlo.stream={s}"));
        }
        let cfg = base.with_overrides(&sets)?;
        Ok((
            cfg,
            RunOptions {
                workers: self.workers,
                out_dir: self.out.clone(),
            },
        ))
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<u8, CliError> {
    if cli.self_test {
        return Ok(if cmd_self_test(out)? {
            EXIT_OK
        } else {
            EXIT_SOLVER
        });
    }
    let Some(command) = cli.command else {
        return Err(CliError::Config("no command given (try --help)".into()));
    };
    match command {
        Command::Check(common) => {
            let (cfg, _) = common.load()?;
            let spec = cfg.spec()?;
            if !lamperti::core::validate_params(&spec).is_valid() {
                cmd_check(&cfg, out)?;
                return Ok(EXIT_CONFIG);
            }
            Ok(if cmd_check(&cfg, out)? {
                EXIT_OK
            } else {
                EXIT_INADMISSIBLE
            })
        }
        Command::Simulate {
            common,
            paths,
            schemes,
            dump_brownian,
        } => {
            let (cfg, opts) = common.load()?;
            let schemes = schemes
                .iter()
                .map(|s| {
                    SchemeId::from_name(s)
                        .ok_or_else(|| CliError::Config(format!("--schemes: unknown scheme {s:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let sim = SimulateOptions {
                paths,
                schemes,
                dump: dump_brownian.map(|d| match d {
                    Dump::Binary => DumpFormat::Binary,
                    Dump::Csv => DumpFormat::Csv,
                }),
            };
            cmd_simulate(&cfg, &sim, &opts, out)?;
            Ok(EXIT_OK)
        }
        Command::Converge(common) => {
            let (cfg, opts) = common.load()?;
            cmd_converge(&cfg, &opts, out)?;
            Ok(EXIT_OK)
        }
        Command::Compare(common) => {
            let (cfg, opts) = common.load()?;
            cmd_compare(&cfg, &opts, out)?;
            Ok(EXIT_OK)
        }
        Command::SelfTest => Ok(if cmd_self_test(out)? {
            EXIT_OK
        } else {
            EXIT_SOLVER
        }),
        Command::Presets { name: None } => {
            for n in presets::NAMES {
                writeln!(out, "{n}").map_err(CliError::from)?;
            }
            Ok(EXIT_OK)
        }
        Command::Presets { name: Some(name) } => {
            let cfg = presets::by_name(&name)
                .ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
            write!(out, "{}", cfg.to_toml()).map_err(CliError::from)?;
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
