use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use entropic_bergstrom::checks::{self, CheckConfig};
use entropic_bergstrom::rng::stream_rng;
use entropic_bergstrom::runner::{self, CheckSpec, Format, SuiteConfig, SuiteReport};
use entropic_bergstrom::Result;

#[derive(Parser)]
#[command(name = "entropic-bergstrom", version, about = "Numerical checks of entropy-power and determinant inequalities")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Json => Format::Json,
            OutFormat::Csv => Format::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite described by a JSON configuration (the default suite if omitted).
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutFormat>,
    },
    /// Run a single check on generated instances.
    Check {
        name: String,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutFormat>,
    },
    /// Evaluate the λ-interpolated ratio on a grid and report second differences.
    ScanLambda {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 11)]
        grid: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Mixture components per law; 1 gives a closed-form Gaussian pair.
        #[arg(long, default_value_t = 2)]
        components: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the registered check names.
    List,
    /// Print the default suite configuration.
    DefaultConfig,
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn finish(report: &SuiteReport, out: Option<&PathBuf>, format: Format) -> Result<ExitCode> {
    emit(&report.render(format)?, out)?;
    for line in report.summary_lines() {
        eprintln!("{line}");
    }
    Ok(if report.violations() == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} violated verdict(s)", report.violations());
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            format,
        } => {
            let mut cfg = match config {
                Some(path) => SuiteConfig::load(&path)?,
                None => SuiteConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let format = format.map(Format::from).unwrap_or(cfg.output.format);
            let out = out.or_else(|| cfg.output.path.clone());
            let report = runner::run_suite(&cfg)?;
            finish(&report, out.as_ref(), format)
        }
        Command::Check {
            name,
            dim,
            instances,
            samples,
            seed,
            out,
            format,
        } => {
            let mut spec = CheckSpec::named(&name);
            spec.dims = dim.map(|d| vec![d]);
            let cfg = SuiteConfig {
                checks: vec![spec],
                instances_per_check: instances,
                mc_samples: samples,
                seed,
                ..SuiteConfig::default()
            };
            let report = runner::run_suite(&cfg)?;
            finish(&report, out.as_ref(), format.map(Format::from).unwrap_or_default())
        }
        Command::ScanLambda {
            dim,
            grid,
            seed,
            samples,
            components,
            out,
        } => {
            let mut rng = stream_rng(seed, &["scan-lambda", &dim.to_string()]);
            let x = runner::random_mixture(dim, components.max(1), &mut rng);
            let y = runner::random_mixture(dim, components.max(1), &mut rng);
            let cfg = CheckConfig {
                samples,
                seed,
                ..CheckConfig::default()
            };
            let scan = checks::lambda_concavity_scan(&x, &y, grid, &cfg)?;
            emit(&(serde_json::to_string_pretty(&scan)? + "\n"), out.as_ref())?;
            if !scan.non_concave.is_empty() {
                eprintln!("non-concave at interior grid points {:?}", scan.non_concave);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::List => {
            for name in runner::check_names() {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::DefaultConfig => {
            println!("{}", serde_json::to_string_pretty(&SuiteConfig::default())?);
            Ok(ExitCode::SUCCESS)
        }
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
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
