use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use open_schwinger::config::{ExperimentConfig, ExperimentKind};
use open_schwinger::output::OutputDir;
use open_schwinger::{experiments, parallel, Error};

/// Exact numerics for the open lattice Schwinger model.
#[derive(Debug, Parser)]
#[command(name = "open-schwinger", version)]
struct Cli {
    /// Experiment to run; may be omitted when `--figure` is given.
    #[arg(value_enum)]
    experiment: Option<ExperimentKind>,
    /// TOML file merged over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `section.key=value` override, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Figure preset such as `fig9`.
    #[arg(long)]
    figure: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<String>, Error> {
    let kind = match (cli.experiment, cli.figure.as_deref()) {
        (Some(k), None) => k,
        (k, Some(fig)) => {
            let f = ExperimentKind::from_figure(fig)?;
            if k.is_some_and(|k| k != f) {
                return Err(Error::Validation(format!("{fig} runs {}, not {}", f.name(), k.unwrap().name())));
            }
            f
        }
        (None, None) => return Err(Error::Validation("name an experiment or pass --figure".into())),
    };
    let cfg = ExperimentConfig::resolve(kind, cli.config.as_deref(), &cli.set)?;
    let violations = cfg.validate();
    if !violations.is_empty() {
        return Err(Error::Validation(violations.join("; ")));
    }
    let cap = std::env::var("OPEN_SCHWINGER_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    let threads = match (cfg.threads, cap) {
        (0, c) => c,
        (n, Some(c)) => Some(n.min(c)),
        (n, None) => Some(n),
    };
    parallel::init_threads(threads);

    let mut out = OutputDir::create(&cli.out)?;
    let summary = experiments::run(&cfg, &mut out)?;
    let root = out.root().to_path_buf();
    let mut files: Vec<String> = out.files().iter().map(|f| root.join(f).display().to_string()).collect();
    files.push(out.finish(&cfg, &summary)?.display().to_string());
    Ok(files)
}
