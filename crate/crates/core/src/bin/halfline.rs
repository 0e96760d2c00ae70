use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use halfline_hjb::run::{self, error_summary, RunConfig};
use halfline_hjb::Error;

#[derive(Parser)]
#[command(name = "halfline", version, about = "Semilinear HJB solvers on the half-line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever problem kind the config declares.
    Run(Opts),
    HittingTime(Opts),
    SolveLinear(Opts),
    SolveHjb(Opts),
    Dividend(Opts),
    Consumption(Opts),
    ValidateAssumptions(Opts),
}

#[derive(Args)]
struct Opts {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel loops.
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn split(self) -> (Option<&'static str>, Opts) {
        match self {
            Command::Run(o) => (None, o),
            Command::HittingTime(o) => (Some("hitting-time"), o),
            Command::SolveLinear(o) => (Some("solve-linear"), o),
            Command::SolveHjb(o) => (Some("solve-hjb"), o),
            Command::Dividend(o) => (Some("dividend"), o),
            Command::Consumption(o) => (Some("consumption"), o),
            Command::ValidateAssumptions(o) => (Some("validate-assumptions"), o),
        }
    }
}

fn main() -> ExitCode {
    let (expected, opts) = Cli::parse().command.split();
    let kind = expected.unwrap_or("run");
    let loaded = RunConfig::load(&opts.config).and_then(|cfg| match expected {
        Some(k) if k != cfg.problem.kind() => Err(Error::InvalidArgument(format!(
            "subcommand '{k}' does not match problem kind '{}'",
            cfg.problem.kind()
        ))),
        _ => Ok(cfg),
    });
    let out_dir = |cfg: Option<&RunConfig>| {
        opts.out
            .clone()
            .or_else(|| cfg.and_then(|c| c.output_dir.clone()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    };
    let mut cfg = match loaded {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            let dir = out_dir(None);
            if std::fs::create_dir_all(&dir).is_ok() {
                let _ = std::fs::write(dir.join("summary.json"), error_summary(kind, &e));
            }
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = opts.seed {
        cfg.mc.seed = seed;
    }
    let dir = out_dir(Some(&cfg));
    let go = || run::run(&cfg, &dir);
    let result = match opts.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(go),
            Err(e) => Err(Error::InvalidArgument(format!("thread pool: {e}"))),
        },
        None => go(),
    };
    match result {
        Ok(code) => {
            if code != 0 {
                eprintln!("run finished with status {code}; see {}", dir.join("summary.json").display());
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
