use std::path::PathBuf;
use std::process::ExitCode;

use afford_core::pipeline::{self, Overrides, Run};
use afford_core::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "afford",
    version,
    about = "Object affordance embeddings from verb-application counts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for independent fits and corpus files.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Accepted for compatibility; results do not depend on thread count.
    #[arg(long, global = true)]
    deterministic: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    d: Option<usize>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Count verb applications per noun.
    Extract,
    /// Turn counts into a PPMI matrix.
    Ppmi,
    /// Fit the embedding at the configured (d, beta).
    Factorize,
    /// Cross-validate (d, beta) over the configured grid.
    Cv,
    /// Rank verbs for each object.
    Rank,
    /// Score rankings against ground-truth datasets.
    Eval,
    /// Predict target dimensions from the embedding.
    Regress,
    /// Collect all artifacts into one report.
    Report,
    /// extract, ppmi, factorize, rank, eval, regress, report.
    All,
}

fn fail(e: &Error) -> ExitCode {
    let line = serde_json::json!({"error": e.kind(), "message": e.to_string()});
    eprintln!("{line}");
    if matches!(e, Error::Config(_)) {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            return fail(&Error::Config(e.to_string()));
        }
    }
    let Some(config) = cli.config.as_ref() else {
        return fail(&Error::Config("--config is required".into()));
    };
    let overrides = Overrides {
        seed: cli.seed,
        d: cli.d,
        beta: cli.beta,
        output_dir: cli.output_dir.clone(),
    };
    let run = match Run::load(config, &overrides) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let result = match cli.command {
        Command::Extract => pipeline::cmd_extract(&run),
        Command::Ppmi => pipeline::cmd_ppmi(&run),
        Command::Factorize => pipeline::cmd_factorize(&run),
        Command::Cv => pipeline::cmd_cv(&run).map(|_| run.output_dir().join("cv_report.json")),
        Command::Rank => pipeline::cmd_rank(&run),
        Command::Eval => pipeline::cmd_eval(&run),
        Command::Regress => pipeline::cmd_regress(&run),
        Command::Report => pipeline::cmd_report(&run),
        Command::All => pipeline::cmd_all(&run),
    };
    match result {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
