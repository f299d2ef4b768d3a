use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use grapool_cli::{
    ablation_matrix, aggregate_records, load_records, plan_runs, run_experiments, write_csv,
    write_markdown, AblationKind, CliError, DatasetSpec, ExperimentConfig, DATA_DIR_ENV,
    DEFAULT_ABLATION_DATASETS,
};

#[derive(Parser)]
#[command(name = "grapool", version, about = "Graph pooling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Worker threads; runs are independent.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Re-run records that are already complete.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(r) = self.repeats {
            cfg.repeats = r;
        }
        if let Some(s) = self.base_seed {
            cfg.base_seed = s;
        }
        if let Some(e) = self.max_epochs {
            cfg.train.max_epochs = Some(e);
        }
        if let Some(d) = &self.out_dir {
            cfg.output_dir = d.clone();
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every configuration of an experiment file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Root holding the datasets.
        #[arg(long, env = DATA_DIR_ENV)]
        data_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run one SpaPool ablation over several datasets.
    Ablate {
        #[arg(long, value_enum)]
        kind: AblationKind,
        #[arg(long, env = DATA_DIR_ENV)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',')]
        datasets: Vec<String>,
        /// Print the planned runs without executing them.
        #[arg(long)]
        plan_only: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate the records of an output directory.
    Summarize {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

fn execute(
    configs: &[ExperimentConfig],
    data: Option<&std::path::Path>,
    common: &Common,
) -> Result<(), CliError> {
    let s = run_experiments(configs, data, common.jobs, common.force)?;
    println!(
        "{} planned, {} skipped, {} executed, {} failed",
        s.planned, s.skipped, s.executed, s.failed
    );
    Ok(())
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            data_dir,
            common,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            common.apply(&mut cfg);
            execute(&[cfg], data_dir.as_deref(), &common)
        }
        Command::Ablate {
            kind,
            data,
            datasets,
            plan_only,
            common,
        } => {
            let names: Vec<String> = if datasets.is_empty() {
                DEFAULT_ABLATION_DATASETS
                    .iter()
                    .map(|s| s.to_string())
                    .collect()
            } else {
                datasets
            };
            let specs: Vec<DatasetSpec> = names.into_iter().map(DatasetSpec::named).collect();
            let mut template = ExperimentConfig::new(
                Vec::new(),
                format!("results/ablation-{kind:?}").to_lowercase(),
            );
            common.apply(&mut template);
            let configs = ablation_matrix(kind, &specs, &template);
            if plan_only {
                let (runs, _) = plan_runs(&configs, Some(&data))?;
                for r in runs {
                    println!(
                        "{}\t{}\t{}\tr{}",
                        r.dataset,
                        r.config_id,
                        grapool_cli::signature(&r.model),
                        r.repeat
                    );
                }
                return Ok(());
            }
            execute(&configs, Some(&data), &common)
        }
        Command::Summarize { out_dir, format } => {
            let table = aggregate_records(&load_records(&out_dir)?);
            match format {
                Format::Csv => {
                    let path = out_dir.join("summary.csv");
                    write_csv(&table, &path)?;
                    print!(
                        "{}",
                        std::fs::read_to_string(&path).map_err(CliError::io(&path))?
                    );
                }
                Format::Markdown => {
                    let path = out_dir.join("summary.md");
                    write_markdown(&table, &path)?;
                    print!("{}", grapool_cli::render_markdown(&table));
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
