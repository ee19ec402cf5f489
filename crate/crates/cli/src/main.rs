//! `topo`: generate corpora, pre-train encoders, fine-tune, probe, analyze
//! and compare.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "topo", version, about = "Topology-only pre-training for GIN graph encoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus (trees, er or community) as JSON Lines.
    Generate {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut connected subgraphs out of one large graph by exploration sampling.
    Sample {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 24)]
        min: usize,
        #[arg(long, default_value_t = 96)]
        max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pre-train an encoder on the corpus named in an experiment file.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training log CSV; defaults to the checkpoint path with `.log.csv`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Fine-tune a checkpoint (or a fresh encoder with `--ckpt none`).
    Finetune(FinetuneArgs),
    /// Score a linear model on frozen graph embeddings.
    Probe {
        #[arg(long)]
        ckpt: String,
        #[arg(long)]
        data: PathBuf,
        /// `regression` or `binary`.
        #[arg(long, default_value = "regression")]
        task: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Supplies the encoder for `--ckpt none`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// PCA of frozen embeddings and signed R² against graph metrics.
    Analyze {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        components: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also draw each scatter as SVG.
        #[arg(long)]
        svg: bool,
    },
    /// Welch test of result file `b` against baseline `a`.
    Compare {
        #[arg(long)]
        a: Vec<PathBuf>,
        #[arg(long)]
        b: Vec<PathBuf>,
        #[arg(long, default_value_t = commands::DEFAULT_ALPHA)]
        alpha: f64,
        /// CSV destination; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pre-train, then fine-tune and compare on every task of an experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FinetuneArgs {
    /// Checkpoint path, or `none` for a freshly initialized encoder.
    #[arg(long)]
    ckpt: String,
    #[arg(long)]
    data: PathBuf,
    /// `graph-regression`, `graph-binary`, `node[:classes]` or `edge`.
    #[arg(long)]
    task: String,
    /// Swap in the feature input head.
    #[arg(long)]
    with_features: bool,
    /// Dataset name in the result; defaults to the data file stem.
    #[arg(long)]
    dataset: Option<String>,
    /// Experiment file providing encoder and fine-tuning defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train only the heads.
    #[arg(long)]
    freeze: bool,
    #[arg(long)]
    out: PathBuf,
}

fn configure_threads() -> topo_core::Result<()> {
    let Ok(value) = std::env::var("TOPO_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        topo_core::Error::Config(vec![format!("TOPO_THREADS must be a positive integer, got '{value}'")])
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| topo_core::Error::Contract(e.to_string()))
}

fn dispatch(command: Command) -> topo_core::Result<()> {
    configure_threads()?;
    match command {
        Command::Generate {
            dataset,
            count,
            seed,
            out,
        } => commands::generate(&dataset, count, seed, &out),
        Command::Sample {
            graph,
            count,
            min,
            max,
            seed,
            out,
        } => commands::sample(&graph, count, min, max, seed, &out),
        Command::Pretrain { config, out, log } => commands::pretrain(&config, &out, log.as_deref()),
        Command::Finetune(args) => commands::finetune(&args),
        Command::Probe {
            ckpt,
            data,
            task,
            seed,
            config,
            out,
        } => commands::probe(&ckpt, &data, &task, seed, config.as_deref(), &out),
        Command::Analyze {
            ckpt,
            data,
            components,
            out,
            svg,
        } => commands::analyze(&ckpt, &data, components, &out, svg),
        Command::Compare { a, b, alpha, out } => commands::compare(&a, &b, alpha, out.as_deref()),
        Command::Run { config, out } => commands::run(&config, &out),
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let message = text.split("Usage:").next().unwrap_or_default();
            eprintln!("error: usage: {}", one_line(message.trim_start_matches("error:")));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
