use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser};

use memaop::approx_matmul::PolicyKind;
use memaop::experiment::{
    format_table, run_experiment, sweep, write_summary, Method, RunConfig, RunStatus, SweepSpec,
    Task, MANIFEST_FILE, SUMMARY_FILE,
};
use memaop::Error;

/// Train a dense layer with exact or approximate outer-product gradients.
#[derive(Debug, Parser)]
#[command(name = "memaop", version)]
struct Cli {
    /// energy or mnist
    #[arg(long, required_unless_present = "summarize")]
    task: Option<Task>,

    /// exact, memsgd, topk, randk or weightedk
    #[arg(long, default_value = "exact")]
    policy: Method,

    /// Outer products per step (defaults to the batch size)
    #[arg(long)]
    k: Option<usize>,

    /// Keep skipped outer products in memory (default)
    #[arg(long, overrides_with = "no_memory")]
    memory: bool,

    #[arg(long = "no-memory", action = ArgAction::SetTrue)]
    no_memory: bool,

    /// Sample with replacement (randk and weightedk only)
    #[arg(long)]
    with_replacement: bool,

    #[arg(long)]
    epochs: Option<usize>,

    #[arg(long = "batch-size")]
    batch_size: Option<usize>,

    #[arg(long)]
    lr: Option<f64>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Override the derived outer-product selection seed
    #[arg(long)]
    selection_seed: Option<u64>,

    #[arg(long, default_value = "data")]
    data_dir: PathBuf,

    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,

    /// Run the baseline plus the K x policy x memory grid
    #[arg(long)]
    sweep: bool,

    /// Comma-separated K values for --sweep (task defaults otherwise)
    #[arg(long, value_delimiter = ',')]
    k_values: Option<Vec<usize>>,

    /// Comma-separated policies for --sweep
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<PolicyKind>>,

    /// Also run the memsgd baseline for each K in --sweep
    #[arg(long)]
    memsgd: bool,

    /// Summarize an existing manifest and exit
    #[arg(long, value_name = "MANIFEST")]
    summarize: Option<PathBuf>,

    /// Write 0 for wall_seconds so reruns are byte-identical
    #[arg(long)]
    no_timing: bool,

    /// Standardize the energy heating-load target
    #[arg(long)]
    standardize_targets: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Data { .. } | Error::Io(_) | Error::Csv(_) => 2,
        Error::Diverged { .. } | Error::NonFinite(_) => 3,
        _ => 1,
    }
}

fn memory_choice(cli: &Cli) -> Option<bool> {
    if cli.no_memory {
        Some(false)
    } else if cli.memory {
        Some(true)
    } else {
        None
    }
}

fn base_config(cli: &Cli, task: Task) -> RunConfig {
    let mut c = RunConfig::defaults(task);
    if let Some(e) = cli.epochs {
        c.epochs = e;
    }
    if let Some(b) = cli.batch_size {
        c.batch_size = b;
    }
    if let Some(lr) = cli.lr {
        c.learning_rate = lr;
    }
    c.method = cli.policy;
    c.k = cli.k.unwrap_or(c.batch_size);
    c.use_memory = memory_choice(cli).unwrap_or(true);
    c.with_replacement = cli.with_replacement;
    c.seed = cli.seed;
    c.selection_seed = cli.selection_seed;
    c.data_dir = cli.data_dir.clone();
    c.out_dir = cli.out_dir.clone();
    c.record_timing = !cli.no_timing;
    c.standardize_targets = cli.standardize_targets;
    c
}

fn summarize(manifest: &Path) -> Result<(), Error> {
    let rows = write_summary(manifest)?;
    print!("{}", format_table(&rows));
    let dir = manifest.parent().unwrap_or(std::path::Path::new("."));
    eprintln!("wrote {}", dir.join(SUMMARY_FILE).display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(manifest) = &cli.summarize {
        return summarize(manifest);
    }
    let task = cli.task.expect("clap enforces --task");
    let config = base_config(cli, task);

    if cli.sweep {
        let mut spec = SweepSpec::reference(config);
        if let Some(ks) = &cli.k_values {
            spec.k_values = ks.clone();
        }
        if let Some(ps) = &cli.policies {
            spec.policies = ps.clone();
        }
        if let Some(m) = memory_choice(cli) {
            spec.memory_flags = vec![m];
        }
        spec.include_memsgd = cli.memsgd;
        let entries = sweep(&spec)?;
        let manifest = spec.base.out_dir.join(MANIFEST_FILE);
        eprintln!("wrote {} runs to {}", entries.len(), manifest.display());
        summarize(&manifest)?;
        let failed = entries.iter().filter(|e| e.status == RunStatus::Failed).count();
        let diverged = entries.iter().filter(|e| e.status == RunStatus::Diverged).count();
        if failed > 0 {
            return Err(Error::InvalidArgument(format!("{failed} run(s) failed, see the manifest")));
        }
        if diverged > 0 {
            eprintln!("{diverged} run(s) diverged, see the manifest");
        }
        return Ok(());
    }

    let records = run_experiment(&config)?;
    let last = records.last().expect("at least one epoch");
    match last.val_accuracy {
        Some(acc) => println!(
            "{}: epoch {} train_loss {:.6} val_loss {:.6} val_accuracy {:.4} outer_products {}",
            config.run_label(),
            last.epoch,
            last.train_loss,
            last.val_loss,
            acc,
            last.outer_products
        ),
        None => println!(
            "{}: epoch {} train_loss {:.6} val_loss {:.6} outer_products {}",
            config.run_label(),
            last.epoch,
            last.train_loss,
            last.val_loss,
            last.outer_products
        ),
    }
    eprintln!("wrote {}", config.csv_path().display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
