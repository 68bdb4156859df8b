use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use colearn_core::data::{generate_synthetic, load_dataset, save_dataset, Modality, SyntheticTask};
use colearn_core::experiments::{
    evaluate, render_csv, render_text, run_protocol, Arm, ExperimentConfig, ExperimentReport,
};
use colearn_core::models::{load_checkpoint, save_checkpoint, Model, ModelConfig, ModelKind};
use colearn_core::training::train;

#[derive(Parser)]
#[command(
    name = "colearn",
    version,
    about = "Modality dropout and co-learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset file.
    GenData(GenData),
    /// Train one arm and write its checkpoint and history.
    Train(TrainCmd),
    /// Score a checkpoint on a dataset's test split.
    Evaluate(EvaluateCmd),
    /// Run the full protocol and write a JSON report.
    Sweep(SweepCmd),
    /// Render a saved report as a table and CSV.
    Report(ReportCmd),
}

/// Options shared by commands that read an experiment config.
#[derive(Args)]
struct Common {
    /// TOML file with [data], [train] and [protocol] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(h) = self.hidden {
            cfg.train.hidden_size = h;
        }
        if let Some(e) = self.epochs {
            cfg.train.max_epochs = e;
        }
        if let Some(lr) = self.lr {
            cfg.train.learning_rate = lr;
        }
        if let Some(b) = self.batch_size {
            cfg.train.batch_size = b;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Classification,
    Regression,
}

#[derive(Args)]
struct GenData {
    #[command(flatten)]
    common: Common,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snr_language: Option<f64>,
    #[arg(long)]
    snr_audio: Option<f64>,
    #[arg(long)]
    snr_visual: Option<f64>,
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "bi-eflstm")]
    model: String,
    /// Dropout level for audio and visual; omit to train the unimodal arm.
    #[arg(long, conflicts_with = "unimodal")]
    level: Option<f64>,
    #[arg(long)]
    unimodal: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    checkpoint: PathBuf,
    /// epoch,train_loss,val_loss,lr records.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateCmd {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Modality left visible, or `all`.
    #[arg(long, default_value = "language")]
    modality: String,
}

#[derive(Args)]
struct SweepCmd {
    #[command(flatten)]
    common: Common,
    /// Dataset file; generated from the config's [data] table when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated dropout levels.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    levels: Option<Vec<f64>>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportCmd {
    input: PathBuf,
    /// Write the CSV here instead of printing it.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the table here as well as printing it.
    #[arg(long)]
    text: Option<PathBuf>,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn gen_data(cmd: GenData) -> Result<()> {
    let mut cfg = cmd.common.load()?.data;
    cfg.n_samples = cmd.n_samples.unwrap_or(cfg.n_samples);
    cfg.seed = cmd.seed.unwrap_or(cfg.seed);
    cfg.snr_language = cmd.snr_language.unwrap_or(cfg.snr_language);
    cfg.snr_audio = cmd.snr_audio.unwrap_or(cfg.snr_audio);
    cfg.snr_visual = cmd.snr_visual.unwrap_or(cfg.snr_visual);
    match cmd.task {
        Some(TaskArg::Classification) => cfg.task = SyntheticTask::Classification,
        Some(TaskArg::Regression) => cfg.task = SyntheticTask::Regression,
        None => {}
    }
    let split = generate_synthetic(&cfg)?;
    save_dataset(&split, &cmd.out).with_context(|| format!("writing {}", cmd.out.display()))?;
    println!(
        "wrote {} ({} train, {} validation, {} test)",
        cmd.out.display(),
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    Ok(())
}

fn load_data(path: &Path) -> Result<colearn_core::data::DatasetSplit> {
    load_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn train_cmd(cmd: TrainCmd) -> Result<()> {
    let cfg = cmd.common.load()?;
    let split = load_data(&cmd.data)?;
    let kind: ModelKind = cmd.model.parse()?;
    let arm = match (cmd.unimodal, cmd.level) {
        (true, _) => Arm::Unimodal,
        (false, Some(level)) => Arm::Multimodal { level },
        (false, None) => bail!("pass --unimodal or --level <p>"),
    };
    let model_cfg = ModelConfig::for_dataset(kind, &split.dims, split.task, cfg.train.hidden_size)?;
    let model = Model::new(&model_cfg, cmd.seed)?;
    let (best, history) = train(&model, &split, &arm.train_config(&cfg.train, cmd.seed))?;
    save_checkpoint(&best, &cmd.checkpoint)
        .with_context(|| format!("writing {}", cmd.checkpoint.display()))?;
    if let Some(path) = &cmd.history {
        write(path, history.to_records())?;
    }
    let best_record = history.best().expect("at least one epoch");
    println!(
        "best epoch {} of {}: validation loss {:.6}",
        history.best_epoch,
        history.epochs.len(),
        best_record.val_loss
    );
    Ok(())
}

fn evaluate_cmd(cmd: EvaluateCmd) -> Result<()> {
    let split = load_data(&cmd.data)?;
    let model = load_checkpoint(&cmd.checkpoint)
        .with_context(|| format!("reading checkpoint {}", cmd.checkpoint.display()))?;
    let kept = match cmd.modality.as_str() {
        "all" => None,
        m => Some(m.parse::<Modality>()?),
    };
    let metrics = evaluate(&model, &split, kept)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn sweep_cmd(cmd: SweepCmd) -> Result<()> {
    let mut cfg = cmd.common.load()?;
    if let Some(seeds) = cmd.seeds {
        cfg.protocol.seeds = seeds;
    }
    if let Some(levels) = cmd.levels {
        cfg.protocol.levels = levels;
    }
    if let Some(model) = &cmd.model {
        cfg.protocol.model = model.parse()?;
    }
    cfg.protocol.tau = cmd.tau.or(cfg.protocol.tau);
    cfg.validate()?;
    let split = match &cmd.data {
        Some(path) => load_data(path)?,
        None => generate_synthetic(&cfg.data)?,
    };
    let p = &cfg.protocol;
    let report = run_protocol(&split, p.model, &cfg.train, &p.levels, &p.seeds, p.tau)?;
    write(&cmd.out, report.to_json()?)?;
    print!("{}", render_text(&report));
    Ok(())
}

fn report_cmd(cmd: ReportCmd) -> Result<()> {
    let text = fs::read_to_string(&cmd.input)
        .with_context(|| format!("reading {}", cmd.input.display()))?;
    let report = ExperimentReport::from_json(&text)?;
    let table = render_text(&report);
    print!("{table}");
    if let Some(path) = &cmd.text {
        write(path, &table)?;
    }
    let csv = render_csv(&report);
    match &cmd.csv {
        Some(path) => write(path, csv)?,
        None => print!("\n{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(c) => gen_data(c),
        Command::Train(c) => train_cmd(c),
        Command::Evaluate(c) => evaluate_cmd(c),
        Command::Sweep(c) => sweep_cmd(c),
        Command::Report(c) => report_cmd(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
