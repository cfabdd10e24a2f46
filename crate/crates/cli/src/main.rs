use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use blindeq::experiment::{run_experiment, summarize, write_results_csv, write_summary_csv, EqualizerKind, ExperimentSpec};
use blindeq::signal::{generate_dataset, preset_taps, PRESET_NAMES};
use blindeq::textio::{format_model, format_samples, parse_samples};
use blindeq::vae::{train, TrainConfig};
use blindeq::{ChannelSpec, Error, PaddingMode};
use clap::{Args, Parser, Subcommand};

mod config;
mod grid;

use config::{ArmConfig, ChannelConfig, EqualizeConfig, ExperimentConfig, GenerateConfig, RunConfig, RunManifest, VaeConfig};

/// Blind QPSK equalization experiments.
#[derive(Debug, Parser)]
#[command(name = "blindeq", version)]
struct Cli {
    /// Worker threads for independent trials; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// SER against SNR for each equalizer.
    SerVsSnr(SerVsSnrArgs),
    /// SER against the number of training symbols at a fixed SNR.
    SerVsTrain(SerVsTrainArgs),
    /// VAE SER and channel-estimate error for several estimate lengths.
    HhatRobustness(HhatArgs),
    /// VAE parameter updates until convergence for several sub-sequence lengths.
    Convergence(ConvergenceArgs),
    /// Train the VAE on one sample file and write its outputs.
    Equalize(EqualizeArgs),
    /// Write one seeded dataset as sample files.
    Generate(GenerateArgs),
    /// Re-execute the run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Preset name (h1, h2, h3) or a file of `re<TAB>im` taps.
    #[arg(long, default_value = "h1")]
    channel: String,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 10_000)]
    test_len: usize,
    /// Base seed; every trial derives its own seed from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, env = "BLINDEQ_OUT_DIR", default_value = "blindeq-out")]
    out: PathBuf,
    /// Fill the wall_time_s column. Outputs then differ between runs.
    #[arg(long)]
    timings: bool,
    /// VAE update budget.
    #[arg(long, default_value_t = 100_000)]
    max_updates: usize,
}

#[derive(Debug, Args)]
struct SerVsSnrArgs {
    #[command(flatten)]
    common: Common,
    /// `start:stop:step` (inclusive) or a comma list.
    #[arg(long, default_value = "0:10:1")]
    snr: String,
    #[arg(long, default_value_t = 2000)]
    train: usize,
    #[arg(long, value_delimiter = ',', default_value = "vae,cma,mmse")]
    equalizers: Vec<String>,
    /// Channel estimate length; defaults to the channel length rounded up to odd.
    #[arg(long)]
    hhat_len: Option<usize>,
    /// Sub-sequence length; defaults to min(128, train).
    #[arg(long)]
    subseq: Option<usize>,
}

#[derive(Debug, Args)]
struct SerVsTrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "10")]
    snr: String,
    #[arg(long, value_delimiter = ',', default_value = "50,200,1000,5000")]
    sizes: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "vae,cma,mmse")]
    equalizers: Vec<String>,
    #[arg(long)]
    hhat_len: Option<usize>,
    /// Fixed sub-sequence length; defaults to min(128, L) per size.
    #[arg(long)]
    subseq: Option<usize>,
}

#[derive(Debug, Args)]
struct HhatArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "0:10:1")]
    snr: String,
    #[arg(long, default_value_t = 2000)]
    train: usize,
    /// Estimate lengths; defaults to M and 2M - 1 with M the odd-rounded channel length.
    #[arg(long, value_delimiter = ',')]
    lengths: Vec<String>,
    #[arg(long)]
    subseq: Option<usize>,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "0:10:2")]
    snr: String,
    #[arg(long, default_value_t = 2000)]
    train: usize,
    #[arg(long, value_delimiter = ',', default_value = "10,128")]
    subseq: Vec<String>,
    #[arg(long)]
    hhat_len: Option<usize>,
}

#[derive(Debug, Args)]
struct EqualizeArgs {
    /// File of `re<TAB>im` samples.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, env = "BLINDEQ_OUT_DIR", default_value = "blindeq-out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    hhat_len: usize,
    #[arg(long, default_value_t = 128)]
    subseq: usize,
    #[arg(long, default_value_t = 100_000)]
    max_updates: usize,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value = "h1")]
    channel: String,
    #[arg(long, default_value_t = 10.0)]
    snr: f64,
    #[arg(long, default_value_t = 2000)]
    train: usize,
    #[arg(long, default_value_t = 10_000)]
    test_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "BLINDEQ_OUT_DIR", default_value = "blindeq-out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RerunArgs {
    /// Manifest written by an earlier run.
    manifest: PathBuf,
    /// Output directory; defaults to the manifest's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Usage problems exit with 2, data and runtime failures with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn load_channel(arg: &str) -> Result<ChannelConfig, CliError> {
    if let Some(taps) = preset_taps(arg) {
        let spec = ChannelSpec::new(taps, 0.0, PaddingMode::Causal)?;
        return Ok(ChannelConfig::from_spec(arg, &spec));
    }
    let path = Path::new(arg);
    if !path.is_file() {
        return Err(usage(format!(
            "unknown channel {arg:?}: not a preset ({}) or a tap file",
            PRESET_NAMES.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let taps = parse_samples(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
    let name: String = name.chars().filter(|c| !matches!(c, ',' | '"' | '\n' | '\r')).collect();
    Ok(ChannelConfig::from_spec(&name, &ChannelSpec::new(taps, 0.0, PaddingMode::Causal)?))
}

/// Centered estimates need odd length: the channel length, rounded up to odd.
fn default_hhat_len(channel: &ChannelConfig) -> usize {
    channel.taps.len() | 1
}

fn parse_count(field: &str, what: &str) -> Result<usize, CliError> {
    field
        .trim()
        .parse()
        .map_err(|_| usage(format!("{what} {field:?} is not a non-negative integer")))
}

fn parse_list(items: &[String], what: &str) -> Result<Vec<usize>, CliError> {
    let values = items
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_count(s, what))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(usage(format!("{what} list is empty")));
    }
    Ok(values)
}

fn equalizer_names(items: &[String]) -> Result<Vec<String>, CliError> {
    items
        .iter()
        .map(|s| Ok(s.parse::<EqualizerKind>()?.name().to_string()))
        .collect()
}

struct ArmBuilder<'a> {
    common: &'a Common,
    channel: &'a ChannelConfig,
    snr_grid: Vec<f64>,
}

impl ArmBuilder<'_> {
    fn arm(&self, tag: String, train_len: usize, equalizers: Vec<String>, hhat_len: usize, subseq: usize) -> Result<ArmConfig, CliError> {
        let mut spec = ExperimentSpec::new(self.channel.name.clone(), self.channel.to_spec()?, self.snr_grid.clone(), train_len);
        spec.trials = self.common.trials;
        spec.test_len = self.common.test_len;
        spec.base_seed = self.common.seed;
        spec.vae.hhat_len = hhat_len;
        spec.vae.subseq_len = subseq;
        spec.vae.max_updates = self.common.max_updates;
        spec.tag = tag;
        let arm = ArmConfig {
            equalizers,
            ..ArmConfig::from_spec(&spec)
        };
        arm.to_spec(self.channel)?;
        Ok(arm)
    }
}

fn experiment(common: &Common, channel: ChannelConfig, arms: Vec<ArmConfig>) -> ExperimentConfig {
    ExperimentConfig {
        channel,
        arms,
        timings: common.timings,
    }
}

fn resolve(command: &Command) -> Result<(RunConfig, PathBuf), CliError> {
    match command {
        Command::SerVsSnr(a) => {
            let channel = load_channel(&a.common.channel)?;
            let b = ArmBuilder { common: &a.common, channel: &channel, snr_grid: grid::parse_snr_grid(&a.snr)? };
            let hhat = a.hhat_len.unwrap_or_else(|| default_hhat_len(&channel));
            let arm = b.arm(String::new(), a.train, equalizer_names(&a.equalizers)?, hhat, a.subseq.unwrap_or(a.train.min(128)))?;
            Ok((RunConfig::SerVsSnr(experiment(&a.common, channel, vec![arm])), a.common.out.clone()))
        }
        Command::SerVsTrain(a) => {
            let channel = load_channel(&a.common.channel)?;
            let b = ArmBuilder { common: &a.common, channel: &channel, snr_grid: grid::parse_snr_grid(&a.snr)? };
            let hhat = a.hhat_len.unwrap_or_else(|| default_hhat_len(&channel));
            let names = equalizer_names(&a.equalizers)?;
            let arms = parse_list(&a.sizes, "training size")?
                .into_iter()
                .map(|l| b.arm(format!("[L={l}]"), l, names.clone(), hhat, a.subseq.unwrap_or(l.min(128))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((RunConfig::SerVsTrain(experiment(&a.common, channel, arms)), a.common.out.clone()))
        }
        Command::HhatRobustness(a) => {
            let channel = load_channel(&a.common.channel)?;
            let b = ArmBuilder { common: &a.common, channel: &channel, snr_grid: grid::parse_snr_grid(&a.snr)? };
            let m = default_hhat_len(&channel);
            let lengths = if a.lengths.is_empty() { vec![m, 2 * m - 1] } else { parse_list(&a.lengths, "estimate length")? };
            let arms = lengths
                .into_iter()
                .map(|h| b.arm(format!("[hhat={h}]"), a.train, vec!["vae".into()], h, a.subseq.unwrap_or(a.train.min(128))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((RunConfig::HhatRobustness(experiment(&a.common, channel, arms)), a.common.out.clone()))
        }
        Command::Convergence(a) => {
            let channel = load_channel(&a.common.channel)?;
            let b = ArmBuilder { common: &a.common, channel: &channel, snr_grid: grid::parse_snr_grid(&a.snr)? };
            let hhat = a.hhat_len.unwrap_or_else(|| default_hhat_len(&channel));
            let arms = parse_list(&a.subseq, "sub-sequence length")?
                .into_iter()
                .map(|n| b.arm(format!("[N={n}]"), a.train, vec!["vae".into()], hhat, n))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((RunConfig::Convergence(experiment(&a.common, channel, arms)), a.common.out.clone()))
        }
        Command::Equalize(a) => {
            let cfg = TrainConfig {
                subseq_len: a.subseq,
                hhat_len: a.hhat_len,
                max_updates: a.max_updates,
                init_seed: a.seed,
                ..TrainConfig::default()
            };
            cfg.validate()?;
            let input = a.input.to_string_lossy().into_owned();
            Ok((RunConfig::Equalize(EqualizeConfig { input, vae: VaeConfig::from_train(&cfg) }), a.out.clone()))
        }
        Command::Generate(a) => {
            if a.train == 0 || a.test_len == 0 {
                return Err(usage("dataset lengths must be positive"));
            }
            if !a.snr.is_finite() {
                return Err(usage("SNR must be finite"));
            }
            let cfg = GenerateConfig {
                channel: load_channel(&a.channel)?,
                snr_db: a.snr,
                train_len: a.train,
                test_len: a.test_len,
                seed: a.seed,
            };
            Ok((RunConfig::Generate(cfg), a.out.clone()))
        }
        Command::Rerun(a) => {
            let text = std::fs::read_to_string(&a.manifest).map_err(|e| io_error(&a.manifest, e))?;
            let manifest: RunManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: malformed manifest: {e}", a.manifest.display())))?;
            let out = match &a.out {
                Some(out) => out.clone(),
                None => a.manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            Ok((manifest.config, out))
        }
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], outputs: &mut Vec<String>) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    outputs.push(name.to_string());
    Ok(())
}

fn run_experiments(cfg: &ExperimentConfig, jobs: usize, out: &Path, outputs: &mut Vec<String>) -> Result<(), CliError> {
    let specs = cfg
        .arms
        .iter()
        .map(|arm| arm.to_spec(&cfg.channel))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for spec in &specs {
        rows.extend(run_experiment(spec, jobs)?);
    }
    let mut results = Vec::new();
    write_results_csv(&mut results, &rows, cfg.timings)?;
    let mut summary = Vec::new();
    write_summary_csv(&mut summary, &summarize(&rows))?;
    write_file(out, "results.csv", &results, outputs)?;
    write_file(out, "results_summary.csv", &summary, outputs)
}

fn execute(config: &RunConfig, jobs: usize, out: &Path) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let mut outputs = Vec::new();
    match config {
        RunConfig::SerVsSnr(c) | RunConfig::SerVsTrain(c) | RunConfig::HhatRobustness(c) | RunConfig::Convergence(c) => {
            run_experiments(c, jobs, out, &mut outputs)?;
        }
        RunConfig::Equalize(c) => {
            let path = Path::new(&c.input);
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let y = parse_samples(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let outcome = train(&y, &c.vae.to_train()?)?;
            let symbols = outcome.model.detect(&y)?;
            let report = &outcome.report;
            write_file(out, "symbols.tsv", format_samples(&symbols).as_bytes(), &mut outputs)?;
            write_file(out, "hhat.tsv", format_samples(&outcome.model.hhat).as_bytes(), &mut outputs)?;
            write_file(out, "model.txt", format_model(&outcome.model).as_bytes(), &mut outputs)?;
            let mut trace = String::from("update,loss\n");
            for (k, l) in report.loss_trace.iter().enumerate() {
                trace.push_str(&format!("{},{l}\n", k + 1));
            }
            write_file(out, "loss_trace.csv", trace.as_bytes(), &mut outputs)?;
            let summary = format!(
                "key,value\nsigma2_hat,{}\nupdates_used,{}\nconverged,{}\nsubseq_len,{}\n",
                report.sigma2_hat, report.updates_used, report.converged, report.subseq_len
            );
            write_file(out, "report.csv", summary.as_bytes(), &mut outputs)?;
        }
        RunConfig::Generate(c) => {
            let data = generate_dataset(&c.channel.to_spec()?, c.train_len, c.test_len, c.snr_db, c.seed)?;
            for (name, seq) in [
                ("train_observed.tsv", &data.train_observed),
                ("train_symbols.tsv", &data.truth_train_symbols),
                ("test_observed.tsv", &data.test_observed),
                ("test_symbols.tsv", &data.test_symbols),
            ] {
                write_file(out, name, format_samples(seq).as_bytes(), &mut outputs)?;
            }
        }
    }
    Ok(outputs)
}

fn base_seed(config: &RunConfig) -> u64 {
    match config {
        RunConfig::SerVsSnr(c) | RunConfig::SerVsTrain(c) | RunConfig::HhatRobustness(c) | RunConfig::Convergence(c) => {
            c.arms.first().map_or(0, |a| a.base_seed)
        }
        RunConfig::Equalize(c) => c.vae.init_seed,
        RunConfig::Generate(c) => c.seed,
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (config, out) = resolve(&cli.command)?;
    let started = unix_now();
    let outputs = execute(&config, cli.jobs, &out)?;
    let manifest = RunManifest {
        tool: "blindeq".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        base_seed: base_seed(&config),
        started_unix_s: started,
        finished_unix_s: unix_now(),
        outputs,
        config,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Data(e.to_string()))?;
    let mut outputs = Vec::new();
    write_file(&out, "manifest", format!("{text}\n").as_bytes(), &mut outputs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 2,
                CliError::Data(_) => 1,
            })
        }
    }
}
