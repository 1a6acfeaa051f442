//! Command-line front end. Exit codes: 0 success, 1 episode did not
//! converge, 2 bad flags or configuration, 3 unreadable input or failed
//! write, 4 numerical fault.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dataset::{write_dataset, DatasetError};
use crate::perception::NoiseParams;
use crate::plot::render_svg;
use crate::scene::PerturbationEvent;
use crate::simulator::{read_log, run_batch, run_episode, write_log, BatchSpec, EndReason, ProposalSource, SimError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FAULT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "clfreach", version, about = "Lyapunov-based multi-instance reaching simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SourceArg {
    Oracle,
    Noisy,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write supervised samples as JSON lines.
    GenDataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Run one closed-loop episode and write its trajectory log.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// JSON list of perturbation events; replaces the configured schedule.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
        #[arg(long)]
        log: PathBuf,
    },
    /// Success table over categories and simultaneous-instance counts.
    Batch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        instances: Vec<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        /// JSON table path; the text table goes next to it with a `.txt` suffix.
        #[arg(long, default_value = "batch.json")]
        out: PathBuf,
    },
    /// Render trajectory logs to SVG.
    Plot {
        #[arg(long, num_args = 1.., required = true)]
        log: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Everything needed to rerun a command exactly.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub config: Config,
    pub outputs: Vec<String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, message: e.to_string() }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
    }
}

type CmdResult = Result<(i32, String), Failure>;

fn load_config(path: &Path) -> Result<Config, Failure> {
    Config::load(path).map_err(|e| Failure::config(format!("--config {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

struct ManifestDraft {
    command: Vec<String>,
    seed: Option<u64>,
    started: u128,
}

impl ManifestDraft {
    fn finish(self, config: &Config, primary: &Path, outputs: &[&Path]) -> Result<(), Failure> {
        let m = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            seed: self.seed,
            config: config.clone(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        write_file(&manifest_path(primary), text.as_bytes())
    }
}

fn gen_dataset(draft: ManifestDraft, config: &Path, out: &Path, n: u64, seed: u64) -> CmdResult {
    let cfg = load_config(config)?;
    if n == 0 {
        return Err(Failure::config("--n must be >= 1"));
    }
    let file = File::create(out).map_err(|e| Failure::io(out, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(&cfg, n, seed, &mut w).map_err(|e| match e {
        DatasetError::Io(e) => Failure::io(out, e),
        other => Failure::config(other),
    })?;
    draft.finish(&cfg, out, &[out])?;
    Ok((EXIT_OK, format!("wrote {n} samples to {}", out.display())))
}

fn run(
    draft: ManifestDraft,
    config: &Path,
    seed: u64,
    schedule: Option<&Path>,
    source: Option<SourceArg>,
    log: &Path,
) -> CmdResult {
    let mut cfg = load_config(config)?;
    if let Some(path) = schedule {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("--schedule {}: {e}", path.display())))?;
        cfg.schedule = serde_json::from_str::<Vec<PerturbationEvent>>(&text)
            .map_err(|e| Failure::config(format!("--schedule {}: {e}", path.display())))?;
    }
    match source {
        Some(SourceArg::Oracle) => cfg.source = ProposalSource::Oracle,
        Some(SourceArg::Noisy) if !matches!(cfg.source, ProposalSource::Noisy(_)) => {
            cfg.source = ProposalSource::Noisy(NoiseParams::default())
        }
        _ => {}
    }
    cfg.validate().map_err(Failure::config)?;
    let setup = cfg.sample_setup(&cfg.scene, seed).map_err(Failure::config)?;
    let (records, outcome) = run_episode(&cfg.episode(), &setup).map_err(|e| match e {
        SimError::Fault { .. } => Failure { code: EXIT_FAULT, message: e.to_string() },
        other => Failure::config(other),
    })?;

    let file = File::create(log).map_err(|e| Failure::io(log, e))?;
    let mut w = BufWriter::new(file);
    write_log(&records, &mut w).and_then(|_| w.flush()).map_err(|e| Failure::io(log, e))?;
    let outcome_path = with_suffix(log, ".outcome.json");
    let text = serde_json::to_string_pretty(&outcome).expect("outcome serializes");
    write_file(&outcome_path, text.as_bytes())?;
    draft.finish(&cfg, log, &[log, &outcome_path])?;

    let code = match outcome.reason {
        EndReason::Converged => EXIT_OK,
        EndReason::Timeout => EXIT_NOT_CONVERGED,
        EndReason::Fault => EXIT_FAULT,
    };
    let summary = format!(
        "{:?} success={} steps={} t_grasp={} pos_err={}",
        outcome.reason,
        outcome.success,
        records.len(),
        outcome.time_to_grasp.map_or("-".into(), |t| format!("{t:.3}")),
        outcome.final_position_error.map_or("-".into(), |e| format!("{e:.4}")),
    );
    Ok((code, summary))
}

fn batch(
    draft: ManifestDraft,
    config: &Path,
    episodes: usize,
    instances: Vec<usize>,
    seed: u64,
    workers: Option<usize>,
    out: &Path,
) -> CmdResult {
    let cfg = load_config(config)?;
    if cfg.batch.categories.is_empty() {
        return Err(Failure::config("config batch.categories is empty"));
    }
    if episodes == 0 {
        return Err(Failure::config("--episodes must be >= 1"));
    }
    if instances.is_empty() || instances.contains(&0) {
        return Err(Failure::config("--instances must list counts >= 1"));
    }
    let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let spec =
        BatchSpec { categories: cfg.batch.categories.clone(), instance_counts: instances, episodes, seed, workers };
    let table = run_batch(&cfg.episode(), &cfg, &spec).map_err(Failure::config)?;
    let json = serde_json::to_string_pretty(&table).expect("table serializes");
    write_file(out, json.as_bytes())?;
    let text_path = with_suffix(out, ".txt");
    let text = table.to_text();
    write_file(&text_path, text.as_bytes())?;
    draft.finish(&cfg, out, &[out, &text_path])?;
    Ok((EXIT_OK, text))
}

fn plot(draft: ManifestDraft, logs: &[PathBuf], out: &Path, config: Option<&Path>) -> CmdResult {
    let cfg = match config {
        Some(p) => load_config(p)?,
        None => Config::default(),
    };
    let mut all = Vec::with_capacity(logs.len());
    for path in logs {
        let file = File::open(path).map_err(|e| Failure::io(path, e))?;
        let log = read_log(BufReader::new(file)).map_err(|e| Failure::io(path, e))?;
        if log.is_empty() {
            return Err(Failure::io(path, "trajectory log is empty"));
        }
        all.push(log);
    }
    let svg = render_svg(&all, &cfg.chain).map_err(|e| Failure { code: EXIT_IO, message: e.to_string() })?;
    write_file(out, svg.as_bytes())?;
    draft.finish(&cfg, out, &[out])?;
    Ok((EXIT_OK, format!("wrote {} trajectories to {}", all.len(), out.display())))
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, stdout: &mut impl Write, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return code;
        }
    };
    let draft = |seed: Option<u64>| ManifestDraft {
        command: args.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        seed,
        started: now_ms(),
    };
    let result = match cli.command {
        Command::GenDataset { config, out, n, seed } => gen_dataset(draft(Some(seed)), &config, &out, n, seed),
        Command::Run { config, seed, schedule, source, log } => {
            run(draft(Some(seed)), &config, seed, schedule.as_deref(), source, &log)
        }
        Command::Batch { config, episodes, instances, seed, workers, out } => {
            batch(draft(Some(seed)), &config, episodes, instances, seed, workers, &out)
        }
        Command::Plot { log, out, config } => plot(draft(None), &log, &out, config.as_deref()),
    };
    match result {
        Ok((code, message)) => {
            let _ = writeln!(stdout, "{}", message.trim_end());
            code
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
