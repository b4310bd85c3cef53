use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use siambm::ablation::{ablation_csv, AblationGrid};
use siambm::eval::{
    load_sequence, load_sequence_dir, otb_run, read_trace_csv, vot_run, write_trace_csv, Protocol,
    RunTrace, SequenceRecord, Session, Summary, VotProtocol,
};
use siambm::plot::{eao_chart, precision_chart, render_svg, success_chart};
use siambm::synth::{synth_sequence, write_sequence_dir, MotionScript};
use siambm::tracker::{Tracker, TrackerConfig};

#[derive(Parser)]
#[command(name = "siambm", version, about = "Rotation-aware Siamese tracker and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Otb,
    Vot,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Otb => Protocol::Otb,
            ProtocolArg::Vot => Protocol::Vot,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Track one image sequence and write its per-frame trace CSV.
    Track {
        /// Tracker config file; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        frames: PathBuf,
        /// Ground truth; the first box initializes the tracker.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "otb")]
        protocol: ProtocolArg,
    },
    /// Summarize trace CSVs (a file or a directory of them) as JSON.
    Eval {
        #[arg(long, value_enum, default_value = "otb")]
        protocol: ProtocolArg,
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// EAO sequence-length interval as `lo,hi`.
        #[arg(long, default_value = "10,40")]
        eao_interval: String,
    },
    /// Render a synthetic sequence from a motion script.
    Synth {
        #[arg(long)]
        script: PathBuf,
        /// Overrides the script's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the script's frame count.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Run the angle/mask/update on-off grid and write one CSV row per cell.
    Ablate {
        #[arg(long)]
        grid: PathBuf,
        /// Sequence directories, or motion scripts (`*.script`) rendered on the fly.
        #[arg(long)]
        seqs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw success, precision and (for reset runs) EAO curves as SVG.
    Plot {
        /// A trace CSV or a directory of them.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "tracker")]
        name: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} msg={:?}", kind(&e), one_line(&e));
            ExitCode::FAILURE
        }
    }
}

fn kind(e: &anyhow::Error) -> &'static str {
    use siambm::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::InvalidBox(_)) => "invalid-box",
        Some(E::PatchSize(_)) | Some(E::Shape(_)) => "shape",
        Some(E::Config(_)) => "config",
        Some(E::Script(_)) => "script",
        Some(E::Parse { .. }) => "parse",
        Some(E::Format(_)) | Some(E::Empty(_)) => "format",
        Some(E::Io { .. }) => "io",
        Some(E::Decode { .. }) => "decode",
        None if e.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "usage",
    }
}

fn one_line(e: &anyhow::Error) -> String {
    format!("{e:#}").replace('\n', " ")
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Track {
            config,
            frames,
            gt,
            out,
            protocol,
        } => {
            let cfg = match config {
                Some(p) => TrackerConfig::from_file(&p)?,
                None => TrackerConfig::default(),
            };
            let tracker = Tracker::new(cfg)?;
            let seq = load_sequence(&frames, &gt)?;
            let trace = match protocol {
                ProtocolArg::Otb => otb_run(&mut Session::new(&tracker), &seq)?,
                ProtocolArg::Vot => vot_run(&mut Session::new(&tracker), &seq, &VotProtocol::default())?,
            };
            create_parent(&out)?;
            write_trace_csv(&out, &trace)?;
        }
        Command::Eval {
            protocol,
            runs,
            out,
            eao_interval,
        } => {
            let interval = parse_interval(&eao_interval)?;
            let traces: Vec<RunTrace> = csv_files(&runs)?
                .iter()
                .map(read_trace_csv)
                .collect::<siambm::Result<_>>()?;
            if traces.is_empty() {
                bail!("no trace CSV files in {}", runs.display());
            }
            let summary = Summary::from_traces(protocol.into(), &traces, interval);
            create_parent(&out)?;
            fs::write(&out, summary.to_json() + "\n").with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Synth {
            script,
            seed,
            out,
            frames,
        } => {
            let mut file = MotionScript::from_file(&script)?;
            if let Some(seed) = seed {
                file.script.seed = seed;
            }
            let n = frames.unwrap_or(file.frames);
            let seq = synth_sequence(&file.script, n, file.canvas)?;
            write_sequence_dir(&seq, &out)?;
        }
        Command::Ablate { grid, seqs, out } => {
            let grid = AblationGrid::from_file(&grid)?;
            let seqs = load_sequences(&seqs)?;
            let rows = grid.run(&seqs)?;
            create_parent(&out)?;
            fs::write(&out, ablation_csv(&rows)).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Plot { input, out, name } => {
            let traces: Vec<RunTrace> = csv_files(&input)?
                .iter()
                .map(read_trace_csv)
                .collect::<siambm::Result<_>>()?;
            if traces.is_empty() {
                bail!("no trace CSV files in {}", input.display());
            }
            let mut charts = vec![success_chart(&name, &traces), precision_chart(&name, &traces)];
            if traces.iter().any(|t| t.protocol == Protocol::Vot) {
                let longest = traces.iter().map(RunTrace::len).max().unwrap_or(1);
                charts.push(eao_chart(&name, &traces, longest));
            }
            create_parent(&out)?;
            fs::write(&out, render_svg(&charts)).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}

fn parse_interval(s: &str) -> Result<[usize; 2]> {
    let (a, b) = s.split_once(',').context("eao interval must be lo,hi")?;
    let lo: usize = a.trim().parse().context("eao interval lower bound")?;
    let hi: usize = b.trim().parse().context("eao interval upper bound")?;
    if lo > hi {
        bail!("eao interval lower bound exceeds upper bound");
    }
    Ok([lo, hi])
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
        }
        _ => Ok(()),
    }
}

fn csv_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Sequence directories and `*.script` files under `dir`, in name order.
/// A directory that is itself a sequence is loaded alone.
fn load_sequences(dir: &Path) -> Result<Vec<SequenceRecord>> {
    if let Ok(seq) = load_sequence_dir(dir) {
        return Ok(vec![seq]);
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    let seqs: Vec<SequenceRecord> = entries
        .par_iter()
        .filter(|p| p.is_dir() || p.extension().is_some_and(|x| x == "script"))
        .map(|p| -> siambm::Result<SequenceRecord> {
            if p.is_dir() {
                load_sequence_dir(p)
            } else {
                let file = MotionScript::from_file(p)?;
                let mut seq = synth_sequence(&file.script, file.frames, file.canvas)?;
                if let Some(stem) = p.file_stem() {
                    seq.name = stem.to_string_lossy().into_owned();
                }
                Ok(seq)
            }
        })
        .collect::<siambm::Result<_>>()?;
    if seqs.is_empty() {
        bail!("no sequences under {}", dir.display());
    }
    Ok(seqs)
}
