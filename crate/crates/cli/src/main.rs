//! `wnprobe`: train miniature WaveNets, dump their activations and probe them.

mod commands;
mod error;
mod experiment;
mod layers;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Parser)]
#[command(name = "wnprobe", version, about = "Train miniature WaveNets and probe what their activations encode")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise a seeded harmonic corpus (WAV files plus ground-truth tracks).
    GenCorpus {
        /// CorpusSpec JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Train a model and write a checkpoint, `<out>.loss.csv` and `<out>.run.json`.
    Train {
        /// ModelConfig JSON.
        #[arg(long)]
        config: PathBuf,
        /// Directory of WAV files, or a CorpusSpec JSON to synthesise on the fly.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Predicted samples per training crop; 0 trains on whole utterances.
        #[arg(long, default_value_t = 0)]
        segment_len: usize,
        #[arg(long, default_value_t = 1)]
        batch_size: usize,
        /// Accepted for scripts; training is always single-threaded and bit-reproducible.
        #[arg(long)]
        deterministic: bool,
        #[arg(long)]
        overwrite: bool,
    },
    /// Run a checkpoint over a WAV file and store every layer's activations.
    DumpActivations {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep layers `0..=K` (or `all`).
        #[arg(long, default_value = "all")]
        layers: String,
        /// Store every D-th time step.
        #[arg(long, default_value_t = 1)]
        decimate: usize,
        /// Skip the filter/gate pre-activations.
        #[arg(long)]
        no_preacts: bool,
        #[arg(long)]
        overwrite: bool,
    },
    /// Fit linear probes from activations to a target, one result per layer.
    Probe {
        /// Activation dumps, one per utterance.
        #[arg(long = "dump", required = true)]
        dumps: Vec<PathBuf>,
        /// Audio for each dump (same order).
        #[arg(long = "wav")]
        wavs: Vec<PathBuf>,
        /// Precomputed feature tracks (CSV or WNFT) for each dump, instead of deriving them from audio.
        #[arg(long = "track")]
        tracks: Vec<PathBuf>,
        /// waveform, waveform-current, f0, band-energy, spectrogram-wide, spectrogram-narrow
        #[arg(long)]
        target: String,
        /// `all`, `K`, `A-B` or a comma list.
        #[arg(long, default_value = "all")]
        layers: String,
        /// Probe the concatenation of layers `0..=L` for every selected L.
        #[arg(long)]
        stacked: bool,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        /// Checkpoint that produced the dumps: validates their shape and adds model references.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Leading samples skipped by waveform probes (defaults to the receptive field).
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = wnprobe::dsp::DEFAULT_LPC_ORDER)]
        lpc_order: usize,
        #[arg(long, default_value_t = 16000)]
        sample_rate: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Singular value profiles of the baseband/wideband parts of each layer.
    SvdScan {
        #[arg(long)]
        dump: PathBuf,
        #[arg(long, default_value_t = 16000)]
        sample_rate: u32,
        /// Use a zero-phase crossover instead of the causal one.
        #[arg(long)]
        zero_phase: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Best single pre-activation unit vs. log F0, per layer.
    PreactF0 {
        #[arg(long = "dump", required = true)]
        dumps: Vec<PathBuf>,
        /// Log-F0 track (CSV or WNFT) for each dump.
        #[arg(long = "f0", required = true)]
        f0: Vec<PathBuf>,
        #[arg(long, default_value_t = 16000)]
        sample_rate: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Aggregate probe results from one or more output directories.
    Report {
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        overwrite: bool,
    },
    /// Run corpus, training, dumping, probes and SVD scans from an experiment JSON.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenCorpus { spec, out, overwrite } => commands::gen_corpus(&spec, &out, overwrite),
        Command::Train { config, corpus, steps, seed, out, lr, segment_len, batch_size, deterministic: _, overwrite } => {
            commands::train(&commands::TrainArgs {
                config,
                corpus,
                steps,
                seed,
                out,
                lr,
                segment_len: (segment_len > 0).then_some(segment_len),
                batch_size,
                overwrite,
            })
        }
        Command::DumpActivations { ckpt, wav, out, layers, decimate, no_preacts, overwrite } => {
            commands::dump_activations(&ckpt, &wav, &out, &layers, decimate, !no_preacts, overwrite)
        }
        Command::Probe {
            dumps,
            wavs,
            tracks,
            target,
            layers,
            stacked,
            split_seed,
            ckpt,
            warmup,
            stride,
            lpc_order,
            sample_rate,
            out,
            overwrite,
        } => commands::probe(&commands::ProbeArgs {
            dumps,
            wavs,
            tracks,
            target: target.parse()?,
            layers,
            stacked,
            split_seed,
            ckpt,
            warmup,
            stride,
            lpc_order,
            sample_rate,
            out,
            overwrite,
        }),
        Command::SvdScan { dump, sample_rate, zero_phase, out, overwrite } => {
            commands::svd_scan(&dump, sample_rate, zero_phase, &out, overwrite)
        }
        Command::PreactF0 { dumps, f0, sample_rate, out, overwrite } => {
            commands::preact_f0(&dumps, &f0, sample_rate, &out, overwrite)
        }
        Command::Report { inputs, format, out, overwrite } => report::report(&inputs, format, out.as_deref(), overwrite),
        Command::Experiment { spec, overwrite } => experiment::run(&spec, overwrite),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wnprobe: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
