use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::json;

use wnprobe::audio::{encode_wav, mu_law_encode, read_wav, synth_harmonic_corpus, AudioBuffer, CorpusSpec};
use wnprobe::dsp::{FeatureKind, FeatureTrack, FilterMode, DEFAULT_LPC_ORDER};
use wnprobe::probes::{
    preactivation_f0_correlation, probe_feature, probe_waveform, waveform_references, FeatureUtterance, LayerSet,
    ProbeResult, ProbeTarget, Split, WaveformMode, WaveformOptions, WaveformUtterance,
};
use wnprobe::svd::svd_scan_with;
use wnprobe::wavenet::{encode_checkpoint, receptive_field, train, ActivationTensor, Model, ModelConfig, TrainSettings};

use crate::commands::{capture, derive_track, read_json, to_json, wav_files};
use crate::error::CliError;
use crate::output::{sha256_hex, StagedDir};
use crate::report::{probe_rows, write_rows_csv};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Source {
    Synthetic(CorpusSpec),
    Path(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSpec {
    model: ModelConfig,
    /// Inline corpus spec, or a directory of WAV files.
    corpus: Source,
    /// Held-out audio for dumps and probes; defaults to the training corpus.
    #[serde(default)]
    eval_corpus: Option<Source>,
    #[serde(default)]
    train: TrainSettings,
    #[serde(default = "one")]
    decimate: usize,
    probes: Vec<String>,
    #[serde(default)]
    stacked: bool,
    #[serde(default)]
    split_seed: u64,
    #[serde(default = "one")]
    stride: usize,
    #[serde(default = "default_lpc")]
    lpc_order: usize,
    #[serde(default)]
    svd: bool,
    #[serde(default)]
    preact_f0: bool,
    out: PathBuf,
}

fn one() -> usize {
    1
}

fn default_lpc() -> usize {
    DEFAULT_LPC_ORDER
}

struct Corpus {
    audio: Vec<AudioBuffer>,
    /// Ground-truth F0 and band tracks when the corpus is synthetic.
    f0: Option<Vec<FeatureTrack>>,
    bands: Option<Vec<FeatureTrack>>,
}

fn load_source(src: &Source, base: &Path) -> Result<Corpus, CliError> {
    match src {
        Source::Synthetic(spec) => {
            let utts = synth_harmonic_corpus(spec)?;
            let f0 = utts.iter().map(|u| u.f0.clone()).collect();
            let bands = utts.iter().map(|u| u.band_energy.clone()).collect();
            Ok(Corpus { audio: utts.into_iter().map(|u| u.audio).collect(), f0: Some(f0), bands: Some(bands) })
        }
        Source::Path(p) => {
            let dir = base.join(p);
            let audio = wav_files(&dir)?
                .iter()
                .map(|f| read_wav(f).map_err(|e| CliError::from(e).context(f.display())))
                .collect::<Result<Vec<_>, _>>()?;
            if audio.is_empty() {
                return Err(CliError::config(format!("{} holds no WAV files", dir.display())));
            }
            Ok(Corpus { audio, f0: None, bands: None })
        }
    }
}

fn tracks_for(kind: FeatureKind, corpus: &Corpus) -> Result<Vec<FeatureTrack>, CliError> {
    let known = match kind {
        FeatureKind::LogF0 => corpus.f0.as_ref(),
        FeatureKind::BandEnergyDb => corpus.bands.as_ref(),
        _ => None,
    };
    match known {
        Some(t) => Ok(t.clone()),
        None => corpus.audio.iter().map(|x| derive_track(x, kind)).collect(),
    }
}

pub fn run(spec_path: &Path, overwrite: bool) -> Result<(), CliError> {
    let spec: ExperimentSpec = read_json(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let out = base.join(&spec.out);
    spec.model.validate()?;
    if spec.decimate == 0 || spec.decimate > u16::MAX as usize {
        return Err(CliError::config("decimate must be between 1 and 65535"));
    }
    let targets = spec
        .probes
        .iter()
        .map(|t| t.parse::<ProbeTarget>().map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = StagedDir::new(&out, overwrite)?;

    let train_corpus = load_source(&spec.corpus, base)?;
    let eval = match &spec.eval_corpus {
        Some(src) => load_source(src, base)?,
        None => load_source(&spec.corpus, base)?,
    };
    for (i, x) in eval.audio.iter().enumerate() {
        dir.write(&format!("eval/utt_{i:03}.wav"), &encode_wav(x))?;
    }

    eprintln!("training {} steps on {} utterances", spec.train.steps, train_corpus.audio.len());
    let codes = train_corpus.audio.iter().map(mu_law_encode).collect::<Result<Vec<_>, _>>()?;
    let mut model = Model::<f32>::init(&spec.model, spec.train.seed)?;
    let report = train(&mut model, &codes, &spec.train)?;
    let ckpt = encode_checkpoint(&model);
    dir.write("model.wnck", &ckpt)?;
    let mut losses = csv::Writer::from_writer(Vec::new());
    losses.write_record(["step", "loss"])?;
    for (i, l) in report.losses.iter().enumerate() {
        losses.write_record([i.to_string(), format!("{l}")])?;
    }
    dir.write("loss.csv", &losses.into_inner().map_err(|e| CliError::config(e.to_string()))?)?;

    let mut dumps: Vec<ActivationTensor> = Vec::new();
    let mut predictions = Vec::new();
    for (i, x) in eval.audio.iter().enumerate() {
        let (acts, pred) = capture(&model, x, spec.decimate, true)?;
        dir.write(&format!("dumps/utt_{i:03}.wnac"), &acts.encode())?;
        dumps.push(acts);
        predictions.push(pred);
    }
    let sample_rate = eval.audio[0].sample_rate();
    let split = Split::utterances(dumps.len(), spec.split_seed)?;
    let sets: Vec<LayerSet> = (0..dumps[0].n_layers())
        .map(|l| if spec.stacked { LayerSet::Stacked(l) } else { LayerSet::Single(l) })
        .collect();

    let mut all: Vec<ProbeResult> = Vec::new();
    let mut references = serde_json::Map::new();
    for target in &targets {
        eprintln!("probing {target}");
        let mut results = Vec::new();
        match target.feature_kind() {
            None => {
                let mode = if *target == ProbeTarget::WaveformCurrent { WaveformMode::Current } else { WaveformMode::Next };
                let opts = WaveformOptions { mode, warmup: receptive_field(&spec.model), stride: spec.stride };
                let utts: Vec<WaveformUtterance> =
                    dumps.iter().zip(&eval.audio).map(|(acts, audio)| WaveformUtterance { acts, audio }).collect();
                for s in &sets {
                    results.push(probe_waveform(&utts, &split, *s, &opts)?);
                }
                let refs = waveform_references(&utts, &split, &opts, spec.lpc_order, Some(&predictions))?;
                references.insert(target.to_string(), serde_json::to_value(refs)?);
            }
            Some(kind) => {
                let tracks = tracks_for(kind, &eval)?;
                let utts: Vec<FeatureUtterance> = dumps
                    .iter()
                    .zip(&tracks)
                    .map(|(acts, track)| FeatureUtterance { acts, track, sample_rate })
                    .collect();
                for s in &sets {
                    results.push(probe_feature(&utts, &split, *s)?);
                }
            }
        }
        for r in &results {
            dir.write(&format!("probes/{target}/probe_{target}_layer{}.json", r.layer_label()), &to_json(r))?;
        }
        all.extend(results);
    }
    let mut csv_bytes = Vec::new();
    write_rows_csv(&probe_rows(&all), &mut csv_bytes)?;
    dir.write("probes.csv", &csv_bytes)?;
    dir.write("references.json", &to_json(&references))?;

    if spec.preact_f0 {
        let tracks = tracks_for(FeatureKind::LogF0, &eval)?;
        let utts: Vec<FeatureUtterance> =
            dumps.iter().zip(&tracks).map(|(acts, track)| FeatureUtterance { acts, track, sample_rate }).collect();
        dir.write("preact_f0.json", &to_json(&preactivation_f0_correlation(&utts)?))?;
    }
    if spec.svd {
        let scan = svd_scan_with(&dumps[0], sample_rate, FilterMode::Causal)?;
        let mut b = Vec::new();
        scan.write_csv(&mut b)?;
        dir.write("svd.csv", &b)?;
        dir.write("svd_summary.json", &to_json(&scan.summary()))?;
    }
    let run = json!({
        "command": "experiment",
        "model": spec.model,
        "train": spec.train,
        "receptive_field": receptive_field(&spec.model),
        "split": split,
        "checkpoint_sha256": sha256_hex(&ckpt),
        "initial_loss": report.losses.first(),
        "final_loss": report.losses.last(),
        "n_eval_utterances": eval.audio.len(),
    });
    dir.write("run.json", &to_json(&run))?;
    dir.commit()?;
    eprintln!("wrote {}", out.display());
    Ok(())
}
