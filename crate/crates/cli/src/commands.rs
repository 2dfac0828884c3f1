use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use wnprobe::audio::{mu_law_encode, read_wav, synth_harmonic_corpus, AudioBuffer, CorpusSpec, QuantizedSignal};
use wnprobe::dsp::{band_energy_db, f0_estimate, narrowband_spectrogram, wideband_spectrogram, FeatureKind, FeatureTrack};
use wnprobe::probes::{
    preactivation_f0_correlation, probe_feature, probe_waveform, waveform_references, FeatureUtterance, LayerSet,
    ProbeResult, ProbeTarget, Split, WaveformMode, WaveformOptions, WaveformUtterance,
};
use wnprobe::svd::svd_scan_with;
use wnprobe::wavenet::{
    encode_checkpoint, expected_amplitude, load_checkpoint, receptive_field, train as train_model, ActivationTensor,
    Capture, Model, ModelConfig, TrainSettings,
};
use wnprobe::dsp::FilterMode;

use crate::error::CliError;
use crate::layers::parse_layers;
use crate::output::{refuse_clobber, sha256_file, sha256_hex, write_atomic, StagedDir};
use crate::report::{probe_rows, write_rows_csv};

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn gen_corpus(spec_path: &Path, out: &Path, overwrite: bool) -> Result<(), CliError> {
    let spec: CorpusSpec = read_json(spec_path)?;
    spec.validate()?;
    let utts = synth_harmonic_corpus(&spec)?;
    let dir = StagedDir::new(out, overwrite)?;
    for (i, u) in utts.iter().enumerate() {
        dir.write(&format!("utt_{i:03}.wav"), &wnprobe::audio::encode_wav(&u.audio))?;
        u.f0.write_csv(dir.path(&format!("utt_{i:03}.f0.csv")))?;
        u.band_energy.write_csv(dir.path(&format!("utt_{i:03}.band.csv")))?;
    }
    dir.write("corpus.json", &to_json(&spec))?;
    dir.commit()?;
    eprintln!("wrote {} utterances to {}", utts.len(), out.display());
    Ok(())
}

pub fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

/// Training audio from a WAV directory or a synthetic corpus spec, plus a content hash.
pub fn load_corpus(path: &Path) -> Result<(Vec<QuantizedSignal>, String), CliError> {
    let (audio, hash) = if path.is_dir() {
        let files = wav_files(path)?;
        let mut hashes = String::new();
        let mut audio = Vec::new();
        for f in &files {
            hashes.push_str(&sha256_file(f)?);
            audio.push(read_wav(f).map_err(|e| CliError::from(e).context(f.display()))?);
        }
        (audio, sha256_hex(hashes.as_bytes()))
    } else {
        let spec: CorpusSpec = read_json(path)?;
        let utts = synth_harmonic_corpus(&spec)?;
        (utts.into_iter().map(|u| u.audio).collect(), sha256_file(path)?)
    };
    if audio.is_empty() {
        return Err(CliError::config(format!("corpus {} holds no audio", path.display())));
    }
    let codes = audio.iter().map(mu_law_encode).collect::<Result<Vec<_>, _>>()?;
    Ok((codes, hash))
}

pub struct TrainArgs {
    pub config: PathBuf,
    pub corpus: PathBuf,
    pub steps: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub lr: f64,
    pub segment_len: Option<usize>,
    pub batch_size: usize,
    pub overwrite: bool,
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let config: ModelConfig = read_json(&a.config)?;
    config.validate()?;
    let loss_path = with_suffix(&a.out, ".loss.csv");
    let run_path = with_suffix(&a.out, ".run.json");
    for p in [&a.out, &loss_path, &run_path] {
        refuse_clobber(p, a.overwrite)?;
    }
    let (corpus, corpus_hash) = load_corpus(&a.corpus)?;
    let settings = TrainSettings {
        steps: a.steps,
        learning_rate: a.lr,
        seed: a.seed,
        segment_len: a.segment_len,
        batch_size: a.batch_size,
        ..Default::default()
    };
    let mut model = Model::<f32>::init(&config, a.seed)?;
    let report = train_model(&mut model, &corpus, &settings)?;

    let ckpt = encode_checkpoint(&model);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "loss"])?;
    for (i, l) in report.losses.iter().enumerate() {
        w.write_record([i.to_string(), format!("{l}")])?;
    }
    let loss_csv = w.into_inner().map_err(|e| CliError::config(e.to_string()))?;
    let run = json!({
        "command": "train",
        "seed": a.seed,
        "settings": settings,
        "config": config,
        "config_sha256": sha256_file(&a.config)?,
        "corpus": a.corpus,
        "corpus_sha256": corpus_hash,
        "n_utterances": corpus.len(),
        "receptive_field": receptive_field(&config),
        "n_params": model.n_params(),
        "initial_loss": report.losses.first(),
        "final_loss": report.losses.last(),
        "checkpoint_sha256": sha256_hex(&ckpt),
    });
    write_atomic(&a.out, &ckpt)?;
    write_atomic(&loss_path, &loss_csv)?;
    write_atomic(&run_path, &to_json(&run))?;
    if let (Some(first), Some(last)) = (report.losses.first(), report.losses.last()) {
        eprintln!("trained {} steps: loss {first:.4} -> {last:.4}", a.steps);
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model<f32>, CliError> {
    load_checkpoint(path).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn capture(model: &Model<f32>, audio: &AudioBuffer, decimate: usize, preacts: bool) -> Result<(ActivationTensor, Vec<f64>), CliError> {
    let codes = mu_law_encode(audio)?.codes;
    let cap = if preacts { Capture::All { decimate } } else { Capture::Outputs { decimate } };
    let (logits, acts) = model.forward(&codes, cap)?;
    Ok((acts.expect("capture requested"), expected_amplitude(&logits).to_vec()))
}

pub fn dump_activations(
    ckpt: &Path,
    wav: &Path,
    out: &Path,
    layers: &str,
    decimate: usize,
    preacts: bool,
    overwrite: bool,
) -> Result<(), CliError> {
    if decimate == 0 || decimate > u16::MAX as usize {
        return Err(CliError::config("--decimate must be between 1 and 65535"));
    }
    refuse_clobber(out, overwrite)?;
    let model = load_model(ckpt)?;
    let keep = if layers == "all" {
        model.n_layers()
    } else {
        layers
            .parse::<usize>()
            .map_err(|_| CliError::config(format!("--layers takes `all` or a top layer index, got '{layers}'")))?
    };
    if keep > model.n_layers() {
        return Err(CliError::config(format!("layer {keep} out of range (model has 0..={})", model.n_layers())));
    }
    let audio = read_wav(wav).map_err(|e| CliError::from(e).context(wav.display()))?;
    let (mut acts, _) = capture(&model, &audio, decimate, preacts)?;
    acts.truncate_layers(keep);
    write_atomic(out, &acts.encode())?;
    eprintln!(
        "wrote {} layers x {} steps x {} channels to {}",
        acts.n_layers(),
        acts.n_steps(),
        acts.width(),
        out.display()
    );
    Ok(())
}

pub fn load_dump(path: &Path) -> Result<ActivationTensor, CliError> {
    ActivationTensor::read(path).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn load_track(path: &Path) -> Result<FeatureTrack, CliError> {
    let is_csv = path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv"));
    let t = if is_csv { FeatureTrack::read_csv(path) } else { FeatureTrack::read_wnft(path) };
    t.map_err(|e| CliError::from(e).context(path.display()))
}

pub fn derive_track(audio: &AudioBuffer, kind: FeatureKind) -> Result<FeatureTrack, CliError> {
    Ok(match kind {
        FeatureKind::LogF0 => f0_estimate(audio)?,
        FeatureKind::BandEnergyDb => band_energy_db(audio)?,
        FeatureKind::WidebandMag => wideband_spectrogram(audio)?,
        FeatureKind::NarrowbandMag => narrowband_spectrogram(audio)?,
    })
}

pub struct ProbeArgs {
    pub dumps: Vec<PathBuf>,
    pub wavs: Vec<PathBuf>,
    pub tracks: Vec<PathBuf>,
    pub target: ProbeTarget,
    pub layers: String,
    pub stacked: bool,
    pub split_seed: u64,
    pub ckpt: Option<PathBuf>,
    pub warmup: Option<usize>,
    pub stride: usize,
    pub lpc_order: usize,
    pub sample_rate: u32,
    pub out: PathBuf,
    pub overwrite: bool,
}

fn check_counts(what: &str, got: usize, want: usize) -> Result<(), CliError> {
    if got != 0 && got != want {
        return Err(CliError::config(format!("{got} {what} given for {want} dumps")));
    }
    Ok(())
}

pub fn probe(a: &ProbeArgs) -> Result<(), CliError> {
    refuse_clobber(&a.out, a.overwrite)?;
    check_counts("--wav files", a.wavs.len(), a.dumps.len())?;
    check_counts("--track files", a.tracks.len(), a.dumps.len())?;
    let dumps = a.dumps.iter().map(|p| load_dump(p)).collect::<Result<Vec<_>, _>>()?;
    let (width, n_layers) = (dumps[0].width(), dumps[0].n_layers());
    if let Some((p, d)) = a.dumps.iter().zip(&dumps).find(|(_, d)| d.width() != width || d.n_layers() != n_layers) {
        return Err(CliError::format(format!(
            "{}: {} layers x {} channels, expected {n_layers} x {width}",
            p.display(),
            d.n_layers(),
            d.width()
        )));
    }
    let model = a.ckpt.as_deref().map(load_model).transpose()?;
    if let Some(m) = &model {
        if m.width() != width || n_layers > m.n_layers() + 1 {
            return Err(CliError::format(format!(
                "dumps hold {n_layers} layers x {width} channels but the checkpoint has {} x {}",
                m.n_layers() + 1,
                m.width()
            )));
        }
    }
    let audio = a
        .wavs
        .iter()
        .map(|p| read_wav(p).map_err(|e| CliError::from(e).context(p.display())))
        .collect::<Result<Vec<_>, _>>()?;
    for ((d, x), p) in dumps.iter().zip(&audio).zip(&a.dumps) {
        if d.n_steps() != x.len().div_ceil(d.decimation) {
            return Err(CliError::format(format!(
                "{}: {} steps at decimation {} do not match {} audio samples",
                p.display(),
                d.n_steps(),
                d.decimation,
                x.len()
            )));
        }
    }
    let sample_rate = audio.first().map_or(a.sample_rate, |x| x.sample_rate());
    let split = Split::utterances(dumps.len(), a.split_seed)?;
    let selected = parse_layers(&a.layers, n_layers)?;
    let sets: Vec<LayerSet> =
        selected.iter().map(|&l| if a.stacked { LayerSet::Stacked(l) } else { LayerSet::Single(l) }).collect();

    let mut results: Vec<ProbeResult> = Vec::new();
    let mut references = serde_json::Value::Null;
    let warmup = a.warmup.unwrap_or_else(|| model.as_ref().map_or(0, |m| receptive_field(&m.config)));
    match a.target.feature_kind() {
        None => {
            if audio.is_empty() {
                return Err(CliError::config("waveform probes need --wav for every dump"));
            }
            let mode = if a.target == ProbeTarget::WaveformCurrent { WaveformMode::Current } else { WaveformMode::Next };
            let opts = WaveformOptions { mode, warmup, stride: a.stride };
            let utts: Vec<WaveformUtterance> =
                dumps.iter().zip(&audio).map(|(acts, audio)| WaveformUtterance { acts, audio }).collect();
            for s in &sets {
                results.push(probe_waveform(&utts, &split, *s, &opts)?);
            }
            let preds = match &model {
                Some(m) => Some(
                    audio.iter().map(|x| capture(m, x, 1, false).map(|c| c.1)).collect::<Result<Vec<_>, _>>()?,
                ),
                None => None,
            };
            references = serde_json::to_value(waveform_references(&utts, &split, &opts, a.lpc_order, preds.as_deref())?)?;
        }
        Some(kind) => {
            let tracks: Vec<FeatureTrack> = if !a.tracks.is_empty() {
                a.tracks
                    .iter()
                    .map(|p| {
                        let mut t = load_track(p)?;
                        // CSV headers do not distinguish the two spectrogram kinds
                        if t.kind.is_spectrum() && kind.is_spectrum() {
                            t.kind = kind;
                        }
                        if t.kind != kind {
                            return Err(CliError::format(format!("{}: track is not a {} track", p.display(), a.target)));
                        }
                        Ok(t)
                    })
                    .collect::<Result<_, _>>()?
            } else if !audio.is_empty() {
                audio.iter().map(|x| derive_track(x, kind)).collect::<Result<_, _>>()?
            } else {
                return Err(CliError::config("feature probes need --track or --wav for every dump"));
            };
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

    let dir = StagedDir::new(&a.out, a.overwrite)?;
    for r in &results {
        dir.write(&format!("probe_{}_layer{}.json", r.target, r.layer_label()), &to_json(r))?;
    }
    let mut csv_bytes = Vec::new();
    write_rows_csv(&probe_rows(&results), &mut csv_bytes)?;
    dir.write("probes.csv", &csv_bytes)?;
    let dump_hashes = a
        .dumps
        .iter()
        .map(|p| Ok(json!({ "path": p, "sha256": sha256_file(p)? })))
        .collect::<Result<Vec<_>, CliError>>()?;
    let run = json!({
        "command": "probe",
        "target": a.target,
        "layers": selected,
        "stacked": a.stacked,
        "split": split,
        "split_seed": a.split_seed,
        "warmup": warmup,
        "stride": a.stride,
        "dumps": dump_hashes,
        "checkpoint": match &a.ckpt { Some(p) => json!({ "path": p, "sha256": sha256_file(p)? }), None => serde_json::Value::Null },
        "references": references,
    });
    dir.write("run.json", &to_json(&run))?;
    dir.commit()?;
    eprintln!("wrote {} probe results to {}", results.len(), a.out.display());
    Ok(())
}

pub fn svd_scan(dump: &Path, sample_rate: u32, zero_phase: bool, out: &Path, overwrite: bool) -> Result<(), CliError> {
    refuse_clobber(out, overwrite)?;
    let acts = load_dump(dump)?;
    let mode = if zero_phase { FilterMode::ZeroPhase } else { FilterMode::Causal };
    let scan = svd_scan_with(&acts, sample_rate, mode)?;
    let dir = StagedDir::new(out, overwrite)?;
    let mut csv_bytes = Vec::new();
    scan.write_csv(&mut csv_bytes)?;
    dir.write("svd.csv", &csv_bytes)?;
    let summary = json!({
        "dump": dump,
        "dump_sha256": sha256_file(dump)?,
        "n_steps": scan.n_steps,
        "step_rate_hz": scan.step_rate_hz,
        "crossover_hz": scan.crossover_hz,
        "mode": scan.mode,
        "tail_db": wnprobe::svd::TAIL_DB,
        "layers": scan.summary(),
    });
    dir.write("svd_summary.json", &to_json(&summary))?;
    dir.commit()?;
    Ok(())
}

pub fn preact_f0(dumps: &[PathBuf], f0: &[PathBuf], sample_rate: u32, out: &Path, overwrite: bool) -> Result<(), CliError> {
    refuse_clobber(out, overwrite)?;
    if dumps.len() != f0.len() {
        return Err(CliError::config(format!("{} --f0 tracks given for {} dumps", f0.len(), dumps.len())));
    }
    let acts = dumps.iter().map(|p| load_dump(p)).collect::<Result<Vec<_>, _>>()?;
    let tracks = f0.iter().map(|p| load_track(p)).collect::<Result<Vec<_>, _>>()?;
    let utts: Vec<FeatureUtterance> =
        acts.iter().zip(&tracks).map(|(acts, track)| FeatureUtterance { acts, track, sample_rate }).collect();
    let res = preactivation_f0_correlation(&utts)?;
    let dir = StagedDir::new(out, overwrite)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["layer", "max_abs_rho", "unit", "rho", "n_constant", "n_frames"])?;
    let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x}"));
    for r in &res {
        w.write_record([
            r.layer.to_string(),
            opt(r.max_abs_rho),
            r.unit.map_or("undefined".to_string(), |u| u.to_string()),
            opt(r.rho),
            r.n_constant.to_string(),
            r.n_frames.to_string(),
        ])?;
    }
    dir.write("preact_f0.csv", &w.into_inner().map_err(|e| CliError::config(e.to_string()))?)?;
    let hashes = dumps.iter().map(|p| sha256_file(p)).collect::<Result<Vec<_>, _>>()?;
    dir.write("preact_f0.json", &to_json(&json!({ "dump_sha256": hashes, "layers": res })))?;
    dir.commit()?;
    Ok(())
}
