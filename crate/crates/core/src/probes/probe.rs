//! Linear probes from layer activations to waveform samples and acoustic features.

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::align::frame_align;
use super::regression::{is_regression_fit, mean_is_divergence, ols_fit, RegressionModel, IS_NEWTON_ITERATIONS, SPECTRAL_FLOOR};
use super::stats::{snr_db, spearman_rho};
use crate::audio::{decode_sample, encode_sample, AudioBuffer};
use crate::dsp::{FeatureKind, FeatureTrack, LpcModel};
use crate::error::{Error, Result};
use crate::wavenet::ActivationTensor;

/// Feature probes refuse to fit on fewer frames than this (per split side).
pub const MIN_PROBE_FRAMES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeTarget {
    WaveformCurrent,
    WaveformNext,
    F0,
    BandEnergy,
    SpectrogramWide,
    SpectrogramNarrow,
}

impl ProbeTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeTarget::WaveformCurrent => "waveform-current",
            ProbeTarget::WaveformNext => "waveform-next",
            ProbeTarget::F0 => "f0",
            ProbeTarget::BandEnergy => "band-energy",
            ProbeTarget::SpectrogramWide => "spectrogram-wide",
            ProbeTarget::SpectrogramNarrow => "spectrogram-narrow",
        }
    }

    pub fn for_feature(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::LogF0 => ProbeTarget::F0,
            FeatureKind::BandEnergyDb => ProbeTarget::BandEnergy,
            FeatureKind::WidebandMag => ProbeTarget::SpectrogramWide,
            FeatureKind::NarrowbandMag => ProbeTarget::SpectrogramNarrow,
        }
    }

    pub fn feature_kind(self) -> Option<FeatureKind> {
        match self {
            ProbeTarget::F0 => Some(FeatureKind::LogF0),
            ProbeTarget::BandEnergy => Some(FeatureKind::BandEnergyDb),
            ProbeTarget::SpectrogramWide => Some(FeatureKind::WidebandMag),
            ProbeTarget::SpectrogramNarrow => Some(FeatureKind::NarrowbandMag),
            _ => None,
        }
    }
}

impl fmt::Display for ProbeTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProbeTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "waveform" | "waveform-next" => ProbeTarget::WaveformNext,
            "waveform-current" => ProbeTarget::WaveformCurrent,
            "f0" => ProbeTarget::F0,
            "band-energy" => ProbeTarget::BandEnergy,
            "spectrogram-wide" => ProbeTarget::SpectrogramWide,
            "spectrogram-narrow" => ProbeTarget::SpectrogramNarrow,
            other => return Err(Error::config(format!("unknown probe target '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SnrDb,
    SpearmanRho,
    IsDistance,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SnrDb => "snr_db",
            Metric::SpearmanRho => "spearman_rho",
            Metric::IsDistance => "is_distance",
        }
    }
}

/// Utterance-level train/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded 75/25 partition of `n` utterances; both sides non-empty.
    pub fn utterances(n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::insufficient("utterances for a train/test split", 2, n));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((n as f64 / 4.0).round() as usize).clamp(1, n - 1);
        let mut test = idx[..n_test].to_vec();
        let mut train = idx[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        Ok(Split { seed, train, test })
    }
}

/// Which layer activations feed a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSet {
    Single(usize),
    /// Concatenation of layers `0..=L`.
    Stacked(usize),
}

impl LayerSet {
    pub fn layers(self) -> Vec<usize> {
        match self {
            LayerSet::Single(l) => vec![l],
            LayerSet::Stacked(l) => (0..=l).collect(),
        }
    }

    pub fn top(self) -> usize {
        match self {
            LayerSet::Single(l) | LayerSet::Stacked(l) => l,
        }
    }

    pub fn label(self) -> String {
        match self {
            LayerSet::Single(l) => l.to_string(),
            LayerSet::Stacked(l) => format!("0-{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub layers: Vec<usize>,
    pub stacked: bool,
    pub target: ProbeTarget,
    pub metric: Metric,
    /// `None` when the metric is undefined (e.g. constant predictions).
    pub train_value: Option<f64>,
    pub test_value: Option<f64>,
    /// Per output dimension test metric: band or bin Spearman rho; empty for waveforms.
    pub per_output_test: Vec<Option<f64>>,
    pub n_train: usize,
    pub n_test: usize,
    pub split_seed: u64,
    pub spectral_floor: Option<f64>,
    pub model: RegressionModel,
}

impl ProbeResult {
    pub fn layer_label(&self) -> String {
        match (self.stacked, self.layers.last()) {
            (true, Some(l)) => format!("0-{l}"),
            (_, Some(l)) => l.to_string(),
            _ => String::new(),
        }
    }
}

fn check_layers(acts: &ActivationTensor, layers: LayerSet) -> Result<()> {
    if layers.top() >= acts.n_layers() {
        return Err(Error::invalid(format!(
            "layer {} out of range (dump holds {} layers)",
            layers.top(),
            acts.n_layers()
        )));
    }
    Ok(())
}

fn rows_at(acts: &ActivationTensor, layers: &[usize], steps: &[usize]) -> Array2<f64> {
    let w = acts.width();
    let mut out = Array2::zeros((steps.len(), w * layers.len()));
    for (mut row, &s) in out.rows_mut().into_iter().zip(steps) {
        for (j, &l) in layers.iter().enumerate() {
            for c in 0..w {
                row[j * w + c] = f64::from(acts.layer_outputs[[l, s, c]]);
            }
        }
    }
    out
}

fn vstack(parts: &[Array2<f64>], width: usize) -> Array2<f64> {
    if parts.is_empty() {
        return Array2::zeros((0, width));
    }
    let views: Vec<ArrayView2<f64>> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(0), &views).expect("equal widths")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformMode {
    /// Target is `x[t]`.
    Current,
    /// Target is `x[t + 1]`.
    Next,
}

impl WaveformMode {
    fn offset(self) -> usize {
        match self {
            WaveformMode::Current => 0,
            WaveformMode::Next => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformOptions {
    pub mode: WaveformMode,
    /// Leading samples excluded while the receptive field fills (normally the model's field).
    pub warmup: usize,
    /// Use every `stride`-th stored step.
    pub stride: usize,
}

pub struct WaveformUtterance<'a> {
    pub acts: &'a ActivationTensor,
    pub audio: &'a AudioBuffer,
}

/// Stored steps used for probing and the target sample index of each.
fn waveform_positions(len: usize, n_steps: usize, decimation: usize, opts: &WaveformOptions) -> Result<Vec<(usize, usize)>> {
    if len <= opts.warmup + opts.mode.offset() {
        return Err(Error::insufficient("samples (receptive-field warm-up)", opts.warmup + opts.mode.offset() + 1, len));
    }
    Ok((0..n_steps)
        .step_by(opts.stride.max(1))
        .map(|i| (i, i * decimation))
        .filter(|&(_, s)| s >= opts.warmup && s + opts.mode.offset() < len)
        .map(|(i, s)| (i, s + opts.mode.offset()))
        .collect())
}

fn waveform_side(utts: &[WaveformUtterance<'_>], idx: &[usize], layers: &[usize], opts: &WaveformOptions) -> Result<(Array2<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &u in idx {
        let utt = &utts[u];
        let pos = waveform_positions(utt.audio.len(), utt.acts.n_steps(), utt.acts.decimation, opts)?;
        let steps: Vec<usize> = pos.iter().map(|p| p.0).collect();
        xs.push(rows_at(utt.acts, layers, &steps));
        ys.extend(pos.iter().map(|&(_, t)| f64::from(utt.audio.samples()[t])));
    }
    let width = layers.len() * utts[0].acts.width();
    Ok((vstack(&xs, width), ys))
}

/// OLS probe from activations to the waveform, scored by SNR on held-out utterances.
pub fn probe_waveform(utts: &[WaveformUtterance<'_>], split: &Split, layers: LayerSet, opts: &WaveformOptions) -> Result<ProbeResult> {
    check_split(utts.len(), split)?;
    for u in utts {
        check_layers(u.acts, layers)?;
    }
    let ls = layers.layers();
    let (x_tr, y_tr) = waveform_side(utts, &split.train, &ls, opts)?;
    let (x_te, y_te) = waveform_side(utts, &split.test, &ls, opts)?;
    if y_te.is_empty() {
        return Err(Error::insufficient("test samples after warm-up", 1, 0));
    }
    let y_tr_m = Array2::from_shape_vec((y_tr.len(), 1), y_tr.clone()).unwrap();
    let model = ols_fit(x_tr.view(), y_tr_m.view())?;
    let p_tr = model.predict(x_tr.view()).column(0).to_vec();
    let p_te = model.predict(x_te.view()).column(0).to_vec();
    Ok(ProbeResult {
        layers: ls,
        stacked: matches!(layers, LayerSet::Stacked(_)),
        target: match opts.mode {
            WaveformMode::Current => ProbeTarget::WaveformCurrent,
            WaveformMode::Next => ProbeTarget::WaveformNext,
        },
        metric: Metric::SnrDb,
        train_value: Some(snr_db(&y_tr, &p_tr)?),
        test_value: Some(snr_db(&y_te, &p_te)?),
        per_output_test: Vec::new(),
        n_train: y_tr.len(),
        n_test: y_te.len(),
        split_seed: split.seed,
        spectral_floor: None,
        model,
    })
}

/// Reference SNRs on the probe's held-out target samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformReferences {
    /// 8-bit mu-law round trip of the target samples.
    pub mu_law_snr_db: f64,
    /// Pooled LPC predictor fitted on the training utterances (next-sample mode only).
    pub lpc_snr_db: Option<f64>,
    pub lpc_order: usize,
    /// The network's own probability-weighted next-sample estimate.
    pub model_snr_db: Option<f64>,
    pub n_test: usize,
}

/// `predictions[u][t]` is the model's estimate of sample `t + 1` of utterance `u`.
pub fn waveform_references(
    utts: &[WaveformUtterance<'_>],
    split: &Split,
    opts: &WaveformOptions,
    lpc_order: usize,
    predictions: Option<&[Vec<f64>]>,
) -> Result<WaveformReferences> {
    check_split(utts.len(), split)?;
    let next = opts.mode == WaveformMode::Next;
    let mut target = Vec::new();
    let mut quant = Vec::new();
    let mut lpc_est = Vec::new();
    let mut model_est = Vec::new();

    let lpc = if next && lpc_order > 0 {
        let train: Vec<Vec<f64>> = split.train.iter().map(|&u| utts[u].audio.samples_f64()).collect();
        let refs: Vec<&[f64]> = train.iter().map(|v| v.as_slice()).collect();
        Some(LpcModel::fit_pooled(&refs, lpc_order)?)
    } else {
        None
    };
    for &u in &split.test {
        let utt = &utts[u];
        let x = utt.audio.samples_f64();
        let pos = waveform_positions(x.len(), utt.acts.n_steps(), utt.acts.decimation, opts)?;
        let lpc_pred = lpc.as_ref().map(|m| m.predict(&x));
        for &(_, t) in &pos {
            target.push(x[t]);
            quant.push(decode_sample(encode_sample(x[t])));
            if let Some(p) = &lpc_pred {
                lpc_est.push(p[t]);
            }
            if let (true, Some(preds)) = (next, predictions) {
                let row = preds.get(u).ok_or_else(|| Error::invalid("missing model predictions for an utterance"))?;
                model_est.push(*row.get(t - 1).ok_or_else(|| Error::invalid("model predictions shorter than audio"))?);
            }
        }
    }
    Ok(WaveformReferences {
        mu_law_snr_db: snr_db(&target, &quant)?,
        lpc_snr_db: lpc.as_ref().map(|_| snr_db(&target, &lpc_est)).transpose()?,
        lpc_order,
        model_snr_db: (next && predictions.is_some()).then(|| snr_db(&target, &model_est)).transpose()?,
        n_test: target.len(),
    })
}

pub struct FeatureUtterance<'a> {
    pub acts: &'a ActivationTensor,
    pub track: &'a FeatureTrack,
    pub sample_rate: u32,
}

fn check_split(n: usize, split: &Split) -> Result<()> {
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::invalid("train and test sets must both be non-empty"));
    }
    if let Some(&bad) = split.train.iter().chain(&split.test).find(|&&i| i >= n) {
        return Err(Error::invalid(format!("split references utterance {bad} of {n}")));
    }
    if split.train.iter().any(|i| split.test.contains(i)) {
        return Err(Error::invalid("train and test utterances overlap"));
    }
    Ok(())
}

/// Frame-aligned inputs and targets of one utterance set. Unvoiced frames are skipped
/// for F0; spectra are converted to floored power.
pub(crate) fn feature_side(
    utts: &[FeatureUtterance<'_>],
    idx: &[usize],
    layers: &[usize],
) -> Result<(Array2<f64>, Array2<f64>)> {
    let width = layers.len() * utts[0].acts.width();
    let dim = utts[0].track.dim;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &u in idx {
        let utt = &utts[u];
        let track = utt.track;
        if track.dim != dim || track.kind != utts[0].track.kind {
            return Err(Error::invalid("feature tracks differ in kind or dimension"));
        }
        let mut parts = Vec::with_capacity(layers.len());
        let mut frames = Vec::new();
        for &l in layers {
            let a = frame_align(utt.acts, l, &track.frame_times, utt.sample_rate)?;
            frames = a.frames;
            parts.push(a.rows);
        }
        let keep: Vec<usize> = (0..frames.len())
            .filter(|&i| track.kind != FeatureKind::LogF0 || track.is_voiced(frames[i]))
            .collect();
        let mut x = Array2::zeros((keep.len(), width));
        let mut y = Array2::zeros((keep.len(), dim));
        for (r, &i) in keep.iter().enumerate() {
            for (j, p) in parts.iter().enumerate() {
                x.row_mut(r).slice_mut(ndarray::s![j * p.ncols()..(j + 1) * p.ncols()]).assign(&p.row(i));
            }
            for (c, &v) in track.frame(frames[i]).iter().enumerate() {
                y[[r, c]] = if track.kind.is_spectrum() { (v * v).max(SPECTRAL_FLOOR) } else { v };
            }
        }
        xs.push(x);
        ys.push(y);
    }
    Ok((vstack(&xs, width), vstack(&ys, dim)))
}

fn column_rhos(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Vec<Option<f64>>> {
    (0..a.ncols())
        .map(|j| spearman_rho(&a.column(j).to_vec(), &b.column(j).to_vec()))
        .collect()
}

fn mean_defined(v: &[Option<f64>]) -> Option<f64> {
    let d: Vec<f64> = v.iter().flatten().copied().collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}

/// Probe a frame-rate feature. F0 and band energies use OLS and Spearman rho (mean over
/// bands); spectra use Itakura-Saito regression on power and report the mean IS distance.
pub fn probe_feature(utts: &[FeatureUtterance<'_>], split: &Split, layers: LayerSet) -> Result<ProbeResult> {
    check_split(utts.len(), split)?;
    for u in utts {
        check_layers(u.acts, layers)?;
    }
    let kind = utts[0].track.kind;
    let ls = layers.layers();
    let (x_tr, y_tr) = feature_side(utts, &split.train, &ls)?;
    let (x_te, y_te) = feature_side(utts, &split.test, &ls)?;
    for (side, n) in [("training", x_tr.nrows()), ("test", x_te.nrows())] {
        if n < MIN_PROBE_FRAMES {
            return Err(Error::insufficient(format!("usable {side} frames"), MIN_PROBE_FRAMES, n));
        }
    }
    let spectral = kind.is_spectrum();
    let (model, train_value, test_value, per_output_test) = if spectral {
        let model = is_regression_fit(x_tr.view(), y_tr.view(), IS_NEWTON_ITERATIONS)?.model;
        let lp_tr = model.predict(x_tr.view());
        let lp_te = model.predict(x_te.view());
        let per_bin = column_rhos(lp_te.view(), y_te.mapv(f64::ln).view())?;
        let train = mean_is_divergence(y_tr.view(), lp_tr.view());
        let test = mean_is_divergence(y_te.view(), lp_te.view());
        (model, Some(train), Some(test), per_bin)
    } else {
        let model = ols_fit(x_tr.view(), y_tr.view())?;
        let rho_tr = column_rhos(model.predict(x_tr.view()).view(), y_tr.view())?;
        let rho_te = column_rhos(model.predict(x_te.view()).view(), y_te.view())?;
        (model, mean_defined(&rho_tr), mean_defined(&rho_te), rho_te)
    };
    if !model.is_finite() {
        return Err(Error::Numeric("probe weights are not finite".into()));
    }
    Ok(ProbeResult {
        layers: ls,
        stacked: matches!(layers, LayerSet::Stacked(_)),
        target: ProbeTarget::for_feature(kind),
        metric: if spectral { Metric::IsDistance } else { Metric::SpearmanRho },
        train_value,
        test_value,
        per_output_test,
        n_train: x_tr.nrows(),
        n_test: x_te.nrows(),
        split_seed: split.seed,
        spectral_floor: spectral.then_some(SPECTRAL_FLOOR),
        model,
    })
}
