//! Linear prediction via Levinson-Durbin on the biased autocorrelation.

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::probes::snr_db;

pub const DEFAULT_LPC_ORDER: usize = 512;

/// Biased autocorrelation `r[k] = (1/N) sum_n x[n] x[n+k]` for `k = 0..=order`.
pub fn autocorrelation(x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    (0..=order)
        .map(|k| {
            if k >= n {
                return 0.0;
            }
            x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
        })
        .collect()
}

/// Predictor `x[t] ~ sum_k coeffs[k-1] * x[t-k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpcModel {
    pub coeffs: Vec<f64>,
    pub reflection: Vec<f64>,
    /// Final prediction error power from the recursion.
    pub error: f64,
}

pub fn levinson_durbin(r: &[f64], order: usize) -> Result<LpcModel> {
    if r.len() <= order {
        return Err(Error::invalid(format!(
            "need {} autocorrelation lags, got {}",
            order + 1,
            r.len()
        )));
    }
    if !(r[0] > 0.0) {
        return Err(Error::invalid("zero-energy signal has no linear predictor"));
    }
    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut reflection = Vec::with_capacity(order);
    let mut err = r[0];
    for i in 0..order {
        let acc = r[i + 1] - (0..i).map(|j| a[j] * r[i - j]).sum::<f64>();
        let k = acc / err;
        if !k.is_finite() || k.abs() >= 1.0 {
            return Err(Error::Numeric(format!(
                "reflection coefficient {k} at order {} (autocorrelation not positive definite)",
                i + 1
            )));
        }
        prev[..i].copy_from_slice(&a[..i]);
        a[i] = k;
        for j in 0..i {
            a[j] = prev[j] - k * prev[i - 1 - j];
        }
        err *= 1.0 - k * k;
        reflection.push(k);
    }
    Ok(LpcModel {
        coeffs: a,
        reflection,
        error: err,
    })
}

impl LpcModel {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Fits one predictor to several signals by pooling their autocorrelations.
    pub fn fit_pooled(signals: &[&[f64]], order: usize) -> Result<Self> {
        let total: usize = signals.iter().map(|s| s.len()).sum();
        if total == 0 {
            return Err(Error::invalid("no samples to fit"));
        }
        let mut r = vec![0.0; order + 1];
        for s in signals {
            let part = autocorrelation(s, order);
            for (acc, v) in r.iter_mut().zip(part) {
                *acc += v * s.len() as f64;
            }
        }
        r.iter_mut().for_each(|v| *v /= total as f64);
        levinson_durbin(&r, order)
    }

    /// One-step predictions for every sample, zero history before the start.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|t| {
                self.coeffs
                    .iter()
                    .enumerate()
                    .take(t)
                    .map(|(k, a)| a * x[t - 1 - k])
                    .sum()
            })
            .collect()
    }

    /// One-step prediction SNR over `x[from..]`, using all earlier samples as history.
    pub fn prediction_snr_db(&self, x: &[f64], from: usize) -> Result<f64> {
        let pred = self.predict(x);
        snr_db(&x[from..], &pred[from..])
    }
}

#[derive(Debug, Clone)]
pub struct LpcFit {
    pub model: LpcModel,
    /// Prediction SNR on the held-out final quarter of the signal.
    pub snr_db: f64,
}

/// Fits on the first three quarters of `x` and scores one-step prediction on the rest.
pub fn lpc_fit(audio: &AudioBuffer, order: usize) -> Result<LpcFit> {
    let x = audio.samples_f64();
    if x.len() <= 4 * order {
        return Err(Error::insufficient("samples (4 x order)", 4 * order + 1, x.len()));
    }
    let split = x.len() * 3 / 4;
    let model = LpcModel::fit_pooled(&[&x[..split]], order)?;
    let snr_db = model.prediction_snr_db(&x, split)?;
    Ok(LpcFit { model, snr_db })
}
