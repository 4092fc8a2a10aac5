//! Welch power spectral density and band power.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub segment_s: f64,
    /// Fraction of a segment shared with the next one.
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self { segment_s: 2.0, overlap: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

pub const THETA: Band = Band { lo_hz: 4.0, hi_hz: 7.5 };
pub const ALPHA: Band = Band { lo_hz: 8.0, hi_hz: 13.0 };

/// One-sided PSD in units^2/Hz on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn resolution_hz(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    pub fn mean_in(&self, band: Band) -> Option<f64> {
        let (sum, count) = self
            .freqs
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= band.lo_hz && **f <= band.hi_hz)
            .fold((0.0, 0usize), |(s, c), (_, p)| (s + p, c + 1));
        (count > 0).then(|| sum / count as f64)
    }
}

/// Averaged periodogram over periodic-Hann segments with per-segment mean removal.
pub fn welch_psd(signal: &[f64], fs: f64, cfg: &WelchConfig) -> Result<Psd> {
    let seg = (cfg.segment_s * fs).round() as usize;
    if seg < 2 {
        return Err(invalid("Welch segment shorter than two samples"));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(invalid("Welch overlap must lie in [0, 1)"));
    }
    if signal.len() < seg {
        return Err(invalid(format!(
            "signal of {} samples is shorter than one {seg}-sample Welch segment",
            signal.len()
        )));
    }
    let step = ((seg as f64) * (1.0 - cfg.overlap)).round().max(1.0) as usize;
    let window: Vec<f64> = (0..seg)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / seg as f64).cos())
        .collect();
    let norm = fs * window.iter().map(|w| w * w).sum::<f64>();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let n_bins = seg / 2 + 1;
    let mut density = vec![0.0; n_bins];
    let mut buf = vec![Complex::new(0.0, 0.0); seg];
    let mut n_segments = 0usize;
    let mut start = 0;
    while start + seg <= signal.len() {
        let chunk = &signal[start..start + seg];
        let mean = chunk.iter().sum::<f64>() / seg as f64;
        for ((b, x), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, d) in density.iter_mut().enumerate() {
            let one_sided = if k == 0 || (seg % 2 == 0 && k == seg / 2) { 1.0 } else { 2.0 };
            *d += one_sided * buf[k].norm_sqr() / norm;
        }
        n_segments += 1;
        start += step;
    }
    for d in &mut density {
        *d /= n_segments as f64;
    }
    let freqs = (0..n_bins).map(|k| k as f64 * fs / seg as f64).collect();
    Ok(Psd { freqs, density })
}

/// Mean Welch PSD over the bins inside `band` (edges inclusive).
pub fn band_power(signal: &[f64], fs: f64, band: Band, cfg: &WelchConfig) -> Result<f64> {
    if !(band.lo_hz >= 0.0 && band.lo_hz <= band.hi_hz && band.hi_hz <= fs / 2.0) {
        return Err(invalid(format!("band [{}, {}] Hz is not valid", band.lo_hz, band.hi_hz)));
    }
    let psd = welch_psd(signal, fs, cfg)?;
    psd.mean_in(band)
        .ok_or_else(|| invalid("band contains no frequency bins at this resolution"))
}
