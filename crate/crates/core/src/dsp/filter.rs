//! IIR filter design (Butterworth band-pass, biquad notch) and causal filtering.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterKind {
    Bandpass,
    Notch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    pub kind: FilterKind,
    pub order: usize,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub sample_rate_hz: f64,
}

/// Transfer function `B(z) / A(z)` in powers of `z^-1`, `A[0] == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    pub design: FilterDesign,
}

/// Expands `prod (1 - r z^-1)` into real coefficients.
fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    coeffs.into_iter().map(|c| c.re).collect()
}

/// Digital Butterworth band-pass of the given prototype order via the
/// bilinear transform with prewarped band edges. The result has `2 * order`
/// poles, unit gain at the geometric center and -3 dB at `lo_hz` and `hi_hz`.
pub fn design_bandpass(order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Result<FilterCoefficients> {
    if order == 0 {
        return Err(invalid("filter order must be at least 1"));
    }
    if !(fs > 0.0 && lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs / 2.0) {
        return Err(invalid(format!(
            "band [{lo_hz}, {hi_hz}] Hz must satisfy 0 < lo < hi < fs/2 = {}",
            fs / 2.0
        )));
    }
    let k = 2.0 * fs;
    let w_lo = k * (PI * lo_hz / fs).tan();
    let w_hi = k * (PI * hi_hz / fs).tan();
    let w0_sq = w_lo * w_hi;
    let bw = w_hi - w_lo;

    let mut poles = Vec::with_capacity(2 * order);
    for i in 0..order {
        let theta = PI * (2 * i + order + 1) as f64 / (2 * order) as f64;
        let proto = Complex64::from_polar(1.0, theta);
        let half = proto * bw / 2.0;
        let disc = (half * half - w0_sq).sqrt();
        for s in [half + disc, half - disc] {
            poles.push((k + s) / (k - s));
        }
    }
    let mut zeros = vec![Complex64::new(1.0, 0.0); order];
    zeros.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), order));

    let mut numerator = poly_from_roots(&zeros);
    let denominator = poly_from_roots(&poles);

    let center = 2.0 * (w0_sq.sqrt() / k).atan();
    let gain = eval_response(&numerator, &denominator, center).norm();
    for b in &mut numerator {
        *b /= gain;
    }

    Ok(FilterCoefficients {
        numerator,
        denominator,
        design: FilterDesign {
            kind: FilterKind::Bandpass,
            order,
            band_lo_hz: lo_hz,
            band_hi_hz: hi_hz,
            sample_rate_hz: fs,
        },
    })
}

/// Second-order notch (bilinear, prewarped) with zeros exactly on the unit
/// circle at `freq_hz`.
pub fn design_notch(freq_hz: f64, q: f64, fs: f64) -> Result<FilterCoefficients> {
    if !(fs > 0.0 && freq_hz > 0.0 && freq_hz < fs / 2.0 && q > 0.0) {
        return Err(invalid(format!("notch at {freq_hz} Hz (Q {q}) is not realizable at {fs} Hz")));
    }
    let w0 = 2.0 * PI * freq_hz / fs;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let cos = w0.cos();
    Ok(FilterCoefficients {
        numerator: vec![1.0 / a0, -2.0 * cos / a0, 1.0 / a0],
        denominator: vec![1.0, -2.0 * cos / a0, (1.0 - alpha) / a0],
        design: FilterDesign {
            kind: FilterKind::Notch,
            order: 2,
            band_lo_hz: freq_hz - freq_hz / (2.0 * q),
            band_hi_hz: freq_hz + freq_hz / (2.0 * q),
            sample_rate_hz: fs,
        },
    })
}

fn eval_response(b: &[f64], a: &[f64], omega: f64) -> Complex64 {
    let z_inv = Complex64::from_polar(1.0, -omega);
    let horner = |c: &[f64]| {
        c.iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &v| acc * z_inv + v)
    };
    horner(b) / horner(a)
}

impl FilterCoefficients {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let omega = 2.0 * PI * freq_hz / self.design.sample_rate_hz;
        eval_response(&self.numerator, &self.denominator, omega)
    }

    pub fn gain(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    /// Roots of the denominator in the z-plane.
    pub fn poles(&self) -> Vec<Complex64> {
        let a = &self.denominator;
        let n = a.len() - 1;
        if n == 0 {
            return Vec::new();
        }
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            companion[(0, j)] = -a[j + 1] / a[0];
        }
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        companion.complex_eigenvalues().iter().copied().collect()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_radius() < 1.0
    }

    fn check(&self) -> Result<()> {
        if self.denominator.first() != Some(&1.0) {
            return Err(invalid("denominator must be normalized to a leading 1"));
        }
        if self.numerator.len() > self.denominator.len() {
            return Err(invalid("numerator longer than denominator"));
        }
        let radius = self.max_pole_radius();
        if !(radius < 1.0) {
            return Err(Error::UnstableFilter { radius });
        }
        Ok(())
    }
}

/// Causal IIR filtering (transposed direct form II) from a zero initial state.
pub fn apply_filter(coeffs: &FilterCoefficients, signal: &[f64]) -> Result<Vec<f64>> {
    coeffs.check()?;
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(invalid("signal contains non-finite samples"));
    }
    Ok(filter_unchecked(coeffs, signal))
}

pub(crate) fn filter_unchecked(coeffs: &FilterCoefficients, signal: &[f64]) -> Vec<f64> {
    let a = &coeffs.denominator;
    let mut b = coeffs.numerator.clone();
    b.resize(a.len(), 0.0);
    let order = a.len() - 1;
    let mut state = vec![0.0; order];
    signal
        .iter()
        .map(|&x| {
            let y = b[0] * x + state.first().copied().unwrap_or(0.0);
            for i in 0..order {
                let next = if i + 1 < order { state[i + 1] } else { 0.0 };
                state[i] = b[i + 1] * x - a[i + 1] * y + next;
            }
            y
        })
        .collect()
}

/// Filters the recorder applies while acquiring: 0.5-30 Hz band-pass and a 50 Hz notch.
pub fn acquisition_filters(fs: f64) -> Result<Vec<FilterCoefficients>> {
    Ok(vec![design_bandpass(2, 0.5, 30.0, fs)?, design_notch(50.0, 30.0, fs)?])
}

/// Third-order 1-30 Hz Butterworth band-pass used before epoching.
pub fn analysis_filter(fs: f64) -> Result<FilterCoefficients> {
    design_bandpass(3, 1.0, 30.0, fs)
}

/// Runs `signal` through each filter in turn.
pub fn apply_chain(filters: &[FilterCoefficients], signal: &[f64]) -> Result<Vec<f64>> {
    let mut out = signal.to_vec();
    for f in filters {
        out = apply_filter(f, &out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Analog band-pass Butterworth magnitude evaluated on the prewarped axis.
    fn analytic_gain(order: usize, lo: f64, hi: f64, fs: f64, f: f64) -> f64 {
        let warp = |x: f64| 2.0 * fs * (PI * x / fs).tan();
        let (w1, w2, w) = (warp(lo), warp(hi), warp(f));
        let x = (w * w - w1 * w2) / (w * (w2 - w1));
        (1.0 / (1.0 + x.powi(2 * order as i32))).sqrt()
    }

    #[test]
    fn bandpass_matches_analytic_magnitude() {
        let f = design_bandpass(3, 1.0, 30.0, 256.0).unwrap();
        for probe in [0.5, 2.0, 10.0, 15.0, 45.0, 80.0] {
            let expected = analytic_gain(3, 1.0, 30.0, 256.0, probe);
            let got = f.gain(probe);
            assert!((got - expected).abs() <= 0.01 * expected, "{probe} Hz: {got} vs {expected}");
        }
    }

    #[test]
    fn bandpass_edges_and_dc() {
        let f = design_bandpass(3, 1.0, 30.0, 256.0).unwrap();
        assert_eq!(f.numerator.len(), 7);
        assert_eq!(f.denominator[0], 1.0);
        assert!(f.gain(0.0) < 1e-6);
        for edge in [1.0, 30.0] {
            let db = 20.0 * f.gain(edge).log10();
            assert!((db + 3.0103).abs() < 0.2, "{edge} Hz at {db} dB");
        }
        assert!(f.is_stable());
    }

    #[test]
    fn invalid_band_rejected() {
        assert!(design_bandpass(3, 1.0, 200.0, 256.0).is_err());
        assert!(design_bandpass(3, 30.0, 1.0, 256.0).is_err());
        assert!(design_bandpass(0, 1.0, 30.0, 256.0).is_err());
        assert!(design_notch(200.0, 30.0, 256.0).is_err());
    }

    #[test]
    fn zero_in_zero_out_and_homogeneity() {
        let f = analysis_filter(256.0).unwrap();
        let zeros = apply_filter(&f, &[0.0; 300]).unwrap();
        assert!(zeros.iter().all(|v| *v == 0.0));
        let x: Vec<f64> = (0..500).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0).collect();
        let y = apply_filter(&f, &x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| 3.5 * v).collect();
        let ys = apply_filter(&f, &scaled).unwrap();
        assert_eq!(y.len(), x.len());
        let scale = ys.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in y.iter().zip(&ys) {
            assert!((3.5 * a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn unstable_coefficients_rejected() {
        let mut f = design_notch(50.0, 30.0, 256.0).unwrap();
        f.denominator = vec![1.0, -2.5, 1.2];
        match apply_filter(&f, &[1.0, 2.0]) {
            Err(Error::UnstableFilter { radius }) => assert!(radius >= 1.0),
            other => panic!("expected instability error, got {other:?}"),
        }
    }

    #[test]
    fn notch_kills_fifty_hertz() {
        let n = design_notch(50.0, 30.0, 256.0).unwrap();
        assert!(n.gain(50.0) < 1e-12);
        let x: Vec<f64> = (0..256 * 20)
            .map(|i| (2.0 * PI * 50.0 * i as f64 / 256.0).sin())
            .collect();
        let y = apply_chain(&acquisition_filters(256.0).unwrap(), &x).unwrap();
        let tail = &y[y.len() - 512..];
        let peak = tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak < 0.01, "residual {peak}");
    }

    #[test]
    fn impulse_response_matches_difference_equation() {
        // direct evaluation of sum b_k x[n-k] - sum a_k y[n-k]
        let f = design_bandpass(2, 0.5, 30.0, 256.0).unwrap();
        let mut x = vec![0.0; 64];
        x[0] = 1.0;
        x[5] = -0.5;
        let got = apply_filter(&f, &x).unwrap();
        let mut y = vec![0.0; 64];
        for n in 0..64 {
            let mut acc = 0.0;
            for (k, b) in f.numerator.iter().enumerate() {
                if n >= k {
                    acc += b * x[n - k];
                }
            }
            for (k, a) in f.denominator.iter().enumerate().skip(1) {
                if n >= k {
                    acc -= a * y[n - k];
                }
            }
            y[n] = acc;
        }
        for (a, b) in got.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
