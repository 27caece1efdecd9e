//! Small spectral helpers shared by the classifier and the estimators.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// One-sided power spectrum on bins `0..=n/2`.
#[derive(Debug, Clone)]
pub struct Psd {
    pub bin_hz: f64,
    pub power: Vec<f64>,
}

impl Psd {
    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.bin_hz
    }

    /// Bins whose centre frequency lies in `[lo, hi]`, DC excluded.
    pub fn band_bins(&self, (lo, hi): (f64, f64)) -> std::ops::RangeInclusive<usize> {
        let first = ((lo / self.bin_hz).ceil() as usize).max(1);
        let last = ((hi / self.bin_hz).floor() as usize).min(self.power.len() - 1);
        first..=last
    }

    pub fn band_power(&self, band: (f64, f64)) -> f64 {
        let r = self.band_bins(band);
        if r.is_empty() {
            return 0.0;
        }
        self.power[r].iter().sum()
    }

    pub fn mean_band_power(&self, band: (f64, f64)) -> Option<f64> {
        let r = self.band_bins(band);
        if r.is_empty() {
            return None;
        }
        let n = r.clone().count() as f64;
        Some(self.power[r].iter().sum::<f64>() / n)
    }
}

pub fn hann(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch average of Hann-windowed, mean-removed segments with 50% overlap.
///
/// Inputs shorter than `seg_len` are treated as one segment.
pub fn welch_psd(x: &[f64], rate_hz: f64, seg_len: usize) -> Psd {
    let seg = seg_len.clamp(1, x.len().max(1));
    let hop = (seg / 2).max(1);
    let window = hann(seg);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(seg);
    let mut acc = vec![0.0; seg / 2 + 1];
    let mut count = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut start = 0;
    while start + seg <= x.len() {
        let s = &x[start..start + seg];
        let mean = s.iter().sum::<f64>() / seg as f64;
        for ((b, v), w) in buf.iter_mut().zip(s).zip(&window) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    if count > 0 {
        acc.iter_mut().for_each(|a| *a /= count as f64);
    }
    Psd {
        bin_hz: rate_hz / seg as f64,
        power: acc,
    }
}

/// Plain periodogram of the mean-removed series (rectangular window).
pub fn periodogram(x: &[f64], rate_hz: f64) -> (Psd, Vec<Complex64>) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n.max(1) as f64;
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    if n > 0 {
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    }
    let power = buf[..n / 2 + 1].iter().map(|z| z.norm_sqr()).collect();
    (
        Psd {
            bin_hz: rate_hz / n.max(1) as f64,
            power,
        },
        buf,
    )
}

/// Reference band for the noise floor: from 1.2× the band edge to 60% of
/// Nyquist, or everything above the band when that is empty.
pub fn noise_reference_band(band: (f64, f64), rate_hz: f64) -> (f64, f64) {
    let nyq = rate_hz / 2.0;
    let lo = 1.2 * band.1;
    let hi = 0.6 * nyq;
    if hi > lo {
        (lo, hi)
    } else {
        (band.1, nyq)
    }
}

/// Mean in-band power per bin over mean noise-reference power per bin.
///
/// 0 when the band holds no power; capped at 1e12 when the reference is empty
/// or silent.
pub fn activity_ratio(psd: &Psd, band: (f64, f64), rate_hz: f64) -> f64 {
    let Some(sig) = psd.mean_band_power(band) else {
        return 0.0;
    };
    if !(sig > 0.0) {
        return 0.0;
    }
    let noise_band = noise_reference_band(band, rate_hz);
    let noise = psd
        .band_bins(noise_band)
        .filter(|k| psd.freq(*k) > band.1)
        .map(|k| psd.power[k])
        .fold((0.0, 0usize), |(s, c), p| (s + p, c + 1));
    if noise.1 == 0 || noise.0 <= 0.0 {
        return 1e12;
    }
    (sig / (noise.0 / noise.1 as f64)).min(1e12)
}
