//! Activity-specific measurements on classified windows.
//!
//! Frequencies come from the slope of the analytic-signal phase: the coarse
//! periodogram peak is isolated with a ±2 bin band-pass, made one-sided,
//! unwrapped and fitted with a straight line. The slope resolves frequency
//! well below the `1 / span` bin width.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::classifier::{SpikeEvent, DEFAULT_ACTIVITY_FLOOR};
use crate::error::{invalid, Error, Result};
use crate::phase::{unwrap_in_place, PhaseSeries};
use crate::signal_model::{BREATHING_BAND_HZ, TREMOR_BAND_HZ};
use crate::spectrum::{activity_ratio, periodogram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub breathing_band_hz: (f64, f64),
    pub tremor_band_hz: (f64, f64),
    /// Wider search band so out-of-range tremor is seen as such.
    pub tremor_search_band_hz: (f64, f64),
    pub tremor_split_hz: f64,
    pub peak_halfwidth_bins: usize,
    /// Fraction trimmed from each end before the line fit.
    pub taper_frac: f64,
    pub min_r_squared: f64,
    pub min_span_s: f64,
    pub activity_floor: f64,
    pub fall_merge_radius_s: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            breathing_band_hz: BREATHING_BAND_HZ,
            tremor_band_hz: TREMOR_BAND_HZ,
            tremor_search_band_hz: (2.0, 13.0),
            tremor_split_hz: 7.0,
            peak_halfwidth_bins: 2,
            taper_frac: 0.1,
            min_r_squared: 0.8,
            min_span_s: 10.0,
            activity_floor: DEFAULT_ACTIVITY_FLOOR,
            fall_merge_radius_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreathingEstimate {
    pub rate_hz: f64,
    pub rate_bpm: f64,
    /// R² of the phase-line fit.
    pub confidence: f64,
    pub window_start_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TremorSeverity {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TremorClass {
    pub class: TremorSeverity,
    pub dominant_hz: f64,
    /// x-y and x-z dominant frequencies agree within one bin.
    pub plane_agreement: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallReport {
    pub time_s: f64,
    pub peak_z: f64,
}

/// Dominant frequency in `band_hz` and the R² of the phase-slope fit.
pub fn estimate_dominant_freq(phi: &PhaseSeries, band_hz: (f64, f64)) -> Result<(f64, f64)> {
    estimate_dominant_freq_with(phi, band_hz, &EstimatorConfig::default())
}

pub fn estimate_dominant_freq_with(
    phi: &PhaseSeries,
    band_hz: (f64, f64),
    cfg: &EstimatorConfig,
) -> Result<(f64, f64)> {
    let rate = phi.batch_rate_hz();
    let n = phi.len();
    if phi.span_s() + 0.5 / rate < cfg.min_span_s {
        return Err(Error::InsufficientWindow {
            needed_s: cfg.min_span_s,
            got_s: phi.span_s(),
        });
    }
    if !(band_hz.1 > band_hz.0 && band_hz.0 >= 0.0) || band_hz.1 > rate / 2.0 {
        return Err(invalid(format!("band {band_hz:?} invalid for {rate} batches/s")));
    }
    let (psd, spectrum) = periodogram(phi.values(), rate);
    let bins = psd.band_bins(band_hz);
    if bins.is_empty() {
        return Err(invalid("band narrower than one spectral bin"));
    }
    if activity_ratio(&psd, band_hz, rate) < cfg.activity_floor {
        return Err(Error::NoPeak(format!("band {band_hz:?} power at noise floor")));
    }
    let peak = bins
        .clone()
        .max_by(|&a, &b| psd.power[a].total_cmp(&psd.power[b]))
        .expect("non-empty band");

    // analytic signal of the ±halfwidth neighbourhood (positive bins only)
    let hw = cfg.peak_halfwidth_bins;
    let lo = peak.saturating_sub(hw).max(1);
    let hi = (peak + hw).min((n - 1) / 2);
    let mut analytic = vec![Complex64::new(0.0, 0.0); n];
    for k in lo..=hi {
        analytic[k] = spectrum[k] * 2.0;
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut analytic);

    let mut phase: Vec<f64> = analytic.iter().map(|z| z.im.atan2(z.re)).collect();
    unwrap_in_place(&mut phase);
    let trim = (cfg.taper_frac * n as f64).floor() as usize;
    let (slope, r2) = line_fit(&phase[trim..n - trim]);
    Ok((slope * rate / (2.0 * std::f64::consts::PI), r2))
}

/// Least-squares slope per sample and R² of `y[i] ≈ a + b·i`.
fn line_fit(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - mx;
        let dy = v - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

/// Slack on inclusive band edges for rounding in the phase-slope fit.
const BAND_EDGE_TOL_HZ: f64 = 1e-9;

pub fn breathing_rate(phi1: &PhaseSeries) -> Result<BreathingEstimate> {
    breathing_rate_with(phi1, &EstimatorConfig::default())
}

pub fn breathing_rate_with(phi1: &PhaseSeries, cfg: &EstimatorConfig) -> Result<BreathingEstimate> {
    let band = cfg.breathing_band_hz;
    let (rate_hz, r2) = estimate_dominant_freq_with(phi1, band, cfg)?;
    if r2 < cfg.min_r_squared {
        return Err(Error::NoPeak(format!("phase fit R² {r2:.3} below {}", cfg.min_r_squared)));
    }
    if !(band.0 - BAND_EDGE_TOL_HZ..=band.1 + BAND_EDGE_TOL_HZ).contains(&rate_hz) {
        return Err(Error::OutOfBand {
            freq_hz: rate_hz,
            lo_hz: band.0,
            hi_hz: band.1,
        });
    }
    Ok(BreathingEstimate {
        rate_hz,
        rate_bpm: 60.0 * rate_hz,
        confidence: r2,
        window_start_s: phi1.start_time_s(),
    })
}

pub fn classify_tremor(phi1: &PhaseSeries, phi2c: &PhaseSeries) -> Result<TremorClass> {
    classify_tremor_with(phi1, phi2c, &EstimatorConfig::default())
}

/// Low/high tremor from the `φ₁` dominant frequency; `Err(OutOfBand)` means
/// the window should be treated as random motion.
pub fn classify_tremor_with(
    phi1: &PhaseSeries,
    phi2c: &PhaseSeries,
    cfg: &EstimatorConfig,
) -> Result<TremorClass> {
    let (f1, _) = estimate_dominant_freq_with(phi1, cfg.tremor_search_band_hz, cfg)?;
    let (lo, hi) = cfg.tremor_band_hz;
    if !(lo..=hi).contains(&f1) {
        return Err(Error::OutOfBand {
            freq_hz: f1,
            lo_hz: lo,
            hi_hz: hi,
        });
    }
    let bin = 1.0 / phi1.span_s();
    let plane_agreement = estimate_dominant_freq_with(phi2c, cfg.tremor_search_band_hz, cfg)
        .map(|(f2, _)| (f1 - f2).abs() <= bin)
        .unwrap_or(false);
    let class = if f1 < cfg.tremor_split_hz {
        TremorSeverity::Low
    } else {
        TremorSeverity::High
    };
    Ok(TremorClass {
        class,
        dominant_hz: f1,
        plane_agreement,
    })
}

/// Absolute time of a spike detected in the window starting at `window_start_s`.
pub fn report_fall(spike: &SpikeEvent, window_start_s: f64) -> FallReport {
    FallReport {
        time_s: window_start_s + spike.time_s,
        peak_z: spike.peak_z,
    }
}

/// Collects fall reports from overlapping windows and merges duplicates.
///
/// Reports are clustered after sorting, so the result does not depend on the
/// order windows were processed in.
#[derive(Debug, Clone, Default)]
pub struct FallReporter {
    merge_radius_s: f64,
    raw: Vec<FallReport>,
}

impl FallReporter {
    pub fn new(merge_radius_s: f64) -> Self {
        Self {
            merge_radius_s,
            raw: Vec::new(),
        }
    }

    pub fn add(&mut self, report: FallReport) {
        self.raw.push(report);
    }

    pub fn reports(&self) -> Vec<FallReport> {
        let mut sorted = self.raw.clone();
        sorted.sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then(b.peak_z.total_cmp(&a.peak_z)));
        let mut out: Vec<FallReport> = Vec::new();
        let mut last_t = f64::NEG_INFINITY;
        for r in sorted {
            match out.last_mut() {
                Some(cur) if r.time_s - last_t <= self.merge_radius_s => {
                    cur.peak_z = cur.peak_z.max(r.peak_z);
                }
                _ => out.push(r),
            }
            last_t = r.time_s;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(f: f64, rate: f64, secs: f64, phase: f64) -> PhaseSeries {
        let n = (rate * secs).round() as usize;
        PhaseSeries::new(
            (0..n).map(|b| (2.0 * PI * f * b as f64 / rate + phase).sin()).collect(),
            rate,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn beats_the_bin_on_an_off_bin_tone() {
        let (f, r2) = estimate_dominant_freq(&tone(0.30, 20.0, 20.0, 0.4), (0.2, 2.0)).unwrap();
        assert!((f - 0.30).abs() < 0.005, "f = {f}");
        assert!(r2 > 0.99);
    }

    #[test]
    fn on_bin_tone_is_exact() {
        let (f, _) = estimate_dominant_freq(&tone(0.5, 20.0, 20.0, 0.0), (0.2, 2.0)).unwrap();
        assert!((f - 0.5).abs() < 1e-4, "f = {f}");
    }

    #[test]
    fn band_restriction_ignores_stronger_out_of_band_tone() {
        let rate = 20.0;
        let n = 400;
        let v = (0..n)
            .map(|b| {
                let t = b as f64 / rate;
                (2.0 * PI * 1.0 * t).sin() + 0.3 * (2.0 * PI * 6.0 * t).sin()
            })
            .collect();
        let phi = PhaseSeries::new(v, rate, 0.0).unwrap();
        let (f, _) = estimate_dominant_freq(&phi, (0.5, 2.0)).unwrap();
        assert!((f - 1.0).abs() < 0.005);
    }

    #[test]
    fn short_or_silent_series_error() {
        assert!(matches!(
            estimate_dominant_freq(&tone(1.0, 20.0, 5.0, 0.0), (0.5, 2.0)),
            Err(Error::InsufficientWindow { .. })
        ));
        let flat = PhaseSeries::new(vec![0.0; 400], 20.0, 0.0).unwrap();
        assert!(matches!(estimate_dominant_freq(&flat, (0.5, 2.0)), Err(Error::NoPeak(_))));
    }

    #[test]
    fn breathing_boundary_is_inclusive() {
        let est = breathing_rate(&tone(0.5, 80.0, 20.0, 0.0)).unwrap();
        assert!((est.rate_bpm - 30.0).abs() < 1e-3, "{est:?}");
        let low = breathing_rate(&tone(0.2, 80.0, 20.0, 0.0)).unwrap();
        assert!((low.rate_bpm - 12.0).abs() < 1e-3, "{low:?}");
    }

    #[test]
    fn tremor_split_and_discard() {
        let rate = 80.0;
        let low = classify_tremor(&tone(5.0, rate, 20.0, 0.0), &tone(5.0, rate, 20.0, 1.0)).unwrap();
        assert_eq!(low.class, TremorSeverity::Low);
        assert!(low.plane_agreement);
        let high = classify_tremor(&tone(9.0, rate, 20.0, 0.0), &tone(9.0, rate, 20.0, 0.0)).unwrap();
        assert_eq!(high.class, TremorSeverity::High);
        let slow = classify_tremor(&tone(3.0, rate, 20.0, 0.0), &tone(3.0, rate, 20.0, 0.0));
        assert!(matches!(slow, Err(Error::OutOfBand { .. })), "{slow:?}");
        let noise = PhaseSeries::new(vec![0.0; 1600], rate, 0.0).unwrap();
        let one_plane = classify_tremor(&tone(6.0, rate, 20.0, 0.0), &noise).unwrap();
        assert!(!one_plane.plane_agreement);
    }

    #[test]
    fn fall_reports_merge_within_radius() {
        let spike = |t| SpikeEvent {
            time_s: t,
            peak_z: 5.0,
            width_s: 0.3,
        };
        let r = report_fall(&spike(2.0), 10.0);
        assert_eq!(r.time_s, 12.0);

        let mut rep = FallReporter::new(1.0);
        for ws in [10.0, 8.0, 6.0] {
            rep.add(report_fall(&spike(12.0 - ws), ws));
        }
        assert_eq!(rep.reports().len(), 1);

        let mut two = FallReporter::new(1.0);
        two.add(report_fall(&spike(2.0), 10.0));
        two.add(report_fall(&spike(2.0), 20.0));
        assert_eq!(two.reports().len(), 2);
    }
}
