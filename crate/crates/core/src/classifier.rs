//! Window-level activity classification.
//!
//! Each 20 s window of normalized `φ₁` and leakage-corrected `φ₂′` is scored
//! for periodicity, scanned for a fall spike, and mapped onto one label:
//!
//! | spike | φ₁ periodic | φ₂′ periodic | activity | label        |
//! |-------|-------------|--------------|----------|--------------|
//! | yes   | any         | any          | any      | Fall         |
//! | no    | yes         | yes          | -        | Tremor       |
//! | no    | yes         | no           | -        | Breathing    |
//! | no    | no          | any          | yes      | RandomMotion |
//! | no    | no          | no           | no       | NoActivity   |

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::phase::PhaseSeries;
use crate::spectrum::{activity_ratio, welch_psd};

/// Concentration needed to call a window periodic.
pub const DEFAULT_PERIODICITY_THRESHOLD: f64 = 0.5;
/// Minimum in-band to noise-reference PSD ratio that counts as activity.
pub const DEFAULT_ACTIVITY_FLOOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityLabel {
    NoActivity,
    RandomMotion,
    Breathing,
    Tremor,
    Fall,
}

impl ActivityLabel {
    pub const ALL: [ActivityLabel; 5] = [
        ActivityLabel::NoActivity,
        ActivityLabel::RandomMotion,
        ActivityLabel::Breathing,
        ActivityLabel::Tremor,
        ActivityLabel::Fall,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActivityLabel::NoActivity => "no_activity",
            ActivityLabel::RandomMotion => "random_motion",
            ActivityLabel::Breathing => "breathing",
            ActivityLabel::Tremor => "tremor",
            ActivityLabel::Fall => "fall",
        }
    }
}

impl std::fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub window_s: f64,
    pub hop_s: f64,
    /// Band searched for the dominant motion.
    pub motion_band_hz: (f64, f64),
    pub welch_segment_s: f64,
    pub periodicity_threshold: f64,
    pub activity_floor: f64,
    pub spike_threshold_z: f64,
    pub spike_min_width_s: f64,
    pub flatness_window_s: f64,
    /// Ceiling on the short-window variance of normalized `φ₁` (z²).
    pub flatness_ceiling: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            window_s: 20.0,
            hop_s: 2.0,
            motion_band_hz: (0.2, 12.0),
            welch_segment_s: 10.0,
            periodicity_threshold: DEFAULT_PERIODICITY_THRESHOLD,
            activity_floor: DEFAULT_ACTIVITY_FLOOR,
            spike_threshold_z: 4.0,
            spike_min_width_s: 0.1,
            flatness_window_s: 1.0,
            flatness_ceiling: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityEvidence {
    pub is_periodic: bool,
    pub dominant_hz: f64,
    /// Share of band power within ±1 bin of the peak.
    pub concentration: f64,
    pub window_span_s: f64,
    pub active: bool,
    pub activity_ratio: f64,
}

impl PeriodicityEvidence {
    pub fn silent(window_span_s: f64) -> Self {
        Self {
            is_periodic: false,
            dominant_hz: 0.0,
            concentration: 0.0,
            window_span_s,
            active: false,
            activity_ratio: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    /// Onset relative to the start of the analysed window.
    pub time_s: f64,
    pub peak_z: f64,
    pub width_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityDecision {
    pub label: ActivityLabel,
    pub evidence1: PeriodicityEvidence,
    pub evidence2: PeriodicityEvidence,
    pub spike: Option<SpikeEvent>,
    pub window_start_s: f64,
}

pub fn periodicity_test(phi: &PhaseSeries, band_hz: (f64, f64)) -> Result<PeriodicityEvidence> {
    periodicity_test_with(phi, band_hz, &ClassifierConfig::default())
}

/// Spectral-concentration periodicity score over a window of at least
/// `cfg.window_s` seconds.
pub fn periodicity_test_with(
    phi: &PhaseSeries,
    band_hz: (f64, f64),
    cfg: &ClassifierConfig,
) -> Result<PeriodicityEvidence> {
    let rate = phi.batch_rate_hz();
    let needed = (cfg.window_s * rate).round() as usize;
    if phi.len() < needed {
        return Err(Error::InsufficientWindow {
            needed_s: cfg.window_s,
            got_s: phi.span_s(),
        });
    }
    if !(band_hz.0 >= 0.0 && band_hz.1 > band_hz.0) {
        return Err(invalid(format!("bad band {band_hz:?}")));
    }
    if band_hz.1 > rate / 2.0 {
        return Err(invalid(format!(
            "band edge {} Hz above Nyquist {} Hz",
            band_hz.1,
            rate / 2.0
        )));
    }
    let span = phi.span_s();
    let seg = ((cfg.welch_segment_s * rate).round() as usize).min(phi.len());
    let psd = welch_psd(phi.values(), rate, seg);
    let bins = psd.band_bins(band_hz);
    if bins.is_empty() {
        return Err(invalid("band narrower than one spectral bin"));
    }
    let band_power: f64 = psd.power[bins.clone()].iter().sum();
    if !(band_power > 0.0) {
        return Ok(PeriodicityEvidence::silent(span));
    }
    let peak = bins
        .clone()
        .max_by(|&a, &b| psd.power[a].total_cmp(&psd.power[b]))
        .expect("non-empty band");
    let lo = peak.saturating_sub(1).max(*bins.start());
    let hi = (peak + 1).min(*bins.end());
    let concentration = (psd.power[lo..=hi].iter().sum::<f64>() / band_power).min(1.0);
    let ratio = activity_ratio(&psd, band_hz, rate);
    let active = ratio >= cfg.activity_floor;
    Ok(PeriodicityEvidence {
        is_periodic: active && concentration >= cfg.periodicity_threshold,
        dominant_hz: psd.freq(peak),
        concentration,
        window_span_s: span,
        active,
        activity_ratio: ratio,
    })
}

pub fn detect_spike(phi2_corrected: &PhaseSeries, phi1: &PhaseSeries) -> Result<Option<SpikeEvent>> {
    detect_spike_with(phi2_corrected, phi1, &ClassifierConfig::default())
}

/// Earliest sustained `|φ₂′| ≥ threshold` run during which `φ₁` stays flat.
///
/// Warm-up and degenerate batches never belong to a run.
pub fn detect_spike_with(
    phi2_corrected: &PhaseSeries,
    phi1: &PhaseSeries,
    cfg: &ClassifierConfig,
) -> Result<Option<SpikeEvent>> {
    if phi2_corrected.len() != phi1.len() {
        return Err(invalid("spike detection needs equal-length series"));
    }
    if phi2_corrected.batch_rate_hz() != phi1.batch_rate_hz() {
        return Err(Error::RateMismatch(
            phi2_corrected.batch_rate_hz(),
            phi1.batch_rate_hz(),
        ));
    }
    let rate = phi1.batch_rate_hz();
    let min_len = ((cfg.spike_min_width_s * rate).ceil() as usize).max(1);
    let half_flat = ((cfg.flatness_window_s * rate / 2.0).round() as usize).max(1);
    let z = phi2_corrected.values();
    let flags = phi2_corrected.flags();

    let mut b = 0;
    while b < z.len() {
        if !(flags[b].usable() && z[b].abs() >= cfg.spike_threshold_z) {
            b += 1;
            continue;
        }
        let start = b;
        let mut peak: f64 = 0.0;
        while b < z.len() && flags[b].usable() && z[b].abs() >= cfg.spike_threshold_z {
            peak = peak.max(z[b].abs());
            b += 1;
        }
        if b - start < min_len {
            continue;
        }
        let lo = start.saturating_sub(half_flat);
        let hi = (start + half_flat).min(z.len());
        if short_variance(&phi1.values()[lo..hi]) < cfg.flatness_ceiling {
            return Ok(Some(SpikeEvent {
                time_s: start as f64 / rate,
                peak_z: peak,
                width_s: (b - start) as f64 / rate,
            }));
        }
    }
    Ok(None)
}

fn short_variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Map window evidence to a single label (see the module table).
pub fn classify_window(
    e1: PeriodicityEvidence,
    e2: PeriodicityEvidence,
    spike: Option<SpikeEvent>,
    window_start_s: f64,
) -> ActivityDecision {
    let label = if spike.is_some() {
        ActivityLabel::Fall
    } else if e1.is_periodic && e2.is_periodic {
        ActivityLabel::Tremor
    } else if e1.is_periodic {
        ActivityLabel::Breathing
    } else if e1.active || e2.active {
        ActivityLabel::RandomMotion
    } else {
        ActivityLabel::NoActivity
    };
    ActivityDecision {
        label,
        evidence1: e1,
        evidence2: e2,
        spike,
        window_start_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{normalize_phase, PhaseSeries};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    const RATE: f64 = 80.0;

    fn series(f: impl Fn(f64) -> f64, secs: f64) -> PhaseSeries {
        let n = (secs * RATE) as usize;
        PhaseSeries::new((0..n).map(|b| f(b as f64 / RATE)).collect(), RATE, 0.0).unwrap()
    }

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn evidence(periodic: bool, hz: f64, active: bool) -> PeriodicityEvidence {
        PeriodicityEvidence {
            is_periodic: periodic,
            dominant_hz: hz,
            concentration: if periodic { 0.9 } else { 0.1 },
            window_span_s: 20.0,
            active,
            activity_ratio: if active { 100.0 } else { 1.0 },
        }
    }

    #[test]
    fn single_tone_is_periodic() {
        let phi = series(|t| (2.0 * PI * 1.0 * t).sin(), 20.0);
        let e = periodicity_test(&phi, (0.5, 2.0)).unwrap();
        assert!(e.is_periodic);
        assert!((e.dominant_hz - 1.0).abs() <= 0.1);
        assert!(e.concentration > 0.9);
    }

    #[test]
    fn flat_input_is_inactive() {
        let phi = series(|_| 0.0, 20.0);
        let e = periodicity_test(&phi, (0.5, 2.0)).unwrap();
        assert!(!e.is_periodic && !e.active);
    }

    #[test]
    fn white_noise_concentration_stays_far_below_threshold() {
        let mut conc: Vec<f64> = (0..100)
            .map(|s| {
                let phi = PhaseSeries::new(noise(s, 1600), RATE, 0.0).unwrap();
                let e = periodicity_test(&phi, (0.2, 12.0)).unwrap();
                assert!(!e.is_periodic);
                e.concentration
            })
            .collect();
        conc.sort_by(f64::total_cmp);
        let p99 = conc[98];
        assert!(p99 < DEFAULT_PERIODICITY_THRESHOLD / 2.0, "p99 = {p99}");
    }

    #[test]
    fn short_window_is_rejected() {
        let phi = series(|t| t.sin(), 10.0);
        assert!(matches!(
            periodicity_test(&phi, (0.5, 2.0)),
            Err(Error::InsufficientWindow { .. })
        ));
        let long = series(|t| t.sin(), 20.0);
        assert!(periodicity_test(&long, (0.5, 50.0)).is_err());
    }

    #[test]
    fn step_in_phi2_is_a_spike() {
        let raw2 = series(|t| if t >= 12.0 { 5.0 } else { 0.0 }, 30.0);
        let mut v2 = raw2.values().to_vec();
        for (v, n) in v2.iter_mut().zip(noise(3, raw2.len())) {
            *v += 0.01 * n;
        }
        let phi2 = normalize_phase(&PhaseSeries::new(v2, RATE, 0.0).unwrap(), 800).unwrap();
        let phi1 = normalize_phase(
            &PhaseSeries::new(noise(4, raw2.len()), RATE, 0.0).unwrap(),
            800,
        )
        .unwrap();
        let spike = detect_spike(&phi2, &phi1).unwrap().expect("spike");
        assert!((spike.time_s - 12.0).abs() < 0.1, "{spike:?}");
        assert!(spike.peak_z >= 4.0);
        assert!(spike.width_s >= 0.1);
    }

    #[test]
    fn concurrent_phi1_excursion_vetoes_spike() {
        let step = |t: f64| if t >= 12.0 { 5.0 } else { 0.0 };
        let mk = |seed| {
            let mut v: Vec<f64> = (0..2400).map(|b| step(b as f64 / RATE)).collect();
            for (x, n) in v.iter_mut().zip(noise(seed, 2400)) {
                *x += 0.01 * n;
            }
            normalize_phase(&PhaseSeries::new(v, RATE, 0.0).unwrap(), 800).unwrap()
        };
        assert_eq!(detect_spike(&mk(1), &mk(2)).unwrap(), None);
    }

    #[test]
    fn stationary_signals_have_no_spike() {
        for seed in 0..20 {
            let z = normalize_phase(&PhaseSeries::new(noise(seed, 2400), RATE, 0.0).unwrap(), 800)
                .unwrap();
            let b = normalize_phase(&series(|t| (2.0 * PI * 0.3 * t).sin(), 30.0), 800).unwrap();
            assert_eq!(detect_spike(&z, &b).unwrap(), None);
        }
    }

    #[test]
    fn decision_table_examples() {
        let spike = SpikeEvent {
            time_s: 1.0,
            peak_z: 6.0,
            width_s: 0.5,
        };
        let d = classify_window(evidence(true, 1.0, true), evidence(false, 0.0, false), None, 0.0);
        assert_eq!(d.label, ActivityLabel::Breathing);
        let d = classify_window(evidence(true, 6.0, true), evidence(true, 6.0, true), None, 0.0);
        assert_eq!(d.label, ActivityLabel::Tremor);
        let d = classify_window(
            evidence(false, 0.0, true),
            evidence(false, 0.0, true),
            Some(spike),
            0.0,
        );
        assert_eq!(d.label, ActivityLabel::Fall);
        let d = classify_window(evidence(false, 0.0, true), evidence(false, 0.0, true), None, 0.0);
        assert_eq!(d.label, ActivityLabel::RandomMotion);
        let d = classify_window(evidence(false, 0.0, false), evidence(false, 0.0, false), None, 0.0);
        assert_eq!(d.label, ActivityLabel::NoActivity);
    }
}
