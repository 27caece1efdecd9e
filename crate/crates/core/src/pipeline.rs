//! End-to-end analysis of one capture: phase extraction, normalization,
//! windowed classification and per-label estimates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::{
    classify_window, detect_spike_with, periodicity_test_with, ActivityDecision, ActivityLabel,
    ClassifierConfig,
};
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    breathing_rate_with, classify_tremor_with, report_fall, BreathingEstimate, EstimatorConfig,
    FallReport, FallReporter, TremorClass,
};
use crate::iq::IqBuffer;
use crate::phase::{extract_phase, leakage_correct, normalize_phase, BatchConfig, PhaseSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Batch length is `fs / batches_per_second` samples (rounded up to even).
    pub batches_per_second: f64,
    pub overlap_frac: f64,
    pub lag_samples: usize,
    pub normalization_window_s: f64,
    pub classifier: ClassifierConfig,
    pub estimator: EstimatorConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            batches_per_second: 40.0,
            overlap_frac: 0.5,
            lag_samples: 0,
            normalization_window_s: 10.0,
            classifier: ClassifierConfig::default(),
            estimator: EstimatorConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn batch_config(&self, sample_rate_hz: f64) -> Result<BatchConfig> {
        if !(self.batches_per_second > 0.0) {
            return Err(invalid("batches_per_second must be positive"));
        }
        let len = (sample_rate_hz / self.batches_per_second).round().max(2.0) as usize;
        let cfg = BatchConfig {
            batch_len: len + len % 2,
            overlap_frac: self.overlap_frac,
            lag_samples: self.lag_samples,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.normalization_window_s > 0.0) {
            return Err(invalid("normalization_window_s must be positive"));
        }
        let c = &self.classifier;
        if !(c.window_s > 0.0 && c.hop_s > 0.0) {
            return Err(invalid("classifier window and hop must be positive"));
        }
        if !(0.0..=1.0).contains(&c.periodicity_threshold) {
            return Err(invalid("periodicity_threshold must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimate {
    Breathing(BreathingEstimate),
    Tremor(TremorClass),
    Fall(FallReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub decision: ActivityDecision,
    pub estimate: Option<Estimate>,
    /// Why the label's estimator produced nothing, if it did not.
    pub estimate_error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PhaseSet {
    pub phi1: PhaseSeries,
    /// Leakage-corrected surveillance-2 phase.
    pub phi2c: PhaseSeries,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub windows: Vec<WindowResult>,
    pub falls: Vec<FallReport>,
    pub series: PhaseSet,
}

impl Analysis {
    /// Capture-level label: `Fall` if any fall was reported, otherwise the
    /// most frequent window label, ties going to the more specific label.
    pub fn overall_label(&self) -> ActivityLabel {
        if !self.falls.is_empty() {
            return ActivityLabel::Fall;
        }
        let mut counts: BTreeMap<ActivityLabel, usize> = BTreeMap::new();
        for w in &self.windows {
            *counts.entry(w.decision.label).or_default() += 1;
        }
        counts
            .into_iter()
            .filter(|(l, _)| *l != ActivityLabel::Fall)
            .max_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(l, _)| l)
            .unwrap_or(ActivityLabel::NoActivity)
    }

    pub fn breathing_estimates(&self) -> Vec<BreathingEstimate> {
        self.windows
            .iter()
            .filter_map(|w| match &w.estimate {
                Some(Estimate::Breathing(b)) => Some(*b),
                _ => None,
            })
            .collect()
    }

    pub fn tremor_estimates(&self) -> Vec<TremorClass> {
        self.windows
            .iter()
            .filter_map(|w| match &w.estimate {
                Some(Estimate::Tremor(t)) => Some(*t),
                _ => None,
            })
            .collect()
    }
}

/// Normalized `φ₁` and leakage-corrected `φ₂′` of a capture.
pub fn extract_phase_set(
    reference: &IqBuffer,
    surv1: &IqBuffer,
    surv2: &IqBuffer,
    cfg: &PipelineConfig,
) -> Result<PhaseSet> {
    cfg.validate()?;
    let fs = reference.sample_rate_hz();
    for s in [surv1, surv2] {
        if s.sample_rate_hz() != fs {
            return Err(Error::RateMismatch(fs, s.sample_rate_hz()));
        }
    }
    let bcfg = cfg.batch_config(fs)?;
    let raw1 = extract_phase(reference, surv1, &bcfg)?;
    let raw2 = extract_phase(reference, surv2, &bcfg)?;
    let raw2c = leakage_correct(&raw1, &raw2)?;
    let window = (cfg.normalization_window_s * raw1.batch_rate_hz()).round() as usize;
    Ok(PhaseSet {
        phi1: normalize_phase(&raw1, window)?,
        phi2c: normalize_phase(&raw2c, window)?,
    })
}

/// Start indices of the classification windows that fit after warm-up.
pub fn window_starts(series_len: usize, warmup_len: usize, rate_hz: f64, cfg: &ClassifierConfig) -> Vec<usize> {
    let len = (cfg.window_s * rate_hz).round() as usize;
    let hop = ((cfg.hop_s * rate_hz).round() as usize).max(1);
    let mut out = Vec::new();
    let mut w0 = warmup_len;
    while w0 + len <= series_len {
        out.push(w0);
        w0 += hop;
    }
    out
}

/// Classify one window and run the estimator that matches its label.
pub fn analyze_window(phi1: &PhaseSeries, phi2c: &PhaseSeries, cfg: &PipelineConfig) -> Result<WindowResult> {
    let c = &cfg.classifier;
    let e1 = periodicity_test_with(phi1, c.motion_band_hz, c)?;
    let e2 = periodicity_test_with(phi2c, c.motion_band_hz, c)?;
    let spike = detect_spike_with(phi2c, phi1, c)?;
    let start = phi1.start_time_s();
    let mut decision = classify_window(e1, e2, spike, start);
    let (estimate, estimate_error) = match decision.label {
        ActivityLabel::Breathing => match breathing_rate_with(phi1, &cfg.estimator) {
            Ok(b) => (Some(Estimate::Breathing(b)), None),
            Err(e) => (None, Some(e.to_string())),
        },
        ActivityLabel::Tremor => match classify_tremor_with(phi1, phi2c, &cfg.estimator) {
            Ok(t) => (Some(Estimate::Tremor(t)), None),
            Err(e @ Error::OutOfBand { .. }) => {
                decision.label = ActivityLabel::RandomMotion;
                (None, Some(e.to_string()))
            }
            Err(e) => (None, Some(e.to_string())),
        },
        ActivityLabel::Fall => {
            let s = spike.expect("fall label implies a spike");
            (Some(Estimate::Fall(report_fall(&s, start))), None)
        }
        _ => (None, None),
    };
    Ok(WindowResult {
        decision,
        estimate,
        estimate_error,
    })
}

pub fn analyze(
    reference: &IqBuffer,
    surv1: &IqBuffer,
    surv2: &IqBuffer,
    cfg: &PipelineConfig,
) -> Result<Analysis> {
    let series = extract_phase_set(reference, surv1, surv2, cfg)?;
    analyze_series(series, cfg)
}

pub fn analyze_series(series: PhaseSet, cfg: &PipelineConfig) -> Result<Analysis> {
    let PhaseSet { phi1, phi2c } = &series;
    let rate = phi1.batch_rate_hz();
    let warmup = phi1.warmup_len().max(phi2c.warmup_len());
    let win = (cfg.classifier.window_s * rate).round() as usize;
    let starts = window_starts(phi1.len(), warmup, rate, &cfg.classifier);
    if starts.is_empty() {
        return Err(Error::InsufficientWindow {
            needed_s: cfg.classifier.window_s + warmup as f64 / rate,
            got_s: phi1.span_s(),
        });
    }
    let mut windows = Vec::with_capacity(starts.len());
    let mut reporter = FallReporter::new(cfg.estimator.fall_merge_radius_s);
    for w0 in starts {
        let r = analyze_window(&phi1.slice(w0..w0 + win), &phi2c.slice(w0..w0 + win), cfg)?;
        if let Some(Estimate::Fall(f)) = &r.estimate {
            reporter.add(*f);
        }
        windows.push(r);
    }
    Ok(Analysis {
        windows,
        falls: reporter.reports(),
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_config_matches_rate() {
        let b = PipelineConfig::default().batch_config(10_000.0).unwrap();
        assert_eq!(b.batch_len, 250);
        assert_eq!(b.hop(), 125);
    }

    #[test]
    fn window_starts_respect_warmup_and_length() {
        let c = ClassifierConfig::default();
        // 36 s at 80/s with 10 s warm-up: windows at 10, 12, 14, 16 s
        assert_eq!(window_starts(2879, 799, 80.0, &c), vec![799, 959, 1119, 1279]);
        assert!(window_starts(1000, 799, 80.0, &c).is_empty());
    }
}
