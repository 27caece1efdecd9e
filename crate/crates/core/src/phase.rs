//! Batched cross-correlation phase extraction.
//!
//! Each batch `b` correlates `batch_len` reference samples against the
//! conjugated surveillance samples,
//!
//! ```text
//! y[b] = Σ_{n=0}^{N_b-1} r[i_b + n − τ] · conj(s[i_b + n]),   i_b = τ + b·hop
//! ```
//!
//! and the batch phase `arg y[b]` is unwrapped into a [`PhaseSeries`]. The
//! series can then be z-scored over a trailing window and corrected for x-y
//! plane leakage into the tilted antenna.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::iq::IqBuffer;

/// Standard deviation below which a normalization window counts as constant.
pub const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub batch_len: usize,
    pub overlap_frac: f64,
    #[serde(default)]
    pub lag_samples: usize,
}

impl BatchConfig {
    /// 25 ms batches with 50% overlap (80 batches/s).
    pub fn for_sample_rate(sample_rate_hz: f64) -> Self {
        let len = (sample_rate_hz / 40.0).round().max(2.0) as usize;
        Self {
            batch_len: len + len % 2,
            overlap_frac: 0.5,
            lag_samples: 0,
        }
    }

    pub fn hop(&self) -> usize {
        (self.batch_len as f64 * (1.0 - self.overlap_frac)).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_len == 0 {
            return Err(invalid("batch_len must be positive"));
        }
        if !(0.0..1.0).contains(&self.overlap_frac) {
            return Err(invalid("overlap_frac must be in [0, 1)"));
        }
        if self.hop() == 0 {
            return Err(invalid("overlap leaves a zero hop"));
        }
        Ok(())
    }

    /// Number of full batches in a buffer of `len` samples.
    pub fn n_batches(&self, len: usize) -> usize {
        let need = self.lag_samples + self.batch_len;
        if len < need {
            0
        } else {
            (len - need) / self.hop() + 1
        }
    }

    pub fn batch_start(&self, b: usize) -> usize {
        self.lag_samples + b * self.hop()
    }
}

/// Per-batch status bits of a normalized series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchFlags {
    /// Normalization window shorter than `W` (prefix of the series).
    pub warmup: bool,
    /// Window standard deviation below [`DEGENERATE_EPS`]; value forced to 0.
    pub degenerate: bool,
}

impl BatchFlags {
    pub fn usable(&self) -> bool {
        !self.warmup && !self.degenerate
    }
}

/// Trailing-window statistics used to normalize one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub mean: f64,
    pub std: f64,
}

/// Real-valued phase per batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    values: Vec<f64>,
    batch_rate_hz: f64,
    start_time_s: f64,
    normalized: bool,
    flags: Vec<BatchFlags>,
    stats: Vec<WindowStats>,
}

impl PhaseSeries {
    /// An unnormalized series whose first batch is at `start_time_s`.
    pub fn new(values: Vec<f64>, batch_rate_hz: f64, start_time_s: f64) -> Result<Self> {
        if !(batch_rate_hz > 0.0 && batch_rate_hz.is_finite()) {
            return Err(invalid("batch rate must be positive"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("phase values must be finite"));
        }
        let flags = vec![BatchFlags::default(); values.len()];
        Ok(Self {
            values,
            batch_rate_hz,
            start_time_s,
            normalized: false,
            flags,
            stats: Vec::new(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flags(&self) -> &[BatchFlags] {
        &self.flags
    }

    /// `(μ_b, σ_b)` per batch; empty for unnormalized series.
    pub fn stats(&self) -> &[WindowStats] {
        &self.stats
    }

    pub fn batch_rate_hz(&self) -> f64 {
        self.batch_rate_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn span_s(&self) -> f64 {
        self.values.len() as f64 / self.batch_rate_hz
    }

    pub fn time_s(&self, b: usize) -> f64 {
        self.start_time_s + b as f64 / self.batch_rate_hz
    }

    /// Number of leading warm-up batches.
    pub fn warmup_len(&self) -> usize {
        self.flags.iter().take_while(|f| f.warmup).count()
    }

    /// Sub-series over `range`, keeping absolute timing.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            values: self.values[range.clone()].to_vec(),
            batch_rate_hz: self.batch_rate_hz,
            start_time_s: self.time_s(range.start),
            normalized: self.normalized,
            flags: self.flags[range.clone()].to_vec(),
            stats: if self.stats.is_empty() {
                Vec::new()
            } else {
                self.stats[range].to_vec()
            },
        }
    }

    /// Delimited text: `batch_index,time_s,value,degenerate_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("batch_index,time_s,value,degenerate_flag\n");
        for (b, (v, f)) in self.values.iter().zip(&self.flags).enumerate() {
            let _ = writeln!(out, "{b},{},{v},{}", self.time_s(b), u8::from(f.degenerate));
        }
        out
    }
}

fn correlate_batch(r: &[Complex64], s: &[Complex64]) -> Complex64 {
    // four independent accumulators so the loop vectorizes
    let mut acc = [Complex64::new(0.0, 0.0); 4];
    let mut rc = r.chunks_exact(4);
    let mut sc = s.chunks_exact(4);
    for (a, b) in (&mut rc).zip(&mut sc) {
        for j in 0..4 {
            acc[j] += a[j] * b[j].conj();
        }
    }
    let mut tail = Complex64::new(0.0, 0.0);
    for (a, b) in rc.remainder().iter().zip(sc.remainder()) {
        tail += a * b.conj();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Correlate every full batch of `reference` against `surv`.
///
/// The trailing partial batch is discarded. Batches are independent, so the
/// result does not depend on how rayon schedules them.
pub fn cross_correlate_batches(
    reference: &IqBuffer,
    surv: &IqBuffer,
    cfg: &BatchConfig,
) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if reference.sample_rate_hz() != surv.sample_rate_hz() {
        return Err(Error::RateMismatch(reference.sample_rate_hz(), surv.sample_rate_hz()));
    }
    let len = reference.len().min(surv.len());
    if len < cfg.batch_len + cfg.lag_samples {
        return Err(invalid(format!(
            "need at least {} samples, got {len}",
            cfg.batch_len + cfg.lag_samples
        )));
    }
    let r = reference.samples();
    let s = surv.samples();
    let n = cfg.batch_len;
    let y = (0..cfg.n_batches(len))
        .into_par_iter()
        .map(|b| {
            let start = cfg.batch_start(b);
            let rs = start - cfg.lag_samples;
            correlate_batch(&r[rs..rs + n], &s[start..start + n])
        })
        .collect();
    Ok(y)
}

/// Four-quadrant angle `atan2(Im, Re)`, 0 for an exact zero.
pub fn batch_angle(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.im.atan2(z.re)
    }
}

/// Remove ±2π jumps larger than π between consecutive samples.
pub fn unwrap_in_place(phase: &mut [f64]) {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut offset = 0.0;
    let mut prev = match phase.first() {
        Some(&p) => p,
        None => return,
    };
    for p in phase.iter_mut().skip(1) {
        let raw = *p;
        let d = raw - prev;
        if d > std::f64::consts::PI {
            offset -= two_pi * ((d + std::f64::consts::PI) / two_pi).floor();
        } else if d < -std::f64::consts::PI {
            offset += two_pi * ((-d + std::f64::consts::PI) / two_pi).floor();
        }
        prev = raw;
        *p = raw + offset;
    }
}

/// Unwrapped batch phase of a correlation series.
pub fn batch_phase(y: &[Complex64], batch_rate_hz: f64, start_time_s: f64) -> Result<PhaseSeries> {
    if y.is_empty() {
        return Err(invalid("empty correlation series"));
    }
    let mut phase: Vec<f64> = y.iter().map(|&z| batch_angle(z)).collect();
    unwrap_in_place(&mut phase);
    PhaseSeries::new(phase, batch_rate_hz, start_time_s)
}

/// Z-score every batch against its trailing window of `window_len` batches.
///
/// Batches with fewer than `window_len` predecessors use the history that
/// exists and are flagged as warm-up. Windows whose population standard
/// deviation is below [`DEGENERATE_EPS`] produce 0 and are flagged degenerate.
pub fn normalize_phase(phi: &PhaseSeries, window_len: usize) -> Result<PhaseSeries> {
    if window_len < 2 {
        return Err(invalid("normalization window must be at least 2 batches"));
    }
    let v = &phi.values;
    let (values, rest): (Vec<f64>, Vec<(BatchFlags, WindowStats)>) = (0..v.len())
        .into_par_iter()
        .map(|b| {
            let lo = (b + 1).saturating_sub(window_len);
            let w = &v[lo..=b];
            let n = w.len() as f64;
            let mean = w.iter().sum::<f64>() / n;
            let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            let degenerate = std < DEGENERATE_EPS;
            let z = if degenerate { 0.0 } else { (v[b] - mean) / std };
            let flags = BatchFlags {
                warmup: b + 1 < window_len,
                degenerate,
            };
            (z, (flags, WindowStats { mean, std }))
        })
        .unzip();
    let (flags, stats) = rest.into_iter().unzip();
    Ok(PhaseSeries {
        values,
        batch_rate_hz: phi.batch_rate_hz,
        start_time_s: phi.start_time_s,
        normalized: true,
        flags,
        stats,
    })
}

/// `φ₂′ = φ₂ − φ₁`: strip the x-y plane phase that the tilted antenna also sees.
pub fn leakage_correct(phi1: &PhaseSeries, phi2: &PhaseSeries) -> Result<PhaseSeries> {
    if phi1.len() != phi2.len() {
        return Err(invalid(format!(
            "length mismatch: {} vs {}",
            phi1.len(),
            phi2.len()
        )));
    }
    if phi1.batch_rate_hz != phi2.batch_rate_hz {
        return Err(Error::RateMismatch(phi1.batch_rate_hz, phi2.batch_rate_hz));
    }
    if phi1.normalized != phi2.normalized {
        return Err(invalid("cannot mix normalized and unnormalized series"));
    }
    let values = phi2
        .values
        .iter()
        .zip(&phi1.values)
        .map(|(a, b)| a - b)
        .collect();
    let flags = phi1
        .flags
        .iter()
        .zip(&phi2.flags)
        .map(|(a, b)| BatchFlags {
            warmup: a.warmup || b.warmup,
            degenerate: a.degenerate || b.degenerate,
        })
        .collect();
    Ok(PhaseSeries {
        values,
        batch_rate_hz: phi2.batch_rate_hz,
        start_time_s: phi2.start_time_s,
        normalized: phi2.normalized,
        flags,
        stats: Vec::new(),
    })
}

/// Raw phase of one surveillance channel: correlate, take angles, unwrap.
///
/// The time stamp of a batch is the centre of its surveillance samples.
pub fn extract_phase(reference: &IqBuffer, surv: &IqBuffer, cfg: &BatchConfig) -> Result<PhaseSeries> {
    let y = cross_correlate_batches(reference, surv, cfg)?;
    let fs = reference.sample_rate_hz();
    let rate = fs / cfg.hop() as f64;
    let t0 = (cfg.lag_samples as f64 + cfg.batch_len as f64 / 2.0) / fs;
    batch_phase(&y, rate, t0)
}
