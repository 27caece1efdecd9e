//! Complex baseband buffers and the raw IQ capture format.
//!
//! Captures are stored as little-endian interleaved `f32` pairs `(I, Q)` with
//! no header. The sample rate and carrier live in a TOML sidecar:
//!
//! ```toml
//! sample_rate_hz = 10000.0
//! carrier_hz = 2400000000.0
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniformly sampled complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct IqBuffer {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl IqBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if let Some(i) = samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean of `|x|²` over the buffer; 0 for an empty buffer.
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }

    /// Round every sample through `f32`, i.e. what survives a write/read of
    /// the capture format.
    pub fn quantized_f32(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|z| Complex64::new(z.re as f32 as f64, z.im as f32 as f64))
            .collect();
        Self {
            samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

pub(crate) fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Contents of the capture sidecar file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureMetadata {
    pub sample_rate_hz: f64,
    pub carrier_hz: f64,
}

impl CaptureMetadata {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(invalid("metadata sample_rate_hz must be positive"));
        }
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return Err(invalid("metadata carrier_hz must be positive"));
        }
        Ok(())
    }
}

pub fn write_iq(path: &Path, buf: &IqBuffer) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for z in buf.samples() {
        out.write_all(&(z.re as f32).to_le_bytes())?;
        out.write_all(&(z.im as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_iq(path: &Path, sample_rate_hz: f64) -> Result<IqBuffer> {
    let bytes = fs::read(path)?;
    let malformed = |reason: String| Error::MalformedFile {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.is_empty() {
        return Err(malformed("empty capture".into()));
    }
    if bytes.len() % 8 != 0 {
        return Err(malformed(format!(
            "length {} is not a whole number of f32 I/Q pairs",
            bytes.len()
        )));
    }
    let mut samples = Vec::with_capacity(bytes.len() / 8);
    for (i, pair) in bytes.chunks_exact(8).enumerate() {
        let re = f32::from_le_bytes([pair[0], pair[1], pair[2], pair[3]]);
        let im = f32::from_le_bytes([pair[4], pair[5], pair[6], pair[7]]);
        if !(re.is_finite() && im.is_finite()) {
            return Err(malformed(format!("non-finite sample at index {i}")));
        }
        samples.push(Complex64::new(re as f64, im as f64));
    }
    IqBuffer::new(samples, sample_rate_hz)
}

pub fn write_metadata(path: &Path, meta: &CaptureMetadata) -> Result<()> {
    let text = toml::to_string(meta).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<CaptureMetadata> {
    let text = fs::read_to_string(path)?;
    let meta: CaptureMetadata = toml::from_str(&text).map_err(|e| Error::MalformedFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    meta.validate().map_err(|e| Error::MalformedFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(meta)
}
