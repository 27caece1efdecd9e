//! Cross-ambiguity diagnostics over a delay/Doppler grid.
//!
//! ```text
//! χ[τ, f] = Σ_{n=0}^{N-1} r[n] · conj(s[n+τ]) · exp(+i·2π·f_cycles·n/N),   f_cycles = f_hz·N/fs
//! ```
//!
//! `N = len − τ_max` so every delay row integrates the same number of
//! samples. The exponent sign is chosen so that a surveillance channel
//! carrying `exp(+i·2π·f₀·n/fs)` peaks at `+f₀`.
//!
//! When the Doppler grid is uniform and `fs / Δf` is an integer no smaller
//! than `N`, each delay row is one zero-padded FFT; otherwise the grid is
//! evaluated directly.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::iq::IqBuffer;

/// Doppler resolution `fs / N` of an `N`-sample integration.
pub fn doppler_resolution_hz(sample_rate_hz: f64, n_samples: usize) -> f64 {
    sample_rate_hz / n_samples as f64
}

/// Uniform grid `−max..=max` in steps of `step`.
pub fn doppler_grid(max_hz: f64, step_hz: f64) -> Vec<f64> {
    let k = (max_hz / step_hz).round() as i64;
    (-k..=k).map(|i| i as f64 * step_hz).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CafMethod {
    Auto,
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CafMap {
    /// `|χ|` indexed `[delay][doppler]`.
    pub values: Vec<Vec<f64>>,
    pub delay_axis: Vec<usize>,
    pub doppler_axis: Vec<f64>,
    pub n_samples: usize,
}

impl CafMap {
    /// `(delay_samples, doppler_hz, |χ|)` of the strongest cell.
    pub fn peak(&self) -> (usize, f64, f64) {
        let mut best = (0, 0.0, f64::NEG_INFINITY);
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (self.delay_axis[i], self.doppler_axis[j], v);
                }
            }
        }
        best
    }

    /// Write `<stem>.csv` (matrix, one delay per row) plus
    /// `<stem>.delay.csv` and `<stem>.doppler.csv` axis files.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let mut m = String::new();
        for row in &self.values {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(m, "{}", line.join(","));
        }
        fs::write(dir.join(format!("{stem}.csv")), m)?;
        let mut d = String::from("delay_samples\n");
        for t in &self.delay_axis {
            let _ = writeln!(d, "{t}");
        }
        fs::write(dir.join(format!("{stem}.delay.csv")), d)?;
        let mut f = String::from("doppler_hz\n");
        for v in &self.doppler_axis {
            let _ = writeln!(f, "{v}");
        }
        fs::write(dir.join(format!("{stem}.doppler.csv")), f)?;
        Ok(())
    }
}

pub fn compute_caf(
    reference: &IqBuffer,
    surv: &IqBuffer,
    tau_max: usize,
    doppler_grid: &[f64],
) -> Result<CafMap> {
    compute_caf_with(reference, surv, tau_max, doppler_grid, CafMethod::Auto)
}

pub fn compute_caf_with(
    reference: &IqBuffer,
    surv: &IqBuffer,
    tau_max: usize,
    doppler_grid: &[f64],
    method: CafMethod,
) -> Result<CafMap> {
    if reference.sample_rate_hz() != surv.sample_rate_hz() {
        return Err(Error::RateMismatch(reference.sample_rate_hz(), surv.sample_rate_hz()));
    }
    if reference.len() != surv.len() {
        return Err(invalid("reference and surveillance must be aligned (equal length)"));
    }
    if tau_max >= reference.len() {
        return Err(invalid(format!(
            "tau_max {tau_max} must be below the buffer length {}",
            reference.len()
        )));
    }
    if doppler_grid.is_empty() || doppler_grid.iter().any(|f| !f.is_finite()) {
        return Err(invalid("doppler grid must be non-empty and finite"));
    }
    let fs = reference.sample_rate_hz();
    let n = reference.len() - tau_max;
    let r = reference.samples();
    let s = surv.samples();

    let fft_len = match method {
        CafMethod::Auto => fft_grid_len(doppler_grid, fs, n),
        CafMethod::Direct => None,
    };
    let values = (0..=tau_max)
        .into_par_iter()
        .map(|tau| {
            let z: Vec<Complex64> = (0..n).map(|i| r[i] * s[i + tau].conj()).collect();
            match fft_len {
                Some((len, step)) => row_fft(&z, len, step, doppler_grid),
                None => row_direct(&z, fs, doppler_grid),
            }
        })
        .collect();
    Ok(CafMap {
        values,
        delay_axis: (0..=tau_max).collect(),
        doppler_axis: doppler_grid.to_vec(),
        n_samples: n,
    })
}

/// FFT length `fs/Δf` when the grid sits exactly on its bins.
fn fft_grid_len(grid: &[f64], fs: f64, n: usize) -> Option<(usize, f64)> {
    if grid.len() < 2 {
        return None;
    }
    let step = grid[1] - grid[0];
    if !(step > 0.0) {
        return None;
    }
    let uniform = grid
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.max(1.0));
    let len_f = fs / step;
    let len = len_f.round();
    let on_bins = grid.iter().all(|f| ((f / step) - (f / step).round()).abs() < 1e-6);
    if uniform && on_bins && (len_f - len).abs() < 1e-9 * len_f && len as usize >= n {
        Some((len as usize, step))
    } else {
        None
    }
}

fn row_fft(z: &[Complex64], len: usize, step: f64, grid: &[f64]) -> Vec<f64> {
    // Σ z[n]·e^{+iωn} = conj(FFT(conj z))
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (b, v) in buf.iter_mut().zip(z) {
        *b = v.conj();
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    grid.iter()
        .map(|f| {
            let k = (f / step).round() as i64;
            buf[k.rem_euclid(len as i64) as usize].norm()
        })
        .collect()
}

fn row_direct(z: &[Complex64], fs: f64, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&f| {
            let w = 2.0 * PI * f / fs;
            z.iter()
                .enumerate()
                .map(|(i, v)| v * Complex64::from_polar(1.0, w * i as f64))
                .sum::<Complex64>()
                .norm()
        })
        .collect()
}
