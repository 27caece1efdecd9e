//! Synthetic reference and two-channel surveillance signals.
//!
//! The transmitted WiFi waveform is emulated by a seeded, band-limited complex
//! Gaussian sequence with unit power. A single reflector (the monitored
//! person) carries the phase `2π·m(t)/λ` of every active motion component,
//! projected onto each surveillance antenna: x-y plane motion is seen in full
//! by both antennas, x-z plane motion is scaled by `|sin θ|` of the antenna
//! elevation (0 for `surv1`, `√2/2` for the default `surv2` at `θ = −π/4`).
//!
//! ```text
//! ref[n]   = x[n + lag]
//! survc[n] = x[n] · (A·exp(i·φc(n/fs)) + clutter) + noisec[n]
//! φc(t)    = Σ_xy φ(t) + |sin θc| · Σ_xz φ(t)
//! ```

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::iq::{mean_power, IqBuffer};

pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;
pub const DEFAULT_CARRIER_HZ: f64 = 2.4e9;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 100_000.0;
pub const DEFAULT_SOURCE_BANDWIDTH: f64 = 0.8;

/// Physiological breathing band, inclusive.
pub const BREATHING_BAND_HZ: (f64, f64) = (0.2, 2.0);
/// Essential tremor band, inclusive.
pub const TREMOR_BAND_HZ: (f64, f64) = (4.0, 11.0);

const STREAM_SOURCE: u64 = 0;
const STREAM_NOISE_SURV1: u64 = 1;
const STREAM_NOISE_SURV2: u64 = 2;
const STREAM_LIMB: u64 = 7;

const LIMB_CONTROL_RATE_HZ: f64 = 50.0;
const LIMB_CUTOFF_HZ: f64 = 3.0;
const LIMB_LEAK_S: f64 = 0.2;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn wavelength_m(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT_MPS / carrier_hz
}

/// Doppler shift `f_o · (v / c) · cos θ` observed for relative speed `v`.
pub fn doppler_shift_hz(carrier_hz: f64, speed_mps: f64, angle_rad: f64) -> f64 {
    carrier_hz * (speed_mps / SPEED_OF_LIGHT_MPS) * angle_rad.cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Xy,
    Xz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Breathing,
    Tremor,
    Fall,
    RandomLimb,
}

/// One body motion confined to a single plane.
///
/// `displacement_amp_m` is the peak displacement for sinusoidal kinds and the
/// RMS displacement for [`MotionKind::RandomLimb`]. `seed` only drives the
/// random-limb walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionComponent {
    pub plane: Plane,
    pub kind: MotionKind,
    #[serde(default)]
    pub fundamental_hz: f64,
    #[serde(default)]
    pub displacement_amp_m: f64,
    #[serde(default)]
    pub onset_s: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub fall_displacement_m: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MotionComponent {
    pub fn breathing(rate_hz: f64, amp_m: f64, onset_s: f64, duration_s: f64) -> Self {
        Self {
            plane: Plane::Xy,
            kind: MotionKind::Breathing,
            fundamental_hz: rate_hz,
            displacement_amp_m: amp_m,
            onset_s,
            duration_s,
            fall_displacement_m: 0.0,
            seed: 0,
        }
    }

    /// Tremor shows up in both planes at the same frequency.
    pub fn tremor_pair(freq_hz: f64, amp_m: f64, onset_s: f64, duration_s: f64) -> [Self; 2] {
        let xy = Self {
            plane: Plane::Xy,
            kind: MotionKind::Tremor,
            fundamental_hz: freq_hz,
            displacement_amp_m: amp_m,
            onset_s,
            duration_s,
            fall_displacement_m: 0.0,
            seed: 0,
        };
        let xz = Self {
            plane: Plane::Xz,
            ..xy.clone()
        };
        [xy, xz]
    }

    pub fn fall(onset_s: f64, displacement_m: f64, ramp_s: f64) -> Self {
        Self {
            plane: Plane::Xz,
            kind: MotionKind::Fall,
            fundamental_hz: 0.0,
            displacement_amp_m: 0.0,
            onset_s,
            duration_s: ramp_s,
            fall_displacement_m: displacement_m,
            seed: 0,
        }
    }

    pub fn random_limb(plane: Plane, rms_m: f64, onset_s: f64, duration_s: f64, seed: u64) -> Self {
        Self {
            plane,
            kind: MotionKind::RandomLimb,
            fundamental_hz: 0.0,
            displacement_amp_m: rms_m,
            onset_s,
            duration_s,
            fall_displacement_m: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.fundamental_hz,
            self.displacement_amp_m,
            self.onset_s,
            self.duration_s,
            self.fall_displacement_m,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("motion parameters must be finite"));
        }
        if self.fundamental_hz < 0.0 || self.displacement_amp_m < 0.0 || self.fall_displacement_m < 0.0 {
            return Err(invalid("motion frequency and amplitudes must be non-negative"));
        }
        if self.onset_s < 0.0 {
            return Err(invalid("motion onset must be non-negative"));
        }
        if self.duration_s <= 0.0 {
            return Err(invalid("motion duration must be positive"));
        }
        match self.kind {
            MotionKind::Breathing => {
                if self.plane != Plane::Xy {
                    return Err(invalid("breathing moves in the x-y plane only"));
                }
                let (lo, hi) = BREATHING_BAND_HZ;
                if !(lo..=hi).contains(&self.fundamental_hz) {
                    return Err(invalid(format!(
                        "breathing rate {} Hz outside [{lo}, {hi}] Hz",
                        self.fundamental_hz
                    )));
                }
            }
            MotionKind::Tremor => {
                let (lo, hi) = TREMOR_BAND_HZ;
                if !(lo..=hi).contains(&self.fundamental_hz) {
                    return Err(invalid(format!(
                        "tremor frequency {} Hz outside [{lo}, {hi}] Hz",
                        self.fundamental_hz
                    )));
                }
            }
            MotionKind::Fall => {
                if self.plane != Plane::Xz {
                    return Err(invalid("falls move in the x-z plane only"));
                }
                if self.fundamental_hz != 0.0 {
                    return Err(invalid("falls are aperiodic (fundamental_hz = 0)"));
                }
            }
            MotionKind::RandomLimb => {}
        }
        Ok(())
    }

    pub fn end_s(&self) -> f64 {
        self.onset_s + self.duration_s
    }

    /// Precompute the displacement waveform (needed for the seeded random walk).
    pub fn waveform(&self) -> MotionWaveform {
        let shape = match self.kind {
            MotionKind::Breathing | MotionKind::Tremor => Shape::Sine {
                amp_m: self.displacement_amp_m,
                freq_hz: self.fundamental_hz,
            },
            MotionKind::Fall => Shape::Ramp {
                displacement_m: self.fall_displacement_m,
            },
            MotionKind::RandomLimb => Shape::Walk(limb_walk(
                self.seed,
                self.duration_s,
                self.displacement_amp_m,
            )),
        };
        MotionWaveform {
            onset_s: self.onset_s,
            duration_s: self.duration_s,
            shape,
        }
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Sine { amp_m: f64, freq_hz: f64 },
    Ramp { displacement_m: f64 },
    Walk(Vec<f64>),
}

/// Displacement `m(t)` of one motion component.
#[derive(Debug, Clone)]
pub struct MotionWaveform {
    onset_s: f64,
    duration_s: f64,
    shape: Shape,
}

impl MotionWaveform {
    pub fn displacement_m(&self, t_s: f64) -> f64 {
        let dt = t_s - self.onset_s;
        if dt < 0.0 {
            return 0.0;
        }
        let active = dt <= self.duration_s;
        match &self.shape {
            Shape::Sine { amp_m, freq_hz } if active => amp_m * (2.0 * PI * freq_hz * dt).sin(),
            // raised-cosine ramp; the body stays down afterwards
            Shape::Ramp { displacement_m } => {
                if active {
                    displacement_m * 0.5 * (1.0 - (PI * dt / self.duration_s).cos())
                } else {
                    *displacement_m
                }
            }
            Shape::Walk(grid) if active => {
                let x = dt * LIMB_CONTROL_RATE_HZ;
                let i = x.floor() as usize;
                if i + 1 >= grid.len() {
                    return *grid.last().unwrap_or(&0.0);
                }
                let frac = x - i as f64;
                grid[i] * (1.0 - frac) + grid[i + 1] * frac
            }
            _ => 0.0,
        }
    }

    pub fn phase_rad(&self, t_s: f64, wavelength_m: f64) -> f64 {
        2.0 * PI * self.displacement_m(t_s) / wavelength_m
    }
}

/// Leaky Gaussian walk on a 50 Hz control grid, zero-phase low-passed at
/// 3 Hz, starting at rest and scaled to the requested RMS displacement.
fn limb_walk(seed: u64, duration_s: f64, rms_m: f64) -> Vec<f64> {
    let n = (duration_s * LIMB_CONTROL_RATE_HZ).ceil() as usize + 2;
    let mut rng = stream_rng(seed, STREAM_LIMB);
    let dt = 1.0 / LIMB_CONTROL_RATE_HZ;
    let leak = (-dt / LIMB_LEAK_S).exp();
    let mut walk = Vec::with_capacity(n);
    let mut w = 0.0;
    for _ in 0..n {
        let step: f64 = rng.sample(StandardNormal);
        w = leak * w + step;
        walk.push(w);
    }
    let alpha = 1.0 - (-2.0 * PI * LIMB_CUTOFF_HZ * dt).exp();
    let mut y = 0.0;
    for v in walk.iter_mut() {
        y += alpha * (*v - y);
        *v = y;
    }
    y = walk[n - 1];
    for v in walk.iter_mut().rev() {
        y += alpha * (*v - y);
        *v = y;
    }
    let start = walk[0];
    walk.iter_mut().for_each(|v| *v -= start);
    let rms = (walk.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        let k = rms_m / rms;
        walk.iter_mut().for_each(|v| *v *= k);
    }
    walk
}

/// Phase `2π·m(t)/λ` injected by `motion` at time `t_s`.
pub fn motion_phase(motion: &MotionComponent, t_s: f64, wavelength_m: f64) -> Result<f64> {
    if !(wavelength_m > 0.0) {
        return Err(invalid(format!("wavelength must be positive, got {wavelength_m}")));
    }
    Ok(motion.waveform().phase_rad(t_s, wavelength_m))
}

/// Pointing of a surveillance antenna (elevation `theta` against the x-y plane).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaGeometry {
    pub theta_rad: f64,
    pub phi_rad: f64,
}

impl AntennaGeometry {
    pub fn surv1() -> Self {
        Self {
            theta_rad: 0.0,
            phi_rad: -std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn surv2() -> Self {
        Self {
            theta_rad: -FRAC_PI_4,
            phi_rad: -std::f64::consts::FRAC_PI_2,
        }
    }

    /// Fraction of x-z plane displacement seen along this antenna's boresight.
    pub fn xz_projection(&self) -> f64 {
        self.theta_rad.sin().abs()
    }
}

fn default_surv1() -> AntennaGeometry {
    AntennaGeometry::surv1()
}
fn default_surv2() -> AntennaGeometry {
    AntennaGeometry::surv2()
}
fn default_carrier() -> f64 {
    DEFAULT_CARRIER_HZ
}
fn default_sample_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}
fn default_one() -> f64 {
    1.0
}
fn default_bandwidth() -> f64 {
    DEFAULT_SOURCE_BANDWIDTH
}

/// Declarative description of one synthetic trial.
///
/// `snr_db` is measured against the motion-modulated target component
/// (power `target_amp²`); `None` means noiseless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub duration_s: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    #[serde(default)]
    pub motions: Vec<MotionComponent>,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub clutter_amp: f64,
    #[serde(default)]
    pub lag_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub target_amp: f64,
    #[serde(default = "default_bandwidth")]
    pub source_bandwidth: f64,
    #[serde(default = "default_surv1")]
    pub surv1: AntennaGeometry,
    #[serde(default = "default_surv2")]
    pub surv2: AntennaGeometry,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            duration_s: 36.0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            carrier_hz: DEFAULT_CARRIER_HZ,
            motions: Vec::new(),
            snr_db: None,
            clutter_amp: 0.0,
            lag_samples: 0,
            seed: 0,
            target_amp: 1.0,
            source_bandwidth: DEFAULT_SOURCE_BANDWIDTH,
            surv1: AntennaGeometry::surv1(),
            surv2: AntennaGeometry::surv2(),
        }
    }
}

impl ScenarioSpec {
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn wavelength_m(&self) -> f64 {
        wavelength_m(self.carrier_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid("duration_s must be positive"));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(invalid("sample_rate_hz must be positive"));
        }
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return Err(invalid("carrier_hz must be positive"));
        }
        if self.n_samples() == 0 {
            return Err(invalid("scenario contains no samples"));
        }
        if !(self.clutter_amp >= 0.0 && self.clutter_amp.is_finite()) {
            return Err(invalid("clutter_amp must be non-negative"));
        }
        if !(self.target_amp > 0.0 && self.target_amp.is_finite()) {
            return Err(invalid("target_amp must be positive"));
        }
        if !(self.source_bandwidth > 0.0 && self.source_bandwidth <= 1.0) {
            return Err(invalid("source_bandwidth must be in (0, 1]"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(invalid("snr_db must be finite (omit it for a noiseless scenario)"));
            }
        }
        for m in &self.motions {
            m.validate()?;
        }
        for m in self.motions.iter().filter(|m| m.kind == MotionKind::Tremor) {
            let paired = self.motions.iter().any(|o| {
                o.kind == MotionKind::Tremor
                    && o.plane != m.plane
                    && o.fundamental_hz == m.fundamental_hz
            });
            if !paired {
                return Err(invalid(format!(
                    "tremor at {} Hz needs a partner in the other plane",
                    m.fundamental_hz
                )));
            }
        }
        Ok(())
    }

    pub fn noise_power(&self) -> Option<f64> {
        self.snr_db
            .map(|snr| self.target_amp * self.target_amp * 10f64.powf(-snr / 10.0))
    }
}

/// What the simulator actually injected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub motions: Vec<MotionComponent>,
    pub duration_s: f64,
    /// Power of the motion-modulated target component.
    pub motion_power: f64,
    /// Nominal per-channel noise power (0 when noiseless).
    pub noise_power: f64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub reference: IqBuffer,
    pub surv1: IqBuffer,
    pub surv2: IqBuffer,
    pub truth: GroundTruth,
}

/// Seeded wideband source with 80% fractional bandwidth and unit power.
pub fn synth_source(n_samples: usize, sample_rate_hz: f64, seed: u64) -> Result<IqBuffer> {
    synth_source_band_limited(n_samples, sample_rate_hz, seed, DEFAULT_SOURCE_BANDWIDTH)
}

/// Complex Gaussian sequence brick-wall filtered to `|f| ≤ bandwidth · fs/2`,
/// scaled so that the mean power is exactly 1.
pub fn synth_source_band_limited(
    n_samples: usize,
    sample_rate_hz: f64,
    seed: u64,
    bandwidth: f64,
) -> Result<IqBuffer> {
    if n_samples == 0 {
        return Err(invalid("n_samples must be positive"));
    }
    if !(bandwidth > 0.0 && bandwidth <= 1.0) {
        return Err(invalid("bandwidth must be in (0, 1]"));
    }
    let mut rng = stream_rng(seed, STREAM_SOURCE);
    let mut x: Vec<Complex64> = (0..n_samples)
        .map(|_| complex_normal(&mut rng, 1.0))
        .collect();
    if bandwidth < 1.0 && n_samples > 1 {
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n_samples).process(&mut x);
        let cutoff = bandwidth * n_samples as f64 / 2.0;
        for (k, v) in x.iter_mut().enumerate() {
            let f = if k <= n_samples / 2 {
                k as f64
            } else {
                n_samples as f64 - k as f64
            };
            if f > cutoff {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        planner.plan_fft_inverse(n_samples).process(&mut x);
    }
    let p = mean_power(&x);
    if p > 0.0 {
        let k = 1.0 / p.sqrt();
        x.iter_mut().for_each(|v| *v *= k);
    }
    IqBuffer::new(x, sample_rate_hz)
}

fn complex_normal<R: Rng>(rng: &mut R, power: f64) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Synthesize the reference and both surveillance channels for `spec`.
pub fn synth_scenario(spec: &ScenarioSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let n = spec.n_samples();
    let lag = spec.lag_samples;
    let fs = spec.sample_rate_hz;
    let lambda = spec.wavelength_m();

    let source = synth_source_band_limited(n + lag, fs, spec.seed, spec.source_bandwidth)?;
    let x = source.samples();
    let reference = IqBuffer::new(x[lag..lag + n].to_vec(), fs)?;

    let waves: Vec<(Plane, MotionWaveform)> = spec
        .motions
        .iter()
        .map(|m| (m.plane, m.waveform()))
        .collect();
    let mut phi_xy = vec![0.0; n];
    let mut phi_xz = vec![0.0; n];
    for (plane, wave) in &waves {
        let dst = match plane {
            Plane::Xy => &mut phi_xy,
            Plane::Xz => &mut phi_xz,
        };
        for (k, p) in dst.iter_mut().enumerate() {
            *p += wave.phase_rad(k as f64 / fs, lambda);
        }
    }

    let noise_power = spec.noise_power();
    let channel = |geom: &AntennaGeometry, stream: u64| -> Result<IqBuffer> {
        let proj = geom.xz_projection();
        let mut rng = stream_rng(spec.seed, stream);
        let samples = (0..n)
            .map(|k| {
                let phase = phi_xy[k] + proj * phi_xz[k];
                let gain = Complex64::from_polar(spec.target_amp, phase) + spec.clutter_amp;
                let mut s = x[k] * gain;
                if let Some(p) = noise_power {
                    s += complex_normal(&mut rng, p);
                }
                s
            })
            .collect();
        IqBuffer::new(samples, fs)
    };
    let surv1 = channel(&spec.surv1, STREAM_NOISE_SURV1)?;
    let surv2 = channel(&spec.surv2, STREAM_NOISE_SURV2)?;

    Ok(SynthOutput {
        reference,
        surv1,
        surv2,
        truth: GroundTruth {
            motions: spec.motions.clone(),
            duration_s: spec.duration_s,
            motion_power: spec.target_amp * spec.target_amp,
            noise_power: noise_power.unwrap_or(0.0),
        },
    })
}
