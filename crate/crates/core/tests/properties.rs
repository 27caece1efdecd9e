//! Cross-module properties checked against brute-force oracles.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wivitals_core::caf::{compute_caf, compute_caf_with, doppler_grid, CafMethod};
use wivitals_core::classifier::{classify_window, detect_spike, ActivityLabel, PeriodicityEvidence, SpikeEvent};
use wivitals_core::estimators::{classify_tremor, estimate_dominant_freq, TremorSeverity};
use wivitals_core::harness::{
    aggregate, default_base_scenario, point_scenarios, run_sweep, run_trial, SweepAxis, SweepSpec,
    TrialKind, TrialTemplate,
};
use wivitals_core::phase::{cross_correlate_batches, extract_phase, normalize_phase};
use wivitals_core::pipeline::extract_phase_set;
use wivitals_core::signal_model::{
    doppler_shift_hz, synth_scenario, wavelength_m, MotionComponent, Plane, ScenarioSpec,
};
use wivitals_core::{BatchConfig, IqBuffer, PhaseSeries, PipelineConfig};

fn small_spec(motions: Vec<MotionComponent>, snr_db: Option<f64>, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        duration_s: 4.0,
        sample_rate_hz: 4_000.0,
        motions,
        snr_db,
        seed,
        ..ScenarioSpec::default()
    }
}

fn tone(f: f64, rate: f64, secs: f64, phase: f64, amp: f64) -> PhaseSeries {
    let n = (secs * rate).round() as usize;
    let v = (0..n).map(|b| amp * (2.0 * PI * f * b as f64 / rate + phase).sin()).collect();
    PhaseSeries::new(v, rate, 0.0).unwrap()
}

/// Frequency of the largest |DFT| on a 1e-3 Hz grid within `band`.
fn fine_grid_peak(x: &[f64], rate: f64, band: (f64, f64)) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let steps = ((band.1 - band.0) / 1e-3).round() as usize;
    let mut best = (band.0, -1.0);
    for i in 0..=steps {
        let f = band.0 + i as f64 * 1e-3;
        let w = Complex64::from_polar(1.0, -2.0 * PI * f / rate);
        let mut rot = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for v in x {
            acc += (v - mean) * rot;
            rot *= w;
        }
        if acc.norm() > best.1 {
            best = (f, acc.norm());
        }
    }
    best.0
}

// ---- signal model ----

#[test]
fn synthesis_is_bit_deterministic() {
    let spec = small_spec(vec![MotionComponent::breathing(0.4, 0.005, 0.0, 4.0)], Some(10.0), 3);
    let a = synth_scenario(&spec).unwrap();
    let b = synth_scenario(&spec).unwrap();
    assert_eq!((a.reference, a.surv1, a.surv2), (b.reference, b.surv1, b.surv2));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn realized_noise_power_matches_snr(snr in -10.0..30.0f64, seed in 0u64..1000) {
        let spec = small_spec(vec![], Some(snr), seed);
        let noisy = synth_scenario(&spec).unwrap();
        let clean = synth_scenario(&ScenarioSpec { snr_db: None, ..spec.clone() }).unwrap();
        let noise: f64 = noisy.surv1.samples().iter().zip(clean.surv1.samples())
            .map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / noisy.surv1.len() as f64;
        let want_db = 10.0 * (spec.target_amp * spec.target_amp).log10() - snr;
        prop_assert!((10.0 * noise.log10() - want_db).abs() <= 0.5);
    }

    #[test]
    fn frequency_is_amplitude_invariant(f in 0.3..1.8f64, k in 0.01..100.0f64, ph in 0.0..6.0f64) {
        let band = (0.2, 2.0);
        let (a, _) = estimate_dominant_freq(&tone(f, 80.0, 20.0, ph, 1.0), band).unwrap();
        let (b, _) = estimate_dominant_freq(&tone(f, 80.0, 20.0, ph, k), band).unwrap();
        prop_assert!((a - b).abs() <= 0.005, "{} vs {}", a, b);
    }

    #[test]
    fn decision_is_total_and_spike_takes_precedence(
        p1 in any::<bool>(), a1 in any::<bool>(), p2 in any::<bool>(), a2 in any::<bool>(),
        t in 0.0..20.0f64, z in 4.0..40.0f64,
    ) {
        let ev = |p: bool, a: bool| PeriodicityEvidence {
            is_periodic: p && a,
            dominant_hz: 1.0,
            concentration: if p { 0.9 } else { 0.1 },
            window_span_s: 20.0,
            active: a,
            activity_ratio: if a { 50.0 } else { 1.0 },
        };
        let (e1, e2) = (ev(p1, a1), ev(p2, a2));
        let without = classify_window(e1, e2, None, 0.0).label;
        prop_assert!(without != ActivityLabel::Fall);
        let spike = SpikeEvent { time_s: t, peak_z: z, width_s: 0.2 };
        prop_assert_eq!(classify_window(e1, e2, Some(spike), 0.0).label, ActivityLabel::Fall);
    }
}

#[test]
fn xz_motion_leaves_surv1_untouched() {
    for seed in 0..5 {
        let still = synth_scenario(&small_spec(vec![], Some(15.0), seed)).unwrap();
        let limb = MotionComponent::random_limb(Plane::Xz, 0.01, 0.0, 4.0, seed);
        let moving = small_spec(vec![limb, MotionComponent::fall(1.0, 0.4, 0.5)], Some(15.0), seed);
        let out = synth_scenario(&moving).unwrap();
        assert_eq!(out.surv1, still.surv1);
        assert_ne!(out.surv2, still.surv2);
    }
}

#[test]
fn doubling_displacement_doubles_peak_phase() {
    let lambda = wavelength_m(2.4e9);
    let peak = |amp: f64| {
        let w = MotionComponent::breathing(0.37, amp, 0.5, 10.0).waveform();
        (0..10_000)
            .map(|i| w.phase_rad(i as f64 * 1e-3, lambda).abs())
            .fold(0.0, f64::max)
    };
    for amp in [1e-4, 0.003, 0.02] {
        assert_eq!(peak(2.0 * amp), 2.0 * peak(amp));
    }
}

// ---- phase extraction ----

#[test]
fn half_overlap_decimates_to_no_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let v = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
        (0..20_000).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    };
    let r = IqBuffer::new(v(&mut rng), 1e4).unwrap();
    let s = IqBuffer::new(v(&mut rng), 1e4).unwrap();
    for lag in [0, 7] {
        let cfg = |o| BatchConfig {
            batch_len: 250,
            overlap_frac: o,
            lag_samples: lag,
        };
        let full = cross_correlate_batches(&r, &s, &cfg(0.0)).unwrap();
        let half = cross_correlate_batches(&r, &s, &cfg(0.5)).unwrap();
        let decimated: Vec<Complex64> = half.iter().step_by(2).copied().collect();
        assert_eq!(decimated[..full.len()], full[..]);
    }
}

#[test]
fn injected_tone_comes_back_within_a_bin() {
    for (seed, f0) in [(1, 0.35), (2, 1.2), (3, 4.6), (4, 9.3)] {
        let spec = ScenarioSpec {
            duration_s: 20.0,
            sample_rate_hz: 4_000.0,
            motions: if f0 < 2.0 {
                vec![MotionComponent::breathing(f0, 0.001, 0.0, 20.0)]
            } else {
                MotionComponent::tremor_pair(f0, 0.001, 0.0, 20.0).to_vec()
            },
            seed,
            ..ScenarioSpec::default()
        };
        let out = synth_scenario(&spec).unwrap();
        let phi = extract_phase(&out.reference, &out.surv1, &BatchConfig::for_sample_rate(4_000.0)).unwrap();
        let rate = phi.batch_rate_hz();
        let x = phi.values();
        // integer-bin DFT argmax, excluding DC
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let k = (1..n / 2)
            .max_by(|&a, &b| {
                let p = |k: usize| -> f64 {
                    x.iter()
                        .enumerate()
                        .map(|(i, v)| (v - mean) * Complex64::from_polar(1.0, -2.0 * PI * (k * i) as f64 / n as f64))
                        .sum::<Complex64>()
                        .norm()
                };
                p(a).total_cmp(&p(b))
            })
            .unwrap();
        let bin = rate / n as f64;
        assert!((k as f64 * bin - f0).abs() <= bin, "f0 {f0}: peak {}", k as f64 * bin);
    }
}

#[test]
fn renormalizing_stationary_data_is_idempotent() {
    let w = 160;
    // whole periods in every window keep the window statistics constant
    let x: Vec<f64> = (0..2_000).map(|b| (2.0 * PI * b as f64 / 40.0).sin() + 0.3).collect();
    let once = normalize_phase(&PhaseSeries::new(x, 80.0, 0.0).unwrap(), w).unwrap();
    let twice = normalize_phase(&once, w).unwrap();
    for b in (2 * w)..once.len() {
        assert!((once.values()[b] - twice.values()[b]).abs() < 1e-6);
    }
}

// ---- caf ----

/// χ[τ, f] = Σ r[n] conj(s[n+τ]) e^{+i2π f n / fs}, straight from the definition.
fn caf_direct(r: &[Complex64], s: &[Complex64], tau: usize, f: f64, fs: f64, n: usize) -> f64 {
    (0..n)
        .map(|i| r[i] * s[i + tau].conj() * Complex64::from_polar(1.0, 2.0 * PI * f * i as f64 / fs))
        .sum::<Complex64>()
        .norm()
}

#[test]
fn fft_caf_matches_direct_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for len in [1usize << 10, 3_000, 1 << 14] {
        let fs = 2_000.0;
        let v = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
            (0..len).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
        };
        let (r, s) = (v(&mut rng), v(&mut rng));
        let tau_max = 6;
        let n = len - tau_max;
        // a step that puts the grid on FFT bins with fs/step >= n
        let step = fs / (n.next_power_of_two() as f64);
        let grid = doppler_grid(40.0 * step, step);
        let rb = IqBuffer::new(r.clone(), fs).unwrap();
        let sb = IqBuffer::new(s.clone(), fs).unwrap();
        let map = compute_caf(&rb, &sb, tau_max, &grid).unwrap();
        let direct = compute_caf_with(&rb, &sb, tau_max, &grid, CafMethod::Direct).unwrap();
        for tau in 0..=tau_max {
            for (j, &f) in grid.iter().enumerate() {
                let want = caf_direct(&r, &s, tau, f, fs, n);
                assert!((map.values[tau][j] - want).abs() <= 1e-6 * want.max(1.0));
                assert!((direct.values[tau][j] - want).abs() <= 1e-6 * want.max(1.0));
            }
        }
    }
}

#[test]
fn real_envelopes_give_symmetric_doppler() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let v: Vec<Complex64> = (0..4_096).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    let w: Vec<Complex64> = (0..4_096).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    let r = IqBuffer::new(v, 1_000.0).unwrap();
    let s = IqBuffer::new(w, 1_000.0).unwrap();
    let grid = doppler_grid(5.0, 0.25);
    let map = compute_caf(&r, &s, 3, &grid).unwrap();
    let m = grid.len();
    for row in &map.values {
        for j in 0..m {
            assert!((row[j] - row[m - 1 - j]).abs() <= 1e-9 * row[j].max(1.0));
        }
    }
}

#[test]
fn constant_speed_reflector_peaks_at_predicted_doppler() {
    let fs = 2_000.0;
    let (carrier, speed) = (2.4e9, 0.75);
    let lambda = wavelength_m(carrier);
    let spec = small_spec(vec![], None, 5);
    let x = synth_scenario(&ScenarioSpec { duration_s: 5.0, sample_rate_hz: fs, ..spec }).unwrap().reference;
    // displacement v·t through the simulator's phase law φ = 2π d / λ
    let surv: Vec<Complex64> = x
        .samples()
        .iter()
        .enumerate()
        .map(|(n, z)| z * Complex64::from_polar(1.0, 2.0 * PI * speed * (n as f64 / fs) / lambda))
        .collect();
    let s = IqBuffer::new(surv, fs).unwrap();
    let grid = doppler_grid(12.0, 0.1);
    let map = compute_caf(&x, &s, 4, &grid).unwrap();
    let (tau, f, _) = map.peak();
    let predicted = doppler_shift_hz(carrier, speed, 0.0);
    let cell = fs / map.n_samples as f64;
    assert_eq!(tau, 0);
    assert!((f - predicted).abs() <= cell, "peak {f} vs {predicted}");
}

// ---- classifier and estimators ----

#[test]
fn dominant_frequency_matches_fine_grid_oracle() {
    let rate = 80.0;
    for (band, lo, hi) in [((0.2, 2.0), 0.3, 1.9), ((2.0, 13.0), 4.0, 11.0)] {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let f = rng.gen_range(lo..hi);
            let x = tone(f, rate, 20.0, rng.gen_range(0.0..2.0 * PI), 1.0);
            let (est, _) = estimate_dominant_freq(&x, band).unwrap();
            let oracle = fine_grid_peak(x.values(), rate, band);
            assert!((est - oracle).abs() <= 0.01, "{f}: est {est}, oracle {oracle}");
        }
    }
}

#[test]
fn tremor_split_is_sharp_at_seven_hz() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ph1, ph2) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
        let amp = rng.gen_range(0.05..2.0);
        let at = |f: f64| classify_tremor(&tone(f, 80.0, 20.0, ph1, amp), &tone(f, 80.0, 20.0, ph2, amp)).unwrap();
        assert_eq!(at(6.8).class, TremorSeverity::Low);
        assert_eq!(at(7.2).class, TremorSeverity::High);
    }
}

#[test]
fn noise_only_runs_never_spike() {
    let cfg = PipelineConfig::default();
    for seed in 0..100u64 {
        let spec = ScenarioSpec {
            snr_db: Some(0.0),
            seed: 50_000 + seed,
            ..default_base_scenario()
        };
        let out = synth_scenario(&spec).unwrap();
        let set = extract_phase_set(&out.reference, &out.surv1, &out.surv2, &cfg).unwrap();
        assert_eq!(detect_spike(&set.phi2c, &set.phi1).unwrap(), None, "seed {seed}");
    }
}

// ---- harness ----

#[test]
fn single_point_sweep_equals_batch_of_trials() {
    let sweep = SweepSpec {
        seed_base: 300,
        ..SweepSpec::new(SweepAxis::SnrDb, vec![5.0], 10)
    };
    let res = run_sweep(&sweep).unwrap();
    let direct: Vec<_> = point_scenarios(&sweep, 5.0)
        .unwrap()
        .iter()
        .map(|s| run_trial(s, &sweep.pipeline).unwrap())
        .collect();
    assert_eq!(res.trials[0], direct);
    let mean = direct.iter().filter(|t| t.success).count() as f64 / direct.len() as f64;
    assert_eq!(res.rows[0].accuracy, mean);
    assert_eq!(res.rows[0], aggregate(5.0, 5.0, &direct));
}

#[test]
fn failing_trials_are_counted_not_fatal() {
    let mut sweep = SweepSpec::new(SweepAxis::SnrDb, vec![0.0, 10.0], 5);
    // too short for one classification window after warm-up
    sweep.base_scenario.duration_s = 12.0;
    sweep.templates = vec![TrialTemplate::of(TrialKind::Breathing)];
    let res = run_sweep(&sweep).unwrap();
    for row in &res.rows {
        assert_eq!((row.trials, row.failed), (5, 5));
    }
    assert!(res.trials.iter().flatten().all(|t| t.error.as_deref().is_some_and(|e| e.contains("insufficient"))));
    assert!(res.to_csv().lines().count() == 3);
}

#[test]
fn random_limb_motion_is_not_mistaken_for_a_fall() {
    let cfg = PipelineConfig::default();
    for seed in 0..20u64 {
        let spec = ScenarioSpec {
            motions: vec![MotionComponent::random_limb(Plane::Xy, 0.01, 0.0, 36.0, seed)],
            seed,
            ..default_base_scenario()
        };
        let r = run_trial(&spec, &cfg).unwrap();
        assert!(r.falls.is_empty(), "seed {seed}");
    }
}
