//! Deterministic inputs shared by the benchmarks.

use wivitals_core::harness::{default_base_scenario, instantiate, TrialKind, TrialTemplate};
use wivitals_core::signal_model::{synth_scenario, SynthOutput};
use wivitals_core::PhaseSeries;

/// A 36 s, 10 kHz breathing capture at 20 dB SNR.
pub fn breathing_capture(seed: u64) -> SynthOutput {
    let spec = instantiate(&TrialTemplate::of(TrialKind::Breathing), &default_base_scenario(), seed)
        .expect("default template is valid");
    synth_scenario(&spec).expect("default scenario is valid")
}

/// A 20 s window of a 0.31 Hz tone at 80 batches/s.
pub fn tone_window() -> PhaseSeries {
    let rate = 80.0;
    let v = (0..1600)
        .map(|b| (2.0 * std::f64::consts::PI * 0.31 * b as f64 / rate).sin())
        .collect();
    PhaseSeries::new(v, rate, 0.0).expect("finite tone")
}
