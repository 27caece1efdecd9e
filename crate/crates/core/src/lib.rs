//! Passive WiFi phase sensing.
//!
//! Synthesizes reference/surveillance IQ for scripted body motion, extracts
//! batched cross-correlation phase, classifies activity per window and
//! estimates breathing rate, tremor severity and fall times.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod caf;
pub mod classifier;
pub mod config;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod iq;
pub mod phase;
pub mod pipeline;
pub mod signal_model;
pub mod spectrum;

pub use caf::{compute_caf, doppler_resolution_hz, CafMap};
pub use classifier::{
    classify_window, detect_spike, periodicity_test, ActivityDecision, ActivityLabel,
    ClassifierConfig, PeriodicityEvidence, SpikeEvent,
};
pub use error::{Error, Result};
pub use estimators::{
    breathing_rate, classify_tremor, estimate_dominant_freq, report_fall, BreathingEstimate,
    EstimatorConfig, FallReport, FallReporter, TremorClass, TremorSeverity,
};
pub use harness::{
    instantiate, replay_capture, run_sweep, run_trial, EstimateRecord, SweepAxis, SweepResult, SweepSpec,
    TrialKind, TrialReport, TrialTemplate,
};
pub use iq::{read_iq, read_metadata, write_iq, write_metadata, CaptureMetadata, IqBuffer};
pub use phase::{
    cross_correlate_batches, extract_phase, leakage_correct, normalize_phase, BatchConfig,
    BatchFlags, PhaseSeries, WindowStats,
};
pub use pipeline::{analyze, Analysis, Estimate, PhaseSet, PipelineConfig, WindowResult};
pub use signal_model::{
    doppler_shift_hz, motion_phase, synth_scenario, synth_source, AntennaGeometry, GroundTruth,
    MotionComponent, MotionKind, Plane, ScenarioSpec, SynthOutput,
};
