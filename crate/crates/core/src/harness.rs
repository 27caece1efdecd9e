//! Seeded trials, parameter sweeps and capture replay.
//!
//! A trial draws its motion parameters from a [`TrialTemplate`] with a
//! dedicated RNG stream of the trial seed, synthesizes the scenario, runs the
//! pipeline and scores the result against the injected truth. Sweeps reuse
//! the same seeds (`seed_base + trial index`) at every axis point, so points
//! differ only in the swept quantity.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{ActivityDecision, ActivityLabel};
use crate::config::config_hash;
use crate::error::{invalid, Error, Result};
use crate::estimators::{FallReport, TremorSeverity};
use crate::iq::{read_iq, read_metadata, write_iq, write_metadata, CaptureMetadata, IqBuffer};
use crate::pipeline::{analyze, Analysis, Estimate, PipelineConfig};
use crate::signal_model::{stream_rng, GroundTruth, MotionComponent, Plane, ScenarioSpec, SynthOutput};

/// Sample rate used by trials and sweeps unless the base scenario says otherwise.
pub const HARNESS_SAMPLE_RATE_HZ: f64 = 10_000.0;
/// RNG stream that draws per-trial motion parameters.
const STREAM_TRIAL: u64 = 3;
/// Version of the [`EstimateRecord`] layout.
pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    NoActivity,
    Breathing,
    Tremor,
    Fall,
    RandomMotion,
}

impl TrialKind {
    pub const ALL: [TrialKind; 5] = [
        TrialKind::NoActivity,
        TrialKind::Breathing,
        TrialKind::Tremor,
        TrialKind::Fall,
        TrialKind::RandomMotion,
    ];

    pub fn expected_label(&self) -> ActivityLabel {
        match self {
            TrialKind::NoActivity => ActivityLabel::NoActivity,
            TrialKind::Breathing => ActivityLabel::Breathing,
            TrialKind::Tremor => ActivityLabel::Tremor,
            TrialKind::Fall => ActivityLabel::Fall,
            TrialKind::RandomMotion => ActivityLabel::RandomMotion,
        }
    }

    pub fn as_str(&self) -> &'static str {
        self.expected_label().as_str()
    }
}

/// Parameter ranges a trial of one kind is drawn from.
///
/// Fall trials also breathe, so the fall has to be found on top of a
/// periodic x-y motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialTemplate {
    pub kind: TrialKind,
    pub breathing_bpm: (f64, f64),
    pub breathing_amp_m: f64,
    pub tremor_hz: (f64, f64),
    /// Open interval of tremor frequencies never drawn.
    pub tremor_exclude_hz: Option<(f64, f64)>,
    pub tremor_amp_m: f64,
    pub fall_onset_s: (f64, f64),
    pub fall_displacement_m: f64,
    pub fall_ramp_s: f64,
    pub limb_rms_m: f64,
}

impl Default for TrialTemplate {
    fn default() -> Self {
        Self {
            kind: TrialKind::NoActivity,
            breathing_bpm: (12.0, 30.0),
            breathing_amp_m: 0.005,
            tremor_hz: (4.0, 11.0),
            tremor_exclude_hz: Some((6.8, 7.2)),
            tremor_amp_m: 0.002,
            fall_onset_s: (12.0, 30.0),
            fall_displacement_m: 0.5,
            fall_ramp_s: 0.5,
            limb_rms_m: 0.01,
        }
    }
}

impl TrialTemplate {
    pub fn of(kind: TrialKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    /// One template per kind, in [`TrialKind::ALL`] order.
    pub fn all_kinds() -> Vec<Self> {
        TrialKind::ALL.iter().map(|k| Self::of(*k)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64), what: &str| {
            if a.is_finite() && b.is_finite() && a <= b {
                Ok(())
            } else {
                Err(invalid(format!("{what} range must be finite and ordered")))
            }
        };
        ordered(self.breathing_bpm, "breathing_bpm")?;
        ordered(self.tremor_hz, "tremor_hz")?;
        ordered(self.fall_onset_s, "fall_onset_s")?;
        if let Some((lo, hi)) = self.tremor_exclude_hz {
            if lo <= self.tremor_hz.0 && hi >= self.tremor_hz.1 {
                return Err(invalid("tremor exclusion covers the whole range"));
            }
        }
        Ok(())
    }
}

/// Scenario for one trial: `base` with the template's motions drawn from `seed`.
pub fn instantiate(template: &TrialTemplate, base: &ScenarioSpec, seed: u64) -> Result<ScenarioSpec> {
    template.validate()?;
    let mut rng = stream_rng(seed, STREAM_TRIAL);
    let dur = base.duration_s;
    let mut uniform = |(lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let breathing = |bpm: f64| MotionComponent::breathing(bpm / 60.0, template.breathing_amp_m, 0.0, dur);
    let motions = match template.kind {
        TrialKind::NoActivity => Vec::new(),
        TrialKind::Breathing => vec![breathing(uniform(template.breathing_bpm))],
        TrialKind::Tremor => {
            let f = loop {
                let f = uniform(template.tremor_hz);
                match template.tremor_exclude_hz {
                    Some((lo, hi)) if f > lo && f < hi => continue,
                    _ => break f,
                }
            };
            MotionComponent::tremor_pair(f, template.tremor_amp_m, 0.0, dur).to_vec()
        }
        TrialKind::Fall => {
            let bpm = uniform(template.breathing_bpm);
            let onset = uniform(template.fall_onset_s);
            vec![
                breathing(bpm),
                MotionComponent::fall(onset, template.fall_displacement_m, template.fall_ramp_s),
            ]
        }
        TrialKind::RandomMotion => {
            let limb_seed = rng.gen();
            vec![MotionComponent::random_limb(Plane::Xy, template.limb_rms_m, 0.0, dur, limb_seed)]
        }
    };
    let spec = ScenarioSpec {
        motions,
        seed,
        ..base.clone()
    };
    spec.validate()?;
    Ok(spec)
}

/// Base scenario for harness trials: 36 s at [`HARNESS_SAMPLE_RATE_HZ`].
pub fn default_base_scenario() -> ScenarioSpec {
    ScenarioSpec {
        sample_rate_hz: HARNESS_SAMPLE_RATE_HZ,
        snr_db: Some(20.0),
        ..ScenarioSpec::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub scenario_id: String,
    pub kind: TrialKind,
    pub seed: u64,
    pub snr_db: Option<f64>,
    pub truth: GroundTruth,
    /// Capture-level label (see [`Analysis::overall_label`]).
    pub label: Option<ActivityLabel>,
    pub window_labels: Vec<ActivityLabel>,
    /// First window carrying the capture-level label.
    pub decision: Option<ActivityDecision>,
    pub estimates: Vec<Estimate>,
    pub falls: Vec<FallReport>,
    pub correct_label: bool,
    /// Label correct and, where applicable, the measurement within tolerance
    /// (tremor severity matches; fall reported within the latency bound).
    pub success: bool,
    pub rate_estimate_bpm: Option<f64>,
    pub abs_rate_error_bpm: Option<f64>,
    pub tremor_severity: Option<TremorSeverity>,
    pub fall_latency_s: Option<f64>,
    pub scenario_hash: String,
    pub pipeline_hash: String,
    pub error: Option<String>,
}

/// Largest |reported − true| fall time counted as a detection.
pub const FALL_LATENCY_BOUND_S: f64 = 2.5;

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn true_kind(truth: &GroundTruth) -> TrialKind {
    use crate::signal_model::MotionKind as M;
    let has = |k: M| truth.motions.iter().any(|m| m.kind == k);
    if has(M::Fall) {
        TrialKind::Fall
    } else if has(M::Tremor) {
        TrialKind::Tremor
    } else if has(M::Breathing) {
        TrialKind::Breathing
    } else if has(M::RandomLimb) {
        TrialKind::RandomMotion
    } else {
        TrialKind::NoActivity
    }
}

fn empty_report(spec: &ScenarioSpec, cfg: &PipelineConfig, kind: TrialKind) -> TrialReport {
    TrialReport {
        scenario_id: format!("{}-{}", kind.as_str(), spec.seed),
        kind,
        seed: spec.seed,
        snr_db: spec.snr_db,
        truth: GroundTruth {
            motions: spec.motions.clone(),
            duration_s: spec.duration_s,
            motion_power: spec.target_amp * spec.target_amp,
            noise_power: spec.noise_power().unwrap_or(0.0),
        },
        label: None,
        window_labels: Vec::new(),
        decision: None,
        estimates: Vec::new(),
        falls: Vec::new(),
        correct_label: false,
        success: false,
        rate_estimate_bpm: None,
        abs_rate_error_bpm: None,
        tremor_severity: None,
        fall_latency_s: None,
        scenario_hash: config_hash(spec),
        pipeline_hash: config_hash(cfg),
        error: None,
    }
}

/// Score an analysis against the scenario it came from.
pub fn score_trial(spec: &ScenarioSpec, cfg: &PipelineConfig, truth: GroundTruth, analysis: &Analysis) -> TrialReport {
    use crate::signal_model::MotionKind as M;
    let kind = true_kind(&truth);
    let mut r = empty_report(spec, cfg, kind);
    let label = analysis.overall_label();
    r.label = Some(label);
    r.window_labels = analysis.windows.iter().map(|w| w.decision.label).collect();
    r.decision = analysis
        .windows
        .iter()
        .find(|w| w.decision.label == label)
        .map(|w| w.decision.clone());
    r.estimates = analysis.windows.iter().filter_map(|w| w.estimate.clone()).collect();
    r.falls = analysis.falls.clone();
    r.correct_label = label == kind.expected_label();

    let truth_motion = |k: M| truth.motions.iter().find(|m| m.kind == k);
    r.rate_estimate_bpm = median(analysis.breathing_estimates().iter().map(|b| b.rate_bpm).collect());
    if kind == TrialKind::Breathing {
        if let (Some(est), Some(m)) = (r.rate_estimate_bpm, truth_motion(M::Breathing)) {
            r.abs_rate_error_bpm = Some((est - 60.0 * m.fundamental_hz).abs());
        }
    }
    let tremors = analysis.tremor_estimates();
    if !tremors.is_empty() {
        let high = tremors.iter().filter(|t| t.class == TremorSeverity::High).count();
        r.tremor_severity = Some(if 2 * high > tremors.len() {
            TremorSeverity::High
        } else {
            TremorSeverity::Low
        });
    }
    if let Some(fall) = truth_motion(M::Fall) {
        r.fall_latency_s = analysis
            .falls
            .iter()
            .map(|f| f.time_s - fall.onset_s)
            .min_by(|a, b| a.abs().total_cmp(&b.abs()));
    }
    r.success = r.correct_label
        && match kind {
            TrialKind::Tremor => {
                let f = truth_motion(M::Tremor).map(|m| m.fundamental_hz).unwrap_or(0.0);
                let want = if f < cfg.estimator.tremor_split_hz {
                    TremorSeverity::Low
                } else {
                    TremorSeverity::High
                };
                r.tremor_severity == Some(want)
            }
            TrialKind::Fall => r.fall_latency_s.is_some_and(|l| l.abs() <= FALL_LATENCY_BOUND_S),
            _ => true,
        };
    r
}

pub fn run_trial(spec: &ScenarioSpec, cfg: &PipelineConfig) -> Result<TrialReport> {
    let out = crate::signal_model::synth_scenario(spec)?;
    let analysis = analyze(&out.reference, &out.surv1, &out.surv2, cfg)?;
    Ok(score_trial(spec, cfg, out.truth, &analysis))
}

/// [`run_trial`] that never fails: errors and panics become a failure record.
pub fn run_trial_isolated(spec: &ScenarioSpec, cfg: &PipelineConfig) -> TrialReport {
    match catch_unwind(AssertUnwindSafe(|| run_trial(spec, cfg))) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => failure_report(spec, cfg, e.to_string()),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            failure_report(spec, cfg, format!("panic: {msg}"))
        }
    }
}

fn failure_report(spec: &ScenarioSpec, cfg: &PipelineConfig, error: String) -> TrialReport {
    let kind = true_kind(&GroundTruth {
        motions: spec.motions.clone(),
        duration_s: spec.duration_s,
        motion_power: 0.0,
        noise_power: 0.0,
    });
    TrialReport {
        error: Some(error),
        ..empty_report(spec, cfg, kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    SnrDb,
    DistanceM,
    TxPowerDbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    #[default]
    Los,
    /// Obstructed-path analog: SNR penalty plus a strong static clutter path.
    Nlos,
}

pub const NLOS_SNR_PENALTY_DB: f64 = 6.0;
pub const NLOS_CLUTTER_AMP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials_per_point: usize,
    #[serde(default = "default_base_scenario")]
    pub base_scenario: ScenarioSpec,
    /// Trial `i` uses `templates[i % len]`.
    #[serde(default = "TrialTemplate::all_kinds")]
    pub templates: Vec<TrialTemplate>,
    #[serde(default)]
    pub seed_base: u64,
    /// SNR at 1 m for the distance axis.
    #[serde(default = "default_snr_ref")]
    pub snr_ref_db: f64,
    /// SNR at 0 dBm for the transmit-power axis.
    #[serde(default = "default_snr_offset")]
    pub snr_offset_db: f64,
    #[serde(default)]
    pub environment: Environment,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

fn default_snr_ref() -> f64 {
    20.0
}
fn default_snr_offset() -> f64 {
    10.0
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>, trials_per_point: usize) -> Self {
        Self {
            axis,
            values,
            trials_per_point,
            base_scenario: default_base_scenario(),
            templates: TrialTemplate::all_kinds(),
            seed_base: 0,
            snr_ref_db: default_snr_ref(),
            snr_offset_db: default_snr_offset(),
            environment: Environment::Los,
            pipeline: PipelineConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("sweep needs at least one axis value"));
        }
        if self.trials_per_point == 0 {
            return Err(invalid("trials_per_point must be positive"));
        }
        if self.templates.is_empty() {
            return Err(invalid("sweep needs at least one trial template"));
        }
        for v in &self.values {
            if !v.is_finite() || (self.axis == SweepAxis::DistanceM && *v <= 0.0) {
                return Err(invalid(format!("bad axis value {v}")));
            }
        }
        self.templates.iter().try_for_each(TrialTemplate::validate)?;
        self.base_scenario.validate()?;
        self.pipeline.validate()
    }

    /// SNR at one axis value, before any environment penalty.
    pub fn snr_for(&self, value: f64) -> f64 {
        match self.axis {
            SweepAxis::SnrDb => value,
            SweepAxis::DistanceM => self.snr_ref_db - 20.0 * value.log10(),
            SweepAxis::TxPowerDbm => self.snr_offset_db + value,
        }
    }

    /// Scenario base at one axis value, environment applied.
    pub fn scenario_at(&self, value: f64) -> ScenarioSpec {
        let mut s = self.base_scenario.clone();
        let snr = self.snr_for(value);
        match self.environment {
            Environment::Los => s.snr_db = Some(snr),
            Environment::Nlos => {
                s.snr_db = Some(snr - NLOS_SNR_PENALTY_DB);
                s.clutter_amp = NLOS_CLUTTER_AMP;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub trials: usize,
    pub failed: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub axis_value: f64,
    pub snr_db: f64,
    pub trials: usize,
    pub failed: usize,
    pub accuracy: f64,
    pub per_class: BTreeMap<TrialKind, ClassStats>,
    /// Mean |error| of breathing trials that produced a rate.
    pub mean_abs_rate_error_bpm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub spec_hash: String,
    pub rows: Vec<AggregateRow>,
    #[serde(skip)]
    pub trials: Vec<Vec<TrialReport>>,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Fold trial reports into one aggregate row.
pub fn aggregate(axis_value: f64, snr_db: f64, trials: &[TrialReport]) -> AggregateRow {
    let mut per_class: BTreeMap<TrialKind, ClassStats> = BTreeMap::new();
    for t in trials {
        let c = per_class.entry(t.kind).or_insert(ClassStats {
            trials: 0,
            failed: 0,
            correct: 0,
            accuracy: 0.0,
        });
        c.trials += 1;
        c.failed += t.error.is_some() as usize;
        c.correct += t.success as usize;
    }
    for c in per_class.values_mut() {
        c.accuracy = ratio(c.correct, c.trials);
    }
    let errs: Vec<f64> = trials.iter().filter_map(|t| t.abs_rate_error_bpm).collect();
    let correct = trials.iter().filter(|t| t.success).count();
    AggregateRow {
        axis_value,
        snr_db,
        trials: trials.len(),
        failed: trials.iter().filter(|t| t.error.is_some()).count(),
        accuracy: ratio(correct, trials.len()),
        per_class,
        mean_abs_rate_error_bpm: (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64),
    }
}

/// Scenarios of one axis point, in trial order.
pub fn point_scenarios(sweep: &SweepSpec, value: f64) -> Result<Vec<ScenarioSpec>> {
    let base = sweep.scenario_at(value);
    (0..sweep.trials_per_point)
        .map(|i| {
            let t = &sweep.templates[i % sweep.templates.len()];
            instantiate(t, &base, sweep.seed_base + i as u64)
        })
        .collect()
}

pub fn run_sweep(sweep: &SweepSpec) -> Result<SweepResult> {
    sweep.validate()?;
    let mut rows = Vec::with_capacity(sweep.values.len());
    let mut trials = Vec::with_capacity(sweep.values.len());
    for &v in &sweep.values {
        let specs = point_scenarios(sweep, v)?;
        let reports: Vec<TrialReport> = specs
            .par_iter()
            .map(|s| run_trial_isolated(s, &sweep.pipeline))
            .collect();
        rows.push(aggregate(v, sweep.snr_for(v), &reports));
        trials.push(reports);
    }
    Ok(SweepResult {
        axis: sweep.axis,
        spec_hash: config_hash(sweep),
        rows,
        trials,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl SweepResult {
    /// One row per axis value; per-class accuracy columns for every class
    /// present in the sweep.
    pub fn to_csv(&self) -> String {
        let classes: Vec<TrialKind> = TrialKind::ALL
            .into_iter()
            .filter(|k| self.rows.iter().any(|r| r.per_class.contains_key(k)))
            .collect();
        let mut out = String::from("axis_value,snr_db,trials,failed,accuracy");
        for k in &classes {
            let _ = write!(out, ",acc_{}", k.as_str());
        }
        out.push_str(",mean_abs_rate_error_bpm\n");
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{:.6},{},{},{:.6}",
                r.axis_value, r.snr_db, r.trials, r.failed, r.accuracy
            );
            for k in &classes {
                let _ = write!(out, ",{}", fmt_opt(r.per_class.get(k).map(|c| c.accuracy)));
            }
            let _ = writeln!(out, ",{}", fmt_opt(r.mean_abs_rate_error_bpm));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("aggregate serializes") + "\n"
    }

    /// Every trial record, one JSON object per line, in axis then trial order.
    pub fn trials_jsonl(&self) -> String {
        let mut out = String::new();
        for (row, reports) in self.rows.iter().zip(&self.trials) {
            for t in reports {
                let line = serde_json::json!({ "axis_value": row.axis_value, "trial": t });
                out.push_str(&line.to_string());
                out.push('\n');
            }
        }
        out
    }

    /// Write `aggregate.csv`, `aggregate.json` and `trials.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("aggregate.csv"), self.to_csv())?;
        fs::write(dir.join("aggregate.json"), self.to_json())?;
        fs::write(dir.join("trials.jsonl"), self.trials_jsonl())?;
        Ok(())
    }
}

/// One emitted measurement, stable across releases of the same schema version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub schema_version: u32,
    pub window_start_s: f64,
    pub label: ActivityLabel,
    /// `bpm` for breathing, `low`/`high` for tremor, `onset_s` for falls.
    pub detail: String,
    pub value: Option<f64>,
    pub confidence: Option<f64>,
}

pub fn records_from_analysis(analysis: &Analysis) -> Vec<EstimateRecord> {
    analysis
        .windows
        .iter()
        .map(|w| {
            let (detail, value, confidence) = match &w.estimate {
                Some(Estimate::Breathing(b)) => ("bpm".to_string(), Some(b.rate_bpm), Some(b.confidence)),
                Some(Estimate::Tremor(t)) => {
                    let s = match t.class {
                        TremorSeverity::Low => "low",
                        TremorSeverity::High => "high",
                    };
                    (s.to_string(), Some(t.dominant_hz), None)
                }
                Some(Estimate::Fall(f)) => ("onset_s".to_string(), Some(f.time_s), Some(f.peak_z)),
                None => (String::new(), None, None),
            };
            EstimateRecord {
                schema_version: RECORD_SCHEMA_VERSION,
                window_start_s: w.decision.window_start_s,
                label: w.decision.label,
                detail,
                value,
                confidence,
            }
        })
        .collect()
}

pub fn records_to_csv(records: &[EstimateRecord]) -> String {
    let mut out = String::from("schema_version,window_start_s,label,detail,value,confidence\n");
    for r in records {
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.schema_version,
            r.window_start_s,
            r.label,
            r.detail,
            num(r.value),
            num(r.confidence)
        );
    }
    out
}

pub fn records_to_json(records: &[EstimateRecord]) -> String {
    serde_json::to_string_pretty(records).expect("records serialize") + "\n"
}

/// File names of a capture written by [`write_capture`].
#[derive(Debug, Clone)]
pub struct CapturePaths {
    pub reference: PathBuf,
    pub surv1: PathBuf,
    pub surv2: PathBuf,
    pub metadata: PathBuf,
}

impl CapturePaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            reference: dir.join("ref.iq"),
            surv1: dir.join("surv1.iq"),
            surv2: dir.join("surv2.iq"),
            metadata: dir.join("meta.toml"),
        }
    }
}

/// Write the three channels, the metadata sidecar and `truth.json`.
pub fn write_capture(dir: &Path, out: &SynthOutput, carrier_hz: f64) -> Result<CapturePaths> {
    fs::create_dir_all(dir)?;
    let paths = CapturePaths::in_dir(dir);
    write_iq(&paths.reference, &out.reference)?;
    write_iq(&paths.surv1, &out.surv1)?;
    write_iq(&paths.surv2, &out.surv2)?;
    write_metadata(
        &paths.metadata,
        &CaptureMetadata {
            sample_rate_hz: out.reference.sample_rate_hz(),
            carrier_hz,
        },
    )?;
    let truth = serde_json::to_string_pretty(&out.truth).expect("truth serializes");
    fs::write(dir.join("truth.json"), truth + "\n")?;
    Ok(paths)
}

/// Load a capture from disk and analyse it.
pub fn replay_capture(paths: &CapturePaths, cfg: &PipelineConfig) -> Result<(Analysis, Vec<EstimateRecord>)> {
    let meta = read_metadata(&paths.metadata)?;
    let load = |p: &Path| -> Result<IqBuffer> { read_iq(p, meta.sample_rate_hz) };
    let (r, s1, s2) = (load(&paths.reference)?, load(&paths.surv1)?, load(&paths.surv2)?);
    if r.len() != s1.len() || r.len() != s2.len() {
        return Err(Error::MalformedFile {
            path: paths.surv1.clone(),
            reason: format!(
                "channel lengths differ: ref {}, surv1 {}, surv2 {}",
                r.len(),
                s1.len(),
                s2.len()
            ),
        });
    }
    let analysis = analyze(&r, &s1, &s2, cfg)?;
    let records = records_from_analysis(&analysis);
    Ok((analysis, records))
}
