use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wivitals_core::caf::{compute_caf, doppler_grid};
use wivitals_core::config;
use wivitals_core::harness::{
    records_from_analysis, records_to_csv, records_to_json, replay_capture, run_sweep, score_trial,
    write_capture, CapturePaths, SweepSpec,
};
use wivitals_core::iq::{read_iq, read_metadata};
use wivitals_core::signal_model::{synth_scenario, ScenarioSpec};
use wivitals_core::{analyze, PipelineConfig};

/// Passive WiFi phase sensing: synthesize captures, classify activity,
/// estimate breathing rate, tremor severity and falls.
#[derive(Parser)]
#[command(name = "wivitals", version)]
struct Cli {
    /// Pipeline configuration (TOML or JSON); defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for every output file.
    #[arg(long, global = true, env = "WIVITALS_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Override the scenario seed (or a sweep's seed base).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write reference/surveillance IQ files for a scenario.
    Synth {
        /// Scenario file (TOML or JSON).
        scenario: PathBuf,
    },
    /// Synthesize and analyse one scenario, scoring it against the truth.
    Run {
        scenario: PathBuf,
    },
    /// Run a parameter sweep.
    Sweep {
        /// Sweep file (TOML or JSON).
        sweep: PathBuf,
    },
    /// Analyse a capture on disk.
    Replay(CaptureArgs),
    /// Cross-ambiguity map of the reference against one surveillance channel.
    Caf {
        #[command(flatten)]
        capture: CaptureArgs,
        /// Use surv2 instead of surv1.
        #[arg(long)]
        second: bool,
        #[arg(long, default_value_t = 64)]
        tau_max: usize,
        #[arg(long, default_value_t = 50.0)]
        doppler_max_hz: f64,
        #[arg(long, default_value_t = 0.1)]
        doppler_step_hz: f64,
    },
}

#[derive(Args)]
struct CaptureArgs {
    /// Directory holding ref.iq, surv1.iq, surv2.iq and meta.toml.
    #[arg(long)]
    capture_dir: Option<PathBuf>,
    #[arg(long = "ref", requires_all = ["surv1", "surv2", "meta"], conflicts_with = "capture_dir")]
    reference: Option<PathBuf>,
    #[arg(long)]
    surv1: Option<PathBuf>,
    #[arg(long)]
    surv2: Option<PathBuf>,
    #[arg(long)]
    meta: Option<PathBuf>,
}

impl CaptureArgs {
    fn paths(&self) -> Result<CapturePaths> {
        match (&self.capture_dir, &self.reference) {
            (Some(dir), None) => Ok(CapturePaths::in_dir(dir)),
            (None, Some(r)) => Ok(CapturePaths {
                reference: r.clone(),
                surv1: self.surv1.clone().expect("required by clap"),
                surv2: self.surv2.clone().expect("required by clap"),
                metadata: self.meta.clone().expect("required by clap"),
            }),
            _ => bail!("give either --capture-dir or --ref/--surv1/--surv2/--meta"),
        }
    }
}

fn pipeline_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = match path {
        Some(p) => config::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<ScenarioSpec> {
    let mut spec: ScenarioSpec = config::load(path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = pipeline_config(&cli.config)?;
    let out = &cli.out_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match &cli.command {
        Command::Synth { scenario } => {
            let spec = load_scenario(scenario, cli.seed)?;
            let synth = synth_scenario(&spec)?;
            let paths = write_capture(out, &synth, spec.carrier_hz)?;
            println!(
                "wrote {} samples per channel to {}",
                synth.reference.len(),
                paths.reference.parent().unwrap_or(out).display()
            );
        }
        Command::Run { scenario } => {
            let spec = load_scenario(scenario, cli.seed)?;
            let synth = synth_scenario(&spec)?;
            let analysis = analyze(&synth.reference, &synth.surv1, &synth.surv2, &cfg)?;
            let records = records_from_analysis(&analysis);
            let report = score_trial(&spec, &cfg, synth.truth, &analysis);
            write(out, "trial.json", serde_json::to_string_pretty(&report)? + "\n")?;
            write(out, "estimates.csv", records_to_csv(&records))?;
            write(out, "estimates.json", records_to_json(&records))?;
            write(out, "phi1.csv", analysis.series.phi1.to_csv())?;
            write(out, "phi2c.csv", analysis.series.phi2c.to_csv())?;
            let label = report.label.map(|l| l.as_str()).unwrap_or("-");
            println!("label {label} (expected {}), success {}", report.kind.as_str(), report.success);
            if let Some(bpm) = report.rate_estimate_bpm {
                println!("breathing {bpm:.2} bpm");
            }
            for f in &report.falls {
                println!("fall at {:.2} s", f.time_s);
            }
        }
        Command::Sweep { sweep } => {
            let mut spec: SweepSpec = config::load(sweep)?;
            if let Some(s) = cli.seed {
                spec.seed_base = s;
            }
            if cli.config.is_some() {
                spec.pipeline = cfg;
            }
            let res = run_sweep(&spec)?;
            res.write(out)?;
            print!("{}", res.to_csv());
        }
        Command::Replay(capture) => {
            let (analysis, records) = replay_capture(&capture.paths()?, &cfg)?;
            write(out, "estimates.csv", records_to_csv(&records))?;
            write(out, "estimates.json", records_to_json(&records))?;
            for r in &records {
                println!("{:>8.2} s  {}", r.window_start_s, r.label);
            }
            for f in &analysis.falls {
                println!("fall at {:.2} s", f.time_s);
            }
        }
        Command::Caf {
            capture,
            second,
            tau_max,
            doppler_max_hz,
            doppler_step_hz,
        } => {
            if !(*doppler_step_hz > 0.0 && *doppler_max_hz >= 0.0) {
                bail!("doppler step must be positive and max non-negative");
            }
            let paths = capture.paths()?;
            let meta = read_metadata(&paths.metadata)?;
            let r = read_iq(&paths.reference, meta.sample_rate_hz)?;
            let s = read_iq(if *second { &paths.surv2 } else { &paths.surv1 }, meta.sample_rate_hz)?;
            let map = compute_caf(&r, &s, *tau_max, &doppler_grid(*doppler_max_hz, *doppler_step_hz))?;
            map.write(out, "caf")?;
            let (tau, f, mag) = map.peak();
            println!("peak |chi| {mag:.3} at delay {tau} samples, Doppler {f:.3} Hz");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
