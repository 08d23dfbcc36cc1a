use std::fs;
use std::path::{Path, PathBuf};

use argus_core::arbitration::{evaluate, ArbitrationOptions, EnsembleFusion};
use argus_core::disagreement::{signal_series_with, write_signal_csv};
use argus_core::disengagement::{default_grid, roc_svg, roc_sweep_with, write_roc_csv};
use argus_core::preprocessing::{balance_dataset_with, compose_all, KeepPolicy, NET_CHANNELS, NET_HEIGHT, NET_WIDTH};
use argus_core::streams::{
    read_class_log, read_disengagements, read_steering_trace_at, write_class_log, write_disengagements,
    write_steering_trace,
};
use argus_core::synthgen::{
    evenly_spaced_events, gen_class_log, gen_steering_scenario, ClassLogSpec, SteeringScenarioSpec,
};
use argus_core::{DisagreementConfig, Execution, SteeringTrace};
use serde::Serialize;

use crate::args::{
    ArbitrateArgs, BalanceArgs, Command, KeepArg, PreprocessArgs, SignalArgs, SimulateLogArgs,
    SimulateSteeringArgs, SweepArgs, TraceArgs,
};
use crate::error::{CliError, Result};
use crate::frames::{self, NetInputSidecar};
use crate::report::{to_json, Table1, Table2};

/// What a command produced: output files (relative to the output
/// directory, in write order), the seed it used, and lines for the console.
pub struct Executed {
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

struct Out<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Out<'_> {
    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn absolute(path: &Path) -> Result<PathBuf> {
    fs::canonicalize(path).map_err(|e| CliError::io(path, e))
}

fn output_dir(path: &Path) -> Result<PathBuf> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
    absolute(path)
}

impl Command {
    pub fn out_dir(&self) -> Option<&Path> {
        match self {
            Command::Arbitrate(a) => Some(&a.out),
            Command::Sweep(a) => Some(&a.out),
            Command::Signal(a) => Some(&a.out),
            Command::Preprocess(a) => Some(&a.out),
            Command::Balance(a) => Some(&a.out),
            Command::SimulateLog(a) => Some(&a.out),
            Command::SimulateSteering(a) => Some(&a.out),
            Command::Replay(_) => None,
        }
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::Arbitrate(a) => a.out = dir,
            Command::Sweep(a) => a.out = dir,
            Command::Signal(a) => a.out = dir,
            Command::Preprocess(a) => a.out = dir,
            Command::Balance(a) => a.out = dir,
            Command::SimulateLog(a) => a.out = dir,
            Command::SimulateSteering(a) => a.out = dir,
            Command::Replay(a) => a.out = dir,
        }
    }

    /// Makes every input path absolute and creates the output directory, so
    /// the recorded configuration can be replayed from anywhere.
    pub fn resolve_paths(mut self) -> Result<Self> {
        match &mut self {
            Command::Arbitrate(a) => a.log = absolute(&a.log)?,
            Command::Sweep(a) => {
                a.trace.trace = absolute(&a.trace.trace)?;
                a.events = absolute(&a.events)?;
            }
            Command::Signal(a) => a.trace.trace = absolute(&a.trace.trace)?,
            Command::Preprocess(a) => a.input = absolute(&a.input)?,
            Command::Balance(a) => a.angles = absolute(&a.angles)?,
            Command::SimulateLog(a) => {
                if let Some(p) = &a.spec {
                    a.spec = Some(absolute(p)?);
                }
            }
            Command::SimulateSteering(a) => {
                if let Some(p) = &a.spec {
                    a.spec = Some(absolute(p)?);
                }
            }
            Command::Replay(_) => {}
        }
        if let Some(out) = self.out_dir() {
            let out = output_dir(out)?;
            self.set_out_dir(out);
        }
        Ok(self)
    }

    pub fn input_files(&self) -> Result<Vec<PathBuf>> {
        Ok(match self {
            Command::Arbitrate(a) => vec![a.log.clone()],
            Command::Sweep(a) => vec![a.trace.trace.clone(), a.events.clone()],
            Command::Signal(a) => vec![a.trace.trace.clone()],
            Command::Preprocess(a) => frames::source_files(&a.input)?,
            Command::Balance(a) => vec![a.angles.clone()],
            Command::SimulateLog(a) => a.spec.iter().cloned().collect(),
            Command::SimulateSteering(a) => a.spec.iter().cloned().collect(),
            Command::Replay(a) => vec![a.manifest.clone()],
        })
    }
}

pub fn execute(cmd: &Command, exec: Execution) -> Result<Executed> {
    let dir = cmd
        .out_dir()
        .ok_or_else(|| CliError::Input("command has no output directory".into()))?;
    let mut out = Out {
        dir,
        written: Vec::new(),
    };
    let (seed, notes, warnings) = match cmd {
        Command::Arbitrate(a) => arbitrate(a, exec, &mut out)?,
        Command::Sweep(a) => sweep(a, exec, &mut out)?,
        Command::Signal(a) => signal(a, exec, &mut out)?,
        Command::Preprocess(a) => preprocess(a, exec, &mut out)?,
        Command::Balance(a) => balance(a, &mut out)?,
        Command::SimulateLog(a) => simulate_log(a, &mut out)?,
        Command::SimulateSteering(a) => simulate_steering(a, &mut out)?,
        Command::Replay(_) => return Err(CliError::Input("replay cannot be nested".into())),
    };
    Ok(Executed {
        outputs: out.written,
        seed,
        notes,
        warnings,
    })
}

type Outcome = (Option<u64>, Vec<String>, Vec<String>);

fn arbitrate(a: &ArbitrateArgs, exec: Execution, out: &mut Out) -> Result<Outcome> {
    if a.draws == 0 {
        return Err(CliError::Input("--draws must be >= 1".into()));
    }
    let log = read_class_log(&a.log)?;
    let opts = ArbitrationOptions {
        ks: a.k.clone(),
        seed: a.seed,
        draws: a.draws,
        budget_fraction: a.budget,
        ensemble: a.ensemble.then_some(EnsembleFusion {
            primary_weight: a.ensemble_weight,
        }),
        exec,
    };
    let summary = evaluate(&log, &opts)?;
    let t1 = Table1::from_summary(&summary, &a.k);
    let t2 = Table2 {
        rows: summary.detectors.clone(),
    };
    out.write("table1.json", to_json(&t1))?;
    out.write("table1.csv", t1.to_csv())?;
    out.write("table2.json", to_json(&t2))?;
    out.write("table2.csv", t2.to_csv())?;

    let mut notes = vec![format!("{} records", summary.num_records)];
    for r in &t1.rows {
        let errs: Vec<String> = r.error_pct.iter().map(|(k, e)| format!("top-{k} {e:.1}")).collect();
        notes.push(format!("{:<18} {}  review {:.1}%", r.method, errs.join("  "), 100.0 * r.review_fraction));
    }
    for m in &t2.rows {
        let show = |v: Option<f64>| v.map_or("undefined".into(), |x| format!("{x:.1}"));
        notes.push(format!(
            "detector k={}: precision {} recall {}",
            m.k,
            show(m.precision_pct),
            show(m.recall_pct)
        ));
    }
    Ok((Some(a.seed), notes, Vec::new()))
}

fn read_trace(t: &TraceArgs) -> Result<SteeringTrace> {
    Ok(read_steering_trace_at(&t.trace, t.fps)?)
}

fn config(t: &TraceArgs, threshold: f64) -> DisagreementConfig {
    DisagreementConfig {
        angle_range_deg: t.range,
        window_len: t.window,
        threshold,
    }
}

#[derive(Serialize)]
struct RocSummary {
    optimum: argus_core::RocPoint,
    accuracy: f64,
    normal_windows: usize,
    disengagement_windows: usize,
    window: usize,
    stride: usize,
    range_deg: f64,
    grid_points: usize,
}

fn sweep(a: &SweepArgs, exec: Execution, out: &mut Out) -> Result<Outcome> {
    let trace = read_trace(&a.trace)?;
    let events = read_disengagements(&a.events)?;
    let cfg = config(&a.trace, 0.0);
    let stride = a.stride.unwrap_or(a.trace.window);
    let grid = a.grid.clone().unwrap_or_else(|| default_grid(a.trace.window));
    let sweep = roc_sweep_with(&trace, &events, &cfg, &grid, stride, exec)?;

    let mut csv = Vec::new();
    write_roc_csv(&sweep.points, &mut csv).map_err(|e| CliError::Input(e.to_string()))?;
    out.write("roc.csv", csv)?;
    let summary = RocSummary {
        optimum: sweep.optimum,
        accuracy: 1.0 - sweep.optimum.mean_error,
        normal_windows: sweep.normal_windows,
        disengagement_windows: sweep.disengagement_windows,
        window: a.trace.window,
        stride,
        range_deg: a.trace.range,
        grid_points: sweep.points.len(),
    };
    out.write("roc_summary.json", to_json(&summary))?;
    if a.svg {
        out.write("roc.svg", roc_svg(&sweep))?;
    }
    let o = sweep.optimum;
    Ok((
        None,
        vec![
            format!(
                "{} normal / {} disengagement windows",
                sweep.normal_windows, sweep.disengagement_windows
            ),
            format!(
                "optimum delta {}: FAR {:.4} FRR {:.4} mean error {:.4}",
                o.delta, o.far, o.frr, o.mean_error
            ),
        ],
        Vec::new(),
    ))
}

fn signal(a: &SignalArgs, exec: Execution, out: &mut Out) -> Result<Outcome> {
    let trace = read_trace(&a.trace)?;
    let cfg = config(&a.trace, a.threshold);
    let signals = signal_series_with(&trace, &cfg, exec)?;
    let mut csv = Vec::new();
    write_signal_csv(&signals, &mut csv).map_err(|e| CliError::Input(e.to_string()))?;
    out.write("signal.csv", csv)?;
    let flagged = signals.iter().filter(|s| s.flagged).count();
    Ok((None, vec![format!("{} frames scored, {flagged} flagged", signals.len())], Vec::new()))
}

fn preprocess(a: &PreprocessArgs, exec: Execution, out: &mut Out) -> Result<Outcome> {
    let (buf, fps) = frames::load(&a.input, a.fps, a.start_frame)?;
    let inputs = compose_all(&buf, a.method, exec);
    if inputs.is_empty() {
        return Err(CliError::Input(format!(
            "{} needs at least {} frames, got {}",
            a.method,
            a.method.history() + 1,
            buf.len()
        )));
    }
    out.write("net_inputs.f32", frames::encode_net_inputs(&inputs))?;
    let side = NetInputSidecar {
        method: a.method,
        height: NET_HEIGHT,
        width: NET_WIDTH,
        channels: NET_CHANNELS,
        frames: inputs.len(),
        first_frame: inputs.first().map(|(t, _)| *t),
        fps,
        dtype: "f32le".into(),
        layout: frames::LAYOUT.into(),
    };
    out.write("net_inputs.json", to_json(&side))?;
    Ok((
        None,
        vec![format!("{} {}x{}x3 inputs from {} frames", inputs.len(), NET_WIDTH, NET_HEIGHT, buf.len())],
        Vec::new(),
    ))
}

fn read_angles(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| CliError::Input(format!("{}: no column {column:?}", path.display())))?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let field = rec.get(idx).unwrap_or("");
            field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::Input(format!("{}: line {}: bad angle {field:?}", path.display(), i + 2))
            })
        })
        .collect()
}

#[derive(Serialize)]
struct BalanceSummary {
    total: usize,
    selected: usize,
    threshold: usize,
    keep: KeepPolicy,
    bin_lower_edges_deg: Vec<i32>,
    bin_counts: Vec<usize>,
    kept_counts: Vec<usize>,
}

fn balance(a: &BalanceArgs, out: &mut Out) -> Result<Outcome> {
    let policy = match (a.keep, a.seed) {
        (KeepArg::Earliest, _) => KeepPolicy::Earliest,
        (KeepArg::Seeded, Some(seed)) => KeepPolicy::Seeded(seed),
        (KeepArg::Seeded, None) => return Err(CliError::Input("--keep seeded requires --seed".into())),
    };
    let angles = read_angles(&a.angles, &a.column)?;
    let sel = balance_dataset_with(&angles, policy)?;
    let mut csv = String::from("index,angle_deg,bin,kept\n");
    for (i, (&angle, &kept)) in angles.iter().zip(&sel.mask).enumerate() {
        let bin = argus_core::preprocessing::angle_bin(angle).map_or(String::new(), |b| b.to_string());
        csv.push_str(&format!("{i},{angle},{bin},{kept}\n"));
    }
    out.write("selection.csv", csv)?;
    let summary = BalanceSummary {
        total: angles.len(),
        selected: sel.selected(),
        threshold: sel.threshold,
        keep: policy,
        bin_lower_edges_deg: (-10..10).collect(),
        bin_counts: sel.bin_counts.clone(),
        kept_counts: sel.kept_counts.clone(),
    };
    out.write("balance_summary.json", to_json(&summary))?;
    let seed = match policy {
        KeepPolicy::Seeded(s) => Some(s),
        KeepPolicy::Earliest => None,
    };
    Ok((
        seed,
        vec![format!("kept {} of {} frames (threshold {})", sel.selected(), angles.len(), sel.threshold)],
        Vec::new(),
    ))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn class_log_spec(a: &SimulateLogArgs) -> Result<ClassLogSpec> {
    let base = match (&a.spec, a.reference) {
        (Some(path), _) => Some(read_json::<ClassLogSpec>(path)?),
        (None, true) => {
            let seed = a.seed.ok_or_else(|| CliError::Input("--seed is required".into()))?;
            Some(ClassLogSpec::reference(seed))
        }
        (None, false) => None,
    };
    let mut spec = match base {
        Some(mut s) => {
            if let Some(seed) = a.seed {
                s.seed = seed;
            }
            macro_rules! set {
                ($($field:ident),*) => { $( if let Some(v) = a.$field { s.$field = v; } )* };
            }
            set!(n, fail1, fail5, disagree, tp1, tp5);
            if let Some(c) = a.classes {
                s.num_classes = c;
            }
            s
        }
        None => {
            let mut missing = Vec::new();
            let mut need = |v: Option<usize>, name: &str| {
                if v.is_none() {
                    missing.push(format!("--{name}"));
                }
                v.unwrap_or(0)
            };
            let spec = ClassLogSpec {
                n: need(a.n, "n"),
                num_classes: a.classes.unwrap_or(1000),
                fail1: need(a.fail1, "fail1"),
                fail5: need(a.fail5, "fail5"),
                disagree: need(a.disagree, "disagree"),
                tp1: need(a.tp1, "tp1"),
                tp5: need(a.tp5, "tp5"),
                seed: 0,
                secondary_fail1: None,
                secondary_fail5: None,
                ensemble_fail1: None,
                ensemble_fail5: None,
                with_probs: false,
            };
            if a.seed.is_none() {
                missing.push("--seed".into());
            }
            if !missing.is_empty() {
                return Err(CliError::Input(format!(
                    "missing {} (or pass --spec / --reference)",
                    missing.join(", ")
                )));
            }
            ClassLogSpec {
                seed: a.seed.unwrap_or_default(),
                ..spec
            }
        }
    };
    for (target, value) in [
        (&mut spec.secondary_fail1, a.secondary_fail1),
        (&mut spec.secondary_fail5, a.secondary_fail5),
        (&mut spec.ensemble_fail1, a.ensemble_fail1),
        (&mut spec.ensemble_fail5, a.ensemble_fail5),
    ] {
        if value.is_some() {
            *target = value;
        }
    }
    spec.with_probs |= a.with_probs;
    Ok(spec)
}

fn simulate_log(a: &SimulateLogArgs, out: &mut Out) -> Result<Outcome> {
    let spec = class_log_spec(a)?;
    let log = gen_class_log(&spec)?;
    let mut bytes = Vec::new();
    write_class_log(&log, &mut bytes).map_err(|e| CliError::Input(e.to_string()))?;
    out.write("log.jsonl", bytes)?;
    out.write("spec.json", to_json(&spec))?;
    Ok((
        Some(spec.seed),
        vec![format!(
            "{} records over {} classes: {} top-1 / {} top-5 failures, {} disagreements",
            log.len(),
            log.num_classes(),
            spec.fail1,
            spec.fail5,
            spec.disagree
        )],
        Vec::new(),
    ))
}

fn steering_spec(a: &SimulateSteeringArgs) -> Result<SteeringScenarioSpec> {
    let mut spec = match &a.spec {
        Some(path) => read_json::<SteeringScenarioSpec>(path)?,
        None => {
            let seed = a
                .seed
                .ok_or_else(|| CliError::Input("--seed is required (or pass --spec)".into()))?;
            SteeringScenarioSpec::acceptance(seed)
        }
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(d) = a.duration {
        spec.duration_frames = d;
    }
    if let Some(fps) = a.fps {
        spec.fps = fps;
    }
    match (&a.events, a.event_count) {
        (Some(events), _) => spec.event_frames = events.clone(),
        (None, Some(count)) => spec.event_frames = evenly_spaced_events(spec.duration_frames, count),
        (None, None) if a.duration.is_some() && a.spec.is_none() => {
            let count = spec.event_frames.len() as u64;
            spec.event_frames = evenly_spaced_events(spec.duration_frames, count);
        }
        (None, None) => {}
    }
    if let Some(v) = a.sigma {
        spec.baseline_noise_deg = v;
    }
    if let Some(v) = a.divergence {
        spec.divergence_deg = v;
    }
    if let Some(v) = a.ramp {
        spec.ramp_len_frames = v;
    }
    if let Some(v) = a.smoothing {
        spec.smoothing = v;
    }
    if let Some(v) = a.base_amplitude {
        spec.base_amplitude_deg = v;
    }
    Ok(spec)
}

#[derive(Serialize)]
struct ScenarioReport<'a> {
    spec: &'a SteeringScenarioSpec,
    ramps: &'a [(u64, u64)],
    warnings: &'a [String],
}

fn simulate_steering(a: &SimulateSteeringArgs, out: &mut Out) -> Result<Outcome> {
    let spec = steering_spec(a)?;
    let sc = gen_steering_scenario(&spec)?;
    let mut trace = Vec::new();
    write_steering_trace(&sc.trace, &mut trace).map_err(|e| CliError::Input(e.to_string()))?;
    out.write("trace.csv", trace)?;
    let mut events = Vec::new();
    write_disengagements(&sc.events, &mut events).map_err(|e| CliError::Input(e.to_string()))?;
    out.write("events.csv", events)?;
    let report = ScenarioReport {
        spec: &spec,
        ramps: &sc.ramps,
        warnings: &sc.warnings,
    };
    out.write("scenario.json", to_json(&report))?;
    Ok((
        Some(spec.seed),
        vec![format!("{} frames, {} events", sc.trace.len(), sc.events.len())],
        sc.warnings.clone(),
    ))
}
