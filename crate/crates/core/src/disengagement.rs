//! Disagreement as a predictor of disengagements.
//!
//! Each event defines a disengagement period running from `5 * fps` frames
//! before the event to `fps` frames after it. Overlapping or touching periods
//! are merged; the rest of the trace is normal driving. Windows of length
//! `L` are sampled at a fixed stride inside each period (a window never
//! straddles two periods) and a window counts as flagged when its score
//! exceeds `δ`. FAR is the flagged share of normal windows, FRR the
//! unflagged share of disengagement windows.

use std::fmt::Write as _;
use std::io::{self, BufWriter, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disagreement::{disagreement_score, flag_disagreement, DisagreementConfig, DisagreementError};
use crate::par::Execution;
use crate::streams::{DisengagementEvent, SteeringTrace};

pub const LEAD_SECONDS: u64 = 5;
pub const TRAIL_SECONDS: u64 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("event at frame {frame} outside trace range [{first}, {last}]")]
    EventOutsideTrace { frame: u64, first: u64, last: u64 },
    #[error("empty trace")]
    EmptyTrace,
    #[error("stride must be >= 1")]
    ZeroStride,
    #[error("empty threshold grid")]
    EmptyGrid,
    #[error("invalid threshold {0}")]
    BadThreshold(f64),
    #[error("no {0} windows: rate undefined")]
    Undefined(PeriodLabel),
    #[error(transparent)]
    Disagreement(#[from] DisagreementError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodLabel {
    Disengagement,
    Normal,
}

impl std::fmt::Display for PeriodLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PeriodLabel::Disengagement => "disengagement",
            PeriodLabel::Normal => "normal",
        })
    }
}

/// Inclusive frame interval with a label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub start_frame: u64,
    pub end_frame: u64,
    pub label: PeriodLabel,
}

impl Period {
    pub fn frames(&self) -> u64 {
        self.end_frame - self.start_frame + 1
    }

    pub fn contains(&self, frame: u64) -> bool {
        (self.start_frame..=self.end_frame).contains(&frame)
    }
}

/// Disengagement periods (merged, clipped to the trace) and the normal
/// periods between them, in frame order.
pub fn build_periods(
    trace: &SteeringTrace,
    events: &[DisengagementEvent],
) -> Result<Vec<Period>, EvalError> {
    let (first, last) = match (trace.first_frame(), trace.last_frame()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(EvalError::EmptyTrace),
    };
    let fps = trace.fps() as u64;
    let mut spans: Vec<(u64, u64)> = Vec::with_capacity(events.len());
    for e in events {
        let frame = e.frame_index;
        if frame < first || frame > last {
            return Err(EvalError::EventOutsideTrace { frame, first, last });
        }
        let start = frame.saturating_sub(LEAD_SECONDS * fps).max(first);
        let end = (frame + TRAIL_SECONDS * fps).min(last);
        spans.push((start, end));
    }
    spans.sort_unstable();

    let mut merged: Vec<(u64, u64)> = Vec::new();
    for (s, e) in spans {
        match merged.last_mut() {
            Some((_, prev_end)) if s <= *prev_end + 1 => *prev_end = (*prev_end).max(e),
            _ => merged.push((s, e)),
        }
    }

    let mut periods = Vec::with_capacity(2 * merged.len() + 1);
    let mut cursor = first;
    for (s, e) in merged {
        if s > cursor {
            periods.push(Period {
                start_frame: cursor,
                end_frame: s - 1,
                label: PeriodLabel::Normal,
            });
        }
        periods.push(Period {
            start_frame: s,
            end_frame: e,
            label: PeriodLabel::Disengagement,
        });
        cursor = e + 1;
    }
    if cursor <= last {
        periods.push(Period {
            start_frame: cursor,
            end_frame: last,
            label: PeriodLabel::Normal,
        });
    }
    Ok(periods)
}

/// A sampled classification window, identified by its end frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub end_frame: u64,
    pub label: PeriodLabel,
}

/// Window end frames `start + L - 1`, `start + L - 1 + stride`, ... within
/// each period.
pub fn sample_windows(periods: &[Period], window_len: usize, stride: usize) -> Result<Vec<Window>, EvalError> {
    if stride == 0 {
        return Err(EvalError::ZeroStride);
    }
    if window_len == 0 {
        return Err(DisagreementError::Config("window length must be >= 1".into()).into());
    }
    let mut out = Vec::new();
    for p in periods {
        let mut t = p.start_frame + window_len as u64 - 1;
        while t <= p.end_frame {
            out.push(Window {
                end_frame: t,
                label: p.label,
            });
            t += stride as u64;
        }
    }
    Ok(out)
}

/// A window together with its disagreement score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredWindow {
    pub end_frame: u64,
    pub label: PeriodLabel,
    pub score: f64,
}

/// Builds periods, samples windows and scores each of them.
pub fn score_windows(
    trace: &SteeringTrace,
    events: &[DisengagementEvent],
    cfg: &DisagreementConfig,
    stride: usize,
    exec: Execution,
) -> Result<Vec<ScoredWindow>, EvalError> {
    cfg.validate()?;
    if trace.len() < cfg.window_len {
        return Err(DisagreementError::TraceTooShort {
            len: trace.len(),
            window: cfg.window_len,
        }
        .into());
    }
    let periods = build_periods(trace, events)?;
    let windows = sample_windows(&periods, cfg.window_len, stride)?;
    exec.try_map(&windows, |w| {
        Ok(ScoredWindow {
            end_frame: w.end_frame,
            label: w.label,
            score: disagreement_score(trace, w.end_frame, cfg)?,
        })
    })
}

/// FAR and FRR with the window counts behind them. A rate is `None` when
/// its class has no windows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarFrr {
    pub threshold: f64,
    pub far: Option<f64>,
    pub frr: Option<f64>,
    pub false_accepts: usize,
    pub false_rejects: usize,
    pub normal_windows: usize,
    pub disengagement_windows: usize,
}

pub fn rates_at(windows: &[ScoredWindow], threshold: f64) -> FarFrr {
    let mut fa = 0;
    let mut fr = 0;
    let mut neg = 0;
    let mut pos = 0;
    for w in windows {
        let flagged = flag_disagreement(w.score, threshold);
        match w.label {
            PeriodLabel::Normal => {
                neg += 1;
                fa += flagged as usize;
            }
            PeriodLabel::Disengagement => {
                pos += 1;
                fr += (!flagged) as usize;
            }
        }
    }
    FarFrr {
        threshold,
        far: (neg > 0).then(|| fa as f64 / neg as f64),
        frr: (pos > 0).then(|| fr as f64 / pos as f64),
        false_accepts: fa,
        false_rejects: fr,
        normal_windows: neg,
        disengagement_windows: pos,
    }
}

pub fn far_frr(
    trace: &SteeringTrace,
    events: &[DisengagementEvent],
    cfg: &DisagreementConfig,
    stride: usize,
) -> Result<FarFrr, EvalError> {
    let windows = score_windows(trace, events, cfg, stride, Execution::default())?;
    Ok(rates_at(&windows, cfg.threshold))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub delta: f64,
    pub far: f64,
    pub frr: f64,
    pub mean_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocSweep {
    pub points: Vec<RocPoint>,
    pub optimum: RocPoint,
    pub normal_windows: usize,
    pub disengagement_windows: usize,
}

/// `0, 0.5, 1, ..., 2L`.
pub fn default_grid(window_len: usize) -> Vec<f64> {
    (0..=4 * window_len).map(|i| i as f64 * 0.5).collect()
}

pub fn roc_sweep(
    trace: &SteeringTrace,
    events: &[DisengagementEvent],
    cfg: &DisagreementConfig,
    grid: &[f64],
    stride: usize,
) -> Result<RocSweep, EvalError> {
    roc_sweep_with(trace, events, cfg, grid, stride, Execution::default())
}

/// Evaluates every threshold in `grid` over one set of scored windows. The
/// optimum minimizes mean error; ties go to the smallest threshold.
pub fn roc_sweep_with(
    trace: &SteeringTrace,
    events: &[DisengagementEvent],
    cfg: &DisagreementConfig,
    grid: &[f64],
    stride: usize,
    exec: Execution,
) -> Result<RocSweep, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if let Some(&bad) = grid.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(EvalError::BadThreshold(bad));
    }
    let windows = score_windows(trace, events, cfg, stride, exec)?;
    sweep_scored(&windows, grid, exec)
}

pub fn sweep_scored(windows: &[ScoredWindow], grid: &[f64], exec: Execution) -> Result<RocSweep, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let rates = exec.map(grid, |&delta| rates_at(windows, delta));
    let first = rates[0];
    if first.far.is_none() {
        return Err(EvalError::Undefined(PeriodLabel::Normal));
    }
    if first.frr.is_none() {
        return Err(EvalError::Undefined(PeriodLabel::Disengagement));
    }
    let points: Vec<RocPoint> = rates
        .iter()
        .map(|r| {
            let far = r.far.unwrap_or(0.0);
            let frr = r.frr.unwrap_or(0.0);
            RocPoint {
                delta: r.threshold,
                far,
                frr,
                mean_error: (far + frr) / 2.0,
            }
        })
        .collect();
    let optimum = *points
        .iter()
        .min_by(|a, b| {
            a.mean_error
                .total_cmp(&b.mean_error)
                .then(a.delta.total_cmp(&b.delta))
        })
        .expect("nonempty grid");
    Ok(RocSweep {
        points,
        optimum,
        normal_windows: first.normal_windows,
        disengagement_windows: first.disengagement_windows,
    })
}

pub const ROC_HEADER: &str = "delta,far,frr,mean_error";

pub fn write_roc_csv<W: Write>(points: &[RocPoint], writer: W) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{ROC_HEADER}")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.delta, p.far, p.frr, p.mean_error)?;
    }
    w.flush()
}

/// FRR against FAR with the optimum circled in red.
pub fn roc_svg(sweep: &RocSweep) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 50.0;
    let x = |far: f64| PAD + far * SIZE;
    let y = |frr: f64| PAD + (1.0 - frr) * SIZE;
    let mut svg = String::new();
    let total = SIZE + 2.0 * PAD;
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let pts: Vec<String> = sweep
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", x(p.far), y(p.frr)))
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        pts.join(" ")
    );
    let o = sweep.optimum;
    let _ = writeln!(
        svg,
        r#"<circle cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="red" stroke-width="2"/>"#,
        x(o.far),
        y(o.frr)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">false accept rate</text>"#,
        PAD + SIZE / 2.0,
        total - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" font-size="14" transform="rotate(-90 14 {})" text-anchor="middle">false reject rate</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="red">δ={} mean error={:.4}</text>"#,
        x(o.far) + 10.0,
        y(o.frr) - 10.0,
        o.delta,
        o.mean_error
    );
    svg.push_str("</svg>\n");
    svg
}
