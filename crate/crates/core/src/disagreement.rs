//! Disagreement signals between a primary and a secondary system.
//!
//! For classification the arbitrator flags any top-1 mismatch. For steering,
//! both angles are clamped to `[-R, R]` and scaled to `[-1, 1]`; the score at
//! frame `t` is the sum of absolute normalized differences over the trailing
//! window of `L` frames ending at `t`, flagged when it strictly exceeds `δ`.

use std::io::{self, BufWriter, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::Execution;
use crate::streams::{ClassRecord, SteeringSample, SteeringTrace};

#[derive(Debug, Error, PartialEq)]
pub enum DisagreementError {
    #[error("non-finite angle {0}")]
    NonFinite(f64),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("window of {len} frames ending at {end} is not fully covered by the trace")]
    PartialWindow { end: u64, len: usize },
    #[error("trace has {len} samples, shorter than the window length {window}")]
    TraceTooShort { len: usize, window: usize },
    #[error("record {0}: empty prediction list")]
    EmptyPredictions(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisagreementConfig {
    /// Half-width of the normalization range, in degrees.
    pub angle_range_deg: f64,
    /// Window length in samples.
    pub window_len: usize,
    /// Flag threshold, in units of the windowed normalized sum.
    pub threshold: f64,
}

impl Default for DisagreementConfig {
    fn default() -> Self {
        DisagreementConfig {
            angle_range_deg: 10.0,
            window_len: 30,
            threshold: 10.0,
        }
    }
}

impl DisagreementConfig {
    pub fn validate(&self) -> Result<(), DisagreementError> {
        if !(self.angle_range_deg.is_finite() && self.angle_range_deg > 0.0) {
            return Err(DisagreementError::Config(format!(
                "angle range must be positive, got {}",
                self.angle_range_deg
            )));
        }
        if self.window_len == 0 {
            return Err(DisagreementError::Config("window length must be >= 1".into()));
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(DisagreementError::Config(format!(
                "threshold must be nonnegative, got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Largest possible window score, `2L`.
    pub fn max_score(&self) -> f64 {
        2.0 * self.window_len as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisagreementSignal {
    pub frame_index: u64,
    pub score: f64,
    pub flagged: bool,
}

pub fn normalize_angle(angle_deg: f64, range_deg: f64) -> Result<f64, DisagreementError> {
    if !angle_deg.is_finite() {
        return Err(DisagreementError::NonFinite(angle_deg));
    }
    if !(range_deg.is_finite() && range_deg > 0.0) {
        return Err(DisagreementError::Config(format!(
            "angle range must be positive, got {range_deg}"
        )));
    }
    Ok(angle_deg.clamp(-range_deg, range_deg) / range_deg)
}

/// Correctly rounded sum of the per-sample differences, so constant
/// windows score exactly `L * |difference|` and the score is monotone in
/// every term.
fn window_sum(window: &[SteeringSample], range_deg: f64) -> f64 {
    window
        .iter()
        .map(|s| {
            let p = s.primary_angle_deg.clamp(-range_deg, range_deg) / range_deg;
            let q = s.secondary_angle_deg.clamp(-range_deg, range_deg) / range_deg;
            (p - q).abs()
        })
        .fold(ExactSum::default(), ExactSum::add)
        .value()
}

/// Shewchuk's exact summation: keeps the running total as a list of
/// non-overlapping partials and rounds once at the end.
#[derive(Default)]
struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    fn add(mut self, mut x: f64) -> Self {
        let mut kept = 0;
        for i in 0..self.partials.len() {
            let mut y = self.partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
        self
    }

    /// The partials' sum rounded to nearest, ties to even.
    fn value(&self) -> f64 {
        let p = &self.partials;
        let Some((&top, rest)) = p.split_last() else {
            return 0.0;
        };
        let mut hi = top;
        let mut lo = 0.0;
        let mut i = rest.len();
        while i > 0 {
            i -= 1;
            let x = hi;
            let y = rest[i];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Half-way case: the rounding of hi + lo depends on the sign of the
        // next partial below.
        if i > 0 && ((lo < 0.0 && rest[i - 1] < 0.0) || (lo > 0.0 && rest[i - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

/// Score of the trailing window ending at frame `t`. Partial windows are an
/// error; there is no padding at the start of a trace.
pub fn disagreement_score(
    trace: &SteeringTrace,
    t: u64,
    cfg: &DisagreementConfig,
) -> Result<f64, DisagreementError> {
    cfg.validate()?;
    let window = trace
        .window(t, cfg.window_len)
        .ok_or(DisagreementError::PartialWindow {
            end: t,
            len: cfg.window_len,
        })?;
    Ok(window_sum(window, cfg.angle_range_deg))
}

pub fn flag_disagreement(score: f64, threshold: f64) -> bool {
    score > threshold
}

pub fn signal_series(
    trace: &SteeringTrace,
    cfg: &DisagreementConfig,
) -> Result<Vec<DisagreementSignal>, DisagreementError> {
    signal_series_with(trace, cfg, Execution::default())
}

/// One signal per frame whose full trailing window lies in the trace. Frames
/// whose window crosses a gap in the trace are an error.
pub fn signal_series_with(
    trace: &SteeringTrace,
    cfg: &DisagreementConfig,
    exec: Execution,
) -> Result<Vec<DisagreementSignal>, DisagreementError> {
    cfg.validate()?;
    let l = cfg.window_len;
    if trace.len() < l {
        return Err(DisagreementError::TraceTooShort {
            len: trace.len(),
            window: l,
        });
    }
    let samples = trace.samples();
    let ends = &samples[l - 1..];
    exec.try_map(ends, |end| {
        let score = disagreement_score(trace, end.frame_index, cfg)?;
        Ok(DisagreementSignal {
            frame_index: end.frame_index,
            score,
            flagged: flag_disagreement(score, cfg.threshold),
        })
    })
}

pub fn categorical_disagree(record: &ClassRecord) -> Result<bool, DisagreementError> {
    match (record.primary_topk.first(), record.secondary_topk.first()) {
        (Some(p), Some(s)) => Ok(p != s),
        _ => Err(DisagreementError::EmptyPredictions(record.item_id.clone())),
    }
}

pub const SIGNAL_HEADER: &str = "frame_index,score,flagged";

pub fn write_signal_csv<W: Write>(signals: &[DisagreementSignal], writer: W) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{SIGNAL_HEADER}")?;
    for s in signals {
        writeln!(w, "{},{},{}", s.frame_index, s.score, s.flagged)?;
    }
    w.flush()
}
