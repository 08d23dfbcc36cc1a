//! Paired decision streams and their file formats.
//!
//! Classification logs are line-delimited JSON: a header line
//! `{"num_classes":C}` followed by one record per line. Steering traces and
//! disengagement lists are headered CSV. Writers emit a canonical form that
//! the readers reproduce byte for byte.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRACE_HEADER: [&str; 3] = ["frame_index", "primary_angle_deg", "secondary_angle_deg"];
pub const EVENTS_HEADER: [&str; 2] = ["frame_index", "initiator"];
pub const DEFAULT_FPS: u32 = 30;

/// Minimum length of each ranked prediction list.
pub const MIN_TOPK: usize = 5;

const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("record {item_id}: {reason}")]
    Record { item_id: String, reason: String },
    #[error("missing header line")]
    MissingHeader,
    #[error("line {line}: duplicate frame_index {frame}")]
    DuplicateFrame { line: usize, frame: u64 },
    #[error("line {line}: frame_index {frame} is not greater than previous {previous}")]
    NonMonotoneFrame { line: usize, frame: u64, previous: u64 },
    #[error("line {line}: unknown initiator {token:?} (expected human or machine)")]
    UnknownInitiator { line: usize, token: String },
    #[error("invalid trace: {0}")]
    Trace(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl StreamError {
    fn io(path: &Path, source: io::Error) -> Self {
        StreamError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn line(line: usize, reason: impl Into<String>) -> Self {
        StreamError::Line {
            line,
            reason: reason.into(),
        }
    }
}

/// One validation item: ground truth plus both systems' ranked predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassRecord {
    pub item_id: String,
    pub truth: Option<u32>,
    pub primary_topk: Vec<u32>,
    pub secondary_topk: Vec<u32>,
    pub primary_probs: Option<Vec<f64>>,
    pub secondary_probs: Option<Vec<f64>>,
}

impl ClassRecord {
    /// Checks the record against a class count. Returns a human-readable
    /// reason on failure.
    pub fn check(&self, num_classes: u32) -> Result<(), String> {
        if let Some(t) = self.truth {
            if t >= num_classes {
                return Err(format!("truth {t} out of range for {num_classes} classes"));
            }
        }
        check_topk("p_topk", &self.primary_topk, num_classes)?;
        check_topk("s_topk", &self.secondary_topk, num_classes)?;
        if let Some(p) = &self.primary_probs {
            check_probs("p_probs", p, num_classes, self.primary_topk[0])?;
        }
        if let Some(p) = &self.secondary_probs {
            check_probs("s_probs", p, num_classes, self.secondary_topk[0])?;
        }
        Ok(())
    }
}

fn check_topk(name: &str, list: &[u32], num_classes: u32) -> Result<(), String> {
    if list.len() < MIN_TOPK {
        return Err(format!(
            "{name} has {} entries, need at least {MIN_TOPK}",
            list.len()
        ));
    }
    let mut seen = HashSet::with_capacity(list.len());
    for &c in list {
        if c >= num_classes {
            return Err(format!(
                "{name} class {c} out of range for {num_classes} classes"
            ));
        }
        if !seen.insert(c) {
            return Err(format!("{name} repeats class {c}"));
        }
    }
    Ok(())
}

fn check_probs(name: &str, probs: &[f64], num_classes: u32, top1: u32) -> Result<(), String> {
    if probs.len() != num_classes as usize {
        return Err(format!(
            "{name} has length {}, expected {num_classes}",
            probs.len()
        ));
    }
    if let Some(v) = probs.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(format!("{name} contains invalid probability {v}"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(format!("{name} sums to {sum}, expected 1"));
    }
    let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if probs[top1 as usize] < max {
        return Err(format!("{name} argmax does not match top-1 prediction {top1}"));
    }
    Ok(())
}

/// A validated classification log.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassLog {
    num_classes: u32,
    records: Vec<ClassRecord>,
}

impl ClassLog {
    pub fn new(num_classes: u32, records: Vec<ClassRecord>) -> Result<Self, StreamError> {
        if num_classes == 0 {
            return Err(StreamError::line(1, "num_classes must be positive"));
        }
        let mut ids = HashSet::with_capacity(records.len());
        for r in &records {
            r.check(num_classes).map_err(|reason| StreamError::Record {
                item_id: r.item_id.clone(),
                reason,
            })?;
            if !ids.insert(r.item_id.as_str()) {
                return Err(StreamError::Record {
                    item_id: r.item_id.clone(),
                    reason: "duplicate item id".into(),
                });
            }
        }
        Ok(ClassLog {
            num_classes,
            records,
        })
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn records(&self) -> &[ClassRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    num_classes: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    truth: Option<u32>,
    p_topk: Vec<u32>,
    s_topk: Vec<u32>,
    #[serde(default)]
    p_probs: Option<Vec<f64>>,
    #[serde(default)]
    s_probs: Option<Vec<f64>>,
}

pub fn read_class_log(path: impl AsRef<Path>) -> Result<ClassLog, StreamError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| StreamError::io(path, e))?;
    parse_class_log(BufReader::new(file))
}

/// Parses a class log from any buffered reader. Errors name the 1-based
/// line they occur on.
pub fn parse_class_log<R: BufRead>(reader: R) -> Result<ClassLog, StreamError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| StreamError::line(1, e.to_string()))?,
        None => return Err(StreamError::MissingHeader),
    };
    let header: LogHeader = serde_json::from_str(&header)
        .map_err(|e| StreamError::line(1, format!("bad header: {e}")))?;
    if header.num_classes == 0 {
        return Err(StreamError::line(1, "num_classes must be positive"));
    }
    let num_classes = header.num_classes;

    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| StreamError::line(lineno, e.to_string()))?;
        let raw: RecordLine = serde_json::from_str(&line)
            .map_err(|e| StreamError::line(lineno, format!("malformed record: {e}")))?;
        let record = ClassRecord {
            item_id: raw.id,
            truth: raw.truth,
            primary_topk: raw.p_topk,
            secondary_topk: raw.s_topk,
            primary_probs: raw.p_probs,
            secondary_probs: raw.s_probs,
        };
        record
            .check(num_classes)
            .map_err(|reason| StreamError::line(lineno, reason))?;
        if !ids.insert(record.item_id.clone()) {
            return Err(StreamError::line(
                lineno,
                format!("duplicate item id {:?}", record.item_id),
            ));
        }
        records.push(record);
    }
    Ok(ClassLog {
        num_classes,
        records,
    })
}

pub fn write_class_log<W: Write>(log: &ClassLog, writer: W) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    serde_json::to_writer(
        &mut w,
        &LogHeader {
            num_classes: log.num_classes,
        },
    )?;
    w.write_all(b"\n")?;
    for r in &log.records {
        let line = RecordLine {
            id: r.item_id.clone(),
            truth: r.truth,
            p_topk: r.primary_topk.clone(),
            s_topk: r.secondary_topk.clone(),
            p_probs: r.primary_probs.clone(),
            s_probs: r.secondary_probs.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_class_log_file(log: &ClassLog, path: impl AsRef<Path>) -> Result<(), StreamError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| StreamError::io(path, e))?;
    write_class_log(log, file).map_err(|e| StreamError::io(path, e))
}

/// One video-frame timestep (1 frame = 1/fps seconds).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteeringSample {
    pub frame_index: u64,
    pub primary_angle_deg: f64,
    pub secondary_angle_deg: f64,
}

/// Frame-aligned primary/secondary steering angles, strictly increasing in
/// frame index. Angles are kept exactly as produced (degrees).
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringTrace {
    fps: u32,
    samples: Vec<SteeringSample>,
}

impl SteeringTrace {
    pub fn new(samples: Vec<SteeringSample>, fps: u32) -> Result<Self, StreamError> {
        if fps == 0 {
            return Err(StreamError::Trace("fps must be positive".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.primary_angle_deg.is_finite() || !s.secondary_angle_deg.is_finite() {
                return Err(StreamError::Trace(format!(
                    "non-finite angle at frame {}",
                    s.frame_index
                )));
            }
            if i > 0 {
                let prev = samples[i - 1].frame_index;
                if s.frame_index == prev {
                    return Err(StreamError::Trace(format!(
                        "duplicate frame_index {prev}"
                    )));
                }
                if s.frame_index < prev {
                    return Err(StreamError::Trace(format!(
                        "frame_index {} follows {prev}",
                        s.frame_index
                    )));
                }
            }
        }
        Ok(SteeringTrace { fps, samples })
    }

    pub fn fps(&self) -> u32 {
        self.fps
    }

    pub fn samples(&self) -> &[SteeringSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_frame(&self) -> Option<u64> {
        self.samples.first().map(|s| s.frame_index)
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.samples.last().map(|s| s.frame_index)
    }

    pub fn position(&self, frame: u64) -> Option<usize> {
        self.samples
            .binary_search_by_key(&frame, |s| s.frame_index)
            .ok()
    }

    /// The `len` samples ending at `end`, if the trace covers every frame of
    /// that window.
    pub fn window(&self, end: u64, len: usize) -> Option<&[SteeringSample]> {
        if len == 0 {
            return None;
        }
        let last = self.position(end)?;
        let first = (last + 1).checked_sub(len)?;
        // Frames are strictly increasing integers, so equal span means no gaps.
        if end - self.samples[first].frame_index == (len - 1) as u64 {
            Some(&self.samples[first..=last])
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initiator {
    Human,
    Machine,
}

impl fmt::Display for Initiator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Initiator::Human => "human",
            Initiator::Machine => "machine",
        })
    }
}

impl FromStr for Initiator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "human" => Ok(Initiator::Human),
            "machine" => Ok(Initiator::Machine),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DisengagementEvent {
    pub frame_index: u64,
    pub initiator: Initiator,
}

fn open(path: &Path) -> Result<File, StreamError> {
    File::open(path).map_err(|e| StreamError::io(path, e))
}

fn csv_reader<R: Read>(reader: R, expected: &[&str]) -> Result<csv::Reader<R>, StreamError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() && expected.is_empty() {
        return Ok(rdr);
    }
    if headers.iter().ne(expected.iter().copied()) {
        return Err(StreamError::line(
            1,
            format!(
                "expected header {:?}, found {:?}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(rdr)
}

fn record_line(record: &csv::StringRecord, fallback: usize) -> usize {
    record
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback)
}

fn parse_field<T: FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    line: usize,
) -> Result<T, StreamError> {
    let raw = record
        .get(idx)
        .ok_or_else(|| StreamError::line(line, format!("missing field {name}")))?;
    raw.parse()
        .map_err(|_| StreamError::line(line, format!("{name}: cannot parse {raw:?}")))
}

pub fn read_steering_trace(path: impl AsRef<Path>) -> Result<SteeringTrace, StreamError> {
    read_steering_trace_at(path, DEFAULT_FPS)
}

pub fn read_steering_trace_at(path: impl AsRef<Path>, fps: u32) -> Result<SteeringTrace, StreamError> {
    parse_steering_trace(open(path.as_ref())?, fps)
}

pub fn parse_steering_trace<R: Read>(reader: R, fps: u32) -> Result<SteeringTrace, StreamError> {
    let mut rdr = csv_reader(reader, &TRACE_HEADER)?;
    let mut samples: Vec<SteeringSample> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = record_line(&row, i + 2);
        let frame_index: u64 = parse_field(&row, 0, "frame_index", line)?;
        let primary_angle_deg: f64 = parse_field(&row, 1, "primary_angle_deg", line)?;
        let secondary_angle_deg: f64 = parse_field(&row, 2, "secondary_angle_deg", line)?;
        if !primary_angle_deg.is_finite() || !secondary_angle_deg.is_finite() {
            return Err(StreamError::line(line, "non-finite angle"));
        }
        if let Some(prev) = samples.last() {
            if frame_index == prev.frame_index {
                return Err(StreamError::DuplicateFrame {
                    line,
                    frame: frame_index,
                });
            }
            if frame_index < prev.frame_index {
                return Err(StreamError::NonMonotoneFrame {
                    line,
                    frame: frame_index,
                    previous: prev.frame_index,
                });
            }
        }
        samples.push(SteeringSample {
            frame_index,
            primary_angle_deg,
            secondary_angle_deg,
        });
    }
    SteeringTrace::new(samples, fps)
}

pub fn write_steering_trace<W: Write>(trace: &SteeringTrace, writer: W) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{}", TRACE_HEADER.join(","))?;
    for s in trace.samples() {
        writeln!(
            w,
            "{},{},{}",
            s.frame_index, s.primary_angle_deg, s.secondary_angle_deg
        )?;
    }
    w.flush()
}

pub fn read_disengagements(path: impl AsRef<Path>) -> Result<Vec<DisengagementEvent>, StreamError> {
    parse_disengagements(open(path.as_ref())?)
}

/// Parses a disengagement list. A completely empty input (no header) is an
/// empty list.
pub fn parse_disengagements<R: Read>(mut reader: R) -> Result<Vec<DisengagementEvent>, StreamError> {
    let mut buf = Vec::new();
    reader
        .read_to_end(&mut buf)
        .map_err(|e| StreamError::line(1, e.to_string()))?;
    if buf.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(Vec::new());
    }
    let mut rdr = csv_reader(buf.as_slice(), &EVENTS_HEADER)?;
    let mut events = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = record_line(&row, i + 2);
        let frame_index: u64 = parse_field(&row, 0, "frame_index", line)?;
        let token = row
            .get(1)
            .ok_or_else(|| StreamError::line(line, "missing field initiator"))?;
        let initiator = token
            .parse()
            .map_err(|token| StreamError::UnknownInitiator { line, token })?;
        events.push(DisengagementEvent {
            frame_index,
            initiator,
        });
    }
    Ok(events)
}

pub fn write_disengagements<W: Write>(events: &[DisengagementEvent], writer: W) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{}", EVENTS_HEADER.join(","))?;
    for e in events {
        writeln!(w, "{},{}", e.frame_index, e.initiator)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, truth: Option<u32>, p: [u32; 5], s: [u32; 5]) -> ClassRecord {
        ClassRecord {
            item_id: id.into(),
            truth,
            primary_topk: p.to_vec(),
            secondary_topk: s.to_vec(),
            primary_probs: None,
            secondary_probs: None,
        }
    }

    #[test]
    fn empty_log_keeps_class_count() {
        let log = parse_class_log("{\"num_classes\": 7}\n".as_bytes()).unwrap();
        assert!(log.is_empty());
        assert_eq!(log.num_classes(), 7);
    }

    #[test]
    fn records_keep_file_order() {
        let text = "{\"num_classes\": 10}\n\
            {\"id\":\"b\",\"truth\":1,\"p_topk\":[1,2,3,4,5],\"s_topk\":[1,2,3,4,5],\"p_probs\":null,\"s_probs\":null}\n\
            {\"id\":\"a\",\"truth\":null,\"p_topk\":[0,2,3,4,5],\"s_topk\":[1,2,3,4,5],\"p_probs\":null,\"s_probs\":null}\n\
            {\"id\":\"c\",\"truth\":9,\"p_topk\":[9,2,3,4,5],\"s_topk\":[1,2,3,4,5]}\n";
        let log = parse_class_log(text.as_bytes()).unwrap();
        let ids: Vec<_> = log.records().iter().map(|r| r.item_id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
        assert_eq!(log.records()[1].truth, None);
    }

    #[test]
    fn argmax_mismatch_names_line() {
        let text = "{\"num_classes\": 6}\n\
            {\"id\":\"ok\",\"truth\":0,\"p_topk\":[0,1,2,3,4],\"s_topk\":[0,1,2,3,4]}\n\
            {\"id\":\"bad\",\"truth\":0,\"p_topk\":[0,1,2,3,4],\"s_topk\":[0,1,2,3,4],\
             \"p_probs\":[0.1,0.5,0.1,0.1,0.1,0.1],\"s_probs\":null}\n";
        let err = parse_class_log(text.as_bytes()).unwrap_err();
        match err {
            StreamError::Line { line, reason } => {
                assert_eq!(line, 3);
                assert!(reason.contains("argmax"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_rejects_bad_records() {
        let dup = "{\"num_classes\": 6}\n\
            {\"id\":\"x\",\"truth\":0,\"p_topk\":[0,1,2,3,4],\"s_topk\":[0,1,2,3,4]}\n\
            {\"id\":\"x\",\"truth\":0,\"p_topk\":[0,1,2,3,4],\"s_topk\":[0,1,2,3,4]}\n";
        assert!(matches!(
            parse_class_log(dup.as_bytes()),
            Err(StreamError::Line { line: 3, .. })
        ));
        let range = "{\"num_classes\": 5}\n\
            {\"id\":\"x\",\"truth\":0,\"p_topk\":[0,1,2,3,5],\"s_topk\":[0,1,2,3,4]}\n";
        assert!(matches!(
            parse_class_log(range.as_bytes()),
            Err(StreamError::Line { line: 2, .. })
        ));
        let repeat = "{\"num_classes\": 9}\n\
            {\"id\":\"x\",\"truth\":0,\"p_topk\":[0,1,2,3,3],\"s_topk\":[0,1,2,3,4]}\n";
        assert!(parse_class_log(repeat.as_bytes()).is_err());
        let sum = "{\"num_classes\": 5}\n\
            {\"id\":\"x\",\"truth\":0,\"p_topk\":[0,1,2,3,4],\"s_topk\":[0,1,2,3,4],\
             \"p_probs\":[0.5,0.1,0.1,0.1,0.1]}\n";
        assert!(parse_class_log(sum.as_bytes()).is_err());
        let garbage = "{\"num_classes\": 5}\nnot json\n";
        assert!(matches!(
            parse_class_log(garbage.as_bytes()),
            Err(StreamError::Line { line: 2, .. })
        ));
        assert!(matches!(
            parse_class_log("".as_bytes()),
            Err(StreamError::MissingHeader)
        ));
    }

    #[test]
    fn class_log_new_validates() {
        let a = rec("a", Some(1), [1, 2, 3, 4, 5], [1, 2, 3, 4, 5]);
        assert!(ClassLog::new(10, vec![a.clone(), a.clone()]).is_err());
        assert!(ClassLog::new(5, vec![a.clone()]).is_err());
        assert!(ClassLog::new(10, vec![a]).is_ok());
    }

    #[test]
    fn trace_parsing() {
        let empty = parse_steering_trace(
            "frame_index,primary_angle_deg,secondary_angle_deg\n".as_bytes(),
            30,
        )
        .unwrap();
        assert!(empty.is_empty());

        let two = parse_steering_trace(
            "frame_index,primary_angle_deg,secondary_angle_deg\n0,1.0,1.2\n1,0.5,0.4\n".as_bytes(),
            30,
        )
        .unwrap();
        assert_eq!(
            two.samples(),
            &[
                SteeringSample {
                    frame_index: 0,
                    primary_angle_deg: 1.0,
                    secondary_angle_deg: 1.2
                },
                SteeringSample {
                    frame_index: 1,
                    primary_angle_deg: 0.5,
                    secondary_angle_deg: 0.4
                },
            ]
        );
    }

    #[test]
    fn trace_rejects_duplicates_and_garbage() {
        let dup = "frame_index,primary_angle_deg,secondary_angle_deg\n6,0,0\n7,0,0\n7,1,1\n";
        let err = parse_steering_trace(dup.as_bytes(), 30).unwrap_err();
        assert!(err.to_string().contains("duplicate frame_index 7"), "{err}");

        let back = "frame_index,primary_angle_deg,secondary_angle_deg\n6,0,0\n5,0,0\n";
        assert!(matches!(
            parse_steering_trace(back.as_bytes(), 30),
            Err(StreamError::NonMonotoneFrame { frame: 5, .. })
        ));
        let word = "frame_index,primary_angle_deg,secondary_angle_deg\n6,left,0\n";
        assert!(parse_steering_trace(word.as_bytes(), 30).is_err());
        let nan = "frame_index,primary_angle_deg,secondary_angle_deg\n6,NaN,0\n";
        assert!(parse_steering_trace(nan.as_bytes(), 30).is_err());
        let header = "frame,primary,secondary\n6,0,0\n";
        assert!(parse_steering_trace(header.as_bytes(), 30).is_err());
    }

    #[test]
    fn window_requires_contiguous_frames() {
        let samples = [0u64, 1, 2, 3, 5, 6, 7]
            .iter()
            .map(|&f| SteeringSample {
                frame_index: f,
                primary_angle_deg: 0.0,
                secondary_angle_deg: 0.0,
            })
            .collect();
        let trace = SteeringTrace::new(samples, 30).unwrap();
        assert_eq!(trace.window(3, 4).map(|w| w.len()), Some(4));
        assert!(trace.window(5, 2).is_none());
        assert!(trace.window(7, 3).is_some());
        assert!(trace.window(2, 4).is_none());
        assert!(trace.window(4, 1).is_none());
    }

    #[test]
    fn disengagement_parsing() {
        assert!(parse_disengagements("".as_bytes()).unwrap().is_empty());
        assert!(parse_disengagements("frame_index,initiator\n".as_bytes())
            .unwrap()
            .is_empty());
        let one = parse_disengagements("frame_index,initiator\n900,human\n".as_bytes()).unwrap();
        assert_eq!(
            one,
            vec![DisengagementEvent {
                frame_index: 900,
                initiator: Initiator::Human
            }]
        );
        let err = parse_disengagements("frame_index,initiator\n900,robot\n".as_bytes()).unwrap_err();
        assert!(matches!(err, StreamError::UnknownInitiator { line: 2, .. }));
    }
}
