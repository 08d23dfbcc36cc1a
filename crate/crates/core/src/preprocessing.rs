//! Network-input composition from video frames, and steering-angle dataset
//! balancing.
//!
//! Frames hold 8-bit RGB. Grayscale is integer luma `299R + 587G + 114B`
//! (scaled by 1000), so temporal differences are exact and unaffected by a
//! uniform brightness offset. Every composite is resized bilinearly to
//! 256x144 with three channels:
//!
//! | method | channels |
//! |--------|----------|
//! | M1 | `F[t-20]-F[t-30]`, `F[t-10]-F[t-20]`, `F[t]-F[t-10]` |
//! | M2 | `F[t]-F[t-10]`, `F[t]-F[t-5]`, `F[t]-F[t-1]` |
//! | M3 | gray `F[t-20]`, `F[t-10]`, `F[t]` |
//! | M4 | Sobel magnitude of each color channel of `F[t]` |
//! | M5 | RGB of `F[t]` |
//!
//! Differences live in `[-1, 1]` and are stored as `(d + 1) / 2`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::Execution;

pub const NET_WIDTH: usize = 256;
pub const NET_HEIGHT: usize = 144;
pub const NET_CHANNELS: usize = 3;

/// Luma weights scaled by 1000.
const LUMA: [u32; 3] = [299, 587, 114];
const LUMA_MAX: f64 = 255_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("frame must be HxWx3 with H, W >= 1, got {0:?}")]
    BadShape(Vec<usize>),
    #[error("frames differ in size: {expected:?} vs {found:?}")]
    MixedSizes { expected: (usize, usize), found: (usize, usize) },
    #[error("empty frame buffer")]
    EmptyBuffer,
    #[error("frame {t} needs history back to {needed}, buffer covers {first}..={last}")]
    InsufficientHistory { t: u64, needed: i64, first: u64, last: u64 },
    #[error("unknown method {0:?} (expected m1..m5)")]
    UnknownMethod(String),
    #[error("no angles given")]
    NoAngles,
    #[error("all {0} angles fall outside [-10, 10)")]
    AllOutOfRange(usize),
}

/// An 8-bit RGB frame; [`Frame::value`] gives the `[0, 1]` view.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pixels: Array3<u8>,
}

impl Frame {
    /// `pixels` is indexed `[row, column, channel]`.
    pub fn new(pixels: Array3<u8>) -> Result<Self, PreprocessError> {
        let s = pixels.shape();
        if s[0] == 0 || s[1] == 0 || s[2] != 3 {
            return Err(PreprocessError::BadShape(s.to_vec()));
        }
        Ok(Frame { pixels })
    }

    /// Interleaved RGB bytes, row-major.
    pub fn from_rgb8(height: usize, width: usize, data: Vec<u8>) -> Result<Self, PreprocessError> {
        let pixels = Array3::from_shape_vec((height, width, 3), data)
            .map_err(|_| PreprocessError::BadShape(vec![height, width, 3]))?;
        Frame::new(pixels)
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Result<Self, PreprocessError> {
        Frame::new(Array3::from_shape_fn((height, width, 3), |(_, _, c)| rgb[c]))
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn pixels(&self) -> &Array3<u8> {
        &self.pixels
    }

    pub fn value(&self, y: usize, x: usize, c: usize) -> f32 {
        self.pixels[[y, x, c]] as f32 / 255.0
    }

    fn luma(&self) -> Array2<i64> {
        Array2::from_shape_fn((self.height(), self.width()), |(y, x)| {
            (0..3)
                .map(|c| LUMA[c] as i64 * self.pixels[[y, x, c]] as i64)
                .sum()
        })
    }

    /// Grayscale in `[0, 1]`.
    pub fn gray(&self) -> Array2<f64> {
        self.luma().mapv(|v| v as f64 / LUMA_MAX)
    }
}

/// Consecutive frames starting at frame index `start`, all the same size.
#[derive(Clone, Debug)]
pub struct FrameBuffer {
    start: u64,
    frames: Vec<Frame>,
}

impl FrameBuffer {
    pub fn new(start: u64, frames: Vec<Frame>) -> Result<Self, PreprocessError> {
        let first = frames.first().ok_or(PreprocessError::EmptyBuffer)?;
        let expected = (first.height(), first.width());
        for f in &frames {
            let found = (f.height(), f.width());
            if found != expected {
                return Err(PreprocessError::MixedSizes { expected, found });
            }
        }
        Ok(FrameBuffer { start, frames })
    }

    pub fn first_index(&self) -> u64 {
        self.start
    }

    pub fn last_index(&self) -> u64 {
        self.start + self.frames.len() as u64 - 1
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn get(&self, t: u64) -> Option<&Frame> {
        t.checked_sub(self.start)
            .and_then(|i| self.frames.get(i as usize))
    }

    fn require(&self, t: u64, history: u64) -> Result<(), PreprocessError> {
        if t > self.last_index() || t < self.start + history {
            return Err(PreprocessError::InsufficientHistory {
                t,
                needed: t as i64 - history as i64,
                first: self.start,
                last: self.last_index(),
            });
        }
        Ok(())
    }

    fn at(&self, t: u64) -> &Frame {
        &self.frames[(t - self.start) as usize]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    M1,
    M2,
    M3,
    M4,
    M5,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::M1, Method::M2, Method::M3, Method::M4, Method::M5];

    /// How many frames back the method looks.
    pub fn history(self) -> u64 {
        match self {
            Method::M1 => 30,
            Method::M2 => 10,
            Method::M3 => 20,
            Method::M4 | Method::M5 => 0,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::M1 => "m1",
            Method::M2 => "m2",
            Method::M3 => "m3",
            Method::M4 => "m4",
            Method::M5 => "m5",
        };
        f.write_str(s)
    }
}

impl FromStr for Method {
    type Err = PreprocessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Method::M1),
            "m2" => Ok(Method::M2),
            "m3" => Ok(Method::M3),
            "m4" => Ok(Method::M4),
            "m5" => Ok(Method::M5),
            _ => Err(PreprocessError::UnknownMethod(s.to_string())),
        }
    }
}

/// A 144x256x3 network input with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetInput {
    pub pixels: Array3<f32>,
    pub method: Method,
}

/// Frame offsets `(later, earlier)` behind `t` for each difference channel.
fn difference_offsets(method: Method) -> Option<[(u64, u64); 3]> {
    match method {
        Method::M1 => Some([(20, 30), (10, 20), (0, 10)]),
        Method::M2 => Some([(0, 10), (0, 5), (0, 1)]),
        _ => None,
    }
}

/// Raw grayscale difference channels of M1/M2 at native resolution, in
/// `[-1, 1]`, before mapping and resizing.
pub fn difference_planes(buf: &FrameBuffer, t: u64, method: Method) -> Result<[Array2<f64>; 3], PreprocessError> {
    let offsets = difference_offsets(method).ok_or(PreprocessError::UnknownMethod(method.to_string()))?;
    buf.require(t, method.history())?;
    Ok(offsets.map(|(later, earlier)| {
        let a = buf.at(t - later).luma();
        let b = buf.at(t - earlier).luma();
        (a - b).mapv(|d| d as f64 / LUMA_MAX)
    }))
}

fn stack(planes: [Array2<f32>; 3], method: Method) -> NetInput {
    let views: Vec<_> = planes.iter().map(|p| p.view()).collect();
    let pixels = ndarray::stack(Axis(2), &views).expect("planes share a shape");
    NetInput { pixels, method }
}

fn finish(planes: [Array2<f64>; 3], method: Method) -> NetInput {
    let resized = planes.map(|p| resize_bilinear(&p.mapv(|v| v as f32), NET_HEIGHT, NET_WIDTH));
    stack(resized, method)
}

fn compose_differences(buf: &FrameBuffer, t: u64, method: Method) -> Result<NetInput, PreprocessError> {
    let planes = difference_planes(buf, t, method)?;
    Ok(finish(planes.map(|p| p.mapv(|d| (d + 1.0) / 2.0)), method))
}

pub fn compose_m1(buf: &FrameBuffer, t: u64) -> Result<NetInput, PreprocessError> {
    compose_differences(buf, t, Method::M1)
}

pub fn compose_m2(buf: &FrameBuffer, t: u64) -> Result<NetInput, PreprocessError> {
    compose_differences(buf, t, Method::M2)
}

pub fn compose_m3(buf: &FrameBuffer, t: u64) -> Result<NetInput, PreprocessError> {
    buf.require(t, 20)?;
    let planes = [20, 10, 0].map(|back| buf.at(t - back).gray());
    Ok(finish(planes, Method::M3))
}

/// Per-channel 3x3 Sobel gradient magnitude at native resolution, divided
/// by 4 and clamped to `[0, 1]`. Borders replicate edge pixels.
pub fn sobel_edges(frame: &Frame) -> [Array2<f32>; 3] {
    let (h, w) = (frame.height(), frame.width());
    [0, 1, 2].map(|c| {
        let at = |y: isize, x: isize| {
            let yy = y.clamp(0, h as isize - 1) as usize;
            let xx = x.clamp(0, w as isize - 1) as usize;
            frame.value(yy, xx, c)
        };
        Array2::from_shape_fn((h, w), |(y, x)| {
            let (y, x) = (y as isize, x as isize);
            let gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
            let gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
            ((gx * gx + gy * gy).sqrt() / 4.0).clamp(0.0, 1.0)
        })
    })
}

pub fn compose_m4(frame: &Frame) -> NetInput {
    let planes = sobel_edges(frame).map(|p| resize_bilinear(&p, NET_HEIGHT, NET_WIDTH));
    stack(planes, Method::M4)
}

pub fn compose_m5(frame: &Frame) -> NetInput {
    let planes = [0, 1, 2].map(|c| {
        let plane = Array2::from_shape_fn((frame.height(), frame.width()), |(y, x)| frame.value(y, x, c));
        resize_bilinear(&plane, NET_HEIGHT, NET_WIDTH)
    });
    stack(planes, Method::M5)
}

pub fn compose(buf: &FrameBuffer, t: u64, method: Method) -> Result<NetInput, PreprocessError> {
    match method {
        Method::M1 => compose_m1(buf, t),
        Method::M2 => compose_m2(buf, t),
        Method::M3 => compose_m3(buf, t),
        Method::M4 | Method::M5 => {
            buf.require(t, 0)?;
            let frame = buf.at(t);
            Ok(if method == Method::M4 {
                compose_m4(frame)
            } else {
                compose_m5(frame)
            })
        }
    }
}

/// Composes every frame of the buffer that has enough history.
pub fn compose_all(buf: &FrameBuffer, method: Method, exec: Execution) -> Vec<(u64, NetInput)> {
    let first = buf.first_index() + method.history();
    let ts: Vec<u64> = (first..=buf.last_index()).collect();
    exec.map(&ts, |&t| (t, compose(buf, t, method).expect("history checked")))
}

/// Bilinear resize with half-pixel centers. Interpolation is written as
/// `a + f * (b - a)`, so constant regions stay exactly constant and an
/// identity-sized resize copies values.
pub fn resize_bilinear(src: &Array2<f32>, out_h: usize, out_w: usize) -> Array2<f32> {
    let (in_h, in_w) = src.dim();
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f32)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|i| {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(inp - 1);
                (lo, hi, (pos - lo as f64) as f32)
            })
            .collect()
    };
    let ys = taps(out_h, in_h);
    let xs = taps(out_w, in_w);
    let lerp = |a: f32, b: f32, f: f32| a + f * (b - a);
    Array2::from_shape_fn((out_h, out_w), |(y, x)| {
        let (y0, y1, fy) = ys[y];
        let (x0, x1, fx) = xs[x];
        let top = lerp(src[[y0, x0]], src[[y0, x1]], fx);
        let bottom = lerp(src[[y1, x0]], src[[y1, x1]], fx);
        lerp(top, bottom, fy).clamp(0.0, 1.0)
    })
}

pub const BALANCE_BINS: usize = 20;
pub const BALANCE_RANGE_DEG: f64 = 10.0;

/// Which frames survive in a bin holding more than the threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "seed")]
pub enum KeepPolicy {
    #[default]
    Earliest,
    Seeded(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceSelection {
    pub mask: Vec<bool>,
    pub threshold: usize,
    pub bin_counts: Vec<usize>,
    pub kept_counts: Vec<usize>,
}

impl BalanceSelection {
    pub fn selected(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// One-degree bin over `[-10, 10)`, or `None` when out of range.
pub fn angle_bin(angle_deg: f64) -> Option<usize> {
    if !(angle_deg.is_finite() && (-BALANCE_RANGE_DEG..BALANCE_RANGE_DEG).contains(&angle_deg)) {
        return None;
    }
    Some((angle_deg.floor() + BALANCE_RANGE_DEG) as usize)
}

pub fn balance_dataset(angles: &[f64]) -> Result<BalanceSelection, PreprocessError> {
    balance_dataset_with(angles, KeepPolicy::Earliest)
}

/// Caps every occupied one-degree bin at the smallest occupied-bin count.
/// Out-of-range frames are dropped.
pub fn balance_dataset_with(angles: &[f64], policy: KeepPolicy) -> Result<BalanceSelection, PreprocessError> {
    if angles.is_empty() {
        return Err(PreprocessError::NoAngles);
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); BALANCE_BINS];
    for (i, &a) in angles.iter().enumerate() {
        if let Some(b) = angle_bin(a) {
            members[b].push(i);
        }
    }
    let bin_counts: Vec<usize> = members.iter().map(Vec::len).collect();
    let threshold = bin_counts
        .iter()
        .copied()
        .filter(|&c| c > 0)
        .min()
        .ok_or(PreprocessError::AllOutOfRange(angles.len()))?;

    let mut rng = match policy {
        KeepPolicy::Earliest => None,
        KeepPolicy::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut mask = vec![false; angles.len()];
    for bin in &mut members {
        let kept: &[usize] = match rng.as_mut() {
            Some(rng) if bin.len() > threshold => bin.partial_shuffle(rng, threshold).0,
            _ => &bin[..bin.len().min(threshold)],
        };
        for &i in kept {
            mask[i] = true;
        }
    }
    let kept_counts = bin_counts.iter().map(|&c| c.min(threshold)).collect();
    Ok(BalanceSelection {
        mask,
        threshold,
        bin_counts,
        kept_counts,
    })
}
