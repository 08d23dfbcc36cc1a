//! Frame input for `preprocess`: a directory of PNG files, or a raw planar
//! u8 video (`[frame][channel][row][col]`) next to a JSON sidecar with the
//! same stem. Output is raw planar little-endian f32 with its own sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use argus_core::preprocessing::{Frame, FrameBuffer, Method, NetInput, NET_CHANNELS, NET_HEIGHT, NET_WIDTH};
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawVideoSidecar {
    pub height: usize,
    pub width: usize,
    pub fps: u32,
    #[serde(default)]
    pub start_frame: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetInputSidecar {
    pub method: Method,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub frames: usize,
    pub first_frame: Option<u64>,
    pub fps: u32,
    pub dtype: String,
    pub layout: String,
}

pub const LAYOUT: &str = "frame,channel,row,col";

pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

/// Files a frame source reads, in frame order.
pub fn source_files(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_dir() {
        let mut pngs: Vec<PathBuf> = fs::read_dir(input)
            .map_err(|e| CliError::io(input, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect();
        pngs.sort();
        if pngs.is_empty() {
            return Err(CliError::Input(format!("{}: no PNG frames", input.display())));
        }
        Ok(pngs)
    } else {
        if input.extension().is_some_and(|x| x == "json") {
            return Err(CliError::Input(format!(
                "{}: pass the raw video, not its sidecar",
                input.display()
            )));
        }
        Ok(vec![input.to_path_buf(), sidecar_path(input)])
    }
}

/// Loads the buffer and the frame rate it was recorded at.
pub fn load(input: &Path, fps: u32, start_frame: u64) -> Result<(FrameBuffer, u32)> {
    let files = source_files(input)?;
    if input.is_dir() {
        let frames = files
            .iter()
            .map(|p| {
                let img = image::open(p)
                    .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?
                    .to_rgb8();
                let (w, h) = img.dimensions();
                Ok(Frame::from_rgb8(h as usize, w as usize, img.into_raw())?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((FrameBuffer::new(start_frame, frames)?, fps))
    } else {
        let side_path = &files[1];
        let side_text = fs::read_to_string(side_path).map_err(|e| CliError::io(side_path, e))?;
        let side: RawVideoSidecar = serde_json::from_str(&side_text)
            .map_err(|e| CliError::Input(format!("{}: {e}", side_path.display())))?;
        let data = fs::read(input).map_err(|e| CliError::io(input, e))?;
        let plane = side.height * side.width;
        let per_frame = 3 * plane;
        if per_frame == 0 || data.is_empty() || data.len() % per_frame != 0 {
            return Err(CliError::Input(format!(
                "{}: {} bytes is not a whole number of {}x{}x3 frames",
                input.display(),
                data.len(),
                side.height,
                side.width
            )));
        }
        let frames = data
            .chunks_exact(per_frame)
            .map(|chunk| {
                let pixels = Array3::from_shape_fn((side.height, side.width, 3), |(y, x, c)| {
                    chunk[c * plane + y * side.width + x]
                });
                Frame::new(pixels)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok((FrameBuffer::new(side.start_frame, frames)?, side.fps))
    }
}

/// Raw planar u8 encoding of frames, the inverse of [`load`] for raw input.
pub fn encode_raw_video(frames: &[Frame]) -> Vec<u8> {
    let mut out = Vec::new();
    for f in frames {
        for c in 0..3 {
            for y in 0..f.height() {
                for x in 0..f.width() {
                    out.push(f.pixels()[[y, x, c]]);
                }
            }
        }
    }
    out
}

pub fn encode_net_inputs(inputs: &[(u64, NetInput)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(inputs.len() * NET_CHANNELS * NET_HEIGHT * NET_WIDTH * 4);
    for (_, input) in inputs {
        for c in 0..NET_CHANNELS {
            for y in 0..NET_HEIGHT {
                for x in 0..NET_WIDTH {
                    out.extend_from_slice(&input.pixels[[y, x, c]].to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn decode_net_inputs(bytes: &[u8]) -> Vec<Array3<f32>> {
    let plane = NET_HEIGHT * NET_WIDTH;
    bytes
        .chunks_exact(NET_CHANNELS * plane * 4)
        .map(|chunk| {
            Array3::from_shape_fn((NET_HEIGHT, NET_WIDTH, NET_CHANNELS), |(y, x, c)| {
                let i = 4 * (c * plane + y * NET_WIDTH + x);
                f32::from_le_bytes(chunk[i..i + 4].try_into().unwrap())
            })
        })
        .collect()
}
