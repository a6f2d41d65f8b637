//! Import of per-frame detector text files (`class cx cy w h conf`, with
//! coordinates normalised to the image size).
//!
//! The frame number of a file is taken from the first capture group of a
//! filename pattern; files that do not match are ignored. Frames inside the
//! imported range without a file become empty frames.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use regex::Regex;

use super::FormatError;
use crate::types::{BoundingBox, FrameDetections};

pub const DEFAULT_FRAME_PATTERN: &str = r"^.*?(\d+)\.txt$";

/// Filename rule mapping a file to its frame number.
#[derive(Debug, Clone)]
pub struct FramePattern {
    regex: Regex,
}

impl FramePattern {
    pub fn new(pattern: &str) -> Result<Self, FormatError> {
        let regex = Regex::new(pattern)
            .map_err(|e| FormatError::Ordering(format!("bad frame pattern: {e}")))?;
        if regex.captures_len() < 2 {
            return Err(FormatError::Ordering(format!(
                "frame pattern {pattern:?} needs a capture group for the frame number"
            )));
        }
        Ok(FramePattern { regex })
    }

    pub fn frame_of(&self, file_name: &str) -> Option<u64> {
        self.regex
            .captures(file_name)?
            .get(1)?
            .as_str()
            .parse()
            .ok()
    }
}

impl Default for FramePattern {
    fn default() -> Self {
        FramePattern::new(DEFAULT_FRAME_PATTERN).expect("valid default pattern")
    }
}

/// Optional explicit frame range; defaults to the smallest and largest
/// frame numbers found.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameRange {
    pub first: Option<u64>,
    pub last: Option<u64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn parse_yolo_line(
    line: &str,
    image_w: f64,
    image_h: f64,
) -> Result<Option<BoundingBox>, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.is_empty() {
        return Ok(None);
    }
    if fields.len() != 6 {
        return Err(format!(
            "expected 6 fields `class cx cy w h conf`, found {}",
            fields.len()
        ));
    }
    let mut values = [0.0f64; 6];
    for (slot, text) in values.iter_mut().zip(&fields) {
        *slot = text
            .parse()
            .map_err(|_| format!("not a number: {text:?}"))?;
    }
    let [_class, cx, cy, w, h, conf] = values;
    BoundingBox::new(cx * image_w, cy * image_h, w * image_w, h * image_h, conf)
        .map(Some)
        .map_err(|e| e.to_string())
}

pub fn import_yolo_dir(
    dir: &Path,
    image_w: f64,
    image_h: f64,
    pattern: &FramePattern,
    range: FrameRange,
) -> Result<Vec<FrameDetections>, FormatError> {
    if !(image_w.is_finite() && image_w > 0.0 && image_h.is_finite() && image_h > 0.0) {
        return Err(FormatError::Ordering(format!(
            "image dimensions must be positive, got {image_w}x{image_h}"
        )));
    }
    let mut files: BTreeMap<u64, PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if !path.is_file() {
            continue;
        }
        let Some(frame) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| pattern.frame_of(n))
        else {
            continue;
        };
        if let Some(other) = files.insert(frame, path.clone()) {
            return Err(FormatError::Ordering(format!(
                "frame {frame} claimed by both {} and {}",
                other.display(),
                path.display()
            )));
        }
    }

    let first = range.first.or_else(|| files.keys().next().copied());
    let last = range.last.or_else(|| files.keys().next_back().copied());
    let (Some(first), Some(last)) = (first, last) else {
        return Ok(Vec::new());
    };
    if last < first {
        return Err(FormatError::Ordering(format!(
            "frame range {first}..={last} is empty"
        )));
    }

    let mut frames = Vec::with_capacity((last - first + 1) as usize);
    for frame in first..=last {
        let mut boxes = Vec::new();
        if let Some(path) = files.get(&frame) {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            for (k, line) in text.lines().enumerate() {
                match parse_yolo_line(line, image_w, image_h) {
                    Ok(Some(b)) => boxes.push(b),
                    Ok(None) => {}
                    Err(message) => {
                        return Err(FormatError::FileParse {
                            path: path.clone(),
                            line: k as u64 + 1,
                            message,
                        })
                    }
                }
            }
        }
        frames.push(FrameDetections::new(frame, boxes));
    }
    Ok(frames)
}

/// Writes one `{prefix}{frame:06}.txt` file per frame with normalised
/// coordinates and class 0. Empty frames produce empty files.
pub fn export_yolo_dir(
    frames: &[FrameDetections],
    dir: &Path,
    image_w: f64,
    image_h: f64,
    prefix: &str,
) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for f in frames {
        let path = dir.join(format!("{prefix}{:06}.txt", f.frame_index));
        let mut out = std::io::BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
        for b in &f.boxes {
            writeln!(
                out,
                "0 {} {} {} {} {}",
                b.cx / image_w,
                b.cy / image_h,
                b.w / image_w,
                b.h / image_h,
                b.conf
            )
            .map_err(io_err(&path))?;
        }
        out.flush().map_err(io_err(&path))?;
    }
    Ok(())
}
