//! File formats.
//!
//! Stack files are little-endian binary:
//!
//! ```text
//! offset  size  field
//! 0       12    magic  "PORO-STRAIN\0"
//! 12      4     u32    format version (1)
//! 16      4     u32    N (frames)
//! 20      4     u32    H (rows)
//! 24      4     u32    W (columns)
//! 28      8     f64    sample_time_s
//! 36      1     u8     kind (0 = incremental, 1 = cumulative)
//! 37      8*NHW f64    values, frame-major then row-major
//! ```
//!
//! Masks are CSV (`frame,label,snr_db`, frames numbered from 1). Maps are CSV
//! with one row per image row, or 8-bit binary PGM (P5) plus a `key = value`
//! sidecar holding the linear grey-level bounds.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::degrade::{FrameLabel, FrameQualityMask};
use crate::error::{Error, Result};
use crate::map::PixelMap;
use crate::stack::{StackKind, StrainStack};

pub const STACK_MAGIC: &[u8; 12] = b"PORO-STRAIN\0";
pub const STACK_VERSION: u32 = 1;
const HEADER_LEN: usize = 37;

pub fn encode_stack(stack: &StrainStack) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * stack.data().len());
    out.extend_from_slice(STACK_MAGIC);
    out.extend_from_slice(&STACK_VERSION.to_le_bytes());
    for dim in [stack.n_frames(), stack.height(), stack.width()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&stack.sample_time_s().to_le_bytes());
    out.push(match stack.kind() {
        StackKind::Incremental => 0,
        StackKind::Cumulative => 1,
    });
    for v in stack.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_stack(bytes: &[u8]) -> Result<StrainStack> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..12] != STACK_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(12);
    if version != STACK_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let (n, h, w) = (u32_at(16) as usize, u32_at(20) as usize, u32_at(24) as usize);
    let ts = f64::from_le_bytes(bytes[28..36].try_into().unwrap());
    let kind = match bytes[36] {
        0 => StackKind::Incremental,
        1 => StackKind::Cumulative,
        k => return Err(Error::Format(format!("unknown kind flag {k}"))),
    };
    let count = n
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * 8 {
        return Err(Error::Format(format!("expected {} data bytes, found {}", count * 8, body.len())));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    StrainStack::new(n, h, w, ts, kind, data)
}

pub fn write_stack(path: &Path, stack: &StrainStack) -> Result<()> {
    fs::write(path, encode_stack(stack)).map_err(|e| Error::io(path, e))
}

pub fn read_stack(path: &Path) -> Result<StrainStack> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_stack(&bytes)
}

pub fn mask_to_csv(mask: &FrameQualityMask) -> String {
    let mut out = String::from("frame,label,snr_db\n");
    for (n, (label, snr)) in mask.labels.iter().zip(&mask.applied_snr_db).enumerate() {
        let label = match label {
            FrameLabel::Good => "good",
            FrameLabel::Bad => "bad",
        };
        let _ = writeln!(out, "{},{label},{snr}", n + 1);
    }
    out
}

pub fn mask_from_csv(text: &str) -> Result<FrameQualityMask> {
    let err = |line: usize, msg: String| Error::Parse { what: "mask CSV", line, msg };
    let mut labels = Vec::new();
    let mut snr = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<_> = line.split(',').map(str::trim).collect();
        let [frame, label, db] = fields[..] else {
            return Err(err(i + 1, "expected 3 fields".into()));
        };
        let frame: usize = frame.parse().map_err(|e| err(i + 1, format!("frame: {e}")))?;
        if frame != labels.len() + 1 {
            return Err(err(i + 1, format!("frames must be listed in order; expected {}", labels.len() + 1)));
        }
        labels.push(match label {
            "good" => FrameLabel::Good,
            "bad" => FrameLabel::Bad,
            other => return Err(err(i + 1, format!("unknown label {other:?}"))),
        });
        snr.push(db.parse().map_err(|e| err(i + 1, format!("snr_db: {e}")))?);
    }
    Ok(FrameQualityMask { labels, applied_snr_db: snr })
}

pub fn write_mask(path: &Path, mask: &FrameQualityMask) -> Result<()> {
    fs::write(path, mask_to_csv(mask)).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: &Path) -> Result<FrameQualityMask> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    mask_from_csv(&text)
}

pub fn map_to_csv<T: std::fmt::Display>(map: &PixelMap<T>) -> String {
    let mut out = String::new();
    for row in map.data.chunks(map.width) {
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn map_from_csv(text: &str) -> Result<PixelMap<f64>> {
    let mut data = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { what: "map CSV", line: i + 1, msg: e.to_string() })?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse { what: "map CSV", line: i + 1, msg: "ragged row".into() })
            }
            _ => {}
        }
        data.extend(row);
        height += 1;
    }
    Ok(PixelMap::from_vec(height, width.unwrap_or(0), data))
}

/// Linear grey-level bounds used by [`map_to_pgm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreyRange {
    pub min: f64,
    pub max: f64,
}

impl GreyRange {
    /// Min and max over finite values that pass `keep`.
    pub fn of(map: &PixelMap<f64>, keep: Option<&PixelMap<bool>>) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, &v) in map.data.iter().enumerate() {
            if v.is_finite() && keep.is_none_or(|k| k.data[i]) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if lo > hi {
            (lo, hi) = (0.0, 0.0);
        }
        Self { min: lo, max: hi }
    }

    pub fn grey(&self, v: f64) -> u8 {
        if !v.is_finite() {
            return 0;
        }
        let span = self.max - self.min;
        if span <= 0.0 {
            return if v >= self.min { 255 } else { 0 };
        }
        ((v - self.min) / span * 255.0).round().clamp(0.0, 255.0) as u8
    }

    pub fn sidecar(&self) -> String {
        format!(
            "colormap = linear\nmin = {}\nmax = {}\ngrey_min = 0\ngrey_max = 255\nunit = s\nnon_finite = 0\n",
            self.min, self.max
        )
    }
}

/// Binary PGM (P5, maxval 255). Pixels masked out by `keep` are written as 0.
pub fn map_to_pgm(map: &PixelMap<f64>, range: GreyRange, keep: Option<&PixelMap<bool>>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width, map.height).into_bytes();
    out.extend(map.data.iter().enumerate().map(|(i, &v)| {
        if keep.is_none_or(|k| k.data[i]) {
            range.grey(v)
        } else {
            0
        }
    }));
    out
}

/// Write `<stem>.csv`, `<stem>.pgm` and `<stem>.pgm.txt` into `dir`.
pub fn write_map_files(
    dir: &Path,
    stem: &str,
    map: &PixelMap<f64>,
    keep: Option<&PixelMap<bool>>,
) -> Result<GreyRange> {
    let range = GreyRange::of(map, keep);
    let put = |name: String, bytes: Vec<u8>| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    };
    put(format!("{stem}.csv"), map_to_csv(map).into_bytes())?;
    put(format!("{stem}.pgm"), map_to_pgm(map, range, keep))?;
    put(format!("{stem}.pgm.txt"), range.sidecar().into_bytes())?;
    Ok(range)
}
