//! Signal loading and storage: binary PGM/PPM images, PCM16 mono WAV audio,
//! and a raw self-describing container for d-dimensional grids.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected}, found {found}")]
    BadMagic { expected: String, found: String },
    #[error("truncated file: needed {needed} bytes, had {had}")]
    TruncatedFile { needed: usize, had: usize },
    #[error("unsupported maxval {0} (only 255 supported)")]
    UnsupportedMaxval(u32),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("file too short: wanted {wanted} samples, found {found}")]
    TooShort { wanted: usize, found: usize },
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
}

/// A dense d-dimensional signal with values in their native range.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Extent per axis, slowest axis first.
    pub extents: Vec<usize>,
    pub channels: usize,
    /// Row-major, channel-interleaved values.
    pub values: Vec<f64>,
    /// Native range: [0, 255] for 8-bit images, [-1, 1] for audio.
    pub lo: f64,
    pub hi: f64,
}

impl Grid {
    pub fn new(extents: Vec<usize>, channels: usize, values: Vec<f64>, lo: f64, hi: f64) -> Self {
        let expect: usize = extents.iter().product::<usize>() * channels;
        assert_eq!(values.len(), expect, "value count must match extents");
        assert!(hi > lo, "native range must be non-empty");
        Grid {
            extents,
            channels,
            values,
            lo,
            hi,
        }
    }

    pub fn total_points(&self) -> usize {
        self.extents.iter().product()
    }

    /// Width of the native dynamic range, the PSNR peak.
    pub fn peak(&self) -> f64 {
        self.hi - self.lo
    }

    /// Values rescaled from the native range to [-1, 1].
    pub fn normalized(&self) -> Vec<f64> {
        let scale = 2.0 / (self.hi - self.lo);
        self.values.iter().map(|v| (v - self.lo) * scale - 1.0).collect()
    }

    /// Maps [-1, 1] values back to the native range of this grid.
    pub fn denormalize(&self, normalized: &[f64]) -> Vec<f64> {
        let scale = (self.hi - self.lo) / 2.0;
        normalized.iter().map(|v| (v + 1.0) * scale + self.lo).collect()
    }
}

fn parse_netpbm_header(bytes: &[u8], magic: &str) -> Result<(usize, usize, usize), DataError> {
    let found: String = bytes
        .iter()
        .take(2)
        .map(|&b| b as char)
        .collect();
    if found != magic {
        return Err(DataError::BadMagic {
            expected: magic.to_string(),
            found,
        });
    }
    // read three whitespace-separated integers after the magic, skipping
    // '#' comment lines
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(DataError::TruncatedFile {
                needed: pos + 1,
                had: bytes.len(),
            });
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("digits are utf-8")
            .parse()
            .map_err(|_| DataError::HeaderMismatch("dimension overflow".into()))?;
    }
    let (width, height, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(DataError::UnsupportedMaxval(maxval as u32));
    }
    // single whitespace byte separates header from payload
    pos += 1;
    Ok((width, height, pos))
}

fn read_netpbm(path: &Path, magic: &str, channels: usize) -> Result<Grid, DataError> {
    let bytes = fs::read(path)?;
    let (width, height, offset) = parse_netpbm_header(&bytes, magic)?;
    let needed = offset + width * height * channels;
    if bytes.len() < needed {
        return Err(DataError::TruncatedFile {
            needed,
            had: bytes.len(),
        });
    }
    let values = bytes[offset..needed].iter().map(|&b| b as f64).collect();
    Ok(Grid::new(vec![height, width], channels, values, 0.0, 255.0))
}

fn write_netpbm(grid: &Grid, path: &Path, magic: &str, channels: usize) -> Result<(), DataError> {
    if grid.extents.len() != 2 || grid.channels != channels {
        return Err(DataError::HeaderMismatch(format!(
            "expected a 2-D {channels}-channel grid"
        )));
    }
    let mut out = format!("{magic}\n{} {}\n255\n", grid.extents[1], grid.extents[0]).into_bytes();
    out.extend(
        grid.values
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8),
    );
    fs::write(path, out)?;
    Ok(())
}

/// Reads a binary (P5) grayscale image with maxval 255.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<Grid, DataError> {
    read_netpbm(path.as_ref(), "P5", 1)
}

/// Reads a binary (P6) RGB image with maxval 255.
pub fn read_ppm(path: impl AsRef<Path>) -> Result<Grid, DataError> {
    read_netpbm(path.as_ref(), "P6", 3)
}

pub fn write_pgm(grid: &Grid, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_netpbm(grid, path.as_ref(), "P5", 1)
}

pub fn write_ppm(grid: &Grid, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_netpbm(grid, path.as_ref(), "P6", 3)
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Reads the first `samples` samples of a PCM16 mono WAV file, mapped to
/// [-1, 1] by dividing by 32768.
pub fn read_wav(path: impl AsRef<Path>, samples: usize) -> Result<Grid, DataError> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(DataError::BadMagic {
            expected: "RIFF/WAVE".into(),
            found: String::from_utf8_lossy(bytes.get(0..4).unwrap_or(b"")).into_owned(),
        });
    }
    let mut pos = 12;
    let mut data: Option<&[u8]> = None;
    let mut format: Option<(u16, u16, u16)> = None; // (audio format, channels, bits)
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body_end = (pos + 8 + size).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(DataError::TruncatedFile {
                        needed: pos + 24,
                        had: bytes.len(),
                    });
                }
                format = Some((le_u16(&body[0..2]), le_u16(&body[2..4]), le_u16(&body[14..16])));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos += 8 + size + (size & 1);
    }
    let (fmt, channels, bits) =
        format.ok_or_else(|| DataError::HeaderMismatch("missing fmt chunk".into()))?;
    if fmt != 1 || bits != 16 {
        return Err(DataError::UnsupportedEncoding(format!(
            "format {fmt}, {bits}-bit (need PCM16)"
        )));
    }
    if channels != 1 {
        return Err(DataError::UnsupportedEncoding(format!(
            "{channels} channels (need mono)"
        )));
    }
    let data = data.ok_or_else(|| DataError::HeaderMismatch("missing data chunk".into()))?;
    let available = data.len() / 2;
    if available < samples {
        return Err(DataError::TooShort {
            wanted: samples,
            found: available,
        });
    }
    let values = data[..samples * 2]
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect();
    Ok(Grid::new(vec![samples], 1, values, -1.0, 1.0))
}

/// Writes a PCM16 mono WAV file from [-1, 1] samples.
pub fn write_wav(grid: &Grid, path: impl AsRef<Path>, sample_rate: u32) -> Result<(), DataError> {
    if grid.extents.len() != 1 || grid.channels != 1 {
        return Err(DataError::HeaderMismatch("expected a 1-D mono grid".into()));
    }
    let n = grid.values.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend(b"RIFF");
    out.extend((36 + data_len).to_le_bytes());
    out.extend(b"WAVEfmt ");
    out.extend(16u32.to_le_bytes());
    out.extend(1u16.to_le_bytes()); // PCM
    out.extend(1u16.to_le_bytes()); // mono
    out.extend(sample_rate.to_le_bytes());
    out.extend((sample_rate * 2).to_le_bytes()); // byte rate
    out.extend(2u16.to_le_bytes()); // block align
    out.extend(16u16.to_le_bytes()); // bits per sample
    out.extend(b"data");
    out.extend(data_len.to_le_bytes());
    for &v in &grid.values {
        let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend(q.to_le_bytes());
    }
    fs::write(path.as_ref(), out)?;
    Ok(())
}

/// Crops a grid to `new_extents`, keeping the origin corner of every axis.
pub fn crop(grid: &Grid, new_extents: &[usize]) -> Result<Grid, DataError> {
    if new_extents.len() != grid.extents.len()
        || new_extents.iter().zip(&grid.extents).any(|(&n, &e)| n == 0 || n > e)
    {
        return Err(DataError::HeaderMismatch(format!(
            "cannot crop {:?} to {:?}",
            grid.extents, new_extents
        )));
    }
    let c = grid.channels;
    let n: usize = new_extents.iter().product();
    let mut values = Vec::with_capacity(n * c);
    let mut idx = vec![0usize; new_extents.len()];
    for _ in 0..n {
        let mut flat = 0usize;
        for (i, &coord) in idx.iter().enumerate() {
            flat = flat * grid.extents[i] + coord;
        }
        values.extend_from_slice(&grid.values[flat * c..(flat + 1) * c]);
        for i in (0..idx.len()).rev() {
            idx[i] += 1;
            if idx[i] < new_extents[i] {
                break;
            }
            idx[i] = 0;
        }
    }
    Ok(Grid::new(new_extents.to_vec(), c, values, grid.lo, grid.hi))
}

const GRID_MAGIC: &[u8; 5] = b"GRID1";

/// Writes a grid to the raw container: magic `GRID1`, little-endian u32 axis
/// count, extents, channel count, f64 native range bounds, then the f64
/// payload.
pub fn write_raw_grid(grid: &Grid, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut out = Vec::new();
    out.extend(GRID_MAGIC);
    out.extend((grid.extents.len() as u32).to_le_bytes());
    for &e in &grid.extents {
        out.extend((e as u32).to_le_bytes());
    }
    out.extend((grid.channels as u32).to_le_bytes());
    out.extend(grid.lo.to_le_bytes());
    out.extend(grid.hi.to_le_bytes());
    for &v in &grid.values {
        out.extend(v.to_le_bytes());
    }
    fs::write(path.as_ref(), out)?;
    Ok(())
}

/// Reads a grid written by [`write_raw_grid`]; round trips are bitwise exact.
pub fn read_raw_grid(path: impl AsRef<Path>) -> Result<Grid, DataError> {
    let bytes = fs::read(path.as_ref())?;
    let take = |pos: usize, n: usize| -> Result<&[u8], DataError> {
        bytes.get(pos..pos + n).ok_or(DataError::TruncatedFile {
            needed: pos + n,
            had: bytes.len(),
        })
    };
    let magic = take(0, 5)?;
    if magic != GRID_MAGIC {
        return Err(DataError::BadMagic {
            expected: String::from_utf8_lossy(GRID_MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let dims = le_u32(take(5, 4)?) as usize;
    if dims == 0 || dims > 16 {
        return Err(DataError::HeaderMismatch(format!("implausible axis count {dims}")));
    }
    let mut pos = 9;
    let mut extents = Vec::with_capacity(dims);
    for _ in 0..dims {
        extents.push(le_u32(take(pos, 4)?) as usize);
        pos += 4;
    }
    let channels = le_u32(take(pos, 4)?) as usize;
    pos += 4;
    let lo = f64::from_le_bytes(take(pos, 8)?.try_into().expect("8 bytes"));
    let hi = f64::from_le_bytes(take(pos + 8, 8)?.try_into().expect("8 bytes"));
    pos += 16;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(DataError::HeaderMismatch(format!("bad native range [{lo}, {hi}]")));
    }
    let count: usize = extents.iter().product::<usize>() * channels;
    let payload = take(pos, count * 8)?;
    if bytes.len() != pos + count * 8 {
        return Err(DataError::HeaderMismatch(format!(
            "payload of {} bytes disagrees with header ({} values)",
            bytes.len() - pos,
            count
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Grid::new(extents, channels, values, lo, hi))
}
