//! Binary PGM (`P5`) and PPM (`P6`) images.

use std::path::Path;

use crate::error::{CliError, CliResult};
use crate::files::{read_bytes, write_atomic};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// 1 for PGM, 3 for PPM.
    pub channels: usize,
    pub maxval: u16,
    /// Interleaved samples, row-major: `(y * width + x) * channels + c`.
    pub samples: Vec<u16>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Self {
        assert!(channels == 1 || channels == 3, "1 or 3 channels");
        assert_eq!(samples.len(), width * height * channels, "sample count");
        Image {
            width,
            height,
            channels,
            maxval: 255,
            samples: samples.into_iter().map(u16::from).collect(),
        }
    }

    pub fn sample(&self, y: usize, x: usize, c: usize) -> u16 {
        self.samples[(y * self.width + x) * self.channels + c]
    }

    /// Sample scaled to `[0, 1]` by the image's maxval.
    pub fn intensity(&self, y: usize, x: usize, c: usize) -> f64 {
        f64::from(self.sample(y, x, c)) / f64::from(self.maxval)
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("bad {what} in header"))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image, String> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err("not a binary PGM (P5) or PPM (P6) image".into()),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format!("empty image {width}x{height}"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing whitespace after maxval".into());
    }
    let raster = &bytes[h.pos + 1..];
    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or("image dimensions overflow")?;
    if raster.len() < count * bytes_per_sample {
        return Err(format!(
            "raster has {} bytes, expected {}",
            raster.len(),
            count * bytes_per_sample
        ));
    }
    let samples: Vec<u16> = if bytes_per_sample == 1 {
        raster[..count].iter().map(|&b| u16::from(b)).collect()
    } else {
        raster[..2 * count]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    if let Some(&s) = samples.iter().find(|&&s| usize::from(s) > maxval) {
        return Err(format!("sample {s} exceeds maxval {maxval}"));
    }
    Ok(Image {
        width,
        height,
        channels,
        maxval: maxval as u16,
        samples,
    })
}

pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval < 256 {
        out.extend(img.samples.iter().map(|&s| s as u8));
    } else {
        out.extend(img.samples.iter().flat_map(|s| s.to_be_bytes()));
    }
    out
}

pub fn read_pnm(path: &Path) -> CliResult<Image> {
    decode_pnm(&read_bytes(path)?).map_err(|msg| CliError::format(path, msg))
}

pub fn write_pnm(path: &Path, img: &Image) -> CliResult<()> {
    write_atomic(path, &encode_pnm(img))
}

/// Overlap weights of each of `to` equal output cells with the `from` input
/// cells covering the same interval, normalized to sum to one per output.
fn area_weights(from: usize, to: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = from as f64 / to as f64;
    (0..to)
        .map(|o| {
            let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(from);
            (first..last)
                .filter_map(|i| {
                    let overlap = hi.min((i + 1) as f64) - lo.max(i as f64);
                    (overlap > 0.0).then_some((i, overlap / scale))
                })
                .collect()
        })
        .collect()
}

/// Resamples `values` (`height × width × channels`, row-major) to
/// `new_height × new_width` by averaging over each output pixel's footprint.
pub fn resize_area(
    values: &[f64],
    height: usize,
    width: usize,
    channels: usize,
    new_height: usize,
    new_width: usize,
) -> Vec<f64> {
    let wy = area_weights(height, new_height);
    let wx = area_weights(width, new_width);
    let mut out = vec![0.0; new_height * new_width * channels];
    for (oy, rows) in wy.iter().enumerate() {
        for (ox, cols) in wx.iter().enumerate() {
            for c in 0..channels {
                let mut acc = 0.0;
                for &(y, a) in rows {
                    for &(x, b) in cols {
                        acc += a * b * values[(y * width + x) * channels + c];
                    }
                }
                out[(oy * new_width + ox) * channels + c] = acc;
            }
        }
    }
    out
}

/// Maps values to bytes by min-max scaling onto `[0, 255]`. Negative values
/// render white; the scaling then uses the nonnegative values only.
pub fn to_bytes_min_max(values: &[f64]) -> Vec<u8> {
    let visible = values.iter().copied().filter(|&v| v >= 0.0);
    let (lo, hi) = visible.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    values
        .iter()
        .map(|&v| {
            if v < 0.0 {
                255
            } else if hi > lo {
                ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect()
}

/// Tiles equally sized images row by row into a `rows × cols` grid. Unused
/// cells stay black.
pub fn montage(tiles: &[Image], rows: usize, cols: usize) -> Result<Image, String> {
    let first = tiles.first().ok_or("no tiles to arrange")?;
    if tiles.len() > rows * cols {
        return Err(format!(
            "{} tiles do not fit a {rows}x{cols} layout",
            tiles.len()
        ));
    }
    let (h, w, ch) = (first.height, first.width, first.channels);
    if tiles
        .iter()
        .any(|t| (t.height, t.width, t.channels, t.maxval) != (h, w, ch, first.maxval))
    {
        return Err("tiles differ in size or channels".into());
    }
    let (out_w, out_h) = (cols * w, rows * h);
    let mut samples = vec![0u16; out_w * out_h * ch];
    for (k, tile) in tiles.iter().enumerate() {
        let (ty, tx) = (k / cols, k % cols);
        for y in 0..h {
            let src = &tile.samples[y * w * ch..(y + 1) * w * ch];
            let start = ((ty * h + y) * out_w + tx * w) * ch;
            samples[start..start + w * ch].copy_from_slice(src);
        }
    }
    Ok(Image {
        width: out_w,
        height: out_h,
        channels: ch,
        maxval: first.maxval,
        samples,
    })
}
