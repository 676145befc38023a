//! On-disk formats: the `TEN1` tensor container, label lists and core sets.
//!
//! A tensor file is the 4-byte magic `TEN1`, the order `d` as a little-endian
//! `u32`, `d` little-endian `u64` dimensions, then the values as little-endian
//! `f64` in row-major order. Nothing may follow the values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tring_core::{DenseTensor, Shape, TrCores};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"TEN1";

pub fn encode_tensor(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * t.order() + 8 * t.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(t.order() as u32).to_le_bytes());
    for &d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<DenseTensor, String> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err("not a TEN1 tensor file".into());
    }
    let order = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let header = order
        .checked_mul(8)
        .and_then(|n| n.checked_add(8))
        .filter(|&n| n <= bytes.len())
        .ok_or_else(|| format!("truncated header for order {order}"))?;
    let dims: Vec<usize> = bytes[8..header]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .map(|d| usize::try_from(d).map_err(|_| format!("dimension {d} too large")))
        .collect::<Result<_, _>>()?;
    let numel = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or("dimension product overflows")?;
    let payload = &bytes[header..];
    if Some(payload.len()) != numel.checked_mul(8) {
        return Err(format!(
            "shape {dims:?} needs {numel} values, payload holds {} bytes",
            payload.len()
        ));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(format!("non-finite value {} at offset {pos}", data[pos]));
    }
    let shape = Shape::new(dims).map_err(|e| e.to_string())?;
    DenseTensor::new(shape, data).map_err(|e| e.to_string())
}

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Validation(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_tensor(path: &Path) -> CliResult<DenseTensor> {
    decode_tensor(&read_bytes(path)?).map_err(|msg| CliError::format(path, msg))
}

pub fn write_tensor(path: &Path, t: &DenseTensor) -> CliResult<()> {
    write_atomic(path, &encode_tensor(t))
}

pub fn parse_labels(text: &str) -> Result<Vec<usize>, String> {
    let text = text.strip_suffix('\n').unwrap_or(text);
    if text.is_empty() {
        return Err("no labels".into());
    }
    text.split('\n')
        .enumerate()
        .map(|(i, line)| {
            let line = line.trim();
            line.parse::<usize>()
                .map_err(|_| format!("line {}: expected a nonnegative integer, got {line:?}", i + 1))
        })
        .collect()
}

pub fn format_labels(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

pub fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_labels(&text).map_err(|msg| CliError::format(path, msg))
}

pub fn write_labels(path: &Path, labels: &[usize]) -> CliResult<()> {
    write_atomic(path, format_labels(labels).as_bytes())
}

pub fn core_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("core_{n}.ten"))
}

/// Writes core `n` to `dir/core_<n>.ten`.
pub fn write_cores(dir: &Path, cores: &TrCores) -> CliResult<Vec<PathBuf>> {
    (0..cores.order())
        .map(|n| {
            let path = core_path(dir, n);
            write_tensor(&path, cores.core(n)).map(|_| path)
        })
        .collect()
}

/// Reads `core_0.ten`, `core_1.ten`, … until the next index is missing.
pub fn read_cores(dir: &Path) -> CliResult<TrCores> {
    let mut cores = Vec::new();
    while core_path(dir, cores.len()).exists() {
        cores.push(read_tensor(&core_path(dir, cores.len()))?);
    }
    if cores.is_empty() {
        return Err(CliError::format(dir, "no core_0.ten found"));
    }
    if cores.iter().all(DenseTensor::is_nonnegative) {
        Ok(TrCores::new_nonnegative(cores)?)
    } else {
        Ok(TrCores::new(cores)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(dims: &[usize]) -> DenseTensor {
        let shape = Shape::new(dims.to_vec()).unwrap();
        DenseTensor::from_fn(shape, |i| i.iter().sum::<usize>() as f64 * 0.5 - 1.0)
    }

    #[test]
    fn encoding_layout_is_exact() {
        let t = DenseTensor::new(Shape::new(vec![1, 2]).unwrap(), vec![1.0, -2.5]).unwrap();
        let mut expected = b"TEN1".to_vec();
        expected.extend_from_slice(&[2, 0, 0, 0]);
        expected.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[2, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        expected.extend_from_slice(&(-2.5f64).to_le_bytes());
        assert_eq!(encode_tensor(&t), expected);
        assert_eq!(decode_tensor(&expected).unwrap(), t);
    }

    #[test]
    fn decode_rejects_malformed_input() {
        let good = encode_tensor(&tensor(&[2, 3]));
        assert!(decode_tensor(&good[..good.len() - 1]).is_err());
        let mut extra = good.clone();
        extra.push(0);
        assert!(decode_tensor(&extra).is_err());
        let mut magic = good.clone();
        magic[3] = b'2';
        assert!(decode_tensor(&magic).is_err());
        assert!(decode_tensor(&good[..10]).is_err());
        let mut nan = good.clone();
        let at = nan.len() - 8;
        nan[at..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_tensor(&nan).unwrap_err().contains("non-finite"));
        let mut inf = good;
        let at = inf.len() - 8;
        inf[at..].copy_from_slice(&f64::INFINITY.to_le_bytes());
        assert!(decode_tensor(&inf).is_err());
        // huge dimension must not allocate or overflow
        let mut huge = b"TEN1".to_vec();
        huge.extend_from_slice(&2u32.to_le_bytes());
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_tensor(&huge).is_err());
    }

    #[test]
    fn labels_parse_and_format() {
        assert_eq!(parse_labels("0\n1\n1\n").unwrap(), vec![0, 1, 1]);
        assert_eq!(parse_labels("3\n2").unwrap(), vec![3, 2]);
        assert_eq!(format_labels(&[0, 12]), "0\n12\n");
        assert!(parse_labels("").is_err());
        assert!(parse_labels("1\n\n2\n").is_err());
        assert!(parse_labels("-1\n").is_err());
        assert!(parse_labels("a\n").is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ten");
        write_tensor(&path, &tensor(&[2, 2, 2])).unwrap();
        write_tensor(&path, &tensor(&[3, 1])).unwrap();
        assert_eq!(read_tensor(&path).unwrap(), tensor(&[3, 1]));
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("x.ten")]);
    }
}
