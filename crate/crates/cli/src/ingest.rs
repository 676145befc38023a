use std::fs;
use std::path::{Path, PathBuf};

use tring_core::{DenseTensor, Shape};

use crate::error::{CliError, CliResult};
use crate::pnm::{read_pnm, resize_area};

/// Image corpus stacked into a tensor with samples on the last mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// `height × width × N` for grayscale, `height × width × 3 × N` for color.
    pub data: DenseTensor,
    pub labels: Vec<usize>,
    /// Class directory names; label `l` is `classes[l]`.
    pub classes: Vec<String>,
}

fn sorted_entries(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::io(dir, e))?;
    entries.retain(|p| {
        !p.file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with('.'))
    });
    entries.sort();
    Ok(entries)
}

/// Reads every image under `dir/<class>/`, classes and files in
/// lexicographic order, scaled to `[0, 1]` and area-resampled to
/// `height × width`.
pub fn ingest_images(dir: &Path, height: usize, width: usize) -> CliResult<Corpus> {
    if height == 0 || width == 0 {
        return Err(CliError::Validation(format!(
            "target size {height}x{width} must be positive"
        )));
    }
    let class_dirs: Vec<PathBuf> = sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.is_empty() {
        return Err(CliError::format(dir, "no class subdirectories"));
    }

    let mut channels = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut classes = Vec::new();
    for (label, class_dir) in class_dirs.iter().enumerate() {
        let files: Vec<PathBuf> = sorted_entries(class_dir)?
            .into_iter()
            .filter(|p| p.is_file())
            .collect();
        if files.is_empty() {
            return Err(CliError::format(class_dir, "class directory holds no images"));
        }
        for file in files {
            let img = read_pnm(&file)?;
            match channels {
                None => channels = Some(img.channels),
                Some(c) if c != img.channels => {
                    return Err(CliError::format(
                        &file,
                        "corpus mixes grayscale and color images",
                    ));
                }
                Some(_) => {}
            }
            let unit: Vec<f64> = img
                .samples
                .iter()
                .map(|&s| f64::from(s) / f64::from(img.maxval))
                .collect();
            values.push(resize_area(
                &unit,
                img.height,
                img.width,
                img.channels,
                height,
                width,
            ));
            labels.push(label);
        }
        classes.push(class_dir.file_name().unwrap().to_string_lossy().into_owned());
    }

    let channels = channels.expect("at least one image");
    let n = values.len();
    let dims = if channels == 1 {
        vec![height, width, n]
    } else {
        vec![height, width, channels, n]
    };
    // resampled images are pixel-major with interleaved channels
    let data = DenseTensor::from_fn(Shape::new(dims)?, |i| {
        let (y, x) = (i[0], i[1]);
        let (c, s) = if channels == 1 { (0, i[2]) } else { (i[2], i[3]) };
        values[s][(y * width + x) * channels + c]
    });
    Ok(Corpus {
        data,
        labels,
        classes,
    })
}
