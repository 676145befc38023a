//! Synthetic datasets: tensors with an exact nonnegative ring structure, and
//! labelled image-like blob tensors for clustering and classification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tring_core::ring::{init_random, reconstruct};
use tring_core::{DenseTensor, RankVector, Shape, TrCores};

use crate::error::{CliError, CliResult};

/// A tensor that nonnegative cores of the given ranks represent exactly,
/// together with those cores.
pub fn exact_tr(shape: &Shape, ranks: &RankVector, seed: u64) -> CliResult<(DenseTensor, TrCores)> {
    let cores = init_random(shape, ranks, seed)?;
    Ok((reconstruct(&cores)?, cores))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub height: usize,
    pub width: usize,
    /// 1 gives a `height × width × N` tensor, more adds a channel mode.
    pub channels: usize,
    pub classes: usize,
    pub per_class: usize,
    /// Amplitude of the additive uniform noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            height: 6,
            width: 6,
            channels: 3,
            classes: 3,
            per_class: 20,
            noise: 0.05,
            seed: 0,
        }
    }
}

/// Each class is a Gaussian bump at its own position on a circle around the
/// image centre, brightest in its own channel. Samples jitter the bump
/// position by up to half a pixel and its amplitude by ±20%, then add
/// uniform noise. Samples are ordered class by class.
pub fn blobs(spec: &BlobSpec) -> CliResult<(DenseTensor, Vec<usize>)> {
    let BlobSpec {
        height: h,
        width: w,
        channels: ch,
        classes,
        per_class,
        noise,
        seed,
    } = *spec;
    if h == 0 || w == 0 || ch == 0 || classes == 0 || per_class == 0 {
        return Err(CliError::Validation(format!("degenerate blob spec {spec:?}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(CliError::Validation(format!("noise must be nonnegative, got {noise}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = classes * per_class;
    let radius = 0.3 * h.min(w) as f64;
    let sigma = 0.2 * h.min(w) as f64;
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);

    let mut values = vec![0.0; h * w * ch * n];
    let mut labels = Vec::with_capacity(n);
    for class in 0..classes {
        let angle = std::f64::consts::TAU * class as f64 / classes as f64;
        let (by, bx) = (cy + radius * angle.sin(), cx + radius * angle.cos());
        for _ in 0..per_class {
            let s = labels.len();
            let y0 = by + rng.random_range(-0.5..0.5);
            let x0 = bx + rng.random_range(-0.5..0.5);
            let amplitude = rng.random_range(0.8..1.2);
            for y in 0..h {
                for x in 0..w {
                    let r2 = (y as f64 - y0).powi(2) + (x as f64 - x0).powi(2);
                    let bump = amplitude * (-r2 / (2.0 * sigma * sigma)).exp();
                    for c in 0..ch {
                        let tint = if c == class % ch { 1.0 } else { 0.3 };
                        let idx = ((y * w + x) * ch + c) * n + s;
                        values[idx] = tint * bump + noise * rng.random::<f64>();
                    }
                }
            }
            labels.push(class);
        }
    }
    let dims = if ch == 1 { vec![h, w, n] } else { vec![h, w, ch, n] };
    Ok((DenseTensor::new(Shape::new(dims)?, values)?, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tring_core::ring::relative_error;

    #[test]
    fn exact_tr_is_represented_by_its_cores() {
        let shape = Shape::new(vec![3, 4, 5]).unwrap();
        let ranks = RankVector::new(vec![2, 1, 3]).unwrap();
        let (x, cores) = exact_tr(&shape, &ranks, 4).unwrap();
        assert_eq!(x.shape(), &shape);
        assert!(x.is_nonnegative());
        assert!(relative_error(&x, &cores).unwrap() < 1e-14);
    }

    #[test]
    fn blob_layout_and_determinism() {
        let spec = BlobSpec::default();
        let (x, labels) = blobs(&spec).unwrap();
        assert_eq!(x.dims(), &[6, 6, 3, 60]);
        assert_eq!(labels.len(), 60);
        assert_eq!(labels[..20], [0; 20]);
        assert_eq!(labels[40..], [2; 20]);
        assert!(x.is_nonnegative());
        assert_eq!(blobs(&spec).unwrap().0, x);

        let gray = BlobSpec { channels: 1, ..spec };
        assert_eq!(blobs(&gray).unwrap().0.dims(), &[6, 6, 60]);
    }

    #[test]
    fn class_means_are_far_apart() {
        let (x, labels) = blobs(&BlobSpec { noise: 0.0, ..BlobSpec::default() }).unwrap();
        let n = labels.len();
        let per_pixel = x.data().len() / n;
        let mean = |class: usize| -> Vec<f64> {
            (0..per_pixel)
                .map(|p| {
                    let members: Vec<f64> = (0..n)
                        .filter(|&s| labels[s] == class)
                        .map(|s| x.data()[p * n + s])
                        .collect();
                    members.iter().sum::<f64>() / members.len() as f64
                })
                .collect()
        };
        let (m0, m1) = (mean(0), mean(1));
        let dist: f64 = m0.iter().zip(&m1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dist > 1.0, "class mean distance {dist}");
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(blobs(&BlobSpec { classes: 0, ..BlobSpec::default() }).is_err());
        assert!(blobs(&BlobSpec { noise: -1.0, ..BlobSpec::default() }).is_err());
    }
}
