use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    /// Within-cluster sum of squares of the returned labelling.
    pub wcss: f64,
    /// WCSS after each Lloyd update of the run that produced this result.
    pub history: Vec<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_centroid(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = squared_distance(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn means(x: &Matrix, labels: &[usize], k: usize) -> Matrix {
    let mut sums = Matrix::zeros(k, x.cols());
    let mut counts = vec![0usize; k];
    for (r, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, &v) in sums.data_mut()[l * x.cols()..(l + 1) * x.cols()]
            .iter_mut()
            .zip(x.row(r))
        {
            *s += v;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            for v in &mut sums.data_mut()[c * x.cols()..(c + 1) * x.cols()] {
                *v /= n as f64;
            }
        }
    }
    sums
}

fn wcss(x: &Matrix, labels: &[usize], centroids: &Matrix) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(r, &l)| squared_distance(x.row(r), centroids.row(l)))
        .sum()
}

/// Moves the point farthest from its centroid into each empty cluster.
fn reseed_empty(x: &Matrix, labels: &mut [usize], centroids: &Matrix, k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let far = (0..x.rows())
            .filter(|&r| counts[labels[r]] > 1)
            .map(|r| (r, squared_distance(x.row(r), centroids.row(labels[r]))))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match far {
            Some((r, _)) => labels[r] = empty,
            None => return,
        }
    }
}

/// One Lloyd run from `k` distinct uniformly chosen rows.
pub fn lloyd(x: &Matrix, k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} clusters for {n} samples"
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("k-means on non-finite features".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, n, k).into_vec();
    let mut centroids = Matrix::from_fn(k, x.cols(), |c, j| x[(picks[c], j)]);

    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut next: Vec<usize> = (0..n)
            .map(|r| nearest_centroid(x.row(r), &centroids).0)
            .collect();
        reseed_empty(x, &mut next, &centroids, k);
        let changed = next != labels;
        labels = next;
        centroids = means(x, &labels, k);
        history.push(wcss(x, &labels, &centroids));
        if !changed {
            break;
        }
    }
    Ok(KMeansResult {
        wcss: *history.last().expect("at least one iteration"),
        labels,
        centroids,
        history,
    })
}

/// Best of `restarts` independent Lloyd runs by WCSS.
///
/// Per-run seeds are drawn from `seed` up front, so the outcome does not
/// depend on how the runs are scheduled.
pub fn kmeans(x: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    if restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.next_u64()).collect();
    let runs = seeds
        .par_iter()
        .map(|&s| lloyd(x, k, s, DEFAULT_MAX_ITER))
        .collect::<Result<Vec<_>>>()?;
    Ok(runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.wcss.total_cmp(&b.wcss).then(i.cmp(j)))
        .map(|(_, r)| r)
        .expect("restarts >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::accuracy;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn column(values: &[f64]) -> Matrix {
        Matrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn separates_two_scalar_blobs() {
        let x = column(&[0.0, 0.1, 10.0, 10.1]);
        let r = kmeans(&x, 2, 20, 1).unwrap();
        assert_eq!(accuracy(&r.labels, &[0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn one_cluster_per_sample() {
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![5.0, -1.0]]).unwrap();
        let r = kmeans(&x, 3, 5, 2).unwrap();
        assert_eq!(r.wcss, 0.0);
        let mut sorted = r.labels.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn matches_exhaustive_two_partition() {
        let pts = [
            [0.0, 0.0],
            [0.3, 0.1],
            [0.1, 0.4],
            [5.0, 5.0],
            [5.2, 4.9],
            [4.8, 5.3],
        ];
        let x = Matrix::from_rows(&pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap();
        // exhaustive search over all nontrivial 2-partitions
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << 6) - 1 {
            let labels: Vec<usize> = (0..6).map(|i| ((mask >> i) & 1) as usize).collect();
            best = best.min(wcss(&x, &labels, &means(&x, &labels, 2)));
        }
        let r = kmeans(&x, 2, 200, 3).unwrap();
        assert!((r.wcss - best).abs() < 1e-12);
    }

    #[test]
    fn deterministic_in_seed_and_rejects_bad_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Matrix::from_fn(30, 3, |_, _| rng.sample(StandardNormal));
        assert_eq!(kmeans(&x, 4, 16, 9).unwrap(), kmeans(&x, 4, 16, 9).unwrap());
        assert!(kmeans(&x, 31, 1, 0).is_err());
        assert!(kmeans(&x, 0, 1, 0).is_err());
        assert!(kmeans(&x, 2, 0, 0).is_err());
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // duplicated points force coincident initial centroids for some seeds
        let x = column(&[1.0, 1.0, 1.0, 8.0, 9.0]);
        for seed in 0..20 {
            let r = lloyd(&x, 3, seed, 50).unwrap();
            let mut used = r.labels.clone();
            used.sort();
            used.dedup();
            assert_eq!(used.len(), 3, "seed {seed}: {:?}", r.labels);
        }
    }

    proptest! {
        #[test]
        fn lloyd_objective_never_increases(seed in 0u64..2000, n in 4usize..30, k in 1usize..5) {
            prop_assume!(k <= n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Matrix::from_fn(n, 2, |_, _| rng.sample(StandardNormal));
            let r = lloyd(&x, k, seed, 100).unwrap();
            for w in r.history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
