use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Euclidean k-nearest-neighbour classification by majority vote.
///
/// Neighbours at equal distance are taken in training order. Vote ties go to
/// the class with the smaller summed distance, then to the lower class id.
pub fn knn_classify(
    train: &Matrix,
    train_labels: &[usize],
    test: &Matrix,
    k: usize,
) -> Result<Vec<usize>> {
    if train_labels.len() != train.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} training labels for {} training rows",
            train_labels.len(),
            train.rows()
        )));
    }
    if train.cols() != test.cols() {
        return Err(Error::DimensionMismatch(format!(
            "train features have {} columns, test features {}",
            train.cols(),
            test.cols()
        )));
    }
    if k == 0 || k > train.rows() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} neighbours with {} training samples",
            train.rows()
        )));
    }

    let classify = |row: &[f64]| -> usize {
        let mut dist: Vec<(f64, usize)> = (0..train.rows())
            .map(|j| {
                let d2: f64 = row
                    .iter()
                    .zip(train.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2.sqrt(), j)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        // class -> (votes, summed distance)
        let mut tally: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        for &(d, j) in &dist[..k] {
            let entry = tally.entry(train_labels[j]).or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += d;
        }
        tally
            .into_iter()
            .min_by(|(ca, (va, da)), (cb, (vb, db))| {
                vb.cmp(va).then(da.total_cmp(db)).then(ca.cmp(cb))
            })
            .map(|(c, _)| c)
            .expect("k >= 1")
    };

    Ok((0..test.rows()).map(|r| classify(test.row(r))).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Labels the first `fraction` of each class, in sample order, as training
/// data and leaves the rest for testing.
///
/// Each class contributes `round(fraction · size)` training samples, clamped
/// so that it keeps at least one of each whenever it has two or more samples.
pub fn per_class_prefix_split(labels: &[usize], fraction: f64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "label fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for members in by_class.values() {
        let n = members.len();
        let mut take = (fraction * n as f64).round() as usize;
        if n >= 2 {
            take = take.clamp(1, n - 1);
        } else {
            take = 1;
        }
        split.train.extend(&members[..take]);
        split.test.extend(&members[take..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn nearest_point_wins_for_k1() {
        let train = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0]]).unwrap();
        let test = Matrix::from_rows(&[vec![1.0, 1.0], vec![4.0, 4.5]]).unwrap();
        assert_eq!(knn_classify(&train, &[7, 8, 9], &test, 1).unwrap(), vec![8, 9]);
    }

    #[test]
    fn majority_vote_for_k3() {
        let train = Matrix::new(4, 1, vec![0.0, 0.2, 0.5, 10.0]).unwrap();
        let test = Matrix::new(1, 1, vec![0.4]).unwrap();
        assert_eq!(knn_classify(&train, &[1, 2, 1, 2], &test, 3).unwrap(), vec![1]);
    }

    #[test]
    fn vote_ties_use_summed_distance_then_class_id() {
        let train = Matrix::new(2, 1, vec![1.0, -3.0]).unwrap();
        let test = Matrix::new(1, 1, vec![0.0]).unwrap();
        assert_eq!(knn_classify(&train, &[4, 2], &test, 2).unwrap(), vec![4]);
        let train = Matrix::new(2, 1, vec![1.0, -1.0]).unwrap();
        assert_eq!(knn_classify(&train, &[4, 2], &test, 2).unwrap(), vec![2]);
    }

    #[test]
    fn own_training_set_reproduces_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let train = Matrix::from_fn(25, 4, |_, _| rng.sample(StandardNormal));
        let labels: Vec<usize> = (0..25).map(|i| i % 4).collect();
        assert_eq!(knn_classify(&train, &labels, &train, 1).unwrap(), labels);
    }

    #[test]
    fn matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let train = Matrix::from_fn(20, 3, |_, _| rng.sample(StandardNormal));
        let labels: Vec<usize> = (0..20).map(|_| rng.random_range(0..3)).collect();
        let test = Matrix::from_fn(10, 3, |_, _| rng.sample(StandardNormal));
        let got = knn_classify(&train, &labels, &test, 5).unwrap();
        for t in 0..10 {
            // exhaustive: repeatedly extract the closest remaining point
            let mut remaining: Vec<usize> = (0..20).collect();
            let mut votes = [0usize; 3];
            let mut sums = [0.0f64; 3];
            for _ in 0..5 {
                let (pos, d) = remaining
                    .iter()
                    .enumerate()
                    .map(|(p, &j)| {
                        let d: f64 = (0..3)
                            .map(|c| (test[(t, c)] - train[(j, c)]).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        (p, d)
                    })
                    .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
                let j = remaining.remove(pos);
                votes[labels[j]] += 1;
                sums[labels[j]] += d;
            }
            let mut best = 0;
            for c in 1..3 {
                if votes[c] > votes[best] || (votes[c] == votes[best] && sums[c] < sums[best]) {
                    best = c;
                }
            }
            // classes absent from the vote cannot win
            assert!(votes[best] > 0);
            assert_eq!(got[t], best, "test point {t}");
        }
    }

    #[test]
    fn validation() {
        let train = Matrix::zeros(3, 2);
        assert!(knn_classify(&train, &[0, 1], &train, 1).is_err());
        assert!(knn_classify(&train, &[0, 1, 2], &Matrix::zeros(1, 3), 1).is_err());
        assert!(knn_classify(&train, &[0, 1, 2], &train, 4).is_err());
    }

    #[test]
    fn prefix_split_per_class() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let s = per_class_prefix_split(&labels, 0.4).unwrap();
        assert_eq!(s.train, vec![0, 1, 2, 3]);
        assert_eq!(s.test, vec![4, 5, 6, 7, 8, 9]);
        let s = per_class_prefix_split(&labels, 0.2).unwrap();
        assert_eq!(s.train, vec![0, 1]);
        assert!(per_class_prefix_split(&labels, 1.0).is_err());
        assert!(per_class_prefix_split(&labels, 0.0).is_err());
    }
}
