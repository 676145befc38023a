use std::collections::BTreeMap;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix as WeightMatrix;

use crate::error::{Error, Result};

/// Hoyer sparseness `(√n − ‖v‖₁/‖v‖₂) / (√n − 1)`, in `[0, 1]`.
pub fn sparseness(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "sparseness needs at least two elements".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sparseness of non-finite values".into()));
    }
    let l1: f64 = values.iter().map(|v| v.abs()).sum();
    let l2 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if l2 == 0.0 {
        return Err(Error::Domain("sparseness of an all-zero vector".into()));
    }
    let root_n = (n as f64).sqrt();
    Ok(((root_n - l1 / l2) / (root_n - 1.0)).clamp(0.0, 1.0))
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidParameter("empty label vector".into()));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "label vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Maps arbitrary label ids onto `0..k` in increasing id order.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let ids: BTreeMap<usize, usize> = labels
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

/// Contingency counts `[pred cluster][true class]`.
fn contingency(pred: &[usize], truth: &[usize]) -> (Vec<Vec<usize>>, usize, usize) {
    let (p, kp) = compact(pred);
    let (t, kt) = compact(truth);
    let mut counts = vec![vec![0usize; kt]; kp];
    for (&i, &j) in p.iter().zip(&t) {
        counts[i][j] += 1;
    }
    (counts, kp, kt)
}

/// Fraction of samples whose predicted cluster, after the one-to-one
/// cluster→class mapping that maximizes agreement, equals the true class.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let (counts, kp, kt) = contingency(pred, truth);
    let k = kp.max(kt);
    let mut weights = WeightMatrix::new(k, k, 0i64);
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            weights[(i, j)] = c as i64;
        }
    }
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / pred.len() as f64)
}

/// Shannon entropy of a labelling, in bits.
pub fn entropy(labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InvalidParameter("empty label vector".into()));
    }
    let (compacted, k) = compact(labels);
    let mut counts = vec![0usize; k];
    for l in compacted {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    Ok(counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

/// Mutual information between two labellings, in bits.
pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    check_lengths(a, b)?;
    let (counts, _, _) = contingency(a, b);
    let n = a.len() as f64;
    let row_sums: Vec<f64> = counts.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let col_sums: Vec<f64> = (0..counts[0].len())
        .map(|j| counts.iter().map(|r| r[j]).sum::<usize>() as f64)
        .collect();
    let mut mi = 0.0;
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            // p_ij / (p_i p_j) = c·n / (row·col)
            mi += c / n * (c * n / (row_sums[i] * col_sums[j])).log2();
        }
    }
    Ok(mi.max(0.0))
}

/// `MI(a, b) / max(H(a), H(b))`; 0 when both labellings are a single cluster.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let mi = mutual_information(a, b)?;
    let denom = entropy(a)?.max(entropy(b)?);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}
