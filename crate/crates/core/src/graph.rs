//! Mutual p-nearest-neighbour graph over the samples of a data tensor, and
//! its combinatorial Laplacian `H = D − W`.

use crate::error::{Error, Result};
use crate::matrix::{spectral_norm, Matrix};
use crate::tensor::{unfold_classical, DenseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConfig {
    /// Neighbour count, `1 ≤ p < samples`.
    pub p: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { p: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    w: Matrix,
    degree: Vec<f64>,
    laplacian: Matrix,
    laplacian_norm: f64,
}

impl NeighborGraph {
    /// Builds degree and Laplacian from a symmetric 0/1 weight matrix with a
    /// zero diagonal.
    pub fn from_weights(w: Matrix) -> Result<Self> {
        let n = w.rows();
        if w.cols() != n {
            return Err(Error::DimensionMismatch("weight matrix must be square".into()));
        }
        for i in 0..n {
            if w[(i, i)] != 0.0 {
                return Err(Error::Domain(format!("self loop at sample {i}")));
            }
            for j in 0..n {
                let v = w[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::Domain(format!("non-binary weight {v} at ({i}, {j})")));
                }
                if v != w[(j, i)] {
                    return Err(Error::Domain(format!("asymmetric weight at ({i}, {j})")));
                }
            }
        }
        let degree: Vec<f64> = (0..n).map(|i| w.row(i).iter().sum()).collect();
        let laplacian = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                degree[i]
            } else {
                -w[(i, j)]
            }
        });
        Ok(Self {
            laplacian_norm: spectral_norm(&laplacian),
            w,
            degree,
            laplacian,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    /// `‖H‖₂`, computed once at construction.
    pub fn laplacian_norm(&self) -> f64 {
        self.laplacian_norm
    }

    pub fn samples(&self) -> usize {
        self.w.rows()
    }

    pub fn edge_count(&self) -> usize {
        self.w.data().iter().filter(|&&v| v != 0.0).count() / 2
    }
}

/// Frobenius distances between the slices of `x` along `sample_mode`.
pub fn pairwise_distances(x: &DenseTensor, sample_mode: usize) -> Result<Matrix> {
    let samples = unfold_classical(x, sample_mode)?;
    let n = samples.rows();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 samples for a neighbour graph, got {n}"
        )));
    }
    let mut dist = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d2: f64 = samples
                .row(i)
                .iter()
                .zip(samples.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let d = d2.sqrt();
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    Ok(dist)
}

/// The `p` nearest other samples of `i`, ties broken by lower index.
fn nearest(dist: &Matrix, i: usize, p: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..dist.rows()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
    others.truncate(p);
    others
}

/// `W_ij = 1` iff `i` and `j` are each among the other's `p` nearest
/// neighbours.
pub fn knn_graph(dist: &Matrix, cfg: GraphConfig) -> Result<NeighborGraph> {
    let n = dist.rows();
    if dist.cols() != n {
        return Err(Error::DimensionMismatch("distance matrix must be square".into()));
    }
    if cfg.p == 0 || cfg.p >= n {
        return Err(Error::InvalidParameter(format!(
            "neighbour count p = {} must lie in [1, {})",
            cfg.p, n
        )));
    }
    let mut member = vec![vec![false; n]; n];
    for (i, row) in member.iter_mut().enumerate() {
        for j in nearest(dist, i, cfg.p) {
            row[j] = true;
        }
    }
    let w = Matrix::from_fn(n, n, |i, j| {
        if member[i][j] && member[j][i] {
            1.0
        } else {
            0.0
        }
    });
    NeighborGraph::from_weights(w)
}

/// Convenience: distances over the last mode followed by [`knn_graph`].
pub fn sample_graph(x: &DenseTensor, cfg: GraphConfig) -> Result<NeighborGraph> {
    let dist = pairwise_distances(x, x.order() - 1)?;
    knn_graph(&dist, cfg)
}

/// `Tr(gᵀ h g)`.
pub fn laplacian_quadratic(h: &Matrix, g: &Matrix) -> Result<f64> {
    if h.rows() != h.cols() || h.cols() != g.rows() {
        return Err(Error::DimensionMismatch(format!(
            "Tr(gᵀhg) with h {}x{} and g {}x{}",
            h.rows(),
            h.cols(),
            g.rows(),
            g.cols()
        )));
    }
    g.frobenius_dot(&h.matmul(g)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn scalar_samples(values: &[f64]) -> DenseTensor {
        DenseTensor::new(Shape::new(vec![1, values.len()]).unwrap(), values.to_vec()).unwrap()
    }

    fn random_points(n: usize, dim: usize, seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(Shape::new(vec![dim, n]).unwrap(), |_| rng.sample(StandardNormal))
    }

    fn pairwise_oracle(h: &Matrix, w: &Matrix, g: &Matrix) -> f64 {
        let n = h.rows();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d2: f64 = g
                    .row(i)
                    .iter()
                    .zip(g.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                total += w[(i, j)] * d2;
            }
        }
        total / 2.0
    }

    #[test]
    fn scalar_distances() {
        let d = pairwise_distances(&scalar_samples(&[0.0, 3.0, 4.0]), 1).unwrap();
        assert_eq!(d.data(), &[0.0, 3.0, 4.0, 3.0, 0.0, 1.0, 4.0, 1.0, 0.0]);
        let d = pairwise_distances(&scalar_samples(&[2.0, 2.0]), 1).unwrap();
        assert_eq!(d[(0, 1)], 0.0);
        assert!(pairwise_distances(&scalar_samples(&[1.0]), 1).is_err());
    }

    #[test]
    fn distances_match_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DenseTensor::from_fn(Shape::new(vec![4, 4, 6]).unwrap(), |_| rng.random());
        let d = pairwise_distances(&x, 2).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let mut s = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        let diff = x[&[a, b, i][..]] - x[&[a, b, j][..]];
                        s += diff * diff;
                    }
                }
                assert!((d[(i, j)] - s.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mutual_knn_hand_enumerated() {
        let d = pairwise_distances(&scalar_samples(&[0.0, 1.0, 10.0]), 1).unwrap();
        let g = knn_graph(&d, GraphConfig { p: 1 }).unwrap();
        assert_eq!(
            g.weights().data(),
            &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(g.degree(), &[1.0, 1.0, 0.0]);
        assert_eq!(
            g.laplacian().data(),
            &[1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn equidistant_samples_give_complete_graph() {
        let n = 4;
        let d = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        let g = knn_graph(&d, GraphConfig { p: n - 1 }).unwrap();
        let expected = Matrix::from_fn(n, n, |i, j| if i == j { 3.0 } else { -1.0 });
        assert_eq!(g.laplacian(), &expected);
        assert_eq!(g.edge_count(), 6);
    }

    #[test]
    fn ties_prefer_lower_index() {
        // sample 1 is equidistant from 0 and 2
        let d = pairwise_distances(&scalar_samples(&[0.0, 1.0, 2.0]), 1).unwrap();
        assert_eq!(nearest(&d, 1, 1), vec![0]);
    }

    #[test]
    fn p_out_of_range() {
        let d = pairwise_distances(&scalar_samples(&[0.0, 1.0, 2.0]), 1).unwrap();
        assert!(knn_graph(&d, GraphConfig { p: 0 }).is_err());
        assert!(knn_graph(&d, GraphConfig { p: 3 }).is_err());
    }

    #[test]
    fn laplacian_quadratic_examples() {
        let h = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let g = Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(laplacian_quadratic(&h, &g).unwrap(), 4.0);
        let constant = Matrix::from_rows(&[vec![3.0, 1.0], vec![3.0, 1.0]]).unwrap();
        assert_eq!(laplacian_quadratic(&h, &constant).unwrap(), 0.0);
        assert!(laplacian_quadratic(&h, &Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn from_weights_rejects_invalid() {
        let asym = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(NeighborGraph::from_weights(asym).is_err());
        let looped = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(NeighborGraph::from_weights(looped).is_err());
    }

    proptest! {
        #[test]
        fn graph_invariants(n in 3usize..15, p_frac in 0.0f64..1.0, seed in 0u64..5000) {
            let x = random_points(n, 3, seed);
            let p = 1 + ((n - 2) as f64 * p_frac) as usize;
            let d = pairwise_distances(&x, 1).unwrap();
            let g = knn_graph(&d, GraphConfig { p }).unwrap();
            let w = g.weights();
            for i in 0..n {
                prop_assert_eq!(w[(i, i)], 0.0);
                for j in 0..n {
                    prop_assert_eq!(w[(i, j)], w[(j, i)]);
                }
                let row_sum: f64 = g.laplacian().row(i).iter().sum();
                prop_assert_eq!(row_sum, 0.0);
            }

            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let v = Matrix::from_fn(n, 2, |_, _| rng.sample(StandardNormal));
            let q = laplacian_quadratic(g.laplacian(), &v).unwrap();
            prop_assert!(q >= -1e-10);
            let oracle = pairwise_oracle(g.laplacian(), w, &v);
            prop_assert!((q - oracle).abs() <= 1e-10 * (1.0 + oracle.abs()));
        }

        #[test]
        fn graph_is_scale_invariant(n in 3usize..12, seed in 0u64..5000, scale in prop::sample::select(vec![0.25, 0.5, 3.0, 1e3])) {
            let d = pairwise_distances(&random_points(n, 2, seed), 1).unwrap();
            let g1 = knn_graph(&d, GraphConfig { p: 2.min(n - 1) }).unwrap();
            let g2 = knn_graph(&d.scale(scale), GraphConfig { p: 2.min(n - 1) }).unwrap();
            prop_assert_eq!(g1.weights(), g2.weights());
        }

        #[test]
        fn growing_p_never_removes_edges(n in 3usize..12, seed in 0u64..5000) {
            let d = pairwise_distances(&random_points(n, 2, seed), 1).unwrap();
            let mut prev = knn_graph(&d, GraphConfig { p: 1 }).unwrap();
            for p in 2..n {
                let next = knn_graph(&d, GraphConfig { p }).unwrap();
                for (a, b) in prev.weights().data().iter().zip(next.weights().data()) {
                    prop_assert!(*b >= *a);
                }
                prev = next;
            }
        }
    }
}
