//! Tensor-ring model.
//!
//! A `d`-th order tensor is represented by `d` third-order cores, core `n`
//! having shape `r_n × i_n × r_{n+1}` with the ring closed by `r_{d+1} = r_1`.
//! Element `(i_1, …, i_d)` is the trace of the product of lateral slices
//! `G_1(i_1) ⋯ G_d(i_d)`.
//!
//! Index conventions used throughout:
//!
//! - a subchain skipping mode `n` has shape `r_{n+1} × M × r_n` where the
//!   middle index enumerates `(i_{n+1}, …, i_d, i_1, …, i_{n-1})` with
//!   `i_{n+1}` fastest, matching [`unfold_tr`](crate::tensor::unfold_tr);
//! - the mode-2 unfolding of a core and of a subchain both pair rank indices
//!   as column `b · r_{n+1} + a` with `b ∈ [0, r_n)` and `a ∈ [0, r_{n+1})`.
//!
//! With those conventions `X_[n] = G^{(n)}_(2) · (G^{≠n}_[2])ᵀ` holds exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::{fold_tr, DenseTensor, Shape};

/// Cyclic rank vector `(r_1, …, r_d)`, with `r_{d+1} = r_1` implied.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RankVector(Vec<usize>);

impl RankVector {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        if ranks.is_empty() || ranks.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "ranks must be a nonempty list of positive integers, got {ranks:?}"
            )));
        }
        Ok(Self(ranks))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Left rank of core `n`.
    pub fn left(&self, n: usize) -> usize {
        self.0[n]
    }

    /// Right rank of core `n` (cyclic).
    pub fn right(&self, n: usize) -> usize {
        self.0[(n + 1) % self.0.len()]
    }

    pub fn core_shape(&self, n: usize, size: usize) -> Shape {
        Shape::new(vec![self.left(n), size, self.right(n)]).expect("ranks and sizes are positive")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrCores {
    cores: Vec<DenseTensor>,
    nonneg: bool,
}

impl TrCores {
    /// Validates that every core is third order and that adjacent ranks
    /// chain cyclically.
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidShape("a tensor ring needs at least one core".into()));
        }
        let d = cores.len();
        for (n, core) in cores.iter().enumerate() {
            if core.order() != 3 {
                return Err(Error::InvalidShape(format!(
                    "core {n} has order {}, expected 3",
                    core.order()
                )));
            }
            let next = &cores[(n + 1) % d];
            if core.dims()[2] != next.dims()[0] {
                return Err(Error::DimensionMismatch(format!(
                    "core {n} right rank {} does not match core {} left rank {}",
                    core.dims()[2],
                    (n + 1) % d,
                    next.dims()[0]
                )));
            }
        }
        Ok(Self {
            cores,
            nonneg: false,
        })
    }

    /// Like [`TrCores::new`] but also checks, and records, that every entry
    /// is nonnegative.
    pub fn new_nonnegative(cores: Vec<DenseTensor>) -> Result<Self> {
        let mut ring = Self::new(cores)?;
        if let Some(n) = ring.cores.iter().position(|c| !c.is_nonnegative()) {
            return Err(Error::Domain(format!("core {n} has negative entries")));
        }
        ring.nonneg = true;
        Ok(ring)
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn core(&self, n: usize) -> &DenseTensor {
        &self.cores[n]
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonneg
    }

    pub fn ranks(&self) -> RankVector {
        RankVector(self.cores.iter().map(|c| c.dims()[0]).collect())
    }

    /// Sizes `(i_1, …, i_d)` of the represented tensor.
    pub fn shape(&self) -> Shape {
        Shape::new(self.cores.iter().map(|c| c.dims()[1]).collect())
            .expect("core dims are positive")
    }

    /// Replaces core `n`, keeping its shape. The nonnegativity flag is
    /// cleared if the new core has negative entries.
    pub fn set_core(&mut self, n: usize, core: DenseTensor) -> Result<()> {
        if core.dims() != self.cores[n].dims() {
            return Err(Error::DimensionMismatch(format!(
                "core {n} must keep shape {}, got {}",
                self.cores[n].shape(),
                core.shape()
            )));
        }
        self.nonneg &= core.is_nonnegative();
        self.cores[n] = core;
        Ok(())
    }

    /// Rotates the ring so that core `k` comes first.
    pub fn rotate(&self, k: usize) -> TrCores {
        let mut cores = self.cores.clone();
        cores.rotate_left(k % self.order());
        TrCores {
            cores,
            nonneg: self.nonneg,
        }
    }
}

/// Merge of every core except one, see the module docs for its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Subchain {
    tensor: DenseTensor,
    skipped_mode: usize,
}

impl Subchain {
    pub fn tensor(&self) -> &DenseTensor {
        &self.tensor
    }

    pub fn skipped_mode(&self) -> usize {
        self.skipped_mode
    }

    /// Mode-2 unfolding `G^{≠n}_[2]`, of shape `M × r_n r_{n+1}`.
    pub fn unfold2(&self) -> Matrix {
        subchain_unfold2(self)
    }
}

/// Cores drawn i.i.d. from `|N(0, 1)|`, deterministic in `seed`.
pub fn init_random(shape: &Shape, ranks: &RankVector, seed: u64) -> Result<TrCores> {
    if ranks.len() != shape.order() {
        return Err(Error::DimensionMismatch(format!(
            "{} ranks for an order-{} tensor",
            ranks.len(),
            shape.order()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cores = shape
        .dims()
        .iter()
        .enumerate()
        .map(|(n, &size)| {
            DenseTensor::from_fn(ranks.core_shape(n, size), |_| {
                rng.sample::<f64, _>(StandardNormal).abs()
            })
        })
        .collect();
    TrCores::new_nonnegative(cores)
}

/// Contracts cores `n+1, …, d, 1, …, n-1` in cyclic order.
pub fn build_subchain(cores: &TrCores, n: usize) -> Result<Subchain> {
    let d = cores.order();
    if d < 2 {
        return Err(Error::UnsupportedOrder(d));
    }
    if n >= d {
        return Err(Error::ModeOutOfRange { mode: n, order: d });
    }

    let first = cores.core((n + 1) % d);
    let left = first.dims()[0];
    let mut middle = first.dims()[1];
    let mut right = first.dims()[2];
    let mut acc = first.data().to_vec();

    for step in 2..d {
        let core = cores.core((n + step) % d);
        let (size, next_right) = (core.dims()[1], core.dims()[2]);
        let cd = core.data();
        let new_middle = middle * size;
        let mut out = vec![0.0; left * new_middle * next_right];
        // out[a, m + middle * k, c] = Σ_r acc[a, m, r] · core[r, k, c]
        for a in 0..left {
            for k in 0..size {
                for m in 0..middle {
                    let src = &acc[(a * middle + m) * right..(a * middle + m + 1) * right];
                    let dst_start = (a * new_middle + m + middle * k) * next_right;
                    let dst = &mut out[dst_start..dst_start + next_right];
                    for (r, &v) in src.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let row = &cd[(r * size + k) * next_right..(r * size + k + 1) * next_right];
                        for (o, &g) in dst.iter_mut().zip(row) {
                            *o += v * g;
                        }
                    }
                }
            }
        }
        acc = out;
        middle = new_middle;
        right = next_right;
    }

    let shape = Shape::new(vec![left, middle, right])?;
    Ok(Subchain {
        tensor: DenseTensor::new(shape, acc)?,
        skipped_mode: n,
    })
}

/// `G^{≠n}_[2][m, b·r_{n+1} + a] = G^{≠n}[a, m, b]`.
pub fn subchain_unfold2(sub: &Subchain) -> Matrix {
    let dims = sub.tensor.dims();
    let (r_next, middle, r_n) = (dims[0], dims[1], dims[2]);
    let data = sub.tensor.data();
    Matrix::from_fn(middle, r_n * r_next, |m, col| {
        let (b, a) = (col / r_next, col % r_next);
        data[(a * middle + m) * r_n + b]
    })
}

/// Inverse of [`subchain_unfold2`].
pub fn subchain_fold2(m: &Matrix, r_n: usize, r_next: usize) -> Result<DenseTensor> {
    if m.cols() != r_n * r_next {
        return Err(Error::DimensionMismatch(format!(
            "{} columns cannot be split into ranks {r_n}·{r_next}",
            m.cols()
        )));
    }
    let shape = Shape::new(vec![r_next, m.rows(), r_n])?;
    Ok(DenseTensor::from_fn(shape, |i| m[(i[1], i[2] * r_next + i[0])]))
}

/// `G_(2)[i, b·r_{n+1} + a] = G[b, i, a]` for a core of shape
/// `r_n × i_n × r_{n+1}`.
pub fn core_unfold2(core: &DenseTensor) -> Result<Matrix> {
    if core.order() != 3 {
        return Err(Error::InvalidShape(format!(
            "expected a third-order core, got shape {}",
            core.shape()
        )));
    }
    let (r_n, size, r_next) = (core.dims()[0], core.dims()[1], core.dims()[2]);
    let data = core.data();
    Ok(Matrix::from_fn(size, r_n * r_next, |i, col| {
        let (b, a) = (col / r_next, col % r_next);
        data[(b * size + i) * r_next + a]
    }))
}

/// Inverse of [`core_unfold2`].
pub fn core_fold2(m: &Matrix, r_n: usize, size: usize, r_next: usize) -> Result<DenseTensor> {
    if m.rows() != size || m.cols() != r_n * r_next {
        return Err(Error::DimensionMismatch(format!(
            "cannot fold {}x{} matrix into a {r_n}x{size}x{r_next} core",
            m.rows(),
            m.cols()
        )));
    }
    let shape = Shape::new(vec![r_n, size, r_next])?;
    Ok(DenseTensor::from_fn(shape, |i| m[(i[1], i[0] * r_next + i[2])]))
}

/// Full tensor represented by the ring, computed as
/// `fold(G^{(1)}_(2) · (G^{≠1}_[2])ᵀ)`.
pub fn reconstruct(cores: &TrCores) -> Result<DenseTensor> {
    let shape = cores.shape();
    if cores.order() == 1 {
        let core = cores.core(0);
        let (r, size) = (core.dims()[0], core.dims()[1]);
        let data = (0..size)
            .map(|i| (0..r).map(|b| core[&[b, i, b][..]]).sum())
            .collect();
        return DenseTensor::new(shape, data);
    }
    let sub = build_subchain(cores, 0)?;
    let unfolded = core_unfold2(cores.core(0))?.matmul_t(&sub.unfold2())?;
    fold_tr(&unfolded, 0, &shape)
}

/// `‖x − reconstruct(cores)‖_F / ‖x‖_F`.
pub fn relative_error(x: &DenseTensor, cores: &TrCores) -> Result<f64> {
    let approx = reconstruct(cores)?;
    if approx.shape() != x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "ring represents {}, data is {}",
            approx.shape(),
            x.shape()
        )));
    }
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Domain("relative error of an all-zero tensor".into()));
    }
    let diff: f64 = x
        .data()
        .iter()
        .zip(approx.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(diff.sqrt() / norm)
}
