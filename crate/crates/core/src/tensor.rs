//! Dense tensors and the multilinear primitives the rest of the crate is built
//! on: inner product, mode-n product, the two mode-n unfolding conventions and
//! single-mode contraction.
//!
//! Storage is row-major (last index fastest). Modes are 0-based.
//!
//! Unfolding conventions, both with `i_n` as the row index:
//!
//! - classical, [`unfold_classical`]: columns enumerate the remaining modes in
//!   natural order `(i_1, …, i_{n-1}, i_{n+1}, …, i_d)`, first one fastest;
//! - tensor-ring, [`unfold_tr`]: columns enumerate the remaining modes in
//!   cyclic order `(i_{n+1}, …, i_d, i_1, …, i_{n-1})`, `i_{n+1}` fastest.
//!
//! The ring model relies on the second convention matching the middle index
//! order of a subchain.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("a shape needs at least one mode".into()));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidShape(format!("zero-sized mode in {dims:?}")));
        }
        Ok(Self(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for k in (0..self.0.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.0[k + 1];
        }
        strides
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.order() {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            })
        }
    }

    /// Shape with the first `k` modes moved to the back.
    pub fn rotate_left(&self, k: usize) -> Shape {
        let mut dims = self.0.clone();
        let len = dims.len();
        dims.rotate_left(k % len);
        Shape(dims)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "{}", parts.join("x"))
    }
}

impl TryFrom<&[usize]> for Shape {
    type Error = Error;

    fn try_from(dims: &[usize]) -> Result<Self> {
        Shape::new(dims.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape} holds {} values, got {}",
                shape.numel(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.numel()];
        Self { shape, data }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.numel());
        let mut idx = MultiIndex::new(shape.dims());
        loop {
            data.push(f(idx.as_slice()));
            if !idx.advance() {
                break;
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order());
        idx.iter()
            .zip(self.dims())
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// Circular dimension shift: the result has modes `(k, k+1, …, d-1, 0, …,
    /// k-1)` of `self`.
    pub fn rotate_modes(&self, k: usize) -> DenseTensor {
        let d = self.order();
        let k = k % d;
        let shape = self.shape.rotate_left(k);
        let mut src = vec![0; d];
        DenseTensor::from_fn(shape, |idx| {
            for (j, &i) in idx.iter().enumerate() {
                src[(j + k) % d] = i;
            }
            self.data[self.offset(&src)]
        })
    }
}

impl Index<&[usize]> for DenseTensor {
    type Output = f64;

    fn index(&self, idx: &[usize]) -> &f64 {
        &self.data[self.offset(idx)]
    }
}

impl IndexMut<&[usize]> for DenseTensor {
    fn index_mut(&mut self, idx: &[usize]) -> &mut f64 {
        let off = self.offset(idx);
        &mut self.data[off]
    }
}

/// Row-major odometer over a multi-index.
pub(crate) struct MultiIndex<'a> {
    dims: &'a [usize],
    idx: Vec<usize>,
}

impl<'a> MultiIndex<'a> {
    pub(crate) fn new(dims: &'a [usize]) -> Self {
        Self {
            dims,
            idx: vec![0; dims.len()],
        }
    }

    pub(crate) fn as_slice(&self) -> &[usize] {
        &self.idx
    }

    /// Steps to the next index; returns false after wrapping past the end.
    pub(crate) fn advance(&mut self) -> bool {
        for k in (0..self.dims.len()).rev() {
            self.idx[k] += 1;
            if self.idx[k] < self.dims[k] {
                return true;
            }
            self.idx[k] = 0;
        }
        false
    }
}

pub fn inner_product(x: &DenseTensor, y: &DenseTensor) -> Result<f64> {
    if x.shape != y.shape {
        return Err(Error::DimensionMismatch(format!(
            "inner product of {} and {}",
            x.shape, y.shape
        )));
    }
    Ok(dot(&x.data, &y.data))
}

/// `x ×ₙ a`: replaces mode `n` (size `a.cols()`) by a mode of size `a.rows()`.
pub fn mode_n_product(x: &DenseTensor, a: &Matrix, n: usize) -> Result<DenseTensor> {
    x.shape.check_mode(n)?;
    if a.cols() != x.dims()[n] {
        return Err(Error::DimensionMismatch(format!(
            "mode-{n} product: matrix has {} columns, mode has size {}",
            a.cols(),
            x.dims()[n]
        )));
    }
    let unfolded = unfold_classical(x, n)?;
    let product = a.matmul(&unfolded)?;
    let mut dims = x.dims().to_vec();
    dims[n] = a.rows();
    fold_classical(&product, n, &Shape::new(dims)?)
}

fn classical_order(d: usize, n: usize) -> Vec<usize> {
    (0..d).filter(|&k| k != n).collect()
}

fn cyclic_order(d: usize, n: usize) -> Vec<usize> {
    (1..d).map(|k| (n + k) % d).collect()
}

/// Column stride of each tensor mode in an unfolding whose columns enumerate
/// `order` with the first entry fastest.
fn column_strides(dims: &[usize], order: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; dims.len()];
    let mut s = 1;
    for &k in order {
        strides[k] = s;
        s *= dims[k];
    }
    strides
}

fn unfold_with_order(x: &DenseTensor, n: usize, order: &[usize]) -> Result<Matrix> {
    let dims = x.dims();
    let rows = dims[n];
    let cols = x.shape.numel() / rows;
    let col_strides = column_strides(dims, order);
    let mut out = vec![0.0; rows * cols];
    let mut idx = MultiIndex::new(dims);
    for &v in &x.data {
        let i = idx.as_slice();
        let col: usize = i.iter().zip(&col_strides).map(|(a, b)| a * b).sum();
        out[i[n] * cols + col] = v;
        idx.advance();
    }
    Matrix::new(rows, cols, out)
}

fn fold_with_order(m: &Matrix, n: usize, shape: &Shape, order: &[usize]) -> Result<DenseTensor> {
    let dims = shape.dims();
    if m.rows() != dims[n] || m.rows() * m.cols() != shape.numel() {
        return Err(Error::DimensionMismatch(format!(
            "cannot fold {}x{} matrix along mode {n} into {shape}",
            m.rows(),
            m.cols()
        )));
    }
    let cols = m.cols();
    let col_strides = column_strides(dims, order);
    let data = m.data();
    Ok(DenseTensor::from_fn(shape.clone(), |i| {
        let col: usize = i.iter().zip(&col_strides).map(|(a, b)| a * b).sum();
        data[i[n] * cols + col]
    }))
}

/// Classical mode-n unfolding `X_(n)`.
pub fn unfold_classical(x: &DenseTensor, n: usize) -> Result<Matrix> {
    x.shape.check_mode(n)?;
    unfold_with_order(x, n, &classical_order(x.order(), n))
}

pub fn fold_classical(m: &Matrix, n: usize, shape: &Shape) -> Result<DenseTensor> {
    shape.check_mode(n)?;
    fold_with_order(m, n, shape, &classical_order(shape.order(), n))
}

/// Tensor-ring mode-n unfolding `X_[n]`.
pub fn unfold_tr(x: &DenseTensor, n: usize) -> Result<Matrix> {
    x.shape.check_mode(n)?;
    unfold_with_order(x, n, &cyclic_order(x.order(), n))
}

pub fn fold_tr(m: &Matrix, n: usize, shape: &Shape) -> Result<DenseTensor> {
    shape.check_mode(n)?;
    fold_with_order(m, n, shape, &cyclic_order(shape.order(), n))
}

/// Matricizes `x` with `row_modes` and `col_modes`, each group enumerated
/// row-major (last listed mode fastest).
fn matricize(x: &DenseTensor, row_modes: &[usize], col_modes: &[usize]) -> Matrix {
    let dims = x.dims();
    let strides = x.shape.strides();
    let rows: usize = row_modes.iter().map(|&k| dims[k]).product();
    let cols: usize = col_modes.iter().map(|&k| dims[k]).product();
    let offsets = |modes: &[usize]| -> Vec<usize> {
        let sub: Vec<usize> = modes.iter().map(|&k| dims[k]).collect();
        let mut out = Vec::new();
        let mut idx = MultiIndex::new(&sub);
        loop {
            out.push(
                idx.as_slice()
                    .iter()
                    .zip(modes)
                    .map(|(&i, &k)| i * strides[k])
                    .sum(),
            );
            if !idx.advance() {
                break;
            }
        }
        out
    };
    let row_off = offsets(row_modes);
    let col_off = offsets(col_modes);
    let mut out = Vec::with_capacity(rows * cols);
    for &r in &row_off {
        out.extend(col_off.iter().map(|&c| x.data[r + c]));
    }
    Matrix::new(rows, cols, out).expect("matricize sizes are consistent")
}

/// Contracted product of `x` and `y` over mode `n` of `x` and mode `m` of
/// `y`. The result carries the remaining modes of `x` followed by the
/// remaining modes of `y`; a full contraction yields a single-element tensor
/// of shape `[1]`.
pub fn contract_single_mode(
    x: &DenseTensor,
    y: &DenseTensor,
    n: usize,
    m: usize,
) -> Result<DenseTensor> {
    x.shape.check_mode(n)?;
    y.shape.check_mode(m)?;
    if x.dims()[n] != y.dims()[m] {
        return Err(Error::DimensionMismatch(format!(
            "contracting mode {n} of {} with mode {m} of {}",
            x.shape, y.shape
        )));
    }
    let x_rest = classical_order(x.order(), n);
    let y_rest = classical_order(y.order(), m);
    let a = matricize(x, &x_rest, &[n]);
    let b = matricize(y, &[m], &y_rest);
    let product = a.matmul(&b)?;

    let mut dims: Vec<usize> = x_rest.iter().map(|&k| x.dims()[k]).collect();
    dims.extend(y_rest.iter().map(|&k| y.dims()[k]));
    if dims.is_empty() {
        dims.push(1);
    }
    DenseTensor::new(Shape::new(dims)?, product.into_data())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn shape(dims: &[usize]) -> Shape {
        Shape::new(dims.to_vec()).unwrap()
    }

    fn random_tensor(dims: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape(dims), |_| rng.sample(StandardNormal))
    }

    fn cube_2x2x2() -> DenseTensor {
        DenseTensor::from_fn(shape(&[2, 2, 2]), |i| (4 * i[0] + 2 * i[1] + i[2]) as f64)
    }

    #[test]
    fn shape_rejects_empty_and_zero() {
        assert!(Shape::new(vec![]).is_err());
        assert!(Shape::new(vec![2, 0]).is_err());
        assert_eq!(shape(&[2, 3, 4]).strides(), vec![12, 4, 1]);
    }

    #[test]
    fn inner_product_examples() {
        let x = DenseTensor::new(shape(&[2, 2]), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let ones = DenseTensor::new(shape(&[2, 2]), vec![1.0; 4]).unwrap();
        assert_eq!(inner_product(&x, &ones).unwrap(), 10.0);
        assert_eq!(inner_product(&x, &x).unwrap(), 30.0);

        let a = random_tensor(&[3, 4, 2], 1);
        let b = random_tensor(&[3, 4, 2], 2);
        let mut oracle = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..2 {
                    oracle += a[&[i, j, k][..]] * b[&[i, j, k][..]];
                }
            }
        }
        assert!((inner_product(&a, &b).unwrap() - oracle).abs() < 1e-12);
        assert!(inner_product(&a, &random_tensor(&[3, 4], 3)).is_err());
    }

    #[test]
    fn mode_n_product_examples() {
        let x = random_tensor(&[3, 4, 2], 5);
        let same = mode_n_product(&x, &Matrix::identity(4), 1).unwrap();
        assert_eq!(same, x);

        let m = DenseTensor::new(shape(&[2, 2]), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let ones = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let z = mode_n_product(&m, &ones, 0).unwrap();
        assert_eq!(z.dims(), &[1, 2]);
        assert_eq!(z.data(), &[4.0, 6.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = Matrix::from_fn(5, 4, |_, _| rng.sample(StandardNormal));
        let z = mode_n_product(&x, &a, 1).unwrap();
        assert_eq!(z.dims(), &[3, 5, 2]);
        for i in 0..3 {
            for j in 0..5 {
                for k in 0..2 {
                    let oracle: f64 = (0..4).map(|m| x[&[i, m, k][..]] * a[(j, m)]).sum();
                    assert!((z[&[i, j, k][..]] - oracle).abs() < 1e-12);
                }
            }
        }
        assert!(matches!(
            mode_n_product(&x, &a, 3),
            Err(Error::ModeOutOfRange { .. })
        ));
        assert!(mode_n_product(&x, &a, 0).is_err());
    }

    #[test]
    fn classical_unfolding_golden() {
        let m = random_tensor(&[2, 3], 9);
        let u = unfold_classical(&m, 0).unwrap();
        assert_eq!(u.data(), m.data());

        let u = unfold_classical(&cube_2x2x2(), 0).unwrap();
        assert_eq!(u.data(), &[0.0, 2.0, 1.0, 3.0, 4.0, 6.0, 5.0, 7.0]);
        // mode 1: columns (a, c), a fastest
        let u = unfold_classical(&cube_2x2x2(), 1).unwrap();
        assert_eq!(u.data(), &[0.0, 4.0, 1.0, 5.0, 2.0, 6.0, 3.0, 7.0]);
    }

    #[test]
    fn tr_unfolding_golden() {
        let x = cube_2x2x2();
        assert_eq!(unfold_tr(&x, 0).unwrap(), unfold_classical(&x, 0).unwrap());
        // mode 1: columns (c, a), c fastest
        let u = unfold_tr(&x, 1).unwrap();
        assert_eq!(u.data(), &[0.0, 1.0, 4.0, 5.0, 2.0, 3.0, 6.0, 7.0]);
        assert!(unfold_tr(&x, 3).is_err());
    }

    #[test]
    fn contraction_special_cases() {
        let x = random_tensor(&[2, 3], 11);
        let y = random_tensor(&[3, 2], 12);
        let z = contract_single_mode(&x, &y, 1, 0).unwrap();
        let xm = Matrix::new(2, 3, x.data().to_vec()).unwrap();
        let ym = Matrix::new(3, 2, y.data().to_vec()).unwrap();
        assert_eq!(z.data(), xm.matmul(&ym).unwrap().data());

        let u = random_tensor(&[1, 5], 13);
        let v = random_tensor(&[5, 1], 14);
        let s = contract_single_mode(&u, &v, 1, 0).unwrap();
        assert_eq!(s.dims(), &[1, 1]);
        let d: f64 = u.data().iter().zip(v.data()).map(|(a, b)| a * b).sum();
        assert!((s.data()[0] - d).abs() < 1e-12);

        assert!(contract_single_mode(&x, &y, 0, 0).is_err());
    }

    #[test]
    fn contraction_matches_loop_oracle() {
        let x = random_tensor(&[2, 3, 4], 21);
        let y = random_tensor(&[4, 5], 22);
        let z = contract_single_mode(&x, &y, 2, 0).unwrap();
        assert_eq!(z.dims(), &[2, 3, 5]);
        for a in 0..2 {
            for b in 0..3 {
                for c in 0..5 {
                    let oracle: f64 = (0..4).map(|k| x[&[a, b, k][..]] * y[&[k, c][..]]).sum();
                    assert!((z[&[a, b, c][..]] - oracle).abs() < 1e-12);
                }
            }
        }
        // contraction in an interior mode of both operands
        let p = random_tensor(&[2, 4, 3], 23);
        let q = random_tensor(&[5, 4, 2], 24);
        let z = contract_single_mode(&p, &q, 1, 1).unwrap();
        assert_eq!(z.dims(), &[2, 3, 5, 2]);
        for a in 0..2 {
            for b in 0..3 {
                for c in 0..5 {
                    for e in 0..2 {
                        let oracle: f64 =
                            (0..4).map(|k| p[&[a, k, b][..]] * q[&[c, k, e][..]]).sum();
                        assert!((z[&[a, b, c, e][..]] - oracle).abs() < 1e-12);
                    }
                }
            }
        }
    }

    fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(1usize..5, 1..5)
    }

    proptest! {
        #[test]
        fn unfoldings_round_trip_bit_exact(dims in dims_strategy(), seed in 0u64..10_000) {
            let x = random_tensor(&dims, seed);
            for n in 0..dims.len() {
                let c = unfold_classical(&x, n).unwrap();
                prop_assert_eq!(&fold_classical(&c, n, x.shape()).unwrap(), &x);
                let t = unfold_tr(&x, n).unwrap();
                prop_assert_eq!(&fold_tr(&t, n, x.shape()).unwrap(), &x);
            }
        }

        #[test]
        fn tr_unfolding_is_classical_after_cyclic_shift(dims in dims_strategy(), seed in 0u64..10_000) {
            let x = random_tensor(&dims, seed);
            for n in 0..dims.len() {
                let shifted = x.rotate_modes(n);
                prop_assert_eq!(unfold_tr(&x, n).unwrap(), unfold_classical(&shifted, 0).unwrap());
            }
        }

        #[test]
        fn identity_mode_product_is_identity(dims in dims_strategy(), seed in 0u64..10_000) {
            let x = random_tensor(&dims, seed);
            for n in 0..dims.len() {
                let y = mode_n_product(&x, &Matrix::identity(dims[n]), n).unwrap();
                prop_assert_eq!(&y, &x);
            }
        }

        #[test]
        fn self_inner_product_is_nonnegative(dims in dims_strategy(), seed in 0u64..10_000) {
            let x = random_tensor(&dims, seed);
            prop_assert!(inner_product(&x, &x).unwrap() > 0.0);
            let z = DenseTensor::zeros(x.shape().clone());
            prop_assert_eq!(inner_product(&z, &z).unwrap(), 0.0);
        }

        #[test]
        fn chain_contraction_matches_loop_oracle(
            dims in prop::collection::vec(1usize..5, 3..5),
            tail in prop::collection::vec(1usize..4, 1..3),
            seed in 0u64..10_000,
        ) {
            let d = dims.len();
            let mut ydims = vec![dims[d - 1]];
            ydims.extend(&tail);
            let x = random_tensor(&dims, seed);
            let y = random_tensor(&ydims, seed + 1);
            let z = contract_single_mode(&x, &y, d - 1, 0).unwrap();
            let k = dims[d - 1];
            let mut zi = MultiIndex::new(z.dims());
            let mut xi = vec![0; d];
            let mut yi = vec![0; ydims.len()];
            for &v in z.data() {
                let idx = zi.as_slice();
                xi[..d - 1].copy_from_slice(&idx[..d - 1]);
                yi[1..].copy_from_slice(&idx[d - 1..]);
                let mut oracle = 0.0;
                for kk in 0..k {
                    xi[d - 1] = kk;
                    yi[0] = kk;
                    oracle += x[&xi[..]] * y[&yi[..]];
                }
                prop_assert!((v - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()));
                zi.advance();
            }
        }
    }
}
