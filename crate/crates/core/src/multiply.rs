//! Blocked application of bilinear formulas and the classical product.
//!
//! All entry points share one kernel, [`run_levels`], which applies a stack of
//! coefficient levels recursively and falls back to [`standard_in`] at the
//! leaves. Summation orders are fixed: block combinations accumulate with `k`
//! outer and `l` inner, outputs accumulate over `r` ascending, and inner
//! products sum over the shared index in increasing order.

use crate::error::{Error, Result};
use crate::formula::{BilinearFormula, Tensor};
use crate::matrix::{from_mode, to_mode, Matrix};
use crate::precision::{with_arith, Arith, ScalarMode};

/// Classical product in `ar`: `c_ij = sum_k a_ik b_kj` summed sequentially in `k`.
pub fn standard_in<A: Arith>(ar: A, a: &Matrix<A::Elem>, b: &Matrix<A::Elem>) -> Result<Matrix<A::Elem>> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} times {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (rows, inner, cols) = (a.rows(), a.cols(), b.cols());
    let mut c = Matrix::filled(rows, cols, ar.zero());
    let bd = b.data();
    for i in 0..rows {
        let arow = a.row(i);
        let crow = &mut c.data_mut()[i * cols..(i + 1) * cols];
        for (k, &aik) in arow.iter().enumerate().take(inner) {
            let brow = &bd[k * cols..(k + 1) * cols];
            for (cij, &bkj) in crow.iter_mut().zip(brow) {
                *cij = ar.add(*cij, ar.mul(aik, bkj));
            }
        }
    }
    Ok(c)
}

/// Coefficients of one recursion level, already rounded into the environment.
#[derive(Clone, Debug)]
pub struct Level<E> {
    n: usize,
    rank: usize,
    u: Vec<Coef<E>>,
    v: Vec<Coef<E>>,
    w: Vec<Coef<E>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Coef<E> {
    Zero,
    One,
    MinusOne,
    Other(E),
}

impl<E: Copy> Level<E> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

fn classify<A: Arith>(ar: A, x: f64) -> Coef<A::Elem> {
    if x == 0.0 {
        Coef::Zero
    } else if x == 1.0 {
        Coef::One
    } else if x == -1.0 {
        Coef::MinusOne
    } else {
        let r = ar.round(x);
        if ar.is_zero(r) {
            Coef::Zero
        } else {
            Coef::Other(r)
        }
    }
}

/// Round raw coefficient tensors (canonical order) into `ar`.
pub fn level_from_tensors<A: Arith>(ar: A, n: usize, rank: usize, u: &[f64], v: &[f64], w: &[f64]) -> Level<A::Elem> {
    let conv = |t: &[f64]| t.iter().map(|&x| classify(ar, x)).collect();
    Level { n, rank, u: conv(u), v: conv(v), w: conv(w) }
}

/// The formula's own coefficients as a level.
pub fn level_from_formula<A: Arith>(ar: A, f: &BilinearFormula) -> Level<A::Elem> {
    level_from_tensors(ar, f.n(), f.rank(), f.tensor(Tensor::U), f.tensor(Tensor::V), f.tensor(Tensor::W))
}

fn scaled<A: Arith>(ar: A, c: Coef<A::Elem>, x: A::Elem) -> A::Elem {
    match c {
        Coef::Zero => ar.zero(),
        Coef::One => x,
        Coef::MinusOne => ar.neg(x),
        Coef::Other(c) => ar.mul(c, x),
    }
}

/// `sum_{k,l} coef_kl X_kl` over the `n x n` grid of `m x m` blocks of `x`.
fn combine<A: Arith>(ar: A, coefs: &[Coef<A::Elem>], n: usize, x: &Matrix<A::Elem>, m: usize) -> Matrix<A::Elem> {
    let mut acc: Option<Matrix<A::Elem>> = None;
    for k in 0..n {
        for l in 0..n {
            let c = coefs[k * n + l];
            if c == Coef::Zero {
                continue;
            }
            match acc.as_mut() {
                None => acc = Some(Matrix::from_fn(m, m, |p, q| scaled(ar, c, x.get(k * m + p, l * m + q)))),
                Some(acc) => {
                    for p in 0..m {
                        let src = &x.row(k * m + p)[l * m..(l + 1) * m];
                        let dst = &mut acc.data_mut()[p * m..(p + 1) * m];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = ar.add(*d, scaled(ar, c, s));
                        }
                    }
                }
            }
        }
    }
    acc.unwrap_or_else(|| Matrix::filled(m, m, ar.zero()))
}

/// Apply `levels` recursively, outermost first. With no levels this is [`standard_in`].
/// `leaves` is incremented once per classical leaf product.
pub fn run_levels<A: Arith>(
    ar: A,
    levels: &[Level<A::Elem>],
    a: &Matrix<A::Elem>,
    b: &Matrix<A::Elem>,
    leaves: &mut u64,
) -> Result<Matrix<A::Elem>> {
    let Some((level, rest)) = levels.split_first() else {
        *leaves += 1;
        return standard_in(ar, a, b);
    };
    let size = a.rows();
    if !a.is_square() || !b.is_square() || b.rows() != size {
        return Err(Error::DimensionMismatch(format!(
            "blocked application needs equal square inputs, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let n = level.n;
    if size % n != 0 {
        return Err(Error::DimensionMismatch(format!("size {size} is not a multiple of the grid dimension {n}")));
    }
    let m = size / n;
    let nn = n * n;
    let mut c = Matrix::filled(size, size, ar.zero());
    let mut started = vec![false; nn];
    for r in 0..level.rank {
        let wr = &level.w[r * nn..(r + 1) * nn];
        if wr.iter().all(|&x| x == Coef::Zero) {
            continue;
        }
        let left = combine(ar, &level.u[r * nn..(r + 1) * nn], n, a, m);
        let right = combine(ar, &level.v[r * nn..(r + 1) * nn], n, b, m);
        let prod = run_levels(ar, rest, &left, &right, leaves)?;
        for (ij, &wc) in wr.iter().enumerate() {
            if wc == Coef::Zero {
                continue;
            }
            let (i, j) = (ij / n, ij % n);
            let first = !started[ij];
            started[ij] = true;
            for p in 0..m {
                let src = prod.row(p);
                let row = i * m + p;
                let dst = &mut c.data_mut()[row * size + j * m..row * size + (j + 1) * m];
                for (d, &s) in dst.iter_mut().zip(src) {
                    let t = scaled(ar, wc, s);
                    *d = if first { t } else { ar.add(*d, t) };
                }
            }
        }
    }
    Ok(c)
}

/// Classical product with inputs rounded into `mode`.
pub fn standard_multiply(a: &Matrix, b: &Matrix, mode: ScalarMode) -> Result<Matrix> {
    with_arith!(mode, |ar| {
        let c = standard_in(ar, &to_mode(ar, a), &to_mode(ar, b))?;
        from_mode(ar, &c)
    })
}

/// Check that `size = m * n^q` for some integer `m >= 1`.
pub fn check_recursive_size(size: usize, n: usize, q: usize) -> Result<usize> {
    let block = n
        .checked_pow(q as u32)
        .ok_or_else(|| Error::InvalidArgument(format!("n^Q overflows for n = {n}, Q = {q}")))?;
    if size == 0 || size % block != 0 {
        return Err(Error::DimensionMismatch(format!("size {size} is not m * {n}^{q}")));
    }
    Ok(size / block)
}

/// One level of the block form of the formula: inputs of size `m n`.
pub fn apply_bc(f: &BilinearFormula, a: &Matrix, b: &Matrix, mode: ScalarMode) -> Result<Matrix> {
    recursive_apply(f, a, b, 1, mode)
}

/// Deterministic recursion with `q` levels of `f` and classical leaves.
pub fn recursive_apply(f: &BilinearFormula, a: &Matrix, b: &Matrix, q: usize, mode: ScalarMode) -> Result<Matrix> {
    recursive_apply_counted(f, a, b, q, mode).map(|(c, _)| c)
}

/// As [`recursive_apply`], also returning the number of leaf products.
pub fn recursive_apply_counted(
    f: &BilinearFormula,
    a: &Matrix,
    b: &Matrix,
    q: usize,
    mode: ScalarMode,
) -> Result<(Matrix, u64)> {
    check_square_pair(a, b)?;
    check_recursive_size(a.rows(), f.n(), q)?;
    with_arith!(mode, |ar| {
        let level = level_from_formula(ar, f);
        let levels = vec![level; q];
        let mut leaves = 0;
        let c = run_levels(ar, &levels, &to_mode(ar, a), &to_mode(ar, b), &mut leaves)?;
        Ok((from_mode(ar, &c)?, leaves))
    })
}

pub(crate) fn check_square_pair(a: &Matrix, b: &Matrix) -> Result<()> {
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "expected two square matrices of equal size, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// Smallest `m * n^q` that is at least `size`.
pub fn padded_size(size: usize, n: usize, q: usize) -> usize {
    let block = n.pow(q as u32);
    size.div_ceil(block).max(1) * block
}

/// Zero-pad a square matrix to the smallest conforming size; returns the original size too.
pub fn pad_to_shape(a: &Matrix, n: usize, q: usize) -> (Matrix, usize) {
    let size = a.rows().max(a.cols());
    let target = padded_size(size, n, q);
    if a.rows() == target && a.cols() == target {
        return (a.clone(), size);
    }
    let padded = Matrix::from_fn(target, target, |i, j| {
        if i < a.rows() && j < a.cols() {
            a.get(i, j)
        } else {
            0.0
        }
    });
    (padded, size)
}

/// Leading `size x size` block.
pub fn crop(c: &Matrix, size: usize) -> Matrix {
    c.block(0, 0, size)
}

/// Pad, run the deterministic recursion and crop back.
pub fn padded_recursive_apply(f: &BilinearFormula, a: &Matrix, b: &Matrix, q: usize, mode: ScalarMode) -> Result<Matrix> {
    check_square_pair(a, b)?;
    let (pa, size) = pad_to_shape(a, f.n(), q);
    let (pb, _) = pad_to_shape(b, f.n(), q);
    Ok(crop(&recursive_apply(f, &pa, &pb, q, mode)?, size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::{RoundingScope, TieRule};

    fn sample(size: usize, seed: u64) -> Matrix {
        let mut s = seed;
        Matrix::from_fn(size, size, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn identity_times_anything() {
        let b = sample(3, 1);
        for mode in [ScalarMode::F64, ScalarMode::F32, ScalarMode::decimal(2).unwrap()] {
            let rb = b.map(|x| crate::precision::fl(x, mode).unwrap());
            assert_eq!(standard_multiply(&Matrix::identity(3), &rb, mode).unwrap(), rb);
        }
    }

    #[test]
    fn small_integers_are_exact() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[&[5.0, 6.0], &[7.0, 8.0]]).unwrap();
        let want = Matrix::from_rows(&[&[19.0, 22.0], &[43.0, 50.0]]).unwrap();
        for mode in [ScalarMode::F64, ScalarMode::F32, ScalarMode::decimal(3).unwrap()] {
            assert_eq!(standard_multiply(&a, &b, mode).unwrap(), want);
            assert_eq!(apply_bc(&BilinearFormula::strassen(), &a, &b, mode).unwrap(), want);
        }
    }

    #[test]
    fn strassen_identity() {
        let i2 = Matrix::identity(2);
        assert_eq!(apply_bc(&BilinearFormula::strassen(), &i2, &i2, ScalarMode::F64).unwrap(), i2);
    }

    #[test]
    fn example_matrices_in_two_digits() {
        let a = Matrix::from_rows(&[&[0.99, 0.001], &[0.001, 0.99]]).unwrap();
        let exact = a.naive_product(&a);
        let mode = ScalarMode::Decimal(
            crate::precision::DecimalArith::new(2, TieRule::HalfEven, RoundingScope::AllOps).unwrap(),
        );
        let g = apply_bc(&BilinearFormula::strassen(), &a, &a, mode).unwrap();
        assert!((g.distance(&exact) - 0.0286).abs() < 5e-4, "{}", g.distance(&exact));
    }

    #[test]
    fn shape_errors() {
        let s = BilinearFormula::strassen();
        assert!(apply_bc(&s, &sample(3, 1), &sample(3, 2), ScalarMode::F64).is_err());
        assert!(recursive_apply(&s, &sample(6, 1), &sample(6, 2), 2, ScalarMode::F64).is_err());
        assert!(standard_multiply(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3), ScalarMode::F64).is_err());
    }

    #[test]
    fn q_zero_is_classical() {
        let (a, b) = (sample(6, 3), sample(6, 4));
        let s = BilinearFormula::strassen();
        for mode in [ScalarMode::F64, ScalarMode::F32] {
            let (c, leaves) = recursive_apply_counted(&s, &a, &b, 0, mode).unwrap();
            assert_eq!(leaves, 1);
            assert_eq!(c, standard_multiply(&a, &b, mode).unwrap());
        }
    }

    #[test]
    fn leaf_counts() {
        let s = BilinearFormula::strassen();
        let a = sample(8, 5);
        for q in 0..=3 {
            let (_, leaves) = recursive_apply_counted(&s, &a, &a, q, ScalarMode::F64).unwrap();
            assert_eq!(leaves, 7u64.pow(q as u32));
        }
    }

    #[test]
    fn padding() {
        let a = sample(5, 6);
        let (p, size) = pad_to_shape(&a, 2, 2);
        assert_eq!((p.rows(), size), (8, 5));
        assert_eq!(crop(&p, 5), a);
        let (same, _) = pad_to_shape(&sample(8, 1), 2, 2);
        assert_eq!(same, sample(8, 1));
    }
}
