//! Diagonal rescaling around the deterministic recursion.
//!
//! Outside scaling computes `D_A G(D_A^-1 A, B D_B^-1) D_B` with `D_A` the row
//! maxima of `|A|` and `D_B` the column maxima of `|B|`. Inside scaling computes
//! `G(A D, D^-1 B)` with `d_k = sqrt(max_j |b_kj| / max_i |a_ik|)`. Steps are
//! applied in order to the running pair; the outside factors accumulate and are
//! undone once, after the product. All factors live in the measured environment
//! and division is multiplication by a rounded reciprocal.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::BilinearFormula;
use crate::matrix::{from_mode, to_mode, Matrix};
use crate::multiply::{check_recursive_size, check_square_pair, level_from_formula, run_levels};
use crate::precision::{with_arith, Arith, ScalarMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingStep {
    Outside,
    Inside,
}

/// Outside-inside, twice.
pub const TWICE_OUTSIDE_INSIDE: [ScalingStep; 4] =
    [ScalingStep::Outside, ScalingStep::Inside, ScalingStep::Outside, ScalingStep::Inside];

impl fmt::Display for ScalingStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingStep::Outside => "O",
            ScalingStep::Inside => "I",
        })
    }
}

/// Parse a schedule such as `"OIOI"` or `"O,I"`.
pub fn parse_schedule(s: &str) -> Result<Vec<ScalingStep>> {
    s.chars()
        .filter(|c| !matches!(c, ',' | ' ' | '-'))
        .map(|c| match c.to_ascii_uppercase() {
            'O' => Ok(ScalingStep::Outside),
            'I' => Ok(ScalingStep::Inside),
            other => Err(Error::Parse(format!("unknown scaling step '{other}'"))),
        })
        .collect()
}

impl FromStr for ScalingStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match parse_schedule(s)?.as_slice() {
            [step] => Ok(*step),
            _ => Err(Error::Parse(format!("expected one scaling step, got '{s}'"))),
        }
    }
}

fn max_abs<A: Arith>(ar: A, values: impl Iterator<Item = A::Elem>) -> A::Elem {
    values.map(|x| ar.abs(x)).fold(ar.zero(), |m, x| if ar.gt(x, m) { x } else { m })
}

fn positive<A: Arith>(ar: A, d: A::Elem, what: &str, index: usize) -> Result<A::Elem> {
    if ar.is_zero(d) || !ar.is_finite(d) {
        return Err(Error::DegenerateInput(format!("{what} {index} has no nonzero scale")));
    }
    Ok(d)
}

/// Row maxima of `|A|` and column maxima of `|B|`, in `ar`.
pub fn outside_factors_in<A: Arith>(ar: A, a: &Matrix<A::Elem>, b: &Matrix<A::Elem>) -> (Vec<A::Elem>, Vec<A::Elem>) {
    let da = (0..a.rows()).map(|i| max_abs(ar, a.row(i).iter().copied())).collect();
    let db = (0..b.cols()).map(|j| max_abs(ar, (0..b.rows()).map(|i| b.get(i, j)))).collect();
    (da, db)
}

/// `d_k = sqrt(max_j |b_kj| * (1 / max_i |a_ik|))`, in `ar`.
pub fn inside_factors_in<A: Arith>(ar: A, a: &Matrix<A::Elem>, b: &Matrix<A::Elem>) -> Result<Vec<A::Elem>> {
    (0..a.cols())
        .map(|k| {
            let ma = positive(ar, max_abs(ar, (0..a.rows()).map(|i| a.get(i, k))), "column of A", k)?;
            let mb = positive(ar, max_abs(ar, b.row(k).iter().copied()), "row of B", k)?;
            positive(ar, ar.sqrt(ar.mul(mb, ar.recip(ma))), "inside factor", k)
        })
        .collect()
}

/// Outside factors `(D_A, D_B)` of a double-precision pair.
pub fn outside_factors(a: &Matrix, b: &Matrix) -> (Vec<f64>, Vec<f64>) {
    outside_factors_in(crate::precision::F64Arith, a, b)
}

/// Rescaled deterministic recursion in `ar`.
pub fn rescaled_in<A: Arith>(
    ar: A,
    f: &BilinearFormula,
    q: usize,
    schedule: &[ScalingStep],
    a: &Matrix<A::Elem>,
    b: &Matrix<A::Elem>,
) -> Result<Matrix<A::Elem>> {
    let (mut a, mut b) = (a.clone(), b.clone());
    let size = a.rows();
    let mut rows: Option<Vec<A::Elem>> = None;
    let mut cols: Option<Vec<A::Elem>> = None;
    for step in schedule {
        match step {
            ScalingStep::Outside => {
                let (da, db) = outside_factors_in(ar, &a, &b);
                for (i, &d) in da.iter().enumerate() {
                    let inv = ar.recip(positive(ar, d, "row of A", i)?);
                    for x in &mut a.data_mut()[i * size..(i + 1) * size] {
                        *x = ar.mul(*x, inv);
                    }
                }
                for (j, &d) in db.iter().enumerate() {
                    let inv = ar.recip(positive(ar, d, "column of B", j)?);
                    for i in 0..size {
                        b.set(i, j, ar.mul(b.get(i, j), inv));
                    }
                }
                rows = Some(match rows {
                    None => da,
                    Some(r) => r.iter().zip(&da).map(|(&x, &y)| ar.mul(x, y)).collect(),
                });
                cols = Some(match cols {
                    None => db,
                    Some(c) => c.iter().zip(&db).map(|(&x, &y)| ar.mul(x, y)).collect(),
                });
            }
            ScalingStep::Inside => {
                let d = inside_factors_in(ar, &a, &b)?;
                for i in 0..size {
                    for (k, &dk) in d.iter().enumerate() {
                        a.set(i, k, ar.mul(a.get(i, k), dk));
                    }
                }
                for (k, &dk) in d.iter().enumerate() {
                    let inv = ar.recip(dk);
                    for x in &mut b.data_mut()[k * size..(k + 1) * size] {
                        *x = ar.mul(*x, inv);
                    }
                }
            }
        }
    }
    let levels = vec![level_from_formula(ar, f); q];
    let mut leaves = 0;
    let mut c = run_levels(ar, &levels, &a, &b, &mut leaves)?;
    if let (Some(rows), Some(cols)) = (rows, cols) {
        for (i, &ri) in rows.iter().enumerate() {
            for (j, &cj) in cols.iter().enumerate() {
                c.set(i, j, ar.mul(ar.mul(ri, c.get(i, j)), cj));
            }
        }
    }
    Ok(c)
}

/// Deterministic recursion of `f` wrapped in the scaling `schedule`.
pub fn rescaled_multiply(
    f: &BilinearFormula,
    a: &Matrix,
    b: &Matrix,
    q: usize,
    schedule: &[ScalingStep],
    mode: ScalarMode,
) -> Result<Matrix> {
    check_square_pair(a, b)?;
    check_recursive_size(a.rows(), f.n(), q)?;
    with_arith!(mode, |ar| {
        let c = rescaled_in(ar, f, q, schedule, &to_mode(ar, a), &to_mode(ar, b))?;
        from_mode(ar, &c)
    })
}
