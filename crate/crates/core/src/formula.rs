//! Bilinear computation formulas as explicit coefficient tensors.
//!
//! A formula of grid dimension `n` and rank `R` computes
//! `c_ij = sum_r w_ijr (sum_kl u_klr a_kl) (sum_k'l' v_k'l'r b_k'l')`.
//! Tensors are stored densely with `r` outermost, then row, then column.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficient tensors `U`, `V`, `W`, each of shape `n x n x R`.
///
/// Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearFormula {
    n: usize,
    rank: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
}

/// Scalar diagnostics of a formula, all evaluated in double precision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FormulaDiagnostics {
    pub kappa: f64,
    /// `(1 - kappa)^-1 - 1`; infinite when `kappa == 1`.
    pub eta: f64,
    /// `||Y - X||` over all `n^6` entries.
    pub residual_norm: f64,
    pub weight_norm_product: f64,
    pub is_exact: bool,
}

/// Which coefficient tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tensor {
    U,
    V,
    W,
}

impl BilinearFormula {
    pub fn new(n: usize, rank: usize, u: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if n == 0 || rank == 0 {
            return Err(Error::InvalidFormula(format!("n = {n} and R = {rank} must be positive")));
        }
        let len = n * n * rank;
        for (name, t) in [("U", &u), ("V", &v), ("W", &w)] {
            if t.len() != len {
                return Err(Error::InvalidFormula(format!(
                    "{name} has {} entries, expected n*n*R = {len}",
                    t.len()
                )));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidFormula(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self { n, rank, u, v, w })
    }

    /// Strassen's 2x2 formula, rank 7.
    ///
    /// Products, with `A = [a11 a12; a21 a22]`:
    /// `(a11+a22)(b11+b22)`, `(a21+a22)b11`, `a11(b12-b22)`, `a22(b21-b11)`,
    /// `(a11+a12)b22`, `(a21-a11)(b11+b12)`, `(a12-a22)(b21+b22)`.
    pub fn strassen() -> Self {
        #[rustfmt::skip]
        let u = vec![
            1., 0., 0., 1.,
            0., 0., 1., 1.,
            1., 0., 0., 0.,
            0., 0., 0., 1.,
            1., 1., 0., 0.,
            -1., 0., 1., 0.,
            0., 1., 0., -1.,
        ];
        #[rustfmt::skip]
        let v = vec![
            1., 0., 0., 1.,
            1., 0., 0., 0.,
            0., 1., 0., -1.,
            -1., 0., 1., 0.,
            0., 0., 0., 1.,
            1., 1., 0., 0.,
            0., 0., 1., 1.,
        ];
        #[rustfmt::skip]
        let w = vec![
            1., 0., 0., 1.,
            0., 0., 1., -1.,
            0., 1., 0., 1.,
            1., 0., 1., 0.,
            -1., 1., 0., 0.,
            0., 0., 0., 1.,
            1., 0., 0., 0.,
        ];
        Self { n: 2, rank: 7, u, v, w }
    }

    /// The classical algorithm as a rank-`n^3` formula; term `(i, l, j)` is `a_il * b_lj -> c_ij`.
    pub fn standard(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("standard formula needs n >= 1".into()));
        }
        let rank = n * n * n;
        let len = n * n * rank;
        let (mut u, mut v, mut w) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let mut r = 0;
        for i in 0..n {
            for l in 0..n {
                for j in 0..n {
                    u[r * n * n + i * n + l] = 1.0;
                    v[r * n * n + l * n + j] = 1.0;
                    w[r * n * n + i * n + j] = 1.0;
                    r += 1;
                }
            }
        }
        Self::new(n, rank, u, v, w)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tensor(&self, which: Tensor) -> &[f64] {
        match which {
            Tensor::U => &self.u,
            Tensor::V => &self.v,
            Tensor::W => &self.w,
        }
    }

    #[inline]
    fn idx(&self, row: usize, col: usize, r: usize) -> usize {
        r * self.n * self.n + row * self.n + col
    }

    #[inline]
    pub fn u(&self, k: usize, l: usize, r: usize) -> f64 {
        self.u[self.idx(k, l, r)]
    }

    #[inline]
    pub fn v(&self, k: usize, l: usize, r: usize) -> f64 {
        self.v[self.idx(k, l, r)]
    }

    #[inline]
    pub fn w(&self, i: usize, j: usize, r: usize) -> f64 {
        self.w[self.idx(i, j, r)]
    }

    /// Slice `r` of a tensor as an `n x n` row-major grid.
    pub fn slice(&self, which: Tensor, r: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.tensor(which)[r * nn..(r + 1) * nn]
    }

    /// Add `N(0, sigma^2)` noise to every entry equal to 1 and to `extra_zeros`
    /// distinct, uniformly chosen zero entries, independently for each tensor.
    pub fn perturb<R: Rng + ?Sized>(&self, sigma: f64, extra_zeros: usize, rng: &mut R) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("perturbation sigma must be > 0, got {sigma}")));
        }
        for (name, t) in [("U", &self.u), ("V", &self.v), ("W", &self.w)] {
            let zeros = t.iter().filter(|&&x| x == 0.0).count();
            if extra_zeros > zeros {
                return Err(Error::InvalidArgument(format!(
                    "{name} has {zeros} zero entries, cannot perturb {extra_zeros}"
                )));
            }
        }
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut perturb_one = |t: &[f64]| -> Vec<f64> {
            let mut out = t.to_vec();
            for x in out.iter_mut().filter(|x| **x == 1.0) {
                *x += noise.sample(rng);
            }
            let zero_positions: Vec<usize> = (0..t.len()).filter(|&i| t[i] == 0.0).collect();
            let mut chosen = index::sample(rng, zero_positions.len(), extra_zeros).into_vec();
            chosen.sort_unstable();
            for c in chosen {
                out[zero_positions[c]] += noise.sample(rng);
            }
            out
        };
        let u = perturb_one(&self.u);
        let v = perturb_one(&self.v);
        let w = perturb_one(&self.w);
        Self::new(self.n, self.rank, u, v, w)
    }

    /// `kappa = n^-3 sum_{i,j,l} (1 - sum_r u_ilr v_ljr w_ijr)`, summed sequentially
    /// with `i` outermost and `l` innermost.
    pub fn kappa(&self) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let mut y = 0.0;
                    for r in 0..self.rank {
                        y += self.u(i, l, r) * self.v(l, j, r) * self.w(i, j, r);
                    }
                    total += 1.0 - y;
                }
            }
        }
        total / (n * n * n) as f64
    }

    pub fn eta(&self) -> f64 {
        1.0 / (1.0 - self.kappa()) - 1.0
    }

    /// Visit every entry `y_{k l k' l' i j} - x_{k l k' l' i j}` of `Y - X`.
    fn for_each_residual(&self, mut visit: impl FnMut(f64)) {
        let n = self.n;
        let nn = n * n;
        let mut uv = vec![0.0; self.rank];
        for a in 0..nn {
            let (k, l) = (a / n, a % n);
            for b in 0..nn {
                let (kp, lp) = (b / n, b % n);
                for (r, slot) in uv.iter_mut().enumerate() {
                    *slot = self.u[r * nn + a] * self.v[r * nn + b];
                }
                for c in 0..nn {
                    let (i, j) = (c / n, c % n);
                    let y: f64 = uv.iter().enumerate().map(|(r, p)| p * self.w[r * nn + c]).sum();
                    let x = if k == i && lp == j && l == kp { 1.0 } else { 0.0 };
                    visit(y - x);
                }
            }
        }
    }

    /// `||Y - X||`, the Frobenius norm of the residual of the exactness condition.
    pub fn residual_norm(&self) -> f64 {
        let mut sq = 0.0;
        self.for_each_residual(|d| sq += d * d);
        sq.sqrt()
    }

    /// `||Y||`.
    pub fn y_norm(&self) -> f64 {
        let n = self.n;
        let nn = n * n;
        let mut sq = 0.0;
        let mut uv = vec![0.0; self.rank];
        for a in 0..nn {
            for b in 0..nn {
                for (r, slot) in uv.iter_mut().enumerate() {
                    *slot = self.u[r * nn + a] * self.v[r * nn + b];
                }
                for c in 0..nn {
                    let y: f64 = uv.iter().enumerate().map(|(r, p)| p * self.w[r * nn + c]).sum();
                    sq += y * y;
                }
            }
        }
        sq.sqrt()
    }

    /// `||s Y - X||` for a scalar `s`; `s = (1 - kappa)^-1` gives the randomized bound tensor.
    pub fn scaled_residual_norm(&self, s: f64) -> f64 {
        let n = self.n;
        let nn = n * n;
        let mut sq = 0.0;
        let mut uv = vec![0.0; self.rank];
        for a in 0..nn {
            let (k, l) = (a / n, a % n);
            for b in 0..nn {
                let (kp, lp) = (b / n, b % n);
                for (r, slot) in uv.iter_mut().enumerate() {
                    *slot = self.u[r * nn + a] * self.v[r * nn + b];
                }
                for c in 0..nn {
                    let (i, j) = (c / n, c % n);
                    let y: f64 = uv.iter().enumerate().map(|(r, p)| p * self.w[r * nn + c]).sum();
                    let x = if k == i && lp == j && l == kp { 1.0 } else { 0.0 };
                    sq += (s * y - x) * (s * y - x);
                }
            }
        }
        sq.sqrt()
    }

    /// True iff every entry of `|Y - X|` is at most `tol`.
    pub fn is_exact(&self, tol: f64) -> bool {
        let mut worst: f64 = 0.0;
        self.for_each_residual(|d| worst = worst.max(d.abs()));
        worst <= tol
    }

    /// `sqrt(sum_r ||U_r||^2 ||V_r||^2 ||W_r||^2)`.
    pub fn weight_norm_product(&self) -> f64 {
        let sq = |t: &[f64]| t.iter().map(|x| x * x).sum::<f64>();
        (0..self.rank)
            .map(|r| sq(self.slice(Tensor::U, r)) * sq(self.slice(Tensor::V, r)) * sq(self.slice(Tensor::W, r)))
            .sum::<f64>()
            .sqrt()
    }

    pub fn diagnostics(&self, tol: f64) -> FormulaDiagnostics {
        let kappa = self.kappa();
        FormulaDiagnostics {
            kappa,
            eta: 1.0 / (1.0 - kappa) - 1.0,
            residual_norm: self.residual_norm(),
            weight_norm_product: self.weight_norm_product(),
            is_exact: self.is_exact(tol),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&FormulaFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FormulaFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

/// On-disk form: `{"n", "rank", "u", "v", "w"}` with each tensor an array of
/// `rank` grids of `n` rows of `n` numbers, in canonical order.
#[derive(Debug, Serialize, Deserialize)]
struct FormulaFile {
    n: usize,
    rank: usize,
    u: Vec<Vec<Vec<f64>>>,
    v: Vec<Vec<Vec<f64>>>,
    w: Vec<Vec<Vec<f64>>>,
}

impl From<&BilinearFormula> for FormulaFile {
    fn from(f: &BilinearFormula) -> Self {
        let grids = |t: Tensor| -> Vec<Vec<Vec<f64>>> {
            (0..f.rank).map(|r| f.slice(t, r).chunks(f.n).map(<[f64]>::to_vec).collect()).collect()
        };
        FormulaFile { n: f.n, rank: f.rank, u: grids(Tensor::U), v: grids(Tensor::V), w: grids(Tensor::W) }
    }
}

impl TryFrom<FormulaFile> for BilinearFormula {
    type Error = Error;

    fn try_from(file: FormulaFile) -> Result<Self> {
        let flatten = |name: &str, t: Vec<Vec<Vec<f64>>>| -> Result<Vec<f64>> {
            if t.len() != file.rank || t.iter().any(|g| g.len() != file.n || g.iter().any(|row| row.len() != file.n)) {
                return Err(Error::InvalidFormula(format!(
                    "{name} must hold {} grids of {n}x{n}",
                    file.rank,
                    n = file.n
                )));
            }
            Ok(t.into_iter().flatten().flatten().collect())
        };
        let u = flatten("u", file.u)?;
        let v = flatten("v", file.v)?;
        let w = flatten("w", file.w)?;
        BilinearFormula::new(file.n, file.rank, u, v, w)
    }
}
