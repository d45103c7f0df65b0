//! Closed-form error bounds for bilinear formulas, deterministic and randomized,
//! in exact and in rounded arithmetic.

use serde::Serialize;

use crate::error::Result;
use crate::formula::BilinearFormula;
use crate::matrix::Matrix;
use crate::precision::ScalarMode;
use crate::randomize::rescale_factor;

/// Default threshold on `factor * epsilon` for the rounding-error bounds.
pub const DEFAULT_HYPOTHESIS_THRESHOLD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub hypothesis_ok: bool,
    /// Threshold the hypothesis was checked against, when there is one.
    pub threshold: Option<f64>,
    pub bound_value: f64,
    pub empirical_value: Option<f64>,
    pub mu: Option<f64>,
}

impl BoundReport {
    pub fn with_empirical(mut self, value: f64) -> Self {
        self.empirical_value = Some(value);
        self
    }

    /// `Some(true)` if the empirical value is set and does not exceed the bound.
    pub fn holds(&self) -> Option<bool> {
        self.empirical_value.map(|e| e <= self.bound_value)
    }
}

/// `||A|| ||B|| ||Y - X||`: bound on `||f(A, B) - AB||`.
pub fn bound_deterministic(f: &BilinearFormula, a: &Matrix, b: &Matrix) -> f64 {
    a.frobenius_norm() * b.frobenius_norm() * f.residual_norm()
}

/// `||A|| ||B|| ||(1 - kappa)^-1 Y - X||`: bound on the randomized product's error.
pub fn bound_randomized(f: &BilinearFormula, a: &Matrix, b: &Matrix) -> Result<f64> {
    let c = rescale_factor(f)?;
    Ok(a.frobenius_norm() * b.frobenius_norm() * f.scaled_residual_norm(c))
}

/// The worst-case excess `|eta| mu^2 ||Y||` of the randomized product over the
/// deterministic one on the ball of radius `mu`, and its cap
/// `2 mu^2 (n^-5/2 ||Y - X|| + n^-1) ||Y - X||`, valid when `|kappa| <= 1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupConstant {
    pub constant: f64,
    pub cap: f64,
    pub hypothesis_ok: bool,
}

pub fn bound_sup_constant(f: &BilinearFormula, mu: f64) -> SupConstant {
    let kappa = f.kappa();
    let eta = 1.0 / (1.0 - kappa) - 1.0;
    let res = f.residual_norm();
    let n = f.n() as f64;
    SupConstant {
        constant: eta.abs() * mu * mu * f.y_norm(),
        cap: 2.0 * mu * mu * (n.powf(-2.5) * res + 1.0 / n) * res,
        hypothesis_ok: kappa.abs() <= 0.5,
    }
}

/// Which rounding-error bound to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NumericalBound {
    /// Scalar entries (`m = 1`), deterministic.
    Scalar,
    /// Block version, deterministic.
    Block,
    /// Block version, randomized.
    RandomizedBlock,
    /// Rounding plus approximation error, deterministic.
    TotalDeterministic,
    /// Error of the expected randomized product.
    TotalRandomized,
}

impl NumericalBound {
    pub const ALL: [NumericalBound; 5] = [
        NumericalBound::Scalar,
        NumericalBound::Block,
        NumericalBound::RandomizedBlock,
        NumericalBound::TotalDeterministic,
        NumericalBound::TotalRandomized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NumericalBound::Scalar => "scalar",
            NumericalBound::Block => "block",
            NumericalBound::RandomizedBlock => "randomized_block",
            NumericalBound::TotalDeterministic => "total_deterministic",
            NumericalBound::TotalRandomized => "total_randomized",
        }
    }

    /// The `factor` multiplying `epsilon`: `4n + R - 1` for scalar entries,
    /// `4n + m + R - 2` for blocks of size `m`.
    pub fn factor(self, n: usize, m: usize, rank: usize) -> f64 {
        match self {
            NumericalBound::Scalar => (4 * n + rank) as f64 - 1.0,
            _ => (4 * n + m + rank) as f64 - 2.0,
        }
    }
}

impl std::str::FromStr for NumericalBound {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        NumericalBound::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| crate::error::Error::Parse(format!("unknown bound '{s}'")))
    }
}

/// `1.01 factor sqrt(R) eps ||A|| ||B|| sqrt(sum_r ||U_r||^2 ||V_r||^2 ||W_r||^2)`,
/// inflated by `(1 - kappa)^-1` for the randomized variants and increased by
/// `||A|| ||B|| ||Y - X||` for the deterministic total.
pub fn bound_numerical(
    f: &BilinearFormula,
    a: &Matrix,
    b: &Matrix,
    mode: ScalarMode,
    which: NumericalBound,
    threshold: f64,
) -> Result<BoundReport> {
    let n = f.n();
    let m = (a.rows() / n).max(1);
    let rank = f.rank();
    let eps = mode.epsilon_machine();
    let factor = which.factor(n, m, rank);
    let norms = a.frobenius_norm() * b.frobenius_norm();
    let base = 1.01 * factor * (rank as f64).sqrt() * eps * norms * f.weight_norm_product();
    let bound_value = match which {
        NumericalBound::Scalar | NumericalBound::Block => base,
        NumericalBound::RandomizedBlock | NumericalBound::TotalRandomized => base * rescale_factor(f)?,
        NumericalBound::TotalDeterministic => base + norms * f.residual_norm(),
    };
    let mut hypothesis_ok = factor * eps <= threshold;
    if matches!(which, NumericalBound::Scalar) {
        hypothesis_ok &= m == 1;
    }
    if matches!(which, NumericalBound::RandomizedBlock | NumericalBound::TotalRandomized) {
        hypothesis_ok &= f.kappa() < 1.0;
    }
    Ok(BoundReport {
        bound_name: which.name().to_string(),
        hypothesis_ok,
        threshold: Some(threshold),
        bound_value,
        empirical_value: None,
        mu: None,
    })
}

/// Coefficient `c` in `second_term <= c ||A|| ||B|| ||Y - X||` when the
/// randomized total bound is expanded to first order in kappa and
/// `|kappa| <= n^-5/2 ||Y - X||` is used: `wnp 1.01 (4n + m + R - 2) sqrt(R) n^-5/2 eps`.
pub fn kappa_excess_coefficient(n: usize, m: usize, rank: usize, eps: f64, weight_norm_product: f64) -> f64 {
    weight_norm_product * 1.01 * NumericalBound::Block.factor(n, m, rank) * (rank as f64).sqrt() * (n as f64).powf(-2.5) * eps
}
