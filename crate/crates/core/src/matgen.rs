//! Test matrix families: Gaussian, uniform, three adversarial pairs and Hilbert.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{self, role, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatrixKind {
    Gaussian,
    Uniform,
    Adversarial1,
    Adversarial2,
    Adversarial3,
    Hilbert,
}

impl MatrixKind {
    pub const ALL: [MatrixKind; 6] = [
        MatrixKind::Gaussian,
        MatrixKind::Uniform,
        MatrixKind::Adversarial1,
        MatrixKind::Adversarial2,
        MatrixKind::Adversarial3,
        MatrixKind::Hilbert,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Gaussian => "gaussian",
            MatrixKind::Uniform => "uniform",
            MatrixKind::Adversarial1 => "adv1",
            MatrixKind::Adversarial2 => "adv2",
            MatrixKind::Adversarial3 => "adv3",
            MatrixKind::Hilbert => "hilbert",
        }
    }

    fn is_adversarial(self) -> bool {
        matches!(self, MatrixKind::Adversarial1 | MatrixKind::Adversarial2 | MatrixKind::Adversarial3)
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(MatrixKind::Gaussian),
            "uniform" => Ok(MatrixKind::Uniform),
            "adv1" | "adversarial1" => Ok(MatrixKind::Adversarial1),
            "adv2" | "adversarial2" => Ok(MatrixKind::Adversarial2),
            "adv3" | "adversarial3" => Ok(MatrixKind::Adversarial3),
            "hilbert" => Ok(MatrixKind::Hilbert),
            _ => Err(Error::Parse(format!("unknown matrix type '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub kind: MatrixKind,
    pub size: usize,
    /// Ignored for Hilbert matrices.
    pub seed: u64,
}

/// Range of the uniform distribution an entry is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// `U(0, 1/n^2)`
    Small,
    /// `U(0, 1)`
    Unit,
    /// `U(0, n^2)`
    Large,
}

/// Region of entry `(i, j)` (1-based) of `A` and of `B` for an adversarial kind.
/// Comparisons against `n/2` are exact: `j > n/2` is `2j > n`.
pub fn adversarial_regions(kind: MatrixKind, n: usize, i: usize, j: usize) -> (Region, Region) {
    let (ti, tj) = (2 * i, 2 * j);
    match kind {
        MatrixKind::Adversarial1 => (
            if tj > n { Region::Small } else { Region::Unit },
            if ti < n { Region::Small } else { Region::Unit },
        ),
        MatrixKind::Adversarial2 => (
            if ti < n && tj > n { Region::Large } else { Region::Unit },
            if tj < n { Region::Small } else { Region::Unit },
        ),
        MatrixKind::Adversarial3 => {
            let small = (ti < n && tj > n) || (ti >= n && tj <= n);
            let r = if small { Region::Small } else { Region::Unit };
            (r, r)
        }
        _ => (Region::Unit, Region::Unit),
    }
}

fn uniform(rng: &mut Stream, upper: f64) -> f64 {
    upper * rng.random::<f64>()
}

fn region_sample(rng: &mut Stream, region: Region, n: usize) -> f64 {
    let nn = (n * n) as f64;
    match region {
        Region::Small => uniform(rng, 1.0 / nn),
        Region::Unit => uniform(rng, 1.0),
        Region::Large => uniform(rng, nn),
    }
}

/// `h_ij = 1 / (i + j - 1)` with 1-based indices.
pub fn hilbert(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| 1.0 / (i + j + 1) as f64)
}

/// Generate the pair `(A, B)`. `A` and `B` use independent streams derived from the seed.
pub fn generate(spec: &MatrixSpec) -> Result<(Matrix, Matrix)> {
    let n = spec.size;
    if n == 0 {
        return Err(Error::InvalidArgument("matrix size must be positive".into()));
    }
    if spec.kind.is_adversarial() && n < 2 {
        return Err(Error::InvalidArgument(format!("{} matrices need size >= 2", spec.kind)));
    }
    let mut ra = rng::substream(spec.seed, &[role::MATRIX_A]);
    let mut rb = rng::substream(spec.seed, &[role::MATRIX_B]);
    Ok(match spec.kind {
        MatrixKind::Gaussian => (
            Matrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut ra)),
            Matrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rb)),
        ),
        MatrixKind::Uniform => (
            Matrix::from_fn(n, n, |_, _| uniform(&mut ra, 1.0)),
            Matrix::from_fn(n, n, |_, _| uniform(&mut rb, 1.0)),
        ),
        MatrixKind::Hilbert => (hilbert(n), hilbert(n)),
        kind => (
            Matrix::from_fn(n, n, |i, j| region_sample(&mut ra, adversarial_regions(kind, n, i + 1, j + 1).0, n)),
            Matrix::from_fn(n, n, |i, j| region_sample(&mut rb, adversarial_regions(kind, n, i + 1, j + 1).1, n)),
        ),
    })
}
