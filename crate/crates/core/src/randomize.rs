//! Random sign and permutation plans and the randomized products built from them.
//!
//! A plan holds sign vectors `s1, s2, s3` and permutations `p1, p2, p3`. With
//! `M_i = P_i S_i` (and `P_i` having a one at `(p_i(j), j)`) the randomized
//! product is `(1 - kappa)^-1 M1^T f(M1 A M2^T, M2 B M3^T) M3`. It is evaluated
//! by permuting and sign-flipping the coefficients instead of the matrices:
//!
//! ```text
//! u'_klr = u_{p1(k) p2(l) r} s1(k) s2(l)
//! v'_klr = v_{p2(k) p3(l) r} s2(k) s3(l)
//! w'_ijr = (1 - kappa)^-1 s1(i) s3(j) w_{p1(i) p3(j) r}
//! ```

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::BilinearFormula;
use crate::matrix::{from_mode, to_mode, Matrix};
use crate::multiply::{check_recursive_size, check_square_pair, level_from_tensors, run_levels, Level};
use crate::precision::{with_arith, Arith, ScalarMode};

/// Default cap on the number of plans [`enumerate_expectation`] will visit.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomizationPlan {
    n: usize,
    signs: [Vec<i8>; 3],
    perms: [Vec<usize>; 3],
}

impl RandomizationPlan {
    pub fn new(signs: [Vec<i8>; 3], perms: [Vec<usize>; 3]) -> Result<Self> {
        let n = signs[0].len();
        if n == 0 {
            return Err(Error::InvalidArgument("plan dimension must be positive".into()));
        }
        for s in &signs {
            if s.len() != n || s.iter().any(|&x| x != 1 && x != -1) {
                return Err(Error::InvalidArgument("sign vectors must have length n and entries +-1".into()));
            }
        }
        for p in &perms {
            let mut seen = vec![false; n];
            if p.len() != n || p.iter().any(|&x| x >= n || std::mem::replace(&mut seen[x], true)) {
                return Err(Error::InvalidArgument("permutations must be bijections of 0..n".into()));
            }
        }
        Ok(Self { n, signs, perms })
    }

    pub fn identity(n: usize) -> Self {
        let id: Vec<usize> = (0..n).collect();
        Self { n, signs: [vec![1; n], vec![1; n], vec![1; n]], perms: [id.clone(), id.clone(), id] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn signs(&self) -> &[Vec<i8>; 3] {
        &self.signs
    }

    pub fn perms(&self) -> &[Vec<usize>; 3] {
        &self.perms
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.n)
    }

    /// `M_i = P_i S_i` expanded to act on an `n m x n m` matrix (`i` in `0..3`).
    pub fn orthogonal_factor(&self, i: usize, m: usize) -> Matrix {
        let (s, p) = (&self.signs[i], &self.perms[i]);
        let size = self.n * m;
        let mut out = Matrix::zeros(size, size);
        for j in 0..self.n {
            for t in 0..m {
                out.set(p[j] * m + t, j * m + t, s[j] as f64);
            }
        }
        out
    }

    /// Coefficients after permuting and sign-flipping, in canonical order.
    /// The output tensor is multiplied by `w_scale`.
    pub fn hatted(&self, f: &BilinearFormula, w_scale: f64) -> Result<[Vec<f64>; 3]> {
        if f.n() != self.n {
            return Err(Error::DimensionMismatch(format!("plan for n = {} used with a formula of n = {}", self.n, f.n())));
        }
        let n = self.n;
        let nn = n * n;
        let [s1, s2, s3] = &self.signs;
        let [p1, p2, p3] = &self.perms;
        let len = nn * f.rank();
        let (mut u, mut v, mut w) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for r in 0..f.rank() {
            for k in 0..n {
                for l in 0..n {
                    let at = r * nn + k * n + l;
                    u[at] = f.u(p1[k], p2[l], r) * f64::from(s1[k] * s2[l]);
                    v[at] = f.v(p2[k], p3[l], r) * f64::from(s2[k] * s3[l]);
                    w[at] = w_scale * f64::from(s1[k] * s3[l]) * f.w(p1[k], p3[l], r);
                }
            }
        }
        Ok([u, v, w])
    }
}

/// Independent plans for each recursion level, outermost first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecursivePlan {
    pub levels: Vec<RandomizationPlan>,
}

impl RecursivePlan {
    pub fn identity(n: usize, q: usize) -> Self {
        Self { levels: vec![RandomizationPlan::identity(n); q] }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

/// Uniform signs and uniform permutations (Fisher-Yates), in the order
/// `s1, s2, s3, p1, p2, p3`.
pub fn draw_plan<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RandomizationPlan {
    let mut sign = || -> Vec<i8> { (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect() };
    let signs = [sign(), sign(), sign()];
    let mut perm = || -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(rng);
        p
    };
    let perms = [perm(), perm(), perm()];
    RandomizationPlan { n, signs, perms }
}

pub fn draw_recursive_plan<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> RecursivePlan {
    RecursivePlan { levels: (0..q).map(|_| draw_plan(n, rng)).collect() }
}

/// Which parts of a plan are kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    SignOnly,
    PermOnly,
    None,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::SignOnly, Variant::PermOnly, Variant::None];
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "sign" | "sign_only" | "sign-only" => Ok(Variant::SignOnly),
            "perm" | "perm_only" | "perm-only" => Ok(Variant::PermOnly),
            "none" => Ok(Variant::None),
            _ => Err(Error::Parse(format!("unknown variant '{s}'"))),
        }
    }
}

pub fn variant_plan(plan: &RandomizationPlan, variant: Variant) -> RandomizationPlan {
    let id = RandomizationPlan::identity(plan.n);
    match variant {
        Variant::Full => plan.clone(),
        Variant::SignOnly => RandomizationPlan { perms: id.perms, ..plan.clone() },
        Variant::PermOnly => RandomizationPlan { signs: id.signs, ..plan.clone() },
        Variant::None => id,
    }
}

pub fn variant_recursive_plan(plan: &RecursivePlan, variant: Variant) -> RecursivePlan {
    RecursivePlan { levels: plan.levels.iter().map(|p| variant_plan(p, variant)).collect() }
}

/// `(1 - kappa)^-1`, or an error when it is undefined.
pub fn rescale_factor(f: &BilinearFormula) -> Result<f64> {
    let kappa = f.kappa();
    let c = 1.0 / (1.0 - kappa);
    if kappa == 1.0 || !c.is_finite() {
        return Err(Error::DegenerateKappa { kappa });
    }
    Ok(c)
}

/// Whether each level's output coefficients carry `(1 - kappa)^-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scaling {
    Rescaled,
    Unscaled,
}

fn build_levels<A: Arith>(ar: A, f: &BilinearFormula, plans: &[RandomizationPlan], scaling: Scaling) -> Result<Vec<Level<A::Elem>>> {
    let c = match scaling {
        Scaling::Rescaled => rescale_factor(f)?,
        Scaling::Unscaled => 1.0,
    };
    plans
        .iter()
        .map(|p| {
            let [u, v, w] = p.hatted(f, c)?;
            Ok(level_from_tensors(ar, f.n(), f.rank(), &u, &v, &w))
        })
        .collect()
}

/// Recursive randomized product in `ar` on inputs already in the environment.
pub fn randomized_in<A: Arith>(
    ar: A,
    f: &BilinearFormula,
    plan: &RecursivePlan,
    scaling: Scaling,
    a: &Matrix<A::Elem>,
    b: &Matrix<A::Elem>,
) -> Result<Matrix<A::Elem>> {
    let levels = build_levels(ar, f, &plan.levels, scaling)?;
    let mut leaves = 0;
    run_levels(ar, &levels, a, b, &mut leaves)
}

/// Single-level randomized product.
pub fn randomized_apply(f: &BilinearFormula, plan: &RandomizationPlan, a: &Matrix, b: &Matrix, mode: ScalarMode) -> Result<Matrix> {
    recursive_randomized_apply(f, &RecursivePlan { levels: vec![plan.clone()] }, a, b, mode)
}

/// Randomized recursion with one plan per level and `(1 - kappa)^-1` at every level.
pub fn recursive_randomized_apply(f: &BilinearFormula, plan: &RecursivePlan, a: &Matrix, b: &Matrix, mode: ScalarMode) -> Result<Matrix> {
    recursive_randomized_apply_with(f, plan, Scaling::Rescaled, a, b, mode)
}

pub fn recursive_randomized_apply_with(
    f: &BilinearFormula,
    plan: &RecursivePlan,
    scaling: Scaling,
    a: &Matrix,
    b: &Matrix,
    mode: ScalarMode,
) -> Result<Matrix> {
    check_square_pair(a, b)?;
    check_recursive_size(a.rows(), f.n(), plan.depth())?;
    with_arith!(mode, |ar| {
        let c = randomized_in(ar, f, plan, scaling, &to_mode(ar, a), &to_mode(ar, b))?;
        from_mode(ar, &c)
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    // Lexicographic order.
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
        p.swap(i, j);
        p[i + 1..].reverse();
    }
}

/// Number of distinct plans for grid dimension `n`: `(2^n)^3 (n!)^3`.
pub fn plan_count(n: usize) -> Option<u128> {
    let signs = 1u128.checked_shl(3 * n as u32)?;
    let fact = (1..=n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k))?;
    signs.checked_mul(fact.checked_pow(3)?)
}

/// Every plan for grid dimension `n`, in a fixed order.
pub fn all_plans(n: usize, budget: u128) -> Result<Vec<RandomizationPlan>> {
    let needed = plan_count(n).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let perms = permutations(n);
    let sign_vec = |bits: usize| -> Vec<i8> { (0..n).map(|j| if bits >> j & 1 == 0 { 1 } else { -1 }).collect() };
    let mut out = Vec::with_capacity(needed as usize);
    for mask in 0..1usize << (3 * n) {
        let signs = [sign_vec(mask), sign_vec(mask >> n), sign_vec(mask >> (2 * n))];
        for p1 in &perms {
            for p2 in &perms {
                for p3 in &perms {
                    out.push(RandomizationPlan { n, signs: signs.clone(), perms: [p1.clone(), p2.clone(), p3.clone()] });
                }
            }
        }
    }
    Ok(out)
}

/// Exact expectation of the single-level randomized product over the uniform
/// plan distribution. Each plan runs in `mode`; the average is taken in double
/// by sequential summation in plan order.
pub fn enumerate_expectation(f: &BilinearFormula, a: &Matrix, b: &Matrix, mode: ScalarMode) -> Result<Matrix> {
    enumerate_expectation_with_budget(f, a, b, mode, ENUMERATION_BUDGET)
}

pub fn enumerate_expectation_with_budget(
    f: &BilinearFormula,
    a: &Matrix,
    b: &Matrix,
    mode: ScalarMode,
    budget: u128,
) -> Result<Matrix> {
    check_square_pair(a, b)?;
    check_recursive_size(a.rows(), f.n(), 1)?;
    let plans = all_plans(f.n(), budget)?;
    let c = rescale_factor(f)?;
    with_arith!(mode, |ar| {
        let (am, bm) = (to_mode(ar, a), to_mode(ar, b));
        let mut sum = Matrix::zeros(a.rows(), a.rows());
        for plan in &plans {
            let [u, v, w] = plan.hatted(f, c)?;
            let level = level_from_tensors(ar, f.n(), f.rank(), &u, &v, &w);
            let mut leaves = 0;
            let out = from_mode(ar, &run_levels(ar, std::slice::from_ref(&level), &am, &bm, &mut leaves)?)?;
            for (s, x) in sum.data_mut().iter_mut().zip(out.data()) {
                *s += x;
            }
        }
        Ok(sum.scale(1.0 / plans.len() as f64))
    })
}

/// Leaf count of the randomized recursion, identical to the deterministic one.
pub fn leaf_count(f: &BilinearFormula, q: usize) -> u64 {
    (f.rank() as u64).pow(q as u32)
}

/// Hatted tensors of a single plan as a new formula (useful for diagnostics).
pub fn hatted_formula(f: &BilinearFormula, plan: &RandomizationPlan, scaling: Scaling) -> Result<BilinearFormula> {
    let c = match scaling {
        Scaling::Rescaled => rescale_factor(f)?,
        Scaling::Unscaled => 1.0,
    };
    let [u, v, w] = plan.hatted(f, c)?;
    BilinearFormula::new(f.n(), f.rank(), u, v, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiply::apply_bc;
    use crate::rng;

    #[test]
    fn plan_validation() {
        assert!(RandomizationPlan::new([vec![1, -1], vec![1, 1], vec![-1, -1]], [vec![1, 0], vec![0, 1], vec![1, 0]]).is_ok());
        assert!(RandomizationPlan::new([vec![1, 0], vec![1, 1], vec![1, 1]], [vec![0, 1], vec![0, 1], vec![0, 1]]).is_err());
        assert!(RandomizationPlan::new([vec![1, 1], vec![1, 1], vec![1, 1]], [vec![0, 0], vec![0, 1], vec![0, 1]]).is_err());
    }

    #[test]
    fn draws_are_seeded() {
        let a = draw_plan(3, &mut rng::stream(5));
        let b = draw_plan(3, &mut rng::stream(5));
        assert_eq!(a, b);
        assert!(RandomizationPlan::new(a.signs.clone(), a.perms.clone()).is_ok());
    }

    #[test]
    fn variants() {
        let p = draw_plan(4, &mut rng::stream(11));
        assert_eq!(variant_plan(&p, Variant::Full), p);
        assert!(variant_plan(&p, Variant::None).is_identity());
        assert_eq!(variant_plan(&p, Variant::SignOnly).perms, RandomizationPlan::identity(4).perms);
        assert_eq!(variant_plan(&p, Variant::SignOnly).signs, p.signs);
        assert_eq!(variant_plan(&p, Variant::PermOnly).signs, RandomizationPlan::identity(4).signs);
        assert_eq!(variant_plan(&p, Variant::PermOnly).perms, p.perms);
    }

    #[test]
    fn enumeration_order_and_budget() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(plan_count(2), Some(512));
        let plans = all_plans(2, ENUMERATION_BUDGET).unwrap();
        assert_eq!(plans.len(), 512);
        let distinct: std::collections::HashSet<_> = plans.iter().collect();
        assert_eq!(distinct.len(), 512);
        assert!(matches!(all_plans(4, ENUMERATION_BUDGET), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn identity_plan_scales_plain_application() {
        let f = BilinearFormula::strassen().perturb(1e-3, 5, &mut rng::stream(2)).unwrap();
        let a = Matrix::from_fn(4, 4, |i, j| (i as f64 - 1.5) * 0.3 + j as f64 * 0.7);
        let b = Matrix::from_fn(4, 4, |i, j| (i * j) as f64 * 0.1 - 0.4);
        let c = rescale_factor(&f).unwrap();
        let plain = apply_bc(&f, &a, &b, ScalarMode::F64).unwrap();
        let rand = randomized_apply(&f, &RandomizationPlan::identity(2), &a, &b, ScalarMode::F64).unwrap();
        for (x, y) in rand.data().iter().zip(plain.data()) {
            assert!((x - c * y).abs() <= 1e-13 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn degenerate_kappa() {
        let zero = BilinearFormula::new(1, 1, vec![0.0], vec![0.0], vec![0.0]).unwrap();
        assert_eq!(zero.kappa(), 1.0);
        let a = Matrix::identity(1);
        let err = randomized_apply(&zero, &RandomizationPlan::identity(1), &a, &a, ScalarMode::F64).unwrap_err();
        assert!(matches!(err, Error::DegenerateKappa { .. }));
    }
}
