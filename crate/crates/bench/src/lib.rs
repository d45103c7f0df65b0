//! Fixtures shared by the benchmarks.

use randbc_core::randomize::draw_recursive_plan;
use randbc_core::{generate, rng, BilinearFormula, Matrix, MatrixKind, MatrixSpec, RecursivePlan};

pub struct Fixture {
    pub formula: BilinearFormula,
    pub a: Matrix,
    pub b: Matrix,
    pub plan: RecursivePlan,
}

/// Gaussian pair of the given size, perturbed Strassen, and a depth-`q` plan.
pub fn fixture(size: usize, q: usize) -> Fixture {
    let (a, b) = generate(&MatrixSpec { kind: MatrixKind::Gaussian, size, seed: 1 }).expect("valid size");
    let formula = BilinearFormula::strassen()
        .perturb(1e-3, 5, &mut rng::substream(1, &[rng::role::FORMULA]))
        .expect("valid perturbation");
    let plan = draw_recursive_plan(2, q, &mut rng::substream(1, &[rng::role::TRIAL]));
    Fixture { formula, a, b, plan }
}
