//! Randomized bilinear matrix multiplication.
//!
//! Strassen-like formulas are stored as coefficient tensors ([`BilinearFormula`])
//! and applied blockwise and recursively in a chosen arithmetic environment
//! ([`ScalarMode`]): binary64, binary32, or a `t`-digit decimal machine.
//! Random sign flips and permutations ([`RandomizationPlan`]) turn an
//! approximate formula into one that is correct in expectation.
//!
//! ```
//! use randbc_core::{recursive_apply, BilinearFormula, Matrix, ScalarMode};
//!
//! let a = Matrix::from_fn(4, 4, |i, j| (i + j) as f64);
//! let c = recursive_apply(&BilinearFormula::strassen(), &a, &a, 2, ScalarMode::F64).unwrap();
//! assert!(c.relative_error(&a.naive_product(&a)) < 1e-14);
//! ```

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod formula;
pub mod matgen;
pub mod matrix;
pub mod multiply;
pub mod precision;
pub mod randomize;
pub mod rescale;
pub mod rng;

pub use bounds::{bound_deterministic, bound_numerical, bound_randomized, bound_sup_constant, BoundReport, NumericalBound};
pub use error::{Error, Result};
pub use experiments::{Algorithm, Experiment, ExperimentConfig, TrialRecord};
pub use formula::{BilinearFormula, FormulaDiagnostics, Tensor};
pub use matgen::{generate, MatrixKind, MatrixSpec};
pub use matrix::Matrix;
pub use multiply::{apply_bc, crop, pad_to_shape, recursive_apply, recursive_apply_counted, standard_multiply};
pub use precision::{fl, rounded_op, sequential_sum, DecimalArith, Op, RoundingScope, ScalarMode, TieRule};
pub use randomize::{
    draw_plan, enumerate_expectation, randomized_apply, recursive_randomized_apply, variant_plan, RandomizationPlan,
    RecursivePlan, Variant,
};
pub use rescale::{rescaled_multiply, ScalingStep};
