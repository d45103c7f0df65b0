use rand_distr::{Distribution, StandardNormal};
use randbc_core::multiply::pad_to_shape;
use randbc_core::randomize::{
    draw_recursive_plan, enumerate_expectation_with_budget, recursive_randomized_apply_with, Scaling,
};
use randbc_core::rng;
use randbc_core::{
    apply_bc, draw_plan, enumerate_expectation, randomized_apply, recursive_apply_counted, recursive_randomized_apply,
    BilinearFormula, Error, Matrix, RandomizationPlan, RecursivePlan, ScalarMode, Tensor,
};

fn gaussian(size: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed);
    Matrix::from_fn(size, size, |_, _| StandardNormal.sample(&mut r))
}

fn perturbed(seed: u64) -> BilinearFormula {
    BilinearFormula::strassen().perturb(1e-3, 5, &mut rng::stream(seed)).unwrap()
}

fn plan_index(p: &RandomizationPlan) -> usize {
    let mut idx = 0;
    for s in p.signs() {
        for &x in s {
            idx = idx * 2 + usize::from(x < 0);
        }
    }
    for perm in p.perms() {
        idx = idx * 2 + perm[0];
    }
    idx
}

#[test]
fn plan_frequencies_are_uniform() {
    let draws = 1_000_000;
    let mut counts = vec![0u64; 512];
    let mut r = rng::stream(2024);
    for _ in 0..draws {
        counts[plan_index(&draw_plan(2, &mut r))] += 1;
    }
    let p = 1.0 / 512.0;
    let mean = draws as f64 * p;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    for (i, &c) in counts.iter().enumerate() {
        assert!((c as f64 - mean).abs() <= 5.0 * sd, "plan {i}: {c}");
    }
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2) / mean).sum();
    // 511 degrees of freedom: mean 511, sd about 32.
    assert!((chi2 - 511.0).abs() <= 5.0 * (2.0f64 * 511.0).sqrt(), "chi2 {chi2}");
}

fn transpose_mul(a: &Matrix, b: &Matrix) -> Matrix {
    a.transpose().naive_product(b)
}

// Matrix form: c M1^T f(M1 A M2^T, M2 B M3^T) M3, with f the plain block application in double.
fn sandwich(f: &BilinearFormula, plan: &RandomizationPlan, a: &Matrix, b: &Matrix) -> Matrix {
    let m = a.rows() / f.n();
    let (m1, m2, m3) = (plan.orthogonal_factor(0, m), plan.orthogonal_factor(1, m), plan.orthogonal_factor(2, m));
    let at = m1.naive_product(a).naive_product(&m2.transpose());
    let bt = m2.naive_product(b).naive_product(&m3.transpose());
    let inner = apply_bc(f, &at, &bt, ScalarMode::F64).unwrap();
    transpose_mul(&m1, &inner).naive_product(&m3).scale(1.0 / (1.0 - f.kappa()))
}

#[test]
fn coefficient_form_matches_matrix_form() {
    for seed in 0..200u64 {
        let f = perturbed(seed % 7);
        let m = 1 + (seed as usize % 3);
        let (a, b) = (gaussian(2 * m, 1000 + seed), gaussian(2 * m, 2000 + seed));
        let plan = draw_plan(2, &mut rng::stream(seed));
        let want = sandwich(&f, &plan, &a, &b);
        let got = randomized_apply(&f, &plan, &a, &b, ScalarMode::F64).unwrap();
        assert!(got.distance(&want) <= 1e-12 * want.frobenius_norm(), "seed {seed}");
    }
}

#[test]
fn orthogonal_factors_are_exact() {
    let mut r = rng::stream(5);
    for n in 1..=4 {
        for _ in 0..25 {
            let p = draw_plan(n, &mut r);
            for i in 0..3 {
                for m in [1, 3] {
                    let mi = p.orthogonal_factor(i, m);
                    let gram = transpose_mul(&mi, &mi);
                    assert_eq!(gram, Matrix::identity(n * m));
                }
            }
        }
    }
}

#[test]
fn expectation_is_exact_in_double() {
    for seed in 0..20u64 {
        let f = perturbed(seed);
        assert!(f.kappa().abs() <= 0.5);
        for m in [1, 2] {
            let (a, b) = (gaussian(2 * m, 300 + seed), gaussian(2 * m, 400 + seed));
            let exact = a.naive_product(&b);
            let e = enumerate_expectation(&f, &a, &b, ScalarMode::F64).unwrap();
            assert!(e.relative_error(&exact) <= 1e-10, "seed {seed}, m {m}: {}", e.relative_error(&exact));
            let det = apply_bc(&f, &a, &b, ScalarMode::F64).unwrap();
            assert!(det.relative_error(&exact) > 1e-8);
        }
    }
}

#[test]
fn expectation_of_small_integer_inputs() {
    let f = perturbed(11);
    let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
    let b = Matrix::from_rows(&[&[-2.0, 1.0], &[0.0, 5.0]]).unwrap();
    let ab = a.naive_product(&b);
    let e = enumerate_expectation(&f, &a, &b, ScalarMode::F64).unwrap();
    assert!(e.distance(&ab) <= 1e-10 * ab.frobenius_norm());
}

#[test]
fn enumeration_budget_is_enforced() {
    let f = BilinearFormula::standard(3).unwrap();
    let a = gaussian(3, 1);
    // 512 * 216 = 110592 plans for n = 3.
    let err = enumerate_expectation_with_budget(&f, &a, &a, ScalarMode::F64, 1000).unwrap_err();
    assert!(matches!(err, Error::BudgetExceeded { needed: 110_592, budget: 1000 }));
}

#[test]
fn single_level_recursion_is_the_randomized_product() {
    let f = perturbed(1);
    let (a, b) = (gaussian(6, 1), gaussian(6, 2));
    let plan = draw_plan(2, &mut rng::stream(3));
    for mode in [ScalarMode::F64, ScalarMode::F32, ScalarMode::decimal(4).unwrap()] {
        let one = recursive_randomized_apply(&f, &RecursivePlan { levels: vec![plan.clone()] }, &a, &b, mode).unwrap();
        assert_eq!(one, randomized_apply(&f, &plan, &a, &b, mode).unwrap());
    }
}

#[test]
fn exact_formula_cancels_for_every_plan() {
    let s = BilinearFormula::strassen();
    let mut r = rng::stream(8);
    for t in 0..100 {
        let (a, b) = (gaussian(8, 10 + t), gaussian(8, 20_000 + t));
        let exact = a.naive_product(&b);
        let q = 1 + (t as usize % 3);
        let plan = draw_recursive_plan(2, q, &mut r);
        let c = recursive_randomized_apply(&s, &plan, &a, &b, ScalarMode::F64).unwrap();
        assert!(c.relative_error(&exact) <= 1e-10);
    }
}

#[test]
fn rescale_factor_applies_once_per_level() {
    let f = perturbed(21);
    let c = 1.0 / (1.0 - f.kappa());
    let (a, b) = (gaussian(8, 5), gaussian(8, 6));
    let plan = draw_recursive_plan(2, 2, &mut rng::stream(9));
    let scaled = recursive_randomized_apply(&f, &plan, &a, &b, ScalarMode::F64).unwrap();
    let unscaled = recursive_randomized_apply_with(&f, &plan, Scaling::Unscaled, &a, &b, ScalarMode::F64).unwrap();
    for (s, u) in scaled.data().iter().zip(unscaled.data()) {
        assert!((u / s - 1.0 / (c * c)).abs() <= 1e-12, "{}", u / s);
    }
}

#[test]
fn leaf_count_is_rank_power() {
    let s = BilinearFormula::strassen();
    let a = gaussian(64, 1);
    for q in 0..=5 {
        let (_, leaves) = recursive_apply_counted(&s, &a, &a, q, ScalarMode::F32).unwrap();
        assert_eq!(leaves, 7u64.pow(q as u32));
    }
}

#[test]
fn padding_then_cropping_matches_direct_product() {
    let s = BilinearFormula::strassen();
    let (a, b) = (gaussian(5, 1), gaussian(5, 2));
    let (pa, size) = pad_to_shape(&a, 2, 2);
    let (pb, _) = pad_to_shape(&b, 2, 2);
    assert_eq!(pa.rows(), 8);
    let plan = draw_recursive_plan(2, 2, &mut rng::stream(4));
    let c = randbc_core::crop(&recursive_randomized_apply(&s, &plan, &pa, &pb, ScalarMode::F64).unwrap(), size);
    let direct = randbc_core::standard_multiply(&a, &b, ScalarMode::F64).unwrap();
    assert!(c.relative_error(&direct) <= 1e-13);
    let d = randbc_core::multiply::padded_recursive_apply(&s, &a, &b, 2, ScalarMode::F64).unwrap();
    assert!(d.relative_error(&direct) <= 1e-13);
}

#[test]
fn identity_hatting_leaves_tensors_alone() {
    let f = perturbed(2);
    let [u, v, w] = RandomizationPlan::identity(2).hatted(&f, 1.0).unwrap();
    assert_eq!(u, f.tensor(Tensor::U));
    assert_eq!(v, f.tensor(Tensor::V));
    assert_eq!(w, f.tensor(Tensor::W));
    let _ = RecursivePlan::identity(2, 3);
}
