use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use paraexp::diagnostics::{relative_l2_difference, CostLedger};
use paraexp::expm::{
    candidate_grid, estimate_norm, expm_action, krylov_reference, log_distance_product, optimal_tolerance,
    select_parameters, ExpmMethod, LejaPoints, MAX_DEGREE,
};
use paraexp::fitgrid::{Materials, StaggeredGrid};
use paraexp::leapfrog::cfl_timestep;
use paraexp::sparse::{SparseOperator, Symmetry};
use paraexp::system::{assemble, DiscreteSystem, SourceSignal};

fn random_skew(n: usize, rng: &mut ChaCha8Rng) -> SparseOperator {
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random::<f64>() * 2.0 - 1.0;
            d[i * n + j] = v;
            d[j * n + i] = -v;
        }
    }
    SparseOperator::from_dense(n, n, &d, Symmetry::Skew).unwrap()
}

fn small_fit() -> DiscreteSystem {
    let grid = StaggeredGrid::uniform([5, 5, 2], [4.0, 4.0, 1.0]).unwrap();
    assemble(&grid, &Materials::vacuum(&grid), SourceSignal::zero()).unwrap()
}

fn dense(a: &SparseOperator) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), &a.to_dense())
}

/// `exp(tA)·b` for skew `A` via the eigendecomposition of `-A²`.
fn oracle(a: &DMatrix<f64>, b: &[f64], t: f64) -> Vec<f64> {
    let s2 = -(a * a);
    let eig = SymmetricEigen::new((&s2 + s2.transpose()) * 0.5);
    let v = &eig.eigenvectors;
    let coeff = v.transpose() * DVector::from_column_slice(b);
    let (mut c, mut s) = (coeff.clone(), coeff);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let w = lam.max(0.0).sqrt();
        c[k] *= (t * w).cos();
        s[k] *= if w * t.abs() < 1e-8 { t } else { (t * w).sin() / w };
    }
    (v * c + a * (v * s)).iter().copied().collect()
}

fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let s2 = -(a * a);
    let eig = SymmetricEigen::new((&s2 + s2.transpose()) * 0.5);
    eig.eigenvalues.max().sqrt()
}

#[test]
fn krylov_full_dimension_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_skew(50, &mut rng);
    let b: Vec<f64> = (0..50).map(|_| rng.random::<f64>() - 0.5).collect();
    let res = krylov_reference(&a, &b, 0.7, 50, &mut CostLedger::new()).unwrap();
    let err = relative_l2_difference(&res.w, &oracle(&dense(&a), &b, 0.7)).unwrap();
    assert!(err < 1e-11, "{err:e}");
}

#[test]
fn norm_estimate_on_fit_operator() {
    let sys = small_fit();
    let exact = spectral_norm(&dense(sys.a()));
    let est = estimate_norm(sys.a(), &mut CostLedger::new());
    assert!(!est.degraded);
    assert!((est.value - exact).abs() <= 1e-3 * exact, "{} vs {exact}", est.value);
}

#[test]
fn norm_estimate_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let a = random_skew(40, &mut rng);
        let exact = spectral_norm(&dense(&a));
        let est = estimate_norm(&a, &mut CostLedger::new()).value;
        assert!((est - exact).abs() <= 1e-3 * exact, "{est} vs {exact}");
    }
}

#[test]
fn leja_points_are_greedy_at_pair_leaders() {
    let z = LejaPoints::new(MAX_DEGREE + 1);
    let z = z.magnitudes();
    let grid = candidate_grid();
    for k in (3..z.len()).step_by(2) {
        let best = grid
            .iter()
            .filter(|x| !z[..k].contains(x))
            .map(|&x| log_distance_product(x, &z[..k]))
            .fold(f64::NEG_INFINITY, f64::max);
        let chosen = log_distance_product(z[k], &z[..k]);
        assert!(
            chosen >= best - 1e-9 * best.abs().max(1.0),
            "k = {k}: {chosen} < {best}"
        );
        assert_eq!(z[k + 1], -z[k]);
    }
}

#[test]
fn fit_operator_actions_match_oracle() {
    let sys = small_fit();
    let a = dense(sys.a());
    let t = 8.0 * cfl_timestep(sys.grid(), sys.materials());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let b: Vec<f64> = (0..sys.n_state()).map(|_| rng.random::<f64>() - 0.5).collect();
    let exact = oracle(&a, &b, t);
    let bound = estimate_norm(sys.a(), &mut CostLedger::new()).value;
    for method in [ExpmMethod::Taylor, ExpmMethod::Leja, ExpmMethod::KrylovRef] {
        for eps in [1e-3, 1e-6, 1e-10] {
            let plan = select_parameters(method, t, bound, eps).unwrap();
            let w = expm_action(sys.a(), &b, t, &plan, &mut CostLedger::new()).unwrap();
            let err = relative_l2_difference(&w, &exact).unwrap();
            assert!(err <= 100.0 * eps, "{method:?} eps {eps:e}: {err:e}");
        }
    }
}

#[test]
fn predicted_cost_bounds_recorded_cost() {
    let sys = small_fit();
    let t = 20.0 * cfl_timestep(sys.grid(), sys.materials());
    let bound = estimate_norm(sys.a(), &mut CostLedger::new()).value;
    let b = vec![1.0; sys.n_state()];
    for method in [ExpmMethod::Taylor, ExpmMethod::Leja] {
        let plan = select_parameters(method, t, bound, 1e-8).unwrap();
        let mut ledger = CostLedger::new();
        expm_action(sys.a(), &b, t, &plan, &mut ledger).unwrap();
        assert!(ledger.n_leja() <= plan.predicted_cost(), "{method:?}");
        assert!(ledger.n_leja() > 0);
    }
}

#[test]
fn optimal_tolerance_is_clamped() {
    assert_eq!(optimal_tolerance(1e-9, 1.0, 1e9), 1e-14);
    assert_eq!(optimal_tolerance(1.0, 1.0, 1.0), 0.5);
    let eps = optimal_tolerance(1e-3, 2.0, 10.0);
    assert!((eps - 2e-7).abs() < 1e-20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn group_property(seed in any::<u64>(), s in 0.05f64..1.5, t in 0.05f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_skew(20, &mut rng);
        let b: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.5).collect();
        let bound = estimate_norm(&a, &mut CostLedger::new()).value;
        let eps = 1e-10;
        let go = |x: &[f64], tau: f64| {
            let plan = select_parameters(ExpmMethod::Leja, tau, bound, eps).unwrap();
            expm_action(&a, x, tau, &plan, &mut CostLedger::new()).unwrap()
        };
        let whole = go(&b, s + t);
        let split = go(&go(&b, s), t);
        prop_assert!(relative_l2_difference(&split, &whole).unwrap() < 1e-8);
    }

    #[test]
    fn actions_preserve_norm(seed in any::<u64>(), t in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_skew(16, &mut rng);
        let b: Vec<f64> = (0..16).map(|_| rng.random::<f64>() - 0.5).collect();
        let bound = estimate_norm(&a, &mut CostLedger::new()).value;
        let plan = select_parameters(ExpmMethod::Taylor, t, bound, 1e-8).unwrap();
        let w = expm_action(&a, &b, t, &plan, &mut CostLedger::new()).unwrap();
        let n = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((n(&w) - n(&b)).abs() <= 1e-7 * n(&b));
    }
}
