mod common;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsr_core::ensemble::{coassociation_degree, coassociation_factor, Partition, PartitionEnsemble};
use wsr_core::kernels::KernelSpec;
use wsr_core::linalg::{DiagonalMatrix, WoodburySolver};
use wsr_core::regression::{fit_dense, fit_lowrank, SolverParams, WeakLabel, WeakTreatment};

use common::*;

fn max_rel(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn permuted_ensemble(e: &PartitionEnsemble, perm: &[usize]) -> PartitionEnsemble {
    let parts = e
        .partitions()
        .iter()
        .map(|p| Partition::new(perm.iter().map(|&i| p.labels()[i]).collect(), p.k()).unwrap())
        .collect();
    PartitionEnsemble::new(parts, e.weights().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn woodbury_is_linear(seed in any::<u64>(), n in 5usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_ensemble(&mut rng, n, 3, 5);
        let factor = coassociation_factor(&e);
        let gamma = log_uniform(&mut rng, 1e-4, 1e-1);
        let b = Array1::from_shape_fn(n, |_| if rng.random_bool(0.3) { 1.01 } else { 0.01 });
        let g = DiagonalMatrix::new(&b + &(2.0 * gamma * coassociation_degree(&e).values()));
        let solver = WoodburySolver::new(&g, &factor, gamma).unwrap();
        let r1 = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let r2 = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let sum = solver.solve((&r1 + &r2).view()).unwrap();
        let parts = solver.solve(r1.view()).unwrap() + solver.solve(r2.view()).unwrap();
        prop_assert!(max_rel(&sum, &parts) <= 1e-10);
    }

    #[test]
    fn lowrank_fit_is_permutation_equivariant(seed in any::<u64>(), n in 5usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_ensemble(&mut rng, n, 4, 6);
        let labels = random_labels(&mut rng, n);
        let params = SolverParams::new(log_uniform(&mut rng, 1e-3, 1e-1), 0.01).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let pe = permuted_ensemble(&e, &perm);
        let plabels: Vec<WeakLabel> = perm.iter().map(|&i| labels[i]).collect();
        let base = fit_lowrank(&labels, &params, &coassociation_factor(&e), &coassociation_degree(&e)).unwrap();
        let moved = fit_lowrank(&plabels, &params, &coassociation_factor(&pe), &coassociation_degree(&pe)).unwrap();
        for (pos, &i) in perm.iter().enumerate() {
            prop_assert!((moved.a_star[pos] - base.a_star[i]).abs() <= 1e-10 * (1.0 + base.a_star[i].abs()));
            prop_assert!((moved.sigma_star[pos] - base.sigma_star[i]).abs() <= 1e-10 * (1.0 + base.sigma_star[i].abs()));
        }
    }

    #[test]
    fn means_scale_linearly_and_leave_sigma_alone(seed in any::<u64>(), c in -5.0..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let e = random_ensemble(&mut rng, n, 3, 4);
        let labels = random_labels(&mut rng, n);
        let scaled: Vec<WeakLabel> = labels.iter().map(|l| WeakLabel { mean: c * l.mean, ..*l }).collect();
        let (f, d) = (coassociation_factor(&e), coassociation_degree(&e));
        let params = SolverParams::default();
        let base = fit_lowrank(&labels, &params, &f, &d).unwrap();
        let s = fit_lowrank(&scaled, &params, &f, &d).unwrap();
        prop_assert!(max_rel(&s.a_star, &(c * &base.a_star)) <= 1e-10);
        prop_assert_eq!(s.sigma_star, base.sigma_star);
    }

    #[test]
    fn dense_fit_is_permutation_equivariant(seed in any::<u64>(), n in 3usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0..2.0));
        let labels = random_labels(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let px = Array2::from_shape_fn((n, 2), |(r, c)| x[[perm[r], c]]);
        let plabels: Vec<WeakLabel> = perm.iter().map(|&i| labels[i]).collect();
        let spec = KernelSpec::gaussian(1.0);
        let params = SolverParams::new(0.05, 0.01).unwrap();
        let base = fit_dense(x.view(), &labels, &params, &spec, WeakTreatment::Weak).unwrap();
        let moved = fit_dense(px.view(), &plabels, &params, &spec, WeakTreatment::Weak).unwrap();
        for (pos, &i) in perm.iter().enumerate() {
            prop_assert!((moved.a_star[pos] - base.a_star[i]).abs() <= 1e-10 * (1.0 + base.a_star[i].abs()));
        }
    }

    #[test]
    fn sigma_is_finite_and_nonnegative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 80;
        let e = random_ensemble(&mut rng, n, 5, 6);
        let labels = random_labels(&mut rng, n);
        let params = SolverParams::new(log_uniform(&mut rng, 1e-4, 1.0), log_uniform(&mut rng, 1e-4, 1e-1)).unwrap();
        let p = fit_lowrank(&labels, &params, &coassociation_factor(&e), &coassociation_degree(&e)).unwrap();
        prop_assert!(p.sigma_star.iter().all(|s| s.is_finite() && *s >= 0.0));
        prop_assert!(p.a_star.iter().all(|a| a.is_finite()));
        prop_assert!(coassociation_degree(&e).values().iter().all(|d| *d >= 0.0));
    }
}

#[test]
fn lowrank_matches_oracle_on_example_1a_instance() {
    use wsr_core::datagen::{synthetic_dataset, MixtureSpec, SplitSpec};
    use wsr_core::ensemble::{build_ensemble, EnsembleConfig, KSchedule};
    let data = synthetic_dataset(&MixtureSpec::example_1a(0.1), &SplitSpec::default(), 300, 4).unwrap();
    let e = build_ensemble(data.x.view(), &EnsembleConfig::uniform(10, KSchedule::Constant { k: 2 }, 4)).unwrap();
    let params = SolverParams::default();
    let p = fit_lowrank(&data.split.labels, &params, &coassociation_factor(&e), &coassociation_degree(&e)).unwrap();
    let (a, s) = oracle_fit(&data.split.labels, &coassociation_by_loops(&e), &params);
    assert!(rel_err(&p.a_star, &a) <= 1e-8);
    assert!(rel_err(&p.sigma_star, &s) <= 1e-8);
}

#[test]
fn dense_matches_stationarity_oracle() {
    use wsr_core::datagen::{synthetic_dataset, MixtureSpec, SplitSpec};
    use wsr_core::kernels::similarity_matrix;
    let data = synthetic_dataset(&MixtureSpec::example_1a(0.1), &SplitSpec::default(), 300, 5).unwrap();
    let spec = KernelSpec::gaussian(6.6);
    let params = SolverParams::default();
    let p = fit_dense(data.x.view(), &data.split.labels, &params, &spec, WeakTreatment::Weak).unwrap();
    let w = similarity_matrix(data.x.view(), &spec).unwrap().into_inner();
    let (a, s) = oracle_fit(&data.split.labels, &w, &params);
    assert!(rel_err(&p.a_star, &a) <= 1e-8);
    assert!(rel_err(&p.sigma_star, &s) <= 1e-8);
    let (ga, gs) = gradient(&data.split.labels, &w, &params, &p.a_star, &p.sigma_star);
    assert!(ga.iter().chain(gs.iter()).all(|g| g.abs() <= 1e-6));
}
