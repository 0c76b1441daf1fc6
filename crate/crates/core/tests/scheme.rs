//! Whole-scheme checks against independent formulations.

use nalgebra::{DMatrix, DVector};

use fracspde::cq::cq_weights;
use fracspde::experiments::{run_convergence_study, Axis, ExperimentConfig};
use fracspde::fbm::{FbmEnsemble, Generator};
use fracspde::solver::{
    noise_increment_field, run_trajectory, Discretization, ModelParams, Nonlinearity,
};
use fracspde::spectral::fractional_eigenvalues;

/// With `f = 0` each mode solves one lower-triangular Toeplitz system
/// `(D/τ + λ^s C) u = ξ`, where `D` is the first difference and `C` the CQ
/// convolution matrix.
#[test]
fn linear_scheme_matches_dense_solve() {
    let (alpha, s, h, m) = (0.4, 0.6, 0.7, -0.5);
    let (n_modes, l) = (5, 40);
    let params = ModelParams::new(alpha, s, h, m, 0.01)
        .unwrap()
        .with_nonlinearity(Nonlinearity::Zero);
    let disc = Discretization::new(n_modes, l, 0.01).unwrap();
    let tau = disc.tau();
    let ens = FbmEnsemble::generate(h, tau, l, n_modes, 0, 1, 21, Generator::Circulant).unwrap();
    let traj = run_trajectory(&params, &disc, &ens, 0).unwrap();

    let d = cq_weights(1.0 - alpha, tau, l).unwrap();
    let lambda = fractional_eigenvalues(n_modes, s);
    for k in 1..=n_modes {
        let mat = DMatrix::from_fn(l, l, |i, j| {
            if j > i {
                return 0.0;
            }
            let diff = match i - j {
                0 => 1.0 / tau,
                1 => -1.0 / tau,
                _ => 0.0,
            };
            diff + lambda[k - 1] * d.weights()[i - j]
        });
        let rhs = DVector::from_fn(l, |n, _| {
            noise_increment_field(&ens, 0, n + 1, m, n_modes)
                .unwrap()
                .coeff(k)
        });
        let u = mat.lu().solve(&rhs).unwrap();
        for n in 0..l {
            let got = traj.states[n + 1].coeff(k);
            assert!(
                (got - u[n]).abs() <= 1e-10 * u[n].abs().max(1e-8),
                "mode {k}, level {}: {got} vs {}",
                n + 1,
                u[n]
            );
        }
    }
}

/// Over seeded reruns the finest error stays below the coarsest one.
#[test]
fn refinement_reduces_error_in_reruns() {
    let params = ModelParams::new(0.5, 0.7, 0.5, 0.0, 0.01).unwrap();
    let mut good = 0;
    let reruns = 20;
    for seed in 0..reruns {
        let cfg =
            ExperimentConfig::new(params.clone(), Axis::Time, vec![8, 16, 32, 64], 8, 10, seed)
                .unwrap();
        let t = run_convergence_study(&cfg).unwrap();
        if t.rows.last().unwrap().error < t.rows[0].error {
            good += 1;
        }
    }
    assert!(good * 100 >= 95 * reruns, "{good}/{reruns}");
}

/// Dropping the noise and the forcing leaves the zero solution on every level.
#[test]
fn silent_study_has_no_rates() {
    let params = ModelParams::new(0.3, 0.7, 0.3, 0.0, 0.01)
        .unwrap()
        .with_nonlinearity(Nonlinearity::Zero)
        .with_noise_scale(0.0)
        .unwrap();
    let cfg = ExperimentConfig::new(params, Axis::Space, vec![4, 8, 16], 16, 2, 0).unwrap();
    let t = run_convergence_study(&cfg).unwrap();
    assert!(t.rows.iter().all(|r| r.error == 0.0 && r.rate.is_none()));
    assert_eq!(t.observed_rate(), None);
}
