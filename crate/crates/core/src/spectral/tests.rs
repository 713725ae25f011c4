use super::*;
use crate::grid::{build_interval_grid, build_masked_grid_2d};
use crate::operators::{assemble, CoefficientFields};
use std::f64::consts::PI;

fn interval_op(n: usize, b: f64, m: f64) -> (Grid<f64>, DiscreteOperator<f64>) {
    let g = build_interval_grid(0.0, PI, n).unwrap();
    let op = assemble(&g, &CoefficientFields::constant(1.0, &[b], m)).unwrap();
    (g, op)
}

#[test]
fn laplacian_principal_pair_is_half_sine() {
    let (g, op) = interval_op(399, 0.0, 1.0);
    let ep = principal_eigenpair(&op).unwrap();
    assert!((ep.lambda_star - 1.0).abs() < 1e-4);
    for (k, p) in g.points().enumerate() {
        assert!((ep.phi[k] - 0.5 * p[0].sin()).abs() < 1e-4);
        assert!((ep.phi_star[k] - 0.5 * p[0].sin()).abs() < 1e-4);
    }
    assert!(ep.residual <= 1e-8 && ep.adjoint_residual <= 1e-8);
    assert!((g.integrate(&ep.phi).unwrap() - 1.0).abs() < 1e-10);
    assert!((ep.lambda_forward - ep.lambda_adjoint).abs() <= 1e-8 * ep.lambda_forward);
}

#[test]
fn principal_eigenvalue_converges_at_second_order() {
    let err: Vec<f64> = [99, 199, 399]
        .iter()
        .map(|&n| (principal_eigenpair(&interval_op(n, 0.0, 1.0).1).unwrap().lambda_star - 1.0).abs())
        .collect();
    assert!(err[0] / err[1] >= 3.5 && err[1] / err[2] >= 3.5, "{err:?}");
}

#[test]
fn constant_advection_shifts_by_quarter_b_squared() {
    let ep = principal_eigenpair(&interval_op(399, 0.5, 1.0).1).unwrap();
    assert!((ep.lambda_star - 1.0625).abs() < 1e-3, "{}", ep.lambda_star);
    assert!(ep.phi.iter().chain(&ep.phi_star).all(|&v| v > 0.0));
}

#[test]
fn disk_principal_eigenvalue_matches_bessel_zero() {
    let g = build_masked_grid_2d([0.0, 2.0 * PI, 0.0, 2.0 * PI], 96, 96, |x, y| {
        (x - PI).powi(2) + (y - PI).powi(2) < PI * PI
    })
    .unwrap();
    let op = assemble(&g, &CoefficientFields::constant(1.0, &[0.0, 0.0], 1.0)).unwrap();
    let ep = principal_eigenpair(&op).unwrap();
    let exact = (2.404_825_557_695_773 / PI).powi(2);
    assert!((ep.lambda_star - exact).abs() < 2e-2, "{}", ep.lambda_star);
}

#[test]
fn h_ratio_examples() {
    let (g, op) = interval_op(399, 0.0, 1.0);
    let ep = principal_eigenpair(&op).unwrap();
    assert!((h_ratio(&g, &ep, &vec![1.0; g.len()]).unwrap() - 1.0).abs() < 1e-12);
    assert!((h_ratio(&g, &ep, &vec![2.0; g.len()]).unwrap() - 2.0).abs() < 1e-12);
    // The pair belongs to m ≡ 1, so sin φ φ* ∝ sin³.
    let m: Vec<f64> = g.points().map(|p| 1.0 + 0.5 * p[0].sin()).collect();
    let expect = 1.0 + 0.5 * 8.0 / (3.0 * PI);
    assert!((h_ratio(&g, &ep, &m).unwrap() - expect).abs() < 1e-3);
    assert!(matches!(h_ratio(&g, &ep, &vec![-1.0; g.len()]), Err(Error::PositivityViolated(_))));
}

#[test]
fn heterogeneous_m_gives_positive_pair() {
    let g = build_interval_grid(0.0, PI, 199).unwrap();
    let m = std::sync::Arc::new(|p: [f64; 2]| (2.0 * p[0]).cos() + 0.3);
    let c = CoefficientFields::new(std::sync::Arc::new(crate::grid::Const(1.0)), vec![], m);
    let op = assemble(&g, &c).unwrap();
    let ep = principal_eigenpair(&op).unwrap();
    assert!(ep.lambda_star > 0.0 && ep.phi.iter().all(|&v| v > 0.0));
    assert!(h_ratio(&g, &ep, &op.m).unwrap() > 0.0);
}

#[test]
fn shift_invert_on_diagonal_matrix() {
    let m = CsrMatrix::diagonal(&[Complex::new(-1.0, 0.0), Complex::new(-2.0, 3.0)]);
    let (mu, _) = rightmost_eigenvalue(&m, Complex::new(-2.0, 2.9)).unwrap();
    assert!((mu - Complex::new(-2.0, 3.0)).norm() < 1e-12);
}

#[test]
fn shift_invert_on_laplacian() {
    let (_, op) = interval_op(199, 0.0, 1.0);
    let (mu, _) = rightmost_eigenvalue(&op.a.to_complex(), Complex::new(-0.9, 0.0)).unwrap();
    assert!((mu - Complex::new(-1.0, 0.0)).norm() < 1e-4);
}

#[test]
fn shift_invert_matches_dense_oracle_on_random_matrix() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let n = 40;
    let trip: Vec<(usize, usize, Complex64)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    let m = CsrMatrix::from_triplets(n, n, trip);
    for seed in [Complex64::new(0.0, 0.0), Complex64::new(2.0, 1.0), Complex64::new(-3.0, -2.0)] {
        let (mu, _) = rightmost_eigenvalue(&m, seed).unwrap();
        let oracle = dense::nearest_eigenvalue(&m, mu).unwrap();
        assert!((mu - oracle).norm() < 1e-8, "{mu} vs {oracle}");
    }
}

#[test]
fn dense_oracle_agrees_with_principal_iteration() {
    let (_, op) = interval_op(199, 0.5, 1.0);
    let ep = principal_eigenpair(&op).unwrap();
    let dense = dense_principal_eigenvalue(&op, ep.lambda_star).unwrap();
    assert!((dense - ep.lambda_star).abs() < 1e-8 * ep.lambda_star);
}

mod crossing {
    use super::*;
    use crate::models::GrowthModel;
    use crate::steady::{bifurcation_scalars, steady_point};

    pub(super) fn setup(model: GrowthModel<f64>, lambda: f64, n: usize) -> (Linearization<f64>, EigenPair<f64>, f64) {
        let (g, op) = interval_op(n, 0.0, 1.0);
        let ep = principal_eigenpair(&op).unwrap();
        let s = bifurcation_scalars(&g, &op, &ep, &model).unwrap();
        let p = steady_point(&g, &op, &model, &s, &ep, lambda).unwrap();
        let lin = Linearization::new(&g, &op, &model, lambda, &p.u).unwrap();
        (lin, ep, s.h_star)
    }

    #[test]
    fn hutchinson_crossing_follows_asymptotics() {
        let (lin, ep, h) = setup(GrowthModel::Hutchinson, 1.1, 199);
        let c = find_hopf_crossing(&lin, &ep.phi, &ep.phi_star, &CrossingOptions::new(0.1 * h, PI / 2.0)).unwrap();
        assert!((c.nu - 0.1).abs() < 0.01, "{}", c.nu);
        assert!((c.theta - PI / 2.0).abs() < 0.15);
        assert!((c.tau(0) / 15.708 - 1.0).abs() < 0.1);
        assert!(c.residual <= 1e-8 && c.adjoint_residual <= 1e-8);
        for (n, t) in c.tau_ladder.iter().enumerate() {
            assert_eq!(*t, (c.theta + 2.0 * PI * n as f64) / c.nu);
        }
        assert_eq!(c.tau_ladder.len(), 4);
        // Normalization against φ.
        let phic: Vec<Complex64> = ep.phi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let proj = lin.inner(&phic, &c.psi);
        assert!(proj.re >= 0.0 && proj.im.abs() < 1e-12 * proj.norm());
        assert!((lin.norm(&c.psi) - lin.norm(&phic)).abs() < 1e-12);
    }

    #[test]
    fn crossing_without_delay_coupling_is_absent() {
        let (mut lin, ep, _) = setup(GrowthModel::Hutchinson, 1.1, 99);
        lin.j1.iter_mut().for_each(|v| *v = 0.0);
        let r = find_hopf_crossing(&lin, &ep.phi, &ep.phi_star, &CrossingOptions::new(0.1, PI / 2.0));
        assert!(matches!(r, Err(Error::NoCrossing)), "{r:?}");
    }

    #[test]
    fn weak_allee_crossing_sits_near_three_halves_pi() {
        let (lin, ep, h) = setup(GrowthModel::WeakAllee, 0.95, 199);
        let c = find_hopf_crossing(&lin, &ep.phi, &ep.phi_star, &CrossingOptions::new(0.05 * h, 1.5 * PI)).unwrap();
        assert!((c.theta - 1.5 * PI).abs() < 0.2, "{}", c.theta);
        assert!(c.nu > 0.0);
    }

    #[test]
    fn transversality_is_positive_and_matches_root_tracking() {
        for model in [GrowthModel::Hutchinson, GrowthModel::FoodLimited { c: 0.5 }] {
            let (lin, ep, h) = setup(model, 1.1, 199);
            let c = find_hopf_crossing(&lin, &ep.phi, &ep.phi_star, &CrossingOptions::new(0.1 * h, PI / 2.0)).unwrap();
            let t = transversality(&lin, &c, 0).unwrap();
            assert!(t.closed_form.re > 0.0 && t.finite_difference > 0.0);
            assert!((t.closed_form.re - t.finite_difference).abs() < 0.05 * t.closed_form.re);
        }
    }

    #[test]
    fn scaled_transversality_approaches_its_limit() {
        // (λ−λ*)⁻² dRe μ/dτ → h² (∫φφ*)² / |S|², with S → (1 + iπ/2)∫φφ*.
        let limit = 1.0 / (1.0 + PI * PI / 4.0);
        let mut errs = Vec::new();
        for lambda in [1.1, 1.05, 1.02] {
            let (lin, ep, h) = setup(GrowthModel::Hutchinson, lambda, 199);
            let c =
                find_hopf_crossing(&lin, &ep.phi, &ep.phi_star, &CrossingOptions::new((lambda - 1.0) * h, PI / 2.0))
                    .unwrap();
            let d = transversality_closed_form(&lin, &c, 0).unwrap();
            errs.push((d.re / (lambda - ep.lambda_star).powi(2) - limit).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2] && errs[2] < 0.05 * limit, "{errs:?}");
    }

    #[test]
    fn crossing_eigenvalue_is_simple() {
        let (lin, ep, h) = setup(GrowthModel::Hutchinson, 1.1, 99);
        let c = find_hopf_crossing(&lin, &ep.phi, &ep.phi_star, &CrossingOptions::new(0.1 * h, PI / 2.0)).unwrap();
        assert!(simplicity_ratio(&lin, &c).unwrap() >= 1e3);
    }

    #[test]
    fn crossing_frequency_matches_dense_spectrum() {
        let (lin, ep, h) = setup(GrowthModel::FoodLimited { c: 0.5 }, 1.1, 99);
        let c = find_hopf_crossing(&lin, &ep.phi, &ep.phi_star, &CrossingOptions::new(0.1 * h, PI / 2.0)).unwrap();
        let m = to_c64(&lin.pencil(cis(-c.theta), Complex::zero()));
        let oracle = dense::nearest_eigenvalue(&m, Complex64::new(0.0, c.nu)).unwrap();
        assert!((oracle - Complex64::new(0.0, c.nu)).norm() < 1e-8);
    }
}
