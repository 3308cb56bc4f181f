mod common;

use common::relative_l2;
use dkg_core::fields::gaussian_data;
use dkg_core::gamma::{GammaSet, InteractionPair};
use dkg_core::grid::Grid;
use dkg_core::picard::{
    calibrate_epsilon, first_contraction_ratio, fixed_point_residual, iterate, x_distance, IterationConfig,
    SolutionMap, XNormConfig,
};
use dkg_core::propagate::{coupled_direct_solve, CoupledProblem};
use dkg_core::trajectory::TimeGrid;
use dkg_core::Error;

const K1: XNormConfig = XNormConfig {
    k: 1,
    weight_exponent: 0.25,
};

fn map(eps: f64, dt: f64, steps: usize) -> SolutionMap {
    let grid = Grid::new(8, 6.0).unwrap();
    let gamma = GammaSet::standard();
    let data = gaussian_data(eps, 1.0, &grid, 5).unwrap();
    SolutionMap::new(
        data,
        InteractionPair::identity_gamma0(&gamma),
        0.5,
        0.25,
        &gamma,
        TimeGrid::new(0.0, dt, steps).unwrap(),
    )
    .unwrap()
}

#[test]
fn converged_iterates_match_the_nonlinear_oracle() {
    let m = map(0.2, 0.0625, 16);
    let state = iterate(&m, &K1, &IterationConfig { tol: 1e-10, max_iter: 20, ball_cap: None }).unwrap();
    assert!(state.converged);
    assert!(state.ratios().iter().all(|&r| r < 1.0));
    let gamma = GammaSet::standard();
    let oracle = coupled_direct_solve(
        CoupledProblem::new(&gamma, *m.pair(), m.dirac_mass(), m.kg_mass()),
        m.data(),
        m.times(),
        1.0 / 64.0,
    )
    .unwrap();
    let last = m.times().steps;
    assert!(relative_l2(state.phi.snapshot(last), oracle.psi.snapshot(last)) < 1e-5);
    assert!(relative_l2(state.u.snapshot(last), oracle.v.snapshot(last)) < 1e-5);
}

#[test]
fn fixed_point_residual_is_fourth_order_in_the_time_step() {
    let gamma = GammaSet::standard();
    let mut residuals = Vec::new();
    for (dt, steps) in [(0.125, 8), (0.0625, 16)] {
        let m = map(0.2, dt, steps);
        let state = iterate(&m, &K1, &IterationConfig { tol: 1e-11, max_iter: 20, ball_cap: None }).unwrap();
        residuals.push(fixed_point_residual(&state.phi, &state.u, m.pair(), 0.5, 0.25, &gamma).unwrap());
    }
    let (a, b) = (residuals[0], residuals[1]);
    assert!(a.0 / b.0 > 10.0 && a.1 / b.1 > 10.0, "{a:?} {b:?}");
}

#[test]
fn solution_map_is_a_contraction_with_ratio_linear_in_epsilon() {
    let gamma = GammaSet::standard();
    let r1 = first_contraction_ratio(&map(0.1, 0.25, 4), &K1).unwrap();
    let r2 = first_contraction_ratio(&map(0.2, 0.25, 4), &K1).unwrap();
    assert!(r1 < 1.0 && r2 < 1.0);
    assert!((r2 / r1 - 2.0).abs() < 0.2, "{r1} {r2}");

    let m = map(0.1, 0.25, 4);
    let seed = m.homogeneous().unwrap();
    let one = m.apply(&seed.0, &seed.1).unwrap();
    let d = x_distance((&one.0, &one.1), (&seed.0, &seed.1), &K1, &gamma).unwrap();
    assert!(d > 0.0);
    assert_eq!(x_distance((&one.0, &one.1), (&one.0, &one.1), &K1, &gamma).unwrap(), 0.0);
}

#[test]
fn calibration_brackets_the_target_ratio() {
    let cal = calibrate_epsilon(|e| Ok(map(e, 0.25, 4)), &K1, 0.05, 0.3, 0.1, 12).unwrap();
    assert!(cal.ratio <= 0.3);
    let above = cal
        .evaluations
        .iter()
        .filter(|(_, r)| *r > 0.3)
        .map(|(e, _)| *e)
        .fold(f64::INFINITY, f64::min);
    assert!(above / cal.epsilon <= 1.1 + 1e-12, "{cal:?}");
}

#[test]
fn ball_cap_stops_the_iteration() {
    let m = map(0.1, 0.25, 4);
    let err = iterate(&m, &K1, &IterationConfig { tol: 1e-10, max_iter: 5, ball_cap: Some(1e-6) }).unwrap_err();
    assert!(matches!(err, Error::LeftBall { step: 0, .. }));
}
