mod common;

use common::{random_scalar_profile, random_source, random_spinor_profile, relative_l2};
use dkg_core::fields::{gaussian_data, Field, InitialData};
use dkg_core::gamma::{GammaSet, InteractionPair};
use dkg_core::grid::Grid;
use dkg_core::propagate::{
    coupled_direct_solve, dirac_evolve, kg_evolve, Analytic, CoupledProblem, SeparableSource,
};
use dkg_core::trajectory::TimeGrid;
use rand::SeedableRng;

#[test]
fn duhamel_flows_match_the_method_of_lines_on_linear_problems() {
    let grid = Grid::new(8, 6.0).unwrap();
    let gamma = GammaSet::standard();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let data = gaussian_data(1.0, 1.0, &grid, 2).unwrap();
    let ds: SeparableSource<_> = random_source(&mut rng, |r| random_spinor_profile(&grid, r));
    let ks: SeparableSource<_> = random_source(&mut rng, |r| random_scalar_profile(&grid, r));
    let times = TimeGrid::new(0.0, 0.0625, 16).unwrap();
    let (m, mk) = (0.4, 0.7);

    let psi = dirac_evolve(&data.psi0, Some(&Analytic(&ds)), m, &gamma, &times).unwrap();
    let v = kg_evolve(&data.v0, &data.v1, Some(&Analytic(&ks)), mk, &times).unwrap();

    let mut problem = CoupledProblem::new(&gamma, InteractionPair::decoupled(), m, mk);
    problem.dirac_source = Some(&ds);
    problem.kg_source = Some(&ks);
    let oracle = coupled_direct_solve(problem, &data, &times, 1.0 / 64.0).unwrap();
    for k in 0..times.len() {
        assert!(relative_l2(psi.snapshot(k), oracle.psi.snapshot(k)) < 1e-6, "psi at {k}");
        assert!(relative_l2(v.snapshot(k), oracle.v.snapshot(k)) < 1e-6, "v at {k}");
        assert!(relative_l2(&v.jet(k).derivs[1], &oracle.v.jet(k).derivs[1]) < 1e-5, "v_t at {k}");
    }
}

#[test]
fn zero_data_without_coupling_stay_zero_in_the_oracle() {
    let grid = Grid::new(4, 4.0).unwrap();
    let gamma = GammaSet::standard();
    let times = TimeGrid::new(0.0, 0.5, 2).unwrap();
    let out = coupled_direct_solve(
        CoupledProblem::new(&gamma, InteractionPair::identity_gamma0(&gamma), 1.0, 1.0),
        &InitialData::zeros(&grid),
        &times,
        0.125,
    )
    .unwrap();
    assert!(out.psi.values().all(|p| p.l2_norm() == 0.0));
    assert!(out.v.values().all(|p| p.l2_norm() == 0.0));
}
