#![allow(dead_code)]

use dkg_core::fields::{Field, ScalarField, SpinorField};
use dkg_core::gamma::Spinor;
use dkg_core::grid::Grid;
use dkg_core::propagate::{SeparableSource, SourceSample, TimeSource};
use dkg_core::trajectory::TimeGrid;
use dkg_core::C64;
use rand::Rng;

/// Gaussian bump centred at `c` with width `w`.
pub fn bump(grid: &Grid, c: [f64; 4], w: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
        (-r2 / (2.0 * w * w)).exp()
    })
}

pub fn random_spinor(rng: &mut (impl Rng + ?Sized)) -> Spinor {
    [0; 4].map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_centre(rng: &mut (impl Rng + ?Sized)) -> [f64; 4] {
    [0; 4].map(|_| rng.gen_range(-1.0..1.0))
}

pub fn random_scalar_profile(grid: &Grid, rng: &mut (impl Rng + ?Sized)) -> ScalarField {
    bump(grid, random_centre(rng), rng.gen_range(0.8..1.4)).scaled(rng.gen_range(-1.0..1.0))
}

pub fn random_spinor_profile(grid: &Grid, rng: &mut (impl Rng + ?Sized)) -> SpinorField {
    let b = bump(grid, random_centre(rng), rng.gen_range(0.8..1.4));
    let w = random_spinor(rng);
    SpinorField::from_values(grid, b.values().iter().map(|&g| w.map(|z| z * g)).collect()).unwrap()
}

/// Two or three separable terms with random profiles and frequencies.
pub fn random_source<F: Field>(rng: &mut impl Rng, profile: impl Fn(&mut dyn rand::RngCore) -> F) -> SeparableSource<F> {
    let terms = rng.gen_range(2..=3);
    let mut s = SeparableSource::new();
    for _ in 0..terms {
        let p = profile(rng as &mut dyn rand::RngCore);
        s = s.with_term(p, rng.gen_range(0.0..3.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    s
}

pub fn samples<F: Field>(source: &dyn TimeSource<F>, times: &TimeGrid) -> Vec<SourceSample<F>> {
    times
        .times()
        .into_iter()
        .map(|t| SourceSample {
            value: source.value(t),
            rate: source.rate(t),
        })
        .collect()
}

pub fn relative_l2<F: Field>(a: &F, b: &F) -> f64 {
    a.difference(b).l2_norm() / b.l2_norm()
}
