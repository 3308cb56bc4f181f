//! Closed-form test fields with exact time jets, and the identity suite
//! evaluated on them.
//!
//! All fields are trigonometric polynomials times a raised-cosine bump. They
//! are exactly resolved by the spectral derivative, and multiplying them by
//! a box coordinate leaves a function that is smooth to high order across
//! the seam, so the identity residuals measure only the small truncation of
//! those coordinate multiples. Shapes are normalised to unit L² norm.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    commutator_residuals, family, leibniz_residuals, FieldOperator, LeibnizCase, VectorFieldId, VectorFieldKind,
};
use crate::error::Result;
use crate::fields::{Field, FieldValue, ScalarField, SpinorField};
use crate::gamma::{GammaSet, InteractionPair, Mat4, Spinor};
use crate::grid::Grid;
use crate::trajectory::Jet;

/// Points with some `|x_a|` above this fraction of `L` count as near the seam.
pub const SEAM_FRACTION: f64 = 0.9;

/// Time dependence of one term of an [`AnalyticField`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TimeProfile {
    /// `Σ c_i t^i`.
    Polynomial(Vec<f64>),
    /// `cos(ωt + φ)`.
    Harmonic { frequency: f64, phase: f64 },
}

impl TimeProfile {
    /// `d^r/dt^r` at `t`.
    pub fn derivative(&self, r: usize, t: f64) -> f64 {
        match self {
            TimeProfile::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(r)
                .map(|(i, &ci)| {
                    let falling: f64 = (0..r).map(|k| (i - k) as f64).product();
                    ci * falling * t.powi((i - r) as i32)
                })
                .sum(),
            TimeProfile::Harmonic { frequency, phase } => {
                frequency.powi(r as i32) * (frequency * t + phase + r as f64 * PI / 2.0).cos()
            }
        }
    }
}

/// `f(t, x) = Σ_j T_j(t) φ_j(x)` with exact time derivatives.
#[derive(Clone, Debug)]
pub struct AnalyticField<F> {
    terms: Vec<(TimeProfile, F)>,
}

impl<F: Field> AnalyticField<F> {
    pub fn new() -> Self {
        AnalyticField { terms: Vec::new() }
    }

    pub fn with_term(mut self, profile: TimeProfile, shape: F) -> Self {
        self.terms.push((profile, shape));
        self
    }

    /// `(f, ∂_t f, …, ∂_t^order f)` at time `t`.
    pub fn jet(&self, t: f64, order: usize) -> Jet<F> {
        let grid = self.terms[0].1.grid();
        let derivs = (0..=order)
            .map(|r| {
                let mut out = F::zeros(grid);
                for (profile, shape) in &self.terms {
                    out.axpy(profile.derivative(r, t), shape);
                }
                out
            })
            .collect();
        Jet::new(t, derivs)
    }
}

impl<F: Field> Default for AnalyticField<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// Bump exponent of the fields used in commutator checks.
pub const COMMUTATOR_BUMP: i32 = 10;

/// Bump exponent of the factors used in product-rule checks; products stay
/// below the Nyquist frequency of the `n = 32` grid.
pub const FACTOR_BUMP: i32 = 4;

/// `Π_a cos^{2p}(πx_a/2L) · Σ c Π_a sin^{α_a}(πx_a/L)` for terms `(c, α)`,
/// scaled to unit L² norm. The result is a trigonometric polynomial of
/// degree `p + max α_a` per axis that vanishes to order `2p` at the seam, so
/// coordinate multiples of it stay smooth across the box boundary.
pub fn bump_profile(grid: &Grid, p: i32, terms: &[(f64, [i32; 4])]) -> ScalarField {
    let k = PI / grid.half_length();
    let mut f = ScalarField::from_fn(grid, |x| {
        let y = x.map(|c| c * k);
        let window: f64 = y.iter().map(|c| ((1.0 + c.cos()) / 2.0).powi(p)).product();
        let poly: f64 = terms
            .iter()
            .map(|(c, alpha)| c * (0..4).map(|a| y[a].sin().powi(alpha[a])).product::<f64>())
            .sum();
        window * poly
    });
    let norm = f.l2_norm();
    if norm > 0.0 {
        f.scale(1.0 / norm);
    }
    f
}

/// Fraction of `‖f‖₂²` carried by points near the seam of the box.
pub fn seam_fraction<F: Field>(f: &F) -> f64 {
    let grid = f.grid();
    let edge = SEAM_FRACTION * grid.half_length();
    let mut near = 0.0;
    let mut total = 0.0;
    for (i, v) in f.values().iter().enumerate() {
        let m = v.norm_sqr();
        total += m;
        if grid.point(i).iter().any(|c| c.abs() > edge) {
            near += m;
        }
    }
    if total > 0.0 {
        near / total
    } else {
        0.0
    }
}

fn spinor_shape(shape: &ScalarField, w: Spinor) -> SpinorField {
    SpinorField::from_values(shape.grid(), shape.values().iter().map(|&s| w.map(|z| z * s)).collect())
        .expect("same grid")
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Scalar test field for commutator checks, bump exponent `p`.
pub fn scalar_bump(grid: &Grid, p: i32) -> AnalyticField<ScalarField> {
    AnalyticField::new()
        .with_term(
            TimeProfile::Polynomial(vec![1.0, 0.3, -0.2, 0.05]),
            bump_profile(
                grid,
                p,
                &[(1.0, [0, 0, 0, 0]), (0.4, [1, 0, 0, 0]), (-0.3, [0, 1, 1, 0])],
            ),
        )
        .with_term(
            TimeProfile::Harmonic {
                frequency: 1.3,
                phase: 0.4,
            },
            bump_profile(grid, p, &[(0.5, [0, 1, 0, 0]), (-0.2, [1, 0, 0, 1])]),
        )
}

/// Spinor test field, bump exponent `p`; `variant` selects one of two
/// unrelated fields.
pub fn spinor_bump(grid: &Grid, p: i32, variant: usize) -> AnalyticField<SpinorField> {
    let weights = [
        [
            [c(1.0, 0.0), c(0.2, -0.5), c(0.0, 0.3), c(-0.4, 0.1)],
            [c(0.1, 0.6), c(-0.7, 0.0), c(0.3, 0.3), c(0.0, -0.5)],
            [c(0.0, 0.0), c(0.5, 0.5), c(-0.2, 0.0), c(0.8, -0.1)],
        ],
        [
            [c(0.3, 0.0), c(0.0, 1.0), c(-0.5, 0.2), c(0.1, 0.1)],
            [c(0.6, -0.2), c(0.1, 0.0), c(0.0, 0.4), c(-0.3, -0.3)],
            [c(-0.2, 0.4), c(0.0, 0.0), c(0.7, 0.1), c(0.2, 0.0)],
        ],
    ][variant % 2];
    let shapes: [&[(f64, [i32; 4])]; 3] = if variant % 2 == 0 {
        [
            &[(1.0, [0, 0, 0, 0]), (0.3, [1, 0, 0, 0]), (-0.2, [0, 0, 1, 0])],
            &[(0.4, [0, 1, 0, 0]), (0.2, [1, 0, 0, 1])],
            &[(0.3, [0, 0, 1, 1])],
        ]
    } else {
        [
            &[(1.0, [0, 0, 0, 0]), (-0.5, [0, 1, 0, 0])],
            &[(0.7, [0, 0, 0, 1]), (0.3, [1, 1, 0, 0])],
            &[(0.5, [1, 0, 1, 0]), (0.2, [0, 0, 0, 0])],
        ]
    };
    let profiles = if variant % 2 == 0 {
        [
            TimeProfile::Polynomial(vec![1.0, -0.4, 0.1, 0.02]),
            TimeProfile::Harmonic {
                frequency: 0.9,
                phase: -0.3,
            },
            TimeProfile::Polynomial(vec![0.2, 0.5]),
        ]
    } else {
        [
            TimeProfile::Harmonic {
                frequency: 1.1,
                phase: 0.5,
            },
            TimeProfile::Polynomial(vec![0.5, -0.3, 0.1]),
            TimeProfile::Harmonic {
                frequency: 0.4,
                phase: 1.2,
            },
        ]
    };
    let mut field = AnalyticField::new();
    for ((profile, shape), w) in profiles.into_iter().zip(shapes).zip(weights) {
        field = field.with_term(profile, spinor_shape(&bump_profile(grid, p, shape), w));
    }
    field
}

/// A fixed interaction pair away from the presets: `F = γ⁰A` with `A`
/// Hermitian and `H` Hermitian, both with pseudo-random entries.
pub fn generic_pair(gamma: &GammaSet) -> InteractionPair {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut hermitian = || {
        let mut m = Mat4::zero();
        for i in 0..4 {
            m.0[i][i] = c(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..4 {
                let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m.0[i][j] = z;
                m.0[j][i] = z.conj();
            }
        }
        m
    };
    let a = hermitian();
    let h = hermitian();
    InteractionPair::new(*gamma.gamma(0) * a, h)
}

/// One residual of the identity suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    /// `family/operator/vector field[/pair]`.
    pub identity: String,
    pub n: usize,
    pub residual: f64,
    /// [`seam_fraction`] of the field the identity is evaluated on.
    pub seam_fraction: f64,
}

/// Every commutator and product-rule residual on the registered corpus at
/// time `t`: the wave operator against the family and `L₀`, the Dirac
/// operator against the modified family and `L₀`, and both product rules
/// for every field of the family and `L₀` with two interaction pairs.
pub fn identity_suite(grid: &Grid, gamma: &GammaSet, t: f64) -> Result<Vec<IdentityResidual>> {
    let n = grid.n();
    let mut rows = Vec::new();
    let mut push = |identity: String, residual: f64, seam: f64| {
        rows.push(IdentityResidual {
            identity,
            n,
            residual,
            seam_fraction: seam,
        })
    };

    let mut plain: Vec<VectorFieldId> = family(false).to_vec();
    plain.push(VectorFieldId::scaling());
    let mut hats: Vec<VectorFieldId> = family(true).to_vec();
    hats.push(VectorFieldId::scaling());

    {
        let f = scalar_bump(grid, COMMUTATOR_BUMP).jet(t, 3);
        let seam = seam_fraction(f.value());
        for (op, r) in plain.iter().zip(commutator_residuals(&plain, FieldOperator::Wave, &f, gamma)?) {
            push(format!("commutator/wave/{op}"), r, seam);
        }
    }
    {
        let phi = spinor_bump(grid, COMMUTATOR_BUMP, 0).jet(t, 2);
        let seam = seam_fraction(phi.value());
        for (op, r) in hats.iter().zip(commutator_residuals(&hats, FieldOperator::Dirac, &phi, gamma)?) {
            push(format!("commutator/dirac/{op}"), r, seam);
        }
    }

    let kinds: Vec<VectorFieldKind> = plain.iter().map(VectorFieldId::kind).collect();
    let pairs = [
        ("identity-gamma0", InteractionPair::identity_gamma0(gamma)),
        ("generic", generic_pair(gamma)),
    ];
    let f = scalar_bump(grid, FACTOR_BUMP).jet(t, 1);
    let phi1 = spinor_bump(grid, FACTOR_BUMP, 0).jet(t, 1);
    let phi2 = spinor_bump(grid, FACTOR_BUMP, 1).jet(t, 1);
    let cases = [
        ("", LeibnizCase::ScalarSpinor { f: &f, phi: &phi1 }),
        ("", LeibnizCase::Bilinear { phi1: &phi1, phi2: &phi2 }),
        ("-diagonal", LeibnizCase::Bilinear { phi1: &phi1, phi2: &phi1 }),
    ];
    let seam = seam_fraction(phi1.value());
    for (name, pair) in &pairs {
        for (suffix, case) in &cases {
            let residuals = leibniz_residuals(&kinds, *case, pair, gamma)?;
            for (op, r) in plain.iter().zip(residuals) {
                push(format!("leibniz/{}{suffix}/{op}/{name}", case.label()), r, seam);
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_profiles_differentiate_exactly() {
        let p = TimeProfile::Polynomial(vec![1.0, 2.0, 3.0, 4.0]);
        let t: f64 = 0.5;
        assert!((p.derivative(0, t) - (1.0 + 2.0 * t + 3.0 * t * t + 4.0 * t.powi(3))).abs() < 1e-14);
        assert!((p.derivative(1, t) - (2.0 + 6.0 * t + 12.0 * t * t)).abs() < 1e-14);
        assert!((p.derivative(3, t) - 24.0).abs() < 1e-14);
        assert_eq!(p.derivative(4, t), 0.0);
        let h = TimeProfile::Harmonic {
            frequency: 2.0,
            phase: 0.3,
        };
        assert!((h.derivative(1, t) + 2.0 * (2.0 * t + 0.3).sin()).abs() < 1e-14);
        assert!((h.derivative(2, t) + 4.0 * (2.0 * t + 0.3).cos()).abs() < 1e-14);
    }

    #[test]
    fn generic_pair_satisfies_the_symmetry_conditions() {
        let gamma = GammaSet::standard();
        let (f, h) = generic_pair(&gamma).validate(&gamma);
        assert!(f < 1e-15 && h < 1e-15);
    }

    #[test]
    fn bump_profiles_are_normalised_and_vanish_at_the_seam() {
        let g = Grid::new(16, 8.0).unwrap();
        let f = bump_profile(&g, 3, &[(1.0, [0, 0, 0, 0]), (0.5, [1, 0, 0, 0])]);
        assert!((f.l2_norm() - 1.0).abs() < 1e-12);
        assert_eq!(f.values()[0], 0.0);
        assert!(seam_fraction(&f) < 1e-3);
        let spec = f.forward();
        // degree 4 along the first axis: mode 5 is absent
        assert!(spec.coefficient([5, 0, 0, 0]).norm() < 1e-15);
        assert!(spec.coefficient([4, 0, 0, 0]).norm() > 1e-6);
    }
}
