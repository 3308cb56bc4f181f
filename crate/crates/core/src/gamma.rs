//! Dirac matrices in 1+4 dimensions, the interaction matrices `F`, `H` and
//! the Hermitian Dirac symbol driving the per-mode spinor evolution.
//!
//! Everything here is dense 4x4 complex algebra. The built-in representation
//! has entries in `{0, ±1, ±i}`, so the Clifford relations hold exactly in
//! floating point.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A value of a spinor field at one point.
pub type Spinor = [C64; 4];

/// Diagonal of the Minkowski metric `η = diag(-1, 1, 1, 1, 1)`.
pub const SIGNATURE: [f64; 5] = [-1.0, 1.0, 1.0, 1.0, 1.0];

/// Largest Clifford violation accepted by [`GammaSet::from_matrices`].
pub const CLIFFORD_TOLERANCE: f64 = 1e-12;

const O: C64 = C64::new(0.0, 0.0);
const P: C64 = C64::new(1.0, 0.0);
const N: C64 = C64::new(-1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);
const J: C64 = C64::new(0.0, -1.0);

/// Dense 4x4 complex matrix, row-major.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat4(pub [[C64; 4]; 4]);

impl Mat4 {
    pub const fn zero() -> Self {
        Mat4([[O; 4]; 4])
    }

    pub const fn identity() -> Self {
        Mat4([[P, O, O, O], [O, P, O, O], [O, O, P, O], [O, O, O, P]])
    }

    pub fn diagonal(d: [C64; 4]) -> Self {
        let mut m = Self::zero();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    /// Entrywise max-norm `max |a_ij|`.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z *= s);
        m
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    #[inline]
    pub fn apply(&self, v: &Spinor) -> Spinor {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2] + m[0][3] * v[3],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2] + m[1][3] * v[3],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2] + m[2][3] * v[3],
            m[3][0] * v[0] + m[3][1] * v[1] + m[3][2] * v[2] + m[3][3] * v[3],
        ]
    }

    /// `a^* M b` for spinors `a`, `b`.
    #[inline]
    pub fn sandwich(&self, a: &Spinor, b: &Spinor) -> C64 {
        let mb = self.apply(b);
        a[0].conj() * mb[0] + a[1].conj() * mb[1] + a[2].conj() * mb[2] + a[3].conj() * mb[3]
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &Mat4) -> Mat4 {
        *self * *other - *other * *self
    }

    /// Anticommutator `{self, other}`.
    pub fn anticommutator(&self, other: &Mat4) -> Mat4 {
        *self * *other + *other * *self
    }
}

impl Default for Mat4 {
    fn default() -> Self {
        Self::zero()
    }
}

impl fmt::Debug for Mat4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat4[")?;
        for row in &self.0 {
            write!(f, "  ")?;
            for z in row {
                write!(f, "({:+.3}{:+.3}i) ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Mul for Mat4 {
    type Output = Mat4;
    fn mul(self, rhs: Mat4) -> Mat4 {
        let mut m = Mat4::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = (0..4).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        m
    }
}

impl Add for Mat4 {
    type Output = Mat4;
    fn add(mut self, rhs: Mat4) -> Mat4 {
        self += rhs;
        self
    }
}

impl AddAssign for Mat4 {
    fn add_assign(&mut self, rhs: Mat4) {
        for (a, b) in self.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *a += *b;
        }
    }
}

impl Sub for Mat4 {
    type Output = Mat4;
    fn sub(self, rhs: Mat4) -> Mat4 {
        self + (-rhs)
    }
}

impl Neg for Mat4 {
    type Output = Mat4;
    fn neg(self) -> Mat4 {
        self.scale_re(-1.0)
    }
}

/// Max over `μ, ν` of `‖γ^μγ^ν + γ^νγ^μ + 2η_{μν}I‖_max`.
///
/// Takes raw matrices so that deliberately broken sets can be measured.
pub fn check_clifford(matrices: &[Mat4; 5]) -> f64 {
    let mut worst = 0.0f64;
    for mu in 0..5 {
        for nu in 0..5 {
            let mut m = matrices[mu].anticommutator(&matrices[nu]);
            if mu == nu {
                m += Mat4::identity().scale_re(2.0 * SIGNATURE[mu]);
            }
            worst = worst.max(m.max_abs());
        }
    }
    worst
}

/// Max over `μ` of `‖(γ^μ)^* + η_{μμ}γ^μ‖_max`.
pub fn check_adjoint(matrices: &[Mat4; 5]) -> f64 {
    matrices
        .iter()
        .zip(SIGNATURE)
        .map(|(g, eta)| (g.adjoint() + g.scale_re(eta)).max_abs())
        .fold(0.0, f64::max)
}

/// The five Dirac matrices `γ^0 … γ^4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSet {
    matrices: [Mat4; 5],
}

impl GammaSet {
    /// The explicit representation with `γ^0 = diag(1, 1, -1, -1)` and
    /// `γ^4 = -γ^0γ^1γ^2γ^3`.
    pub fn standard() -> Self {
        let g0 = Mat4::diagonal([P, P, N, N]);
        let g1 = Mat4([[O, O, O, P], [O, O, P, O], [O, N, O, O], [N, O, O, O]]);
        let g2 = Mat4([[O, O, O, J], [O, O, I, O], [O, I, O, O], [J, O, O, O]]);
        let g3 = Mat4([[O, O, P, O], [O, O, O, N], [N, O, O, O], [O, P, O, O]]);
        let g4 = Mat4([[O, O, I, O], [O, O, O, I], [I, O, O, O], [O, I, O, O]]);
        GammaSet {
            matrices: [g0, g1, g2, g3, g4],
        }
    }

    /// Accepts an arbitrary representation after checking the Clifford
    /// relations to [`CLIFFORD_TOLERANCE`].
    pub fn from_matrices(matrices: [Mat4; 5]) -> Result<Self> {
        let violation = check_clifford(&matrices);
        if !(violation <= CLIFFORD_TOLERANCE) {
            return Err(Error::CliffordViolation {
                violation,
                limit: CLIFFORD_TOLERANCE,
            });
        }
        Ok(GammaSet { matrices })
    }

    pub fn matrices(&self) -> &[Mat4; 5] {
        &self.matrices
    }

    #[inline]
    pub fn gamma(&self, mu: usize) -> &Mat4 {
        &self.matrices[mu]
    }

    pub fn signature(&self) -> [f64; 5] {
        SIGNATURE
    }

    pub fn clifford_violation(&self) -> f64 {
        check_clifford(&self.matrices)
    }

    pub fn adjoint_violation(&self) -> f64 {
        check_adjoint(&self.matrices)
    }

    /// `‖γ^4 + γ^0γ^1γ^2γ^3‖_max`; zero for the standard set.
    pub fn volume_form_violation(&self) -> f64 {
        let m = &self.matrices;
        (m[4] + m[0] * m[1] * m[2] * m[3]).max_abs()
    }

    /// `γ^0γ^a` for spatial `a ∈ 1..=4`.
    pub fn alpha(&self, a: usize) -> Mat4 {
        self.matrices[0] * self.matrices[a]
    }

    /// `½γ^aγ^b`, the spin part of the modified rotation `Ω̂_ab`.
    pub fn rotation_spin(&self, a: usize, b: usize) -> Mat4 {
        (self.matrices[a] * self.matrices[b]).scale_re(0.5)
    }

    /// `½γ^0γ^a`, the spin part of the modified boost `L̂_a`.
    pub fn boost_spin(&self, a: usize) -> Mat4 {
        self.alpha(a).scale_re(0.5)
    }

    /// `iγ^0`, the factor turning a Dirac source `G` into `∂_tψ` units.
    pub fn i_gamma0(&self) -> Mat4 {
        self.matrices[0].scale(I)
    }
}

impl Default for GammaSet {
    fn default() -> Self {
        Self::standard()
    }
}

/// Free-function spelling of [`GammaSet::standard`].
pub fn build_gamma_set() -> GammaSet {
    GammaSet::standard()
}

/// The Yukawa interaction matrices of `vFψ` and `ψ^*Hψ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionPair {
    pub f: Mat4,
    pub h: Mat4,
}

impl InteractionPair {
    pub fn new(f: Mat4, h: Mat4) -> Self {
        InteractionPair { f, h }
    }

    /// The classical Yukawa coupling `F = I`, `H = γ^0`.
    pub fn identity_gamma0(gamma: &GammaSet) -> Self {
        InteractionPair {
            f: Mat4::identity(),
            h: *gamma.gamma(0),
        }
    }

    /// `F = H = 0`: the equations decouple into free flows.
    pub fn decoupled() -> Self {
        InteractionPair {
            f: Mat4::zero(),
            h: Mat4::zero(),
        }
    }

    pub fn validate(&self, gamma: &GammaSet) -> (f64, f64) {
        validate_interactions(self, gamma)
    }
}

/// Returns `(‖(γ^0F)^* − γ^0F‖_max, ‖H^* − H‖_max)`; `(0, 0)` is admissible.
pub fn validate_interactions(pair: &InteractionPair, gamma: &GammaSet) -> (f64, f64) {
    let g0f = *gamma.gamma(0) * pair.f;
    (
        (g0f.adjoint() - g0f).max_abs(),
        (pair.h.adjoint() - pair.h).max_abs(),
    )
}

/// `𝖧(ξ) = Σ_a ξ_a γ^0γ^a + Mγ^0`. Hermitian, with `𝖧(ξ)² = (|ξ|² + M²) I`.
pub fn dirac_symbol(gamma: &GammaSet, xi: [f64; 4], mass: f64) -> Mat4 {
    let mut h = gamma.gamma(0).scale_re(mass);
    for (a, &x) in xi.iter().enumerate() {
        if x != 0.0 {
            h += gamma.alpha(a + 1).scale_re(x);
        }
    }
    h
}
