//! Field containers on a [`Grid`], spectral transforms, spectral derivatives
//! and discrete Lebesgue norms.
//!
//! Three physical containers share the [`Field`] trait: real scalars (the
//! Klein-Gordon field), complex scalars (bilinears `Φ₁^*HΦ₂`) and `ℂ⁴`
//! spinors. Norms use the rectangle rule `h⁴ Σ`, which is spectrally
//! accurate for smooth periodic integrands.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::gamma::{Mat4, Spinor};
use crate::grid::Grid;

/// Which Lebesgue norm to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

/// Pointwise value of a field: `f64`, `C64` or [`Spinor`].
pub trait FieldValue: Copy + Send + Sync + 'static {
    const ZERO: Self;
    fn add_scaled(&mut self, alpha: f64, other: &Self);
    fn scaled(&self, alpha: f64) -> Self;
    fn norm_sqr(&self) -> f64;
    /// `Re⟨self, other⟩`.
    fn real_inner(&self, other: &Self) -> f64;
    /// Number of real numbers in one value.
    const REALS: usize;
    fn push_reals(&self, out: &mut Vec<f64>);
    /// Inverse of [`FieldValue::push_reals`]; `reals.len() == REALS`.
    fn from_reals(reals: &[f64]) -> Self;
    fn is_finite(&self) -> bool;
}

impl FieldValue for f64 {
    const ZERO: Self = 0.0;
    const REALS: usize = 1;
    fn push_reals(&self, out: &mut Vec<f64>) {
        out.push(*self);
    }
    fn from_reals(reals: &[f64]) -> Self {
        reals[0]
    }
    #[inline]
    fn add_scaled(&mut self, alpha: f64, other: &Self) {
        *self += alpha * other;
    }
    #[inline]
    fn scaled(&self, alpha: f64) -> Self {
        alpha * self
    }
    #[inline]
    fn norm_sqr(&self) -> f64 {
        self * self
    }
    #[inline]
    fn real_inner(&self, other: &Self) -> f64 {
        self * other
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl FieldValue for C64 {
    const ZERO: Self = C64::new(0.0, 0.0);
    const REALS: usize = 2;
    fn push_reals(&self, out: &mut Vec<f64>) {
        out.extend([self.re, self.im]);
    }
    fn from_reals(reals: &[f64]) -> Self {
        C64::new(reals[0], reals[1])
    }
    #[inline]
    fn add_scaled(&mut self, alpha: f64, other: &Self) {
        *self += other * alpha;
    }
    #[inline]
    fn scaled(&self, alpha: f64) -> Self {
        self * alpha
    }
    #[inline]
    fn norm_sqr(&self) -> f64 {
        C64::norm_sqr(self)
    }
    #[inline]
    fn real_inner(&self, other: &Self) -> f64 {
        (self.conj() * other).re
    }
    fn is_finite(&self) -> bool {
        C64::is_finite(*self)
    }
}

impl FieldValue for Spinor {
    const ZERO: Self = [C64::new(0.0, 0.0); 4];
    const REALS: usize = 8;
    fn push_reals(&self, out: &mut Vec<f64>) {
        for z in self {
            out.extend([z.re, z.im]);
        }
    }
    fn from_reals(reals: &[f64]) -> Self {
        [0, 1, 2, 3].map(|c| C64::new(reals[2 * c], reals[2 * c + 1]))
    }
    #[inline]
    fn add_scaled(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b * alpha;
        }
    }
    #[inline]
    fn scaled(&self, alpha: f64) -> Self {
        self.map(|z| z * alpha)
    }
    #[inline]
    fn norm_sqr(&self) -> f64 {
        self.iter().map(|z| z.norm_sqr()).sum()
    }
    #[inline]
    fn real_inner(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| (a.conj() * b).re).sum()
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|z| z.is_finite())
    }
}

/// Common interface of the physical-space field containers.
pub trait Field: Clone + Send + Sync + Sized + 'static {
    type Value: FieldValue;
    type Spectrum: Clone + Send + Sync;

    fn grid(&self) -> &Grid;
    fn from_values_unchecked(grid: &Grid, values: Vec<Self::Value>) -> Self;
    fn values(&self) -> &[Self::Value];
    fn values_mut(&mut self) -> &mut [Self::Value];

    fn forward(&self) -> Self::Spectrum;

    /// `∂_a f` for spatial axis `a ∈ 1..=4`, evaluated from a spectrum.
    fn derivative_from(spectrum: &Self::Spectrum, axis: usize) -> Self;

    /// `Δf` for a spectrum, with the same symbol as [`Field::derivative_from`].
    fn laplacian_from(spectrum: &Self::Spectrum) -> Self;

    /// `M f` pointwise; `None` for fields without spinor structure.
    fn matrix_product(&self, m: &Mat4) -> Option<Self>;

    fn laplacian(&self) -> Self {
        Self::laplacian_from(&self.forward())
    }

    fn zeros(grid: &Grid) -> Self {
        Self::from_values_unchecked(grid, vec![Self::Value::ZERO; grid.len()])
    }

    /// `self += alpha * other`.
    fn axpy(&mut self, alpha: f64, other: &Self) {
        debug_assert!(self.grid() == other.grid());
        for (a, b) in self.values_mut().iter_mut().zip(other.values()) {
            a.add_scaled(alpha, b);
        }
    }

    fn scale(&mut self, alpha: f64) {
        for v in self.values_mut() {
            *v = v.scaled(alpha);
        }
    }

    fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    fn difference(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `self += coef * x_axis * other` for spatial axis `a ∈ 1..=4`, with box
    /// coordinates.
    fn add_coordinate_product(&mut self, axis: usize, coef: f64, other: &Self) {
        let grid = self.grid().clone();
        let n = grid.n();
        let stride = n.pow(4 - axis as u32);
        let coords = grid.axis_coordinates();
        for (block, (dst, src)) in self
            .values_mut()
            .chunks_exact_mut(stride)
            .zip(other.values().chunks_exact(stride))
            .enumerate()
        {
            let c = coef * coords[block % n];
            for (a, b) in dst.iter_mut().zip(src) {
                a.add_scaled(c, b);
            }
        }
    }

    fn derivative(&self, axis: usize) -> Self {
        Self::derivative_from(&self.forward(), axis)
    }

    /// `(∂_1 f, …, ∂_4 f)` from one forward transform.
    fn gradient(&self) -> [Self; 4] {
        let spec = self.forward();
        [1, 2, 3, 4].map(|a| Self::derivative_from(&spec, a))
    }

    fn l2_norm(&self) -> f64 {
        lebesgue_norm(self, Norm::L2)
    }

    fn max_modulus(&self) -> f64 {
        lebesgue_norm(self, Norm::Inf)
    }

    fn is_finite(&self) -> bool {
        self.values().iter().all(FieldValue::is_finite)
    }

    /// Pointwise modulus `|f(x)|` (Euclidean on `ℂ⁴`).
    fn modulus(&self) -> Vec<f64> {
        self.values().iter().map(|v| v.norm_sqr().sqrt()).collect()
    }
}

/// Discrete Lebesgue norm: `h⁴Σ|f|`, `(h⁴Σ|f|²)^{1/2}` or `max|f|`.
pub fn lebesgue_norm<F: Field>(f: &F, p: Norm) -> f64 {
    let dv = f.grid().cell_volume();
    let vals = f.values();
    match p {
        Norm::L1 => dv * vals.iter().map(|v| v.norm_sqr().sqrt()).sum::<f64>(),
        Norm::L2 => (dv * vals.iter().map(FieldValue::norm_sqr).sum::<f64>()).sqrt(),
        Norm::Inf => vals
            .iter()
            .map(|v| v.norm_sqr().sqrt())
            .fold(0.0, f64::max),
    }
}

macro_rules! field_common {
    ($name:ident, $value:ty) => {
        impl $name {
            pub fn zeros(grid: &Grid) -> Self {
                <Self as Field>::zeros(grid)
            }

            /// Wraps samples in row-major grid order.
            pub fn from_values(grid: &Grid, values: Vec<$value>) -> Result<Self> {
                if values.len() != grid.len() {
                    return Err(Error::Format(format!(
                        "expected {} samples, got {}",
                        grid.len(),
                        values.len()
                    )));
                }
                Ok($name {
                    grid: grid.clone(),
                    values,
                })
            }

            /// Samples `f(x)` at every grid point.
            pub fn from_fn(grid: &Grid, mut f: impl FnMut([f64; 4]) -> $value) -> Self {
                let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
                $name {
                    grid: grid.clone(),
                    values,
                }
            }

            pub fn grid(&self) -> &Grid {
                &self.grid
            }

            pub fn values(&self) -> &[$value] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [$value] {
                &mut self.values
            }

            pub fn into_values(self) -> Vec<$value> {
                self.values
            }
        }
    };
}

/// Real scalar field (the Klein-Gordon unknown and its data).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

/// Complex scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<C64>,
}

/// `ℂ⁴`-valued field (the Dirac unknown and its data).
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorField {
    grid: Grid,
    values: Vec<Spinor>,
}

field_common!(ScalarField, f64);
field_common!(ComplexField, C64);
field_common!(SpinorField, Spinor);

/// Fourier-series coefficients of a scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralScalar {
    grid: Grid,
    coeffs: Vec<C64>,
}

/// Fourier-series coefficients of a spinor field, 4 components per mode.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSpinor {
    grid: Grid,
    coeffs: Vec<Spinor>,
}

impl SpectralScalar {
    pub fn zeros(grid: &Grid) -> Self {
        SpectralScalar {
            grid: grid.clone(),
            coeffs: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_coefficients(grid: &Grid, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Format("coefficient count does not match grid".into()));
        }
        Ok(SpectralScalar {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    /// Coefficient of the integer frequency vector `k`.
    pub fn coefficient(&self, k: [i64; 4]) -> C64 {
        self.coeffs[self.grid.mode_index(k)]
    }

    /// Spectral `L²` norm `(2L)² ‖c‖_{ℓ²}`, equal to the physical `L²` norm.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.coeffs.iter().map(|z| z.norm_sqr()).sum();
        (self.grid.volume() * s).sqrt()
    }

    /// `max_k |c_k - conj(c_{-k})|`; zero for transforms of real fields.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[i] - self.coeffs[self.grid.negated_index(i)].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Real field, assuming conjugate symmetry (imaginary parts dropped).
    pub fn inverse(&self) -> ScalarField {
        let c = self.inverse_complex();
        ScalarField {
            grid: self.grid.clone(),
            values: c.values.iter().map(|z| z.re).collect(),
        }
    }

    pub fn inverse_complex(&self) -> ComplexField {
        let mut data = self.coeffs.clone();
        self.grid.inverse_in_place(&mut data);
        ComplexField {
            grid: self.grid.clone(),
            values: data,
        }
    }

    /// Multiplies every coefficient by `symbol(κ)`.
    pub fn map_symbol(&self, symbol: impl Fn([f64; 4]) -> C64) -> SpectralScalar {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * symbol(self.grid.wavevector(i)))
            .collect();
        SpectralScalar {
            grid: self.grid.clone(),
            coeffs,
        }
    }
}

impl SpectralSpinor {
    pub fn zeros(grid: &Grid) -> Self {
        SpectralSpinor {
            grid: grid.clone(),
            coeffs: vec![Spinor::ZERO; grid.len()],
        }
    }

    pub fn from_coefficients(grid: &Grid, coeffs: Vec<Spinor>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Format("coefficient count does not match grid".into()));
        }
        Ok(SpectralSpinor {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Spinor] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Spinor] {
        &mut self.coeffs
    }

    pub fn coefficient(&self, k: [i64; 4]) -> Spinor {
        self.coeffs[self.grid.mode_index(k)]
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.coeffs.iter().map(FieldValue::norm_sqr).sum();
        (self.grid.volume() * s).sqrt()
    }

    pub fn inverse(&self) -> SpinorField {
        let n = self.grid.len();
        let mut values = vec![Spinor::ZERO; n];
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for c in 0..4 {
            for (b, s) in buf.iter_mut().zip(&self.coeffs) {
                *b = s[c];
            }
            self.grid.inverse_in_place(&mut buf);
            for (v, b) in values.iter_mut().zip(&buf) {
                v[c] = *b;
            }
        }
        SpinorField {
            grid: self.grid.clone(),
            values,
        }
    }
}

fn forward_complex(grid: &Grid, mut data: Vec<C64>) -> SpectralScalar {
    grid.forward_in_place(&mut data);
    SpectralScalar {
        grid: grid.clone(),
        coeffs: data,
    }
}

fn laplacian_symbol(k: [f64; 4]) -> C64 {
    C64::new(-(k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + k[3] * k[3]), 0.0)
}

fn derivative_coefficients(spec: &SpectralScalar, axis: usize) -> Vec<C64> {
    let grid = &spec.grid;
    let n = grid.n();
    let stride = n.pow(4 - axis as u32);
    let kappa = grid.derivative_symbol();
    let mut out = spec.coeffs.clone();
    for (block, chunk) in out.chunks_exact_mut(stride).enumerate() {
        let factor = C64::new(0.0, kappa[block % n]);
        chunk.iter_mut().for_each(|z| *z *= factor);
    }
    out
}

impl Field for ScalarField {
    type Value = f64;
    type Spectrum = SpectralScalar;

    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn from_values_unchecked(grid: &Grid, values: Vec<f64>) -> Self {
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    fn forward(&self) -> SpectralScalar {
        forward_complex(
            &self.grid,
            self.values.iter().map(|&x| C64::new(x, 0.0)).collect(),
        )
    }
    fn derivative_from(spec: &SpectralScalar, axis: usize) -> Self {
        let mut data = derivative_coefficients(spec, axis);
        spec.grid.inverse_in_place(&mut data);
        ScalarField {
            grid: spec.grid.clone(),
            values: data.iter().map(|z| z.re).collect(),
        }
    }
    fn laplacian_from(spec: &SpectralScalar) -> Self {
        spec.map_symbol(laplacian_symbol).inverse()
    }
    fn matrix_product(&self, _m: &Mat4) -> Option<Self> {
        None
    }

    /// Two derivatives per inverse transform: the symbols are odd, so
    /// `∂_a f + i ∂_b f` splits into real and imaginary parts.
    fn gradient(&self) -> [Self; 4] {
        let spec = self.forward();
        let pair = |a: usize, b: usize| {
            let da = derivative_coefficients(&spec, a);
            let db = derivative_coefficients(&spec, b);
            let mut data: Vec<C64> = da
                .iter()
                .zip(&db)
                .map(|(x, y)| x + C64::new(0.0, 1.0) * y)
                .collect();
            self.grid.inverse_in_place(&mut data);
            (
                ScalarField::from_values_unchecked(&self.grid, data.iter().map(|z| z.re).collect()),
                ScalarField::from_values_unchecked(&self.grid, data.iter().map(|z| z.im).collect()),
            )
        };
        let (d1, d2) = pair(1, 2);
        let (d3, d4) = pair(3, 4);
        [d1, d2, d3, d4]
    }
}

impl Field for ComplexField {
    type Value = C64;
    type Spectrum = SpectralScalar;

    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn from_values_unchecked(grid: &Grid, values: Vec<C64>) -> Self {
        ComplexField {
            grid: grid.clone(),
            values,
        }
    }
    fn values(&self) -> &[C64] {
        &self.values
    }
    fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }
    fn forward(&self) -> SpectralScalar {
        forward_complex(&self.grid, self.values.clone())
    }
    fn derivative_from(spec: &SpectralScalar, axis: usize) -> Self {
        let mut data = derivative_coefficients(spec, axis);
        spec.grid.inverse_in_place(&mut data);
        ComplexField {
            grid: spec.grid.clone(),
            values: data,
        }
    }
    fn laplacian_from(spec: &SpectralScalar) -> Self {
        spec.map_symbol(laplacian_symbol).inverse_complex()
    }
    fn matrix_product(&self, _m: &Mat4) -> Option<Self> {
        None
    }
}

impl Field for SpinorField {
    type Value = Spinor;
    type Spectrum = SpectralSpinor;

    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn from_values_unchecked(grid: &Grid, values: Vec<Spinor>) -> Self {
        SpinorField {
            grid: grid.clone(),
            values,
        }
    }
    fn values(&self) -> &[Spinor] {
        &self.values
    }
    fn values_mut(&mut self) -> &mut [Spinor] {
        &mut self.values
    }
    fn forward(&self) -> SpectralSpinor {
        let n = self.grid.len();
        let mut coeffs = vec![Spinor::ZERO; n];
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for c in 0..4 {
            for (b, v) in buf.iter_mut().zip(&self.values) {
                *b = v[c];
            }
            self.grid.forward_in_place(&mut buf);
            for (s, b) in coeffs.iter_mut().zip(&buf) {
                s[c] = *b;
            }
        }
        SpectralSpinor {
            grid: self.grid.clone(),
            coeffs,
        }
    }
    fn derivative_from(spec: &SpectralSpinor, axis: usize) -> Self {
        let grid = &spec.grid;
        let n = grid.n();
        let stride = n.pow(4 - axis as u32);
        let kappa = grid.derivative_symbol();
        let mut coeffs = spec.coeffs.clone();
        for (block, chunk) in coeffs.chunks_exact_mut(stride).enumerate() {
            let factor = C64::new(0.0, kappa[block % n]);
            for s in chunk {
                *s = s.map(|z| z * factor);
            }
        }
        SpectralSpinor {
            grid: grid.clone(),
            coeffs,
        }
        .inverse()
    }
    fn laplacian_from(spec: &SpectralSpinor) -> Self {
        let grid = &spec.grid;
        let coeffs = spec
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.scaled(laplacian_symbol(grid.wavevector(i)).re))
            .collect();
        SpectralSpinor {
            grid: grid.clone(),
            coeffs,
        }
        .inverse()
    }
    fn matrix_product(&self, m: &Mat4) -> Option<Self> {
        Some(SpinorField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| m.apply(v)).collect(),
        })
    }
}

impl ScalarField {
    /// Values along the first axis through the grid point nearest the origin.
    pub fn axis_slice(&self) -> Vec<(f64, f64)> {
        let n = self.grid.n();
        let mid = n / 2;
        (0..n)
            .map(|i| {
                let idx = self.grid.flat_index([i, mid, mid, mid]);
                (self.grid.axis_coordinates()[i], self.values[idx])
            })
            .collect()
    }
}

impl ComplexField {
    pub fn real_part(&self) -> ScalarField {
        ScalarField::from_values_unchecked(&self.grid, self.values.iter().map(|z| z.re).collect())
    }

    pub fn max_imaginary(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

impl SpinorField {
    /// Scalar field of component `c`.
    pub fn component(&self, c: usize) -> ComplexField {
        ComplexField::from_values_unchecked(&self.grid, self.values.iter().map(|v| v[c]).collect())
    }

    /// `M f` pointwise.
    pub fn apply_matrix(&self, m: &Mat4) -> SpinorField {
        SpinorField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| m.apply(v)).collect(),
        }
    }

    /// `f(x) · F ψ(x)` for a real scalar `f`.
    pub fn scalar_product_with(&self, f: &ScalarField, m: &Mat4) -> SpinorField {
        let values = self
            .values
            .iter()
            .zip(&f.values)
            .map(|(psi, &u)| m.apply(psi).map(|z| z * u))
            .collect();
        SpinorField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// The bilinear `a^* M b` pointwise.
    pub fn bilinear(a: &SpinorField, m: &Mat4, b: &SpinorField) -> ComplexField {
        ComplexField {
            grid: a.grid.clone(),
            values: a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| m.sandwich(x, y))
                .collect(),
        }
    }
}

/// Fields combined with [`Field::axpy`] must share a grid.
pub fn ensure_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Cauchy data `(ψ₀, v₀, v₁)` at the initial time.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub psi0: SpinorField,
    pub v0: ScalarField,
    pub v1: ScalarField,
}

impl InitialData {
    pub fn zeros(grid: &Grid) -> Self {
        InitialData {
            psi0: SpinorField::zeros(grid),
            v0: ScalarField::zeros(grid),
            v1: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.psi0.grid()
    }

    pub fn scaled(&self, c: f64) -> Self {
        InitialData {
            psi0: self.psi0.scaled(c),
            v0: self.v0.scaled(c),
            v1: self.v1.scaled(c),
        }
    }
}

/// Centered Gaussian data of amplitude `ε` and width `σ`.
///
/// With `g = exp(-|x|²/(2σ²))`: `ψ₀ = ε w g` for a seed-dependent unit vector
/// `w ∈ ℂ⁴`, `v₀ = ε g`, `v₁ = ε g / 2`.
pub fn gaussian_data(amplitude: f64, width: f64, grid: &Grid, seed: u64) -> Result<InitialData> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("amplitude must be nonnegative and finite, got {amplitude}"),
        });
    }
    let limit = grid.half_length() / 4.0;
    if !(width > 0.0) || width >= limit {
        return Err(Error::WidthTooLarge {
            sigma: width,
            limit,
        });
    }
    let w = spinor_weights(seed);
    let profile = ScalarField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (-r2 / (2.0 * width * width)).exp()
    });
    let psi0 = SpinorField::from_values_unchecked(
        grid,
        profile
            .values()
            .iter()
            .map(|&g| w.map(|c| c * (amplitude * g)))
            .collect(),
    );
    Ok(InitialData {
        psi0,
        v0: profile.scaled(amplitude),
        v1: profile.scaled(amplitude / 2.0),
    })
}

/// Unit-norm complex 4-vector drawn from a seeded generator.
pub fn spinor_weights(seed: u64) -> Spinor {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    loop {
        let w: Spinor = [0; 4].map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let norm = w.norm_sqr().sqrt();
        if norm > 1e-3 {
            return w.map(|c| c / norm);
        }
    }
}

/// The weighted smallness functional of the data:
///
/// `Σ_{k≤N} ‖⟨x⟩^N ∇^kψ₀‖₂ + Σ_{k≤N+1} (‖⟨x⟩^N ∇^kv₀‖₁ + ‖⟨x⟩^N ∇^kv₀‖₂)
///  + Σ_{k≤N} (‖⟨x⟩^N ∇^kv₁‖₁ + ‖⟨x⟩^N ∇^kv₁‖₂)`,
///
/// where `|∇^k f|² = Σ_{a₁…a_k} |∂_{a₁}⋯∂_{a_k} f|²` over ordered tuples and
/// `⟨x⟩ = (1 + |x|²)^{1/2}` in box coordinates.
pub fn data_norm(data: &InitialData, order: usize) -> f64 {
    let grid = data.grid();
    let weight: Vec<f64> = (0..grid.len())
        .map(|i| {
            let r2: f64 = grid.point(i).iter().map(|v| v * v).sum();
            (1.0 + r2).powf(order as f64 / 2.0)
        })
        .collect();
    let dv = grid.cell_volume();
    let norms = |spectra: &[SpectralScalar], k: usize| -> (f64, f64) {
        let modulus = derivative_tensor_modulus(spectra, k);
        let (mut l1, mut l2) = (0.0, 0.0);
        for (g, w) in modulus.iter().zip(&weight) {
            l1 += w * g;
            l2 += (w * g) * (w * g);
        }
        (dv * l1, (dv * l2).sqrt())
    };

    let psi_spectra: Vec<SpectralScalar> =
        (0..4).map(|c| data.psi0.component(c).forward()).collect();
    let v0_spectrum = [data.v0.forward()];
    let v1_spectrum = [data.v1.forward()];

    let mut total = 0.0;
    for k in 0..=order {
        total += norms(&psi_spectra, k).1;
    }
    for k in 0..=order + 1 {
        let (l1, l2) = norms(&v0_spectrum, k);
        total += l1 + l2;
    }
    for k in 0..=order {
        let (l1, l2) = norms(&v1_spectrum, k);
        total += l1 + l2;
    }
    total
}

/// Pointwise `|∇^k f|` for a field given by the spectra of its components.
/// Each distinct multi-index `α` with `|α| = k` is counted `k!/α!` times.
fn derivative_tensor_modulus(spectra: &[SpectralScalar], k: usize) -> Vec<f64> {
    let grid = spectra[0].grid().clone();
    let mut acc = vec![0.0; grid.len()];
    for alpha in multi_indices(k) {
        let multiplicity = multinomial(&alpha);
        for spec in spectra {
            let mut coeffs = spec.coefficients().to_vec();
            for (i, c) in coeffs.iter_mut().enumerate() {
                let kappa = grid.wavevector(i);
                let mut factor = C64::new(1.0, 0.0);
                for (a, &p) in alpha.iter().enumerate() {
                    factor *= C64::new(0.0, kappa[a]).powu(p as u32);
                }
                *c *= factor;
            }
            grid.inverse_in_place(&mut coeffs);
            for (a, z) in acc.iter_mut().zip(&coeffs) {
                *a += multiplicity * z.norm_sqr();
            }
        }
    }
    acc.iter().map(|v| v.sqrt()).collect()
}

/// All `α ∈ ℕ⁴` with `|α| = k`.
fn multi_indices(k: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..=k {
        for b in 0..=k - a {
            for c in 0..=k - a - b {
                out.push([a, b, c, k - a - b - c]);
            }
        }
    }
    out
}

fn multinomial(alpha: &[usize; 4]) -> f64 {
    let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    fact(alpha.iter().sum()) / alpha.iter().map(|&a| fact(a)).product::<f64>()
}
