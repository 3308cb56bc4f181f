//! Periodic box `[-L, L)^4` with `n` points per axis and its FFT plans.
//!
//! Flat index layout is row-major with axis 1 slowest:
//! `index = ((i1 * n + i2) * n + i3) * n + i4`.
//!
//! Spectral coefficients are Fourier-series amplitudes in physical
//! coordinates: `f(x_j) = Σ_k c_k exp(i ξ_k · x_j)` with `ξ_k = π k / L`.
//! Under this convention `‖f‖_{L²} = (2L)² ‖c‖_{ℓ²}`.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub(crate) struct FftPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// A uniform periodic 4D grid.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    half_length: f64,
    coords: Arc<[f64]>,
    kappa: Arc<[f64]>,
    plans: Arc<FftPlans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("half_length", &self.half_length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_length == other.half_length
    }
}

impl Grid {
    /// `n` must be even and at least 2; `half_length` positive and finite.
    pub fn new(n: usize, half_length: f64) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 2, got {n}"
            )));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half length must be positive, got {half_length}"
            )));
        }
        let h = 2.0 * half_length / n as f64;
        let coords: Vec<f64> = (0..n).map(|i| -half_length + i as f64 * h).collect();
        let kappa: Vec<f64> = (0..n)
            .map(|i| {
                if i == n / 2 {
                    0.0
                } else {
                    std::f64::consts::PI * signed_mode(i, n) as f64 / half_length
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        let plans = FftPlans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        };
        Ok(Grid {
            n,
            half_length,
            coords: coords.into(),
            kappa: kappa.into(),
            plans: Arc::new(plans),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Grid spacing `h = 2L / n`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    /// Number of grid points `n⁴`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(4)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h⁴`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(4)
    }

    /// Box volume `(2L)⁴`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_length).powi(4)
    }

    /// The box coordinates `-L + i h` of one axis.
    pub fn axis_coordinates(&self) -> &[f64] {
        &self.coords
    }

    /// Derivative symbol per axis index: `π k / L`, with the Nyquist entry
    /// set to zero so that odd derivatives map real fields to real fields.
    pub fn derivative_symbol(&self) -> &[f64] {
        &self.kappa
    }

    #[inline]
    pub fn multi_index(&self, index: usize) -> [usize; 4] {
        let n = self.n;
        [
            index / (n * n * n),
            (index / (n * n)) % n,
            (index / n) % n,
            index % n,
        ]
    }

    #[inline]
    pub fn flat_index(&self, idx: [usize; 4]) -> usize {
        let n = self.n;
        ((idx[0] * n + idx[1]) * n + idx[2]) * n + idx[3]
    }

    /// Physical coordinates of a grid point.
    #[inline]
    pub fn point(&self, index: usize) -> [f64; 4] {
        self.multi_index(index).map(|i| self.coords[i])
    }

    /// Integer frequency vector of a spectral index, in `[-n/2, n/2)`.
    pub fn mode(&self, index: usize) -> [i64; 4] {
        self.multi_index(index).map(|i| signed_mode(i, self.n))
    }

    /// Spectral index of an integer frequency vector.
    pub fn mode_index(&self, k: [i64; 4]) -> usize {
        let n = self.n as i64;
        self.flat_index(k.map(|ki| ki.rem_euclid(n) as usize))
    }

    /// Derivative wavevector `κ` of a spectral index.
    #[inline]
    pub fn wavevector(&self, index: usize) -> [f64; 4] {
        self.multi_index(index).map(|i| self.kappa[i])
    }

    /// Index of the spectral mode `-k`.
    pub fn negated_index(&self, index: usize) -> usize {
        let n = self.n;
        self.flat_index(self.multi_index(index).map(|i| (n - i) % n))
    }

    /// `Σ_a k_a²` over the derivative symbol in units of `(π/L)²`. Modes with
    /// equal keys share every radial propagator coefficient.
    pub fn radial_key(&self, index: usize) -> usize {
        let n = self.n;
        self.multi_index(index)
            .iter()
            .map(|&i| {
                if i == n / 2 {
                    0
                } else {
                    let k = signed_mode(i, n);
                    (k * k) as usize
                }
            })
            .sum()
    }

    /// Largest value [`Grid::radial_key`] can take.
    pub fn max_radial_key(&self) -> usize {
        let k = self.n / 2 - 1;
        4 * k * k
    }

    /// `|κ|²` for a radial key.
    pub fn key_to_kappa_sq(&self, key: usize) -> f64 {
        let unit = std::f64::consts::PI / self.half_length;
        unit * unit * key as f64
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }

    /// Physical samples to Fourier-series coefficients, in place.
    pub(crate) fn forward_in_place(&self, data: &mut [C64]) {
        debug_assert_eq!(data.len(), self.len());
        self.fft4(&*self.plans.forward, data);
        self.apply_checkerboard(data);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// Fourier-series coefficients to physical samples, in place.
    pub(crate) fn inverse_in_place(&self, data: &mut [C64]) {
        debug_assert_eq!(data.len(), self.len());
        self.apply_checkerboard(data);
        self.fft4(&*self.plans.inverse, data);
    }

    /// Multiplies spectral index `k` by `(-1)^{k1+k2+k3+k4} = exp(-iξ_k·(-L))`,
    /// the phase that moves the DFT origin to `x = -L`.
    fn apply_checkerboard(&self, data: &mut [C64]) {
        let n = self.n;
        for (outer, row) in data.chunks_exact_mut(n).enumerate() {
            let base = self.multi_index(outer * n);
            let parity = (base[0] + base[1] + base[2]) % 2;
            for (i, z) in row.iter_mut().enumerate() {
                if (parity + i) % 2 == 1 {
                    *z = -*z;
                }
            }
        }
    }

    /// Unnormalized 4D DFT: four passes of 1D transforms along the contiguous
    /// axis, each followed by a transpose that rotates the next axis into the
    /// contiguous position.
    fn fft4(&self, fft: &dyn Fft<f64>, data: &mut [C64]) {
        let n = self.n;
        let rows = data.len() / n;
        FFT_BUFFERS.with(|cell| {
            let mut bufs = cell.borrow_mut();
            let (tmp, scratch) = &mut *bufs;
            tmp.resize(data.len(), C64::new(0.0, 0.0));
            scratch.resize(fft.get_inplace_scratch_len(), C64::new(0.0, 0.0));
            for _ in 0..2 {
                fft.process_with_scratch(data, scratch);
                transpose::transpose(data, tmp, n, rows);
                fft.process_with_scratch(tmp, scratch);
                transpose::transpose(tmp, data, n, rows);
            }
        });
    }
}

thread_local! {
    static FFT_BUFFERS: RefCell<(Vec<C64>, Vec<C64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

#[inline]
fn signed_mode(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
