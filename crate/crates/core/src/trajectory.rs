//! Uniform output time grids, time jets and stored trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Field;

/// Output times `t0 + k dt` for `k = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("time step must be positive and finite, got {dt}"),
            });
        }
        Ok(TimeGrid { t0, dt, steps })
    }

    /// `[t0, t_end]` split into steps of at most `dt_max`, rounded up so the
    /// end point is hit exactly.
    pub fn spanning(t0: f64, t_end: f64, dt_max: f64) -> Result<Self> {
        if !(t_end > t0) {
            return Err(Error::InvalidParameter {
                name: "t_max",
                reason: format!("end time {t_end} must exceed start time {t0}"),
            });
        }
        let steps = ((t_end - t0) / dt_max - 1e-9).ceil().max(1.0) as usize;
        TimeGrid::new(t0, (t_end - t0) / steps as f64, steps)
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// Index of the node equal to `t` up to rounding.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if k < 0.0 || k as usize > self.steps || (x - k).abs() > 1e-9 {
            return Err(Error::NotASampleTime(t));
        }
        Ok(k as usize)
    }
}

/// A field and its first time derivatives at one instant: `derivs[j] = ∂_t^j f`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<F> {
    pub time: f64,
    pub derivs: Vec<F>,
}

impl<F: Field> Jet<F> {
    pub fn new(time: f64, derivs: Vec<F>) -> Self {
        assert!(!derivs.is_empty(), "a jet needs at least the value");
        Jet { time, derivs }
    }

    pub fn value(&self) -> &F {
        &self.derivs[0]
    }

    /// Number of stored time derivatives beyond the value.
    pub fn order(&self) -> usize {
        self.derivs.len() - 1
    }

    /// The same jet cut to `order` time derivatives.
    pub fn truncated(&self, order: usize) -> Jet<F> {
        Jet {
            time: self.time,
            derivs: self.derivs[..=order.min(self.order())].to_vec(),
        }
    }

    /// Componentwise difference, over the common order.
    pub fn difference(&self, other: &Jet<F>) -> Jet<F> {
        Jet {
            time: self.time,
            derivs: self
                .derivs
                .iter()
                .zip(&other.derivs)
                .map(|(a, b)| a.difference(b))
                .collect(),
        }
    }
}

/// Jets sampled on a [`TimeGrid`].
#[derive(Clone, Debug)]
pub struct Trajectory<F> {
    times: TimeGrid,
    jets: Vec<Jet<F>>,
}

impl<F: Field> Trajectory<F> {
    pub fn new(times: TimeGrid, jets: Vec<Jet<F>>) -> Result<Self> {
        if jets.len() != times.len() {
            return Err(Error::Format(format!(
                "{} jets for {} sample times",
                jets.len(),
                times.len()
            )));
        }
        Ok(Trajectory { times, jets })
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.jets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jets.is_empty()
    }

    pub fn jets(&self) -> &[Jet<F>] {
        &self.jets
    }

    pub fn jet(&self, k: usize) -> &Jet<F> {
        &self.jets[k]
    }

    pub fn snapshot(&self, k: usize) -> &F {
        self.jets[k].value()
    }

    pub fn at_time(&self, t: f64) -> Result<&Jet<F>> {
        Ok(&self.jets[self.times.index_of(t)?])
    }

    /// Snapshot values only.
    pub fn values(&self) -> impl Iterator<Item = &F> {
        self.jets.iter().map(Jet::value)
    }

    pub fn into_jets(self) -> Vec<Jet<F>> {
        self.jets
    }
}
