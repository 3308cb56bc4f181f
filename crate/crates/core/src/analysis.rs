//! Energies, monitors for the linear and nonlinear estimates, the
//! Klainerman-Sobolev ratio, decay fits and the mass sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{lebesgue_norm, ComplexField, Field, FieldValue, InitialData, Norm, ScalarField, SpinorField};
use crate::gamma::{GammaSet, InteractionPair};
use crate::picard::{iterate, japanese, x_norm, IterationConfig, SolutionMap, XNormConfig};
use crate::propagate::SourceSample;
use crate::trajectory::{TimeGrid, Trajectory};
use crate::vecfields::{bilinear_jet, scalar_spinor_jet, visit_family};

/// Default `δ₁` of the Klein-Gordon L² estimate.
pub const DEFAULT_DELTA: f64 = 0.75;

/// Fewest samples accepted by [`fit_decay`].
pub const MIN_FIT_SAMPLES: usize = 8;

/// `∫(|u_t|² + Σ_a|∂_a u|² + m²u²) dx` by the grid quadrature.
pub fn energy(u: &ScalarField, u_t: &ScalarField, m: f64) -> f64 {
    let grad = u.gradient();
    let dv = u.grid().cell_volume();
    let mut sum = 0.0;
    for i in 0..u.values().len() {
        let v = u.values()[i];
        let mut e = u_t.values()[i].powi(2) + m * m * v * v;
        for g in &grad {
            e += g.values()[i].powi(2);
        }
        sum += e;
    }
    dv * sum
}

/// Left and right sides of an inequality `left ≤ right` along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub id: String,
    pub times: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// `right - left` per time.
    pub slack: Vec<f64>,
    pub worst_slack: f64,
}

impl MonitorReport {
    pub fn new(id: impl Into<String>, times: Vec<f64>, left: Vec<f64>, right: Vec<f64>) -> Self {
        let slack: Vec<f64> = left.iter().zip(&right).map(|(l, r)| r - l).collect();
        let worst_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
        MonitorReport {
            id: id.into(),
            times,
            left,
            right,
            slack,
            worst_slack: if worst_slack.is_finite() { worst_slack } else { 0.0 },
        }
    }

    /// `left / right` per time, `0` where both vanish.
    pub fn ratios(&self) -> Vec<f64> {
        self.left
            .iter()
            .zip(&self.right)
            .map(|(&l, &r)| if r > 0.0 { l / r } else if l == 0.0 { 0.0 } else { f64::INFINITY })
            .collect()
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios().into_iter().fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.left.iter().chain(&self.right).all(|v| v.is_finite())
    }
}

fn check_lengths(traj_len: usize, sources: usize) -> Result<()> {
    if traj_len != sources {
        return Err(Error::InvalidParameter {
            name: "sources",
            reason: format!("{sources} source samples for {traj_len} stored times"),
        });
    }
    Ok(())
}

/// `‖G‖₂` and its time derivative `Re⟨G, G_t⟩ / ‖G‖₂` per node.
fn norm_series<F: Field>(sources: &[SourceSample<F>]) -> Vec<(f64, f64)> {
    sources
        .iter()
        .map(|s| {
            let norm = s.value.l2_norm();
            if norm == 0.0 {
                return (0.0, s.rate.l2_norm());
            }
            let dv = s.value.grid().cell_volume();
            let inner: f64 = s
                .value
                .values()
                .iter()
                .zip(s.rate.values())
                .map(|(a, b)| a.real_inner(b))
                .sum();
            (norm, dv * inner / norm)
        })
        .collect()
}

/// Running integral of a sampled function with known derivatives by the
/// corrected trapezoid rule `h/2 (g₀ + g₁) + h²/12 (g₀' - g₁')`.
fn cumulative_hermite(series: &[(f64, f64)], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in series.windows(2) {
        let ((g0, d0), (g1, d1)) = (w[0], w[1]);
        acc += 0.5 * dt * (g0 + g1) + dt * dt / 12.0 * (d0 - d1);
        out.push(acc);
    }
    out
}

/// Running `∫₀^{t_k} s^p g(s) ds` for nodes `s_k` with `g` linear between
/// nodes and the weight integrated exactly.
fn cumulative_weighted(s: &[f64], g: &[f64], p: f64) -> Vec<f64> {
    let moment = |a: f64, b: f64, q: f64| (b.powf(q + 1.0) - a.powf(q + 1.0)) / (q + 1.0);
    let mut out = Vec::with_capacity(s.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..s.len() {
        let (a, b) = (s[k - 1], s[k]);
        let m0 = moment(a, b, p);
        // ∫ s^p (s - a)/(b - a) ds
        let m1 = (moment(a, b, p + 1.0) - a * m0) / (b - a);
        acc += g[k - 1] * (m0 - m1) + g[k] * m1;
        out.push(acc);
    }
    out
}

/// `‖ψ(t)‖₂ ≤ ‖ψ₀‖₂ + ∫₀ᵗ ‖G(s)‖₂ ds` for a sourced Dirac run; the sources
/// are sampled at the stored times with their rates.
pub fn monitor_dirac_l2(psi: &Trajectory<SpinorField>, sources: &[SourceSample<SpinorField>]) -> Result<MonitorReport> {
    check_lengths(psi.len(), sources.len())?;
    let left: Vec<f64> = psi.values().map(Field::l2_norm).collect();
    let integral = cumulative_hermite(&norm_series(sources), psi.times().dt);
    let right = integral.iter().map(|i| left[0] + i).collect();
    Ok(MonitorReport::new("dirac-l2", psi.times().times(), left, right))
}

/// `√E_m(t) ≤ √E_m(0) + ∫₀ᵗ ‖G(s)‖₂ ds` for a sourced Klein-Gordon run.
pub fn monitor_kg_energy(
    u: &Trajectory<ScalarField>,
    sources: &[SourceSample<ScalarField>],
    m: f64,
) -> Result<MonitorReport> {
    check_lengths(u.len(), sources.len())?;
    let left = u
        .jets()
        .iter()
        .map(|j| {
            let ut = j.derivs.get(1).ok_or(Error::JetOrder {
                required: 1,
                available: 0,
            })?;
            Ok(energy(j.value(), ut, m).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    let integral = cumulative_hermite(&norm_series(sources), u.times().dt);
    let right = integral.iter().map(|i| left[0] + i).collect();
    Ok(MonitorReport::new("kg-energy", u.times().times(), left, right))
}

/// `‖u(t)‖₂` against
/// `‖u₀‖₂ + ‖u₁‖₁ + ‖u₁‖₂ + ∫₀ᵗ (s^δ‖G‖₂ + s^{-δ}‖G‖₁) ds`. The inequality
/// holds up to an unquantified constant, so the report is read through
/// [`MonitorReport::ratios`]. For `m = 1` the right side is the massive form
/// `‖u₀‖₂ + ‖u₁‖₂ + ∫₀ᵗ ‖G‖₂ ds`. Elapsed time `s` is measured from the first
/// stored time.
pub fn monitor_kg_l2(
    u: &Trajectory<ScalarField>,
    sources: &[ScalarField],
    m: f64,
    delta: f64,
) -> Result<MonitorReport> {
    check_lengths(u.len(), sources.len())?;
    if !(delta > -1.0 && delta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("weight exponent {delta} must lie in (-1, 1)"),
        });
    }
    let first = u.jet(0);
    let u1 = first.derivs.get(1).ok_or(Error::JetOrder {
        required: 1,
        available: 0,
    })?;
    let t0 = u.times().t0;
    let s: Vec<f64> = u.times().times().iter().map(|t| t - t0).collect();
    let l2: Vec<f64> = sources.iter().map(Field::l2_norm).collect();
    let left = u.values().map(Field::l2_norm).collect();
    let right = if m == 1.0 {
        let base = first.value().l2_norm() + u1.l2_norm();
        cumulative_weighted(&s, &l2, 0.0).iter().map(|x| base + x).collect()
    } else {
        let base = first.value().l2_norm() + lebesgue_norm(u1, Norm::L1) + u1.l2_norm();
        let l1: Vec<f64> = sources.iter().map(|g| lebesgue_norm(g, Norm::L1)).collect();
        let a = cumulative_weighted(&s, &l2, delta);
        let b = cumulative_weighted(&s, &l1, -delta);
        a.iter().zip(&b).map(|(x, y)| base + x + y).collect()
    };
    Ok(MonitorReport::new("kg-l2", u.times().times(), left, right))
}

/// Sum over canonical words `|I| ≤ k` of `‖Γ^I f‖₂` at one jet.
fn family_sum<F: Field>(jet: &crate::trajectory::Jet<F>, k: usize, modified: bool, gamma: &GammaSet) -> Result<f64> {
    let mut sum = 0.0;
    visit_family(jet, k, modified, gamma, |_, g| sum += g.l2_norm())?;
    Ok(sum)
}

/// `max_x|f(t)| ⟨t⟩^{3/2} / sup_{s∈[0,2t]} Σ_{|I|≤K} ‖Γ^I f(s)‖₂` over stored
/// times; `0` for a vanishing denominator. `modified` selects `Γ̂` for spinors.
pub fn ks_ratio<F: Field>(f: &Trajectory<F>, t: f64, k: usize, modified: bool, gamma: &GammaSet) -> Result<f64> {
    let idx = f.times().index_of(t)?;
    let end = 2.0 * t;
    if end > f.times().end() + 1e-9 {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("trajectory ends at {} before 2t = {end}", f.times().end()),
        });
    }
    let nodes: Vec<usize> = (0..f.len()).filter(|&j| f.times().time(j) <= end + 1e-9).collect();
    let sums = nodes
        .par_iter()
        .map(|&j| family_sum(f.jet(j), k, modified, gamma))
        .collect::<Result<Vec<f64>>>()?;
    let denom = sums.into_iter().fold(0.0, f64::max);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(f.snapshot(idx).max_modulus() * japanese(t).powf(1.5) / denom)
}

/// Least-squares power law `value ≈ c ⟨t⟩^p` on a time window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub exponent: f64,
    /// RMS residual in log-log coordinates.
    pub residual: f64,
    pub samples: usize,
}

/// Slope of `log(value)` against `log⟨t⟩` over the samples in `window`.
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    if window.0 < 1.0 {
        return Err(Error::WindowStart(window.0));
    }
    let eps = 1e-9;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 - eps && *t <= window.1 + eps)
        .map(|&(t, v)| {
            if v > 0.0 && v.is_finite() {
                Ok((japanese(t).ln(), v.ln()))
            } else {
                Err(Error::NonPositive { time: t, value: v })
            }
        })
        .collect::<Result<_>>()?;
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        window,
        exponent: slope,
        residual,
        samples: pts.len(),
    })
}

/// `(t, max_x |f(t)|)` for every stored time.
pub fn sup_series<F: Field>(f: &Trajectory<F>) -> Vec<(f64, f64)> {
    f.jets().iter().map(|j| (j.time, j.value().max_modulus())).collect()
}

/// Left sides of the nonlinear-term estimates over time, with decay fits on
/// the trusted window when it holds enough samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearMonitor {
    pub times: Vec<f64>,
    /// `max_{|I|≤K} ‖Γ̂^I(uFφ)‖₂`.
    pub dirac_source: Vec<f64>,
    /// `max_{|I|≤K} ‖Γ^I(φ^*Hφ)‖₂`.
    pub kg_source_l2: Vec<f64>,
    /// `max_{|I|≤K} ‖Γ^I(φ^*Hφ)‖₁`.
    pub kg_source_l1: Vec<f64>,
    pub fits: Option<[DecayFit; 3]>,
}

pub fn monitor_nonlinear(
    phi: &Trajectory<SpinorField>,
    u: &Trajectory<ScalarField>,
    pair: &InteractionPair,
    k: usize,
    gamma: &GammaSet,
    window: (f64, f64),
) -> Result<NonlinearMonitor> {
    if phi.len() != u.len() {
        return Err(Error::InvalidParameter {
            name: "trajectories",
            reason: "spinor and scalar trajectories differ in length".into(),
        });
    }
    let rows = (0..phi.len())
        .into_par_iter()
        .map(|j| {
            let g = scalar_spinor_jet(u.jet(j), phi.jet(j), &pair.f, k)?;
            let h = bilinear_jet(phi.jet(j), phi.jet(j), &pair.h, k)?;
            let mut a = 0.0f64;
            visit_family(&g, k, true, gamma, |_, f| a = a.max(f.l2_norm()))?;
            let (mut b, mut c) = (0.0f64, 0.0f64);
            visit_family::<ComplexField>(&h, k, false, gamma, |_, f| {
                b = b.max(f.l2_norm());
                c = c.max(lebesgue_norm(f, Norm::L1));
            })?;
            Ok((a, b, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let times = phi.times().times();
    let series = |pick: fn(&(f64, f64, f64)) -> f64| -> Vec<(f64, f64)> {
        times.iter().zip(&rows).map(|(&t, r)| (t, pick(r))).collect()
    };
    let fits = (|| -> Result<[DecayFit; 3]> {
        Ok([
            fit_decay(&series(|r| r.0), window)?,
            fit_decay(&series(|r| r.1), window)?,
            fit_decay(&series(|r| r.2), window)?,
        ])
    })()
    .ok();
    Ok(NonlinearMonitor {
        times,
        dirac_source: rows.iter().map(|r| r.0).collect(),
        kg_source_l2: rows.iter().map(|r| r.1).collect(),
        kg_source_l1: rows.iter().map(|r| r.2).collect(),
        fits,
    })
}

/// Shared settings of a mass sweep.
#[derive(Clone, Debug)]
pub struct SweepSetup<'a> {
    pub data: &'a InitialData,
    pub pair: InteractionPair,
    pub gamma: &'a GammaSet,
    pub times: TimeGrid,
    pub norm: XNormConfig,
    pub iteration: IterationConfig,
    pub window: (f64, f64),
}

/// One `(M, m)` run of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dirac_mass: f64,
    pub kg_mass: f64,
    pub converged: bool,
    pub iterations: usize,
    pub x_norm: f64,
    /// Last contraction ratio of the iteration.
    pub ratio: Option<f64>,
    pub psi_decay: Option<f64>,
    pub v_decay: Option<f64>,
    /// `m sup_t ‖v(t)‖₂`.
    pub mass_weighted_sup: f64,
    /// Its mass-independent bound, see [`mass_weighted_bound`].
    pub mass_weighted_bound: f64,
    /// Per-run failure; the other fields are zero when set.
    pub error: Option<String>,
}

fn sweep_one(setup: &SweepSetup, dirac_mass: f64, kg_mass: f64) -> Result<SweepRow> {
    let map = SolutionMap::new(setup.data.clone(), setup.pair, dirac_mass, kg_mass, setup.gamma, setup.times)?;
    let state = iterate(&map, &setup.norm, &setup.iteration)?;
    let fit = |s: Vec<(f64, f64)>| fit_decay(&s, setup.window).ok().map(|f| f.exponent);
    Ok(SweepRow {
        dirac_mass,
        kg_mass,
        converged: state.converged,
        iterations: state.iterations(),
        x_norm: x_norm(&state.phi, &state.u, &setup.norm, setup.gamma)?,
        ratio: state.final_ratio(),
        psi_decay: fit(sup_series(&state.phi)),
        v_decay: fit(sup_series(&state.u)),
        mass_weighted_sup: kg_mass * state.u.values().map(Field::l2_norm).fold(0.0, f64::max),
        mass_weighted_bound: mass_weighted_bound(setup.data, &state.phi, &setup.pair),
        error: None,
    })
}

/// Runs the iteration for every `(M, m)` in the product of the two lists,
/// in parallel; failures are recorded per row. Rows are ordered by `M`
/// then `m`.
pub fn mass_sweep(setup: &SweepSetup, dirac_masses: &[f64], kg_masses: &[f64]) -> Result<Vec<SweepRow>> {
    for &m in dirac_masses.iter().chain(kg_masses) {
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::InvalidParameter {
                name: "masses",
                reason: format!("mass {m} is outside [0, 1]"),
            });
        }
    }
    let pairs: Vec<(f64, f64)> = dirac_masses
        .iter()
        .flat_map(|&a| kg_masses.iter().map(move |&b| (a, b)))
        .collect();
    Ok(pairs
        .par_iter()
        .map(|&(a, b)| {
            sweep_one(setup, a, b).unwrap_or_else(|e| SweepRow {
                dirac_mass: a,
                kg_mass: b,
                converged: false,
                iterations: 0,
                x_norm: 0.0,
                ratio: None,
                psi_decay: None,
                v_decay: None,
                mass_weighted_sup: 0.0,
                mass_weighted_bound: 0.0,
                error: Some(e.to_string()),
            })
        })
        .collect())
}

/// The bound `√E_1(0, v) + ∫ ‖ψ^*Hψ‖₂ ds` on `m sup_t ‖v‖₂`, uniform over
/// `m ∈ [0, 1]` because `E_m` grows with `m`. The integral is taken along
/// `psi` by the trapezoid rule.
pub fn mass_weighted_bound(data: &InitialData, psi: &Trajectory<SpinorField>, pair: &InteractionPair) -> f64 {
    let source: Vec<f64> = psi
        .values()
        .map(|p| SpinorField::bilinear(p, &pair.h, p).real_part().l2_norm())
        .collect();
    let dt = psi.times().dt;
    let integral: f64 = source.windows(2).map(|w| 0.5 * dt * (w[0] + w[1])).sum();
    energy(&data.v0, &data.v1, 1.0).sqrt() + integral
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn energy_examples() {
        let grid = Grid::new(8, 8.0).unwrap();
        let zero = ScalarField::zeros(&grid);
        assert_eq!(energy(&zero, &zero, 0.7), 0.0);
        let one = ScalarField::from_fn(&grid, |_| 1.0);
        assert!((energy(&zero, &one, 0.0) - 16f64.powi(4)).abs() < 1e-8);
        let l = 8.0;
        let wave = ScalarField::from_fn(&grid, |x| (PI * x[0] / l).cos());
        let expected = (PI / l).powi(2) * (2.0 * l).powi(4) / 2.0;
        assert!((energy(&wave, &zero, 0.0) - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn fits_recover_power_laws() {
        let ts: Vec<f64> = (0..=16).map(|k| 2.0 + 0.25 * k as f64).collect();
        for p in [-0.5, -1.0, -1.25, -1.5, 0.0] {
            let s: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 3.0 * japanese(t).powf(p))).collect();
            let fit = fit_decay(&s, (2.0, 6.0)).unwrap();
            assert!((fit.exponent - p).abs() < 1e-10, "{p}");
            assert_eq!(fit.samples, 17);
        }
        let s: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 1.0)).collect();
        assert!(matches!(fit_decay(&s, (0.5, 6.0)), Err(Error::WindowStart(_))));
        assert!(matches!(fit_decay(&s[..5], (2.0, 6.0)), Err(Error::TooFewSamples(5))));
        let mut bad = s.clone();
        bad[3].1 = 0.0;
        assert!(matches!(fit_decay(&bad, (2.0, 6.0)), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn weighted_quadrature_is_exact_for_linear_integrands() {
        let s: Vec<f64> = (0..9).map(|k| 0.25 * k as f64).collect();
        let g: Vec<f64> = s.iter().map(|t| 1.0 + 2.0 * t).collect();
        let got = cumulative_weighted(&s, &g, -0.75);
        let t: f64 = 2.0;
        let exact = t.powf(0.25) / 0.25 + 2.0 * t.powf(1.25) / 1.25;
        assert!((got[8] - exact).abs() < 1e-12);
    }

    #[test]
    fn hermite_rule_is_exact_for_cubics() {
        let dt = 0.5;
        let series: Vec<(f64, f64)> = (0..5)
            .map(|k| {
                let t = k as f64 * dt;
                (t * t * t, 3.0 * t * t)
            })
            .collect();
        let got = cumulative_hermite(&series, dt);
        assert!((got[4] - 2f64.powi(4) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn empty_sweep_is_empty() {
        let grid = Grid::new(4, 4.0).unwrap();
        let gamma = GammaSet::standard();
        let data = InitialData::zeros(&grid);
        let setup = SweepSetup {
            data: &data,
            pair: InteractionPair::identity_gamma0(&gamma),
            gamma: &gamma,
            times: TimeGrid::new(0.0, 0.25, 4).unwrap(),
            norm: XNormConfig::default(),
            iteration: IterationConfig::default(),
            window: (2.0, 4.0),
        };
        assert!(mass_sweep(&setup, &[], &[0.5]).unwrap().is_empty());
        assert!(mass_sweep(&setup, &[1.5], &[0.5]).is_err());
    }
}
