//! The solution space norm, the solution map `T` and the Picard iteration
//! that converges to the coupled solution.
//!
//! `T(φ, u) = (φ̃, ũ)` solves the two linear problems
//! `-iγ^μ∂_μφ̃ + Mφ̃ = uFφ` and `-□ũ + m²ũ = φ^*Hφ` with the prescribed
//! data, so a fixed point of `T` solves the coupled system. Distances are
//! measured in
//! `‖(φ, u)‖_X = sup_{t, |I|≤K} ‖Γ̂^I φ‖₂ + sup_{t, |I|≤K} ⟨t⟩^{-w} ‖Γ^I u‖₂`
//! with the supremum over stored sample times.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Field, InitialData, ScalarField, SpinorField};
use crate::gamma::{GammaSet, InteractionPair, Mat4};
use crate::propagate::{DiracPropagatorPlan, KgPropagatorPlan, SourceProvider, SourceSample, BLOW_UP_GUARD};
use crate::trajectory::{Jet, TimeGrid, Trajectory};
use crate::vecfields::{visit_family, DEFAULT_K_MAX};

/// Largest `|Im(φ^*Hφ)|` accepted when building the Klein-Gordon source.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Parameters of the X-norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XNormConfig {
    /// Largest multi-index length `K`.
    pub k: usize,
    /// Exponent `w` of the time weight `⟨t⟩^{-w}` on the scalar part.
    pub weight_exponent: f64,
}

impl Default for XNormConfig {
    fn default() -> Self {
        XNormConfig {
            k: DEFAULT_K_MAX,
            weight_exponent: 0.25,
        }
    }
}

impl XNormConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k > DEFAULT_K_MAX {
            return Err(Error::MultiIndexTooLong {
                len: self.k,
                k_max: DEFAULT_K_MAX,
            });
        }
        if !(0.0..=1.0).contains(&self.weight_exponent) {
            return Err(Error::InvalidParameter {
                name: "weight_exponent",
                reason: format!("{} is outside [0, 1]", self.weight_exponent),
            });
        }
        Ok(())
    }
}

/// The two suprema making up the X-norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct XNormParts {
    pub spinor: f64,
    pub scalar: f64,
}

impl XNormParts {
    pub fn total(&self) -> f64 {
        self.spinor + self.scalar
    }
}

/// `⟨t⟩ = (1 + t²)^{1/2}`.
pub fn japanese(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

fn max_family_norm<F: Field>(jet: &Jet<F>, k: usize, modified: bool, gamma: &GammaSet) -> Result<f64> {
    let mut best = 0.0f64;
    visit_family(jet, k, modified, gamma, |_, g| best = best.max(g.l2_norm()))?;
    Ok(best)
}

fn check_pair(phi: &Trajectory<SpinorField>, u: &Trajectory<ScalarField>) -> Result<()> {
    if phi.len() != u.len() || phi.times() != u.times() {
        return Err(Error::InvalidParameter {
            name: "trajectories",
            reason: "spinor and scalar trajectories use different time grids".into(),
        });
    }
    Ok(())
}

/// Per-time `(max_I ‖Γ̂^I φ‖₂, ⟨t⟩^{-w} max_I ‖Γ^I u‖₂)` for jets produced by
/// `jets(k)`.
fn family_profile(
    len: usize,
    jets: impl Fn(usize) -> (Jet<SpinorField>, Jet<ScalarField>) + Sync,
    cfg: &XNormConfig,
    gamma: &GammaSet,
) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    (0..len)
        .into_par_iter()
        .map(|k| {
            let (phi, u) = jets(k);
            let weight = japanese(phi.time).powf(-cfg.weight_exponent);
            Ok((
                max_family_norm(&phi, cfg.k, true, gamma)?,
                weight * max_family_norm(&u, cfg.k, false, gamma)?,
            ))
        })
        .collect()
}

fn sup_parts(profile: &[(f64, f64)]) -> XNormParts {
    profile.iter().fold(XNormParts::default(), |acc, &(a, b)| XNormParts {
        spinor: acc.spinor.max(a),
        scalar: acc.scalar.max(b),
    })
}

/// Both suprema of the X-norm over the stored times.
pub fn x_norm_parts(
    phi: &Trajectory<SpinorField>,
    u: &Trajectory<ScalarField>,
    cfg: &XNormConfig,
    gamma: &GammaSet,
) -> Result<XNormParts> {
    check_pair(phi, u)?;
    let profile = family_profile(phi.len(), |k| (phi.jet(k).clone(), u.jet(k).clone()), cfg, gamma)?;
    Ok(sup_parts(&profile))
}

pub fn x_norm(
    phi: &Trajectory<SpinorField>,
    u: &Trajectory<ScalarField>,
    cfg: &XNormConfig,
    gamma: &GammaSet,
) -> Result<f64> {
    Ok(x_norm_parts(phi, u, cfg, gamma)?.total())
}

/// `‖(φ - φ', u - u')‖_X`.
pub fn x_distance(
    a: (&Trajectory<SpinorField>, &Trajectory<ScalarField>),
    b: (&Trajectory<SpinorField>, &Trajectory<ScalarField>),
    cfg: &XNormConfig,
    gamma: &GammaSet,
) -> Result<f64> {
    check_pair(a.0, a.1)?;
    check_pair(b.0, b.1)?;
    check_pair(a.0, b.1)?;
    let profile = family_profile(
        a.0.len(),
        |k| (a.0.jet(k).difference(b.0.jet(k)), a.1.jet(k).difference(b.1.jet(k))),
        cfg,
        gamma,
    )?;
    Ok(sup_parts(&profile).total())
}

/// Source `uFφ` of the Dirac equation, with rate `u_tFφ + uFφ_t`.
struct DiracNonlinearity<'a> {
    phi: &'a Trajectory<SpinorField>,
    u: &'a Trajectory<ScalarField>,
    f: Mat4,
}

impl SourceProvider<SpinorField> for DiracNonlinearity<'_> {
    fn sample(&self, node: usize, _time: f64) -> Option<SourceSample<SpinorField>> {
        let (phi, u) = (self.phi.jets().get(node)?, self.u.jets().get(node)?);
        let (p, pt) = (phi.derivs.first()?, phi.derivs.get(1)?);
        let (v, vt) = (u.derivs.first()?, u.derivs.get(1)?);
        let mut rate = pt.scalar_product_with(v, &self.f);
        rate.axpy(1.0, &p.scalar_product_with(vt, &self.f));
        Some(SourceSample {
            value: p.scalar_product_with(v, &self.f),
            rate,
        })
    }
}

/// Source `φ^*Hφ` of the Klein-Gordon equation, with rate `2Re(φ_t^*Hφ)`.
struct KgNonlinearity<'a> {
    phi: &'a Trajectory<SpinorField>,
    h: Mat4,
}

impl SourceProvider<ScalarField> for KgNonlinearity<'_> {
    fn sample(&self, node: usize, _time: f64) -> Option<SourceSample<ScalarField>> {
        let phi = self.phi.jets().get(node)?;
        let (p, pt) = (phi.derivs.first()?, phi.derivs.get(1)?);
        let value = SpinorField::bilinear(p, &self.h, p).real_part();
        let mut rate = SpinorField::bilinear(pt, &self.h, p).real_part();
        rate.scale(2.0);
        Some(SourceSample { value, rate })
    }
}

/// The map `T` for fixed data, interaction and masses.
#[derive(Clone, Debug)]
pub struct SolutionMap {
    data: InitialData,
    pair: InteractionPair,
    gamma: GammaSet,
    times: TimeGrid,
    dirac: DiracPropagatorPlan,
    kg: KgPropagatorPlan,
}

impl SolutionMap {
    pub fn new(
        data: InitialData,
        pair: InteractionPair,
        dirac_mass: f64,
        kg_mass: f64,
        gamma: &GammaSet,
        times: TimeGrid,
    ) -> Result<Self> {
        let grid = data.grid().clone();
        Ok(SolutionMap {
            dirac: DiracPropagatorPlan::new(&grid, dirac_mass, gamma)?,
            kg: KgPropagatorPlan::new(&grid, kg_mass)?,
            data,
            pair,
            gamma: gamma.clone(),
            times,
        })
    }

    pub fn data(&self) -> &InitialData {
        &self.data
    }

    pub fn pair(&self) -> &InteractionPair {
        &self.pair
    }

    pub fn gamma(&self) -> &GammaSet {
        &self.gamma
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn dirac_mass(&self) -> f64 {
        self.dirac.mass()
    }

    pub fn kg_mass(&self) -> f64 {
        self.kg.mass()
    }

    /// Free evolution of the data; the iteration seed.
    pub fn homogeneous(&self) -> Result<(Trajectory<SpinorField>, Trajectory<ScalarField>)> {
        let (phi, u) = rayon::join(
            || self.dirac.evolve(&self.data.psi0, None, &self.times),
            || self.kg.evolve(&self.data.v0, &self.data.v1, None, &self.times),
        );
        Ok((phi?, u?))
    }

    /// `T(φ, u)`. Inputs need jets with at least one time derivative.
    pub fn apply(
        &self,
        phi: &Trajectory<SpinorField>,
        u: &Trajectory<ScalarField>,
    ) -> Result<(Trajectory<SpinorField>, Trajectory<ScalarField>)> {
        check_pair(phi, u)?;
        if phi.times() != &self.times {
            return Err(Error::InvalidParameter {
                name: "trajectories",
                reason: "inputs are not sampled on the map's time grid".into(),
            });
        }
        let worst = phi
            .values()
            .map(|p| SpinorField::bilinear(p, &self.pair.h, p).max_imaginary())
            .fold(0.0, f64::max);
        if worst > HERMITIAN_TOLERANCE {
            return Err(Error::HermitianViolation(worst));
        }
        let dirac_source = DiracNonlinearity {
            phi,
            u,
            f: self.pair.f,
        };
        let kg_source = KgNonlinearity { phi, h: self.pair.h };
        let (phi_next, u_next) = rayon::join(
            || self.dirac.evolve(&self.data.psi0, Some(&dirac_source), &self.times),
            || self.kg.evolve(&self.data.v0, &self.data.v1, Some(&kg_source), &self.times),
        );
        Ok((phi_next?, u_next?))
    }
}

/// `T(φ, u)` for the given data, interaction and masses.
#[allow(clippy::too_many_arguments)]
pub fn apply_t(
    phi: &Trajectory<SpinorField>,
    u: &Trajectory<ScalarField>,
    data: &InitialData,
    pair: &InteractionPair,
    dirac_mass: f64,
    kg_mass: f64,
    gamma: &GammaSet,
    times: &TimeGrid,
) -> Result<(Trajectory<SpinorField>, Trajectory<ScalarField>)> {
    SolutionMap::new(data.clone(), *pair, dirac_mass, kg_mass, gamma, *times)?.apply(phi, u)
}

/// Stopping rules of [`iterate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    /// Stop once successive iterates are this close in the X-norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Optional bound on the X-norms of the seed and the first iterate.
    pub ball_cap: Option<f64>,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            tol: 1e-8,
            max_iter: 30,
            ball_cap: None,
        }
    }
}

/// One step of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub step: usize,
    /// X-distance between this iterate and the previous one.
    pub distance: f64,
    /// `d_k / d_{k-1}`, absent for the first step.
    pub ratio: Option<f64>,
    /// Wall time of the step in seconds.
    pub seconds: f64,
}

/// Result of [`iterate`]: the last iterate and the convergence history.
#[derive(Clone, Debug)]
pub struct IterationState {
    pub phi: Trajectory<SpinorField>,
    pub u: Trajectory<ScalarField>,
    pub records: Vec<IterationRecord>,
    /// X-norm of the seed.
    pub seed_norm: f64,
    /// X-norm of the first iterate, computed only under a ball cap.
    pub first_norm: Option<f64>,
    pub converged: bool,
}

impl IterationState {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.distance).collect()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.ratio).collect()
    }

    /// The last recorded contraction ratio.
    pub fn final_ratio(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.ratio)
    }
}

fn check_blow_up(phi: &Trajectory<SpinorField>, u: &Trajectory<ScalarField>) -> Result<()> {
    for (p, v) in phi.jets().iter().zip(u.jets()) {
        let norm = p.value().l2_norm() + v.value().l2_norm();
        if !norm.is_finite() || norm > BLOW_UP_GUARD {
            return Err(Error::BlowUp { time: p.time, norm });
        }
    }
    Ok(())
}

fn check_ball(step: usize, norm: f64, cap: Option<f64>) -> Result<()> {
    match cap {
        Some(cap) if norm > cap => Err(Error::LeftBall { step, norm, cap }),
        _ => Ok(()),
    }
}

/// Picard iteration `(φ, u) ← T(φ, u)` from the free evolution of the data,
/// until successive iterates are within `tol` in the X-norm or `max_iter`
/// steps are taken. Two consecutive increases of the distance are reported
/// as divergence.
pub fn iterate(map: &SolutionMap, cfg: &XNormConfig, it: &IterationConfig) -> Result<IterationState> {
    cfg.validate()?;
    let gamma = map.gamma();
    let (mut phi, mut u) = map.homogeneous()?;
    let seed_norm = x_norm(&phi, &u, cfg, gamma)?;
    check_ball(0, seed_norm, it.ball_cap)?;
    let mut first_norm = None;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut rises = 0;
    let mut converged = false;
    for step in 1..=it.max_iter {
        let clock = Instant::now();
        let (phi_next, u_next) = map.apply(&phi, &u)?;
        check_blow_up(&phi_next, &u_next)?;
        let distance = x_distance((&phi_next, &u_next), (&phi, &u), cfg, gamma)?;
        if step == 1 && it.ball_cap.is_some() {
            let norm = x_norm(&phi_next, &u_next, cfg, gamma)?;
            check_ball(1, norm, it.ball_cap)?;
            first_norm = Some(norm);
        }
        let previous = records.last().map(|r| r.distance);
        let ratio = previous.map(|p| if p > 0.0 { distance / p } else { 0.0 });
        records.push(IterationRecord {
            step,
            distance,
            ratio,
            seconds: clock.elapsed().as_secs_f64(),
        });
        phi = phi_next;
        u = u_next;
        if distance <= it.tol {
            converged = true;
            break;
        }
        if let Some(p) = previous {
            if distance > p {
                rises += 1;
                if rises >= 2 {
                    return Err(Error::Divergence {
                        step,
                        previous: p,
                        current: distance,
                    });
                }
            } else {
                rises = 0;
            }
        }
    }
    Ok(IterationState {
        phi,
        u,
        records,
        seed_norm,
        first_norm,
        converged,
    })
}

/// First contraction ratio `d₂/d₁` of the iteration for one data set.
pub fn first_contraction_ratio(map: &SolutionMap, cfg: &XNormConfig) -> Result<f64> {
    let gamma = map.gamma();
    let seed = map.homogeneous()?;
    let one = map.apply(&seed.0, &seed.1)?;
    let d1 = x_distance((&one.0, &one.1), (&seed.0, &seed.1), cfg, gamma)?;
    let two = map.apply(&one.0, &one.1)?;
    let d2 = x_distance((&two.0, &two.1), (&one.0, &one.1), cfg, gamma)?;
    Ok(if d1 > 0.0 { d2 / d1 } else { 0.0 })
}

/// Outcome of [`calibrate_epsilon`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Largest amplitude found whose first contraction ratio is at most the target.
    pub epsilon: f64,
    pub ratio: f64,
    /// Every `(ε, ratio)` evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Bisects (geometrically) on the data amplitude until the first contraction
/// ratio `d₂/d₁` brackets `target` within relative width `rel_tol`, starting
/// from `start`. `build` returns the solution map for an amplitude.
pub fn calibrate_epsilon(
    build: impl Fn(f64) -> Result<SolutionMap>,
    cfg: &XNormConfig,
    start: f64,
    target: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<Calibration> {
    if !(start > 0.0) || !(target > 0.0 && target < 1.0) || !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "calibration",
            reason: format!("need start > 0, 0 < target < 1, rel_tol > 0 (got {start}, {target}, {rel_tol})"),
        });
    }
    let mut evaluations = Vec::new();
    let mut lo: Option<(f64, f64)> = None;
    let mut hi: Option<f64> = None;
    let mut eps = start;
    for _ in 0..max_evals {
        let ratio = first_contraction_ratio(&build(eps)?, cfg)?;
        evaluations.push((eps, ratio));
        if ratio <= target {
            lo = Some((eps, ratio));
        } else {
            hi = Some(eps);
        }
        eps = match (lo, hi) {
            (Some((l, _)), Some(h)) => {
                if h / l <= 1.0 + rel_tol {
                    break;
                }
                (l * h).sqrt()
            }
            // The ratio grows roughly linearly with ε; aim slightly past the
            // target so the next evaluation brackets it.
            (Some(_), None) => eps * (1.1 * target / ratio.max(1e-300)).clamp(1.2, 16.0),
            (None, _) => eps * (0.9 * target / ratio).clamp(1.0 / 16.0, 1.0 / 1.2),
        };
    }
    let (epsilon, ratio) = lo.ok_or_else(|| Error::InvalidParameter {
        name: "calibration",
        reason: format!("no amplitude with contraction ratio <= {target} found in {max_evals} evaluations"),
    })?;
    Ok(Calibration {
        epsilon,
        ratio,
        evaluations,
    })
}

/// Time derivatives of uniformly sampled values by fourth-order finite
/// differences (central inside, one-sided at the two ends).
fn time_derivatives<F: Field>(values: &[&F], dt: f64) -> Result<Vec<F>> {
    let n = values.len();
    if n < 5 {
        return Err(Error::InvalidParameter {
            name: "trajectory",
            reason: format!("fourth-order differences need 5 samples, got {n}"),
        });
    }
    let combine = |idx: [usize; 5], c: [f64; 5]| {
        let mut out = F::zeros(values[0].grid());
        for (i, w) in idx.iter().zip(c) {
            if w != 0.0 {
                out.axpy(w / (12.0 * dt), values[*i]);
            }
        }
        out
    };
    Ok((0..n)
        .map(|k| match k {
            0 => combine([0, 1, 2, 3, 4], [-25.0, 48.0, -36.0, 16.0, -3.0]),
            1 => combine([0, 1, 2, 3, 4], [-3.0, -10.0, 18.0, -6.0, 1.0]),
            k if k == n - 2 => combine([n - 5, n - 4, n - 3, n - 2, n - 1], [-1.0, 6.0, -18.0, 10.0, 3.0]),
            k if k == n - 1 => combine([n - 5, n - 4, n - 3, n - 2, n - 1], [3.0, -16.0, 36.0, -48.0, 25.0]),
            k => combine([k - 2, k - 1, k, k + 1, k + 2], [1.0, -8.0, 0.0, 8.0, -1.0]),
        })
        .collect())
}

/// Largest L² residuals over the stored times of
/// `-iγ^μ∂_μψ + Mψ - vFψ` and `∂_t²v - Δv + m²v - ψ^*Hψ`, with `∂_tψ` and
/// `∂_t(∂_t v)` from fourth-order differences of the stored `ψ` and `v_t`.
pub fn fixed_point_residual(
    psi: &Trajectory<SpinorField>,
    v: &Trajectory<ScalarField>,
    pair: &InteractionPair,
    dirac_mass: f64,
    kg_mass: f64,
    gamma: &GammaSet,
) -> Result<(f64, f64)> {
    check_pair(psi, v)?;
    let dt = psi.times().dt;
    let psi_vals: Vec<&SpinorField> = psi.values().collect();
    let psi_t = time_derivatives(&psi_vals, dt)?;
    let vt_vals = v
        .jets()
        .iter()
        .map(|j| {
            j.derivs.get(1).ok_or(Error::JetOrder {
                required: 1,
                available: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let v_tt = time_derivatives(&vt_vals, dt)?;

    let minus_i = num_complex::Complex64::new(0.0, -1.0);
    let g0 = gamma.gamma(0).scale(minus_i);
    let ga: Vec<Mat4> = (1..=4).map(|a| gamma.gamma(a).scale(minus_i)).collect();
    let mass = gamma.gamma(0).scale_re(0.0) + Mat4::identity().scale_re(dirac_mass);
    let mut worst = (0.0f64, 0.0f64);
    for k in 0..psi.len() {
        let p = psi.snapshot(k);
        let u = v.snapshot(k);
        let spec = p.forward();
        let mut r = psi_t[k].apply_matrix(&g0);
        for (a, m) in ga.iter().enumerate() {
            r.axpy(1.0, &SpinorField::derivative_from(&spec, a + 1).apply_matrix(m));
        }
        r.axpy(1.0, &p.apply_matrix(&mass));
        r.axpy(-1.0, &p.scalar_product_with(u, &pair.f));
        worst.0 = worst.0.max(r.l2_norm());

        let mut s = v_tt[k].clone();
        s.axpy(-1.0, &u.laplacian());
        s.axpy(kg_mass * kg_mass, u);
        s.axpy(-1.0, &SpinorField::bilinear(p, &pair.h, p).real_part());
        worst.1 = worst.1.max(s.l2_norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::gaussian_data;
    use crate::grid::Grid;

    fn constant_trajectory<F: Field>(f: F, times: TimeGrid, order: usize) -> Trajectory<F> {
        let zero = F::zeros(f.grid());
        let jets = times
            .times()
            .into_iter()
            .map(|t| {
                let mut d = vec![f.clone()];
                d.extend((0..order).map(|_| zero.clone()));
                Jet::new(t, d)
            })
            .collect();
        Trajectory::new(times, jets).unwrap()
    }

    #[test]
    fn x_norm_of_simple_pairs() {
        let grid = Grid::new(8, 4.0).unwrap();
        let gamma = GammaSet::standard();
        let times = TimeGrid::new(0.0, 0.5, 4).unwrap();
        let k0 = XNormConfig {
            k: 0,
            weight_exponent: 0.25,
        };
        let zero_phi = constant_trajectory(SpinorField::zeros(&grid), times, 2);
        let zero_u = constant_trajectory(ScalarField::zeros(&grid), times, 2);
        assert_eq!(x_norm(&zero_phi, &zero_u, &XNormConfig::default(), &gamma).unwrap(), 0.0);

        let phi = constant_trajectory(SpinorField::from_fn(&grid, |_| [crate::C64::new(0.5, 0.0); 4]), times, 0);
        let c = phi.snapshot(0).l2_norm();
        assert!((x_norm(&phi, &zero_u, &k0, &gamma).unwrap() - c).abs() < 1e-12);

        let profile = ScalarField::from_fn(&grid, |x| (-x[0] * x[0]).exp());
        let jets = times
            .times()
            .into_iter()
            .map(|t| Jet::new(t, vec![profile.scaled(japanese(t).powf(0.25))]))
            .collect();
        let u = Trajectory::new(times, jets).unwrap();
        let phi0 = constant_trajectory(SpinorField::zeros(&grid), times, 0);
        let got = x_norm(&phi0, &u, &k0, &gamma).unwrap();
        assert!((got - profile.l2_norm()).abs() < 1e-12 * profile.l2_norm());
    }

    #[test]
    fn config_validation() {
        assert!(XNormConfig { k: 3, weight_exponent: 0.25 }.validate().is_err());
        assert!(XNormConfig { k: 1, weight_exponent: 1.5 }.validate().is_err());
    }

    #[test]
    fn zero_data_converge_in_one_step() {
        let grid = Grid::new(8, 4.0).unwrap();
        let gamma = GammaSet::standard();
        let times = TimeGrid::new(0.0, 0.25, 4).unwrap();
        let map = SolutionMap::new(
            InitialData::zeros(&grid),
            InteractionPair::identity_gamma0(&gamma),
            0.5,
            0.5,
            &gamma,
            times,
        )
        .unwrap();
        let state = iterate(&map, &XNormConfig::default(), &IterationConfig::default()).unwrap();
        assert!(state.converged);
        assert_eq!(state.iterations(), 1);
        assert_eq!(state.distances(), vec![0.0]);
    }

    #[test]
    fn map_pins_the_data_and_rejects_non_hermitian_h() {
        let grid = Grid::new(8, 4.0).unwrap();
        let gamma = GammaSet::standard();
        let times = TimeGrid::new(0.0, 0.25, 4).unwrap();
        let data = gaussian_data(0.1, 0.8, &grid, 3).unwrap();
        let map = SolutionMap::new(data.clone(), InteractionPair::identity_gamma0(&gamma), 0.3, 0.7, &gamma, times)
            .unwrap();
        let seed = map.homogeneous().unwrap();
        let (phi, u) = map.apply(&seed.0, &seed.1).unwrap();
        assert_eq!(phi.snapshot(0), &data.psi0);
        assert_eq!(u.snapshot(0), &data.v0);
        assert_eq!(&u.jet(0).derivs[1], &data.v1);

        let bad = SolutionMap::new(data, InteractionPair::new(Mat4::identity(), *gamma.gamma(1)), 0.3, 0.7, &gamma, times)
            .unwrap();
        assert!(matches!(bad.apply(&seed.0, &seed.1), Err(Error::HermitianViolation(_))));
    }

    #[test]
    fn finite_differences_are_fourth_order_exact() {
        let grid = Grid::new(4, 1.0).unwrap();
        let dt = 0.1;
        let one = ScalarField::from_fn(&grid, |_| 1.0);
        let vals: Vec<ScalarField> = (0..7).map(|k| one.scaled((k as f64 * dt).powi(4))).collect();
        let refs: Vec<&ScalarField> = vals.iter().collect();
        let d = time_derivatives(&refs, dt).unwrap();
        for (k, f) in d.iter().enumerate() {
            let t = k as f64 * dt;
            assert!((f.values()[0] - 4.0 * t.powi(3)).abs() < 1e-10, "{k}");
        }
    }
}
