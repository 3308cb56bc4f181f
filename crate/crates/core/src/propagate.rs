//! Exact per-mode linear flows for the Klein-Gordon and Dirac equations with
//! Duhamel source terms, and an independent method-of-lines integrator for
//! the coupled nonlinear system.
//!
//! Each Fourier mode evolves by its closed-form propagator. Over one output
//! step the source is replaced by its cubic Hermite interpolant, built from
//! the sampled source and its time derivative at both ends, and the kernel
//! is integrated against that interpolant exactly. The local error is
//! `O(Δt⁵)` for smooth sources and the scheme is exact for cubic-in-time
//! sources.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fields::{Field, FieldValue, InitialData, ScalarField, SpectralScalar, SpectralSpinor, SpinorField};
use crate::gamma::{GammaSet, InteractionPair, Mat4, Spinor};
use crate::grid::Grid;
use crate::trajectory::{Jet, TimeGrid, Trajectory};

/// Largest field norm tolerated by [`coupled_direct_solve`].
pub const BLOW_UP_GUARD: f64 = 1e6;

/// A source value and its time derivative at one node.
#[derive(Clone, Debug)]
pub struct SourceSample<F> {
    pub value: F,
    pub rate: F,
}

/// Supplies the source at the nodes of an output time grid.
pub trait SourceProvider<F>: Sync {
    /// `None` when the provider has no data for `node`.
    fn sample(&self, node: usize, time: f64) -> Option<SourceSample<F>>;
}

/// A source given as a function of time.
pub trait TimeSource<F>: Sync {
    fn value(&self, t: f64) -> F;
    fn rate(&self, t: f64) -> F;
}

/// Adapts a [`TimeSource`] to the node-based [`SourceProvider`] interface.
pub struct Analytic<'a, F>(pub &'a dyn TimeSource<F>);

impl<F> SourceProvider<F> for Analytic<'_, F> {
    fn sample(&self, _node: usize, time: f64) -> Option<SourceSample<F>> {
        Some(SourceSample {
            value: self.0.value(time),
            rate: self.0.rate(time),
        })
    }
}

/// Precomputed source samples, one per node.
#[derive(Clone, Debug)]
pub struct SampledSource<F> {
    samples: Vec<SourceSample<F>>,
}

impl<F> SampledSource<F> {
    pub fn new(samples: Vec<SourceSample<F>>) -> Self {
        SampledSource { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SourceSample<F>] {
        &self.samples
    }
}

impl<F: Field> SourceProvider<F> for SampledSource<F> {
    fn sample(&self, node: usize, _time: f64) -> Option<SourceSample<F>> {
        self.samples.get(node).cloned()
    }
}

/// `Σ_j profile_j(x) (p_j cos(ω_j t) + q_j sin(ω_j t))`.
#[derive(Clone, Debug)]
pub struct SeparableSource<F> {
    terms: Vec<SeparableTerm<F>>,
}

#[derive(Clone, Debug)]
struct SeparableTerm<F> {
    profile: F,
    frequency: f64,
    cos_coef: f64,
    sin_coef: f64,
}

impl<F: Field> SeparableSource<F> {
    pub fn new() -> Self {
        SeparableSource { terms: Vec::new() }
    }

    /// Adds `profile(x) (p cos(ωt) + q sin(ωt))`.
    pub fn with_term(mut self, profile: F, frequency: f64, p: f64, q: f64) -> Self {
        self.terms.push(SeparableTerm {
            profile,
            frequency,
            cos_coef: p,
            sin_coef: q,
        });
        self
    }

    fn combine(&self, coef: impl Fn(&SeparableTerm<F>) -> f64) -> F {
        let mut out = F::zeros(self.terms[0].profile.grid());
        for term in &self.terms {
            out.axpy(coef(term), &term.profile);
        }
        out
    }
}

impl<F: Field> Default for SeparableSource<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Field> TimeSource<F> for SeparableSource<F> {
    fn value(&self, t: f64) -> F {
        self.combine(|s| {
            let (sn, cs) = (s.frequency * t).sin_cos();
            s.cos_coef * cs + s.sin_coef * sn
        })
    }

    fn rate(&self, t: f64) -> F {
        self.combine(|s| {
            let (sn, cs) = (s.frequency * t).sin_cos();
            s.frequency * (s.sin_coef * cs - s.cos_coef * sn)
        })
    }
}

/// `sin(ωτ)/ω`, with the `ω → 0` limit handled by a Taylor expansion.
pub fn sin_over(omega: f64, tau: f64) -> f64 {
    let x = omega * tau;
    if x.abs() < 1e-4 {
        tau * (1.0 - x * x / 6.0 + x * x * x * x / 120.0)
    } else {
        x.sin() / omega
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Cubic Hermite basis on `[0, 1]` for (value₀, slope₀, value₁, slope₁),
/// slopes already multiplied by the step.
fn hermite_basis(th: f64) -> [f64; 4] {
    let th2 = th * th;
    let th3 = th2 * th;
    [
        2.0 * th3 - 3.0 * th2 + 1.0,
        th3 - 2.0 * th2 + th,
        -2.0 * th3 + 3.0 * th2,
        th3 - th2,
    ]
}

/// Propagator coefficients of one step for one radial frequency.
#[derive(Clone, Copy, Debug)]
struct StepWeights {
    omega_sq: f64,
    cos: f64,
    sinc: f64,
    /// `∫_0^τ cos(ω(τ-s)) B_j(s) ds` for the Hermite basis with the value/rate
    /// samples `(S₀, S'₀, S₁, S'₁)`.
    c: [f64; 4],
    /// `∫_0^τ sin(ω(τ-s))/ω B_j(s) ds`.
    s: [f64; 4],
}

fn step_weights(omega_sq: f64, tau: f64, rule: &(Vec<f64>, Vec<f64>)) -> StepWeights {
    let omega = omega_sq.sqrt();
    let mut c = [0.0; 4];
    let mut s = [0.0; 4];
    for (&th, &w) in rule.0.iter().zip(&rule.1) {
        let r = tau * (1.0 - th);
        let kc = (omega * r).cos();
        let ks = sin_over(omega, r);
        let mut b = hermite_basis(th);
        b[1] *= tau;
        b[3] *= tau;
        for j in 0..4 {
            c[j] += tau * w * kc * b[j];
            s[j] += tau * w * ks * b[j];
        }
    }
    StepWeights {
        omega_sq,
        cos: (omega * tau).cos(),
        sinc: sin_over(omega, tau),
        c,
        s,
    }
}

/// Step weights indexed by radial key.
fn weight_table(grid: &Grid, mass: f64, tau: f64) -> Vec<StepWeights> {
    let rule = gauss_legendre(16);
    (0..=grid.max_radial_key())
        .map(|key| step_weights(grid.key_to_kappa_sq(key) + mass * mass, tau, &rule))
        .collect()
}

fn radial_keys(grid: &Grid) -> Vec<u32> {
    (0..grid.len()).map(|i| grid.radial_key(i) as u32).collect()
}

fn check_mass(name: &'static str, mass: f64) -> Result<()> {
    if (0.0..=1.0).contains(&mass) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("mass must lie in [0, 1], got {mass}"),
        })
    }
}

fn fetch<F: Field>(
    source: Option<&dyn SourceProvider<F>>,
    grid: &Grid,
    node: usize,
    time: f64,
) -> Result<Option<SourceSample<F>>> {
    match source {
        None => Ok(None),
        Some(p) => {
            let s = p.sample(node, time).ok_or(Error::MissingSourceNode(node))?;
            if s.value.grid() != grid || s.rate.grid() != grid {
                return Err(Error::GridMismatch);
            }
            Ok(Some(s))
        }
    }
}

/// Exact Klein-Gordon flow plan for one grid and mass.
#[derive(Clone, Debug)]
pub struct KgPropagatorPlan {
    grid: Grid,
    mass: f64,
    keys: Vec<u32>,
}

impl KgPropagatorPlan {
    pub fn new(grid: &Grid, mass: f64) -> Result<Self> {
        check_mass("m", mass)?;
        Ok(KgPropagatorPlan {
            grid: grid.clone(),
            mass,
            keys: radial_keys(grid),
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Solves `u_tt - Δu + m²u = G` with `(u, u_t)(t₀) = (v₀, v₁)`. Jets carry
    /// `(u, u_t, u_tt)`.
    pub fn evolve(
        &self,
        v0: &ScalarField,
        v1: &ScalarField,
        source: Option<&dyn SourceProvider<ScalarField>>,
        times: &TimeGrid,
    ) -> Result<Trajectory<ScalarField>> {
        let grid = &self.grid;
        if v0.grid() != grid || v1.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let table = weight_table(grid, self.mass, times.dt);
        let mut u = v0.forward().coefficients().to_vec();
        let mut ut = v1.forward().coefficients().to_vec();

        let spectral_sample = |s: SourceSample<ScalarField>| {
            (
                s.value.forward().coefficients().to_vec(),
                s.rate.forward().coefficients().to_vec(),
            )
        };
        let mut current = fetch(source, grid, 0, times.t0)?.map(spectral_sample);

        let mut jets = Vec::with_capacity(times.len());
        let mut first = self.jet(times.t0, v0.clone(), &u, &ut, current.as_ref().map(|c| &c.0));
        first.derivs[1] = v1.clone();
        jets.push(first);

        for k in 1..times.len() {
            let t = times.time(k);
            let next = fetch(source, grid, k, t)?.map(spectral_sample);
            for i in 0..u.len() {
                let w = &table[self.keys[i] as usize];
                let (u0, v0) = (u[i], ut[i]);
                let mut un = u0 * w.cos + v0 * w.sinc;
                let mut vn = v0 * w.cos - u0 * (w.omega_sq * w.sinc);
                if let (Some(a), Some(b)) = (&current, &next) {
                    let g = [a.0[i], a.1[i], b.0[i], b.1[i]];
                    for j in 0..4 {
                        un += g[j] * w.s[j];
                        vn += g[j] * w.c[j];
                    }
                }
                u[i] = un;
                ut[i] = vn;
            }
            let value = to_real(grid, &u);
            jets.push(self.jet(t, value, &u, &ut, next.as_ref().map(|c| &c.0)));
            current = next;
        }
        Trajectory::new(*times, jets)
    }

    fn jet(
        &self,
        t: f64,
        value: ScalarField,
        u: &[C64],
        ut: &[C64],
        g: Option<&Vec<C64>>,
    ) -> Jet<ScalarField> {
        let grid = &self.grid;
        let m2 = self.mass * self.mass;
        let utt: Vec<C64> = u
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let k2 = grid.key_to_kappa_sq(self.keys[i] as usize);
                let src = g.map_or(C64::new(0.0, 0.0), |g| g[i]);
                src - c * (k2 + m2)
            })
            .collect();
        Jet::new(t, vec![value, to_real(grid, ut), to_real(grid, &utt)])
    }
}

fn to_real(grid: &Grid, coeffs: &[C64]) -> ScalarField {
    SpectralScalar::from_coefficients(grid, coeffs.to_vec())
        .expect("coefficient count matches grid")
        .inverse()
}

/// Exact Dirac flow plan for one grid, mass and Clifford representation.
#[derive(Clone, Debug)]
pub struct DiracPropagatorPlan {
    grid: Grid,
    mass: f64,
    gamma: GammaSet,
    alphas: [Mat4; 4],
    keys: Vec<u32>,
}

impl DiracPropagatorPlan {
    pub fn new(grid: &Grid, mass: f64, gamma: &GammaSet) -> Result<Self> {
        check_mass("M", mass)?;
        Ok(DiracPropagatorPlan {
            grid: grid.clone(),
            mass,
            gamma: gamma.clone(),
            alphas: [1, 2, 3, 4].map(|a| gamma.alpha(a)),
            keys: radial_keys(grid),
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `𝖧(κ) v` for the mode with index `i`.
    #[inline]
    fn symbol_apply(&self, i: usize, v: &Spinor) -> Spinor {
        let kappa = self.grid.wavevector(i);
        let g0 = self.gamma.gamma(0).apply(v);
        let mut out = g0.map(|z| z * self.mass);
        for a in 0..4 {
            if kappa[a] != 0.0 {
                let w = self.alphas[a].apply(v);
                for c in 0..4 {
                    out[c] += w[c] * kappa[a];
                }
            }
        }
        out
    }

    /// Solves `-iγ^μ∂_μψ + Mψ = G`, i.e. `∂_tψ = -i𝖧ψ + iγ⁰G` per mode, with
    /// `ψ(t₀) = ψ₀`. Jets carry `(ψ, ψ_t, ψ_tt)`.
    pub fn evolve(
        &self,
        psi0: &SpinorField,
        source: Option<&dyn SourceProvider<SpinorField>>,
        times: &TimeGrid,
    ) -> Result<Trajectory<SpinorField>> {
        let grid = &self.grid;
        if psi0.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let table = weight_table(grid, self.mass, times.dt);
        let ig0 = self.gamma.i_gamma0();
        let mut psi = psi0.forward().coefficients().to_vec();

        // Sources enter as Ŝ = iγ⁰Ĝ.
        let spectral_sample = |s: SourceSample<SpinorField>| {
            let tr = |f: &SpinorField| -> Vec<Spinor> {
                f.forward().coefficients().iter().map(|v| ig0.apply(v)).collect()
            };
            (tr(&s.value), tr(&s.rate))
        };
        let mut current = fetch(source, grid, 0, times.t0)?.map(spectral_sample);

        let mut jets = Vec::with_capacity(times.len());
        jets.push(self.jet(times.t0, psi0.clone(), &psi, current.as_ref()));

        let minus_i = C64::new(0.0, -1.0);
        for k in 1..times.len() {
            let t = times.time(k);
            let next = fetch(source, grid, k, t)?.map(spectral_sample);
            for i in 0..psi.len() {
                let w = &table[self.keys[i] as usize];
                let p = psi[i];
                let mut cos_part = p.scaled(w.cos);
                let mut sin_part = p.scaled(w.sinc);
                if let (Some(a), Some(b)) = (&current, &next) {
                    let g = [&a.0[i], &a.1[i], &b.0[i], &b.1[i]];
                    for j in 0..4 {
                        cos_part.add_scaled(w.c[j], g[j]);
                        sin_part.add_scaled(w.s[j], g[j]);
                    }
                }
                let h = self.symbol_apply(i, &sin_part);
                for c in 0..4 {
                    cos_part[c] += minus_i * h[c];
                }
                psi[i] = cos_part;
            }
            let value = self.to_field(&psi);
            jets.push(self.jet(t, value, &psi, next.as_ref()));
            current = next;
        }
        Trajectory::new(*times, jets)
    }

    fn to_field(&self, coeffs: &[Spinor]) -> SpinorField {
        SpectralSpinor::from_coefficients(&self.grid, coeffs.to_vec())
            .expect("coefficient count matches grid")
            .inverse()
    }

    fn jet(
        &self,
        t: f64,
        value: SpinorField,
        psi: &[Spinor],
        src: Option<&(Vec<Spinor>, Vec<Spinor>)>,
    ) -> Jet<SpinorField> {
        let minus_i = C64::new(0.0, -1.0);
        let flow = |i: usize, v: &Spinor| self.symbol_apply(i, v).map(|z| z * minus_i);
        let psi_t: Vec<Spinor> = (0..psi.len())
            .map(|i| {
                let mut d = flow(i, &psi[i]);
                if let Some(s) = src {
                    d.add_scaled(1.0, &s.0[i]);
                }
                d
            })
            .collect();
        let psi_tt: Vec<Spinor> = (0..psi.len())
            .map(|i| {
                let mut d = flow(i, &psi_t[i]);
                if let Some(s) = src {
                    d.add_scaled(1.0, &s.1[i]);
                }
                d
            })
            .collect();
        Jet::new(t, vec![value, self.to_field(&psi_t), self.to_field(&psi_tt)])
    }
}

/// Sourced Klein-Gordon flow; see [`KgPropagatorPlan::evolve`].
pub fn kg_evolve(
    v0: &ScalarField,
    v1: &ScalarField,
    source: Option<&dyn SourceProvider<ScalarField>>,
    mass: f64,
    times: &TimeGrid,
) -> Result<Trajectory<ScalarField>> {
    KgPropagatorPlan::new(v0.grid(), mass)?.evolve(v0, v1, source, times)
}

/// Sourced Dirac flow; see [`DiracPropagatorPlan::evolve`].
pub fn dirac_evolve(
    psi0: &SpinorField,
    source: Option<&dyn SourceProvider<SpinorField>>,
    mass: f64,
    gamma: &GammaSet,
    times: &TimeGrid,
) -> Result<Trajectory<SpinorField>> {
    DiracPropagatorPlan::new(psi0.grid(), mass, gamma)?.evolve(psi0, source, times)
}

/// Parameters of the coupled system solved by the method-of-lines oracle.
#[derive(Clone, Copy)]
pub struct CoupledProblem<'a> {
    pub gamma: &'a GammaSet,
    pub pair: InteractionPair,
    pub dirac_mass: f64,
    pub kg_mass: f64,
    /// Extra source added to the Dirac right-hand side `vFψ`.
    pub dirac_source: Option<&'a dyn TimeSource<SpinorField>>,
    /// Extra source added to the Klein-Gordon right-hand side `ψ^*Hψ`.
    pub kg_source: Option<&'a dyn TimeSource<ScalarField>>,
}

impl<'a> CoupledProblem<'a> {
    pub fn new(gamma: &'a GammaSet, pair: InteractionPair, dirac_mass: f64, kg_mass: f64) -> Self {
        CoupledProblem {
            gamma,
            pair,
            dirac_mass,
            kg_mass,
            dirac_source: None,
            kg_source: None,
        }
    }
}

/// Oracle output: `ψ` jets `(ψ, ψ_t)` and `v` jets `(v, v_t, v_tt)`.
#[derive(Clone, Debug)]
pub struct CoupledTrajectory {
    pub psi: Trajectory<SpinorField>,
    pub v: Trajectory<ScalarField>,
}

#[derive(Clone)]
struct OracleState {
    psi: SpinorField,
    v: ScalarField,
    w: ScalarField,
}

struct OracleRhs<'a> {
    problem: CoupledProblem<'a>,
    neg_alpha: [Mat4; 4],
    mass_term: Mat4,
    ig0: Mat4,
    ig0f: Mat4,
}

impl<'a> OracleRhs<'a> {
    fn new(problem: CoupledProblem<'a>) -> Self {
        let g = problem.gamma;
        let i = C64::new(0.0, 1.0);
        OracleRhs {
            neg_alpha: [1, 2, 3, 4].map(|a| -g.alpha(a)),
            mass_term: g.gamma(0).scale(-i * problem.dirac_mass),
            ig0: g.i_gamma0(),
            ig0f: g.i_gamma0() * problem.pair.f,
            problem,
        }
    }

    /// `(ψ_t, v_t, w_t)` with spectral spatial derivatives.
    fn eval(&self, t: f64, s: &OracleState) -> (SpinorField, ScalarField, ScalarField) {
        let grid = s.psi.grid();
        let spec = s.psi.forward();
        let kappa = grid.derivative_symbol();
        let coeffs: Vec<Spinor> = spec
            .coefficients()
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let mi = grid.multi_index(idx);
                let mut out = Spinor::ZERO;
                for a in 0..4 {
                    let k = kappa[mi[a]];
                    if k != 0.0 {
                        let d = c.map(|z| z * C64::new(0.0, k));
                        out.add_scaled(1.0, &self.neg_alpha[a].apply(&d));
                    }
                }
                out
            })
            .collect();
        let mut psi_t = SpectralSpinor::from_coefficients(grid, coeffs)
            .expect("coefficient count matches grid")
            .inverse();
        let pair = &self.problem.pair;
        for ((d, p), v) in psi_t
            .values_mut()
            .iter_mut()
            .zip(s.psi.values())
            .zip(s.v.values())
        {
            d.add_scaled(1.0, &self.mass_term.apply(p));
            d.add_scaled(*v, &self.ig0f.apply(p));
        }
        if let Some(src) = self.problem.dirac_source {
            let g = src.value(t);
            for (d, gv) in psi_t.values_mut().iter_mut().zip(g.values()) {
                d.add_scaled(1.0, &self.ig0.apply(gv));
            }
        }

        let m2 = self.problem.kg_mass * self.problem.kg_mass;
        let mut w_t = s.v.laplacian();
        for ((d, v), p) in w_t.values_mut().iter_mut().zip(s.v.values()).zip(s.psi.values()) {
            *d += -m2 * v + pair.h.sandwich(p, p).re;
        }
        if let Some(src) = self.problem.kg_source {
            w_t.axpy(1.0, &src.value(t));
        }
        (psi_t, s.w.clone(), w_t)
    }
}

fn rk4_step(rhs: &OracleRhs, t: f64, dt: f64, s: &OracleState) -> OracleState {
    let advance = |base: &OracleState, k: &(SpinorField, ScalarField, ScalarField), c: f64| {
        let mut out = base.clone();
        out.psi.axpy(c, &k.0);
        out.v.axpy(c, &k.1);
        out.w.axpy(c, &k.2);
        out
    };
    let k1 = rhs.eval(t, s);
    let k2 = rhs.eval(t + dt / 2.0, &advance(s, &k1, dt / 2.0));
    let k3 = rhs.eval(t + dt / 2.0, &advance(s, &k2, dt / 2.0));
    let k4 = rhs.eval(t + dt, &advance(s, &k3, dt));
    let mut out = s.clone();
    for (k, c) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
        out.psi.axpy(c * dt / 6.0, &k.0);
        out.v.axpy(c * dt / 6.0, &k.1);
        out.w.axpy(c * dt / 6.0, &k.2);
    }
    out
}

/// Number of internal steps per output step; output steps must be integer
/// multiples of the internal step, which must respect `Δt ≤ h/8`.
fn internal_steps(grid: &Grid, times: &TimeGrid, dt_internal: f64) -> Result<usize> {
    let limit = grid.spacing() / 8.0;
    if !(dt_internal > 0.0) || dt_internal > limit * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter {
            name: "dt_internal",
            reason: format!("internal step {dt_internal} violates the stability bound h/8 = {limit}"),
        });
    }
    let ratio = times.dt / dt_internal;
    let sub = ratio.round();
    if sub < 1.0 || (ratio - sub).abs() > 1e-9 * ratio {
        return Err(Error::InvalidParameter {
            name: "dt_internal",
            reason: format!(
                "output step {} is not a multiple of the internal step {dt_internal}",
                times.dt
            ),
        });
    }
    Ok(sub as usize)
}

/// Classical RK4 method of lines in physical space for
/// `-iγ^μ∂_μψ + Mψ = vFψ`, `-□v + m²v = ψ^*Hψ`, calling `observe` at every
/// output time with `(k, t, ψ, ψ_t, v, v_t, v_tt)`.
pub fn coupled_direct_observe(
    problem: CoupledProblem,
    data: &InitialData,
    times: &TimeGrid,
    dt_internal: f64,
    mut observe: impl FnMut(usize, f64, &SpinorField, &SpinorField, &ScalarField, &ScalarField, &ScalarField),
) -> Result<()> {
    check_mass("M", problem.dirac_mass)?;
    check_mass("m", problem.kg_mass)?;
    let grid = data.grid();
    let sub = internal_steps(grid, times, dt_internal)?;
    let h = times.dt / sub as f64;
    let rhs = OracleRhs::new(problem);
    let mut state = OracleState {
        psi: data.psi0.clone(),
        v: data.v0.clone(),
        w: data.v1.clone(),
    };
    for k in 0..times.len() {
        let t = times.time(k);
        if k > 0 {
            for j in 0..sub {
                state = rk4_step(&rhs, times.time(k - 1) + j as f64 * h, h, &state);
            }
            let norm = state.psi.l2_norm() + state.v.l2_norm() + state.w.l2_norm();
            if !norm.is_finite() || norm > BLOW_UP_GUARD {
                return Err(Error::BlowUp { time: t, norm });
            }
        }
        let (psi_t, v_t, w_t) = rhs.eval(t, &state);
        observe(k, t, &state.psi, &psi_t, &state.v, &v_t, &w_t);
    }
    Ok(())
}

/// Stored-trajectory form of [`coupled_direct_observe`].
pub fn coupled_direct_solve(
    problem: CoupledProblem,
    data: &InitialData,
    times: &TimeGrid,
    dt_internal: f64,
) -> Result<CoupledTrajectory> {
    let mut psi = Vec::with_capacity(times.len());
    let mut v = Vec::with_capacity(times.len());
    coupled_direct_observe(problem, data, times, dt_internal, |_, t, p, pt, u, ut, utt| {
        psi.push(Jet::new(t, vec![p.clone(), pt.clone()]));
        v.push(Jet::new(t, vec![u.clone(), ut.clone(), utt.clone()]));
    })?;
    Ok(CoupledTrajectory {
        psi: Trajectory::new(*times, psi)?,
        v: Trajectory::new(*times, v)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mode_field(grid: &Grid, k: [i64; 4], amplitude: C64) -> ScalarField {
        let mut s = SpectralScalar::zeros(grid);
        s.coefficients_mut()[grid.mode_index(k)] += amplitude;
        let neg = k.map(|x| -x);
        s.coefficients_mut()[grid.mode_index(neg)] += amplitude.conj();
        s.inverse()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        for p in 0..31 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn step_weights_match_closed_forms() {
        // Constant source: ∫cos(ω(τ-s))ds = sin(ωτ)/ω and
        // ∫sin(ω(τ-s))/ω ds = (1 - cos ωτ)/ω².
        let rule = gauss_legendre(16);
        for (omega, tau) in [(0.0, 0.3), (2.0, 0.125), (7.5, 0.25)] {
            let w = step_weights(omega * omega, tau, &rule);
            let c = w.c[0] + w.c[2];
            let s = w.s[0] + w.s[2];
            assert!((c - sin_over(omega, tau)).abs() < 1e-15);
            let expect = if omega == 0.0 {
                tau * tau / 2.0
            } else {
                (1.0 - (omega * tau).cos()) / (omega * omega)
            };
            assert!((s - expect).abs() < 1e-15, "{s} vs {expect}");
        }
    }

    #[test]
    fn sin_over_limit() {
        assert_eq!(sin_over(0.0, 0.7), 0.7);
        assert!((sin_over(1e-9, 2.0) - 2.0).abs() < 1e-15);
        assert!((sin_over(3.0, 0.5) - (1.5f64).sin() / 3.0).abs() < 1e-16);
    }

    #[test]
    fn zero_data_stay_zero() {
        let g = Grid::new(4, 2.0).unwrap();
        let tg = TimeGrid::new(0.0, 0.25, 4).unwrap();
        let z = ScalarField::zeros(&g);
        let tr = kg_evolve(&z, &z, None, 0.5, &tg).unwrap();
        assert!(tr.values().all(|f| f.max_modulus() == 0.0));
        let tr = dirac_evolve(&SpinorField::zeros(&g), None, 0.5, &GammaSet::standard(), &tg).unwrap();
        assert!(tr.values().all(|f| f.max_modulus() == 0.0));
    }

    #[test]
    fn kg_zero_mode_oscillates() {
        let g = Grid::new(4, 2.0).unwrap();
        let tg = TimeGrid::new(0.0, 0.1, 30).unwrap();
        let one = ScalarField::from_fn(&g, |_| 1.0);
        let tr = kg_evolve(&one, &ScalarField::zeros(&g), None, 1.0, &tg).unwrap();
        for (k, jet) in tr.jets().iter().enumerate() {
            let t = tg.time(k);
            assert!((jet.derivs[0].values()[3] - t.cos()).abs() < 1e-13);
            assert!((jet.derivs[1].values()[3] + t.sin()).abs() < 1e-13);
            assert!((jet.derivs[2].values()[3] + t.cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn kg_massless_single_mode() {
        let g = Grid::new(8, 4.0).unwrap();
        let tg = TimeGrid::new(0.0, 0.25, 12).unwrap();
        let xi = PI / 4.0;
        let v1 = mode_field(&g, [1, 0, 0, 0], C64::new(0.5, 0.0));
        let tr = kg_evolve(&ScalarField::zeros(&g), &v1, None, 0.0, &tg).unwrap();
        for (k, u) in tr.values().enumerate() {
            let t = tg.time(k);
            let s = tr.jet(k).value().forward().coefficient([1, 0, 0, 0]);
            assert!((s - C64::new(0.5 * (xi * t).sin() / xi, 0.0)).norm() < 1e-14);
            assert!(u.is_finite());
        }
    }

    #[test]
    fn dirac_rest_mode_phase() {
        let g = Grid::new(4, 2.0).unwrap();
        let gamma = GammaSet::standard();
        let tg = TimeGrid::new(0.0, 0.2, 10).unwrap();
        let e1 = SpinorField::from_fn(&g, |_| [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let tr = dirac_evolve(&e1, None, 1.0, &gamma, &tg).unwrap();
        for (k, f) in tr.values().enumerate() {
            let t = tg.time(k);
            let expect = C64::new(t.cos(), -t.sin());
            let v = f.values()[5];
            assert!((v[0] - expect).norm() < 1e-14);
            assert!(v[1].norm() + v[2].norm() + v[3].norm() < 1e-14);
        }
    }

    #[test]
    fn initial_snapshot_is_the_data() {
        let g = Grid::new(8, 8.0).unwrap();
        let d = crate::fields::gaussian_data(0.1, 1.0, &g, 3).unwrap();
        let tg = TimeGrid::new(0.0, 0.5, 2).unwrap();
        let psi = dirac_evolve(&d.psi0, None, 0.3, &GammaSet::standard(), &tg).unwrap();
        let v = kg_evolve(&d.v0, &d.v1, None, 0.3, &tg).unwrap();
        assert_eq!(psi.snapshot(0), &d.psi0);
        assert_eq!(v.snapshot(0), &d.v0);
        assert_eq!(&v.jet(0).derivs[1], &d.v1);
    }

    #[test]
    fn missing_source_node_is_reported() {
        let g = Grid::new(4, 2.0).unwrap();
        let tg = TimeGrid::new(0.0, 0.5, 3).unwrap();
        let z = ScalarField::zeros(&g);
        let src = SampledSource::new(vec![
            SourceSample { value: z.clone(), rate: z.clone() };
            2
        ]);
        let err = kg_evolve(&z, &z, Some(&src), 0.0, &tg).unwrap_err();
        assert!(matches!(err, Error::MissingSourceNode(2)));
    }

    #[test]
    fn cubic_in_time_source_is_integrated_exactly() {
        // Zero mode, m = 1: u'' + u = t³, u(0) = u'(0) = 0 has
        // u = t³ - 6t + 6 sin t.
        struct Cubic(Grid);
        impl TimeSource<ScalarField> for Cubic {
            fn value(&self, t: f64) -> ScalarField {
                ScalarField::from_fn(&self.0, |_| t * t * t)
            }
            fn rate(&self, t: f64) -> ScalarField {
                ScalarField::from_fn(&self.0, |_| 3.0 * t * t)
            }
        }
        let g = Grid::new(4, 2.0).unwrap();
        let tg = TimeGrid::new(0.0, 0.5, 6).unwrap();
        let z = ScalarField::zeros(&g);
        let cubic = Cubic(g.clone());
        let tr = kg_evolve(&z, &z, Some(&Analytic(&cubic)), 1.0, &tg).unwrap();
        for k in 0..tg.len() {
            let t = tg.time(k);
            let exact = t * t * t - 6.0 * t + 6.0 * t.sin();
            assert!((tr.snapshot(k).values()[0] - exact).abs() < 1e-13);
            let exact_tt = 6.0 * t - 6.0 * t.sin();
            assert!((tr.jet(k).derivs[2].values()[0] - exact_tt).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_rejects_unstable_steps() {
        let g = Grid::new(8, 4.0).unwrap();
        let gamma = GammaSet::standard();
        let d = InitialData::zeros(&g);
        let tg = TimeGrid::new(0.0, 0.5, 2).unwrap();
        let problem = CoupledProblem::new(&gamma, InteractionPair::identity_gamma0(&gamma), 0.0, 0.0);
        assert!(coupled_direct_solve(problem, &d, &tg, 0.25).is_err());
        assert!(coupled_direct_solve(problem, &d, &tg, 0.3 / 8.0).is_err());
        let out = coupled_direct_solve(problem, &d, &tg, 0.125).unwrap();
        assert!(out.psi.values().all(|f| f.max_modulus() == 0.0));
    }
}
