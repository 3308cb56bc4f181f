//! Translations, rotations, boosts and the scaling field acting on time jets,
//! their spin-corrected variants, and numerical checks of the commutator and
//! product-rule identities they satisfy.
//!
//! A field is represented by a [`Jet`] `(f, ∂_t f, …)` at one time. Every
//! operator is evaluated on jets so that products of operators mixing `∂_t`
//! with spatial derivatives stay exact: applying an operator that contains
//! `∂_t` consumes one time derivative of the input jet.

mod corpus;

use std::borrow::Cow;
use std::cell::OnceCell;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ComplexField, Field, FieldValue, ScalarField, SpinorField};
use crate::gamma::{GammaSet, InteractionPair, Mat4};
use crate::trajectory::{Jet, Trajectory};

pub use corpus::{
    bump_profile, generic_pair, identity_suite, scalar_bump, seam_fraction, spinor_bump, AnalyticField,
    IdentityResidual, TimeProfile, COMMUTATOR_BUMP, FACTOR_BUMP, SEAM_FRACTION,
};

/// Multi-index length used when no other cap is configured.
pub const DEFAULT_K_MAX: usize = 2;

/// Number of members of the commuting family `(∂, Ω, L)`.
pub const FAMILY_SIZE: usize = 15;

/// Kind of a first-order vector field. Axes are numbered `1..=4`, time is `0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VectorFieldKind {
    /// `∂_α`, `α ∈ 0..=4`.
    Translation(usize),
    /// `Ω_ab = x_a∂_b - x_b∂_a`, `1 ≤ a < b ≤ 4`.
    Rotation(usize, usize),
    /// `L_a = t∂_a + x_a∂_t`.
    Boost(usize),
    /// `L₀ = t∂_t + x^a∂_a`.
    Scaling,
}

/// A vector field, optionally with its spin correction: `Ω̂_ab = Ω_ab - ½γ^aγ^b`,
/// `L̂_a = L_a - ½γ^0γ^a`. Translations and scaling have no correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VectorFieldId {
    kind: VectorFieldKind,
    modified: bool,
}

impl VectorFieldId {
    pub fn new(kind: VectorFieldKind, modified: bool) -> Result<Self> {
        let valid = match kind {
            VectorFieldKind::Translation(a) => a <= 4,
            VectorFieldKind::Rotation(a, b) => (1..=4).contains(&a) && a < b && b <= 4,
            VectorFieldKind::Boost(a) => (1..=4).contains(&a),
            VectorFieldKind::Scaling => true,
        };
        if !valid {
            return Err(Error::InvalidParameter {
                name: "vector field",
                reason: format!("{kind:?} has axes out of range"),
            });
        }
        let modified = modified && matches!(kind, VectorFieldKind::Rotation(..) | VectorFieldKind::Boost(_));
        Ok(VectorFieldId { kind, modified })
    }

    pub fn translation(alpha: usize) -> Result<Self> {
        Self::new(VectorFieldKind::Translation(alpha), false)
    }

    pub fn rotation(a: usize, b: usize) -> Result<Self> {
        Self::new(VectorFieldKind::Rotation(a, b), false)
    }

    pub fn boost(a: usize) -> Result<Self> {
        Self::new(VectorFieldKind::Boost(a), false)
    }

    pub fn scaling() -> Self {
        VectorFieldId {
            kind: VectorFieldKind::Scaling,
            modified: false,
        }
    }

    /// The spin-corrected variant (a no-op for translations and scaling).
    pub fn hat(self) -> Self {
        Self::new(self.kind, true).expect("kind already validated")
    }

    /// The uncorrected variant.
    pub fn plain(self) -> Self {
        VectorFieldId {
            kind: self.kind,
            modified: false,
        }
    }

    pub fn kind(&self) -> VectorFieldKind {
        self.kind
    }

    pub fn is_modified(&self) -> bool {
        self.modified
    }

    /// Time derivatives consumed by one application.
    pub fn time_order(&self) -> usize {
        match self.kind {
            VectorFieldKind::Translation(0) | VectorFieldKind::Boost(_) | VectorFieldKind::Scaling => 1,
            _ => 0,
        }
    }

    /// The constant matrix `s` with `Γ̂ = Γ - s`, whether or not this id is
    /// modified; `None` for translations and scaling.
    pub fn spin(&self, gamma: &GammaSet) -> Option<Mat4> {
        spin_matrix(self.kind, gamma)
    }

    pub fn label(&self) -> String {
        let base = match self.kind {
            VectorFieldKind::Translation(a) => format!("d{a}"),
            VectorFieldKind::Rotation(a, b) => format!("O{a}{b}"),
            VectorFieldKind::Boost(a) => format!("L{a}"),
            VectorFieldKind::Scaling => "L0".to_string(),
        };
        if self.modified {
            base + "_hat"
        } else {
            base
        }
    }
}

impl fmt::Display for VectorFieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn spin_matrix(kind: VectorFieldKind, gamma: &GammaSet) -> Option<Mat4> {
    match kind {
        VectorFieldKind::Rotation(a, b) => Some(gamma.rotation_spin(a, b)),
        VectorFieldKind::Boost(a) => Some(gamma.boost_spin(a)),
        _ => None,
    }
}

/// The ordered family `∂_0, …, ∂_4, Ω_12, Ω_13, Ω_14, Ω_23, Ω_24, Ω_34, L_1, …, L_4`,
/// with rotations and boosts spin-corrected when `modified` is set.
pub fn family(modified: bool) -> [VectorFieldId; FAMILY_SIZE] {
    let mut kinds = Vec::with_capacity(FAMILY_SIZE);
    kinds.extend((0..=4).map(VectorFieldKind::Translation));
    for a in 1..=4 {
        for b in a + 1..=4 {
            kinds.push(VectorFieldKind::Rotation(a, b));
        }
    }
    kinds.extend((1..=4).map(VectorFieldKind::Boost));
    let ids: Vec<VectorFieldId> = kinds
        .into_iter()
        .map(|k| VectorFieldId::new(k, modified).expect("family kinds are valid"))
        .collect();
    ids.try_into().expect("family has fifteen members")
}

/// A word of vector fields `Γ_{i_1} Γ_{i_2} ⋯ Γ_{i_k}`, read as an operator
/// product: the rightmost field acts first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiIndex {
    ops: Vec<VectorFieldId>,
}

impl MultiIndex {
    pub fn new(ops: Vec<VectorFieldId>, k_max: usize) -> Result<Self> {
        if ops.len() > k_max {
            return Err(Error::MultiIndexTooLong { len: ops.len(), k_max });
        }
        Ok(MultiIndex { ops })
    }

    pub fn empty() -> Self {
        MultiIndex { ops: Vec::new() }
    }

    pub fn ops(&self) -> &[VectorFieldId] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Time derivatives the input jet must carry.
    pub fn time_order(&self) -> usize {
        self.ops.iter().map(VectorFieldId::time_order).sum()
    }
}

/// A jet with lazily cached spectra and first spatial derivatives, so that
/// several operators applied to the same jet share transforms.
pub struct PreparedJet<'a, F: Field> {
    time: f64,
    derivs: Cow<'a, [F]>,
    spectra: Vec<OnceCell<F::Spectrum>>,
    partials: Vec<[OnceCell<F>; 4]>,
}

impl<'a, F: Field> PreparedJet<'a, F> {
    pub fn new(jet: &'a Jet<F>) -> Self {
        Self::build(jet.time, Cow::Borrowed(&jet.derivs))
    }

    pub fn owned(time: f64, derivs: Vec<F>) -> PreparedJet<'static, F> {
        PreparedJet::build(time, Cow::Owned(derivs))
    }

    fn build(time: f64, derivs: Cow<'a, [F]>) -> Self {
        let len = derivs.len();
        PreparedJet {
            time,
            derivs,
            spectra: (0..len).map(|_| OnceCell::new()).collect(),
            partials: (0..len).map(|_| Default::default()).collect(),
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn order(&self) -> usize {
        self.derivs.len() - 1
    }

    /// `∂_t^j f`.
    pub fn entry(&self, j: usize) -> &F {
        &self.derivs[j]
    }

    pub fn spectrum(&self, j: usize) -> &F::Spectrum {
        self.spectra[j].get_or_init(|| self.derivs[j].forward())
    }

    /// `∂_a ∂_t^j f` for `a ∈ 1..=4`.
    pub fn partial(&self, j: usize, axis: usize) -> &F {
        self.partials[j][axis - 1].get_or_init(|| F::derivative_from(self.spectrum(j), axis))
    }

    pub fn into_jet(self) -> Jet<F> {
        Jet::new(self.time, self.derivs.into_owned())
    }

    fn require(&self, order: usize) -> Result<()> {
        if order > self.order() {
            Err(Error::JetOrder {
                required: order,
                available: self.order(),
            })
        } else {
            Ok(())
        }
    }
}

/// `Γ f` as a jet of order `out_order`; the input must carry
/// `out_order + op.time_order()` time derivatives.
pub fn apply_prepared<F: Field>(
    op: VectorFieldId,
    f: &PreparedJet<'_, F>,
    out_order: usize,
    gamma: &GammaSet,
) -> Result<Vec<F>> {
    f.require(out_order + op.time_order())?;
    let spin = if op.modified { op.spin(gamma) } else { None };
    let t = f.time();
    let mut out = Vec::with_capacity(out_order + 1);
    for j in 0..=out_order {
        let mut g = match op.kind {
            VectorFieldKind::Translation(0) => f.entry(j + 1).clone(),
            VectorFieldKind::Translation(a) => f.partial(j, a).clone(),
            VectorFieldKind::Rotation(a, b) => {
                let mut g = F::zeros(f.entry(j).grid());
                g.add_coordinate_product(a, 1.0, f.partial(j, b));
                g.add_coordinate_product(b, -1.0, f.partial(j, a));
                g
            }
            VectorFieldKind::Boost(a) => {
                // ∂_t^j (t∂_a f + x_a∂_t f) = t∂_a f_j + j∂_a f_{j-1} + x_a f_{j+1}
                let mut g = f.partial(j, a).scaled(t);
                if j > 0 {
                    g.axpy(j as f64, f.partial(j - 1, a));
                }
                g.add_coordinate_product(a, 1.0, f.entry(j + 1));
                g
            }
            VectorFieldKind::Scaling => {
                let mut g = f.entry(j + 1).scaled(t);
                g.axpy(j as f64, f.entry(j));
                for a in 1..=4 {
                    g.add_coordinate_product(a, 1.0, f.partial(j, a));
                }
                g
            }
        };
        if let Some(s) = &spin {
            let sf = f
                .entry(j)
                .matrix_product(s)
                .ok_or_else(|| Error::ModifiedOnScalar(op.label()))?;
            g.axpy(-1.0, &sf);
        }
        out.push(g);
    }
    Ok(out)
}

/// `Γ f` at the time of the jet.
pub fn apply<F: Field>(op: VectorFieldId, f: &Jet<F>, gamma: &GammaSet) -> Result<F> {
    let mut out = apply_prepared(op, &PreparedJet::new(f), 0, gamma)?;
    Ok(out.swap_remove(0))
}

/// `Γ f` as a jet carrying `out_order` time derivatives.
pub fn apply_jet<F: Field>(op: VectorFieldId, f: &Jet<F>, out_order: usize, gamma: &GammaSet) -> Result<Jet<F>> {
    Ok(Jet::new(f.time, apply_prepared(op, &PreparedJet::new(f), out_order, gamma)?))
}

/// `Γ f` at a sample time of a trajectory.
pub fn apply_at<F: Field>(op: VectorFieldId, f: &Trajectory<F>, t: f64, gamma: &GammaSet) -> Result<F> {
    apply(op, f.at_time(t)?, gamma)
}

/// `Γ^I f` at the time of the jet.
pub fn apply_multi<F: Field>(index: &MultiIndex, f: &Jet<F>, gamma: &GammaSet) -> Result<F> {
    let needed = index.time_order();
    if needed > f.order() {
        return Err(Error::JetOrder {
            required: needed,
            available: f.order(),
        });
    }
    let mut remaining = needed;
    let mut current = PreparedJet::new(f);
    for op in index.ops().iter().rev() {
        remaining -= op.time_order();
        let next = apply_prepared(*op, &current, remaining, gamma)?;
        current = PreparedJet::owned(f.time, next);
    }
    Ok(current.derivs.into_owned().swap_remove(0))
}

/// Visits `Γ^I f` for every multi-index `I ∈ ℕ^15` with `|I| ≤ k`, where
/// `Γ^I = Γ_1^{I_1} ⋯ Γ_15^{I_15}` over [`family`]. The callback receives
/// the word (family positions, rightmost applied first) and the field.
pub fn visit_family<F: Field>(
    f: &Jet<F>,
    k: usize,
    modified: bool,
    gamma: &GammaSet,
    mut visit: impl FnMut(&[usize], &F),
) -> Result<()> {
    if k > f.order() {
        // Only words made entirely of time-consuming fields need the full order.
        return Err(Error::JetOrder {
            required: k,
            available: f.order(),
        });
    }
    let ops = family(modified);
    let root = PreparedJet::new(f);
    let mut path = Vec::with_capacity(k);
    visit_from(&root, FAMILY_SIZE - 1, k, &ops, gamma, &mut path, &mut visit)
}

fn visit_from<F: Field>(
    f: &PreparedJet<'_, F>,
    last: usize,
    remaining: usize,
    ops: &[VectorFieldId; FAMILY_SIZE],
    gamma: &GammaSet,
    path: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize], &F),
) -> Result<()> {
    visit(path, f.entry(0));
    if remaining == 0 {
        return Ok(());
    }
    for idx in 0..=last {
        let child = apply_prepared(ops[idx], f, remaining - 1, gamma)?;
        let child = PreparedJet::owned(f.time(), child);
        path.push(idx);
        visit_from(&child, idx, remaining - 1, ops, gamma, path, visit)?;
        path.pop();
    }
    Ok(())
}

/// Number of multi-indices `I ∈ ℕ^15` with `|I| ≤ k`.
pub fn family_word_count(k: usize) -> usize {
    // C(15 + k, k)
    (1..=k).fold(1usize, |acc, j| acc * (FAMILY_SIZE + j) / j)
}

/// The linear operators whose commutators with the family are checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldOperator {
    /// `-□ = ∂_t² - Δ`.
    Wave,
    /// `-iγ^μ∂_μ = -iγ^0∂_t - iγ^a∂_a`.
    Dirac,
}

impl FieldOperator {
    pub fn time_order(&self) -> usize {
        match self {
            FieldOperator::Wave => 2,
            FieldOperator::Dirac => 1,
        }
    }

    /// `κ` in `[A, Γ] = κA`: zero for the family, 2 for `(-□, L₀)` and 1 for
    /// the Dirac operator with `L₀`.
    pub fn anomaly(&self, op: VectorFieldId) -> f64 {
        match (self, op.kind) {
            (FieldOperator::Wave, VectorFieldKind::Scaling) => 2.0,
            (FieldOperator::Dirac, VectorFieldKind::Scaling) => 1.0,
            _ => 0.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FieldOperator::Wave => "wave",
            FieldOperator::Dirac => "dirac",
        }
    }
}

/// `A f` as a jet of order `out_order`.
pub fn apply_operator<F: Field>(
    a: FieldOperator,
    f: &PreparedJet<'_, F>,
    out_order: usize,
    gamma: &GammaSet,
) -> Result<Vec<F>> {
    f.require(out_order + a.time_order())?;
    let mut out = Vec::with_capacity(out_order + 1);
    for j in 0..=out_order {
        let g = match a {
            FieldOperator::Wave => {
                let mut g = f.entry(j + 2).clone();
                g.axpy(-1.0, &F::laplacian_from(f.spectrum(j)));
                g
            }
            FieldOperator::Dirac => {
                let minus_i = C64::new(0.0, -1.0);
                let spinor_only = || Error::InvalidParameter {
                    name: "field",
                    reason: "the Dirac operator acts on spinor fields".into(),
                };
                let mut g = f
                    .entry(j + 1)
                    .matrix_product(&gamma.gamma(0).scale(minus_i))
                    .ok_or_else(spinor_only)?;
                for axis in 1..=4 {
                    let d = f
                        .partial(j, axis)
                        .matrix_product(&gamma.gamma(axis).scale(minus_i))
                        .ok_or_else(spinor_only)?;
                    g.axpy(1.0, &d);
                }
                g
            }
        };
        out.push(g);
    }
    Ok(out)
}

/// `‖A(Γf) - Γ(Af) - κ Af‖₂` at the jet time, with `κ` from
/// [`FieldOperator::anomaly`]. The jet needs `A.time_order() + Γ.time_order()`
/// time derivatives.
pub fn commutator_residual<F: Field>(
    op: VectorFieldId,
    a: FieldOperator,
    f: &Jet<F>,
    gamma: &GammaSet,
) -> Result<f64> {
    Ok(commutator_residuals(&[op], a, f, gamma)?[0])
}

/// [`commutator_residual`] for several fields, sharing the transforms of `f`
/// and `Af`.
pub fn commutator_residuals<F: Field>(
    ops: &[VectorFieldId],
    a: FieldOperator,
    f: &Jet<F>,
    gamma: &GammaSet,
) -> Result<Vec<f64>> {
    let order = ops.iter().map(VectorFieldId::time_order).max().unwrap_or(0);
    let f = PreparedJet::new(f);
    let af = PreparedJet::owned(f.time(), apply_operator(a, &f, order, gamma)?);
    ops.iter()
        .map(|&op| {
            let gf = PreparedJet::owned(f.time(), apply_prepared(op, &f, a.time_order(), gamma)?);
            let agf = apply_operator(a, &gf, 0, gamma)?;
            let gaf = apply_prepared(op, &af, 0, gamma)?;
            let mut r = agf[0].difference(&gaf[0]);
            r.axpy(-a.anomaly(op), af.entry(0));
            Ok(r.l2_norm())
        })
        .collect()
}

/// The two product rules checked by [`leibniz_residual`].
#[derive(Clone, Copy)]
pub enum LeibnizCase<'a> {
    /// `Γ̂(fFΦ) = (Γf)FΦ + fF(Γ̂Φ) + f(Fs - sF)Φ`.
    ScalarSpinor {
        f: &'a Jet<ScalarField>,
        phi: &'a Jet<SpinorField>,
    },
    /// `Γ(Φ₁^*HΦ₂) = (Γ̂Φ₁)^*HΦ₂ + Φ₁^*H(Γ̂Φ₂) + Φ₁^*(s^*H + Hs)Φ₂`.
    Bilinear {
        phi1: &'a Jet<SpinorField>,
        phi2: &'a Jet<SpinorField>,
    },
}

impl LeibnizCase<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            LeibnizCase::ScalarSpinor { .. } => "scalar-spinor",
            LeibnizCase::Bilinear { .. } => "bilinear",
        }
    }
}

/// L² norm of left minus right side of the selected product rule for the
/// vector field of the given kind (`s` is its spin matrix, zero for
/// translations and scaling).
pub fn leibniz_residual(
    kind: VectorFieldKind,
    case: LeibnizCase<'_>,
    pair: &InteractionPair,
    gamma: &GammaSet,
) -> Result<f64> {
    Ok(leibniz_residuals(&[kind], case, pair, gamma)?[0])
}

/// [`leibniz_residual`] for several kinds, sharing transforms.
pub fn leibniz_residuals(
    kinds: &[VectorFieldKind],
    case: LeibnizCase<'_>,
    pair: &InteractionPair,
    gamma: &GammaSet,
) -> Result<Vec<f64>> {
    let ids = kinds
        .iter()
        .map(|&k| VectorFieldId::new(k, false))
        .collect::<Result<Vec<_>>>()?;
    let order = ids.iter().map(VectorFieldId::time_order).max().unwrap_or(0);
    let first = |v: Vec<SpinorField>| v.into_iter().next().expect("jet has a value");
    match case {
        LeibnizCase::ScalarSpinor { f, phi } => {
            let product = scalar_spinor_jet(f, phi, &pair.f, order)?;
            let (pp, pf, pphi) = (PreparedJet::new(&product), PreparedJet::new(f), PreparedJet::new(phi));
            let (f0, phi0) = (f.value(), phi.value());
            ids.iter()
                .map(|&plain| {
                    let hat = plain.hat();
                    let s = plain.spin(gamma).unwrap_or_else(Mat4::zero);
                    let lhs = first(apply_prepared(hat, &pp, 0, gamma)?);
                    let gf = apply_prepared(plain, &pf, 0, gamma)?.swap_remove(0);
                    let gphi = first(apply_prepared(hat, &pphi, 0, gamma)?);
                    let mut rhs = phi0.scalar_product_with(&gf, &pair.f);
                    rhs.axpy(1.0, &gphi.scalar_product_with(f0, &pair.f));
                    let correction = pair.f * s - s * pair.f;
                    rhs.axpy(1.0, &phi0.scalar_product_with(f0, &correction));
                    Ok(lhs.difference(&rhs).l2_norm())
                })
                .collect()
        }
        LeibnizCase::Bilinear { phi1, phi2 } => {
            let product = bilinear_jet(phi1, phi2, &pair.h, order)?;
            let (pb, p1, p2) = (PreparedJet::new(&product), PreparedJet::new(phi1), PreparedJet::new(phi2));
            let (v1, v2) = (phi1.value(), phi2.value());
            ids.iter()
                .map(|&plain| {
                    let hat = plain.hat();
                    let s = plain.spin(gamma).unwrap_or_else(Mat4::zero);
                    let lhs = apply_prepared(plain, &pb, 0, gamma)?.swap_remove(0);
                    let g1 = first(apply_prepared(hat, &p1, 0, gamma)?);
                    let g2 = first(apply_prepared(hat, &p2, 0, gamma)?);
                    let mut rhs = SpinorField::bilinear(&g1, &pair.h, v2);
                    rhs.axpy(1.0, &SpinorField::bilinear(v1, &pair.h, &g2));
                    let correction = s.adjoint() * pair.h + pair.h * s;
                    rhs.axpy(1.0, &SpinorField::bilinear(v1, &correction, v2));
                    Ok(lhs.difference(&rhs).l2_norm())
                })
                .collect()
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_orders(order: usize, available: usize) -> Result<()> {
    if order > available {
        Err(Error::JetOrder {
            required: order,
            available,
        })
    } else {
        Ok(())
    }
}

/// Time jet of `f F Φ` by the Leibniz rule in `t`.
pub fn scalar_spinor_jet(
    f: &Jet<ScalarField>,
    phi: &Jet<SpinorField>,
    m: &Mat4,
    order: usize,
) -> Result<Jet<SpinorField>> {
    check_orders(order, f.order().min(phi.order()))?;
    let derivs = (0..=order)
        .map(|j| {
            let mut acc = SpinorField::zeros(phi.value().grid());
            for i in 0..=j {
                acc.axpy(binomial(j, i), &phi.derivs[j - i].scalar_product_with(&f.derivs[i], m));
            }
            acc
        })
        .collect();
    Ok(Jet::new(f.time, derivs))
}

/// Time jet of `Φ₁^* M Φ₂` by the Leibniz rule in `t`.
pub fn bilinear_jet(
    phi1: &Jet<SpinorField>,
    phi2: &Jet<SpinorField>,
    m: &Mat4,
    order: usize,
) -> Result<Jet<ComplexField>> {
    check_orders(order, phi1.order().min(phi2.order()))?;
    let derivs = (0..=order)
        .map(|j| {
            let mut acc = ComplexField::zeros(phi1.value().grid());
            for i in 0..=j {
                acc.axpy(binomial(j, i), &SpinorField::bilinear(&phi1.derivs[i], m, &phi2.derivs[j - i]));
            }
            acc
        })
        .collect();
    Ok(Jet::new(phi1.time, derivs))
}

/// Pointwise ratios `Σ_{|I|≤k}|Γ̂^I f| / Σ_{|I|≤k}|Γ^I f|` and the reciprocal,
/// maximised over grid points where the denominator is at least `1e-14`.
/// Returns `(0, 0)` when no point qualifies.
pub fn norm_equivalence_check(f: &Jet<SpinorField>, k: usize, gamma: &GammaSet) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "norm equivalence needs k >= 1".into(),
        });
    }
    let accumulate = |modified: bool| -> Result<Vec<f64>> {
        let mut sum = vec![0.0; f.value().grid().len()];
        visit_family(f, k, modified, gamma, |_, g| {
            for (s, v) in sum.iter_mut().zip(g.values()) {
                *s += v.norm_sqr().sqrt();
            }
        })?;
        Ok(sum)
    };
    let hat = accumulate(true)?;
    let plain = accumulate(false)?;
    let mut forward = 0.0f64;
    let mut backward = 0.0f64;
    for (h, p) in hat.iter().zip(&plain) {
        if *p >= 1e-14 {
            forward = forward.max(h / p);
        }
        if *h >= 1e-14 {
            backward = backward.max(p / h);
        }
    }
    Ok((forward, backward))
}

/// Bound `C(k)` for both ratios of [`norm_equivalence_check`].
///
/// Since the spin matrices are constant, `Γ̂^I f = Σ_D Π_j C(I_j, D_j)(-s_j)^{D_j} Γ^{I-D} f`,
/// and each `s_j` has operator norm `½` (rotations and boosts) or `0`
/// (translations). Collecting the coefficient of each `|Γ^J f|` gives
/// `C(k) = max_J Σ_{D : |J+D| ≤ k} Π_j C(J_j + D_j, D_j) β_j^{D_j}`. The same
/// expansion with `Γ = Γ̂ + s` bounds the reverse ratio.
pub fn norm_equivalence_constant(k: usize) -> f64 {
    let beta: Vec<f64> = family(false)
        .iter()
        .map(|op| if matches!(op.kind(), VectorFieldKind::Translation(_)) { 0.0 } else { 0.5 })
        .collect();
    let words = multi_indices(k);
    words
        .iter()
        .map(|j| {
            let len_j: usize = j.iter().sum();
            words
                .iter()
                .filter(|d| len_j + d.iter().sum::<usize>() <= k)
                .map(|d| {
                    (0..FAMILY_SIZE)
                        .map(|idx| binomial(j[idx] + d[idx], d[idx]) * beta[idx].powi(d[idx] as i32))
                        .product::<f64>()
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// All `I ∈ ℕ^15` with `|I| ≤ k`.
fn multi_indices(k: usize) -> Vec<[usize; FAMILY_SIZE]> {
    fn rec(pos: usize, left: usize, cur: &mut [usize; FAMILY_SIZE], out: &mut Vec<[usize; FAMILY_SIZE]>) {
        if pos == FAMILY_SIZE {
            out.push(*cur);
            return;
        }
        for c in 0..=left {
            cur[pos] = c;
            rec(pos + 1, left - c, cur, out);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    rec(0, k, &mut [0; FAMILY_SIZE], &mut out);
    out
}
