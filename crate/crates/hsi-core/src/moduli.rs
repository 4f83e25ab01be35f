//! Points of the extended moduli spaces of a once-punctured surface and of
//! the surface cut along a non-separating curve, together with the moment
//! maps, the gluing/reduction correspondence and the twist flow.
//!
//! A point of the uncut space is (θ, A₁, B₁, …, A_h, B_h) with
//! exp(θ) = ∏ᵢ [Aᵢ, Bᵢ] and |θ| < π√2. A point of the cut space is
//! (g, A₁, A₂, b₁, b₂, U₂, V₂, …) subject to
//!
//!   exp(g) = A₁ e^{b₁} A₁⁻¹ · A₂⁻¹ e^{−b₂} A₂ · ∏ᵢ≥₂ [Uᵢ, Vᵢ],
//!
//! with |g|, |b₁|, |b₂| < π√2. The b₂ factor enters inverted: the two copies
//! of the cut curve inherit opposite boundary orientations, which is also
//! why the moment of the gluing action is Φ₁ + Φ₂ = −b₁ + b₂. On the zero
//! level b₁ = b₂ and gluing A = A₁A₂, B̃ = A₂⁻¹ e^{b₁} A₂ lands exactly on
//! the commutator relation.

use crate::su2::{Su2, Su2Error, Su2Vector, PI_SQRT2};
use crate::tol::Tol;
use crate::words::HolonomyPoint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModuliError {
    #[error("holonomy relation violated (residual {residual:.3e})")]
    RelationViolated { residual: f64 },
    #[error("boundary datum lies outside the open ball of radius pi*sqrt(2) (|v| = {norm})")]
    OutsideMembership { norm: f64 },
    #[error("moment is not zero (|phi1 + phi2| = {norm:.3e}); point is off the reduction locus")]
    MomentNotZero { norm: f64 },
    #[error("distinguished holonomy equals -I; the point lies on the locus the reduction misses")]
    OnComplementCMinus,
    #[error(transparent)]
    Arithmetic(#[from] Su2Error),
}

/// Point of the uncut extended moduli space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuliPoint {
    theta: Su2Vector,
    holonomies: HolonomyPoint,
}

impl ModuliPoint {
    /// Validates membership (|θ| < π√2) and the defining relation.
    pub fn new(
        theta: Su2Vector,
        holonomies: HolonomyPoint,
        tol: &Tol,
    ) -> Result<ModuliPoint, ModuliError> {
        if theta.norm() >= PI_SQRT2 {
            return Err(ModuliError::OutsideMembership { norm: theta.norm() });
        }
        let residual = theta.exp().dist(commutator_product(&holonomies));
        if residual > tol.relation {
            return Err(ModuliError::RelationViolated { residual });
        }
        Ok(ModuliPoint { theta, holonomies })
    }

    /// Builds θ as the logarithm of the boundary product; fails when the
    /// product is −I (the point would sit outside the open part).
    pub fn from_holonomies(holonomies: HolonomyPoint) -> Result<ModuliPoint, ModuliError> {
        let theta = commutator_product(&holonomies).log()?;
        Ok(ModuliPoint { theta, holonomies })
    }

    /// The genus-0 point.
    pub fn trivial() -> ModuliPoint {
        ModuliPoint {
            theta: Su2Vector::ZERO,
            holonomies: HolonomyPoint::new(Vec::new()).expect("empty"),
        }
    }

    pub fn random<R: Rng + ?Sized>(h: usize, rng: &mut R) -> ModuliPoint {
        loop {
            let hol = HolonomyPoint::new((0..2 * h).map(|_| Su2::haar(rng)).collect())
                .expect("even length");
            let prod = commutator_product(&hol);
            if prod.dist(Su2::MINUS_IDENTITY) > 1e-3 {
                return ModuliPoint::from_holonomies(hol).expect("away from -I");
            }
        }
    }

    pub fn genus(&self) -> usize {
        self.holonomies.genus()
    }

    pub fn theta(&self) -> Su2Vector {
        self.theta
    }

    pub fn holonomies(&self) -> &HolonomyPoint {
        &self.holonomies
    }

    /// Residual of exp(θ) = ∏[Aᵢ,Bᵢ].
    pub fn relation_residual(&self) -> f64 {
        self.theta.exp().dist(commutator_product(&self.holonomies))
    }

    pub fn dist(&self, o: &ModuliPoint) -> f64 {
        let mut d = self.theta.dist(o.theta);
        for (a, b) in self
            .holonomies
            .holonomies()
            .iter()
            .zip(o.holonomies.holonomies())
        {
            d = d.max(a.dist(*b));
        }
        d
    }
}

pub fn commutator_product(hol: &HolonomyPoint) -> Su2 {
    let mut prod = Su2::IDENTITY;
    for k in 0..hol.genus() {
        prod = prod.mul(Su2::commutator(hol.alpha(k), hol.beta(k)));
    }
    prod
}

/// Point of the cut-surface moduli space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutModuliPoint {
    g: Su2Vector,
    a1: Su2,
    a2: Su2,
    b1: Su2Vector,
    b2: Su2Vector,
    /// Extra handle pairs (U₂, V₂, …); empty when the underlying surface has
    /// genus 1.
    pairs: Vec<(Su2, Su2)>,
}

impl CutModuliPoint {
    pub fn new(
        g: Su2Vector,
        a1: Su2,
        a2: Su2,
        b1: Su2Vector,
        b2: Su2Vector,
        pairs: Vec<(Su2, Su2)>,
        tol: &Tol,
    ) -> Result<CutModuliPoint, ModuliError> {
        for v in [g, b1, b2] {
            if v.norm() >= PI_SQRT2 {
                return Err(ModuliError::OutsideMembership { norm: v.norm() });
            }
        }
        let pt = CutModuliPoint {
            g,
            a1,
            a2,
            b1,
            b2,
            pairs,
        };
        let residual = pt.relation_residual();
        if residual > tol.relation {
            return Err(ModuliError::RelationViolated { residual });
        }
        Ok(pt)
    }

    pub fn random<R: Rng + ?Sized>(h: usize, rng: &mut R) -> CutModuliPoint {
        assert!(h >= 1, "cut surface needs genus at least 1");
        loop {
            let a1 = Su2::haar(rng);
            let a2 = Su2::haar(rng);
            let b1 = Su2Vector::random_in_ball(rng, 0.95);
            let b2 = Su2Vector::random_in_ball(rng, 0.95);
            let pairs: Vec<(Su2, Su2)> = (1..h).map(|_| (Su2::haar(rng), Su2::haar(rng))).collect();
            let prod = cut_boundary_product(a1, a2, b1, b2, &pairs);
            if prod.dist(Su2::MINUS_IDENTITY) > 1e-3 {
                let g = prod.log().expect("away from -I");
                return CutModuliPoint {
                    g,
                    a1,
                    a2,
                    b1,
                    b2,
                    pairs,
                };
            }
        }
    }

    /// Random point on the reduction locus b₁ = b₂.
    pub fn random_on_zero_level<R: Rng + ?Sized>(h: usize, rng: &mut R) -> CutModuliPoint {
        loop {
            let mut pt = CutModuliPoint::random(h, rng);
            pt.b2 = pt.b1;
            let prod = cut_boundary_product(pt.a1, pt.a2, pt.b1, pt.b2, &pt.pairs);
            if prod.dist(Su2::MINUS_IDENTITY) > 1e-3 {
                pt.g = prod.log().expect("away from -I");
                return pt;
            }
        }
    }

    /// Genus of the glued surface.
    pub fn genus(&self) -> usize {
        self.pairs.len() + 1
    }

    pub fn g(&self) -> Su2Vector {
        self.g
    }

    pub fn a1(&self) -> Su2 {
        self.a1
    }

    pub fn a2(&self) -> Su2 {
        self.a2
    }

    pub fn b1(&self) -> Su2Vector {
        self.b1
    }

    pub fn b2(&self) -> Su2Vector {
        self.b2
    }

    pub fn pairs(&self) -> &[(Su2, Su2)] {
        &self.pairs
    }

    pub fn relation_residual(&self) -> f64 {
        self.g.exp().dist(cut_boundary_product(
            self.a1,
            self.a2,
            self.b1,
            self.b2,
            &self.pairs,
        ))
    }

    pub fn dist(&self, o: &CutModuliPoint) -> f64 {
        let mut d = self.g.dist(o.g);
        d = d.max(self.a1.dist(o.a1)).max(self.a2.dist(o.a2));
        d = d.max(self.b1.dist(o.b1)).max(self.b2.dist(o.b2));
        for ((u, v), (u2, v2)) in self.pairs.iter().zip(&o.pairs) {
            d = d.max(u.dist(*u2)).max(v.dist(*v2));
        }
        d
    }
}

fn cut_boundary_product(
    a1: Su2,
    a2: Su2,
    b1: Su2Vector,
    b2: Su2Vector,
    pairs: &[(Su2, Su2)],
) -> Su2 {
    let mut prod = b1.exp().conj_by(a1).mul(b2.exp().inv().conj_by(a2.inv()));
    for (u, v) in pairs {
        prod = prod.mul(Su2::commutator(*u, *v));
    }
    prod
}

/// The moment triple (Φ_γ, Φ₁, Φ₂) = (g, −b₁, b₂) of the boundary actions.
pub fn moments(pt: &CutModuliPoint) -> (Su2Vector, Su2Vector, Su2Vector) {
    (pt.g, pt.b1.neg(), pt.b2)
}

/// Moment of the diagonal gluing action: Φ = Φ₁ + Φ₂ = b₂ − b₁.
pub fn gluing_moment(pt: &CutModuliPoint) -> Su2Vector {
    pt.b2.sub(pt.b1)
}

/// Residual SU(2)-action G·(g, A₁, A₂, b₁, b₂, …) =
/// (g, A₁G⁻¹, GA₂, ad_G b₁, ad_G b₂, …).
pub fn su2_action(g: Su2, pt: &CutModuliPoint) -> CutModuliPoint {
    CutModuliPoint {
        g: pt.g,
        a1: pt.a1.mul(g.inv()),
        a2: g.mul(pt.a2),
        b1: g.adjoint(pt.b1),
        b2: g.adjoint(pt.b2),
        pairs: pt.pairs.clone(),
    }
}

/// Twist flow: only A₁ moves, to A₁e^{t·b₁}.
pub fn flow(pt: &CutModuliPoint, t: f64) -> CutModuliPoint {
    CutModuliPoint {
        g: pt.g,
        a1: pt.a1.mul(pt.b1.scale(t).exp()),
        a2: pt.a2,
        b1: pt.b1,
        b2: pt.b2,
        pairs: pt.pairs.clone(),
    }
}

/// Gluing at the zero level of the moment: requires b₁ = b₂ and produces
/// (θ = g, A = A₁A₂, B̃ = A₂⁻¹ e^{b₁} A₂, U₂, V₂, …).
pub fn glue(pt: &CutModuliPoint, tol: &Tol) -> Result<ModuliPoint, ModuliError> {
    let phi = gluing_moment(pt).norm();
    if phi > tol.relation {
        return Err(ModuliError::MomentNotZero { norm: phi });
    }
    let a = pt.a1.mul(pt.a2);
    let b_tilde = pt.b1.exp().conj_by(pt.a2.inv());
    let mut hol = vec![a, b_tilde];
    for (u, v) in &pt.pairs {
        hol.push(*u);
        hol.push(*v);
    }
    ModuliPoint::new(pt.g, HolonomyPoint::new(hol).expect("even length"), tol)
}

/// Canonical section of the reduction: A₁ = A, A₂ = I, b₁ = b₂ = log(B̃).
/// Fails on the complement locus B̃ = −I.
pub fn unglue(m: &ModuliPoint) -> Result<CutModuliPoint, ModuliError> {
    if m.genus() == 0 {
        return Err(ModuliError::OnComplementCMinus);
    }
    let hol = m.holonomies();
    let b_tilde = hol.beta(0);
    let b1 = b_tilde.log().map_err(|_| ModuliError::OnComplementCMinus)?;
    let pairs = (1..m.genus())
        .map(|k| (hol.alpha(k), hol.beta(k)))
        .collect();
    Ok(CutModuliPoint {
        g: m.theta(),
        a1: hol.alpha(0),
        a2: Su2::IDENTITY,
        b1,
        b2: b1,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::{evaluate, twist_substitution, StandardCurve};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: Tol = Tol::new(1e-12, 1e-9, 1e-8);

    #[test]
    fn trivial_point_is_valid() {
        let pt = ModuliPoint::trivial();
        assert_eq!(pt.genus(), 0);
        assert!(pt.relation_residual() < 1e-15);
    }

    #[test]
    fn membership_rejects_boundary_minus_identity() {
        // A pair with [A,B] = −I cannot be completed to a valid point: any
        // θ with exp(θ) = −I has |θ| = π√2, which membership excludes.
        let i = Su2::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let j = Su2::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let hol = HolonomyPoint::new(vec![i, j]).unwrap();
        assert!(ModuliPoint::from_holonomies(hol.clone()).is_err());
        let theta = Su2Vector::new(0.0, 0.0, std::f64::consts::PI);
        assert!(matches!(
            ModuliPoint::new(theta, hol, &TOL),
            Err(ModuliError::OutsideMembership { .. })
        ));
    }

    #[test]
    fn membership_accepts_interior_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let pt = ModuliPoint::random(2, &mut rng);
            assert!(pt.theta().norm() < PI_SQRT2);
            assert!(pt.relation_residual() < 1e-10);
        }
    }

    /// Genus-1 pair whose commutator has the requested conjugacy angle,
    /// found by bisection in the two-rotation family.
    fn pair_with_commutator_angle(target: f64) -> (Su2, Su2) {
        let at = |t: f64| {
            let a = Su2::from_unnormalized(t.cos(), t.sin(), 0.0, 0.0);
            let b = Su2::from_unnormalized(t.cos(), 0.0, t.sin(), 0.0);
            (a, b)
        };
        let angle = |t: f64| {
            let (a, b) = at(t);
            Su2::commutator(a, b).conjugacy_angle()
        };
        let (mut lo, mut hi) = (0.0f64, std::f64::consts::FRAC_PI_2);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if angle(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi))
    }

    #[test]
    fn membership_threshold_from_both_sides() {
        // just inside: commutator angle π − ε gives |θ| just below π√2
        let eps = 1e-4;
        let (a, b) = pair_with_commutator_angle(std::f64::consts::PI - eps);
        let hol = HolonomyPoint::new(vec![a, b]).unwrap();
        let pt = ModuliPoint::from_holonomies(hol).unwrap();
        assert!(pt.theta().norm() < PI_SQRT2);
        assert!(pt.theta().norm() > PI_SQRT2 - 3.0 * eps);
        // at the threshold: commutator −I is rejected
        let (a, b) = (
            Su2::new(0.0, 1.0, 0.0, 0.0).unwrap(),
            Su2::new(0.0, 0.0, 1.0, 0.0).unwrap(),
        );
        assert!((Su2::commutator(a, b).conjugacy_angle() - std::f64::consts::PI).abs() < 1e-12);
        assert!(ModuliPoint::from_holonomies(HolonomyPoint::new(vec![a, b]).unwrap()).is_err());
    }

    #[test]
    fn moments_of_zero_b_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let a1 = Su2::haar(&mut rng);
        let a2 = Su2::haar(&mut rng);
        let pt = CutModuliPoint::new(
            Su2Vector::ZERO,
            a1,
            a2,
            Su2Vector::ZERO,
            Su2Vector::ZERO,
            vec![],
            &TOL,
        )
        .unwrap();
        let (_, phi1, phi2) = moments(&pt);
        assert!(phi1.euclid_norm() < 1e-15 && phi2.euclid_norm() < 1e-15);
    }

    #[test]
    fn gluing_moment_vanishes_iff_b_fields_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let pt = CutModuliPoint::random(2, &mut rng);
        assert_eq!(gluing_moment(&pt).euclid_norm() < 1e-12, pt.b1() == pt.b2());
        let pt0 = CutModuliPoint::random_on_zero_level(2, &mut rng);
        assert!(gluing_moment(&pt0).euclid_norm() < 1e-12);
    }

    #[test]
    fn moment_norm_matches_b1() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let pt = CutModuliPoint::random(1, &mut rng);
        let (_, phi1, _) = moments(&pt);
        assert_eq!(phi1.norm(), pt.b1().norm());
    }

    #[test]
    fn action_preserves_relation_and_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..1_000 {
            let pt = CutModuliPoint::random(2, &mut rng);
            let g = Su2::haar(&mut rng);
            let moved = su2_action(g, &pt);
            assert!(moved.relation_residual() < 1e-9);
            let (_, phi1, _) = moments(&moved);
            let (_, phi1_old, _) = moments(&pt);
            assert!(phi1.dist(g.adjoint(phi1_old)) < 1e-12);
        }
        let pt = CutModuliPoint::random(1, &mut rng);
        assert!(su2_action(Su2::IDENTITY, &pt).dist(&pt) < 1e-15);
    }

    #[test]
    fn flow_is_an_action_preserving_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..1_000 {
            let pt = CutModuliPoint::random(2, &mut rng);
            let t = rng.gen_range(-2.0..2.0);
            let s = rng.gen_range(-2.0..2.0);
            let once = flow(&pt, t);
            assert!(once.relation_residual() < 1e-9);
            let twice = flow(&once, s);
            let joint = flow(&pt, t + s);
            assert!(twice.dist(&joint) < 1e-10);
        }
        let pt = CutModuliPoint::random(1, &mut rng);
        assert!(flow(&pt, 0.0).dist(&pt) < 1e-15);
    }

    #[test]
    fn flow_commutes_with_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..500 {
            let pt = CutModuliPoint::random(1, &mut rng);
            let g = Su2::haar(&mut rng);
            let t = rng.gen_range(-1.0..1.0);
            let lhs = flow(&su2_action(g, &pt), t);
            let rhs = su2_action(g, &flow(&pt, t));
            assert!(lhs.dist(&rhs) < 1e-10);
        }
    }

    #[test]
    fn glue_of_canonical_section() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let a1 = Su2::haar(&mut rng);
        let xi = Su2Vector::random_in_ball(&mut rng, 0.8);
        let pt = CutModuliPoint::new(
            cut_boundary_product(a1, Su2::IDENTITY, xi, xi, &[])
                .log()
                .unwrap(),
            a1,
            Su2::IDENTITY,
            xi,
            xi,
            vec![],
            &TOL,
        )
        .unwrap();
        let glued = glue(&pt, &TOL).unwrap();
        assert!(glued.holonomies().alpha(0).dist(a1) < 1e-12);
        assert!(glued.holonomies().beta(0).dist(xi.exp()) < 1e-12);
    }

    #[test]
    fn glue_rejects_off_locus_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        loop {
            let pt = CutModuliPoint::random(1, &mut rng);
            if gluing_moment(&pt).norm() > 1e-3 {
                assert!(matches!(
                    glue(&pt, &TOL),
                    Err(ModuliError::MomentNotZero { .. })
                ));
                break;
            }
        }
    }

    #[test]
    fn glue_unglue_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for h in 1..=3 {
            for _ in 0..333 {
                let m = ModuliPoint::random(h, &mut rng);
                if m.holonomies().beta(0).dist(Su2::MINUS_IDENTITY) < 1e-6 {
                    continue;
                }
                let cut = unglue(&m).unwrap();
                assert!(
                    cut.relation_residual() < 1e-9,
                    "unglue landing off relation"
                );
                let back = glue(&cut, &TOL).unwrap();
                assert!(back.dist(&m) < 1e-10);
            }
        }
    }

    #[test]
    fn unglue_of_the_trivial_point() {
        let hol = HolonomyPoint::new(vec![Su2::IDENTITY, Su2::IDENTITY]).unwrap();
        let m = ModuliPoint::new(Su2Vector::ZERO, hol, &TOL).unwrap();
        let cut = unglue(&m).unwrap();
        assert!(cut.a1().dist(Su2::IDENTITY) < 1e-15);
        assert!(cut.a2().dist(Su2::IDENTITY) < 1e-15);
        assert!(cut.b1().euclid_norm() < 1e-15 && cut.b2().euclid_norm() < 1e-15);
        assert!(cut.g().euclid_norm() < 1e-15);
    }

    #[test]
    fn unglue_rejects_complement_locus() {
        let i = Su2::new(0.0, 1.0, 0.0, 0.0).unwrap();
        // [A, −I] = I, so θ = 0 gives a valid point with B̃ = −I.
        let hol = HolonomyPoint::new(vec![i, Su2::MINUS_IDENTITY]).unwrap();
        let m = ModuliPoint::new(Su2Vector::ZERO, hol, &TOL).unwrap();
        assert!(matches!(unglue(&m), Err(ModuliError::OnComplementCMinus)));
    }

    #[test]
    fn points_serialize_with_tuple_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let m = ModuliPoint::random(1, &mut rng);
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert!(v["theta"].as_array().unwrap().len() == 3);
        assert!(v["holonomies"][0].as_array().unwrap().len() == 4);
        let back: ModuliPoint = serde_json::from_value(v).unwrap();
        assert!(back.dist(&m) < 1e-12);

        let cut = CutModuliPoint::random(2, &mut rng);
        let v: serde_json::Value = serde_json::to_value(&cut).unwrap();
        for key in ["g", "b1", "b2"] {
            assert_eq!(v[key].as_array().unwrap().len(), 3);
        }
        for key in ["a1", "a2"] {
            assert_eq!(v[key].as_array().unwrap().len(), 4);
        }
        let back: CutModuliPoint = serde_json::from_value(v).unwrap();
        assert!(back.dist(&cut) < 1e-12);
    }

    #[test]
    fn unit_flow_realizes_beta_twist() {
        // glue ∘ flow(1) ∘ unglue acts as the β₁-twist substitution.
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let subst = twist_substitution(StandardCurve::Beta(0), 2).unwrap();
        for _ in 0..500 {
            let m = ModuliPoint::random(2, &mut rng);
            if m.holonomies().beta(0).dist(Su2::MINUS_IDENTITY) < 1e-3 {
                continue;
            }
            let twisted = glue(&flow(&unglue(&m).unwrap(), 1.0), &TOL).unwrap();
            for (gen, image) in subst.images().iter().enumerate() {
                let expected = evaluate(image, m.holonomies()).unwrap();
                let got = twisted.holonomies().holonomies()[gen];
                assert!(got.dist(expected) < 1e-10);
            }
            assert!(twisted.theta().dist(m.theta()) < 1e-12);
        }
    }
}
