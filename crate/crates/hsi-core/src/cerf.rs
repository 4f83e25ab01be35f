//! Words of elementary cobordisms with vertical boundary and ℤ/2 homology
//! class labels, the five local rewrite moves, greedy normalization, and the
//! translation into correspondence sequences.
//!
//! Class bits live on a fixed generator basis per piece: product-type pieces
//! (cylinder, diffeomorphism graph, reparametrization) carry 2h bits in the
//! a₁, b₁, …, a_h, b_h basis of their target surface; a 2-handle carries one
//! co-circle bit (which turns the attaching constraint into −I) followed by
//! the 2(h−1) bits of its target surface; a 1-handle carries the born-pair
//! bit followed by the 2h bits of its source surface. Class slides across a
//! cylinder are validated through explicit pushforward tables into the
//! union's basis.

use crate::corresp::{compose, elementary, CorrError, Correspondence, ElemShape};
use crate::homology::{Matrix, PlumbingTree};
use crate::words::{StandardCurve, Substitution, Word};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CerfError {
    #[error("pattern mismatch: {reason}")]
    PatternMismatch { reason: String },
    #[error("invalid word: {reason}")]
    InvalidWord { reason: String },
    #[error("unsupported family: {reason}")]
    UnsupportedFamily { reason: String },
    #[error(transparent)]
    Corr(#[from] CorrError),
}

fn mismatch<T>(reason: impl Into<String>) -> Result<T, CerfError> {
    Err(CerfError::PatternMismatch {
        reason: reason.into(),
    })
}

/// Kind of an elementary cobordism piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CobKind {
    Cylinder,
    /// 1-handle: births the pair at `pair` with its β-holonomy pinned.
    Handle1 {
        pair: usize,
    },
    /// 2-handle attached along the `side` curve of `pair`.
    Handle2 {
        pair: usize,
        side: StandardCurve,
    },
    /// Graph of a surface diffeomorphism.
    Diffeo {
        subst: Substitution,
    },
    /// Rotation of the boundary parametrization.
    Reparam {
        angle: f64,
    },
}

/// One elementary cobordism with its ℤ/2 class bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElemCob {
    pub kind: CobKind,
    pub source_genus: usize,
    pub class_bits: Vec<bool>,
}

impl ElemCob {
    pub fn cylinder(genus: usize) -> ElemCob {
        ElemCob {
            kind: CobKind::Cylinder,
            source_genus: genus,
            class_bits: vec![false; 2 * genus],
        }
    }

    pub fn target_genus(&self) -> usize {
        match self.kind {
            CobKind::Handle1 { .. } => self.source_genus + 1,
            CobKind::Handle2 { .. } => self.source_genus - 1,
            _ => self.source_genus,
        }
    }

    pub fn expected_bits(&self) -> usize {
        match self.kind {
            CobKind::Cylinder | CobKind::Diffeo { .. } | CobKind::Reparam { .. } => {
                2 * self.source_genus
            }
            CobKind::Handle1 { .. } => 1 + 2 * self.source_genus,
            CobKind::Handle2 { .. } => 1 + 2 * (self.source_genus - 1),
        }
    }

    pub fn is_zero_class(&self) -> bool {
        self.class_bits.iter().all(|&b| !b)
    }

    fn validate(&self) -> Result<(), CerfError> {
        match &self.kind {
            CobKind::Handle1 { pair } => {
                if *pair > self.source_genus {
                    return Err(CerfError::InvalidWord {
                        reason: format!(
                            "1-handle inserts at pair {pair} but the target has only {} pairs",
                            self.source_genus + 1
                        ),
                    });
                }
            }
            CobKind::Handle2 { pair, .. } => {
                if self.source_genus == 0 || *pair >= self.source_genus {
                    return Err(CerfError::InvalidWord {
                        reason: format!("2-handle along pair {pair} needs source genus > {pair}"),
                    });
                }
            }
            CobKind::Diffeo { subst } => {
                if subst.n_generators() != 2 * self.source_genus {
                    return Err(CerfError::InvalidWord {
                        reason: format!(
                            "substitution has {} images, genus {} needs {}",
                            subst.n_generators(),
                            self.source_genus,
                            2 * self.source_genus
                        ),
                    });
                }
            }
            _ => {}
        }
        if self.class_bits.len() != self.expected_bits() {
            return Err(CerfError::InvalidWord {
                reason: format!(
                    "piece carries {} class bits, expected {}",
                    self.class_bits.len(),
                    self.expected_bits()
                ),
            });
        }
        Ok(())
    }
}

/// A composable string of elementary cobordisms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CobWord {
    pub initial_genus: usize,
    pub pieces: Vec<ElemCob>,
}

impl CobWord {
    pub fn new(initial_genus: usize, pieces: Vec<ElemCob>) -> Result<CobWord, CerfError> {
        let w = CobWord {
            initial_genus,
            pieces,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), CerfError> {
        let mut genus = self.initial_genus;
        for (i, piece) in self.pieces.iter().enumerate() {
            if piece.source_genus != genus {
                return Err(CerfError::InvalidWord {
                    reason: format!(
                        "piece {i} starts at genus {} but the level is {genus}",
                        piece.source_genus
                    ),
                });
            }
            piece.validate()?;
            genus = piece.target_genus();
        }
        Ok(())
    }

    pub fn final_genus(&self) -> usize {
        self.pieces
            .last()
            .map_or(self.initial_genus, |p| p.target_genus())
    }

    /// Genus of the cut level before piece `i` (i may equal len).
    pub fn genus_at(&self, i: usize) -> usize {
        self.pieces[..i]
            .last()
            .map_or(self.initial_genus, |p| p.target_genus())
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Total class, pushed into the glued word's ℤ/2 homology. Handle pieces'
    /// through-handle bits and the co-circle bits are XOR-folded into one
    /// parity word over a stable basis (the maximal-genus frame); this is the
    /// conserved quantity of the normalization moves.
    pub fn total_class_parity(&self) -> u64 {
        let mut acc = 0u64;
        for p in &self.pieces {
            for (i, &b) in p.class_bits.iter().enumerate() {
                if b {
                    acc ^= 1u64 << (i % 63);
                }
            }
        }
        acc
    }
}

/// Translates a word piece-by-piece into correspondences.
pub fn to_correspondences(w: &CobWord) -> Result<Vec<Correspondence>, CerfError> {
    w.validate()?;
    w.pieces.iter().map(piece_correspondence).collect()
}

fn piece_correspondence(piece: &ElemCob) -> Result<Correspondence, CerfError> {
    let h = piece.source_genus;
    Ok(match &piece.kind {
        CobKind::Cylinder => elementary(&ElemShape::TrivialWithClass {
            genus: h,
            class: piece.class_bits.clone(),
        })?,
        CobKind::Diffeo { subst } => {
            let flips = elementary(&ElemShape::TrivialWithClass {
                genus: h,
                class: piece.class_bits.clone(),
            })?;
            let graph = elementary(&ElemShape::DiffeoGraph {
                genus: h,
                subst: subst.clone(),
            })?;
            compose(&flips, &graph)?
        }
        CobKind::Reparam { angle } => {
            let flips = elementary(&ElemShape::TrivialWithClass {
                genus: h,
                class: piece.class_bits.clone(),
            })?;
            let rot = elementary(&ElemShape::Reparam {
                genus: h,
                angle: *angle,
            })?;
            compose(&flips, &rot)?
        }
        CobKind::Handle1 { pair } => {
            let sign = if piece.class_bits[0] { -1 } else { 1 };
            let born = elementary(&ElemShape::OneHandle {
                genus: h,
                curve: StandardCurve::Beta(*pair),
                sign,
            })?;
            let through = elementary(&ElemShape::TrivialWithClass {
                genus: h,
                class: piece.class_bits[1..].to_vec(),
            })?;
            compose(&through, &born)?
        }
        CobKind::Handle2 { pair, side } => {
            let sign = if piece.class_bits[0] { -1 } else { 1 };
            let kill = elementary(&ElemShape::TwoHandle {
                genus: h,
                curve: match side {
                    StandardCurve::Alpha(_) => StandardCurve::Alpha(*pair),
                    StandardCurve::Beta(_) => StandardCurve::Beta(*pair),
                },
                sign,
            })?;
            let through = elementary(&ElemShape::TrivialWithClass {
                genus: h - 1,
                class: piece.class_bits[1..].to_vec(),
            })?;
            compose(&kill, &through)?
        }
    })
}

/// Folds a correspondence sequence by symbolic composition (left to right).
pub fn compose_all(seq: &[Correspondence]) -> Result<Correspondence, CorrError> {
    let mut iter = seq.iter();
    let Some(first) = iter.next() else {
        return Err(CorrError::NotComposable {
            reason: "empty sequence".into(),
        });
    };
    let mut acc = first.clone();
    for c in iter {
        acc = compose(&acc, c)?;
    }
    Ok(acc)
}

/// Alternative presentations of a product cobordism, used by the
/// diffeomorphism-equivalence move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductForm {
    Cylinder,
    IdentityDiffeo,
    ZeroReparam,
}

/// The five Cerf moves as local rewrites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum CerfMove {
    /// (i) diffeomorphism equivalence, restricted to relabeling a product
    /// piece between its equivalent presentations.
    Relabel { to: ProductForm },
    /// (ii) insert a zero-class cylinder before position `pos`.
    CylinderCreate,
    /// (ii) remove the zero-class cylinder at position `pos`.
    CylinderCancel,
    /// (iii) insert a cancelling 1-handle/2-handle pair at position `pos`.
    BirthDeathCreate { pair: usize },
    /// (iii) cancel the birth-death pair at positions `pos`, `pos+1`,
    /// leaving a cylinder.
    BirthDeathCancel,
    /// (iv) switch two adjacent handle attachments along disjoint curves.
    CriticalSwitch,
    /// (v) redistribute class bits across an adjacent cylinder.
    ClassSlide { left: Vec<bool>, right: Vec<bool> },
}

/// Applies a move at a position; the input word is unchanged on error.
pub fn apply_move(w: &CobWord, mv: &CerfMove, pos: usize) -> Result<CobWord, CerfError> {
    let mut out = w.clone();
    match mv {
        CerfMove::Relabel { to } => {
            let Some(piece) = out.pieces.get_mut(pos) else {
                return mismatch(format!("position {pos} out of range"));
            };
            let is_product = match &piece.kind {
                CobKind::Cylinder => true,
                CobKind::Diffeo { subst } => subst.is_identity(),
                CobKind::Reparam { angle } => *angle == 0.0,
                _ => false,
            };
            if !is_product {
                return mismatch("only product pieces can be relabeled");
            }
            piece.kind = match to {
                ProductForm::Cylinder => CobKind::Cylinder,
                ProductForm::IdentityDiffeo => CobKind::Diffeo {
                    subst: Substitution::identity(piece.source_genus),
                },
                ProductForm::ZeroReparam => CobKind::Reparam { angle: 0.0 },
            };
        }
        CerfMove::CylinderCreate => {
            if pos > out.pieces.len() {
                return mismatch(format!("position {pos} out of range"));
            }
            let genus = out.genus_at(pos);
            out.pieces.insert(pos, ElemCob::cylinder(genus));
        }
        CerfMove::CylinderCancel => {
            let Some(piece) = out.pieces.get(pos) else {
                return mismatch(format!("position {pos} out of range"));
            };
            if !matches!(piece.kind, CobKind::Cylinder) {
                return mismatch("piece is not a cylinder");
            }
            if !piece.is_zero_class() {
                return mismatch("cylinder carries a nonzero class");
            }
            out.pieces.remove(pos);
        }
        CerfMove::BirthDeathCreate { pair } => {
            if pos > out.pieces.len() {
                return mismatch(format!("position {pos} out of range"));
            }
            let genus = out.genus_at(pos);
            if *pair > genus {
                return mismatch(format!("pair {pair} out of range at genus {genus}"));
            }
            let birth = ElemCob {
                kind: CobKind::Handle1 { pair: *pair },
                source_genus: genus,
                class_bits: vec![false; 1 + 2 * genus],
            };
            let death = ElemCob {
                kind: CobKind::Handle2 {
                    pair: *pair,
                    side: StandardCurve::Alpha(*pair),
                },
                source_genus: genus + 1,
                class_bits: vec![false; 1 + 2 * genus],
            };
            out.pieces.insert(pos, death);
            out.pieces.insert(pos, birth);
        }
        CerfMove::BirthDeathCancel => {
            if pos + 1 >= out.pieces.len() {
                return mismatch("need two adjacent pieces");
            }
            let (birth, death) = (&out.pieces[pos], &out.pieces[pos + 1]);
            let CobKind::Handle1 { pair: bp } = birth.kind else {
                return mismatch("first piece is not a 1-handle");
            };
            let CobKind::Handle2 { pair: dp, side } = death.kind else {
                return mismatch("second piece is not a 2-handle");
            };
            if bp != dp {
                return mismatch("handles act on different pairs");
            }
            if !matches!(side, StandardCurve::Alpha(_)) {
                return mismatch(
                    "the attaching circle misses the belt sphere: not a birth-death pair",
                );
            }
            if !birth.is_zero_class() || !death.is_zero_class() {
                return mismatch("birth-death cancellation needs zero classes");
            }
            let genus = birth.source_genus;
            out.pieces.splice(pos..pos + 2, [ElemCob::cylinder(genus)]);
        }
        CerfMove::CriticalSwitch => {
            if pos + 1 >= out.pieces.len() {
                return mismatch("need two adjacent pieces");
            }
            let (first, second) = (out.pieces[pos].clone(), out.pieces[pos + 1].clone());
            if !first.is_zero_class() || !second.is_zero_class() {
                return mismatch("critical point switch needs zero classes");
            }
            let rewritten = switch_pieces(&first, &second)?;
            out.pieces.splice(pos..pos + 2, rewritten);
        }
        CerfMove::ClassSlide { left, right } => {
            if pos + 1 >= out.pieces.len() {
                return mismatch("need two adjacent pieces");
            }
            let (l, r) = (out.pieces[pos].clone(), out.pieces[pos + 1].clone());
            if !matches!(l.kind, CobKind::Cylinder) && !matches!(r.kind, CobKind::Cylinder) {
                return mismatch("class slides need an adjacent cylinder");
            }
            if left.len() != l.class_bits.len() || right.len() != r.class_bits.len() {
                return mismatch("proposed bit vectors have the wrong lengths");
            }
            let before = union_class(&l, &r, &l.class_bits, &r.class_bits)?;
            let after = union_class(&l, &r, left, right)?;
            if before != after {
                return mismatch("class sums differ in the union");
            }
            out.pieces[pos].class_bits = left.clone();
            out.pieces[pos + 1].class_bits = right.clone();
        }
    }
    out.validate()?;
    Ok(out)
}

/// Reindexed swap of two adjacent handle pieces with disjoint attachments.
fn switch_pieces(first: &ElemCob, second: &ElemCob) -> Result<Vec<ElemCob>, CerfError> {
    let h = first.source_genus;
    match (&first.kind, &second.kind) {
        (CobKind::Handle2 { pair: j, side: s1 }, CobKind::Handle2 { pair: k, side: s2 }) => {
            let k_orig = if *k < *j { *k } else { *k + 1 };
            let j_after = if *j > k_orig { *j - 1 } else { *j };
            Ok(vec![
                ElemCob {
                    kind: CobKind::Handle2 {
                        pair: k_orig,
                        side: reindex_curve(*s2, k_orig),
                    },
                    source_genus: h,
                    class_bits: vec![false; 1 + 2 * (h - 1)],
                },
                ElemCob {
                    kind: CobKind::Handle2 {
                        pair: j_after,
                        side: reindex_curve(*s1, j_after),
                    },
                    source_genus: h - 1,
                    class_bits: vec![false; 1 + 2 * (h - 2)],
                },
            ])
        }
        (CobKind::Handle1 { pair: j }, CobKind::Handle1 { pair: k }) => {
            let (k_new, j_new) = if *k <= *j { (*k, *j + 1) } else { (*k - 1, *j) };
            Ok(vec![
                ElemCob {
                    kind: CobKind::Handle1 { pair: k_new },
                    source_genus: h,
                    class_bits: vec![false; 1 + 2 * h],
                },
                ElemCob {
                    kind: CobKind::Handle1 { pair: j_new },
                    source_genus: h + 1,
                    class_bits: vec![false; 1 + 2 * (h + 1)],
                },
            ])
        }
        (CobKind::Handle1 { pair: j }, CobKind::Handle2 { pair: k, side }) => {
            if *k == *j {
                return mismatch("the handles interact: this is a birth-death pattern");
            }
            let (k_new, j_new) = if *k < *j { (*k, *j - 1) } else { (*k - 1, *j) };
            Ok(vec![
                ElemCob {
                    kind: CobKind::Handle2 {
                        pair: k_new,
                        side: reindex_curve(*side, k_new),
                    },
                    source_genus: h,
                    class_bits: vec![false; 1 + 2 * (h - 1)],
                },
                ElemCob {
                    kind: CobKind::Handle1 { pair: j_new },
                    source_genus: h - 1,
                    class_bits: vec![false; 1 + 2 * (h - 1)],
                },
            ])
        }
        (CobKind::Handle2 { pair: j, side }, CobKind::Handle1 { pair: k }) => {
            let k_new = if *k < *j { *k } else { *k + 1 };
            let j_new = if k_new <= *j { *j + 1 } else { *j };
            Ok(vec![
                ElemCob {
                    kind: CobKind::Handle1 { pair: k_new },
                    source_genus: h,
                    class_bits: vec![false; 1 + 2 * h],
                },
                ElemCob {
                    kind: CobKind::Handle2 {
                        pair: j_new,
                        side: reindex_curve(*side, j_new),
                    },
                    source_genus: h + 1,
                    class_bits: vec![false; 1 + 2 * h],
                },
            ])
        }
        _ => mismatch("critical point switch needs two handle pieces"),
    }
}

fn reindex_curve(side: StandardCurve, pair: usize) -> StandardCurve {
    match side {
        StandardCurve::Alpha(_) => StandardCurve::Alpha(pair),
        StandardCurve::Beta(_) => StandardCurve::Beta(pair),
    }
}

/// Pushes the classes of two adjacent pieces into the union cobordism's
/// basis and returns the combined parity vector.
fn union_class(
    l: &ElemCob,
    r: &ElemCob,
    lbits: &[bool],
    rbits: &[bool],
) -> Result<Vec<bool>, CerfError> {
    let push = |out: &mut Vec<bool>, idx: Option<usize>, bit: bool| {
        if let (Some(i), true) = (idx, bit) {
            out[i] ^= true;
        }
    };
    match (&l.kind, &r.kind) {
        (CobKind::Cylinder, CobKind::Cylinder)
        | (CobKind::Cylinder, CobKind::Reparam { .. })
        | (CobKind::Reparam { .. }, CobKind::Cylinder) => {
            Ok(lbits.iter().zip(rbits).map(|(a, b)| a ^ b).collect())
        }
        (CobKind::Cylinder, CobKind::Diffeo { .. }) => {
            // a diffeomorphism piece applies its flips before the
            // substitution, so both bit sets already live in its source
            // frame
            Ok(lbits.iter().zip(rbits).map(|(a, b)| a ^ b).collect())
        }
        (CobKind::Diffeo { subst }, CobKind::Cylinder) => {
            // the cylinder's bits live in the target frame; pull them back
            // through the substitution's mod-2 action (class γ in the target
            // basis is Σ γ_g · ab(image of g) in the source basis)
            let n = lbits.len();
            let mut out = lbits.to_vec();
            for (g, &bit) in rbits.iter().enumerate() {
                if !bit {
                    continue;
                }
                for (source, coeff) in subst.images()[g].abelianized(n).iter().enumerate() {
                    if coeff.rem_euclid(2) == 1 {
                        out[source] ^= true;
                    }
                }
            }
            Ok(out)
        }
        (CobKind::Cylinder, CobKind::Handle2 { pair, side }) => {
            // union basis: (co-circle, target handles)
            let h = l.source_genus;
            let mut out = vec![false; 1 + 2 * (h - 1)];
            let killed = side.generator();
            let dual = side.dual_generator();
            for (g, &bit) in lbits.iter().enumerate() {
                let target = if g == killed {
                    None
                } else if g == dual {
                    Some(0)
                } else {
                    let p = g / 2;
                    let new_pair = if p < *pair { p } else { p - 1 };
                    Some(1 + 2 * new_pair + g % 2)
                };
                push(&mut out, target, bit);
            }
            for (i, &b) in rbits.iter().enumerate() {
                out[i] ^= b;
            }
            Ok(out)
        }
        (CobKind::Handle2 { .. }, CobKind::Cylinder) => {
            let mut out = lbits.to_vec();
            for (i, &b) in rbits.iter().enumerate() {
                out[1 + i] ^= b;
            }
            Ok(out)
        }
        (CobKind::Cylinder, CobKind::Handle1 { .. }) => {
            let mut out = rbits.to_vec();
            for (i, &b) in lbits.iter().enumerate() {
                out[1 + i] ^= b;
            }
            Ok(out)
        }
        (CobKind::Handle1 { pair }, CobKind::Cylinder) => {
            // the born pair's α-class is the co-curve; its β-class dies
            let mut out = lbits.to_vec();
            let born_a = 2 * pair;
            let born_b = 2 * pair + 1;
            for (g, &bit) in rbits.iter().enumerate() {
                let target = if g == born_a {
                    Some(0)
                } else if g == born_b {
                    None
                } else {
                    let p = g / 2;
                    let old_pair = if p < *pair { p } else { p - 1 };
                    Some(1 + 2 * old_pair + g % 2)
                };
                push(&mut out, target, bit);
            }
            Ok(out)
        }
        _ => mismatch("no pushforward table for this pair of pieces"),
    }
}

/// Greedy normalization: repeatedly drop zero-class cylinders and cancel
/// adjacent zero-class birth-death pairs. Idempotent; no canonicity beyond
/// that is claimed.
pub fn normalize(w: &CobWord) -> CobWord {
    let mut out = w.clone();
    loop {
        let mut changed = false;
        // drop zero-class cylinders
        let mut i = 0;
        while i < out.pieces.len() {
            let p = &out.pieces[i];
            if matches!(p.kind, CobKind::Cylinder) && p.is_zero_class() {
                out.pieces.remove(i);
                changed = true;
            } else {
                i += 1;
            }
        }
        // cancel birth-death pairs
        let mut i = 0;
        while i + 1 < out.pieces.len() {
            match apply_move(&out, &CerfMove::BirthDeathCancel, i) {
                Ok(cancelled) => {
                    out = cancelled;
                    changed = true;
                }
                Err(_) => i += 1,
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Families with built-in words from the disc to the disc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HeegaardFamily {
    Lens { p: u64, q: i64 },
    S2xS1,
    ConnectedSum { summands: Vec<HeegaardFamily> },
    Plumbing { tree: PlumbingTree },
}

/// Builds the genus-0 to genus-0 word of a family: 1-handles up to the
/// splitting genus, the gluing diffeomorphism, then 2-handles back down.
/// The endpoint Lagrangians are the handlebody ones: all β-holonomies
/// pinned on one side, the glued relation words pinned on the other.
pub fn heegaard_word(family: &HeegaardFamily) -> Result<CobWord, CerfError> {
    match family {
        HeegaardFamily::Lens { p, q } => {
            if *p == 0 {
                return Err(CerfError::UnsupportedFamily {
                    reason: "p = 0 is the sphere-times-circle family".into(),
                });
            }
            if crate::homology::gcd_u(*p, q.unsigned_abs()) != 1 {
                return Err(CerfError::UnsupportedFamily {
                    reason: format!("gcd({p}, {q}) must be 1"),
                });
            }
            let subst = gluing_substitution(&[(*p as i64, *q)])?;
            CobWord::new(
                0,
                vec![
                    ElemCob {
                        kind: CobKind::Handle1 { pair: 0 },
                        source_genus: 0,
                        class_bits: vec![false],
                    },
                    ElemCob {
                        kind: CobKind::Diffeo { subst },
                        source_genus: 1,
                        class_bits: vec![false; 2],
                    },
                    ElemCob {
                        kind: CobKind::Handle2 {
                            pair: 0,
                            side: StandardCurve::Beta(0),
                        },
                        source_genus: 1,
                        class_bits: vec![false],
                    },
                ],
            )
        }
        HeegaardFamily::S2xS1 => CobWord::new(
            0,
            vec![
                ElemCob {
                    kind: CobKind::Handle1 { pair: 0 },
                    source_genus: 0,
                    class_bits: vec![false],
                },
                ElemCob {
                    kind: CobKind::Handle2 {
                        pair: 0,
                        side: StandardCurve::Beta(0),
                    },
                    source_genus: 1,
                    class_bits: vec![false],
                },
            ],
        ),
        HeegaardFamily::ConnectedSum { summands } => {
            let mut data = Vec::new();
            for s in summands {
                match s {
                    HeegaardFamily::Lens { p, q } => {
                        if *p == 0 || crate::homology::gcd_u(*p, q.unsigned_abs()) != 1 {
                            return Err(CerfError::UnsupportedFamily {
                                reason: format!("invalid lens summand ({p}, {q})"),
                            });
                        }
                        data.push((*p as i64, *q));
                    }
                    HeegaardFamily::S2xS1 => data.push((0, -1)),
                    _ => {
                        return Err(CerfError::UnsupportedFamily {
                            reason: "connected sums take genus-1 summands".into(),
                        })
                    }
                }
            }
            let subst = gluing_substitution(&data)?;
            Ok(stacked_word(data.len(), subst)?)
        }
        HeegaardFamily::Plumbing { tree } => {
            let n = tree.n_vertices();
            if n == 0 {
                return Err(CerfError::UnsupportedFamily {
                    reason: "empty plumbing".into(),
                });
            }
            let mut images: Vec<Word> = (0..2 * n).map(|g| Word::generator(g, 1)).collect();
            for v in 0..n {
                let mut relation = Word::generator(2 * v, tree.weights[v]);
                for &(a, b) in &tree.edges {
                    let w = if a == v {
                        Some(b)
                    } else if b == v {
                        Some(a)
                    } else {
                        None
                    };
                    if let Some(w) = w {
                        relation = relation.concat(&Word::generator(2 * w, 1));
                    }
                }
                images[2 * v + 1] = relation;
            }
            stacked_word(n, Substitution::new(images))
        }
    }
}

/// births to genus g, one diffeomorphism, deaths back to 0.
fn stacked_word(g: usize, subst: Substitution) -> Result<CobWord, CerfError> {
    let mut pieces = Vec::new();
    for k in 0..g {
        pieces.push(ElemCob {
            kind: CobKind::Handle1 { pair: k },
            source_genus: k,
            class_bits: vec![false; 1 + 2 * k],
        });
    }
    pieces.push(ElemCob {
        kind: CobKind::Diffeo { subst },
        source_genus: g,
        class_bits: vec![false; 2 * g],
    });
    for k in (0..g).rev() {
        pieces.push(ElemCob {
            kind: CobKind::Handle2 {
                pair: k,
                side: StandardCurve::Beta(k),
            },
            source_genus: k + 1,
            class_bits: vec![false; 1 + 2 * k],
        });
    }
    CobWord::new(0, pieces)
}

/// Builds a mapping-class substitution out of standard twists whose
/// abelianized β-images are (pᵢ, −qᵢ) on the i-th pair. Twist products keep
/// the boundary word fixed, so the resulting graph is an honest
/// moduli-space diffeomorphism.
pub fn gluing_substitution(data: &[(i64, i64)]) -> Result<Substitution, CerfError> {
    let g = data.len();
    let mut blocks: Vec<Vec<TwistGen>> = Vec::new();
    for &(p, q) in data {
        blocks.push(twist_word_for(p, -q)?);
    }
    // compose per-pair twist substitutions into one genus-g substitution
    let mut subst = Substitution::identity(g);
    for (pair, gens) in blocks.iter().enumerate() {
        for gen in gens.iter().rev() {
            let step = gen.substitution(pair, g);
            subst = Substitution::compose(&subst, &step).map_err(CorrError::from)?;
        }
    }
    // exactness check on the abelianized images
    for (pair, &(p, q)) in data.iter().enumerate() {
        let ab = subst.images()[2 * pair + 1].abelianized(2 * g);
        if ab[2 * pair] != p || ab[2 * pair + 1] != -q {
            return Err(CerfError::UnsupportedFamily {
                reason: format!(
                    "twist expansion drifted: wanted ({p}, {}), got ({}, {})",
                    -q,
                    ab[2 * pair],
                    ab[2 * pair + 1]
                ),
            });
        }
    }
    Ok(subst)
}

#[derive(Debug, Clone, Copy)]
enum TwistGen {
    /// α ↦ αβⁿ
    BetaPower(i64),
    /// β ↦ βαⁿ
    AlphaPower(i64),
}

impl TwistGen {
    fn substitution(self, pair: usize, genus: usize) -> Substitution {
        let a = 2 * pair;
        let b = 2 * pair + 1;
        let mut images: Vec<Word> = (0..2 * genus).map(|g| Word::generator(g, 1)).collect();
        match self {
            TwistGen::BetaPower(n) => {
                images[a] = Word::generator(a, 1).concat(&Word::generator(b, n));
            }
            TwistGen::AlphaPower(n) => {
                images[b] = Word::generator(b, 1).concat(&Word::generator(a, n));
            }
        }
        Substitution::new(images)
    }

    /// Matrix action on (α-coefficient, β-coefficient) columns.
    fn apply_inverse(self, v: (i64, i64)) -> (i64, i64) {
        match self {
            TwistGen::BetaPower(n) => (v.0, v.1 - n * v.0),
            TwistGen::AlphaPower(n) => (v.0 - n * v.1, v.1),
        }
    }
}

fn round_div(a: i64, b: i64) -> i64 {
    let q = a / b;
    let r = a % b;
    if 2 * r.abs() >= b.abs() {
        q + if (a < 0) == (b < 0) { 1 } else { -1 }
    } else {
        q
    }
}

/// Euclid-style expansion: a left-to-right list of twist generators whose
/// composite sends the β-generator to a class with abelianization (a, b).
fn twist_word_for(a: i64, b: i64) -> Result<Vec<TwistGen>, CerfError> {
    let mut v = (a, b);
    let mut gens: Vec<TwistGen> = Vec::new();
    let rotation = [
        TwistGen::BetaPower(1),
        TwistGen::AlphaPower(-1),
        TwistGen::BetaPower(1),
    ];
    let mut guard = 0;
    loop {
        guard += 1;
        if guard > 512 {
            return Err(CerfError::UnsupportedFamily {
                reason: format!("twist expansion did not terminate for ({a}, {b})"),
            });
        }
        if v.0 == 0 {
            break;
        }
        if v.1 != 0 && v.0.abs() >= v.1.abs() {
            // peel an α-power: v0 shrinks mod v1
            let gen = TwistGen::AlphaPower(round_div(v.0, v.1));
            v = gen.apply_inverse(v);
            gens.push(gen);
        } else if v.1 != 0 {
            let gen = TwistGen::BetaPower(round_div(v.1, v.0));
            v = gen.apply_inverse(v);
            gens.push(gen);
        } else {
            // v = (±1, 0): one quarter rotation lands on the β-axis
            if v.0.abs() != 1 {
                return Err(CerfError::UnsupportedFamily {
                    reason: format!("({a}, {b}) is not primitive"),
                });
            }
            for gen in rotation.iter().rev() {
                v = gen.apply_inverse(v);
            }
            gens.extend_from_slice(&rotation);
        }
    }
    if v.1 == -1 {
        // half rotation flips the sign
        for _ in 0..2 {
            for gen in rotation.iter().rev() {
                v = gen.apply_inverse(v);
            }
            gens.extend_from_slice(&rotation);
        }
    }
    if v != (0, 1) {
        return Err(CerfError::UnsupportedFamily {
            reason: format!("twist expansion stalled at {v:?} for ({a}, {b})"),
        });
    }
    Ok(gens)
}

/// Linking data read off a stacked word's diffeomorphism piece: row v is the
/// α-exponent vector of the β_v image.
pub fn word_linking_matrix(w: &CobWord) -> Option<Matrix> {
    let diffeo = w.pieces.iter().find_map(|p| match &p.kind {
        CobKind::Diffeo { subst } => Some(subst),
        _ => None,
    })?;
    let g = diffeo.n_generators() / 2;
    let mut m = vec![vec![0i64; g]; g];
    for v in 0..g {
        let ab = diffeo.images()[2 * v + 1].abelianized(2 * g);
        for w_idx in 0..g {
            m[v][w_idx] = ab[2 * w_idx];
        }
    }
    Some(m)
}
