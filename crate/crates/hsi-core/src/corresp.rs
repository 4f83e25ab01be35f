//! Symbolic Lagrangian correspondences of elementary cobordisms.
//!
//! Every supported correspondence is a sandwich `pre → op → post`: a graph
//! part acting on the source moduli space, an optional handle operation
//! (attach = constrain-and-drop handle pairs, birth = insert pairs with one
//! constrained holonomy and one free parameter) and a graph part on the
//! target. Graphs are substitutions with per-generator sign flips and a
//! boundary-rotation angle. Composition stays inside this closed-form
//! fragment; anything else is reported as not composable rather than
//! approximated.

use crate::moduli::{commutator_product, ModuliError, ModuliPoint};
use crate::su2::{Su2, Su2Vector};
use crate::tol::Tol;
use crate::words::{evaluate, HolonomyPoint, StandardCurve, Substitution, Word, WordError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrError {
    #[error("genus mismatch: point has genus {point}, correspondence expects {expected}")]
    GenusMismatch { point: usize, expected: usize },
    #[error("unsupported shape: {reason}")]
    UnsupportedShape { reason: String },
    #[error("not composable: {reason}")]
    NotComposable { reason: String },
    #[error("invalid parameters: {reason}")]
    InvalidParams { reason: String },
    #[error("family needs {expected} parameters, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Moduli(#[from] ModuliError),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// Word with a central sign: evaluates to ±(word value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedWord {
    pub sign: i8,
    pub word: Word,
}

impl SignedWord {
    pub fn generator(g: usize) -> SignedWord {
        SignedWord {
            sign: 1,
            word: Word::generator(g, 1),
        }
    }
}

/// Graph of a moduli-space diffeomorphism: θ is fixed, each holonomy goes to
/// ±(word in the old holonomies), then everything is conjugated by
/// exp(rotation·θ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphData {
    pub images: Vec<SignedWord>,
    pub rotation: f64,
}

impl GraphData {
    pub fn identity(genus: usize) -> GraphData {
        GraphData {
            images: (0..2 * genus).map(SignedWord::generator).collect(),
            rotation: 0.0,
        }
    }

    pub fn genus(&self) -> usize {
        self.images.len() / 2
    }

    pub fn from_substitution(subst: &Substitution) -> GraphData {
        GraphData {
            images: subst
                .images()
                .iter()
                .map(|w| SignedWord {
                    sign: 1,
                    word: w.clone(),
                })
                .collect(),
            rotation: 0.0,
        }
    }

    /// Sign-flip table → graph (flip holonomy g iff flips[g]).
    pub fn from_flips(flips: &[bool]) -> GraphData {
        GraphData {
            images: flips
                .iter()
                .enumerate()
                .map(|(g, &f)| SignedWord {
                    sign: if f { -1 } else { 1 },
                    word: Word::generator(g, 1),
                })
                .collect(),
            rotation: 0.0,
        }
    }

    pub fn rotation(genus: usize, angle: f64) -> GraphData {
        let mut g = GraphData::identity(genus);
        g.rotation = angle;
        g
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == 0.0
            && self
                .images
                .iter()
                .enumerate()
                .all(|(g, sw)| sw.sign == 1 && sw.word == Word::generator(g, 1))
    }

    /// Some(flip table) when the graph permutes no generators and applies no
    /// substitution: only signs (rotation allowed, returned separately).
    pub fn flips_only(&self) -> Option<(Vec<i8>, f64)> {
        let mut flips = Vec::with_capacity(self.images.len());
        for (g, sw) in self.images.iter().enumerate() {
            if sw.word != Word::generator(g, 1) {
                return None;
            }
            flips.push(sw.sign);
        }
        Some((flips, self.rotation))
    }

    /// `first` then `second` as maps; signs propagate through substitution
    /// because ±I is central.
    pub fn compose(first: &GraphData, second: &GraphData) -> Result<GraphData, CorrError> {
        let first_subst =
            Substitution::new(first.images.iter().map(|sw| sw.word.clone()).collect());
        let mut images = Vec::with_capacity(second.images.len());
        for sw in &second.images {
            let mut sign = sw.sign;
            for l in sw.word.letters() {
                let inner = first.images.get(l.gen).ok_or(CorrError::UnsupportedShape {
                    reason: format!("generator {} missing in graph composition", l.gen),
                })?;
                sign *= inner.sign;
            }
            images.push(SignedWord {
                sign,
                word: first_subst.apply(&sw.word)?,
            });
        }
        Ok(GraphData {
            images,
            rotation: first.rotation + second.rotation,
        })
    }

    /// Applies the graph map. The image θ is recomputed from the image
    /// holonomies: sign flips and boundary rotations leave it unchanged,
    /// while base-path changes (global conjugations) rotate it along.
    pub fn apply(&self, pt: &ModuliPoint) -> Result<ModuliPoint, CorrError> {
        if pt.genus() != self.genus() {
            return Err(CorrError::GenusMismatch {
                point: pt.genus(),
                expected: self.genus(),
            });
        }
        let mut hol = Vec::with_capacity(self.images.len());
        for sw in &self.images {
            let mut value = evaluate(&sw.word, pt.holonomies())?;
            if sw.sign < 0 {
                value = value.neg();
            }
            hol.push(value);
        }
        if self.rotation != 0.0 {
            let k = pt.theta().scale(self.rotation).exp();
            for h in hol.iter_mut() {
                *h = h.conj_by(k);
            }
        }
        Ok(ModuliPoint::from_holonomies(
            HolonomyPoint::new(hol).expect("even"),
        )?)
    }
}

/// Constrain one side of a handle pair to sign·I and drop the pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairKill {
    pub pair: usize,
    pub side: HandleSide,
    pub sign: i8,
}

/// Insert a fresh handle pair whose `side` holonomy is sign·I; the other
/// side is a free SU(2) parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBirth {
    pub pair: usize,
    pub side: HandleSide,
    pub sign: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandleSide {
    Alpha,
    Beta,
}

impl HandleSide {
    fn offset(self) -> usize {
        match self {
            HandleSide::Alpha => 0,
            HandleSide::Beta => 1,
        }
    }
}

impl From<StandardCurve> for HandleSide {
    fn from(c: StandardCurve) -> HandleSide {
        match c {
            StandardCurve::Alpha(_) => HandleSide::Alpha,
            StandardCurve::Beta(_) => HandleSide::Beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HandleOp {
    None,
    /// 2-handle attachments: kills sorted by pair, indices in the genus
    /// where the op acts (after `pre`).
    Attach {
        kills: Vec<PairKill>,
    },
    /// 1-handle attachments: births sorted by pair, indices in the target
    /// arrangement.
    Birth {
        births: Vec<PairBirth>,
    },
}

/// A symbolic elementary (or merged) correspondence between moduli spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub source_genus: usize,
    pub target_genus: usize,
    pub pre: GraphData,
    pub op: HandleOp,
    pub post: GraphData,
}

impl Correspondence {
    pub fn graph(g: GraphData) -> Correspondence {
        let genus = g.genus();
        Correspondence {
            source_genus: genus,
            target_genus: genus,
            pre: g,
            op: HandleOp::None,
            post: GraphData::identity(genus),
        }
    }

    pub fn identity(genus: usize) -> Correspondence {
        Correspondence::graph(GraphData::identity(genus))
    }

    pub fn is_graph(&self) -> bool {
        matches!(self.op, HandleOp::None)
    }

    /// Number of free SU(2) parameters in each fiber.
    pub fn arity(&self) -> usize {
        match &self.op {
            HandleOp::Birth { births } => births.len(),
            _ => 0,
        }
    }

    pub fn kills(&self) -> &[PairKill] {
        match &self.op {
            HandleOp::Attach { kills } => kills,
            _ => &[],
        }
    }

    pub fn births(&self) -> &[PairBirth] {
        match &self.op {
            HandleOp::Birth { births } => births,
            _ => &[],
        }
    }

    /// Structural consistency of the genus bookkeeping; guards data arriving
    /// through deserialization.
    pub fn validate(&self) -> Result<(), CorrError> {
        let bad = |reason: String| Err(CorrError::UnsupportedShape { reason });
        if self.pre.genus() != self.source_genus {
            return bad(format!(
                "pre graph acts at genus {}, source is {}",
                self.pre.genus(),
                self.source_genus
            ));
        }
        if self.post.genus() != self.target_genus {
            return bad(format!(
                "post graph acts at genus {}, target is {}",
                self.post.genus(),
                self.target_genus
            ));
        }
        let expected_target = match &self.op {
            HandleOp::None => self.source_genus,
            HandleOp::Attach { kills } => {
                if kills.iter().any(|k| k.pair >= self.source_genus) {
                    return bad("an attachment names a missing pair".into());
                }
                let mut pairs: Vec<usize> = kills.iter().map(|k| k.pair).collect();
                pairs.sort_unstable();
                pairs.dedup();
                if pairs.len() != kills.len() {
                    return bad("attachments repeat a pair".into());
                }
                if kills.iter().any(|k| k.sign.abs() != 1) {
                    return bad("attachment signs must be +1 or -1".into());
                }
                self.source_genus - kills.len()
            }
            HandleOp::Birth { births } => {
                let target = self.source_genus + births.len();
                if births.iter().any(|b| b.pair >= target) {
                    return bad("a birth names an out-of-range slot".into());
                }
                if births.iter().any(|b| b.sign.abs() != 1) {
                    return bad("birth signs must be +1 or -1".into());
                }
                target
            }
        };
        if expected_target != self.target_genus {
            return bad(format!(
                "handle bookkeeping gives target genus {expected_target}, declared {}",
                self.target_genus
            ));
        }
        Ok(())
    }
}

/// Descriptor of the elementary cobordism shapes with closed-form
/// correspondences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ElemShape {
    /// Product cobordism with a homology class: sign flips determined by
    /// intersection with the class (bits in the a₁, b₁, a₂, b₂, … basis).
    TrivialWithClass { genus: usize, class: Vec<bool> },
    /// Rotating the boundary: conjugation by exp(angle·θ).
    Reparam { genus: usize, angle: f64 },
    /// Graph of a surface diffeomorphism given by its substitution.
    DiffeoGraph { genus: usize, subst: Substitution },
    /// Moving the base path across handle `pair`: β ↦ α⁻¹βα there.
    BasePathChange { genus: usize, pair: usize },
    /// 2-handle attached along a standard curve; holonomy pinned to sign·I.
    TwoHandle {
        genus: usize,
        curve: StandardCurve,
        sign: i8,
    },
    /// 1-handle (transpose of a 2-handle): born pair with the `curve` side
    /// pinned to sign·I. `genus` is the source genus.
    OneHandle {
        genus: usize,
        curve: StandardCurve,
        sign: i8,
    },
}

/// Sign-flip table of the product cobordism carrying a homology class: a
/// generator flips iff it has odd intersection with the class, so the aᵢ
/// bit flips Bᵢ and the bᵢ bit flips Aᵢ.
pub fn class_flips(class: &[bool]) -> Vec<bool> {
    let h = class.len() / 2;
    let mut flips = vec![false; 2 * h];
    for k in 0..h {
        flips[2 * k] = class[2 * k + 1];
        flips[2 * k + 1] = class[2 * k];
    }
    flips
}

/// Builds the correspondence of an elementary cobordism shape.
pub fn elementary(shape: &ElemShape) -> Result<Correspondence, CorrError> {
    match shape {
        ElemShape::TrivialWithClass { genus, class } => {
            if class.len() != 2 * genus {
                return Err(CorrError::UnsupportedShape {
                    reason: format!(
                        "class needs {} bits for genus {genus}, got {}",
                        2 * genus,
                        class.len()
                    ),
                });
            }
            Ok(Correspondence::graph(GraphData::from_flips(&class_flips(
                class,
            ))))
        }
        ElemShape::Reparam { genus, angle } => {
            Ok(Correspondence::graph(GraphData::rotation(*genus, *angle)))
        }
        ElemShape::DiffeoGraph { genus, subst } => {
            if subst.n_generators() != 2 * genus {
                return Err(CorrError::UnsupportedShape {
                    reason: format!(
                        "substitution has {} images, genus {genus} needs {}",
                        subst.n_generators(),
                        2 * genus
                    ),
                });
            }
            Ok(Correspondence::graph(GraphData::from_substitution(subst)))
        }
        ElemShape::BasePathChange { genus, pair } => {
            if *pair >= *genus {
                return Err(CorrError::UnsupportedShape {
                    reason: format!("pair {pair} out of range for genus {genus}"),
                });
            }
            let mut images: Vec<SignedWord> = (0..2 * genus).map(SignedWord::generator).collect();
            let a = 2 * pair;
            let b = 2 * pair + 1;
            images[b] = SignedWord {
                sign: 1,
                word: Word::from(vec![-((a + 1) as i64), (b + 1) as i64, (a + 1) as i64]),
            };
            Ok(Correspondence::graph(GraphData {
                images,
                rotation: 0.0,
            }))
        }
        ElemShape::TwoHandle { genus, curve, sign } => {
            check_sign(*sign)?;
            if curve.pair() >= *genus {
                return Err(CorrError::UnsupportedShape {
                    reason: format!(
                        "attaching curve pair {} out of range for genus {genus}",
                        curve.pair()
                    ),
                });
            }
            Ok(Correspondence {
                source_genus: *genus,
                target_genus: genus - 1,
                pre: GraphData::identity(*genus),
                op: HandleOp::Attach {
                    kills: vec![PairKill {
                        pair: curve.pair(),
                        side: (*curve).into(),
                        sign: *sign,
                    }],
                },
                post: GraphData::identity(genus - 1),
            })
        }
        ElemShape::OneHandle { genus, curve, sign } => {
            check_sign(*sign)?;
            if curve.pair() > *genus {
                return Err(CorrError::UnsupportedShape {
                    reason: format!(
                        "insertion pair {} out of range for genus {genus}",
                        curve.pair()
                    ),
                });
            }
            Ok(Correspondence {
                source_genus: *genus,
                target_genus: genus + 1,
                pre: GraphData::identity(*genus),
                op: HandleOp::Birth {
                    births: vec![PairBirth {
                        pair: curve.pair(),
                        side: (*curve).into(),
                        sign: *sign,
                    }],
                },
                post: GraphData::identity(genus + 1),
            })
        }
    }
}

fn check_sign(sign: i8) -> Result<(), CorrError> {
    if sign == 1 || sign == -1 {
        Ok(())
    } else {
        Err(CorrError::InvalidParams {
            reason: format!("sign must be +1 or -1, got {sign}"),
        })
    }
}

/// Image of a point under a correspondence.
#[derive(Debug, Clone)]
pub enum Image {
    Single(ModuliPoint),
    Empty,
    /// One SU(2) parameter per 1-handle; sample with [`FiberFamily::at`].
    Family(FiberFamily),
}

#[derive(Debug, Clone)]
pub struct FiberFamily {
    corr: Correspondence,
    base: ModuliPoint,
    tol: Tol,
}

impl FiberFamily {
    pub fn arity(&self) -> usize {
        self.corr.arity()
    }

    pub fn at(&self, params: &[Su2]) -> Result<ModuliPoint, CorrError> {
        match apply_with_params(&self.corr, &self.base, params, &self.tol)? {
            Some(pt) => Ok(pt),
            None => Err(CorrError::InvalidParams {
                reason: "family fiber is empty at these parameters".into(),
            }),
        }
    }
}

/// Applies a correspondence. Graphs give a singleton, 2-handles give a
/// singleton when the attaching holonomy matches (else the empty set), and
/// 1-handles give a parametrized family.
pub fn apply(corr: &Correspondence, pt: &ModuliPoint, tol: &Tol) -> Result<Image, CorrError> {
    if corr.arity() > 0 {
        if pt.genus() != corr.source_genus {
            return Err(CorrError::GenusMismatch {
                point: pt.genus(),
                expected: corr.source_genus,
            });
        }
        return Ok(Image::Family(FiberFamily {
            corr: corr.clone(),
            base: pt.clone(),
            tol: *tol,
        }));
    }
    Ok(match apply_with_params(corr, pt, &[], tol)? {
        Some(image) => Image::Single(image),
        None => Image::Empty,
    })
}

/// Applies with explicit family parameters; `None` means the fiber over the
/// point is empty (a 2-handle constraint failed).
pub fn apply_with_params(
    corr: &Correspondence,
    pt: &ModuliPoint,
    params: &[Su2],
    tol: &Tol,
) -> Result<Option<ModuliPoint>, CorrError> {
    corr.validate()?;
    if pt.genus() != corr.source_genus {
        return Err(CorrError::GenusMismatch {
            point: pt.genus(),
            expected: corr.source_genus,
        });
    }
    if params.len() != corr.arity() {
        return Err(CorrError::ArityMismatch {
            expected: corr.arity(),
            got: params.len(),
        });
    }
    let mut current = corr.pre.apply(pt)?;
    match &corr.op {
        HandleOp::None => {}
        HandleOp::Attach { kills } => {
            let mut hol: Vec<Su2> = current.holonomies().holonomies().to_vec();
            for kill in kills.iter().rev() {
                let idx = 2 * kill.pair + kill.side.offset();
                let target = if kill.sign < 0 {
                    Su2::MINUS_IDENTITY
                } else {
                    Su2::IDENTITY
                };
                if hol[idx].dist(target) > tol.relation {
                    return Ok(None);
                }
                hol.drain(2 * kill.pair..2 * kill.pair + 2);
            }
            current =
                ModuliPoint::new(current.theta(), HolonomyPoint::new(hol).expect("even"), tol)?;
        }
        HandleOp::Birth { births } => {
            let mut hol: Vec<Su2> = current.holonomies().holonomies().to_vec();
            for (birth, &param) in births.iter().zip(params) {
                let pinned = if birth.sign < 0 {
                    Su2::MINUS_IDENTITY
                } else {
                    Su2::IDENTITY
                };
                let (a, b) = match birth.side {
                    HandleSide::Alpha => (pinned, param),
                    HandleSide::Beta => (param, pinned),
                };
                hol.insert(2 * birth.pair, b);
                hol.insert(2 * birth.pair, a);
            }
            current =
                ModuliPoint::new(current.theta(), HolonomyPoint::new(hol).expect("even"), tol)?;
        }
    }
    Ok(Some(corr.post.apply(&current)?))
}

/// Threads a point through a sequence, consuming one parameter per 1-handle.
/// `None` propagates an empty fiber.
pub fn apply_chain(
    seq: &[Correspondence],
    start: &ModuliPoint,
    params: &[Su2],
    tol: &Tol,
) -> Result<Option<ModuliPoint>, CorrError> {
    let needed: usize = seq.iter().map(|c| c.arity()).sum();
    if params.len() != needed {
        return Err(CorrError::ArityMismatch {
            expected: needed,
            got: params.len(),
        });
    }
    let mut current = start.clone();
    let mut cursor = 0;
    for corr in seq {
        let take = corr.arity();
        let slice = &params[cursor..cursor + take];
        cursor += take;
        match apply_with_params(corr, &current, slice, tol)? {
            Some(next) => current = next,
            None => return Ok(None),
        }
    }
    Ok(Some(current))
}

/// Geometric composition, `first` then `second`, inside the symbolic
/// fragment: graph∘graph, graph∘handle, handle∘graph, disjoint 2-handle
/// merges and full birth-death collapses. Everything else is refused.
pub fn compose(
    first: &Correspondence,
    second: &Correspondence,
) -> Result<Correspondence, CorrError> {
    first.validate()?;
    second.validate()?;
    if first.target_genus != second.source_genus {
        return Err(CorrError::NotComposable {
            reason: format!(
                "target genus {} does not match source genus {}",
                first.target_genus, second.source_genus
            ),
        });
    }
    match (&first.op, &second.op) {
        (HandleOp::None, _) => Ok(Correspondence {
            source_genus: first.source_genus,
            target_genus: second.target_genus,
            pre: GraphData::compose(&first.pre, &second.pre)?,
            op: second.op.clone(),
            post: second.post.clone(),
        }),
        (_, HandleOp::None) => Ok(Correspondence {
            source_genus: first.source_genus,
            target_genus: second.target_genus,
            pre: first.pre.clone(),
            op: first.op.clone(),
            post: GraphData::compose(&first.post, &second.pre)?,
        }),
        (HandleOp::Attach { kills: k1 }, HandleOp::Attach { kills: k2 }) => {
            let middle = GraphData::compose(&first.post, &second.pre)?;
            let Some((flips, rotation)) = middle.flips_only() else {
                return Err(CorrError::NotComposable {
                    reason: "a substitution separates the two attachments".into(),
                });
            };
            // lift second kills through the middle flips and into the
            // indexing before the first kills
            let survivors = surviving_pairs(first.source_genus, k1);
            let mut kills = k1.clone();
            for kill in k2 {
                let idx = 2 * kill.pair + kill.side.offset();
                let sign = kill.sign * flips[idx];
                let source_pair = survivors[kill.pair];
                kills.push(PairKill {
                    pair: source_pair,
                    side: kill.side,
                    sign,
                });
            }
            kills.sort_by_key(|k| k.pair);
            if kills.windows(2).any(|w| w[0].pair == w[1].pair) {
                return Err(CorrError::NotComposable {
                    reason: "attachments hit the same handle pair".into(),
                });
            }
            // flips on surviving generators move past the kills; reindex
            // them into the final target arrangement
            let final_flips = restrict_flips(&flips, k2);
            let post = GraphData::compose(
                &GraphData {
                    images: final_flips
                        .iter()
                        .enumerate()
                        .map(|(g, &s)| SignedWord {
                            sign: s,
                            word: Word::generator(g, 1),
                        })
                        .collect(),
                    rotation,
                },
                &second.post,
            )?;
            Ok(Correspondence {
                source_genus: first.source_genus,
                target_genus: second.target_genus,
                pre: first.pre.clone(),
                op: HandleOp::Attach { kills },
                post,
            })
        }
        (HandleOp::Birth { births }, HandleOp::Attach { kills }) => {
            let middle = GraphData::compose(&first.post, &second.pre)?;
            let Some((flips, rotation)) = middle.flips_only() else {
                return Err(CorrError::NotComposable {
                    reason: "a substitution separates the birth from the attachment".into(),
                });
            };
            if births.len() != kills.len() {
                return Err(CorrError::NotComposable {
                    reason: "partial birth-death collapses are outside the fragment".into(),
                });
            }
            for kill in kills {
                let Some(birth) = births.iter().find(|b| b.pair == kill.pair) else {
                    return Err(CorrError::NotComposable {
                        reason: format!("attachment at pair {} hits no born pair", kill.pair),
                    });
                };
                let idx = 2 * kill.pair + kill.side.offset();
                let effective_sign = kill.sign * flips[idx];
                if kill.side == birth.side && effective_sign != birth.sign {
                    return Err(CorrError::NotComposable {
                        reason: "composition is empty: the attachment excludes the born holonomy"
                            .into(),
                    });
                }
            }
            // full collapse: the composite is the graph that survives around
            // the cancelled pairs
            let surviving = restrict_flips_births(&flips, births);
            let flips_graph = GraphData {
                images: surviving
                    .iter()
                    .enumerate()
                    .map(|(g, &s)| SignedWord {
                        sign: s,
                        word: Word::generator(g, 1),
                    })
                    .collect(),
                rotation,
            };
            let merged =
                GraphData::compose(&GraphData::compose(&first.pre, &flips_graph)?, &second.post)?;
            Ok(Correspondence::graph(merged))
        }
        (HandleOp::Birth { .. }, HandleOp::Birth { .. }) => Err(CorrError::NotComposable {
            reason: "merging consecutive 1-handles is outside the symbolic fragment".into(),
        }),
        (HandleOp::Attach { .. }, HandleOp::Birth { .. }) => Err(CorrError::NotComposable {
            reason: "an attachment followed by a birth is outside the symbolic fragment".into(),
        }),
    }
}

/// Source pairs surviving a kill list, in order.
fn surviving_pairs(genus: usize, kills: &[PairKill]) -> Vec<usize> {
    (0..genus)
        .filter(|p| !kills.iter().any(|k| k.pair == *p))
        .collect()
}

/// Flip table restricted to the generators surviving the kills, reindexed.
fn restrict_flips(flips: &[i8], kills: &[PairKill]) -> Vec<i8> {
    let genus = flips.len() / 2;
    let mut out = Vec::new();
    for p in 0..genus {
        if kills.iter().any(|k| k.pair == p) {
            continue;
        }
        out.push(flips[2 * p]);
        out.push(flips[2 * p + 1]);
    }
    out
}

fn restrict_flips_births(flips: &[i8], births: &[PairBirth]) -> Vec<i8> {
    let genus = flips.len() / 2;
    let mut out = Vec::new();
    for p in 0..genus {
        if births.iter().any(|b| b.pair == p) {
            continue;
        }
        out.push(flips[2 * p]);
        out.push(flips[2 * p + 1]);
    }
    out
}

// ---------------------------------------------------------------------------
// Sampled embeddedness diagnostics

/// Report of the sampled transversality/injectivity diagnostic. Heuristic:
/// it can flag failures, it cannot certify embeddedness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddednessReport {
    pub samples_requested: usize,
    pub samples_checked: usize,
    pub empty_fibers: usize,
    /// Smallest pivot of the constraint Jacobian across samples.
    pub min_rank_margin: f64,
    /// Smallest relative (x₀, x₂)-component of an intersection tangent
    /// direction; a vanishing value means the projection collapses a
    /// direction.
    pub min_projection_margin: f64,
    pub transversal: bool,
    pub injective: bool,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// Numerically samples the fibered product of two correspondences, then
/// finite-differences the defining equations: full row rank of the Jacobian
/// is the transversality proxy, and kernel directions invisible to the
/// (source, target) projection flag non-injectivity.
pub fn embeddedness_check<R: Rng + ?Sized>(
    first: &Correspondence,
    second: &Correspondence,
    samples: usize,
    rng: &mut R,
    tol: &Tol,
) -> EmbeddednessReport {
    let mut report = EmbeddednessReport {
        samples_requested: samples,
        samples_checked: 0,
        empty_fibers: 0,
        min_rank_margin: f64::INFINITY,
        min_projection_margin: f64::INFINITY,
        transversal: true,
        injective: true,
        passed: false,
        notes: Vec::new(),
    };
    if first.target_genus != second.source_genus {
        report.notes.push("genus chain mismatch".into());
        return report;
    }
    for _ in 0..samples {
        match sample_intersection(first, second, rng, tol) {
            Ok(Some((x0, x1, x2))) => {
                report.samples_checked += 1;
                let (margin, proj_margin) = jacobian_margins(first, second, &x0, &x1, &x2, tol);
                report.min_rank_margin = report.min_rank_margin.min(margin);
                report.min_projection_margin = report.min_projection_margin.min(proj_margin);
            }
            Ok(None) => report.empty_fibers += 1,
            Err(reason) => {
                report.notes.push(reason);
                return report;
            }
        }
    }
    if report.samples_checked == 0 {
        report
            .notes
            .push("no intersection points found: composition is empty on samples".into());
        report.passed = false;
        return report;
    }
    report.transversal = report.min_rank_margin > 1e-6;
    report.injective = report.min_projection_margin > 1e-6;
    if !report.transversal {
        report
            .notes
            .push("rank-deficient defining equations".into());
    }
    if !report.injective {
        report
            .notes
            .push("projection collapses an intersection direction".into());
    }
    report.passed = report.empty_fibers == 0 && report.transversal && report.injective;
    report
}

/// Samples a triple (x0, x1, x2) with (x0,x1) on the first and (x1,x2) on
/// the second correspondence. Requires flips-only pre graphs when kill
/// constraints must be met by construction.
fn sample_intersection<R: Rng + ?Sized>(
    first: &Correspondence,
    second: &Correspondence,
    rng: &mut R,
    tol: &Tol,
) -> Result<Option<(ModuliPoint, ModuliPoint, ModuliPoint)>, String> {
    // constraints that x0 must satisfy directly (first's own kills)
    let mut pinned: Vec<(usize, Su2)> = Vec::new();
    for kill in first.kills() {
        let (flips, _) = first
            .pre
            .flips_only()
            .ok_or("cannot sample through a substitution before an attachment")?;
        let idx = 2 * kill.pair + kill.side.offset();
        let v = if kill.sign * flips[idx] < 0 {
            Su2::MINUS_IDENTITY
        } else {
            Su2::IDENTITY
        };
        pinned.push((idx, v));
    }
    // constraints imposed by the second correspondence, pulled back
    let mut params1: Vec<Option<Su2>> = vec![None; first.arity()];
    for kill in second.kills() {
        let (flips2, _) = second
            .pre
            .flips_only()
            .ok_or("cannot sample through a substitution before an attachment")?;
        let idx1 = 2 * kill.pair + kill.side.offset();
        let want = kill.sign * flips2[idx1];
        let target = if want < 0 {
            Su2::MINUS_IDENTITY
        } else {
            Su2::IDENTITY
        };
        match &first.op {
            HandleOp::None => {
                let (flips1, _) = first
                    .pre
                    .flips_only()
                    .ok_or("cannot pull a constraint back through a substitution")?;
                let v = if flips1[idx1] < 0 {
                    target.neg()
                } else {
                    target
                };
                pinned.push((idx1, v));
            }
            HandleOp::Birth { births } => {
                if let Some((b_idx, birth)) =
                    births.iter().enumerate().find(|(_, b)| b.pair == kill.pair)
                {
                    if !first.post.is_identity() {
                        return Err("graph between birth and death is unsupported here".into());
                    }
                    if birth.side == kill.side {
                        let pinned_value = if birth.sign < 0 {
                            Su2::MINUS_IDENTITY
                        } else {
                            Su2::IDENTITY
                        };
                        if pinned_value.dist(target) > tol.relation {
                            return Ok(None); // structurally empty
                        }
                    } else {
                        params1[b_idx] = Some(target);
                    }
                } else {
                    return Err("attachment through shifted born indices unsupported".into());
                }
            }
            HandleOp::Attach { kills: k1 } => {
                // pull back through the first attachment: the intermediate
                // pair index names a surviving source pair
                let (flips_post, _) = first
                    .post
                    .flips_only()
                    .ok_or("cannot pull a constraint back through a substitution")?;
                let (flips_pre, _) = first
                    .pre
                    .flips_only()
                    .ok_or("cannot pull a constraint back through a substitution")?;
                let survivors = surviving_pairs(first.source_genus, k1);
                let source_pair = survivors[kill.pair];
                let src_idx = 2 * source_pair + kill.side.offset();
                let total_flip = flips_post[idx1] * flips_pre[src_idx];
                let v = if total_flip < 0 { target.neg() } else { target };
                pinned.push((src_idx, v));
            }
        }
    }
    // build x0
    let x0 = 'search: loop {
        for _ in 0..200 {
            let mut hol: Vec<Su2> = (0..2 * first.source_genus)
                .map(|_| Su2::haar(rng))
                .collect();
            for &(idx, v) in &pinned {
                hol[idx] = v;
            }
            let hp = HolonomyPoint::new(hol).expect("even");
            if commutator_product(&hp).dist(Su2::MINUS_IDENTITY) > 1e-3 {
                break 'search ModuliPoint::from_holonomies(hp).expect("away from -I");
            }
        }
        return Err("could not sample a valid constrained point".into());
    };
    let p1: Vec<Su2> = params1
        .into_iter()
        .map(|p| p.unwrap_or_else(|| Su2::haar(rng)))
        .collect();
    let x1 = match apply_with_params(first, &x0, &p1, tol).map_err(|e| e.to_string())? {
        Some(x1) => x1,
        None => return Ok(None),
    };
    let p2: Vec<Su2> = (0..second.arity()).map(|_| Su2::haar(rng)).collect();
    let x2 = match apply_with_params(second, &x1, &p2, tol).map_err(|e| e.to_string())? {
        Some(x2) => x2,
        None => return Ok(None),
    };
    Ok(Some((x0, x1, x2)))
}

/// Finite-difference Jacobian of the defining equations of
/// (L₁ × M₂) ∩ (M₀ × L₂) at a triple, returning (smallest pivot of the
/// row-reduced Jacobian, smallest (x₀,x₂)-share of a kernel direction).
fn jacobian_margins(
    first: &Correspondence,
    second: &Correspondence,
    x0: &ModuliPoint,
    x1: &ModuliPoint,
    x2: &ModuliPoint,
    tol: &Tol,
) -> (f64, f64) {
    let delta = 1e-6;
    let d0 = 3 * 2 * x0.genus();
    let d1 = 3 * 2 * x1.genus();
    let d2 = 3 * 2 * x2.genus();
    let n_vars = d0 + d1 + d2;
    let base = constraint_values(first, second, x0, x1, x2, tol);
    let n_rows = base.len();
    if n_rows == 0 || n_vars == 0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    // columns = variables, rows = constraints
    let mut jac = vec![vec![0.0f64; n_vars]; n_rows];
    for var in 0..n_vars {
        let (y0, y1, y2) = perturb_triple(x0, x1, x2, var, delta);
        let shifted = constraint_values(first, second, &y0, &y1, &y2, tol);
        for (r, row) in jac.iter_mut().enumerate() {
            row[var] = (shifted[r] - base[r]) / delta;
        }
    }
    let (rank_margin, kernel) = row_reduce(&mut jac, n_rows, n_vars);
    // kernel directions: how much of each survives the (x0, x2) projection
    let mut proj_margin = f64::INFINITY;
    for v in kernel {
        let total: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if total < 1e-12 {
            continue;
        }
        let visible: f64 = v[..d0]
            .iter()
            .chain(&v[d0 + d1..])
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        proj_margin = proj_margin.min(visible / total);
    }
    (rank_margin, proj_margin)
}

/// Residuals of the two membership conditions, as flat su(2) components.
fn constraint_values(
    first: &Correspondence,
    second: &Correspondence,
    x0: &ModuliPoint,
    x1: &ModuliPoint,
    x2: &ModuliPoint,
    tol: &Tol,
) -> Vec<f64> {
    let mut vals = corr_residual(first, x0, x1, tol);
    vals.extend(corr_residual(second, x1, x2, tol));
    vals
}

/// Residual of "(x, y) lies on the correspondence": per constrained
/// coordinate the su(2) defect of the pinned holonomy, plus the defect of
/// the mapped point against y.
fn corr_residual(corr: &Correspondence, x: &ModuliPoint, y: &ModuliPoint, tol: &Tol) -> Vec<f64> {
    let loose = Tol::new(tol.arith, f64::INFINITY, tol.solver);
    let mut out = Vec::new();
    let pre = match corr.pre.apply(x) {
        Ok(p) => p,
        Err(_) => return fixed_defect(corr),
    };
    let mut hol: Vec<Su2> = pre.holonomies().holonomies().to_vec();
    match &corr.op {
        HandleOp::None => {}
        HandleOp::Attach { kills } => {
            for kill in kills.iter().rev() {
                let idx = 2 * kill.pair + kill.side.offset();
                let target = if kill.sign < 0 {
                    Su2::MINUS_IDENTITY
                } else {
                    Su2::IDENTITY
                };
                push_su2_defect(&mut out, hol[idx], target);
                hol.drain(2 * kill.pair..2 * kill.pair + 2);
            }
        }
        HandleOp::Birth { births } => {
            // y supplies both the pinned and the free coordinates; consume y
            // backwards through the births
            let y_pre = match invert_graph_coordinates(&corr.post, y) {
                Some(p) => p,
                None => return fixed_defect(corr),
            };
            let mut rest = y_pre;
            for birth in births.iter().rev() {
                let pinned = if birth.sign < 0 {
                    Su2::MINUS_IDENTITY
                } else {
                    Su2::IDENTITY
                };
                let idx = 2 * birth.pair + birth.side.offset();
                push_su2_defect(&mut out, rest[idx], pinned);
                rest.drain(2 * birth.pair..2 * birth.pair + 2);
            }
            for (a, b) in rest.iter().zip(&hol) {
                push_su2_defect(&mut out, *a, *b);
            }
            return out;
        }
    }
    // forward defect against y through the post graph
    let dropped =
        match ModuliPoint::new(pre.theta(), HolonomyPoint::new(hol).expect("even"), &loose) {
            Ok(p) => p,
            Err(_) => return fixed_defect(corr),
        };
    let mapped = match corr.post.apply(&dropped) {
        Ok(m) => m,
        Err(_) => return fixed_defect(corr),
    };
    for (a, b) in mapped
        .holonomies()
        .holonomies()
        .iter()
        .zip(y.holonomies().holonomies())
    {
        push_su2_defect(&mut out, *a, *b);
    }
    out
}

/// Constant-length fallback so finite differencing stays aligned when an
/// evaluation leaves the chart.
fn fixed_defect(corr: &Correspondence) -> Vec<f64> {
    let rows = match &corr.op {
        HandleOp::None => 2 * corr.target_genus,
        HandleOp::Attach { kills } => kills.len() + 2 * corr.target_genus,
        HandleOp::Birth { births } => births.len() + 2 * corr.source_genus,
    };
    vec![1.0; 3 * rows]
}

/// Coordinates of y pulled back through a flips-only post graph; None for
/// substitutions.
fn invert_graph_coordinates(post: &GraphData, y: &ModuliPoint) -> Option<Vec<Su2>> {
    let (flips, rotation) = post.flips_only()?;
    let k = y.theta().scale(rotation).exp();
    Some(
        y.holonomies()
            .holonomies()
            .iter()
            .zip(&flips)
            .map(|(h, &s)| {
                let un_rot = h.conj_by(k.inv());
                if s < 0 {
                    un_rot.neg()
                } else {
                    un_rot
                }
            })
            .collect(),
    )
}

fn push_su2_defect(out: &mut Vec<f64>, got: Su2, want: Su2) {
    let rel = got.mul(want.inv());
    // su(2)-valued defect; near the identity this is the local chart
    match rel.log() {
        Ok(v) => out.extend_from_slice(&[v.x, v.y, v.z]),
        Err(_) => out.extend_from_slice(&[1.0, 1.0, 1.0]),
    }
}

fn perturb_triple(
    x0: &ModuliPoint,
    x1: &ModuliPoint,
    x2: &ModuliPoint,
    var: usize,
    delta: f64,
) -> (ModuliPoint, ModuliPoint, ModuliPoint) {
    let d0 = 3 * 2 * x0.genus();
    let d1 = 3 * 2 * x1.genus();
    if var < d0 {
        (perturb_point(x0, var, delta), x1.clone(), x2.clone())
    } else if var < d0 + d1 {
        (x0.clone(), perturb_point(x1, var - d0, delta), x2.clone())
    } else {
        (
            x0.clone(),
            x1.clone(),
            perturb_point(x2, var - d0 - d1, delta),
        )
    }
}

fn perturb_point(pt: &ModuliPoint, var: usize, delta: f64) -> ModuliPoint {
    let coord = var / 3;
    let axis = var % 3;
    let mut dir = [0.0; 3];
    dir[axis] = delta;
    let bump = Su2Vector::new(dir[0], dir[1], dir[2]).exp();
    let mut hol = pt.holonomies().holonomies().to_vec();
    hol[coord] = bump.mul(hol[coord]);
    // keep θ consistent when possible; fall back to the stored branch
    let hp = HolonomyPoint::new(hol).expect("even");
    ModuliPoint::from_holonomies(hp.clone()).unwrap_or_else(|_| {
        ModuliPoint::new(pt.theta(), hp, &Tol::new(1e-12, f64::INFINITY, 1e-8)).expect("loose")
    })
}

/// Row reduction with partial pivoting; returns the smallest pivot among
/// the first `rows` pivots (0 when rank-deficient) and a basis of the
/// kernel.
fn row_reduce(jac: &mut [Vec<f64>], rows: usize, cols: usize) -> (f64, Vec<Vec<f64>>) {
    let mut pivot_cols = Vec::new();
    let mut min_pivot = f64::INFINITY;
    let mut r = 0;
    for c in 0..cols {
        if r >= rows {
            break;
        }
        let (best, best_val) = (r..rows)
            .map(|i| (i, jac[i][c].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if best_val < 1e-9 {
            continue;
        }
        jac.swap(r, best);
        min_pivot = min_pivot.min(best_val);
        let p = jac[r][c];
        for i in 0..rows {
            if i != r && jac[i][c].abs() > 0.0 {
                let f = jac[i][c] / p;
                for k in c..cols {
                    jac[i][k] -= f * jac[r][k];
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
    }
    let rank = r;
    let rank_margin = if rank < rows { 0.0 } else { min_pivot };
    // kernel basis from the free columns
    let free_cols: Vec<usize> = (0..cols).filter(|c| !pivot_cols.contains(c)).collect();
    let mut kernel = Vec::new();
    for &fc in &free_cols {
        let mut v = vec![0.0; cols];
        v[fc] = 1.0;
        for (ri, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -jac[ri][fc] / jac[ri][pc];
        }
        kernel.push(v);
    }
    (rank_margin, kernel)
}

// ---------------------------------------------------------------------------
// Genus-1 intersection enumeration

/// Clean-intersection census for the genus-1 families: central points stay
/// points after a small perturbation, each 2-sphere component contributes
/// two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanIntersectionReport {
    pub n_central: u32,
    pub n_spheres: u32,
    pub perturbed_count: u32,
}

/// Enumerates the components of {A : A^p = ηI} ∩ {B = ε₀I} exactly, where
/// η = ε₁·ε₀^q comes from the pair of constraints B = ε₀I and
/// A^p B^{−q} = ε₁I. Conjugacy classes are angles ϕ ∈ [0, π]; ϕ ∈ {0, π} is
/// a central point, anything else a 2-sphere.
pub fn lens_intersection(
    p: u64,
    q: i64,
    eps0: i8,
    eps1: i8,
) -> Result<CleanIntersectionReport, CorrError> {
    if p == 0 {
        return Err(CorrError::InvalidParams {
            reason: "p = 0 is the sphere-times-circle case; see s2s1_intersection".into(),
        });
    }
    check_sign(eps0)?;
    check_sign(eps1)?;
    if crate::homology::gcd_u(p, q.unsigned_abs()) != 1 {
        return Err(CorrError::InvalidParams {
            reason: format!("gcd({p}, {q}) must be 1"),
        });
    }
    let eta_negative = (eps1 < 0) ^ (eps0 < 0 && q.rem_euclid(2) == 1);
    let (mut central, mut spheres) = (0u32, 0u32);
    if !eta_negative {
        // pϕ ≡ 0 (mod 2π): ϕ = 2πk/p with 0 ≤ 2k ≤ p
        let mut k = 0;
        while 2 * k <= p {
            if k == 0 || 2 * k == p {
                central += 1;
            } else {
                spheres += 1;
            }
            k += 1;
        }
    } else {
        // pϕ ≡ π (mod 2π): ϕ = (2k+1)π/p with 2k+1 ≤ p
        let mut k = 0;
        while 2 * k + 1 <= p {
            if 2 * k + 1 == p {
                central += 1;
            } else {
                spheres += 1;
            }
            k += 1;
        }
    }
    Ok(CleanIntersectionReport {
        n_central: central,
        n_spheres: spheres,
        perturbed_count: central + 2 * spheres,
    })
}

/// The p = 0 surgery: with equal classes the two Lagrangians coincide (one
/// clean self-intersection, a 3-sphere); with distinct classes they are
/// disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct S2S1Report {
    pub disjoint: bool,
    pub clean_self_intersection: bool,
}

pub fn s2s1_intersection(class_nonzero: bool) -> S2S1Report {
    S2S1Report {
        disjoint: class_nonzero,
        clean_self_intersection: !class_nonzero,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: Tol = Tol::new(1e-12, 1e-9, 1e-8);

    fn single(image: Image) -> ModuliPoint {
        match image {
            Image::Single(pt) => pt,
            other => panic!("expected a singleton, got {other:?}"),
        }
    }

    #[test]
    fn trivial_cobordism_is_diagonal() {
        let c = elementary(&ElemShape::TrivialWithClass {
            genus: 2,
            class: vec![false; 4],
        })
        .unwrap();
        assert!(c.pre.is_identity() && c.is_graph());
        let mut rng = ChaCha8Rng::seed_from_u64(201);
        let pt = ModuliPoint::random(2, &mut rng);
        let out = single(apply(&c, &pt, &TOL).unwrap());
        assert!(out.dist(&pt) < 1e-12);
    }

    #[test]
    fn class_a1_flips_b1_only() {
        let c = elementary(&ElemShape::TrivialWithClass {
            genus: 2,
            class: vec![true, false, false, false],
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        let pt = ModuliPoint::random(2, &mut rng);
        let out = single(apply(&c, &pt, &TOL).unwrap());
        let hol = pt.holonomies().holonomies();
        let got = out.holonomies().holonomies();
        assert!(got[0].dist(hol[0]) < 1e-12);
        assert!(got[1].dist(hol[1].neg()) < 1e-12);
        assert!(got[2].dist(hol[2]) < 1e-12);
        assert!(got[3].dist(hol[3]) < 1e-12);
    }

    #[test]
    fn sign_flip_applied_twice_is_identity() {
        let c = elementary(&ElemShape::TrivialWithClass {
            genus: 1,
            class: vec![true, true],
        })
        .unwrap();
        let cc = compose(&c, &c).unwrap();
        assert!(cc.pre.is_identity());
        let mut rng = ChaCha8Rng::seed_from_u64(203);
        let pt = ModuliPoint::random(1, &mut rng);
        let out = single(apply(&cc, &pt, &TOL).unwrap());
        assert!(out.dist(&pt) < 1e-12);
    }

    #[test]
    fn sign_flips_compose_as_class_sum() {
        // the homology class slide identity on flips
        let mut rng = ChaCha8Rng::seed_from_u64(204);
        for _ in 0..20 {
            let c1: Vec<bool> = (0..4).map(|_| rng.gen_bool(0.5)).collect();
            let c2: Vec<bool> = (0..4).map(|_| rng.gen_bool(0.5)).collect();
            let sum: Vec<bool> = c1.iter().zip(&c2).map(|(a, b)| a ^ b).collect();
            let f1 = elementary(&ElemShape::TrivialWithClass {
                genus: 2,
                class: c1,
            })
            .unwrap();
            let f2 = elementary(&ElemShape::TrivialWithClass {
                genus: 2,
                class: c2,
            })
            .unwrap();
            let fs = elementary(&ElemShape::TrivialWithClass {
                genus: 2,
                class: sum,
            })
            .unwrap();
            assert_eq!(compose(&f1, &f2).unwrap(), fs);
        }
    }

    #[test]
    fn flip_group_structure() {
        // trivial-cobordism correspondences with class form (Z/2)^{2h}
        let h = 1;
        let all: Vec<Vec<bool>> = (0..4u8)
            .map(|m| (0..2).map(|b| m >> b & 1 == 1).collect())
            .collect();
        for c1 in &all {
            for c2 in &all {
                let f1 = elementary(&ElemShape::TrivialWithClass {
                    genus: h,
                    class: c1.clone(),
                })
                .unwrap();
                let f2 = elementary(&ElemShape::TrivialWithClass {
                    genus: h,
                    class: c2.clone(),
                })
                .unwrap();
                let sum: Vec<bool> = c1.iter().zip(c2).map(|(a, b)| a ^ b).collect();
                let fs = elementary(&ElemShape::TrivialWithClass {
                    genus: h,
                    class: sum,
                })
                .unwrap();
                assert_eq!(compose(&f1, &f2).unwrap(), fs);
            }
        }
    }

    #[test]
    fn base_path_change_formula() {
        let c = elementary(&ElemShape::BasePathChange { genus: 1, pair: 0 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(205);
        let pt = ModuliPoint::random(1, &mut rng);
        let out = single(apply(&c, &pt, &TOL).unwrap());
        let a = pt.holonomies().alpha(0);
        let b = pt.holonomies().beta(0);
        assert!(out.holonomies().alpha(0).dist(a) < 1e-12);
        assert!(out.holonomies().beta(0).dist(b.conj_by(a.inv())) < 1e-12);
        // moving the base path conjugates the whole tuple, θ included
        assert!(out.theta().dist(a.inv().adjoint(pt.theta())) < 1e-10);
        assert!(out.relation_residual() < 1e-10);
    }

    #[test]
    fn reparametrization_conjugates_by_exp_theta() {
        let c = elementary(&ElemShape::Reparam {
            genus: 1,
            angle: 0.7,
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(206);
        let pt = ModuliPoint::random(1, &mut rng);
        let out = single(apply(&c, &pt, &TOL).unwrap());
        let k = pt.theta().scale(0.7).exp();
        assert!(
            out.holonomies()
                .alpha(0)
                .dist(pt.holonomies().alpha(0).conj_by(k))
                < 1e-12
        );
        assert!(out.theta().dist(pt.theta()) < 1e-15);
    }

    #[test]
    fn two_handle_fiber() {
        let c = elementary(&ElemShape::TwoHandle {
            genus: 2,
            curve: StandardCurve::Beta(0),
            sign: 1,
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(207);
        // generic point misses the constraint
        let generic = ModuliPoint::random(2, &mut rng);
        assert!(matches!(apply(&c, &generic, &TOL).unwrap(), Image::Empty));
        // constrained point projects
        let on = sample_intersection(&c, &Correspondence::identity(1), &mut rng, &TOL)
            .unwrap()
            .unwrap();
        let (x0, x1, _) = on;
        assert!(x0.holonomies().beta(0).dist(Su2::IDENTITY) < 1e-9);
        assert_eq!(x1.genus(), 1);
        assert!(x1.holonomies().alpha(0).dist(x0.holonomies().alpha(1)) < 1e-12);
    }

    #[test]
    fn one_handle_family() {
        let c = elementary(&ElemShape::OneHandle {
            genus: 0,
            curve: StandardCurve::Beta(0),
            sign: 1,
        })
        .unwrap();
        let base = ModuliPoint::trivial();
        let Image::Family(fam) = apply(&c, &base, &TOL).unwrap() else {
            panic!("expected a family");
        };
        let mut rng = ChaCha8Rng::seed_from_u64(208);
        let a = Su2::haar(&mut rng);
        let pt = fam.at(&[a]).unwrap();
        assert!(pt.holonomies().alpha(0).dist(a) < 1e-12);
        assert!(pt.holonomies().beta(0).dist(Su2::IDENTITY) < 1e-12);
        assert!(matches!(
            fam.at(&[]),
            Err(CorrError::ArityMismatch {
                expected: 1,
                got: 0
            })
        ));
    }

    #[test]
    fn graph_composition_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(209);
        let twist = crate::words::twist_substitution(StandardCurve::Beta(0), 1).unwrap();
        let g1 = elementary(&ElemShape::DiffeoGraph {
            genus: 1,
            subst: twist,
        })
        .unwrap();
        let g2 = elementary(&ElemShape::TrivialWithClass {
            genus: 1,
            class: vec![true, false],
        })
        .unwrap();
        let c12 = compose(&g1, &g2).unwrap();
        for _ in 0..200 {
            let pt = ModuliPoint::random(1, &mut rng);
            let step = single(apply(&g2, &single(apply(&g1, &pt, &TOL).unwrap()), &TOL).unwrap());
            let joint = single(apply(&c12, &pt, &TOL).unwrap());
            assert!(step.dist(&joint) < 1e-10);
        }
    }

    #[test]
    fn composition_is_associative_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(210);
        let shapes = [
            ElemShape::TrivialWithClass {
                genus: 1,
                class: vec![true, false],
            },
            ElemShape::Reparam {
                genus: 1,
                angle: 0.3,
            },
            ElemShape::BasePathChange { genus: 1, pair: 0 },
        ];
        let cs: Vec<Correspondence> = shapes.iter().map(|s| elementary(s).unwrap()).collect();
        let left = compose(&compose(&cs[0], &cs[1]).unwrap(), &cs[2]).unwrap();
        let right = compose(&cs[0], &compose(&cs[1], &cs[2]).unwrap()).unwrap();
        for _ in 0..200 {
            let pt = ModuliPoint::random(1, &mut rng);
            let l = single(apply(&left, &pt, &TOL).unwrap());
            let r = single(apply(&right, &pt, &TOL).unwrap());
            assert!(l.dist(&r) < 1e-10);
        }
    }

    #[test]
    fn disjoint_two_handles_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(211);
        // kill pair 0 then (intermediate) pair 0 = original pair 1
        let h1 = elementary(&ElemShape::TwoHandle {
            genus: 2,
            curve: StandardCurve::Alpha(0),
            sign: 1,
        })
        .unwrap();
        let h2 = elementary(&ElemShape::TwoHandle {
            genus: 1,
            curve: StandardCurve::Alpha(0),
            sign: 1,
        })
        .unwrap();
        // other order: kill pair 1 first, then pair 0
        let h1b = elementary(&ElemShape::TwoHandle {
            genus: 2,
            curve: StandardCurve::Alpha(1),
            sign: 1,
        })
        .unwrap();
        let h2b = elementary(&ElemShape::TwoHandle {
            genus: 1,
            curve: StandardCurve::Alpha(0),
            sign: 1,
        })
        .unwrap();
        let once = compose(&h1, &h2).unwrap();
        let other = compose(&h1b, &h2b).unwrap();
        assert_eq!(once.kills().len(), 2);
        assert_eq!(once.kills(), other.kills());
        // pointwise on 10^3 constrained samples
        for _ in 0..1_000 {
            let Some((x0, _, x2)) = sample_intersection(&h1, &h2, &mut rng, &TOL).unwrap() else {
                panic!("constrained sampling failed")
            };
            let via_other = apply_with_params(&other, &x0, &[], &TOL).unwrap().unwrap();
            assert!(via_other.dist(&x2) < 1e-10);
            assert_eq!(x2.genus(), 0);
        }
    }

    #[test]
    fn birth_death_collapses_to_diagonal() {
        let birth = elementary(&ElemShape::OneHandle {
            genus: 1,
            curve: StandardCurve::Beta(0),
            sign: 1,
        })
        .unwrap();
        let death = elementary(&ElemShape::TwoHandle {
            genus: 2,
            curve: StandardCurve::Alpha(0),
            sign: 1,
        })
        .unwrap();
        let collapsed = compose(&birth, &death).unwrap();
        assert!(collapsed.is_graph());
        assert!(collapsed.pre.is_identity());
    }

    #[test]
    fn mismatched_birth_death_is_empty() {
        let birth = elementary(&ElemShape::OneHandle {
            genus: 1,
            curve: StandardCurve::Beta(0),
            sign: 1,
        })
        .unwrap();
        let death = elementary(&ElemShape::TwoHandle {
            genus: 2,
            curve: StandardCurve::Beta(0),
            sign: -1,
        })
        .unwrap();
        let e = compose(&birth, &death).unwrap_err();
        assert!(matches!(e, CorrError::NotComposable { ref reason } if reason.contains("empty")));
    }

    #[test]
    fn embeddedness_of_diagonal_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(212);
        let d = Correspondence::identity(1);
        let report = embeddedness_check(&d, &d, 4, &mut rng, &TOL);
        assert!(report.passed, "{report:?}");
        assert!(report.transversal && report.injective);
    }

    #[test]
    fn embeddedness_of_birth_death_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(213);
        let birth = elementary(&ElemShape::OneHandle {
            genus: 1,
            curve: StandardCurve::Beta(0),
            sign: 1,
        })
        .unwrap();
        let death = elementary(&ElemShape::TwoHandle {
            genus: 2,
            curve: StandardCurve::Alpha(0),
            sign: 1,
        })
        .unwrap();
        let report = embeddedness_check(&birth, &death, 4, &mut rng, &TOL);
        assert!(report.passed, "{report:?}");
        // and the collapse equals the diagonal on samples
        let collapsed = compose(&birth, &death).unwrap();
        let pt = ModuliPoint::random(1, &mut rng);
        let out = single(apply(&collapsed, &pt, &TOL).unwrap());
        assert!(out.dist(&pt) < 1e-12);
    }

    #[test]
    fn embeddedness_flags_excluded_holonomy() {
        let mut rng = ChaCha8Rng::seed_from_u64(214);
        let birth = elementary(&ElemShape::OneHandle {
            genus: 1,
            curve: StandardCurve::Beta(0),
            sign: 1,
        })
        .unwrap();
        // the flip sends the born holonomy to the excluded value
        let death = elementary(&ElemShape::TwoHandle {
            genus: 2,
            curve: StandardCurve::Beta(0),
            sign: -1,
        })
        .unwrap();
        let report = embeddedness_check(&birth, &death, 4, &mut rng, &TOL);
        assert!(!report.passed);
        assert!(report.samples_checked == 0, "{report:?}");
    }

    #[test]
    fn embeddedness_flags_non_injective_collapse() {
        let mut rng = ChaCha8Rng::seed_from_u64(215);
        // birth then death along the same constrained side: the free
        // parameter is invisible downstream
        let birth = elementary(&ElemShape::OneHandle {
            genus: 1,
            curve: StandardCurve::Beta(0),
            sign: 1,
        })
        .unwrap();
        let death = elementary(&ElemShape::TwoHandle {
            genus: 2,
            curve: StandardCurve::Beta(0),
            sign: 1,
        })
        .unwrap();
        let report = embeddedness_check(&birth, &death, 4, &mut rng, &TOL);
        assert!(!report.passed, "{report:?}");
        assert!(!report.injective || !report.transversal, "{report:?}");
    }

    #[test]
    fn apply_rejects_genus_mismatch() {
        let c = Correspondence::identity(2);
        let mut rng = ChaCha8Rng::seed_from_u64(216);
        let pt = ModuliPoint::random(1, &mut rng);
        assert!(matches!(
            apply(&c, &pt, &TOL),
            Err(CorrError::GenusMismatch {
                point: 1,
                expected: 2
            })
        ));
    }

    #[test]
    fn elementary_rejects_bad_descriptors() {
        assert!(matches!(
            elementary(&ElemShape::TrivialWithClass {
                genus: 2,
                class: vec![true],
            }),
            Err(CorrError::UnsupportedShape { .. })
        ));
        assert!(matches!(
            elementary(&ElemShape::BasePathChange { genus: 1, pair: 3 }),
            Err(CorrError::UnsupportedShape { .. })
        ));
        assert!(matches!(
            elementary(&ElemShape::TwoHandle {
                genus: 1,
                curve: StandardCurve::Beta(1),
                sign: 1,
            }),
            Err(CorrError::UnsupportedShape { .. })
        ));
        assert!(matches!(
            elementary(&ElemShape::TwoHandle {
                genus: 1,
                curve: StandardCurve::Beta(0),
                sign: 3,
            }),
            Err(CorrError::InvalidParams { .. })
        ));
    }

    #[test]
    fn boundary_rotations_add_under_composition() {
        let r1 = elementary(&ElemShape::Reparam {
            genus: 1,
            angle: 0.4,
        })
        .unwrap();
        let r2 = elementary(&ElemShape::Reparam {
            genus: 1,
            angle: -1.1,
        })
        .unwrap();
        let sum = elementary(&ElemShape::Reparam {
            genus: 1,
            angle: -0.7,
        })
        .unwrap();
        let composed = compose(&r1, &r2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(217);
        for _ in 0..100 {
            let pt = ModuliPoint::random(1, &mut rng);
            let a = single(apply(&composed, &pt, &TOL).unwrap());
            let b = single(apply(&sum, &pt, &TOL).unwrap());
            assert!(a.dist(&b) < 1e-10);
        }
    }

    #[test]
    fn lens_census_examples() {
        let r = lens_intersection(2, 1, 1, 1).unwrap();
        assert_eq!((r.n_central, r.n_spheres, r.perturbed_count), (2, 0, 2));
        let r = lens_intersection(3, 1, 1, 1).unwrap();
        assert_eq!((r.n_central, r.n_spheres, r.perturbed_count), (1, 1, 3));
        let r = lens_intersection(2, 1, -1, 1).unwrap();
        assert_eq!((r.n_central, r.n_spheres, r.perturbed_count), (0, 1, 2));
        assert!(lens_intersection(4, 2, 1, 1).is_err());
        assert!(lens_intersection(0, 1, 1, 1).is_err());
    }

    #[test]
    fn lens_census_rank_is_p() {
        for p in 1..=50u64 {
            for q in [1i64, 3] {
                if crate::homology::gcd_u(p, q.unsigned_abs()) != 1 {
                    continue;
                }
                for &(e0, e1) in &[(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    let r = lens_intersection(p, q, e0, e1).unwrap();
                    assert_eq!(
                        r.perturbed_count, p as u32,
                        "census must have rank p = {p}, q = {q}, signs ({e0},{e1})"
                    );
                    assert_eq!(r.perturbed_count, r.n_central + 2 * r.n_spheres);
                }
            }
        }
    }

    #[test]
    fn s2s1_report() {
        assert!(s2s1_intersection(false).clean_self_intersection);
        assert!(s2s1_intersection(true).disjoint);
    }

    #[test]
    fn correspondence_serde_roundtrip() {
        let c = elementary(&ElemShape::TwoHandle {
            genus: 2,
            curve: StandardCurve::Beta(0),
            sign: -1,
        })
        .unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: Correspondence = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn inconsistent_deserialized_data_is_rejected() {
        let mut c = elementary(&ElemShape::TwoHandle {
            genus: 2,
            curve: StandardCurve::Beta(0),
            sign: 1,
        })
        .unwrap();
        c.target_genus = 2; // lies about the handle bookkeeping
        assert!(c.validate().is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(218);
        let pt = ModuliPoint::random(2, &mut rng);
        assert!(matches!(
            apply_with_params(&c, &pt, &[], &TOL),
            Err(CorrError::UnsupportedShape { .. })
        ));
        assert!(compose(&c, &Correspondence::identity(2)).is_err());
    }
}
