//! Free-group words on surface generators and their holonomy evaluation.
//!
//! A genus-h surface with one boundary circle has free fundamental group on
//! 2h generators α₁, β₁, …, α_h, β_h. Generators are indexed integers with
//! the α/β pairing by parity: α_{k+1} ↔ 2k, β_{k+1} ↔ 2k+1. Words are freely
//! reduced sequences of signed letters and serialize to JSON as signed
//! 1-based integer arrays (+g ↔ generator g−1, −g ↔ its inverse).

use crate::su2::Su2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WordError {
    #[error("word references generator {gen} but only {count} exist")]
    UnknownGenerator { gen: usize, count: usize },
    #[error("genus must be at least 1")]
    InvalidGenus,
    #[error("unsupported curve: pair index {pair} out of range for genus {genus}")]
    UnsupportedCurve { pair: usize, genus: usize },
}

/// One signed letter: a generator index with exponent ±1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter {
    pub gen: usize,
    pub inverse: bool,
}

impl Letter {
    pub fn new(gen: usize) -> Letter {
        Letter {
            gen,
            inverse: false,
        }
    }

    pub fn inv(self) -> Letter {
        Letter {
            gen: self.gen,
            inverse: !self.inverse,
        }
    }
}

/// Freely reduced word; the constructor reduces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "Vec<i64>", into = "Vec<i64>")]
pub struct Word {
    letters: Vec<Letter>,
}

impl From<Vec<i64>> for Word {
    fn from(signed: Vec<i64>) -> Word {
        let letters = signed
            .into_iter()
            .filter(|&s| s != 0)
            .map(|s| Letter {
                gen: (s.unsigned_abs() as usize) - 1,
                inverse: s < 0,
            })
            .collect();
        Word::from_letters(letters)
    }
}

impl From<Word> for Vec<i64> {
    fn from(w: Word) -> Vec<i64> {
        w.letters
            .iter()
            .map(|l| {
                let v = (l.gen + 1) as i64;
                if l.inverse {
                    -v
                } else {
                    v
                }
            })
            .collect()
    }
}

impl Word {
    pub fn empty() -> Word {
        Word::default()
    }

    /// Single generator to a power.
    pub fn generator(gen: usize, exponent: i64) -> Word {
        let letter = if exponent < 0 {
            Letter::new(gen).inv()
        } else {
            Letter::new(gen)
        };
        Word::from_letters(vec![letter; exponent.unsigned_abs() as usize])
    }

    pub fn from_letters(letters: Vec<Letter>) -> Word {
        let mut reduced: Vec<Letter> = Vec::with_capacity(letters.len());
        for l in letters {
            match reduced.last() {
                Some(&last) if last.gen == l.gen && last.inverse != l.inverse => {
                    reduced.pop();
                }
                _ => reduced.push(l),
            }
        }
        Word { letters: reduced }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word::from_letters(letters)
    }

    pub fn inverse(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|l| l.inv()).collect(),
        }
    }

    /// Largest generator index mentioned, if any.
    pub fn max_generator(&self) -> Option<usize> {
        self.letters.iter().map(|l| l.gen).max()
    }

    /// Exponent sums per generator (abelianization over ℤ).
    pub fn abelianized(&self, n_gens: usize) -> Vec<i64> {
        let mut e = vec![0i64; n_gens];
        for l in &self.letters {
            if l.gen < n_gens {
                e[l.gen] += if l.inverse { -1 } else { 1 };
            }
        }
        e
    }
}

/// Point of the holonomy model: genus plus one group element per generator.
/// Serializes as a flat array of quaternion 4-tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HolonomyPoint {
    holonomies: Vec<Su2>,
}

impl HolonomyPoint {
    pub fn new(holonomies: Vec<Su2>) -> Result<HolonomyPoint, WordError> {
        if holonomies.len() % 2 != 0 {
            return Err(WordError::UnknownGenerator {
                gen: holonomies.len(),
                count: holonomies.len(),
            });
        }
        Ok(HolonomyPoint { holonomies })
    }

    pub fn genus(&self) -> usize {
        self.holonomies.len() / 2
    }

    pub fn holonomies(&self) -> &[Su2] {
        &self.holonomies
    }

    pub fn holonomies_mut(&mut self) -> &mut [Su2] {
        &mut self.holonomies
    }

    /// Holonomy along α_{pair+1}.
    pub fn alpha(&self, pair: usize) -> Su2 {
        self.holonomies[2 * pair]
    }

    /// Holonomy along β_{pair+1}.
    pub fn beta(&self, pair: usize) -> Su2 {
        self.holonomies[2 * pair + 1]
    }
}

/// Evaluates a word at a holonomy point (left-to-right product).
pub fn evaluate(w: &Word, pt: &HolonomyPoint) -> Result<Su2, WordError> {
    let count = pt.holonomies.len();
    let mut acc = Su2::IDENTITY;
    for l in w.letters() {
        if l.gen >= count {
            return Err(WordError::UnknownGenerator { gen: l.gen, count });
        }
        let h = pt.holonomies[l.gen];
        acc = acc.mul(if l.inverse { h.inv() } else { h });
    }
    Ok(acc)
}

/// The boundary word ∏ᵢ αᵢβᵢαᵢ⁻¹βᵢ⁻¹, freely reduced of length 4h.
pub fn boundary_word(h: usize) -> Result<Word, WordError> {
    if h == 0 {
        return Err(WordError::InvalidGenus);
    }
    let mut letters = Vec::with_capacity(4 * h);
    for k in 0..h {
        let a = Letter::new(2 * k);
        let b = Letter::new(2 * k + 1);
        letters.extend_from_slice(&[a, b, a.inv(), b.inv()]);
    }
    Ok(Word::from_letters(letters))
}

/// One of the standard curves α_{pair+1}, β_{pair+1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "curve", content = "pair")]
pub enum StandardCurve {
    Alpha(usize),
    Beta(usize),
}

impl StandardCurve {
    pub fn pair(self) -> usize {
        match self {
            StandardCurve::Alpha(k) | StandardCurve::Beta(k) => k,
        }
    }

    /// Generator index of the curve itself.
    pub fn generator(self) -> usize {
        match self {
            StandardCurve::Alpha(k) => 2 * k,
            StandardCurve::Beta(k) => 2 * k + 1,
        }
    }

    /// Generator index of the dual curve in the same pair.
    pub fn dual_generator(self) -> usize {
        match self {
            StandardCurve::Alpha(k) => 2 * k + 1,
            StandardCurve::Beta(k) => 2 * k,
        }
    }
}

/// A substitution generator → word; composition is by substitution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    images: Vec<Word>,
}

impl Substitution {
    pub fn identity(h: usize) -> Substitution {
        Substitution {
            images: (0..2 * h).map(|g| Word::generator(g, 1)).collect(),
        }
    }

    pub fn new(images: Vec<Word>) -> Substitution {
        Substitution { images }
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn n_generators(&self) -> usize {
        self.images.len()
    }

    pub fn is_identity(&self) -> bool {
        self.images
            .iter()
            .enumerate()
            .all(|(g, w)| w.letters() == [Letter::new(g)])
    }

    /// Applies the substitution letterwise and freely reduces.
    pub fn apply(&self, w: &Word) -> Result<Word, WordError> {
        let mut letters = Vec::new();
        for l in w.letters() {
            let image = self.images.get(l.gen).ok_or(WordError::UnknownGenerator {
                gen: l.gen,
                count: self.images.len(),
            })?;
            if l.inverse {
                letters.extend_from_slice(image.inverse().letters());
            } else {
                letters.extend_from_slice(image.letters());
            }
        }
        Ok(Word::from_letters(letters))
    }

    /// `first` then `second`: (second ∘ first)(g) = second.apply(first(g)).
    pub fn compose(first: &Substitution, second: &Substitution) -> Result<Substitution, WordError> {
        let images = first
            .images
            .iter()
            .map(|w| second.apply(w))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Substitution { images })
    }
}

/// Substitution induced by the right-handed Dehn twist along a standard
/// curve: the dual generator picks up the curve on the right, the rest are
/// fixed. Along β₁ this is α₁ ↦ α₁β₁, β₁ ↦ β₁.
pub fn twist_substitution(curve: StandardCurve, h: usize) -> Result<Substitution, WordError> {
    if curve.pair() >= h {
        return Err(WordError::UnsupportedCurve {
            pair: curve.pair(),
            genus: h,
        });
    }
    let mut images: Vec<Word> = (0..2 * h).map(|g| Word::generator(g, 1)).collect();
    let dual = curve.dual_generator();
    images[dual] = Word::from_letters(vec![Letter::new(dual), Letter::new(curve.generator())]);
    Ok(Substitution { images })
}
