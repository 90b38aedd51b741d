//! Words in the fundamental group of a finitely punctured sphere.
//!
//! A [`Word`] is a freely reduced word in abstract generators `x1, x2, ...`;
//! the letter `x_k` is stored as `+k` and its inverse `X_k` as `-k`.  Words
//! serialize as compact token strings such as `"x1x2X1"` (empty string for
//! the identity).
//!
//! A [`MarkedSphere`] is an ordered list of `n >= 3` puncture labels.  Its
//! fundamental group is generated by one positively-oriented loop `x_i` per
//! puncture subject to the single relation `x1 x2 ... xn = 1`.  Words are
//! put in a canonical normal form by eliminating `x_n`, which realizes the
//! group as free on `x1 ... x_{n-1}`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Largest accepted generator index.  Keeps letters comfortably inside
/// `i32` and guards against absurd parses.
pub const MAX_GENERATOR_INDEX: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("unexpected character {found:?} at byte {pos} (expected 'x' or 'X')")]
    BadToken { pos: usize, found: char },
    #[error("generator letter at byte {pos} is missing its index")]
    MissingIndex { pos: usize },
    #[error("generator index 0 at byte {pos} (indices start at 1)")]
    ZeroIndex { pos: usize },
    #[error("generator index {index} exceeds the supported maximum {max}")]
    IndexTooLarge { index: usize, max: usize },
    #[error("letter value 0 is not a valid generator")]
    ZeroLetter,
    #[error("word references generator x{index} but only {available} are available")]
    GeneratorOutOfRange { index: usize, available: usize },
}

/// A freely reduced word in the generators `x1, x2, ...`.
///
/// The vector invariant: no entry is `0` and no two adjacent entries sum to
/// `0`.  The derived `Ord` is only used for deterministic map keys; the
/// order meaningful to canonical forms is [`Word::cmp_graded`].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<i32>);

impl Word {
    /// The empty (identity) word.
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    /// The single-letter word `x_k`.
    pub fn generator(k: usize) -> Self {
        assert!(k >= 1 && k <= MAX_GENERATOR_INDEX, "generator index out of range");
        Word(vec![k as i32])
    }

    /// The single-letter word `x_k^{-1}`.
    pub fn generator_inverse(k: usize) -> Self {
        assert!(k >= 1 && k <= MAX_GENERATOR_INDEX, "generator index out of range");
        Word(vec![-(k as i32)])
    }

    /// Builds a word from signed letters (`+k` for `x_k`, `-k` for its
    /// inverse), freely reducing.
    pub fn from_letters<I: IntoIterator<Item = i32>>(letters: I) -> Result<Self, WordError> {
        let mut out: Vec<i32> = Vec::new();
        for l in letters {
            if l == 0 {
                return Err(WordError::ZeroLetter);
            }
            let idx = l.unsigned_abs() as usize;
            if idx > MAX_GENERATOR_INDEX {
                return Err(WordError::IndexTooLarge { index: idx, max: MAX_GENERATOR_INDEX });
            }
            push_reduced(&mut out, l);
        }
        Ok(Word(out))
    }

    /// Parses a token string such as `"x1x2X1"`.  ASCII whitespace between
    /// letters is ignored; the empty string is the identity.
    pub fn parse(s: &str) -> Result<Self, WordError> {
        let mut out: Vec<i32> = Vec::new();
        let bytes = s.as_bytes();
        let mut i = 0usize;
        while i < bytes.len() {
            let b = bytes[i];
            if b.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            let sign: i64 = match b {
                b'x' => 1,
                b'X' => -1,
                _ => {
                    return Err(WordError::BadToken {
                        pos: i,
                        found: s[i..].chars().next().unwrap_or('?'),
                    })
                }
            };
            let start = i + 1;
            let mut j = start;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j == start {
                return Err(WordError::MissingIndex { pos: i });
            }
            let digits = &s[start..j];
            let index: usize = digits
                .parse()
                .map_err(|_| WordError::IndexTooLarge { index: usize::MAX, max: MAX_GENERATOR_INDEX })?;
            if index == 0 {
                return Err(WordError::ZeroIndex { pos: start });
            }
            if index > MAX_GENERATOR_INDEX {
                return Err(WordError::IndexTooLarge { index, max: MAX_GENERATOR_INDEX });
            }
            push_reduced(&mut out, sign as i32 * index as i32);
            i = j;
        }
        Ok(Word(out))
    }

    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest generator index appearing (0 for the identity).
    pub fn max_index(&self) -> usize {
        self.0.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| -l).collect())
    }

    /// Concatenation `self · other`, freely reduced at the seam.
    pub fn concat(&self, other: &Word) -> Word {
        let mut out = self.0.clone();
        for &l in &other.0 {
            push_reduced(&mut out, l);
        }
        Word(out)
    }

    /// `g · self · g^{-1}`.
    pub fn conjugated_by(&self, g: &Word) -> Word {
        g.concat(self).concat(&g.inverse())
    }

    /// Integer power (negative exponents use the inverse).
    pub fn pow(&self, e: i32) -> Word {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::identity();
        for _ in 0..e.unsigned_abs() {
            out = out.concat(&base);
        }
        out
    }

    /// Splits off the conjugating prefix: returns `(core, c)` with
    /// `self = c · core · c^{-1}` and `core` cyclically reduced.
    pub fn cyclic_reduction(&self) -> (Word, Word) {
        let v = &self.0;
        let mut a = 0usize;
        let mut b = v.len();
        while b - a >= 2 && v[a] + v[b - 1] == 0 {
            a += 1;
            b -= 1;
        }
        (Word(v[a..b].to_vec()), Word(v[..a].to_vec()))
    }

    /// Applies the homomorphism of free groups sending `x_{i}` to
    /// `images[i-1]`.
    pub fn substitute(&self, images: &[Word]) -> Result<Word, WordError> {
        let mut out = Word::identity();
        for &l in &self.0 {
            let idx = l.unsigned_abs() as usize;
            let img = images.get(idx - 1).ok_or(WordError::GeneratorOutOfRange {
                index: idx,
                available: images.len(),
            })?;
            if l > 0 {
                out = out.concat(img);
            } else {
                out = out.concat(&img.inverse());
            }
        }
        Ok(out)
    }

    /// Compact token string, e.g. `"x1x2X1"`; empty for the identity.
    pub fn token_string(&self) -> String {
        let mut s = String::new();
        for &l in &self.0 {
            if l > 0 {
                s.push('x');
            } else {
                s.push('X');
            }
            s.push_str(&l.unsigned_abs().to_string());
        }
        s
    }

    /// Graded comparison used for canonical representatives: shorter words
    /// first, then letterwise with `x1 < X1 < x2 < X2 < ...`.
    pub fn cmp_graded(&self, other: &Word) -> std::cmp::Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| {
                for (a, b) in self.0.iter().zip(other.0.iter()) {
                    let o = letter_rank(*a).cmp(&letter_rank(*b));
                    if o != std::cmp::Ordering::Equal {
                        return o;
                    }
                }
                std::cmp::Ordering::Equal
            })
    }
}

/// Rank of a letter in the order `x1 < X1 < x2 < X2 < ...`.
fn letter_rank(l: i32) -> (u32, u8) {
    (l.unsigned_abs(), if l > 0 { 0 } else { 1 })
}

/// Offset `r` such that rotating `base` left by `r` yields `target`.
fn rotation_offset(base: &[i32], target: &[i32]) -> Option<usize> {
    let len = base.len();
    if target.len() != len {
        return None;
    }
    (0..len).find(|&r| (0..len).all(|k| base[(r + k) % len] == target[k]))
}

/// Witness that a word is conjugate to a single puncture loop: the word
/// equals `conjugator · x_puncture^{e} · conjugator^{-1}` in the sphere
/// group, where `e` is `+1` if `positive` and `-1` otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeripheralForm {
    pub puncture: usize,
    pub positive: bool,
    pub conjugator: Word,
}

fn push_reduced(out: &mut Vec<i32>, l: i32) {
    if let Some(&last) = out.last() {
        if last + l == 0 {
            out.pop();
            return;
        }
    }
    out.push(l);
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token_string())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({:?})", self.token_string())
    }
}

impl FromStr for Word {
    type Err = WordError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Word::parse(s)
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.token_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Word::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SphereError {
    #[error("a marked sphere needs at least 3 punctures, got {0}")]
    TooFewPunctures(usize),
    #[error("duplicate puncture label {0:?}")]
    DuplicateLabel(String),
    #[error("puncture labels must be non-empty")]
    EmptyLabel,
}

/// An ordered set of `n >= 3` labelled punctures on the sphere.
///
/// Puncture indices are 1-based throughout: `x_i` is the loop around the
/// `i`-th puncture, and `x1 x2 ... xn = 1` in the fundamental group.
/// Serializes as the plain list of labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedSphere {
    labels: Vec<String>,
}

impl Serialize for MarkedSphere {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.labels.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MarkedSphere {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let labels = Vec::<String>::deserialize(deserializer)?;
        MarkedSphere::new(labels).map_err(serde::de::Error::custom)
    }
}

impl MarkedSphere {
    pub fn new<S: Into<String>, I: IntoIterator<Item = S>>(labels: I) -> Result<Self, SphereError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 3 {
            return Err(SphereError::TooFewPunctures(labels.len()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if l.is_empty() {
                return Err(SphereError::EmptyLabel);
            }
            if !seen.insert(l.clone()) {
                return Err(SphereError::DuplicateLabel(l.clone()));
            }
        }
        Ok(MarkedSphere { labels })
    }

    /// Convenience constructor with labels `p1 ... pn`.
    pub fn with_anonymous_labels(n: usize) -> Result<Self, SphereError> {
        MarkedSphere::new((1..=n).map(|i| format!("p{i}")))
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Label of puncture `i` (1-based).
    pub fn label(&self, i: usize) -> &str {
        &self.labels[i - 1]
    }

    /// 1-based index of a label.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label).map(|p| p + 1)
    }

    /// Whether every letter of `w` names one of this sphere's punctures.
    pub fn contains_word(&self, w: &Word) -> bool {
        w.max_index() <= self.n()
    }

    /// The defining relator `x1 x2 ... xn`.
    pub fn relator(&self) -> Word {
        Word(self.standard_range(1, self.n()))
    }

    fn standard_range(&self, from: usize, to: usize) -> Vec<i32> {
        (from..=to).map(|i| i as i32).collect()
    }

    /// Normal form: eliminates `x_n` via `x_n = (x1 ... x_{n-1})^{-1}` and
    /// freely reduces, realizing the group as free on `x1 ... x_{n-1}`.
    pub fn normal_form(&self, w: &Word) -> Word {
        let n = self.n() as i32;
        let xn_image: Vec<i32> = (1..n).rev().map(|i| -i).collect();
        let mut out: Vec<i32> = Vec::with_capacity(w.len());
        for &l in w.letters() {
            if l == n {
                for &m in &xn_image {
                    push_reduced(&mut out, m);
                }
            } else if l == -n {
                for i in 1..n {
                    push_reduced(&mut out, i);
                }
            } else {
                push_reduced(&mut out, l);
            }
        }
        Word(out)
    }

    /// Do two words represent the same group element?
    pub fn words_equal(&self, a: &Word, b: &Word) -> bool {
        self.normal_form(a) == self.normal_form(b)
    }

    /// Is `w` trivial in the fundamental group?
    pub fn is_trivial(&self, w: &Word) -> bool {
        self.normal_form(w).is_identity()
    }

    /// Canonical representative of the free-homotopy class of `w` (i.e. its
    /// conjugacy class, with orientation forgotten): the graded-least
    /// cyclic rotation among the cyclic reduction of the normal form and of
    /// its inverse.  Identity for trivial words.
    pub fn canonical_key(&self, w: &Word) -> Word {
        let (core, _) = self.normal_form(w).cyclic_reduction();
        if core.is_identity() {
            return core;
        }
        let mut best: Option<Word> = None;
        for cand in [core.clone(), core.inverse()] {
            let v = &cand.0;
            for r in 0..v.len() {
                let rotated: Vec<i32> = v[r..].iter().chain(v[..r].iter()).copied().collect();
                let rw = Word(rotated);
                match &best {
                    None => best = Some(rw),
                    Some(b) => {
                        if rw.cmp_graded(b) == std::cmp::Ordering::Less {
                            best = Some(rw);
                        }
                    }
                }
            }
        }
        best.unwrap()
    }

    /// Cyclically reduced core of the normal form, together with the
    /// conjugating prefix: returns `(core, pre)` with
    /// `normal_form(w) = pre · core · pre^{-1}`.
    pub fn conjugacy_core(&self, w: &Word) -> (Word, Word) {
        self.normal_form(w).cyclic_reduction()
    }

    /// If `w` is conjugate (in the sphere group) to a single puncture loop
    /// `x_i` or its inverse, returns the puncture, the orientation, and a
    /// conjugating element `v` with `w = v · x_i^{±1} · v^{-1}`.
    ///
    /// Returns `None` for the trivial class and for non-peripheral classes.
    pub fn oriented_peripheral_form(&self, w: &Word) -> Option<PeripheralForm> {
        let (core, pre) = self.conjugacy_core(w);
        if core.is_identity() {
            return None;
        }
        for puncture in 1..=self.n() {
            for positive in [true, false] {
                let rep = if positive {
                    Word::generator(puncture)
                } else {
                    Word::generator_inverse(puncture)
                };
                let base = self.conjugacy_core(&rep).0;
                if base.len() != core.len() {
                    continue;
                }
                if let Some(r) = rotation_offset(base.letters(), core.letters()) {
                    // rot_r(base) = q^{-1} · base · q  with  q = base[..r]
                    let q = Word::from_letters(base.letters()[..r].iter().copied())
                        .expect("letters of a valid word");
                    let conjugator = pre.concat(&q.inverse());
                    return Some(PeripheralForm { puncture, positive, conjugator });
                }
            }
        }
        None
    }

    /// If `w` is freely homotopic to a loop around a single puncture (in
    /// either orientation), returns that puncture's 1-based index.
    pub fn peripheral_index(&self, w: &Word) -> Option<usize> {
        let key = self.canonical_key(w);
        if key.len() == 1 {
            let l = key.0[0];
            return Some(l.unsigned_abs() as usize);
        }
        // x_n is represented by (x1 ... x_{n-1})^{-1} in normal form.
        let n = self.n();
        if key.len() == n - 1 && key == self.canonical_key(&Word::generator(n)) {
            return Some(n);
        }
        None
    }
}
