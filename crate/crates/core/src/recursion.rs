//! Finite encoding of branched coverings between marked spheres.
//!
//! A degree-`d` branched covering `f` from a `source` marked sphere to a
//! `target` marked sphere, unbranched away from the target punctures, is
//! encoded by its monodromy and lifting data: for each target puncture loop
//! `x_i` a permutation of the `d` sheets and, per sheet `s`, a word
//! `u_{x_i,s}` in the source sphere group.  Geometrically: number the
//! points of the fiber over the basepoint `1..d`, pick an arc from each to
//! the first; the lift of `x_i` starting at sheet `s` ends at sheet
//! `s · x_i`, and closing it up with the chosen arcs traces the loop
//! `u_{x_i,s}` in the source sphere.
//!
//! Permutations act on the right: `s · vw = (s · v) · w`, and lift words
//! compose by the cocycle rule `u_{vw,s} = u_{v,s} · u_{w, s·v}`.

use crate::portrait::Portrait;
use crate::words::{MarkedSphere, Word};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecursionError {
    #[error("degree must be at least 1")]
    ZeroDegree,
    #[error("expected one generator action per target puncture ({expected}), got {found}")]
    WrongActionCount { expected: usize, found: usize },
    #[error("generator action {index}: permutation has length {found}, expected degree {expected}")]
    WrongPermutationLength { index: usize, expected: usize, found: usize },
    #[error("generator action {index}: {found} lift words, expected degree {expected}")]
    WrongLiftCount { index: usize, expected: usize, found: usize },
    #[error("generator action {index} is not a permutation of 1..={degree}")]
    NotAPermutation { index: usize, degree: usize },
    #[error("generator action {index}, sheet {sheet}: lift word uses x{letter} but the source sphere has only {available} punctures")]
    LiftLetterOutOfRange { index: usize, sheet: usize, letter: usize, available: usize },
    #[error("word uses x{letter} but the target sphere has only {available} punctures")]
    WordLetterOutOfRange { letter: usize, available: usize },
    #[error("cannot compose: inner map's target sphere differs from outer map's source sphere")]
    CompositionMismatch,
}

/// Monodromy of one target puncture loop: where each sheet goes and which
/// source-sphere word its lift closes up to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorAction {
    /// Image of each sheet (1-based): sheet `s` goes to `permutation[s-1]`.
    pub permutation: Vec<usize>,
    /// Lift word per sheet, over the source sphere's generators.
    pub lifts: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RecursionJson {
    source: MarkedSphere,
    target: MarkedSphere,
    degree: usize,
    actions: Vec<GeneratorAction>,
}

/// A branched covering of marked spheres in monodromy/lift encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RecursionJson", into = "RecursionJson")]
pub struct BranchedCoverRecursion {
    source: MarkedSphere,
    target: MarkedSphere,
    degree: usize,
    actions: Vec<GeneratorAction>,
}

impl TryFrom<RecursionJson> for BranchedCoverRecursion {
    type Error = RecursionError;
    fn try_from(j: RecursionJson) -> Result<Self, Self::Error> {
        BranchedCoverRecursion::new(j.source, j.target, j.degree, j.actions)
    }
}

impl From<BranchedCoverRecursion> for RecursionJson {
    fn from(r: BranchedCoverRecursion) -> Self {
        RecursionJson { source: r.source, target: r.target, degree: r.degree, actions: r.actions }
    }
}

impl BranchedCoverRecursion {
    /// Builds a recursion after checking the data is well-shaped: one
    /// action per target puncture, each a permutation of `1..=degree` with
    /// one lift word per sheet, lift letters within the source sphere.
    ///
    /// Semantic coherence (that the data really describes a branched cover
    /// of spheres with every marked point accounted for) is checked by
    /// [`BranchedCoverRecursion::validate`].
    pub fn new(
        source: MarkedSphere,
        target: MarkedSphere,
        degree: usize,
        actions: Vec<GeneratorAction>,
    ) -> Result<Self, RecursionError> {
        if degree == 0 {
            return Err(RecursionError::ZeroDegree);
        }
        if actions.len() != target.n() {
            return Err(RecursionError::WrongActionCount {
                expected: target.n(),
                found: actions.len(),
            });
        }
        for (idx, action) in actions.iter().enumerate() {
            let index = idx + 1;
            if action.permutation.len() != degree {
                return Err(RecursionError::WrongPermutationLength {
                    index,
                    expected: degree,
                    found: action.permutation.len(),
                });
            }
            if action.lifts.len() != degree {
                return Err(RecursionError::WrongLiftCount {
                    index,
                    expected: degree,
                    found: action.lifts.len(),
                });
            }
            let mut seen = vec![false; degree];
            for &img in &action.permutation {
                if img == 0 || img > degree || seen[img - 1] {
                    return Err(RecursionError::NotAPermutation { index, degree });
                }
                seen[img - 1] = true;
            }
            for (s, lift) in action.lifts.iter().enumerate() {
                if !source.contains_word(lift) {
                    return Err(RecursionError::LiftLetterOutOfRange {
                        index,
                        sheet: s + 1,
                        letter: lift.max_index(),
                        available: source.n(),
                    });
                }
            }
        }
        Ok(BranchedCoverRecursion { source, target, degree, actions })
    }

    /// The degree-1 identity covering of a sphere.
    pub fn identity(sphere: MarkedSphere) -> Self {
        let actions = (1..=sphere.n())
            .map(|i| GeneratorAction { permutation: vec![1], lifts: vec![Word::generator(i)] })
            .collect();
        BranchedCoverRecursion::new(sphere.clone(), sphere, 1, actions)
            .expect("identity data is well-shaped")
    }

    pub fn source(&self) -> &MarkedSphere {
        &self.source
    }

    pub fn target(&self) -> &MarkedSphere {
        &self.target
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn actions(&self) -> &[GeneratorAction] {
        &self.actions
    }

    /// Action of the target puncture loop `x_i` (1-based).
    pub fn action(&self, i: usize) -> &GeneratorAction {
        &self.actions[i - 1]
    }

    /// Monodromy and lifts of an arbitrary word in the target sphere group.
    ///
    /// Inverse letters lift by `u_{y^{-1},s} = (u_{y, s·y^{-1}})^{-1}` and
    /// concatenation by the cocycle rule.
    pub fn evaluate(&self, w: &Word) -> Result<WordAction, RecursionError> {
        if !self.target.contains_word(w) {
            return Err(RecursionError::WordLetterOutOfRange {
                letter: w.max_index(),
                available: self.target.n(),
            });
        }
        let d = self.degree;
        let mut perm: Vec<usize> = (1..=d).collect();
        let mut lifts: Vec<Word> = vec![Word::identity(); d];
        for &l in w.letters() {
            let gen = &self.actions[l.unsigned_abs() as usize - 1];
            if l > 0 {
                for s in 0..d {
                    let here = perm[s];
                    lifts[s] = lifts[s].concat(&gen.lifts[here - 1]);
                    perm[s] = gen.permutation[here - 1];
                }
            } else {
                let inv = invert_permutation(&gen.permutation);
                for s in 0..d {
                    let dest = inv[perm[s] - 1];
                    lifts[s] = lifts[s].concat(&gen.lifts[dest - 1].inverse());
                    perm[s] = dest;
                }
            }
        }
        Ok(WordAction { perm, lifts })
    }

    /// Composition `self ∘ inner` (apply `inner` first).  Requires the
    /// inner map's target sphere to equal this map's source sphere.
    ///
    /// Sheets of the composite are pairs `(s, t)` of a sheet `s` of `self`
    /// and a sheet `t` of `inner`, numbered `(s-1)·deg(inner) + t`.
    pub fn after(&self, inner: &BranchedCoverRecursion) -> Result<Self, RecursionError> {
        if inner.target != self.source {
            return Err(RecursionError::CompositionMismatch);
        }
        let d_out = self.degree;
        let d_in = inner.degree;
        let d = d_out * d_in;
        let mut actions = Vec::with_capacity(self.target.n());
        for i in 1..=self.target.n() {
            let outer = self.action(i);
            let mut permutation = vec![0usize; d];
            let mut lifts = vec![Word::identity(); d];
            for s in 1..=d_out {
                let through = inner.evaluate(&outer.lifts[s - 1])?;
                let s_img = outer.permutation[s - 1];
                for t in 1..=d_in {
                    let combined = (s - 1) * d_in + t;
                    permutation[combined - 1] = (s_img - 1) * d_in + through.sheet_image(t);
                    lifts[combined - 1] = through.lift(t).clone();
                }
            }
            actions.push(GeneratorAction { permutation, lifts });
        }
        BranchedCoverRecursion::new(inner.source.clone(), self.target.clone(), d, actions)
    }

    /// Full coherence check.  On success the covering is genuinely a
    /// branched covering of the sphere by the sphere with every marked
    /// point accounted for, and the report carries the induced puncture
    /// portrait plus, per source puncture, the monodromy cycle designating
    /// it in the fiber.
    pub fn validate(&self) -> Result<ValidationReport, ValidationError> {
        self.check_transitive()?;
        self.check_relator()?;

        let n_src = self.source.n();
        let mut designations: Vec<Option<DesignatedCycle>> = vec![None; n_src];
        let mut unmarked_critical: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut total_branching = 0usize;

        for i in 1..=self.target.n() {
            let action = self
                .evaluate(&Word::generator(i))
                .expect("generator of the target sphere");
            for cycle in action.cycles() {
                total_branching += cycle.len() - 1;
                let base_sheet = cycle[0];
                let acc = action.cycle_word(&cycle);
                if self.source.is_trivial(&acc) {
                    if cycle.len() > 1 {
                        unmarked_critical.entry(i).or_default().push(cycle.len());
                    }
                    continue;
                }
                let form = self.source.oriented_peripheral_form(&acc).ok_or_else(|| {
                    ValidationError::CycleNotPeripheral { target: i, base_sheet, word: acc.clone() }
                })?;
                if !form.positive {
                    return Err(ValidationError::ReversedOrientation {
                        target: i,
                        puncture: form.puncture,
                        base_sheet,
                    });
                }
                let slot = &mut designations[form.puncture - 1];
                if slot.is_some() {
                    return Err(ValidationError::DuplicateMarking { puncture: form.puncture });
                }
                *slot = Some(DesignatedCycle {
                    source: form.puncture,
                    target: i,
                    base_sheet,
                    sheets: cycle,
                    conjugator: form.conjugator,
                });
            }
        }

        let mut resolved = Vec::with_capacity(n_src);
        for (idx, slot) in designations.into_iter().enumerate() {
            match slot {
                Some(dc) => resolved.push(dc),
                None => return Err(ValidationError::MissingMarking { puncture: idx + 1 }),
            }
        }

        let expected = 2 * self.degree - 2;
        if total_branching != expected {
            return Err(ValidationError::WrongBranching { expected, found: total_branching });
        }

        for degrees in unmarked_critical.values_mut() {
            degrees.sort_unstable();
        }
        let portrait = Portrait::from_parts(
            self.source.clone(),
            self.target.clone(),
            self.degree,
            resolved.iter().map(|dc| (dc.target, dc.sheets.len())).collect(),
            unmarked_critical,
        );

        Ok(ValidationReport { degree: self.degree, portrait, designations: resolved })
    }

    fn check_transitive(&self) -> Result<(), ValidationError> {
        let d = self.degree;
        let mut reached = vec![false; d];
        let mut stack = vec![1usize];
        reached[0] = true;
        let mut count = 1usize;
        while let Some(s) = stack.pop() {
            for action in &self.actions {
                for t in [action.permutation[s - 1], invert_permutation(&action.permutation)[s - 1]]
                {
                    if !reached[t - 1] {
                        reached[t - 1] = true;
                        count += 1;
                        stack.push(t);
                    }
                }
            }
        }
        if count != d {
            let orbit = (1..=d).filter(|&s| reached[s - 1]).collect();
            return Err(ValidationError::NotTransitive { orbit });
        }
        Ok(())
    }

    fn check_relator(&self) -> Result<(), ValidationError> {
        let relator = self.target.relator();
        let action = self.evaluate(&relator).expect("relator letters are in range");
        for s in 1..=self.degree {
            if action.sheet_image(s) != s {
                return Err(ValidationError::RelatorPermutes { sheet: s, image: action.sheet_image(s) });
            }
        }
        for s in 1..=self.degree {
            if !self.source.is_trivial(action.lift(s)) {
                return Err(ValidationError::RelatorLiftNontrivial {
                    sheet: s,
                    word: action.lift(s).clone(),
                });
            }
        }
        Ok(())
    }
}

fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (s, &img) in perm.iter().enumerate() {
        inv[img - 1] = s + 1;
    }
    inv
}

/// Monodromy and per-sheet lifts of a single target word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordAction {
    perm: Vec<usize>,
    lifts: Vec<Word>,
}

impl WordAction {
    pub fn degree(&self) -> usize {
        self.perm.len()
    }

    /// `s · w` for a sheet `s` (1-based).
    pub fn sheet_image(&self, s: usize) -> usize {
        self.perm[s - 1]
    }

    /// Lift word starting at sheet `s` (1-based).
    pub fn lift(&self, s: usize) -> &Word {
        &self.lifts[s - 1]
    }

    pub fn is_identity_permutation(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &img)| img == i + 1)
    }

    /// Cycles of the sheet permutation.  Each cycle starts at its least
    /// sheet and follows the action; cycles are ordered by least sheet.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let d = self.degree();
        let mut seen = vec![false; d];
        let mut cycles = Vec::new();
        for start in 1..=d {
            if seen[start - 1] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut s = start;
            while !seen[s - 1] {
                seen[s - 1] = true;
                cycle.push(s);
                s = self.sheet_image(s);
            }
            cycles.push(cycle);
        }
        cycles
    }

    /// Accumulated lift word around a cycle, starting at `cycle[0]`: the
    /// lift of `w^{|cycle|}` based at that sheet.
    pub fn cycle_word(&self, cycle: &[usize]) -> Word {
        let mut acc = Word::identity();
        for &s in cycle {
            acc = acc.concat(self.lift(s));
        }
        acc
    }
}

/// Which monodromy cycle designates a source puncture: the loop `x_target`
/// lifted from `base_sheet` closes up after `sheets.len()` strands and
/// traces `conjugator · x_source · conjugator^{-1}` in the source sphere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DesignatedCycle {
    pub source: usize,
    pub target: usize,
    pub base_sheet: usize,
    pub sheets: Vec<usize>,
    pub conjugator: Word,
}

impl DesignatedCycle {
    /// Local degree of the covering at the source puncture.
    pub fn degree(&self) -> usize {
        self.sheets.len()
    }
}

/// Result of a successful coherence check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub degree: usize,
    pub portrait: Portrait,
    /// One entry per source puncture, in puncture order.
    pub designations: Vec<DesignatedCycle>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("sheet monodromy is not transitive: sheets {orbit:?} form a proper invariant set, so the covering space is disconnected")]
    NotTransitive { orbit: Vec<usize> },
    #[error("the puncture product x1...xn moves sheet {sheet} to {image}; it must act trivially")]
    RelatorPermutes { sheet: usize, image: usize },
    #[error("the puncture product x1...xn lifts at sheet {sheet} to the non-contractible loop {word}")]
    RelatorLiftNontrivial { sheet: usize, word: Word },
    #[error("lift of x{target} around the cycle at sheet {base_sheet} traces {word}, which is neither contractible nor a puncture loop")]
    CycleNotPeripheral { target: usize, base_sheet: usize, word: Word },
    #[error("lift of x{target} at sheet {base_sheet} winds negatively around source puncture {puncture}; puncture loops must lift with positive orientation")]
    ReversedOrientation { target: usize, puncture: usize, base_sheet: usize },
    #[error("source puncture {puncture} is designated by more than one monodromy cycle")]
    DuplicateMarking { puncture: usize },
    #[error("source puncture {puncture} is not designated by any monodromy cycle")]
    MissingMarking { puncture: usize },
    #[error("total branching {found} does not match 2·degree-2 = {expected}, so the covering surface is not a sphere")]
    WrongBranching { expected: usize, found: usize },
}
