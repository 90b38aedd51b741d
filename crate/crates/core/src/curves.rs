//! Free-homotopy classes of curves on a marked sphere, and multicurves.
//!
//! An unoriented essential simple closed curve is recorded by the conjugacy
//! class of a representing word, with orientation forgotten: the canonical
//! key of [`crate::words::MarkedSphere::canonical_key`].  Whether a class
//! admits a *simple* representative, and whether several classes admit
//! disjoint ones, is not decided algebraically here; a [`Multicurve`]
//! carries an explicit [`DisjointnessCertificate`] recording on what
//! grounds the system is asserted to be realizable disjointly.

use crate::words::{MarkedSphere, Word};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CurveError {
    #[error("word uses x{letter} but the sphere has only {available} punctures")]
    LetterOutOfRange { letter: usize, available: usize },
    #[error("class of {word} is not essential ({kind})")]
    NotEssential { word: Word, kind: CurveKind },
    #[error("duplicate curve class {key}")]
    DuplicateClass { key: Word },
}

/// Algebraic type of a free-homotopy class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CurveKind {
    /// Contractible (or puncture-bounding trivial) class.
    Trivial,
    /// Boundary of a disk containing exactly the one puncture.
    Peripheral { puncture: usize },
    /// Neither trivial nor peripheral.
    Essential,
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveKind::Trivial => f.write_str("trivial"),
            CurveKind::Peripheral { puncture } => write!(f, "peripheral around puncture {puncture}"),
            CurveKind::Essential => f.write_str("essential"),
        }
    }
}

/// A free-homotopy class of unoriented loops, in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CurveClass {
    key: Word,
    kind: CurveKind,
}

impl CurveClass {
    /// Classifies the word's class on the given sphere and canonicalizes it.
    pub fn from_word(sphere: &MarkedSphere, w: &Word) -> Result<Self, CurveError> {
        if !sphere.contains_word(w) {
            return Err(CurveError::LetterOutOfRange {
                letter: w.max_index(),
                available: sphere.n(),
            });
        }
        let key = sphere.canonical_key(w);
        let kind = if key.is_identity() {
            CurveKind::Trivial
        } else if let Some(puncture) = sphere.peripheral_index(w) {
            CurveKind::Peripheral { puncture }
        } else {
            CurveKind::Essential
        };
        Ok(CurveClass { key, kind })
    }

    /// Canonical representative word of the class.
    pub fn key(&self) -> &Word {
        &self.key
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn is_essential(&self) -> bool {
        self.kind == CurveKind::Essential
    }
}

impl fmt::Display for CurveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.key)
    }
}

impl PartialOrd for CurveClass {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CurveClass {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp_graded(&other.key)
    }
}

/// On what grounds a curve system is asserted to consist of disjoint
/// essential simple closed curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisjointnessCertificate {
    /// The caller asserts the representatives are disjoint and simple.
    DeclaredSimple,
    /// Every class appears among the components of the `depth`-th iterated
    /// preimage of a declared-simple system; those components are disjoint
    /// because they form one embedded 1-manifold.
    CertifiedByCoLift { depth: usize },
    /// No disjointness argument is recorded.
    Unverified,
}

impl fmt::Display for DisjointnessCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisjointnessCertificate::DeclaredSimple => f.write_str("declared simple"),
            DisjointnessCertificate::CertifiedByCoLift { depth } => {
                write!(f, "certified by co-lifting at depth {depth}")
            }
            DisjointnessCertificate::Unverified => f.write_str("unverified"),
        }
    }
}

/// A finite system of distinct essential classes on one sphere, sorted by
/// canonical key, with a disjointness certificate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Multicurve {
    sphere: MarkedSphere,
    classes: Vec<CurveClass>,
    certificate: DisjointnessCertificate,
}

impl Multicurve {
    pub fn new(
        sphere: MarkedSphere,
        words: &[Word],
        certificate: DisjointnessCertificate,
    ) -> Result<Self, CurveError> {
        let mut classes = Vec::with_capacity(words.len());
        for w in words {
            let class = CurveClass::from_word(&sphere, w)?;
            if !class.is_essential() {
                return Err(CurveError::NotEssential { word: w.clone(), kind: class.kind() });
            }
            classes.push(class);
        }
        classes.sort();
        for pair in classes.windows(2) {
            if pair[0] == pair[1] {
                return Err(CurveError::DuplicateClass { key: pair[0].key().clone() });
            }
        }
        Ok(Multicurve { sphere, classes, certificate })
    }

    pub fn from_classes(
        sphere: MarkedSphere,
        classes: Vec<CurveClass>,
        certificate: DisjointnessCertificate,
    ) -> Result<Self, CurveError> {
        let words: Vec<Word> = classes.iter().map(|c| c.key().clone()).collect();
        Multicurve::new(sphere, &words, certificate)
    }

    pub fn sphere(&self) -> &MarkedSphere {
        &self.sphere
    }

    pub fn classes(&self) -> &[CurveClass] {
        &self.classes
    }

    pub fn certificate(&self) -> DisjointnessCertificate {
        self.certificate
    }

    pub fn with_certificate(mut self, certificate: DisjointnessCertificate) -> Self {
        self.certificate = certificate;
        self
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Position of a class (by canonical key) in the sorted class list.
    pub fn index_of(&self, key: &Word) -> Option<usize> {
        self.classes.iter().position(|c| c.key() == key)
    }
}

/// Input form of a multicurve: raw representative words plus certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MulticurveSpec {
    pub sphere: MarkedSphere,
    pub curves: Vec<Word>,
    #[serde(default = "default_certificate")]
    pub certificate: DisjointnessCertificate,
}

fn default_certificate() -> DisjointnessCertificate {
    DisjointnessCertificate::DeclaredSimple
}

impl MulticurveSpec {
    pub fn build(&self) -> Result<Multicurve, CurveError> {
        Multicurve::new(self.sphere.clone(), &self.curves, self.certificate)
    }
}
