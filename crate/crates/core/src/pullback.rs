//! Pullback of curve classes under a branched covering, and the induced
//! linear transition data on a multicurve.
//!
//! The preimage of a loop `w` decomposes along the cycles of its sheet
//! monodromy: a cycle of length `k` contributes one component, covering the
//! loop with degree `k`, whose class is the accumulated lift word around
//! the cycle.  The transition matrix of a multicurve `Γ = {γ_1, ..., γ_m}`
//! has entry `(i, j)` equal to `Σ 1/deg(δ)` over components `δ` of the
//! preimage of `γ_j` in the class `γ_i`.

use crate::curves::{CurveClass, CurveError, Multicurve};
use crate::matrix::TransitionMatrix;
use crate::recursion::{BranchedCoverRecursion, RecursionError};
use crate::words::Word;
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PullbackError {
    #[error(transparent)]
    Recursion(#[from] RecursionError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("multicurve lives on a different sphere than the covering's target")]
    SphereMismatch,
    #[error("transition data needs a self-cover (source and target spheres differ)")]
    NotSelfCover,
}

/// One component of the preimage of a loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PullbackComponent {
    /// Accumulated lift word around the monodromy cycle (a loop in the
    /// source sphere).
    pub word: Word,
    /// Its free-homotopy class.
    pub class: CurveClass,
    /// Sheets of the monodromy cycle carrying the component.
    pub sheets: Vec<usize>,
    /// Covering degree of the component over the base loop (= cycle length).
    pub mapping_degree: usize,
}

/// Components of the preimage of the class of `w`.
pub fn pullback_class(
    f: &BranchedCoverRecursion,
    w: &Word,
) -> Result<Vec<PullbackComponent>, PullbackError> {
    let action = f.evaluate(w)?;
    let mut components = Vec::new();
    for cycle in action.cycles() {
        let word = action.cycle_word(&cycle);
        let class = CurveClass::from_word(f.source(), &word)?;
        let mapping_degree = cycle.len();
        components.push(PullbackComponent { word, class, sheets: cycle, mapping_degree });
    }
    Ok(components)
}

/// Pullback of every class of a multicurve (component lists are parallel
/// to `multicurve.classes()`).
pub fn pullback_multicurve(
    f: &BranchedCoverRecursion,
    multicurve: &Multicurve,
) -> Result<Vec<Vec<PullbackComponent>>, PullbackError> {
    if multicurve.sphere() != f.target() {
        return Err(PullbackError::SphereMismatch);
    }
    multicurve.classes().iter().map(|c| pullback_class(f, c.key())).collect()
}

/// Transition data of a multicurve under a self-cover.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitionData {
    /// Entry `(i, j)`: weighted count of preimage components of class `j`
    /// in class `i`.
    pub matrix: TransitionMatrix,
    /// Essential preimage classes that are not in the multicurve (the
    /// system is stable, i.e. invariant up to isotopy, iff this is empty).
    pub escaped: Vec<CurveClass>,
    /// Component lists, parallel to the multicurve's classes.
    pub components: Vec<Vec<PullbackComponent>>,
}

impl TransitionData {
    pub fn is_stable(&self) -> bool {
        self.escaped.is_empty()
    }
}

/// Builds the transition matrix of a multicurve under `f`, recording any
/// essential preimage classes that escape the system.
pub fn transition_data(
    f: &BranchedCoverRecursion,
    multicurve: &Multicurve,
) -> Result<TransitionData, PullbackError> {
    if f.source() != f.target() {
        return Err(PullbackError::NotSelfCover);
    }
    let components = pullback_multicurve(f, multicurve)?;
    let m = multicurve.len();
    let mut matrix = TransitionMatrix::zero(m);
    let mut escaped: Vec<CurveClass> = Vec::new();
    for (j, comps) in components.iter().enumerate() {
        for comp in comps {
            if !comp.class.is_essential() {
                continue;
            }
            match multicurve.index_of(comp.class.key()) {
                Some(i) => {
                    let weight =
                        BigRational::new(BigInt::from(1), BigInt::from(comp.mapping_degree));
                    matrix.add_to_entry(i, j, weight);
                }
                None => {
                    if !escaped.iter().any(|c| c == &comp.class) {
                        escaped.push(comp.class.clone());
                    }
                }
            }
        }
    }
    escaped.sort();
    Ok(TransitionData { matrix, escaped, components })
}
