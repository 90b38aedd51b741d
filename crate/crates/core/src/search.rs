//! Saturation of curve systems under pullback, and the obstruction search.
//!
//! Starting from a seed system, `saturate` accumulates the essential
//! classes of iterated preimage components until nothing new appears (or a
//! budget runs out).  The accumulation starts with the seed's preimage
//! classes, not the seed: a seed class belongs to the saturation only if
//! it recurs under pullback.  A closed accumulation is invariant up to
//! isotopy by construction, so its transition matrix is defined; an
//! obstruction is a closed system whose matrix has spectral radius at
//! least 1.
//!
//! Disjointness bookkeeping: the classes of the `n`-th iterated preimage
//! of a disjointly-realized system are simultaneously embedded, so if the
//! closed system equals one exact-depth class set it is certified disjoint
//! ([`DisjointnessCertificate::CertifiedByCoLift`]); otherwise the verdict
//! is downgraded to a candidate.

use crate::curves::{CurveClass, DisjointnessCertificate, Multicurve};
use crate::matrix::{CertifyOptions, SpectralCertificate, ThresholdComparison, TransitionMatrix};
use crate::pullback::{pullback_class, transition_data, PullbackError};
use crate::recursion::BranchedCoverRecursion;
use crate::words::Word;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error(transparent)]
    Pullback(#[from] PullbackError),
    #[error(transparent)]
    Curve(#[from] crate::curves::CurveError),
    #[error(transparent)]
    Matrix(#[from] crate::matrix::MatrixError),
    #[error("obstruction search needs a self-cover (source and target spheres differ)")]
    NotSelfCover,
    #[error("the sphere has too few punctures for essential curves")]
    NoEssentialCurves,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Pullback depth explored per seed.
    pub max_iterations: usize,
    /// Largest accumulated system size.
    pub max_classes: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_iterations: 10, max_classes: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SaturationStatus {
    /// Every essential preimage class of the system lies in the system.
    Closed,
    /// More classes kept appearing than the class budget allows.
    ClassBudgetExceeded,
    /// The system was still growing when the depth budget ran out.
    IterationBudgetExceeded,
}

/// Result of saturating a seed under pullback.
#[derive(Debug, Clone, Serialize)]
pub struct Saturation {
    pub multicurve: Multicurve,
    pub status: SaturationStatus,
    /// First appearance depth of each class, parallel to the classes.
    pub first_depth: Vec<usize>,
    /// Depths actually explored.
    pub iterations: usize,
}

/// Closes a seed system under pullback, within budget.
pub fn saturate(
    f: &BranchedCoverRecursion,
    seed: &Multicurve,
    budget: &SearchBudget,
) -> Result<Saturation, SearchError> {
    if f.source() != f.target() {
        return Err(SearchError::NotSelfCover);
    }
    if seed.sphere() != f.target() {
        return Err(PullbackError::SphereMismatch.into());
    }

    // Memoized essential pullback classes per class key.
    let mut memo: BTreeMap<Word, Vec<CurveClass>> = BTreeMap::new();
    let mut essential_pullback = |key: &Word| -> Result<Vec<CurveClass>, SearchError> {
        if let Some(v) = memo.get(key) {
            return Ok(v.clone());
        }
        let comps = pullback_class(f, key)?;
        let classes: Vec<CurveClass> =
            comps.into_iter().filter(|c| c.class.is_essential()).map(|c| c.class).collect();
        memo.insert(key.clone(), classes.clone());
        Ok(classes)
    };

    // Accumulated classes with first-appearance depth, and the exact-depth
    // class sets S_k (S_0 = seed, excluded from the accumulation).
    let mut first_depth: BTreeMap<Word, usize> = BTreeMap::new();
    let mut acc: BTreeMap<Word, CurveClass> = BTreeMap::new();
    let mut exact: Vec<BTreeSet<Word>> =
        vec![seed.classes().iter().map(|c| c.key().clone()).collect()];

    let mut class_budget_hit = false;
    for depth in 1..=budget.max_iterations {
        let prev = exact.last().unwrap().clone();
        if prev.is_empty() {
            exact.push(BTreeSet::new());
            continue;
        }
        let mut next: BTreeSet<Word> = BTreeSet::new();
        for key in &prev {
            for class in essential_pullback(key)? {
                next.insert(class.key().clone());
                if !acc.contains_key(class.key()) {
                    if acc.len() >= budget.max_classes {
                        class_budget_hit = true;
                        continue;
                    }
                    first_depth.insert(class.key().clone(), depth);
                    acc.insert(class.key().clone(), class);
                }
            }
        }
        exact.push(next);
        if class_budget_hit {
            break;
        }
    }

    // Closed iff every accumulated class pulls back into the accumulation
    // (and the seed's preimages were explored at all).
    let keys: Vec<Word> = acc.keys().cloned().collect();
    let mut closed = !class_budget_hit && budget.max_iterations >= 1;
    if closed {
        'outer: for key in &keys {
            for class in essential_pullback(key)? {
                if !acc.contains_key(class.key()) {
                    closed = false;
                    break 'outer;
                }
            }
        }
    }

    let status = if class_budget_hit {
        SaturationStatus::ClassBudgetExceeded
    } else if closed {
        SaturationStatus::Closed
    } else {
        SaturationStatus::IterationBudgetExceeded
    };

    // Disjointness: certified when the whole system is one exact-depth
    // preimage set of a system that was itself declared or certified
    // disjoint.
    let acc_keys: BTreeSet<Word> = acc.keys().cloned().collect();
    let seed_vouched = matches!(
        seed.certificate(),
        DisjointnessCertificate::DeclaredSimple | DisjointnessCertificate::CertifiedByCoLift { .. }
    );
    let certificate = if status == SaturationStatus::Closed && seed_vouched {
        match exact.iter().skip(1).position(|s| *s == acc_keys) {
            Some(n) => DisjointnessCertificate::CertifiedByCoLift { depth: n + 1 },
            None => DisjointnessCertificate::Unverified,
        }
    } else {
        DisjointnessCertificate::Unverified
    };

    let classes: Vec<CurveClass> = acc.values().cloned().collect();
    let multicurve = Multicurve::from_classes(f.target().clone(), classes, certificate)?;
    let first_depth: Vec<usize> =
        multicurve.classes().iter().map(|c| first_depth[c.key()]).collect();

    Ok(Saturation { multicurve, status, first_depth, iterations: exact.len() - 1 })
}

/// A closed system together with its transition matrix and spectral data.
#[derive(Debug, Clone, Serialize)]
pub struct ObstructionReport {
    pub multicurve: Multicurve,
    pub matrix: TransitionMatrix,
    pub spectral: SpectralCertificate,
}

/// Verdict of the obstruction search.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ObstructionOutcome {
    /// A certified-disjoint invariant system with spectral radius >= 1.
    Found { report: ObstructionReport },
    /// An invariant system with spectral radius >= 1 whose disjointness
    /// could not be certified: a candidate obstruction only.
    CandidateUncertified { report: ObstructionReport },
    /// No system with radius >= 1 surfaced within the budget.
    NoneFoundWithinBudget {
        seeds_examined: usize,
        /// Closed systems whose spectral comparison stayed indeterminate.
        indeterminate: Vec<ObstructionReport>,
        /// Seeds whose saturation outgrew the budget, by class keys.
        budget_exhausted: Vec<String>,
    },
}

/// Default seed systems: single curves enclosing a contiguous block
/// `x_i ... x_{i+k-1}` of punctures, `2 <= k <= n-2`, deduplicated by
/// class.  Such a block is encircled by an embedded curve, so the seeds
/// are declared simple.
pub fn default_seeds(f: &BranchedCoverRecursion) -> Result<Vec<Multicurve>, SearchError> {
    let sphere = f.target();
    let n = sphere.n();
    if n < 4 {
        return Err(SearchError::NoEssentialCurves);
    }
    let mut seen: BTreeSet<Word> = BTreeSet::new();
    let mut seeds = Vec::new();
    for k in 2..=n - 2 {
        for i in 1..=n - k + 1 {
            let word = Word::from_letters((i..i + k).map(|j| j as i32)).expect("positive letters");
            let key = sphere.canonical_key(&word);
            if !seen.insert(key.clone()) {
                continue;
            }
            let mc = Multicurve::new(
                sphere.clone(),
                std::slice::from_ref(&word),
                DisjointnessCertificate::DeclaredSimple,
            );
            match mc {
                Ok(mc) => seeds.push(mc),
                // A block can degenerate to a non-essential class only in
                // edge cases; such seeds are simply skipped.
                Err(_) => continue,
            }
        }
    }
    Ok(seeds)
}

/// Searches for an invariant curve system with spectral radius >= 1,
/// saturating each seed in turn.  With `seeds = None` the default blocks
/// of consecutive punctures are used.
pub fn search_obstruction(
    f: &BranchedCoverRecursion,
    seeds: Option<Vec<Multicurve>>,
    budget: &SearchBudget,
    certify: &CertifyOptions,
) -> Result<ObstructionOutcome, SearchError> {
    let seeds = match seeds {
        Some(s) => s,
        None => default_seeds(f)?,
    };
    let mut candidate: Option<ObstructionReport> = None;
    let mut indeterminate: Vec<ObstructionReport> = Vec::new();
    let mut budget_exhausted: Vec<String> = Vec::new();
    let mut seeds_examined = 0usize;

    for seed in &seeds {
        seeds_examined += 1;
        let saturation = saturate(f, seed, budget)?;
        if saturation.status != SaturationStatus::Closed {
            let keys: Vec<String> =
                seed.classes().iter().map(|c| c.key().to_string()).collect();
            budget_exhausted.push(keys.join(" "));
            continue;
        }
        if saturation.multicurve.is_empty() {
            // The seed's entire preimage tree dies out: nothing invariant.
            continue;
        }
        let data = transition_data(f, &saturation.multicurve)?;
        debug_assert!(data.is_stable(), "a closed system must be stable");
        let spectral = data.matrix.certify_spectral_radius(certify)?;
        let report = ObstructionReport {
            multicurve: saturation.multicurve.clone(),
            matrix: data.matrix,
            spectral,
        };
        match report.spectral.comparison_with_one {
            ThresholdComparison::AtLeast => {
                let vouched = matches!(
                    report.multicurve.certificate(),
                    DisjointnessCertificate::DeclaredSimple
                        | DisjointnessCertificate::CertifiedByCoLift { .. }
                );
                if vouched {
                    return Ok(ObstructionOutcome::Found { report });
                }
                if candidate.is_none() {
                    candidate = Some(report);
                }
            }
            ThresholdComparison::Below => {}
            ThresholdComparison::Indeterminate => indeterminate.push(report),
        }
    }

    if let Some(report) = candidate {
        return Ok(ObstructionOutcome::CandidateUncertified { report });
    }
    Ok(ObstructionOutcome::NoneFoundWithinBudget { seeds_examined, indeterminate, budget_exhausted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::quadratic_preperiodic;
    use crate::words::MarkedSphere;
    use num_traits::One;

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    fn simple(mc: &BranchedCoverRecursion, word: &str) -> Multicurve {
        Multicurve::new(
            mc.target().clone(),
            &[w(word)],
            DisjointnessCertificate::DeclaredSimple,
        )
        .unwrap()
    }

    #[test]
    fn saturation_closes_the_quadratic_example() {
        let f = quadratic_preperiodic();
        let sat = saturate(&f, &simple(&f, "x1x2"), &SearchBudget::default()).unwrap();
        assert_eq!(sat.status, SaturationStatus::Closed);
        // The seed class never recurs; its preimage class absorbs the
        // whole preimage tree.
        let keys: Vec<&Word> = sat.multicurve.classes().iter().map(|c| c.key()).collect();
        assert_eq!(keys, vec![&w("x1x3")]);
        assert_eq!(sat.first_depth, vec![1]);
        assert_eq!(
            sat.multicurve.certificate(),
            DisjointnessCertificate::CertifiedByCoLift { depth: 1 }
        );
    }

    #[test]
    fn saturation_keeps_recurrent_seeds() {
        // The identity fixes every class, so a seed is its own saturation.
        let sphere = MarkedSphere::with_anonymous_labels(4).unwrap();
        let id = BranchedCoverRecursion::identity(sphere);
        let sat = saturate(&id, &simple(&id, "x1x2"), &SearchBudget::default()).unwrap();
        assert_eq!(sat.status, SaturationStatus::Closed);
        let keys: Vec<&Word> = sat.multicurve.classes().iter().map(|c| c.key()).collect();
        assert_eq!(keys, vec![&w("x1x2")]);
        assert_eq!(
            sat.multicurve.certificate(),
            DisjointnessCertificate::CertifiedByCoLift { depth: 1 }
        );
    }

    #[test]
    fn saturation_respects_budgets() {
        let f = quadratic_preperiodic();
        let tight = SearchBudget { max_iterations: 0, max_classes: 64 };
        let sat = saturate(&f, &simple(&f, "x1x2"), &tight).unwrap();
        assert_eq!(sat.status, SaturationStatus::IterationBudgetExceeded);

        let narrow = SearchBudget { max_iterations: 10, max_classes: 1 };
        let sat = saturate(&f, &simple(&f, "x2x3"), &narrow).unwrap();
        assert_eq!(sat.status, SaturationStatus::ClassBudgetExceeded);
    }

    #[test]
    fn default_seeds_are_deduplicated_blocks() {
        let f = quadratic_preperiodic();
        let seeds = default_seeds(&f).unwrap();
        let keys: Vec<&Word> =
            seeds.iter().map(|s| s.classes()[0].key()).collect();
        // n = 4: blocks x1x2, x2x3, x3x4; the last is the class of x1x2.
        assert_eq!(keys, vec![&w("x1x2"), &w("x2x3")]);
    }

    #[test]
    fn unobstructed_map_reports_none_found() {
        let f = quadratic_preperiodic();
        let outcome =
            search_obstruction(&f, None, &SearchBudget::default(), &CertifyOptions::default())
                .unwrap();
        match outcome {
            ObstructionOutcome::NoneFoundWithinBudget {
                seeds_examined,
                indeterminate,
                budget_exhausted,
            } => {
                assert_eq!(seeds_examined, 2);
                assert!(indeterminate.is_empty());
                assert!(budget_exhausted.is_empty());
            }
            other => panic!("expected no obstruction, got {other:?}"),
        }
    }

    #[test]
    fn glued_pair_obstruction_is_found_with_unit_radius() {
        let cover = crate::combine::combine(&crate::fixtures::levy_pair_manifest()).unwrap();
        let outcome = search_obstruction(
            &cover.recursion,
            None,
            &SearchBudget::default(),
            &CertifyOptions::default(),
        )
        .unwrap();
        match outcome {
            ObstructionOutcome::Found { report } => {
                let keys: Vec<&Word> =
                    report.multicurve.classes().iter().map(|c| c.key()).collect();
                assert_eq!(keys, vec![&w("x1x2")]);
                assert!(report.spectral.low.is_one());
                assert!(report.spectral.high.is_one());
                assert_eq!(
                    report.multicurve.certificate(),
                    DisjointnessCertificate::CertifiedByCoLift { depth: 1 }
                );
            }
            other => panic!("expected the gluing curve as obstruction, got {other:?}"),
        }
    }

    #[test]
    fn invariant_curve_of_a_homeomorphism_is_found_certified() {
        // The identity is a degenerate self-cover whose every curve is a
        // fixed Levy-type curve: the search must certify the fixed class
        // with an exactly-one spectral certificate.
        let sphere = MarkedSphere::with_anonymous_labels(4).unwrap();
        let id = BranchedCoverRecursion::identity(sphere);
        let outcome =
            search_obstruction(&id, None, &SearchBudget::default(), &CertifyOptions::default())
                .unwrap();
        match outcome {
            ObstructionOutcome::Found { report } => {
                assert_eq!(report.multicurve.len(), 1);
                assert!(report.spectral.low.is_one());
                assert!(report.spectral.high.is_one());
                assert_eq!(
                    report.spectral.comparison_with_one,
                    ThresholdComparison::AtLeast
                );
            }
            other => panic!("expected a certified invariant system, got {other:?}"),
        }
    }
}
