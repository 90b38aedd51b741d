//! Puncture portraits and orbifold invariants.
//!
//! A validated covering induces a map of finite sets: each source puncture
//! goes to a target puncture with a local degree, and each target puncture
//! may additionally have unmarked critical preimages (branch points of the
//! covering that are not punctures of the source sphere).  For self-covers
//! this data determines the ramification orbifold: the minimal integer
//! weight `N(x)` at each puncture such that `N(f(w))` is a multiple of
//! `deg_w(f) · N(w)` for every preimage `w` of `f(x)`, with `N = ∞` on
//! periodic cycles that pass through a critical point.

use crate::words::MarkedSphere;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Image and local degree of one marked (source) puncture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub target: usize,
    pub degree: usize,
}

/// The induced map on punctures, plus branch data at unmarked points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Portrait {
    source: MarkedSphere,
    target: MarkedSphere,
    degree: usize,
    /// Entry `i-1` describes source puncture `i`.
    marked: Vec<MarkedPoint>,
    /// For each target puncture, local degrees (each `>= 2`, sorted) of its
    /// unmarked critical preimages.
    unmarked_critical: BTreeMap<usize, Vec<usize>>,
}

impl Portrait {
    pub(crate) fn from_parts(
        source: MarkedSphere,
        target: MarkedSphere,
        degree: usize,
        marked: Vec<(usize, usize)>,
        unmarked_critical: BTreeMap<usize, Vec<usize>>,
    ) -> Self {
        Portrait {
            source,
            target,
            degree,
            marked: marked.into_iter().map(|(target, degree)| MarkedPoint { target, degree }).collect(),
            unmarked_critical,
        }
    }

    pub fn source(&self) -> &MarkedSphere {
        &self.source
    }

    pub fn target(&self) -> &MarkedSphere {
        &self.target
    }

    /// Degree of the covering.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Target puncture hit by source puncture `i` (1-based).
    pub fn image_of(&self, i: usize) -> usize {
        self.marked[i - 1].target
    }

    /// Local degree of the covering at source puncture `i`.
    pub fn local_degree(&self, i: usize) -> usize {
        self.marked[i - 1].degree
    }

    pub fn marked_points(&self) -> &[MarkedPoint] {
        &self.marked
    }

    /// Local degrees (sorted, each `>= 2`) of the unmarked critical
    /// preimages of target puncture `i`.
    pub fn unmarked_critical_degrees(&self, i: usize) -> &[usize] {
        self.unmarked_critical.get(&i).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn unmarked_critical(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.unmarked_critical
    }

    /// Whether source and target are the same marked sphere, so the
    /// portrait iterates.
    pub fn is_self_map(&self) -> bool {
        self.source == self.target
    }

    /// Ramification orbifold of a self-cover.
    pub fn orbifold(&self) -> Result<OrbifoldData, OrbifoldError> {
        if !self.is_self_map() {
            return Err(OrbifoldError::NotSelfCover);
        }
        let n = self.marked.len();

        // Punctures on periodic cycles through a critical point get N = ∞.
        let mut weight: Vec<Weight> = vec![Weight::Finite(1); n];
        for start in 1..=n {
            // Walk far enough to be inside the eventual cycle, then read it off.
            let mut x = start;
            for _ in 0..n {
                x = self.image_of(x);
            }
            let mut cycle = vec![x];
            let mut y = self.image_of(x);
            while y != x {
                cycle.push(y);
                y = self.image_of(y);
            }
            if cycle.iter().any(|&c| self.local_degree(c) > 1) {
                for &c in &cycle {
                    weight[c - 1] = Weight::Infinite;
                }
            }
        }

        // Least fixpoint of N(x) = lcm of deg(w)·N(w) over marked preimages
        // and of the unmarked critical degrees at x.
        let cap = n * n + 4 * n + 8;
        let mut iterations = 0usize;
        loop {
            let mut changed = false;
            for x in 1..=n {
                if weight[x - 1] == Weight::Infinite {
                    continue;
                }
                let mut acc: u128 = 1;
                for w in 1..=n {
                    if self.image_of(w) != x {
                        continue;
                    }
                    let nw = match weight[w - 1] {
                        Weight::Finite(v) => v,
                        Weight::Infinite => {
                            // A periodic-critical puncture maps inside its own
                            // cycle, whose members are already infinite.
                            unreachable!("finite puncture with an infinite preimage")
                        }
                    };
                    acc = lcm_u128(acc, self.local_degree(w) as u128 * nw)
                        .ok_or(OrbifoldError::WeightOverflow)?;
                }
                for &dc in self.unmarked_critical_degrees(x) {
                    acc = lcm_u128(acc, dc as u128).ok_or(OrbifoldError::WeightOverflow)?;
                }
                if Weight::Finite(acc) != weight[x - 1] {
                    weight[x - 1] = Weight::Finite(acc);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            iterations += 1;
            if iterations > cap {
                return Err(OrbifoldError::NoConvergence);
            }
        }

        let mut signature: Vec<Weight> = weight
            .iter()
            .copied()
            .filter(|w| !matches!(w, Weight::Finite(1)))
            .collect();
        signature.sort();

        // χ = 2 − Σ (1 − 1/N(x)), the ∞ terms contributing 1.
        let mut chi = BigRational::from_integer(BigInt::from(2));
        for w in &weight {
            let term = match w {
                Weight::Finite(v) => {
                    BigRational::one()
                        - BigRational::new(BigInt::one(), BigInt::from(*v))
                }
                Weight::Infinite => BigRational::one(),
            };
            chi -= term;
        }
        let orbifold_type = if chi.is_negative() {
            OrbifoldType::Hyperbolic
        } else if chi.is_zero() {
            OrbifoldType::Parabolic
        } else {
            OrbifoldType::Spherical
        };

        Ok(OrbifoldData { weights: weight, signature, euler_characteristic: chi, orbifold_type })
    }
}

/// Orbifold weight at a puncture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Weight {
    Finite(u128),
    Infinite,
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Finite(v) => write!(f, "{v}"),
            Weight::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Weight {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Weight::Finite(v) => serializer.serialize_u128(*v),
            Weight::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = serde_json::Value::deserialize(deserializer)?;
        match &v {
            serde_json::Value::String(s) if s == "inf" => Ok(Weight::Infinite),
            serde_json::Value::Number(num) => num
                .as_u64()
                .map(|u| Weight::Finite(u as u128))
                .ok_or_else(|| D::Error::custom("weight must be a positive integer")),
            _ => Err(D::Error::custom("weight must be an integer or \"inf\"")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbifoldType {
    Hyperbolic,
    Parabolic,
    Spherical,
}

/// Orbifold of a postcritically finite self-cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbifoldData {
    /// `N(x)` per puncture, in puncture order.
    pub weights: Vec<Weight>,
    /// The weights `>= 2`, sorted ascending with `∞` last.
    pub signature: Vec<Weight>,
    /// `2 − Σ (1 − 1/N(x))`, exact.
    pub euler_characteristic: BigRational,
    pub orbifold_type: OrbifoldType,
}

impl OrbifoldData {
    pub fn is_hyperbolic(&self) -> bool {
        self.orbifold_type == OrbifoldType::Hyperbolic
    }
}

impl Serialize for OrbifoldData {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("OrbifoldData", 4)?;
        st.serialize_field("weights", &self.weights)?;
        st.serialize_field("signature", &self.signature)?;
        st.serialize_field("euler_characteristic", &self.euler_characteristic.to_string())?;
        st.serialize_field("orbifold_type", &self.orbifold_type)?;
        st.end()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrbifoldError {
    #[error("orbifold weights are defined for self-covers only (source and target spheres differ)")]
    NotSelfCover,
    #[error("orbifold weight exceeds the supported range")]
    WeightOverflow,
    #[error("orbifold weight iteration failed to stabilize")]
    NoConvergence,
}

fn lcm_u128(a: u128, b: u128) -> Option<u128> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    let g = num_integer::gcd(a, b);
    (a / g).checked_mul(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recursion::{BranchedCoverRecursion, GeneratorAction};
    use crate::words::Word;

    fn action(perm: &[usize], lifts: &[&str]) -> GeneratorAction {
        GeneratorAction {
            permutation: perm.to_vec(),
            lifts: lifts.iter().map(|s| Word::parse(s).unwrap()).collect(),
        }
    }

    /// z ↦ z² with marked points 0, 1, ∞.
    pub(crate) fn squaring_map() -> BranchedCoverRecursion {
        let sphere = MarkedSphere::new(["0", "1", "inf"]).unwrap();
        BranchedCoverRecursion::new(
            sphere.clone(),
            sphere,
            2,
            vec![
                action(&[2, 1], &["", "x1"]),
                action(&[1, 2], &["x2", ""]),
                action(&[2, 1], &["X2X1", ""]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn preperiodic_quadratic_orbifold_is_2_2_2_inf() {
        let f = crate::fixtures::quadratic_preperiodic();
        let orb = f.validate().unwrap().portrait.orbifold().unwrap();
        assert_eq!(
            orb.weights,
            vec![Weight::Finite(2), Weight::Finite(2), Weight::Finite(2), Weight::Infinite]
        );
        assert_eq!(
            orb.signature,
            vec![Weight::Finite(2), Weight::Finite(2), Weight::Finite(2), Weight::Infinite]
        );
        assert_eq!(
            orb.euler_characteristic,
            BigRational::new(BigInt::from(-1), BigInt::from(2))
        );
        assert!(orb.is_hyperbolic());
    }

    #[test]
    fn squaring_map_orbifold_is_parabolic() {
        let f = squaring_map();
        let report = f.validate().unwrap();
        assert_eq!(report.portrait.local_degree(1), 2);
        assert_eq!(report.portrait.local_degree(3), 2);
        let orb = report.portrait.orbifold().unwrap();
        assert_eq!(orb.signature, vec![Weight::Infinite, Weight::Infinite]);
        assert!(orb.euler_characteristic.is_zero());
        assert_eq!(orb.orbifold_type, OrbifoldType::Parabolic);
    }

    #[test]
    fn identity_orbifold_is_spherical() {
        let sphere = MarkedSphere::with_anonymous_labels(3).unwrap();
        let id = BranchedCoverRecursion::identity(sphere);
        let orb = id.validate().unwrap().portrait.orbifold().unwrap();
        assert!(orb.signature.is_empty());
        assert_eq!(orb.orbifold_type, OrbifoldType::Spherical);
    }

    #[test]
    fn unmarked_critical_degrees_feed_finite_weights() {
        // In the quadratic example the fixed direction of the weights comes
        // from the unmarked critical point over puncture 1.
        let f = crate::fixtures::quadratic_preperiodic();
        let p = f.validate().unwrap().portrait;
        assert_eq!(p.unmarked_critical_degrees(1), &[2]);
        let orb = p.orbifold().unwrap();
        // N(1) = lcm of the unmarked critical degree 2 alone.
        assert_eq!(orb.weights[0], Weight::Finite(2));
    }
}
