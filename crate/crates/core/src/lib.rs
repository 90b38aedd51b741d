//! Combinatorial and numeric tools for postcritically finite branched
//! self-coverings of the two-sphere.
//!
//! The central object is a [`recursion::BranchedCoverRecursion`]: a finite
//! encoding of a degree-`d` branched covering of a marked sphere by a
//! permutation and a tuple of lift words per marked puncture.  On top of it
//! the crate builds puncture portraits and orbifold invariants
//! ([`portrait`]), pullback of free-homotopy classes of curves
//! ([`curves`], [`pullback`]), exact spectral certification of curve-system
//! transition matrices ([`matrix`]), an obstruction search ([`search`]),
//! decomposition along an invariant multicurve and the inverse gluing
//! construction ([`decompose`], [`combine`]), and a numerical iteration of
//! the induced map on marked-point configurations ([`spider`]).

pub mod combine;
pub mod curves;
pub mod decompose;
pub mod fixtures;
#[cfg(feature = "mating")]
pub mod mating;
pub mod matrix;
pub mod portrait;
pub mod pullback;
pub mod random;
pub mod recursion;
pub mod search;
pub mod spider;
pub mod words;
