//! Bundled example covers, gluing manifests and their on-disk formats.
//!
//! Every fixture is constructed in code in this module.  The JSON files
//! shipped under the crate's `fixtures/` directory are byte-for-byte
//! regenerations of these constructors (see [`bundled_files`] and the
//! `bundled_files_match_their_constructors` test), so the files cannot
//! drift from what the library actually produces.  Derived quantities
//! quoted in tests — transition matrices, orbifold signatures, phantom
//! counts — are recomputed from the constructors rather than read from
//! the files.

use crate::combine::{
    combine, CombineError, CombineManifest, ConfigurationNode, NodeItem, ResolvedTree,
};
use crate::curves::MulticurveSpec;
use crate::decompose::{decompose, first_return_maps, TreeSpec};
use crate::recursion::{
    BranchedCoverRecursion, GeneratorAction, RecursionError, ValidationReport,
};
use crate::words::{MarkedSphere, SphereError, Word, WordError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

fn w(s: &str) -> Word {
    Word::parse(s).expect("fixture word")
}

fn action(perm: &[usize], lifts: &[&str]) -> GeneratorAction {
    GeneratorAction { permutation: perm.to_vec(), lifts: lifts.iter().map(|s| w(s)).collect() }
}

fn p(label: &str) -> NodeItem {
    NodeItem::Puncture(label.into())
}

fn cap(edge: &str) -> NodeItem {
    NodeItem::Cap(edge.into())
}

fn node(
    name: &str,
    items: Vec<NodeItem>,
    map_to: &str,
    degree: usize,
    actions: Vec<GeneratorAction>,
) -> ConfigurationNode {
    ConfigurationNode { name: name.into(), items, map_to: map_to.into(), degree, actions }
}

// ---------------------------------------------------------------------
// Individual covers.
// ---------------------------------------------------------------------

/// The degree-2 self-cover realizing the combinatorics of `z ↦ z² + i`
/// on the sphere marked at `i`, `i−1`, `−i` and `∞`: the finite marked
/// points form a preperiodic tail `i ↦ i−1 ↦ −i ↦ i−1` fed by an
/// unmarked critical point, while `∞` is fixed of local degree 2.
/// Orbifold signature (2,2,2,∞), hyperbolic.
pub fn quadratic_preperiodic() -> BranchedCoverRecursion {
    let sphere = MarkedSphere::new(["i", "i-1", "-i", "inf"]).unwrap();
    BranchedCoverRecursion::new(
        sphere.clone(),
        sphere,
        2,
        vec![
            action(&[2, 1], &["", ""]),
            action(&[1, 2], &["x1", "x3"]),
            action(&[1, 2], &["x2", ""]),
            action(&[2, 1], &["X2X1", "X3"]),
        ],
    )
    .unwrap()
}

// ---------------------------------------------------------------------
// Gluing manifests.
// ---------------------------------------------------------------------

/// Root sphere with an identity map, glued to a degree-2 piece that
/// swaps its two punctures critically: the gluing curve is a fixed Levy
/// curve (annulus degree 1), so the assembled cover is obstructed with
/// transition matrix `[[1]]`.  Degree 2, five punctures.
pub fn levy_pair_manifest() -> CombineManifest {
    CombineManifest {
        nodes: vec![
            node(
                "B",
                vec![cap("e"), p("b1"), p("b2"), p("b3")],
                "B",
                1,
                vec![
                    action(&[1], &["x1"]),
                    action(&[1], &["x2"]),
                    action(&[1], &["x3"]),
                    action(&[1], &["x4"]),
                ],
            ),
            node(
                "A",
                vec![cap("e"), p("a1"), p("a2")],
                "A",
                2,
                vec![
                    action(&[1, 2], &["X3X2", ""]),
                    action(&[2, 1], &["x2x3X2", ""]),
                    action(&[2, 1], &["", "x2"]),
                ],
            ),
        ],
        twists: BTreeMap::new(),
    }
}

/// Three-node chain whose two gluing curves swap with annulus degrees 1
/// and 2: transition matrix `[[0,1],[1/2,0]]`, spectral radius `√2/2`,
/// unobstructed.  Degree 2, five punctures, one phantom sphere.
pub fn swapped_chain_manifest() -> CombineManifest {
    CombineManifest {
        nodes: vec![
            node(
                "A",
                vec![p("a1"), p("a2"), cap("g1")],
                "C",
                1,
                vec![action(&[1], &["x3"]), action(&[1], &["x1"]), action(&[1], &["x2"])],
            ),
            node(
                "B",
                vec![cap("g1"), p("b1"), cap("g2")],
                "B",
                2,
                vec![
                    action(&[2, 1], &["X2X1", ""]),
                    action(&[2, 1], &["", "x1x2X1"]),
                    action(&[1, 2], &["x1", ""]),
                ],
            ),
            node(
                "C",
                vec![cap("g2"), p("c1"), p("c2")],
                "A",
                2,
                vec![
                    action(&[1, 2], &["x2", "x3"]),
                    action(&[2, 1], &["", ""]),
                    action(&[2, 1], &["X3", "X2"]),
                ],
            ),
        ],
        twists: BTreeMap::new(),
    }
}

/// Two degree-2 pieces glued along one fixed curve crossed with annulus
/// degree 2.  The root fixes both of its punctures and hides its critical
/// point over `a2`; the child piece spins its cap critically and hides
/// its critical point over `b2`.  Transition matrix `[[1/2]]`,
/// unobstructed.  Degree 2, four punctures, no phantoms.
pub fn quadratic_pair_manifest() -> CombineManifest {
    CombineManifest {
        nodes: vec![
            node(
                "A",
                vec![p("a1"), p("a2"), cap("e")],
                "A",
                2,
                vec![
                    action(&[1, 2], &["x1", "x2"]),
                    action(&[2, 1], &["", ""]),
                    action(&[2, 1], &["X2", "X1"]),
                ],
            ),
            node(
                "B",
                vec![cap("e"), p("b1"), p("b2")],
                "B",
                2,
                vec![
                    action(&[2, 1], &["", "x1"]),
                    action(&[1, 2], &["x2", "x3"]),
                    action(&[2, 1], &["x3", "X3"]),
                ],
            ),
        ],
        twists: BTreeMap::new(),
    }
}

/// Three-node chain whose outer degree-1 pieces swap while the middle
/// degree-2 piece is fixed; both gluing curves cross with annulus
/// degree 1, so the curve pair is a Levy cycle (transition matrix
/// `[[0,1],[1,0]]`, spectral radius 1) and the assembled cover is
/// obstructed.  The middle piece keeps its three punctures in one
/// critical cycle, so its orbifold is the hyperbolic (∞,∞,∞) — the
/// decomposed interior stays free of obstructions even though the glued
/// map carries one.  Degree 2, seven punctures, two phantom spheres.
pub fn levy_chain_manifest() -> CombineManifest {
    CombineManifest {
        nodes: vec![
            node(
                "A",
                vec![p("a1"), p("a2"), cap("g1")],
                "C",
                1,
                vec![action(&[1], &["x3"]), action(&[1], &["x1"]), action(&[1], &["x2"])],
            ),
            node(
                "B",
                vec![cap("g1"), p("b1"), p("b2"), p("b3"), cap("g2")],
                "B",
                2,
                vec![
                    action(&[1, 2], &["", "x5"]),
                    action(&[2, 1], &["x2x3x4X3X2", ""]),
                    action(&[1, 2], &["", "x2"]),
                    action(&[2, 1], &["X5", "x3x5"]),
                    action(&[1, 2], &["x1", ""]),
                ],
            ),
            node(
                "C",
                vec![cap("g2"), p("c1"), p("c2")],
                "A",
                1,
                vec![action(&[1], &["x2"]), action(&[1], &["x3"]), action(&[1], &["x1"])],
            ),
        ],
        twists: BTreeMap::new(),
    }
}

/// Degree-3 pair glued along one fixed curve crossed with annulus
/// degree 3: each piece has a full-degree critical fixed point over one
/// puncture and another over the cap.  Transition matrix `[[1/3]]`,
/// unobstructed.  Degree 3, six punctures, no phantoms.
pub fn cubic_pair_manifest() -> CombineManifest {
    CombineManifest {
        nodes: vec![
            node(
                "A",
                vec![p("a1"), p("a2"), p("a3"), cap("e")],
                "A",
                3,
                vec![
                    action(&[2, 3, 1], &["", "", "x1"]),
                    action(&[1, 2, 3], &["x2", "", ""]),
                    action(&[1, 2, 3], &["x3", "", ""]),
                    action(&[3, 1, 2], &["X3X2X1", "", ""]),
                ],
            ),
            node(
                "B",
                vec![cap("e"), p("b1"), p("b2"), p("b3")],
                "B",
                3,
                vec![
                    action(&[2, 3, 1], &["", "", "x1"]),
                    action(&[1, 2, 3], &["x2", "", ""]),
                    action(&[1, 2, 3], &["x3", "", ""]),
                    action(&[3, 1, 2], &["X3X2X1", "", ""]),
                ],
            ),
        ],
        twists: BTreeMap::new(),
    }
}

/// Degree-4 analogue of the cubic pair: one fixed gluing curve crossed
/// with annulus degree 4, transition matrix `[[1/4]]`, unobstructed.
/// Degree 4, seven punctures, no phantoms.
pub fn quartic_pair_manifest() -> CombineManifest {
    CombineManifest {
        nodes: vec![
            node(
                "A",
                vec![p("a1"), p("a2"), p("a3"), cap("e")],
                "A",
                4,
                vec![
                    action(&[2, 3, 4, 1], &["", "", "", "x1"]),
                    action(&[1, 2, 3, 4], &["x2", "", "", ""]),
                    action(&[1, 2, 3, 4], &["x3", "", "", ""]),
                    action(&[4, 1, 2, 3], &["X3X2X1", "", "", ""]),
                ],
            ),
            node(
                "B",
                vec![cap("e"), p("b1"), p("b2"), p("b3"), p("b4")],
                "B",
                4,
                vec![
                    action(&[2, 3, 4, 1], &["", "", "", "x1"]),
                    action(&[1, 2, 3, 4], &["x2", "", "", ""]),
                    action(&[1, 2, 3, 4], &["x3", "", "", ""]),
                    action(&[1, 2, 3, 4], &["x4", "", "", ""]),
                    action(&[4, 1, 2, 3], &["X4X3X2X1", "", "", ""]),
                ],
            ),
        ],
        twists: BTreeMap::new(),
    }
}

/// All bundled gluing manifests with their file-stem names.  Together
/// they span assembled degrees 2–4 and 4–7 punctures; `levy-pair` and
/// `levy-chain` are the obstructed ones.
pub fn bundled_manifests() -> Vec<(&'static str, CombineManifest)> {
    vec![
        ("levy-pair", levy_pair_manifest()),
        ("swapped-chain", swapped_chain_manifest()),
        ("quadratic-pair", quadratic_pair_manifest()),
        ("levy-chain", levy_chain_manifest()),
        ("cubic-pair", cubic_pair_manifest()),
        ("quartic-pair", quartic_pair_manifest()),
    ]
}

// ---------------------------------------------------------------------
// On-disk formats.
// ---------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("bad puncture labels: {0}")]
    Sphere(#[from] SphereError),
    #[error("bad word: {0}")]
    Word(#[from] WordError),
    #[error("malformed cover data: {0}")]
    Recursion(#[from] RecursionError),
    #[error("only self-covers (same source and target sphere) have this file form")]
    NotASelfCover,
}

/// On-disk form of a self-cover: puncture labels, global degree, and one
/// `{perm, lifts}` row per generator, with lifts as token words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfCoverFile {
    pub punctures: Vec<String>,
    pub degree: usize,
    pub generators: Vec<GeneratorRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorRow {
    pub perm: Vec<usize>,
    pub lifts: Vec<String>,
}

impl SelfCoverFile {
    pub fn from_recursion(f: &BranchedCoverRecursion) -> Result<Self, FixtureError> {
        if f.source() != f.target() {
            return Err(FixtureError::NotASelfCover);
        }
        Ok(SelfCoverFile {
            punctures: f.target().labels().to_vec(),
            degree: f.degree(),
            generators: f
                .actions()
                .iter()
                .map(|a| GeneratorRow {
                    perm: a.permutation.clone(),
                    lifts: a.lifts.iter().map(Word::token_string).collect(),
                })
                .collect(),
        })
    }

    pub fn to_recursion(&self) -> Result<BranchedCoverRecursion, FixtureError> {
        let sphere = MarkedSphere::new(self.punctures.iter().map(String::as_str))?;
        let mut actions = Vec::with_capacity(self.generators.len());
        for row in &self.generators {
            let lifts =
                row.lifts.iter().map(|s| Word::parse(s)).collect::<Result<Vec<_>, _>>()?;
            actions.push(GeneratorAction { permutation: row.perm.clone(), lifts });
        }
        Ok(BranchedCoverRecursion::new(sphere.clone(), sphere, self.degree, actions)?)
    }
}

/// Serializes a value as normalized JSON: object keys sorted, two-space
/// indentation, trailing newline.  Used for every bundled file so that
/// regeneration is byte-stable.
pub fn normalized_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("fixture values serialize");
    let mut s = serde_json::to_string_pretty(&v).expect("fixture values serialize");
    s.push('\n');
    s
}

/// Directory holding the bundled fixture files.
pub fn bundled_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Every bundled file as `(file name, expected contents)`.  The contents
/// are regenerated from the in-code constructors on each call.
pub fn bundled_files() -> Vec<(String, String)> {
    let mut files = Vec::new();
    let z2i = SelfCoverFile::from_recursion(&quadratic_preperiodic()).unwrap();
    files.push(("z2i.json".to_string(), normalized_json(&z2i)));
    for (name, manifest) in bundled_manifests() {
        files.push((format!("{name}.manifest.json"), normalized_json(&manifest)));
    }
    // A ready-to-cut corpus for the levy pair: the assembled cover, its
    // gluing multicurve and the configuration tree.
    let manifest = levy_pair_manifest();
    let combined = combine(&manifest).expect("bundled manifest assembles");
    let cover = SelfCoverFile::from_recursion(&combined.recursion).unwrap();
    files.push(("levy-pair.cover.json".to_string(), normalized_json(&cover)));
    let curves = MulticurveSpec {
        sphere: combined.multicurve.sphere().clone(),
        curves: combined.multicurve.classes().iter().map(|c| c.key().clone()).collect(),
        certificate: combined.multicurve.certificate(),
    };
    files.push(("levy-pair.multicurve.json".to_string(), normalized_json(&curves)));
    let tree = TreeSpec::from_combined(&manifest, &combined);
    files.push(("levy-pair.tree.json".to_string(), normalized_json(&tree)));
    files
}

// ---------------------------------------------------------------------
// Roundtrip verification (assemble, cut, compare).
// ---------------------------------------------------------------------

/// Builds and validates each manifest node's covering as a standalone
/// recursion between the node spheres the manifest induces.
pub fn manifest_pieces(
    manifest: &CombineManifest,
) -> Result<Vec<(BranchedCoverRecursion, ValidationReport)>, CombineError> {
    let named: Vec<(String, Vec<NodeItem>)> =
        manifest.nodes.iter().map(|n| (n.name.clone(), n.items.clone())).collect();
    let tree = ResolvedTree::resolve(&named)?;
    let mut out = Vec::with_capacity(manifest.nodes.len());
    for (j, node) in manifest.nodes.iter().enumerate() {
        let target = tree.node_index(&node.map_to).ok_or_else(|| {
            CombineError::UnknownMapTarget { node: node.name.clone(), target: node.map_to.clone() }
        })?;
        let recursion = BranchedCoverRecursion::new(
            tree.spheres[j].clone(),
            tree.spheres[target].clone(),
            node.degree,
            node.actions.clone(),
        )
        .map_err(|source| CombineError::PieceMalformed { node: node.name.clone(), source })?;
        let report = recursion
            .validate()
            .map_err(|source| CombineError::PieceInvalid { node: node.name.clone(), source })?;
        out.push((recursion, report));
    }
    Ok(out)
}

/// Assembles a manifest, cuts the result back apart along its own gluing
/// curves, and checks that every piece comes back with the original
/// degree, portrait, and (per node cycle) first-return orbifold
/// signature.  Returns a description of the first mismatch.
pub fn verify_roundtrip(manifest: &CombineManifest) -> Result<(), String> {
    let combined = combine(manifest).map_err(|e| format!("assembly failed: {e}"))?;
    let spec = TreeSpec::from_combined(manifest, &combined);
    let dec = decompose(&combined.recursion, &combined.multicurve, &spec)
        .map_err(|e| format!("cutting failed: {e}"))?;

    let originals = manifest_pieces(manifest).map_err(|e| format!("bad manifest piece: {e}"))?;
    let index: BTreeMap<&str, usize> =
        manifest.nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();

    if dec.pieces.len() != manifest.nodes.len() {
        return Err(format!(
            "expected {} pieces, recovered {}",
            manifest.nodes.len(),
            dec.pieces.len()
        ));
    }
    if dec.decorations != combined.phantom_count {
        return Err(format!(
            "expected {} decorations (one per phantom), found {}",
            combined.phantom_count, dec.decorations
        ));
    }
    for piece in &dec.pieces {
        let j = *index
            .get(piece.name.as_str())
            .ok_or_else(|| format!("recovered unknown piece {:?}", piece.name))?;
        let orig = &manifest.nodes[j];
        if piece.degree != orig.degree {
            return Err(format!(
                "piece {:?}: degree {} recovered as {}",
                piece.name, orig.degree, piece.degree
            ));
        }
        if piece.map_to != orig.map_to {
            return Err(format!(
                "piece {:?}: target {:?} recovered as {:?}",
                piece.name, orig.map_to, piece.map_to
            ));
        }
        if piece.report.portrait != originals[j].1.portrait {
            return Err(format!("piece {:?}: portrait changed under the roundtrip", piece.name));
        }
        let rebuilt = dec
            .manifest
            .nodes
            .iter()
            .find(|n| n.name == piece.name)
            .ok_or_else(|| format!("piece {:?} missing from the emitted manifest", piece.name))?;
        if rebuilt.items != orig.items {
            return Err(format!("piece {:?}: boundary items changed", piece.name));
        }
    }

    // First-return maps of the recovered pieces must carry the same
    // orbifolds as the original pieces composed around the same cycles.
    let returns = first_return_maps(&dec).map_err(|e| format!("first-return failed: {e}"))?;
    for fr in &returns {
        let start = index[fr.node.as_str()];
        let mut composed = originals[start].0.clone();
        let mut at = index[manifest.nodes[start].map_to.as_str()];
        for _ in 1..fr.period {
            composed = originals[at]
                .0
                .after(&composed)
                .map_err(|e| format!("composition failed: {e}"))?;
            at = index[manifest.nodes[at].map_to.as_str()];
        }
        let report = composed
            .validate()
            .map_err(|e| format!("original first-return of {:?} invalid: {e}", fr.node))?;
        if fr.report.portrait != report.portrait {
            return Err(format!("first-return portrait at {:?} changed", fr.node));
        }
        let orig_orb = report.portrait.orbifold().map_err(|e| e.to_string())?;
        let new_orb = fr.report.portrait.orbifold().map_err(|e| e.to_string())?;
        if orig_orb.signature != new_orb.signature
            || orig_orb.euler_characteristic != new_orb.euler_characteristic
        {
            return Err(format!("first-return orbifold at {:?} changed", fr.node));
        }
    }
    Ok(())
}
