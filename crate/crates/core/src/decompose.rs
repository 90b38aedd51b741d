//! Cutting a self-cover along an invariant multicurve.
//!
//! The inverse of [`crate::combine`]: given a validated self-cover, an
//! invariant multicurve in standard position (every class an interval
//! product of consecutive generators) and a description of the
//! configuration tree the curves cut out, recover one small sphere cover
//! per complementary region together with the boundary bookkeeping needed
//! to glue them back.
//!
//! The correspondence works fiber-wise.  Components of the preimage of a
//! region correspond to orbits of the region's puncture subgroup on the
//! covering's sheets; the orbit carrying exactly the marked points of one
//! source region is that region's *main* component and determines both the
//! region map (which region covers which) and its covering degree.  The
//! remaining orbits are unmarked decorations, which the gluing step
//! regenerates as phantom spheres.  Lift words are transported into the
//! region subgroup by a sheet-by-sheet gauge anchored at a designated
//! peripheral cycle, then rewritten over the region's own generators.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combine::{CombineManifest, CombinedCover, ConfigurationNode, NodeItem, ResolvedTree};
use crate::curves::{DisjointnessCertificate, Multicurve};
use crate::pullback::{transition_data, PullbackError};
use crate::recursion::{
    BranchedCoverRecursion, GeneratorAction, ValidationError, ValidationReport, WordAction,
};
use crate::words::{MarkedSphere, Word};

// ---------------------------------------------------------------------
// Input: the configuration tree to cut along.
// ---------------------------------------------------------------------

/// One complementary region: a name and the marked points it carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNodeSpec {
    pub name: String,
    pub punctures: Vec<String>,
}

/// One curve of the system, presented in standard position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeEdgeSpec {
    pub name: String,
    /// The curve as a product of consecutive generators over the enclosed
    /// side, in puncture order (`x_a x_{a+1} … x_b`).
    pub word: Word,
    /// Names of the two regions the curve separates.
    pub nodes: [String; 2],
}

/// The configuration tree of a multicurve: regions and separating curves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub nodes: Vec<TreeNodeSpec>,
    pub edges: Vec<TreeEdgeSpec>,
}

impl TreeSpec {
    /// Derives a tree description from a multicurve whose class keys are
    /// already interval products, enclosing each curve's own interval.
    /// Regions are named `s0` (outermost), `s1`, …; curves keep their key
    /// spelling as the edge name.
    pub fn infer(sphere: &MarkedSphere, multicurve: &Multicurve) -> Result<Self, DecomposeError> {
        let mut intervals = Vec::new();
        for class in multicurve.classes() {
            let key = class.key();
            let (lo, hi) = run_interval(sphere, key).ok_or_else(|| {
                DecomposeError::BadEdgeWord { edge: key.to_string(), word: key.to_string() }
            })?;
            intervals.push(EdgeInterval { lo, hi, name: key.to_string(), word: key.clone() });
        }
        let layout = RegionLayout::build(sphere, intervals)?;
        let nodes = layout
            .region_names()
            .iter()
            .zip(layout.region_items())
            .map(|(name, items)| TreeNodeSpec {
                name: name.clone(),
                punctures: puncture_labels(&items),
            })
            .collect();
        let edges = layout
            .edges
            .iter()
            .map(|e| TreeEdgeSpec {
                name: e.name.clone(),
                word: e.word.clone(),
                nodes: [layout.parent_region_name(e), layout.child_region_name(e)],
            })
            .collect();
        Ok(TreeSpec { nodes, edges })
    }

    /// Reads the tree description back off a glued cover, preserving the
    /// manifest's node and edge names.  The result is suitable for cutting
    /// the glued cover apart again.
    pub fn from_combined(manifest: &CombineManifest, cover: &CombinedCover) -> Self {
        let nodes = manifest
            .nodes
            .iter()
            .map(|n| TreeNodeSpec { name: n.name.clone(), punctures: puncture_labels(&n.items) })
            .collect();
        let mut sides: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for node in &manifest.nodes {
            for item in &node.items {
                if let NodeItem::Cap(edge) = item {
                    sides.entry(edge.as_str()).or_default().push(node.name.as_str());
                }
            }
        }
        let edges = cover
            .curves
            .iter()
            .map(|c| TreeEdgeSpec {
                name: c.edge.clone(),
                word: c.word.clone(),
                nodes: {
                    let s = &sides[c.edge.as_str()];
                    [s[0].to_string(), s[1].to_string()]
                },
            })
            .collect();
        TreeSpec { nodes, edges }
    }
}

fn puncture_labels(items: &[NodeItem]) -> Vec<String> {
    items
        .iter()
        .filter_map(|it| match it {
            NodeItem::Puncture(l) => Some(l.clone()),
            NodeItem::Cap(_) => None,
        })
        .collect()
}

/// Interval `[lo, hi]` of a word that is a consecutive ascending run of
/// generators suitable as a standard-position curve.
fn run_interval(sphere: &MarkedSphere, w: &Word) -> Option<(usize, usize)> {
    let n = sphere.n();
    let letters = w.letters();
    let ok = letters.len() >= 2
        && letters.len() <= n - 2
        && letters.iter().all(|&l| l > 0)
        && letters.windows(2).all(|p| p[1] == p[0] + 1)
        && (*letters.last().unwrap() as usize) <= n;
    ok.then(|| (letters[0] as usize, *letters.last().unwrap() as usize))
}

// ---------------------------------------------------------------------
// Errors and check report.
// ---------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("cutting needs a self-cover (source and target spheres differ)")]
    NotSelfCover,
    #[error("covering data is not a valid sphere cover: {source}")]
    InvalidCover { source: ValidationError },
    #[error("the multicurve lives on a different sphere than the covering")]
    SphereMismatch,
    #[error("the multicurve carries no disjointness certificate")]
    Uncertified,
    #[error("the multicurve is not invariant; pullback classes escape it: {escaped:?}")]
    NotInvariant { escaped: Vec<String> },
    #[error(transparent)]
    Pullback(#[from] PullbackError),
    #[error("tree edges do not match the multicurve classes: {detail}")]
    EdgeCurveMismatch { detail: String },
    #[error("edge {edge:?}: word {word} is not a consecutive run of generators over one side")]
    BadEdgeWord { edge: String, word: String },
    #[error("edges {first:?} and {second:?} cross; they cannot bound disjoint circles")]
    CrossingEdges { first: String, second: String },
    #[error("region {region} carries no marked points; every piece needs at least one")]
    EmptyRegion { region: String },
    #[error("tree nodes do not match the regions cut out by the curves: {detail}")]
    NodeMismatch { detail: String },
    #[error("the covering is not in standard form relative to the system: {detail}")]
    NotStandardForm { detail: String },
    #[error("recovered piece {node:?} is not a valid sphere cover: {source}")]
    PieceValidation { node: String, source: ValidationError },
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

/// One named invariant of the standard-form contract.
#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub witness: Option<String>,
}

/// Pass/fail per invariant, with a witness on failure.
#[derive(Debug, Clone, Serialize)]
pub struct StandardFormReport {
    pub items: Vec<CheckItem>,
}

impl StandardFormReport {
    pub fn is_ok(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }
}

// ---------------------------------------------------------------------
// Output.
// ---------------------------------------------------------------------

/// One recovered region cover.
#[derive(Debug, Clone, Serialize)]
pub struct DecomposedPiece {
    pub name: String,
    pub map_to: String,
    pub degree: usize,
    /// Sheets of the big cover forming this piece's main component.
    pub big_sheets: Vec<usize>,
    pub recursion: BranchedCoverRecursion,
    pub report: ValidationReport,
}

/// A cycle of the region map, in iteration order starting at the member
/// with the smallest manifest index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PieceCycle {
    pub members: Vec<String>,
}

/// Forward orbit of a boundary circle through the region maps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CapOrbit {
    pub node: String,
    /// 1-based item slot of the cap on its node.
    pub slot: usize,
    pub edge: String,
    /// Steps until the orbit first returns to this cap, if it does.
    pub return_time: Option<usize>,
    /// Local degrees along the recorded orbit.
    pub degrees: Vec<usize>,
}

/// Result of cutting a self-cover along an invariant system.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    /// Gluing data in the exact shape [`crate::combine::combine`] consumes.
    pub manifest: CombineManifest,
    pub pieces: Vec<DecomposedPiece>,
    pub cycles: Vec<PieceCycle>,
    pub caps: Vec<CapOrbit>,
    /// Unmarked preimage components dropped by the cut (regenerated as
    /// phantom spheres when gluing back).
    pub decorations: usize,
}

/// A periodic region's first-return self-cover.
#[derive(Debug, Clone, Serialize)]
pub struct FirstReturnMap {
    pub node: String,
    pub period: usize,
    pub recursion: BranchedCoverRecursion,
    pub report: ValidationReport,
}

// ---------------------------------------------------------------------
// Region layout shared by checking, inference and cutting.
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
struct EdgeInterval {
    lo: usize,
    hi: usize,
    name: String,
    word: Word,
}

/// The laminar-interval layout: which positions each curve encloses, how
/// the intervals nest, and the item lists of the cut regions.
struct RegionLayout {
    edges: Vec<EdgeInterval>,
    /// Parent edge per edge (`None` = enclosed directly by the outer region).
    parent: Vec<Option<usize>>,
    /// Items of the outer region.
    root_items: Vec<NodeItem>,
    /// Items of each edge's enclosed region (parent cap first).
    child_items: Vec<Vec<NodeItem>>,
    /// Region names assigned by [`RegionLayout::name_regions`]; outer
    /// region first, then enclosed regions in edge order.
    names: Vec<String>,
}

impl RegionLayout {
    fn build(sphere: &MarkedSphere, edges: Vec<EdgeInterval>) -> Result<Self, DecomposeError> {
        let n = sphere.n();
        let m = edges.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&i| (edges[i].lo, std::cmp::Reverse(edges[i].hi)));

        // Laminar check with parenting.
        let mut parent: Vec<Option<usize>> = vec![None; m];
        let mut stack: Vec<usize> = Vec::new();
        for &i in &order {
            while let Some(&top) = stack.last() {
                if edges[top].hi < edges[i].lo {
                    stack.pop();
                } else {
                    break;
                }
            }
            if let Some(&top) = stack.last() {
                if edges[i].hi > edges[top].hi {
                    return Err(DecomposeError::CrossingEdges {
                        first: edges[top].name.clone(),
                        second: edges[i].name.clone(),
                    });
                }
                parent[i] = Some(top);
            }
            stack.push(i);
        }

        // Children in positional order (the scan above runs by position).
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut top_level: Vec<usize> = Vec::new();
        for &i in &order {
            match parent[i] {
                Some(p) => children[p].push(i),
                None => top_level.push(i),
            }
        }

        let labels = sphere.labels();
        let content = |lo: usize, hi: usize, kids: &[usize]| -> Vec<NodeItem> {
            let mut items = Vec::new();
            let mut k = 0usize;
            let mut p = lo;
            while p <= hi {
                if k < kids.len() && edges[kids[k]].lo == p {
                    items.push(NodeItem::Cap(edges[kids[k]].name.clone()));
                    p = edges[kids[k]].hi + 1;
                    k += 1;
                } else {
                    items.push(NodeItem::Puncture(labels[p - 1].clone()));
                    p += 1;
                }
            }
            items
        };

        let root_items = content(1, n, &top_level);
        if puncture_labels(&root_items).is_empty() {
            return Err(DecomposeError::EmptyRegion { region: "the outer region".into() });
        }
        let mut child_items = Vec::with_capacity(m);
        for (i, edge) in edges.iter().enumerate() {
            let mut items = vec![NodeItem::Cap(edge.name.clone())];
            items.extend(content(edge.lo, edge.hi, &children[i]));
            if puncture_labels(&items).is_empty() {
                return Err(DecomposeError::EmptyRegion {
                    region: format!("the region enclosed by {:?}", edge.name),
                });
            }
            child_items.push(items);
        }

        let mut layout =
            RegionLayout { edges, parent, root_items, child_items, names: Vec::new() };
        layout.names = (0..=m).map(|k| format!("s{k}")).collect();
        Ok(layout)
    }

    /// Region order: outer region first, then enclosed regions by their
    /// interval's start position.
    fn region_edge_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by_key(|&i| (self.edges[i].lo, std::cmp::Reverse(self.edges[i].hi)));
        order
    }

    fn region_names(&self) -> Vec<String> {
        let mut names = vec![self.names[0].clone()];
        for (k, _) in self.region_edge_order().iter().enumerate() {
            names.push(self.names[k + 1].clone());
        }
        names
    }

    fn region_items(&self) -> Vec<Vec<NodeItem>> {
        let mut items = vec![self.root_items.clone()];
        for &e in &self.region_edge_order() {
            items.push(self.child_items[e].clone());
        }
        items
    }

    /// Name of the region on the outer side of an edge.
    fn parent_region_name(&self, edge: &EdgeInterval) -> String {
        let i = self.edges.iter().position(|e| e.name == edge.name).unwrap();
        match self.parent[i] {
            None => self.region_name_of_root(),
            Some(p) => self.region_name_of_edge(p),
        }
    }

    fn child_region_name(&self, edge: &EdgeInterval) -> String {
        let i = self.edges.iter().position(|e| e.name == edge.name).unwrap();
        self.region_name_of_edge(i)
    }

    fn region_name_of_root(&self) -> String {
        self.names[0].clone()
    }

    fn region_name_of_edge(&self, i: usize) -> String {
        let pos = self.region_edge_order().iter().position(|&e| e == i).unwrap();
        self.names[pos + 1].clone()
    }
}

// ---------------------------------------------------------------------
// Preparation: validate inputs and resolve the configuration tree.
// ---------------------------------------------------------------------

fn prepare(
    f: &BranchedCoverRecursion,
    multicurve: &Multicurve,
    spec: &TreeSpec,
) -> Result<(ResolvedTree, ValidationReport), DecomposeError> {
    if f.source() != f.target() {
        return Err(DecomposeError::NotSelfCover);
    }
    let big_report = f.validate().map_err(|source| DecomposeError::InvalidCover { source })?;
    if multicurve.sphere() != f.source() {
        return Err(DecomposeError::SphereMismatch);
    }
    if matches!(multicurve.certificate(), DisjointnessCertificate::Unverified) {
        return Err(DecomposeError::Uncertified);
    }
    let data = transition_data(f, multicurve)?;
    if !data.is_stable() {
        return Err(DecomposeError::NotInvariant {
            escaped: data.escaped.iter().map(|c| c.key().to_string()).collect(),
        });
    }

    let sphere = f.source();
    if spec.edges.len() != multicurve.len() {
        return Err(DecomposeError::EdgeCurveMismatch {
            detail: format!(
                "{} edges given for {} curve classes",
                spec.edges.len(),
                multicurve.len()
            ),
        });
    }
    if spec.nodes.len() != spec.edges.len() + 1 {
        return Err(DecomposeError::NodeMismatch {
            detail: format!(
                "{} curves cut the sphere into {} regions but {} nodes were given",
                spec.edges.len(),
                spec.edges.len() + 1,
                spec.nodes.len()
            ),
        });
    }

    // Edge words: consecutive runs whose classes exhaust the multicurve.
    let mut used = vec![false; multicurve.len()];
    let mut intervals = Vec::with_capacity(spec.edges.len());
    for edge in &spec.edges {
        let (lo, hi) = run_interval(sphere, &edge.word).ok_or_else(|| {
            DecomposeError::BadEdgeWord { edge: edge.name.clone(), word: edge.word.to_string() }
        })?;
        let key = sphere.canonical_key(&edge.word);
        let ci = multicurve.index_of(&key).ok_or_else(|| DecomposeError::EdgeCurveMismatch {
            detail: format!("edge {:?} is not a class of the multicurve", edge.name),
        })?;
        if used[ci] {
            return Err(DecomposeError::EdgeCurveMismatch {
                detail: format!("two edges present the class of {key}"),
            });
        }
        used[ci] = true;
        intervals.push(EdgeInterval { lo, hi, name: edge.name.clone(), word: edge.word.clone() });
    }

    let layout = RegionLayout::build(sphere, intervals)?;

    // Match the given nodes against the derived regions by puncture set.
    let derived_names = layout.region_names();
    let derived_items = layout.region_items();
    let mut matched: Vec<Option<usize>> = vec![None; derived_items.len()]; // region -> spec node
    for (region, items) in derived_items.iter().enumerate() {
        let want: BTreeSet<String> = puncture_labels(items).into_iter().collect();
        let hit = spec
            .nodes
            .iter()
            .position(|n| n.punctures.iter().cloned().collect::<BTreeSet<_>>() == want);
        match hit {
            Some(k) => {
                if matched.iter().any(|m| *m == Some(k)) {
                    return Err(DecomposeError::NodeMismatch {
                        detail: format!("node {:?} matches two regions", spec.nodes[k].name),
                    });
                }
                matched[region] = Some(k);
            }
            None => {
                return Err(DecomposeError::NodeMismatch {
                    detail: format!(
                        "no node carries exactly the punctures {:?}",
                        puncture_labels(items)
                    ),
                });
            }
        }
    }
    let region_node_name = |region: usize| -> String {
        spec.nodes[matched[region].expect("all regions matched")].name.clone()
    };

    // Verify the declared adjacency of each edge.
    for edge in &spec.edges {
        let li = layout.edges.iter().position(|e| e.name == edge.name).expect("edge kept");
        let parent_region = match layout.parent[li] {
            None => 0,
            Some(p) => 1 + layout.region_edge_order().iter().position(|&e| e == p).unwrap(),
        };
        let child_region =
            1 + layout.region_edge_order().iter().position(|&e| e == li).unwrap();
        let derived: BTreeSet<String> =
            [region_node_name(parent_region), region_node_name(child_region)].into();
        let given: BTreeSet<String> = edge.nodes.iter().cloned().collect();
        if derived != given {
            return Err(DecomposeError::NodeMismatch {
                detail: format!(
                    "edge {:?} separates {:?} but was declared between {:?}",
                    edge.name, derived, given
                ),
            });
        }
    }
    let _ = derived_names;

    // Resolve the tree with the caller's node names, outer region first.
    let named_items: Vec<(String, Vec<NodeItem>)> = derived_items
        .iter()
        .enumerate()
        .map(|(region, items)| (region_node_name(region), items.clone()))
        .collect();
    let tree = ResolvedTree::resolve(&named_items)
        .map_err(|e| DecomposeError::Internal(format!("region resolution failed: {e}")))?;
    if tree.big_sphere != *sphere {
        return Err(DecomposeError::Internal(
            "the resolved regions do not reassemble the original sphere".into(),
        ));
    }
    Ok((tree, big_report))
}

// ---------------------------------------------------------------------
// The cut.
// ---------------------------------------------------------------------

/// Checks every standard-form invariant, reporting each with a witness on
/// failure instead of stopping at the first.
pub fn standard_form_check(
    f: &BranchedCoverRecursion,
    multicurve: &Multicurve,
    spec: &TreeSpec,
) -> StandardFormReport {
    let mut items = Vec::new();
    let mut record = |name: &str, outcome: Result<(), DecomposeError>| {
        let passed = outcome.is_ok();
        items.push(CheckItem {
            name: name.to_string(),
            passed,
            witness: outcome.err().map(|e| e.to_string()),
        });
        passed
    };

    let basic = (|| -> Result<(), DecomposeError> {
        if f.source() != f.target() {
            return Err(DecomposeError::NotSelfCover);
        }
        f.validate().map_err(|source| DecomposeError::InvalidCover { source })?;
        if multicurve.sphere() != f.source() {
            return Err(DecomposeError::SphereMismatch);
        }
        Ok(())
    })();
    if !record("valid self-cover carrying the system", basic) {
        return StandardFormReport { items };
    }

    record(
        "multicurve certified disjoint",
        if matches!(multicurve.certificate(), DisjointnessCertificate::Unverified) {
            Err(DecomposeError::Uncertified)
        } else {
            Ok(())
        },
    );

    let invariance = (|| -> Result<(), DecomposeError> {
        let data = transition_data(f, multicurve)?;
        if data.is_stable() {
            Ok(())
        } else {
            Err(DecomposeError::NotInvariant {
                escaped: data.escaped.iter().map(|c| c.key().to_string()).collect(),
            })
        }
    })();
    record("multicurve invariant under pullback", invariance);

    let resolved_ok = record(
        "tree matches the regions in standard position",
        prepare(f, multicurve, spec).map(|_| ()),
    );
    if !resolved_ok {
        return StandardFormReport { items };
    }

    record("pieces split off in standard form", decompose(f, multicurve, spec).map(|_| ()));
    StandardFormReport { items }
}

/// Cuts `f` along the system into one cover per region.
pub fn decompose(
    f: &BranchedCoverRecursion,
    multicurve: &Multicurve,
    spec: &TreeSpec,
) -> Result<Decomposition, DecomposeError> {
    let (tree, big_report) = prepare(f, multicurve, spec)?;
    let n_nodes = tree.node_count();
    let n = f.source().n();
    let d = f.degree();

    // Trivial cut: a single region returns the covering itself.
    if n_nodes == 1 {
        let node = ConfigurationNode {
            name: tree.names[0].clone(),
            items: tree.items[0].clone(),
            map_to: tree.names[0].clone(),
            degree: d,
            actions: f.actions().to_vec(),
        };
        return Ok(Decomposition {
            manifest: CombineManifest { nodes: vec![node], twists: BTreeMap::new() },
            pieces: vec![DecomposedPiece {
                name: tree.names[0].clone(),
                map_to: tree.names[0].clone(),
                degree: d,
                big_sheets: (1..=d).collect(),
                recursion: f.clone(),
                report: big_report,
            }],
            cycles: vec![PieceCycle { members: vec![tree.names[0].clone()] }],
            caps: Vec::new(),
            decorations: 0,
        });
    }

    // Evaluate every region generator once per target region.
    let mut acts: Vec<Vec<WordAction>> = Vec::with_capacity(n_nodes);
    for m in 0..n_nodes {
        let rows: Result<Vec<WordAction>, _> =
            tree.psi[m].iter().map(|w| f.evaluate(w)).collect();
        acts.push(rows.map_err(|e| DecomposeError::Internal(format!("evaluation failed: {e}")))?);
    }

    // Orbits of each region subgroup on the sheets: the components of the
    // preimage of that region.
    let mut orbit_of: Vec<Vec<usize>> = Vec::with_capacity(n_nodes);
    let mut orbits: Vec<Vec<Vec<usize>>> = Vec::with_capacity(n_nodes);
    for m in 0..n_nodes {
        let mut id = vec![usize::MAX; d];
        let mut list: Vec<Vec<usize>> = Vec::new();
        for s0 in 1..=d {
            if id[s0 - 1] != usize::MAX {
                continue;
            }
            let oid = list.len();
            id[s0 - 1] = oid;
            let mut component = vec![s0];
            let mut queue = vec![s0];
            while let Some(s) = queue.pop() {
                for a in &acts[m] {
                    let t = a.sheet_image(s);
                    if id[t - 1] == usize::MAX {
                        id[t - 1] = oid;
                        component.push(t);
                        queue.push(t);
                    }
                }
            }
            component.sort_unstable();
            list.push(component);
        }
        orbit_of.push(id);
        orbits.push(list);
    }

    // Sort the marked points into components: puncture p lies in the
    // component (over the region of its image) containing its designated
    // peripheral cycle.
    let owner_region: Vec<usize> = (1..=n).map(|p| tree.owner[p - 1].0).collect();
    let mut claim: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for p in 1..=n {
        let dc = &big_report.designations[p - 1];
        let m = owner_region[dc.target - 1];
        let oid = orbit_of[m][dc.base_sheet - 1];
        claim.entry((m, oid)).or_default().insert(p);
    }

    let region_punctures: Vec<BTreeSet<usize>> = (0..n_nodes)
        .map(|j| (1..=n).filter(|&p| owner_region[p - 1] == j).collect())
        .collect();

    // A main component carries exactly one region's punctures and becomes
    // that region's cover; everything else must be unmarked.
    let mut map_to: Vec<Option<usize>> = vec![None; n_nodes];
    let mut main_orbit: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for ((m, oid), points) in &claim {
        match (0..n_nodes).find(|&j| &region_punctures[j] == points) {
            Some(j) => {
                if map_to[j].is_some() {
                    return Err(DecomposeError::NotStandardForm {
                        detail: format!(
                            "two preimage components both carry the punctures of {:?}",
                            tree.names[j]
                        ),
                    });
                }
                map_to[j] = Some(*m);
                main_orbit[j] = orbits[*m][*oid].clone();
            }
            None => {
                let labels: Vec<&str> =
                    points.iter().map(|&p| f.source().labels()[p - 1].as_str()).collect();
                return Err(DecomposeError::NotStandardForm {
                    detail: format!(
                        "a component over {:?} carries {labels:?}, not one region's punctures",
                        tree.names[*m]
                    ),
                });
            }
        }
    }
    let map_to: Vec<usize> = map_to
        .into_iter()
        .enumerate()
        .map(|(j, m)| {
            m.ok_or_else(|| DecomposeError::Internal(format!("region {j} never claimed")))
        })
        .collect::<Result<_, _>>()?;

    let decorations = (0..n_nodes)
        .map(|m| (0..orbits[m].len()).filter(|&oid| !claim.contains_key(&(m, oid))).count())
        .sum();

    // Extract each piece: restrict the region-generator actions to the
    // main component and transport the lifts into the region subgroup.
    let mut manifest_nodes = Vec::with_capacity(n_nodes);
    let mut pieces = Vec::with_capacity(n_nodes);
    for j in 0..n_nodes {
        let m = map_to[j];
        let orbit = &main_orbit[j];
        let dj = orbit.len();
        let pos: BTreeMap<usize, usize> =
            orbit.iter().enumerate().map(|(i, &s)| (s, i + 1)).collect();

        // Gauge: anchor at the designated cycle of the region's first
        // puncture, then spread along the orbit so that spanning-tree
        // lifts come out trivial.
        let p_star = *region_punctures[j].iter().next().expect("regions carry punctures");
        let anchor = &big_report.designations[p_star - 1];
        let mut gauge: Vec<Option<Word>> = vec![None; d + 1];
        gauge[anchor.base_sheet] = Some(anchor.conjugator.inverse());
        let mut queue = VecDeque::from([anchor.base_sheet]);
        while let Some(s) = queue.pop_front() {
            let gs = gauge[s].clone().expect("queued sheets are gauged");
            for a in &acts[m] {
                let t = a.sheet_image(s);
                if gauge[t].is_none() {
                    gauge[t] = Some(gs.concat(a.lift(s)));
                    queue.push_back(t);
                }
            }
        }

        let parser = SubgroupParser::new(f.source(), &tree.psi[j]);
        let mut actions = Vec::with_capacity(tree.items[m].len());
        for (slot0, a) in acts[m].iter().enumerate() {
            let mut permutation = vec![0usize; dj];
            let mut lifts = vec![Word::identity(); dj];
            for (i, &s) in orbit.iter().enumerate() {
                let t = a.sheet_image(s);
                permutation[i] = *pos.get(&t).ok_or_else(|| {
                    DecomposeError::Internal("component not closed under its region".into())
                })?;
                let g_s = gauge[s].as_ref().expect("orbit sheets are gauged");
                let g_t = gauge[t].as_ref().expect("orbit sheets are gauged");
                let conjugated = g_s.concat(a.lift(s)).concat(&g_t.inverse());
                lifts[i] = parser.rewrite(&conjugated).ok_or_else(|| {
                    DecomposeError::NotStandardForm {
                        detail: format!(
                            "a lift of {:?} over slot {} does not stay inside region {:?}",
                            tree.names[m],
                            slot0 + 1,
                            tree.names[j]
                        ),
                    }
                })?;
            }
            actions.push(GeneratorAction { permutation, lifts });
        }

        let recursion = BranchedCoverRecursion::new(
            tree.spheres[j].clone(),
            tree.spheres[m].clone(),
            dj,
            actions.clone(),
        )
        .map_err(|e| DecomposeError::Internal(format!("piece construction failed: {e}")))?;
        let report = recursion.validate().map_err(|source| DecomposeError::PieceValidation {
            node: tree.names[j].clone(),
            source,
        })?;

        // Marked points stay marked, boundary circles stay boundary.
        for (k, item) in tree.items[j].iter().enumerate() {
            let dc = &report.designations[k];
            let image_is_cap = matches!(tree.items[m][dc.target - 1], NodeItem::Cap(_));
            let bad = match item {
                NodeItem::Puncture(_) => image_is_cap,
                NodeItem::Cap(_) => !image_is_cap,
            };
            if bad {
                return Err(DecomposeError::NotStandardForm {
                    detail: format!(
                        "slot {} of {:?} exchanges punctures and boundary circles",
                        k + 1,
                        tree.names[j]
                    ),
                });
            }
        }

        manifest_nodes.push(ConfigurationNode {
            name: tree.names[j].clone(),
            items: tree.items[j].clone(),
            map_to: tree.names[m].clone(),
            degree: dj,
            actions,
        });
        pieces.push(DecomposedPiece {
            name: tree.names[j].clone(),
            map_to: tree.names[m].clone(),
            degree: dj,
            big_sheets: orbit.clone(),
            recursion,
            report,
        });
    }

    let cycles = node_cycles(&map_to)
        .into_iter()
        .map(|cycle| PieceCycle {
            members: cycle.into_iter().map(|j| tree.names[j].clone()).collect(),
        })
        .collect();
    let caps = cap_orbits(&tree, &map_to, &pieces);

    Ok(Decomposition {
        manifest: CombineManifest { nodes: manifest_nodes, twists: BTreeMap::new() },
        pieces,
        cycles,
        caps,
        decorations,
    })
}

/// Composes each periodic piece around its cycle into a self-cover.
pub fn first_return_maps(dec: &Decomposition) -> Result<Vec<FirstReturnMap>, DecomposeError> {
    let index: BTreeMap<&str, usize> =
        dec.pieces.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
    let mut out = Vec::new();
    for cycle in &dec.cycles {
        let period = cycle.members.len();
        for start in &cycle.members {
            let mut j = index[start.as_str()];
            let mut composed = dec.pieces[j].recursion.clone();
            for _ in 1..period {
                j = index[dec.pieces[j].map_to.as_str()];
                composed = dec.pieces[j]
                    .recursion
                    .after(&composed)
                    .map_err(|e| DecomposeError::Internal(format!("composition failed: {e}")))?;
            }
            let report = composed.validate().map_err(|source| {
                DecomposeError::PieceValidation { node: start.clone(), source }
            })?;
            out.push(FirstReturnMap { node: start.clone(), period, recursion: composed, report });
        }
    }
    Ok(out)
}

fn node_cycles(map_to: &[usize]) -> Vec<Vec<usize>> {
    let nn = map_to.len();
    let mut on_cycle = vec![false; nn];
    for j in 0..nn {
        let mut v = j;
        for _ in 0..nn {
            v = map_to[v];
        }
        // v is periodic; mark its whole cycle.
        if !on_cycle[v] {
            let mut u = v;
            loop {
                on_cycle[u] = true;
                u = map_to[u];
                if u == v {
                    break;
                }
            }
        }
    }
    let mut seen = vec![false; nn];
    let mut cycles = Vec::new();
    for j in 0..nn {
        if on_cycle[j] && !seen[j] {
            let mut cycle = Vec::new();
            let mut u = j;
            loop {
                seen[u] = true;
                cycle.push(u);
                u = map_to[u];
                if u == j {
                    break;
                }
            }
            cycles.push(cycle);
        }
    }
    cycles
}

fn cap_orbits(tree: &ResolvedTree, map_to: &[usize], pieces: &[DecomposedPiece]) -> Vec<CapOrbit> {
    let mut out = Vec::new();
    for j in 0..tree.node_count() {
        for (k, item) in tree.items[j].iter().enumerate() {
            let NodeItem::Cap(edge) = item else { continue };
            let start = (j, k + 1);
            let mut state = start;
            let mut degrees = Vec::new();
            let mut return_time = None;
            let mut visited = BTreeSet::from([start]);
            loop {
                let (node, slot) = state;
                let dc = &pieces[node].report.designations[slot - 1];
                degrees.push(dc.degree());
                state = (map_to[node], dc.target);
                if state == start {
                    return_time = Some(degrees.len());
                    break;
                }
                if !visited.insert(state) {
                    break;
                }
            }
            out.push(CapOrbit {
                node: tree.names[j].clone(),
                slot: k + 1,
                edge: edge.clone(),
                return_time,
                degrees,
            });
        }
    }
    out
}

// ---------------------------------------------------------------------
// Rewriting big-sphere words over a region's generators.
// ---------------------------------------------------------------------

/// Expresses words lying in the image of a region inclusion over the
/// region's own generators.  Parsing is a depth-first search preferring
/// maximal cancellation; a successful parse is verified exactly, so a
/// returned word is always correct.
struct SubgroupParser<'a> {
    sphere: &'a MarkedSphere,
    images: &'a [Word],
    /// `(region letter, normal-formed image)`, generators and inverses.
    syllables: Vec<(i32, Word)>,
}

impl<'a> SubgroupParser<'a> {
    fn new(sphere: &'a MarkedSphere, images: &'a [Word]) -> Self {
        let mut syllables = Vec::with_capacity(2 * images.len());
        for (k, image) in images.iter().enumerate() {
            let nf = sphere.normal_form(image);
            syllables.push((k as i32 + 1, nf.clone()));
            syllables.push((-(k as i32 + 1), nf.inverse()));
        }
        SubgroupParser { sphere, images, syllables }
    }

    fn rewrite(&self, w: &Word) -> Option<Word> {
        let target = self.sphere.normal_form(w);
        let mut out: Vec<i32> = Vec::new();
        let mut seen: BTreeSet<Vec<i32>> = BTreeSet::new();
        let mut budget = 4096usize;
        if !self.parse(&target, &mut out, &mut seen, &mut budget) {
            return None;
        }
        let candidate = Word::from_letters(out).ok()?;
        let image = candidate.substitute(self.images).ok()?;
        self.sphere.is_trivial(&image.inverse().concat(w)).then_some(candidate)
    }

    fn parse(
        &self,
        remaining: &Word,
        out: &mut Vec<i32>,
        seen: &mut BTreeSet<Vec<i32>>,
        budget: &mut usize,
    ) -> bool {
        if remaining.is_identity() || self.sphere.is_trivial(remaining) {
            return true;
        }
        if *budget == 0 || !seen.insert(remaining.letters().to_vec()) {
            return false;
        }
        *budget -= 1;
        let mut candidates: Vec<(usize, usize)> = Vec::new();
        for (idx, (_, s)) in self.syllables.iter().enumerate() {
            let cancel = s
                .letters()
                .iter()
                .zip(remaining.letters())
                .take_while(|(a, b)| a == b)
                .count();
            if cancel >= 1 {
                candidates.push((cancel, idx));
            }
        }
        candidates.sort_by_key(|&(c, _)| std::cmp::Reverse(c));
        for (_, idx) in candidates {
            let (letter, s) = &self.syllables[idx];
            let next = s.inverse().concat(remaining);
            out.push(*letter);
            if self.parse(&next, out, seen, budget) {
                return true;
            }
            out.pop();
        }
        false
    }
}

// ---------------------------------------------------------------------
