//! Gluing small sphere covers along a configuration tree into one cover.
//!
//! The input is a tree of marked spheres: each node's punctures are listed
//! in cyclic boundary order and are either genuine punctures of the glued
//! ("big") sphere or *caps* — collapsed boundary circles where a tree edge
//! attaches two nodes.  Each node also carries a branched covering onto the
//! sphere of some node `map_to`.  When the pieces fit together (caps map to
//! caps, with equal local degree on the two sides of every edge, and the
//! fiber counts over all regions agree) they assemble into a single
//! branched self-cover of the big sphere for which the gluing curves form
//! an invariant multicurve with prescribed transition weights `1/δ_e`.
//!
//! Geometry of the assembly: the big sphere is the boundary-connected union
//! of the node spheres; a tree edge `e` becomes an annulus around a curve
//! `γ_e` enclosing the punctures of the subtree on its child side.  Fibers
//! over a region `m` consist of the sheets of the pieces mapping onto `m`
//! plus one point for every *phantom*: an unmarked degree-1 preimage of a
//! cap, beyond which the covering continues over the whole far side of the
//! corresponding edge as a homeomorphic copy.  Lifting a loop around a big
//! puncture crosses annuli along the tree path from the root, evaluates the
//! local piece, and crosses back; crossings permute fiber points matching
//! designated monodromy cycles anchor-to-anchor (an optional integer twist
//! per edge shifts the phase) and contribute connector words that splice
//! the small lift words into the big fundamental group.

use crate::curves::{CurveClass, DisjointnessCertificate, Multicurve};
use crate::matrix::TransitionMatrix;
use crate::recursion::{
    BranchedCoverRecursion, DesignatedCycle, GeneratorAction, RecursionError, ValidationError,
    ValidationReport,
};
use crate::words::{MarkedSphere, SphereError, Word};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// One boundary item of a configuration node, in cyclic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeItem {
    /// A puncture of the big sphere, by its global label.
    Puncture(String),
    /// A collapsed gluing circle, by the name of its tree edge.
    Cap(String),
}

/// One small sphere with its covering map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigurationNode {
    pub name: String,
    /// Punctures and caps in cyclic boundary order.
    pub items: Vec<NodeItem>,
    /// Name of the node whose sphere this one covers.
    pub map_to: String,
    pub degree: usize,
    /// Monodromy/lift rows of the covering, one per item of `map_to`.
    pub actions: Vec<GeneratorAction>,
}

/// Gluing description: nodes forming a tree (the first node is the root
/// used for basepoint and numbering conventions), plus optional integer
/// twists per edge adjusting the crossing phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombineManifest {
    pub nodes: Vec<ConfigurationNode>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub twists: BTreeMap<String, i64>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CombineError {
    #[error("no nodes in the configuration")]
    Empty,
    #[error("duplicate node name {0:?}")]
    DuplicateNodeName(String),
    #[error("node {node:?} maps to unknown node {target:?}")]
    UnknownMapTarget { node: String, target: String },
    #[error("node {0:?} has no puncture item; every region must carry at least one marked point")]
    NoPunctureOnNode(String),
    #[error("puncture label {0:?} appears on more than one node")]
    DuplicatePunctureLabel(String),
    #[error("puncture labels must not start with '@' (reserved for caps): {0:?}")]
    ReservedLabel(String),
    #[error("edge {0:?} must appear as a cap on exactly two nodes, found {1}")]
    EdgeNotTwoSided(String, usize),
    #[error("edge {0:?} connects node {1:?} to itself")]
    EdgeSelfLoop(String, String),
    #[error("the configuration is not a tree ({nodes} nodes, {edges} edges, {reached} reachable from the root)")]
    NotATree { nodes: usize, edges: usize, reached: usize },
    #[error("the glued sphere needs at least 3 punctures, found {0}")]
    TooFewPunctures(usize),
    #[error("node {node:?}: {source}")]
    BadSphere { node: String, source: SphereError },
    #[error("node {node:?}: malformed covering data: {source}")]
    PieceMalformed { node: String, source: RecursionError },
    #[error("node {node:?}: covering data is not a valid sphere cover: {source}")]
    PieceInvalid { node: String, source: ValidationError },
    #[error("node {node:?} maps its puncture {label:?} onto a cap of {target:?}; marked points must map to marked points")]
    PunctureOntoCap { node: String, label: String, target: String },
    #[error("node {node:?} maps its cap of edge {edge:?} onto a puncture of {target:?}; gluing circles must map to gluing circles")]
    CapOntoPuncture { node: String, edge: String, target: String },
    #[error("edge {edge:?}: its two sides map to different target circles, so the gluing annuli do not match")]
    EdgeImageMismatch { edge: String },
    #[error("edge {edge:?}: the two sides cover the target circle with different degrees ({left} vs {right})")]
    CapDegreeMismatch { edge: String, left: usize, right: usize },
    #[error("node {node:?}: unmarked preimage of the cap of edge {edge:?} has degree {degree}; only degree-1 phantom circles are supported")]
    UnsupportedPhantomDegree { node: String, edge: String, degree: usize },
    #[error("fiber over region {region:?} has {found} points but the fiber over the root region has {expected}; the pieces do not assemble into a covering of constant degree")]
    FiberImbalance { region: String, expected: usize, found: usize },
    #[error("two gluing curves represent the same class {0}")]
    DuplicateGluingCurve(Word),
    #[error("assembled cover failed its own coherence check ({0}); this indicates inconsistent gluing data")]
    InternalConsistency(String),
}

/// A gluing curve of the assembled cover.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GluingCurve {
    pub edge: String,
    /// Interval word enclosing the child-side punctures.
    pub word: Word,
    /// Edge whose curve this one covers under the assembled map.
    pub image_edge: String,
    /// Covering degree of the annulus map.
    pub degree: usize,
}

/// Result of a successful assembly.
#[derive(Debug, Clone, Serialize)]
pub struct CombinedCover {
    pub recursion: BranchedCoverRecursion,
    pub report: ValidationReport,
    pub curves: Vec<GluingCurve>,
    /// The gluing curves as a multicurve (standard position by
    /// construction, hence declared simple).
    pub multicurve: Multicurve,
    /// Transition matrix predicted from the edge dynamics alone
    /// (`1/δ_e` from curve `e` to curve `E(e)`); the assembled cover's
    /// actual pullback must reproduce it.
    pub predicted_matrix: TransitionMatrix,
    /// Human-readable fiber point names, by sheet number.
    pub sheet_names: Vec<String>,
    pub phantom_count: usize,
}

// ---------------------------------------------------------------------
// Tree resolution shared by gluing and (elsewhere) decomposition.
// ---------------------------------------------------------------------

/// An edge of the configuration tree, rooted: `sides[0]` is on the parent
/// (root-facing) node, `sides[1]` on the child.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedEdge {
    pub name: String,
    /// `(node index, 1-based item slot)`, parent side first.
    pub sides: [(usize, usize); 2],
}

impl ResolvedEdge {
    pub fn parent_node(&self) -> usize {
        self.sides[0].0
    }
    pub fn child_node(&self) -> usize {
        self.sides[1].0
    }
}

/// The combinatorial part of a configuration: tree structure, derived big
/// sphere, subtree intervals and the puncture-group homomorphisms of the
/// nodes into the big sphere group.
#[derive(Debug, Clone)]
pub struct ResolvedTree {
    pub names: Vec<String>,
    pub items: Vec<Vec<NodeItem>>,
    pub spheres: Vec<MarkedSphere>,
    pub edges: Vec<ResolvedEdge>,
    /// Parent edge index per node (`None` for the root).
    pub parent_edge: Vec<Option<usize>>,
    /// Nodes of each node's subtree (including itself).
    pub subtree: Vec<BTreeSet<usize>>,
    /// The glued sphere, punctures in planar traversal order.
    pub big_sphere: MarkedSphere,
    /// Big puncture index per `(node, slot)`; `None` on caps.
    pub big_index: Vec<Vec<Option<usize>>>,
    /// Owner `(node, slot)` of each big puncture.
    pub owner: Vec<(usize, usize)>,
    /// Big puncture interval `[lo, hi]` covered by each node's subtree.
    pub interval: Vec<(usize, usize)>,
    /// Images of each node's puncture generators in the big sphere group.
    pub psi: Vec<Vec<Word>>,
    /// Edge index of the cap at `(node, slot)`.
    cap_edge: Vec<BTreeMap<usize, usize>>,
}

impl ResolvedTree {
    /// Resolves names, derives the tree (rooted at the first node), the
    /// big sphere and the `psi` homomorphisms.
    pub fn resolve(named_items: &[(String, Vec<NodeItem>)]) -> Result<Self, CombineError> {
        if named_items.is_empty() {
            return Err(CombineError::Empty);
        }
        let n_nodes = named_items.len();
        let names: Vec<String> = named_items.iter().map(|(n, _)| n.clone()).collect();
        {
            let mut seen = BTreeSet::new();
            for name in &names {
                if !seen.insert(name.clone()) {
                    return Err(CombineError::DuplicateNodeName(name.clone()));
                }
            }
        }
        let items: Vec<Vec<NodeItem>> = named_items.iter().map(|(_, i)| i.clone()).collect();

        // Edges: every cap name must occur exactly twice, on distinct nodes.
        let mut occurrences: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
        let mut puncture_labels: BTreeSet<String> = BTreeSet::new();
        for (j, node_items) in items.iter().enumerate() {
            let mut has_puncture = false;
            for (k, item) in node_items.iter().enumerate() {
                match item {
                    NodeItem::Puncture(label) => {
                        has_puncture = true;
                        if label.starts_with('@') {
                            return Err(CombineError::ReservedLabel(label.clone()));
                        }
                        if !puncture_labels.insert(label.clone()) {
                            return Err(CombineError::DuplicatePunctureLabel(label.clone()));
                        }
                    }
                    NodeItem::Cap(edge) => {
                        occurrences.entry(edge.clone()).or_default().push((j, k + 1));
                    }
                }
            }
            if !has_puncture {
                return Err(CombineError::NoPunctureOnNode(names[j].clone()));
            }
        }
        if puncture_labels.len() < 3 {
            return Err(CombineError::TooFewPunctures(puncture_labels.len()));
        }
        let mut raw_edges: Vec<(String, [(usize, usize); 2])> = Vec::new();
        for (name, occ) in &occurrences {
            if occ.len() != 2 {
                return Err(CombineError::EdgeNotTwoSided(name.clone(), occ.len()));
            }
            if occ[0].0 == occ[1].0 {
                return Err(CombineError::EdgeSelfLoop(name.clone(), names[occ[0].0].clone()));
            }
            raw_edges.push((name.clone(), [occ[0], occ[1]]));
        }

        // Root the tree at node 0 by breadth-first search.
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_nodes]; // (edge, other node)
        for (e, (_, sides)) in raw_edges.iter().enumerate() {
            adjacency[sides[0].0].push((e, sides[1].0));
            adjacency[sides[1].0].push((e, sides[0].0));
        }
        let mut parent_edge: Vec<Option<usize>> = vec![None; n_nodes];
        let mut visited = vec![false; n_nodes];
        visited[0] = true;
        let mut queue = std::collections::VecDeque::from([0usize]);
        let mut reached = 1usize;
        let mut edge_parent_side: Vec<Option<usize>> = vec![None; raw_edges.len()];
        while let Some(v) = queue.pop_front() {
            for &(e, u) in &adjacency[v] {
                if !visited[u] {
                    visited[u] = true;
                    reached += 1;
                    parent_edge[u] = Some(e);
                    edge_parent_side[e] = Some(if raw_edges[e].1[0].0 == v { 0 } else { 1 });
                    queue.push_back(u);
                }
            }
        }
        if raw_edges.len() != n_nodes - 1 || reached != n_nodes {
            return Err(CombineError::NotATree {
                nodes: n_nodes,
                edges: raw_edges.len(),
                reached,
            });
        }
        let edges: Vec<ResolvedEdge> = raw_edges
            .iter()
            .enumerate()
            .map(|(e, (name, sides))| {
                let p = edge_parent_side[e].expect("every tree edge is oriented by the search");
                ResolvedEdge { name: name.clone(), sides: [sides[p], sides[1 - p]] }
            })
            .collect();

        // Small spheres: puncture labels, caps as "@edgename".
        let mut spheres = Vec::with_capacity(n_nodes);
        for (j, node_items) in items.iter().enumerate() {
            let labels: Vec<String> = node_items
                .iter()
                .map(|it| match it {
                    NodeItem::Puncture(l) => l.clone(),
                    NodeItem::Cap(e) => format!("@{e}"),
                })
                .collect();
            let sphere = MarkedSphere::new(labels)
                .map_err(|source| CombineError::BadSphere { node: names[j].clone(), source })?;
            spheres.push(sphere);
        }

        let mut cap_edge: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); n_nodes];
        for (e, edge) in edges.iter().enumerate() {
            for &(node, slot) in &edge.sides {
                cap_edge[node].insert(slot, e);
            }
        }

        // Planar traversal: assign big puncture indices; child nodes are
        // entered through their parent cap and walked cyclically from the
        // next slot.
        let mut big_labels: Vec<String> = Vec::new();
        let mut big_index: Vec<Vec<Option<usize>>> =
            items.iter().map(|its| vec![None; its.len()]).collect();
        let mut owner: Vec<(usize, usize)> = Vec::new();
        let mut interval: Vec<(usize, usize)> = vec![(usize::MAX, 0); n_nodes];
        // Iterative traversal: (node, slots remaining to walk in order).
        let walk_order = |node: usize, enter_slot: Option<usize>| -> Vec<usize> {
            let k = items[node].len();
            match enter_slot {
                None => (1..=k).collect(),
                Some(pc) => (1..k).map(|off| (pc - 1 + off) % k + 1).collect(),
            }
        };
        let mut stack: Vec<(usize, std::vec::IntoIter<usize>)> =
            vec![(0usize, walk_order(0, None).into_iter())];
        while let Some((node, iter)) = stack.last_mut() {
            let node = *node;
            match iter.next() {
                None => {
                    stack.pop();
                }
                Some(slot) => match &items[node][slot - 1] {
                    NodeItem::Puncture(label) => {
                        big_labels.push(label.clone());
                        let idx = big_labels.len();
                        big_index[node][slot - 1] = Some(idx);
                        owner.push((node, slot));
                        let (lo, hi) = interval[node];
                        interval[node] = (lo.min(idx), hi.max(idx));
                    }
                    NodeItem::Cap(_) => {
                        let e = cap_edge[node][&slot];
                        if edges[e].parent_node() == node {
                            let child = edges[e].child_node();
                            let enter = edges[e].sides[1].1;
                            stack.push((child, walk_order(child, Some(enter)).into_iter()));
                        }
                        // The parent-facing cap of the current node was
                        // already consumed by the entry order.
                    }
                },
            }
        }
        let big_sphere = MarkedSphere::new(big_labels.clone())
            .map_err(|_| CombineError::TooFewPunctures(big_labels.len()))?;

        // Subtree node sets and subtree intervals (a subtree's punctures
        // are numbered consecutively by the traversal).
        let mut order: Vec<usize> = (0..n_nodes).collect();
        order.sort_by_key(|&j| std::cmp::Reverse(depth_of(j, &parent_edge, &edges)));
        let mut subtree: Vec<BTreeSet<usize>> = (0..n_nodes).map(|j| BTreeSet::from([j])).collect();
        for &j in &order {
            if let Some(pe) = parent_edge[j] {
                let parent = edges[pe].parent_node();
                let child_set = subtree[j].clone();
                let (mut lo, mut hi) = interval[j];
                for &c in &child_set {
                    let (clo, chi) = interval[c];
                    lo = lo.min(clo);
                    hi = hi.max(chi);
                }
                interval[j] = (lo, hi);
                subtree[parent].extend(child_set);
            }
        }
        // Finish intervals bottom-up (the loop above folded children before
        // parents thanks to the depth ordering); the root spans everything.
        interval[0] = (1, big_labels.len());

        // psi: puncture -> its big generator; cap toward a child -> the
        // child subtree's interval product; parent cap -> the inverse of
        // the node's own subtree interval product.
        let mut psi: Vec<Vec<Word>> = Vec::with_capacity(n_nodes);
        for j in 0..n_nodes {
            let mut images = Vec::with_capacity(items[j].len());
            for (k, item) in items[j].iter().enumerate() {
                let slot = k + 1;
                let image = match item {
                    NodeItem::Puncture(_) => {
                        Word::generator(big_index[j][k].expect("punctures are numbered"))
                    }
                    NodeItem::Cap(_) => {
                        let e = cap_edge[j][&slot];
                        if edges[e].parent_node() == j {
                            let child = edges[e].child_node();
                            let (lo, hi) = interval[child];
                            interval_word(lo, hi)
                        } else {
                            let (lo, hi) = interval[j];
                            interval_word(lo, hi).inverse()
                        }
                    }
                };
                images.push(image);
            }
            psi.push(images);
        }

        Ok(ResolvedTree {
            names,
            items,
            spheres,
            edges,
            parent_edge,
            subtree,
            big_sphere,
            big_index,
            owner,
            interval,
            psi,
            cap_edge,
        })
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Edge index of the cap at `(node, slot)`, if that item is a cap.
    pub fn cap_edge_at(&self, node: usize, slot: usize) -> Option<usize> {
        self.cap_edge[node].get(&slot).copied()
    }

    /// Image of a node word under its inclusion into the big sphere group.
    pub fn psi_apply(&self, node: usize, w: &Word) -> Word {
        w.substitute(&self.psi[node]).expect("node words stay within the node sphere")
    }

    /// Edges on the path from the root to `node`, in crossing order.
    pub fn path_from_root(&self, node: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut v = node;
        while let Some(e) = self.parent_edge[v] {
            path.push(e);
            v = self.edges[e].parent_node();
        }
        path.reverse();
        path
    }

    /// Node set on the far side of `edge` as seen from end node `from`.
    pub fn far_side(&self, edge: usize, from: usize) -> BTreeSet<usize> {
        let child = self.edges[edge].child_node();
        if from == self.edges[edge].parent_node() {
            self.subtree[child].clone()
        } else {
            debug_assert_eq!(from, child);
            (0..self.node_count()).filter(|j| !self.subtree[child].contains(j)).collect()
        }
    }

    /// The standard-position word of the gluing curve of `edge`.
    pub fn curve_word(&self, edge: usize) -> Word {
        let (lo, hi) = self.interval[self.edges[edge].child_node()];
        interval_word(lo, hi)
    }
}

fn depth_of(mut j: usize, parent_edge: &[Option<usize>], edges: &[ResolvedEdge]) -> usize {
    let mut d = 0;
    while let Some(e) = parent_edge[j] {
        d += 1;
        j = edges[e].parent_node();
    }
    d
}

fn interval_word(lo: usize, hi: usize) -> Word {
    Word::from_letters((lo..=hi).map(|i| i as i32)).expect("positive letters")
}

// ---------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum FiberPoint {
    Main { node: usize, sheet: usize },
    Phantom { id: usize },
}

#[derive(Debug, Clone)]
struct PhantomInfo {
    spawn_node: usize,
    target_edge: usize,
    sheet: usize,
    covers: BTreeSet<usize>,
}

/// Assembles the pieces of a manifest into a single validated self-cover
/// of the glued sphere.
pub fn combine(manifest: &CombineManifest) -> Result<CombinedCover, CombineError> {
    let named_items: Vec<(String, Vec<NodeItem>)> =
        manifest.nodes.iter().map(|n| (n.name.clone(), n.items.clone())).collect();
    let tree = ResolvedTree::resolve(&named_items)?;
    let n_nodes = tree.node_count();

    // Resolve map targets and build the piece coverings.
    let mut map_to: Vec<usize> = Vec::with_capacity(n_nodes);
    for node in &manifest.nodes {
        let target = tree.node_index(&node.map_to).ok_or_else(|| {
            CombineError::UnknownMapTarget { node: node.name.clone(), target: node.map_to.clone() }
        })?;
        map_to.push(target);
    }
    let mut pieces: Vec<BranchedCoverRecursion> = Vec::with_capacity(n_nodes);
    let mut reports: Vec<ValidationReport> = Vec::with_capacity(n_nodes);
    for (j, node) in manifest.nodes.iter().enumerate() {
        let recursion = BranchedCoverRecursion::new(
            tree.spheres[j].clone(),
            tree.spheres[map_to[j]].clone(),
            node.degree,
            node.actions.clone(),
        )
        .map_err(|source| CombineError::PieceMalformed { node: node.name.clone(), source })?;
        let report = recursion
            .validate()
            .map_err(|source| CombineError::PieceInvalid { node: node.name.clone(), source })?;
        pieces.push(recursion);
        reports.push(report);
    }

    // Marked-point discipline: punctures onto punctures, caps onto caps;
    // edge images and annulus degrees must agree on both sides.
    for j in 0..n_nodes {
        let target = map_to[j];
        for (k, item) in tree.items[j].iter().enumerate() {
            let slot = k + 1;
            let dc = &reports[j].designations[slot - 1];
            let image_is_cap = tree.cap_edge_at(target, dc.target).is_some();
            match item {
                NodeItem::Puncture(label) => {
                    if image_is_cap {
                        return Err(CombineError::PunctureOntoCap {
                            node: tree.names[j].clone(),
                            label: label.clone(),
                            target: tree.names[target].clone(),
                        });
                    }
                }
                NodeItem::Cap(edge) => {
                    if !image_is_cap {
                        return Err(CombineError::CapOntoPuncture {
                            node: tree.names[j].clone(),
                            edge: edge.clone(),
                            target: tree.names[target].clone(),
                        });
                    }
                }
            }
        }
    }
    // Edge map E and annulus degrees.
    let mut edge_image: Vec<usize> = Vec::with_capacity(tree.edges.len());
    let mut edge_degree: Vec<usize> = Vec::with_capacity(tree.edges.len());
    for edge in &tree.edges {
        let mut images: Vec<(usize, usize, usize)> = Vec::new(); // (target edge, node, degree)
        for &(node, slot) in &edge.sides {
            let dc = &reports[node].designations[slot - 1];
            let target = map_to[node];
            let e_img = tree.cap_edge_at(target, dc.target).expect("checked: caps map to caps");
            images.push((e_img, target, dc.degree()));
        }
        if images[0].0 != images[1].0 {
            return Err(CombineError::EdgeImageMismatch { edge: edge.name.clone() });
        }
        let e_img = images[0].0;
        // The two image circles must be the two distinct sides of the
        // image edge (one on each adjacent region).
        let image_sides: BTreeSet<usize> =
            tree.edges[e_img].sides.iter().map(|&(n, _)| n).collect();
        let mapped_sides: BTreeSet<usize> = images.iter().map(|&(_, n, _)| n).collect();
        if image_sides != mapped_sides {
            return Err(CombineError::EdgeImageMismatch { edge: edge.name.clone() });
        }
        if images[0].2 != images[1].2 {
            return Err(CombineError::CapDegreeMismatch {
                edge: edge.name.clone(),
                left: images[0].2,
                right: images[1].2,
            });
        }
        edge_image.push(e_img);
        edge_degree.push(images[0].2);
    }

    // Phantoms: unmarked cycles in the evaluation of target cap generators.
    let mut phantoms: Vec<PhantomInfo> = Vec::new();
    // (node, target slot) -> list of (cycle base sheet -> phantom id)
    let mut phantom_at: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    for j in 0..n_nodes {
        let target = map_to[j];
        for k in 0..tree.items[target].len() {
            let slot = k + 1;
            let Some(e_target) = tree.cap_edge_at(target, slot) else { continue };
            let marked_bases: BTreeSet<usize> = reports[j]
                .designations
                .iter()
                .filter(|dc| dc.target == slot)
                .map(|dc| dc.base_sheet)
                .collect();
            let action = pieces[j]
                .evaluate(&Word::generator(slot))
                .expect("target generator in range");
            for cycle in action.cycles() {
                if marked_bases.contains(&cycle[0]) {
                    continue;
                }
                if cycle.len() != 1 {
                    return Err(CombineError::UnsupportedPhantomDegree {
                        node: tree.names[j].clone(),
                        edge: tree.edges[e_target].name.clone(),
                        degree: cycle.len(),
                    });
                }
                let id = phantoms.len();
                phantoms.push(PhantomInfo {
                    spawn_node: j,
                    target_edge: e_target,
                    sheet: cycle[0],
                    covers: tree.far_side(e_target, target),
                });
                phantom_at.insert((j, slot, cycle[0]), id);
            }
        }
    }

    // Fibers per region; the root fiber numbers the big sheets.
    let fiber = |m: usize| -> Vec<FiberPoint> {
        let mut pts = Vec::new();
        for j in 0..n_nodes {
            if map_to[j] == m {
                for s in 1..=pieces[j].degree() {
                    pts.push(FiberPoint::Main { node: j, sheet: s });
                }
            }
        }
        for (id, ph) in phantoms.iter().enumerate() {
            if ph.covers.contains(&m) {
                pts.push(FiberPoint::Phantom { id });
            }
        }
        pts
    };
    let root_fiber = fiber(0);
    let degree = root_fiber.len();
    for m in 0..n_nodes {
        let size = fiber(m).len();
        if size != degree {
            return Err(CombineError::FiberImbalance {
                region: tree.names[m].clone(),
                expected: degree,
                found: size,
            });
        }
    }
    let root_index: BTreeMap<FiberPoint, usize> =
        root_fiber.iter().enumerate().map(|(i, &p)| (p, i + 1)).collect();

    // Crossing maps and connector words per edge, in the parent-to-child
    // direction (paths from the root only ever descend).
    let mut cross: Vec<BTreeMap<FiberPoint, FiberPoint>> = Vec::with_capacity(tree.edges.len());
    let mut cross_inv: Vec<BTreeMap<FiberPoint, FiberPoint>> = Vec::with_capacity(tree.edges.len());
    let mut phi: Vec<BTreeMap<FiberPoint, Word>> = Vec::with_capacity(tree.edges.len());
    for (e, edge) in tree.edges.iter().enumerate() {
        let (m0, c0) = edge.sides[0];
        let (m1, c1) = edge.sides[1];
        let twist = manifest.twists.get(&edge.name).copied().unwrap_or(0);
        let mut table: BTreeMap<FiberPoint, FiberPoint> = BTreeMap::new();
        let mut phi_e: BTreeMap<FiberPoint, Word> = BTreeMap::new();

        for j in 0..n_nodes {
            if map_to[j] != m0 {
                continue;
            }
            // Marked crossings: designated cycles over the near cap match
            // the designated cycles on the far side of their source edge.
            for dc in &reports[j].designations {
                if dc.target != c0 {
                    continue;
                }
                let src_edge = tree
                    .cap_edge_at(j, dc.source)
                    .expect("designation onto a cap comes from a cap");
                let (oj, oslot) = other_side(&tree.edges[src_edge], j, dc.source);
                debug_assert_eq!(map_to[oj], m1, "edge-image checks pin the far region");
                let far_dc = &reports[oj].designations[oslot - 1];
                debug_assert_eq!(far_dc.target, c1);
                let delta = dc.degree();
                debug_assert_eq!(delta, far_dc.degree());
                let shift = twist.rem_euclid(delta as i64) as usize;
                for (i, &s) in dc.sheets.iter().enumerate() {
                    let t = far_dc.sheets[(shift + delta - i % delta) % delta];
                    table.insert(
                        FiberPoint::Main { node: j, sheet: s },
                        FiberPoint::Main { node: oj, sheet: t },
                    );
                }
                // Connector words along the near cycle, anchored at its
                // base.  The anchor value aligns the two designated cycles'
                // base paths: going around the near cycle accumulates
                // ψ(κ_near · x · κ_near⁻¹) while the far side accumulates
                // ψ(κ_far · x⁻¹ · κ_far⁻¹), so the splice closes up exactly
                // when seeded with ψ(κ_near)·ψ(κ_far)⁻¹.
                let near_action = pieces[j].action(c0);
                let far_inverse = pieces[oj]
                    .evaluate(&Word::generator_inverse(c1))
                    .expect("cap generator in range");
                let mut value = tree
                    .psi_apply(j, &dc.conjugator)
                    .concat(&tree.psi_apply(oj, &far_dc.conjugator).inverse());
                phi_e.insert(FiberPoint::Main { node: j, sheet: dc.sheets[0] }, value.clone());
                for i in 0..delta - 1 {
                    let s = dc.sheets[i];
                    let a = tree.psi_apply(j, &near_action.lifts[s - 1]);
                    let crossed = table[&FiberPoint::Main { node: j, sheet: s }];
                    let b = match crossed {
                        FiberPoint::Main { node, sheet } => {
                            tree.psi_apply(node, far_inverse.lift(sheet))
                        }
                        FiberPoint::Phantom { .. } => unreachable!("marked cycles cross to sheets"),
                    };
                    value = a.inverse().concat(&value).concat(&b);
                    phi_e.insert(
                        FiberPoint::Main { node: j, sheet: dc.sheets[i + 1] },
                        value.clone(),
                    );
                }
            }
            // Unmarked near fixed points dive into their phantom.
            for key_sheet in 1..=pieces[j].degree() {
                if let Some(&id) = phantom_at.get(&(j, c0, key_sheet)) {
                    if phantoms[id].target_edge == e {
                        table.insert(
                            FiberPoint::Main { node: j, sheet: key_sheet },
                            FiberPoint::Phantom { id },
                        );
                        phi_e.insert(
                            FiberPoint::Main { node: j, sheet: key_sheet },
                            Word::identity(),
                        );
                    }
                }
            }
        }
        // Phantoms on the parent side: either surface on the far side of
        // their spawn edge, or pass through unaffected.
        for (id, ph) in phantoms.iter().enumerate() {
            if !ph.covers.contains(&m0) {
                continue;
            }
            let point = FiberPoint::Phantom { id };
            if ph.covers.contains(&m1) {
                table.insert(point, point);
            } else {
                // Crossing out of the phantom's territory: this edge must
                // be its spawn edge, surfacing at the spawning sheet.
                debug_assert_eq!(ph.target_edge, e);
                table.insert(point, FiberPoint::Main { node: ph.spawn_node, sheet: ph.sheet });
            }
            phi_e.insert(point, Word::identity());
        }

        // The crossing must biject the two fibers.
        let targets: BTreeSet<FiberPoint> = table.values().copied().collect();
        if table.len() != degree || targets.len() != degree {
            return Err(CombineError::FiberImbalance {
                region: tree.names[m1].clone(),
                expected: degree,
                found: targets.len(),
            });
        }
        let inverse: BTreeMap<FiberPoint, FiberPoint> =
            table.iter().map(|(&a, &b)| (b, a)).collect();
        cross.push(table);
        cross_inv.push(inverse);
        phi.push(phi_e);
    }

    // Assemble the big generator actions.
    let n_big = tree.big_sphere.n();
    let mut actions: Vec<GeneratorAction> = Vec::with_capacity(n_big);
    for p in 1..=n_big {
        let (t_node, t_slot) = tree.owner[p - 1];
        let path = tree.path_from_root(t_node);
        let mut permutation = vec![0usize; degree];
        let mut lifts = vec![Word::identity(); degree];
        for (s_idx, start) in root_fiber.iter().enumerate() {
            let mut left = Word::identity();
            let mut state = *start;
            for &e in &path {
                left = left.concat(&phi[e][&state]);
                state = cross[e][&state];
            }
            let (mid, mut back) = match state {
                FiberPoint::Main { node, sheet } => {
                    let action = pieces[node].action(t_slot);
                    let image = action.permutation[sheet - 1];
                    (
                        tree.psi_apply(node, &action.lifts[sheet - 1]),
                        FiberPoint::Main { node, sheet: image },
                    )
                }
                FiberPoint::Phantom { .. } => (Word::identity(), state),
            };
            let mut word = left.concat(&mid);
            for &e in path.iter().rev() {
                let prev = cross_inv[e][&back];
                word = word.concat(&phi[e][&prev].inverse());
                back = prev;
            }
            permutation[s_idx] = root_index[&back];
            lifts[s_idx] = word;
        }
        actions.push(GeneratorAction { permutation, lifts });
    }

    let recursion = BranchedCoverRecursion::new(
        tree.big_sphere.clone(),
        tree.big_sphere.clone(),
        degree,
        actions,
    )
    .map_err(|e| CombineError::InternalConsistency(e.to_string()))?;
    let report =
        recursion.validate().map_err(|e| CombineError::InternalConsistency(e.to_string()))?;

    // Gluing curves, their classes and the predicted transition matrix.
    let mut curves = Vec::with_capacity(tree.edges.len());
    let mut curve_words = Vec::with_capacity(tree.edges.len());
    for (e, edge) in tree.edges.iter().enumerate() {
        let word = tree.curve_word(e);
        curves.push(GluingCurve {
            edge: edge.name.clone(),
            word: word.clone(),
            image_edge: tree.edges[edge_image[e]].name.clone(),
            degree: edge_degree[e],
        });
        curve_words.push(word);
    }
    {
        let mut keys = BTreeSet::new();
        for w in &curve_words {
            let key = tree.big_sphere.canonical_key(w);
            if !keys.insert(key.clone()) {
                return Err(CombineError::DuplicateGluingCurve(key));
            }
        }
    }
    let multicurve = Multicurve::new(
        tree.big_sphere.clone(),
        &curve_words,
        DisjointnessCertificate::DeclaredSimple,
    )
    .map_err(|e| CombineError::InternalConsistency(e.to_string()))?;
    let mut predicted = TransitionMatrix::zero(multicurve.len());
    for e in 0..tree.edges.len() {
        let row_class = CurveClass::from_word(&tree.big_sphere, &curve_words[e])
            .expect("curve words are in range");
        let col_class = CurveClass::from_word(&tree.big_sphere, &curve_words[edge_image[e]])
            .expect("curve words are in range");
        let row = multicurve.index_of(row_class.key()).expect("gluing curves are the system");
        let col = multicurve.index_of(col_class.key()).expect("gluing curves are the system");
        predicted.add_to_entry(
            row,
            col,
            BigRational::new(BigInt::from(1), BigInt::from(edge_degree[e])),
        );
    }

    let sheet_names = root_fiber
        .iter()
        .map(|pt| match pt {
            FiberPoint::Main { node, sheet } => format!("{}:{}", tree.names[*node], sheet),
            FiberPoint::Phantom { id } => {
                let ph = &phantoms[*id];
                format!(
                    "phantom:{}@{}#{}",
                    tree.names[ph.spawn_node], tree.edges[ph.target_edge].name, ph.sheet
                )
            }
        })
        .collect();

    Ok(CombinedCover {
        recursion,
        report,
        curves,
        multicurve,
        predicted_matrix: predicted,
        sheet_names,
        phantom_count: phantoms.len(),
    })
}

fn other_side(edge: &ResolvedEdge, node: usize, slot: usize) -> (usize, usize) {
    if edge.sides[0] == (node, slot) {
        edge.sides[1]
    } else {
        debug_assert_eq!(edge.sides[1], (node, slot));
        edge.sides[0]
    }
}

/// Designation lookup by source puncture (1-based).
pub fn designation_of(report: &ValidationReport, source: usize) -> &DesignatedCycle {
    &report.designations[source - 1]
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::pullback::transition_data;
    use crate::words::Word;
    use std::str::FromStr;

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
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

    use crate::fixtures::{levy_pair_manifest, swapped_chain_manifest};

    #[test]
    fn levy_pair_assembles_to_the_verified_cover() {
        let combined = combine(&levy_pair_manifest()).unwrap();
        let f = &combined.recursion;
        assert_eq!(f.degree(), 2);
        assert_eq!(f.target().labels(), ["a1", "a2", "b1", "b2", "b3"]);
        assert_eq!(combined.phantom_count, 1);

        // Known assembled actions (checked against an independent hand
        // computation of the crossing bookkeeping).
        assert_eq!(f.action(1).permutation, vec![2, 1]);
        assert_eq!(f.action(1).lifts, vec![w("x1x2X1"), w("")]);
        assert_eq!(f.action(2).permutation, vec![2, 1]);
        assert_eq!(f.action(2).lifts, vec![w(""), w("x1")]);
        for i in 3..=5 {
            assert_eq!(f.action(i).permutation, vec![1, 2]);
            assert_eq!(f.action(i).lifts[1], w(""));
        }
        assert_eq!(f.action(3).lifts[0], w("x3"));

        // Portrait: a1 <-> a2 critically, the root punctures fixed.
        let portrait = &combined.report.portrait;
        assert_eq!(portrait.image_of(1), 2);
        assert_eq!(portrait.image_of(2), 1);
        assert_eq!(portrait.local_degree(1), 2);
        for i in 3..=5 {
            assert_eq!(portrait.image_of(i), i);
        }

        // The gluing curve is fixed with annulus degree 1.
        assert_eq!(combined.curves.len(), 1);
        assert_eq!(combined.curves[0].word, w("x1x2"));
        assert_eq!(combined.curves[0].image_edge, "e");
        assert_eq!(combined.curves[0].degree, 1);
        let one = BigRational::from_str("1").unwrap();
        assert_eq!(combined.predicted_matrix.entry(0, 0), &one);

        // The assembled cover's actual pullback reproduces the prediction.
        let data = transition_data(f, &combined.multicurve).unwrap();
        assert!(data.is_stable());
        assert_eq!(data.matrix, combined.predicted_matrix);
    }

    #[test]
    fn swapped_chain_realizes_the_expected_matrix() {
        let combined = combine(&swapped_chain_manifest()).unwrap();
        let f = &combined.recursion;
        assert_eq!(f.degree(), 2);
        assert_eq!(f.target().labels(), ["a1", "a2", "b1", "c1", "c2"]);
        assert_eq!(combined.phantom_count, 1);

        // gamma1 (around b1,c1,c2 ~ class of x1x2) and gamma2 (around
        // c1,c2) swap; annulus degrees 1 and 2.
        let by_edge: BTreeMap<&str, &GluingCurve> =
            combined.curves.iter().map(|c| (c.edge.as_str(), c)).collect();
        assert_eq!(by_edge["g1"].word, w("x3x4x5"));
        assert_eq!(by_edge["g1"].image_edge, "g2");
        assert_eq!(by_edge["g1"].degree, 1);
        assert_eq!(by_edge["g2"].word, w("x4x5"));
        assert_eq!(by_edge["g2"].image_edge, "g1");
        assert_eq!(by_edge["g2"].degree, 2);

        // Class order: [x1x2] < [x1x2x3], so the predicted matrix is
        // [[0, 1], [1/2, 0]].
        let half = BigRational::from_str("1/2").unwrap();
        let one = BigRational::from_str("1").unwrap();
        assert_eq!(combined.predicted_matrix.entry(0, 1), &one);
        assert_eq!(combined.predicted_matrix.entry(1, 0), &half);

        let data = transition_data(f, &combined.multicurve).unwrap();
        assert!(data.is_stable());
        assert_eq!(data.matrix, combined.predicted_matrix);

        // Hand-verified assembled actions.
        assert_eq!(f.action(1).permutation, vec![1, 2]);
        assert_eq!(f.action(1).lifts, vec![w("x4"), w("x5")]);
        assert_eq!(f.action(3).permutation, vec![2, 1]);
        assert_eq!(f.action(3).lifts, vec![w("X5"), w("X4x3x4x5")]);
        assert_eq!(f.action(4).lifts, vec![w("x1"), w("")]);
        assert_eq!(f.action(5).lifts, vec![w("x2"), w("")]);

        // Orbifold of the assembled cover: (2,2,2,2,inf), hyperbolic.
        let orb = combined.report.portrait.orbifold().unwrap();
        assert!(orb.is_hyperbolic());
    }

    #[test]
    fn cap_degree_mismatch_is_rejected() {
        let mut manifest = levy_pair_manifest();
        // Replace the identity root by a squaring-like cover whose cap has
        // local degree 2, clashing with degree 1 on the other side.
        manifest.nodes[0] = ConfigurationNode {
            name: "B".into(),
            items: vec![cap("e"), p("b1"), p("b2"), p("b3")],
            map_to: "B".into(),
            degree: 2,
            actions: vec![
                action(&[2, 1], &["", "x1"]),
                action(&[1, 2], &["x2", ""]),
                action(&[1, 2], &["x3", ""]),
                action(&[2, 1], &["X3X2X1", ""]),
            ],
        };
        match combine(&manifest) {
            Err(CombineError::CapDegreeMismatch { edge, left, right }) => {
                assert_eq!(edge, "e");
                assert_eq!([left, right].into_iter().collect::<BTreeSet<_>>(), BTreeSet::from([1, 2]));
            }
            other => panic!("expected a cap degree mismatch, got {other:?}"),
        }
    }

    #[test]
    fn punctures_may_not_map_onto_caps() {
        let mut manifest = swapped_chain_manifest();
        // Replace the middle piece by a rotation sending the puncture b1
        // (slot 2, between the two caps) onto the cap of g1.
        manifest.nodes[1].degree = 1;
        manifest.nodes[1].actions =
            vec![action(&[1], &["x2"]), action(&[1], &["x3"]), action(&[1], &["x1"])];
        match combine(&manifest) {
            Err(CombineError::PunctureOntoCap { node, label, .. }) => {
                assert_eq!(node, "B");
                assert_eq!(label, "b1");
            }
            other => panic!("expected puncture-onto-cap rejection, got {other:?}"),
        }
    }

    #[test]
    fn non_tree_configurations_are_rejected() {
        let mut manifest = levy_pair_manifest();
        manifest.nodes.push(ConfigurationNode {
            name: "C".into(),
            items: vec![p("c1"), p("c2"), p("c3")],
            map_to: "C".into(),
            degree: 1,
            actions: vec![action(&[1], &["x1"]), action(&[1], &["x2"]), action(&[1], &["x3"])],
        });
        assert!(matches!(combine(&manifest), Err(CombineError::NotATree { .. })));
    }

    #[test]
    fn manifest_roundtrips_through_json() {
        let manifest = swapped_chain_manifest();
        let json = serde_json::to_string_pretty(&manifest).unwrap();
        let back: CombineManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, manifest);
        assert!(json.contains("\"puncture\": \"a1\""));
        assert!(json.contains("\"cap\": \"g1\""));
    }

    #[test]
    fn twist_changes_the_assembly_but_preserves_the_curve_dynamics() {
        let mut manifest = swapped_chain_manifest();
        manifest.twists.insert("g1".into(), 1);
        let twisted = combine(&manifest).unwrap();
        let plain = combine(&swapped_chain_manifest()).unwrap();
        assert_eq!(twisted.recursion.degree(), plain.recursion.degree());
        // Same curve system and weights either way.
        assert_eq!(twisted.predicted_matrix, plain.predicted_matrix);
        let data = transition_data(&twisted.recursion, &twisted.multicurve).unwrap();
        assert_eq!(data.matrix, twisted.predicted_matrix);
    }
}
