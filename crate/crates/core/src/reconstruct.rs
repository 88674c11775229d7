//! Reconstruction of the minimal representation of a subtree distance.
//!
//! The pipeline runs in four steps:
//!
//! 1. merge duplicate objects;
//! 2. find the leaf objects `L`: the first object `r` of a farthest pair,
//!    plus every `x` with `d(y,r) < d(x,y) + d(x,r)` for all other `y`;
//! 3. build the minimal tree of the tree metric `d|L`, rooted at `phi(r)`;
//! 4. place every other object `z`: on the path from `phi(r)` to `phi(x)`,
//!    the image of `z` is the interval of points at distance at least
//!    `d(r,z)` from `phi(r)` and at least `d(x,z)` from `phi(x)`, and the
//!    image is the union of these intervals over `x ∈ L∖{r}`.
//!
//! In depth coordinates from `phi(r)` the interval on the path to `x` is
//! `[a, D − b]` with `a = d(r,z)`. The lower end is the same for every `x`, so
//! on the edge above vertex `v` the union covers depths
//! `[a, H(v)]` where `H(v)` is the largest upper end among the leaves below
//! `v`. One bottom-up pass computes `H`, which makes placing `z` O(|V|) and
//! the whole reconstruction O(n²).
//!
//! Verification of the result is a separate step; see
//! [`reconstruct_subtree_distance`].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::dissim::{deduplicate, DedupResult, DissimilarityMatrix, Tolerance};
use crate::treemetric::{reconstruct_tree_metric_tau, TreeMetricError};
use crate::verify::verify_distances_tau;
use crate::wtree::{PathCoordinates, Representation, VertexId, WeightedTree};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("degenerate instance: all distances are zero")]
    DegenerateInstance,
    #[error("farthest object `{object}` fails the leaf test against `{blocker}`")]
    FarthestNotLeaf { object: String, blocker: String },
    #[error("leaf objects do not form a tree metric: {0}")]
    TreeMetric(#[from] TreeMetricError),
    #[error("leaf object `{0}` is not mapped to a leaf of its tree")]
    LeafObjectInterior(String),
    #[error("object `{0}` has an empty image")]
    EmptyImage(String),
    #[error("image of object `{object}` has {components} components")]
    Disconnected { object: String, components: usize },
    #[error("placement refers to unknown object `{0}`")]
    UnknownObject(String),
}

impl ReconstructError {
    fn witness(&self) -> Value {
        let mut w = match self {
            ReconstructError::FarthestNotLeaf { object, blocker } => {
                json!({ "object": object, "blocker": blocker })
            }
            ReconstructError::TreeMetric(TreeMetricError::NegativeLength {
                u,
                v,
                x,
                what,
                value,
            }) => json!({ "u": u, "v": v, "x": x, "quantity": what, "value": value }),
            ReconstructError::LeafObjectInterior(o)
            | ReconstructError::EmptyImage(o)
            | ReconstructError::UnknownObject(o) => json!({ "object": o }),
            ReconstructError::Disconnected { object, components } => {
                json!({ "object": object, "components": components })
            }
            _ => json!({}),
        };
        w["error"] = Value::String(self.to_string());
        w
    }
}

/// The pipeline stage at which recognition failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    LeafObjects,
    TreeMetric,
    Assemble,
    Verify,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::LeafObjects => "leaf_objects",
            Stage::TreeMetric => "tree_metric",
            Stage::Assemble => "assemble",
            Stage::Verify => "verify",
        }
    }
}

/// Leaf objects of a (deduplicated) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafObjectSet {
    /// The reference leaf `r`.
    pub root: String,
    /// The farthest pair `(r, r')`.
    pub farthest: (String, String),
    /// All leaf objects, in matrix order.
    pub members: Vec<String>,
}

/// The interval that a non-leaf object covers on one root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalPlacement {
    pub object: String,
    pub leaf: String,
    /// `d(r, z)`.
    pub a: f64,
    /// `d(x, z)`.
    pub b: f64,
    /// `d(r, x)`, the path length.
    pub length: f64,
    /// `[a, D − b]` clipped to `[0, D]`, or `None` when `a > D − b + τ`.
    pub interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
struct LeafIndices {
    root: usize,
    other: usize,
    members: Vec<usize>,
}

fn leaf_indices(d: &DissimilarityMatrix, tau: f64) -> Result<LeafIndices, ReconstructError> {
    let n = d.len();
    if n < 2 {
        return Err(ReconstructError::DegenerateInstance);
    }
    let (mut best, mut pair) = (f64::NEG_INFINITY, (0, 1));
    for i in 0..n {
        for j in (i + 1)..n {
            if d.get(i, j) > best {
                best = d.get(i, j);
                pair = (i, j);
            }
        }
    }
    if best <= tau {
        return Err(ReconstructError::DegenerateInstance);
    }
    let r = pair.0;
    let mut members = Vec::new();
    for x in 0..n {
        let is_leaf = x == r
            || (0..n)
                .filter(|&y| y != x && y != r)
                .all(|y| d.get(y, r) < d.get(x, y) + d.get(x, r) - tau);
        if is_leaf {
            members.push(x);
        }
    }
    if !members.contains(&pair.1) {
        let x = pair.1;
        let blocker = (0..n)
            .filter(|&y| y != x && y != r)
            .find(|&y| d.get(y, r) >= d.get(x, y) + d.get(x, r) - tau)
            .expect("a failed test has a witness");
        return Err(ReconstructError::FarthestNotLeaf {
            object: d.label(x).to_string(),
            blocker: d.label(blocker).to_string(),
        });
    }
    Ok(LeafIndices {
        root: r,
        other: pair.1,
        members,
    })
}

/// Identify the leaf objects of a deduplicated matrix in O(n²).
///
/// `r` is the first object of the lexicographically smallest farthest pair.
/// An object `x` is a leaf iff `d(y,r) < d(x,y) + d(x,r) − τ` for every
/// `y ∉ {x, r}`; borderline cases count as non-leaf.
pub fn find_leaf_objects(
    d: &DissimilarityMatrix,
    tol: &Tolerance,
) -> Result<LeafObjectSet, ReconstructError> {
    let li = leaf_indices(d, tol.scale(d))?;
    Ok(LeafObjectSet {
        root: d.label(li.root).to_string(),
        farthest: (d.label(li.root).to_string(), d.label(li.other).to_string()),
        members: li.members.iter().map(|&i| d.label(i).to_string()).collect(),
    })
}

fn interval(a: f64, b: f64, length: f64, tau: f64) -> Option<(f64, f64)> {
    let hi = length - b;
    if a > hi + tau {
        return None;
    }
    let lo = a.clamp(0.0, length.max(0.0));
    Some((lo, hi.clamp(lo, length.max(lo))))
}

// The label of the object whose image is the root of `coords`.
fn root_label<'a>(rep_l: &'a Representation, coords: &PathCoordinates) -> Option<&'a str> {
    rep_l
        .phi
        .iter()
        .find(|(_, s)| s.as_slice() == [coords.root])
        .map(|(l, _)| l.as_str())
}

/// Intervals of the non-leaf object `z` on every path from `phi(r)` to a
/// leaf `phi(x)`, `x ∈ L∖{r}`, where `r` is the object at `coords.root`.
pub fn locate_nonleaf(
    rep_l: &Representation,
    coords: &PathCoordinates,
    d: &DissimilarityMatrix,
    z: &str,
    tol: &Tolerance,
) -> Result<Vec<IntervalPlacement>, ReconstructError> {
    let tau = tol.scale(d);
    let idx = |l: &str| {
        d.index_of(l)
            .ok_or_else(|| ReconstructError::UnknownObject(l.into()))
    };
    let r_label = root_label(rep_l, coords)
        .ok_or_else(|| ReconstructError::UnknownObject(format!("root vertex {}", coords.root)))?;
    let (r, zi) = (idx(r_label)?, idx(z)?);
    let a = d.get(r, zi);
    rep_l
        .phi
        .keys()
        .filter(|x| x.as_str() != r_label)
        .map(|x| {
            let xi = idx(x)?;
            let (b, length) = (d.get(xi, zi), d.get(r, xi));
            Ok(IntervalPlacement {
                object: z.to_string(),
                leaf: x.clone(),
                a,
                b,
                length,
                interval: interval(a, b, length, tau),
            })
        })
        .collect()
}

// A non-leaf object in compact form: `a = d(r,z)` and, per leaf slot, the
// upper end of its interval (-inf when empty).
struct Span {
    a: f64,
    hi: Vec<f64>,
}

fn upper_envelope(coords: &PathCoordinates, leaf_vertex: &[VertexId], hi: &[f64], out: &mut [f64]) {
    out.fill(f64::NEG_INFINITY);
    for (&v, &h) in leaf_vertex.iter().zip(hi) {
        if h > out[v] {
            out[v] = h;
        }
    }
    for &v in coords.order.iter().rev() {
        if let Some(p) = coords.parent[v] {
            if out[v] > out[p] {
                out[p] = out[v];
            }
        }
    }
}

/// Subdivide the leaf tree at every interval boundary and compute the image
/// of each span. Returns the subdivided tree (vertex ids of `tree` are kept)
/// and one vertex set per span.
fn place_spans(
    tree: &WeightedTree,
    coords: &PathCoordinates,
    leaf_vertex: &[VertexId],
    spans: &[(&str, Span)],
    tau: f64,
) -> Result<(WeightedTree, Vec<Vec<VertexId>>), ReconstructError> {
    let n = tree.vertex_count();
    let depth = &coords.depth;
    let mut envelope = vec![f64::NEG_INFINITY; n];

    // Cut points per edge, keyed by the child endpoint, as offsets from the parent.
    let mut cuts: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (_, span) in spans {
        upper_envelope(coords, leaf_vertex, &span.hi, &mut envelope);
        let a = span.a;
        for &v in &coords.order[1..] {
            let h = envelope[v];
            if h < a - tau {
                continue;
            }
            let p = coords.parent[v].expect("non-root vertices have parents");
            let (dp, dv) = (depth[p], depth[v]);
            if dp + tau < a && a < dv - tau {
                cuts[v].push(a - dp);
            }
            if dp + tau < h && h < dv - tau {
                cuts[v].push(h - dp);
            }
        }
    }

    let mut out = tree.clone();
    let mut chains: Vec<Vec<(VertexId, f64)>> = vec![Vec::new(); n];
    for &v in &coords.order[1..] {
        let offsets = &mut cuts[v];
        if offsets.is_empty() {
            continue;
        }
        let p = coords.parent[v].expect("non-root vertices have parents");
        let w = coords.parent_weight[v];
        offsets.sort_by(f64::total_cmp);
        let mut kept: Vec<f64> = Vec::with_capacity(offsets.len());
        let mut last = 0.0;
        for &o in offsets.iter() {
            if o > last + tau && o < w - tau && o > last {
                kept.push(o);
                last = o;
            }
        }
        let ids = out
            .subdivide_edge(p, v, &kept)
            .expect("offsets are increasing and inside the edge");
        chains[v] = ids
            .into_iter()
            .zip(kept)
            .map(|(id, o)| (id, depth[p] + o))
            .collect();
    }

    let root = coords.root;
    let mut images = Vec::with_capacity(spans.len());
    for (label, span) in spans {
        upper_envelope(coords, leaf_vertex, &span.hi, &mut envelope);
        let a = span.a;
        let lo = a - tau;
        let mut set = Vec::new();
        let mut tops = 0;
        if lo <= 0.0 && 0.0 <= envelope[root] + tau {
            set.push(root);
            tops += 1;
        }
        for &v in &coords.order[1..] {
            let (h, dv) = (envelope[v], depth[v]);
            if h < lo || dv < lo {
                continue;
            }
            let hi = h + tau;
            let p = coords.parent[v].expect("non-root vertices have parents");
            let chain = &chains[v];
            let start = chain.partition_point(|&(_, t)| t < lo);
            let mut prev_depth = if start == 0 {
                depth[p]
            } else {
                chain[start - 1].1
            };
            for &(id, t) in &chain[start..] {
                if t > hi {
                    break;
                }
                set.push(id);
                if prev_depth < lo {
                    tops += 1;
                }
                prev_depth = t;
            }
            if dv <= hi {
                set.push(v);
                if prev_depth < lo {
                    tops += 1;
                }
            }
        }
        if set.is_empty() {
            return Err(ReconstructError::EmptyImage(label.to_string()));
        }
        if tops > 1 {
            return Err(ReconstructError::Disconnected {
                object: label.to_string(),
                components: tops,
            });
        }
        set.sort_unstable();
        images.push(set);
    }
    Ok((out, images))
}

// Drop vertices that are neither boundaries nor singleton images.
fn finalize(rep: Representation, tau: f64) -> Representation {
    let mut keep = rep.singleton_images();
    for (k, b) in keep.iter_mut().zip(rep.boundary_vertices()) {
        *k |= b;
    }
    rep.smooth(&keep, tau)
}

fn attach_aliases(rep: &mut Representation, aliases: &BTreeMap<String, String>) {
    for (alias, target) in aliases {
        if let Some(set) = rep.phi.get(target).cloned() {
            rep.phi.insert(alias.clone(), set);
        }
    }
}

/// Place every non-leaf object on the leaf tree, subdivide at interval
/// boundaries, and reattach duplicates.
///
/// `placements` maps each non-leaf object to its intervals, as returned by
/// [`locate_nonleaf`] against `rep_l`.
pub fn assemble_representation(
    rep_l: &Representation,
    placements: &BTreeMap<String, Vec<IntervalPlacement>>,
    aliases: &BTreeMap<String, String>,
    tau: f64,
) -> Result<Representation, ReconstructError> {
    let mut phi = rep_l.phi.clone();
    let tree = if placements.is_empty() {
        rep_l.tree.clone()
    } else {
        let leaves: BTreeSet<&str> = placements
            .values()
            .flatten()
            .map(|p| p.leaf.as_str())
            .collect();
        let root_obj = rep_l
            .phi
            .keys()
            .find(|k| !leaves.contains(k.as_str()))
            .ok_or_else(|| ReconstructError::UnknownObject("reference leaf".into()))?;
        let root = rep_l.phi[root_obj][0];
        let coords = PathCoordinates::new(&rep_l.tree, root).expect("image vertex exists");
        let slots: Vec<&str> = leaves.iter().copied().collect();
        let leaf_vertex = slots
            .iter()
            .map(|l| {
                rep_l
                    .image(l)
                    .map(|s| s[0])
                    .ok_or_else(|| ReconstructError::UnknownObject(l.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let slot_of: HashMap<&str, usize> =
            slots.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let spans: Vec<(&str, Span)> = placements
            .iter()
            .map(|(z, list)| {
                let mut hi = vec![f64::NEG_INFINITY; slots.len()];
                for p in list {
                    if let Some((_, h)) = p.interval {
                        hi[slot_of[p.leaf.as_str()]] = h;
                    }
                }
                let a = list.first().map_or(f64::INFINITY, |p| p.a);
                (z.as_str(), Span { a, hi })
            })
            .collect();
        let (tree, images) = place_spans(&rep_l.tree, &coords, &leaf_vertex, &spans, tau)?;
        for ((z, _), set) in spans.iter().zip(images) {
            phi.insert(z.to_string(), set);
        }
        tree
    };
    let mut rep = finalize(Representation { tree, phi }, tau);
    attach_aliases(&mut rep, aliases);
    Ok(rep)
}

/// A successful reconstruction, before verification.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub representation: Representation,
    pub leaf_objects: LeafObjectSet,
    pub dedup: DedupResult,
    /// The resolved comparison scale used throughout.
    pub tau: f64,
}

/// A failed reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub stage: Stage,
    pub error: ReconstructError,
    pub leaf_objects: Vec<String>,
}

/// Run the reconstruction without the final distance check.
///
/// This is the O(n²) part of recognition and what the benchmark times.
pub fn reconstruct_unverified(
    d: &DissimilarityMatrix,
    tol: &Tolerance,
) -> Result<Reconstruction, Box<Rejection>> {
    let tau = tol.scale(d);
    let dedup = deduplicate(d, tol);
    let red = &dedup.reduced;
    let reject = |stage, error, leaves: &[usize]| {
        Box::new(Rejection {
            stage,
            error,
            leaf_objects: leaves.iter().map(|&i| red.label(i).to_string()).collect(),
        })
    };

    if red.len() == 1 {
        let label = red.label(0).to_string();
        let mut rep = Representation {
            tree: WeightedTree::single_vertex(),
            phi: [(label.clone(), vec![0])].into(),
        };
        attach_aliases(&mut rep, &dedup.aliases);
        return Ok(Reconstruction {
            representation: rep,
            leaf_objects: LeafObjectSet {
                root: label.clone(),
                farthest: (label.clone(), label.clone()),
                members: vec![label],
            },
            dedup,
            tau,
        });
    }

    let li = leaf_indices(red, tau).map_err(|e| reject(Stage::LeafObjects, e, &[]))?;
    let mut order = vec![li.root];
    order.extend(li.members.iter().copied().filter(|&x| x != li.root));
    let rep_l = reconstruct_tree_metric_tau(&red.submatrix(&order), tau)
        .map_err(|e| reject(Stage::TreeMetric, e.into(), &li.members))?;

    let leaf_vertex: Vec<VertexId> = order.iter().map(|&x| rep_l.phi[red.label(x)][0]).collect();
    let mut used = vec![false; rep_l.tree.vertex_count()];
    for (&x, &v) in order.iter().zip(&leaf_vertex) {
        if rep_l.tree.degree(v) > 1 || used[v] {
            return Err(reject(
                Stage::TreeMetric,
                ReconstructError::LeafObjectInterior(red.label(x).to_string()),
                &li.members,
            ));
        }
        used[v] = true;
    }
    // The construction roots the tree at the first inserted object, r.
    debug_assert_eq!(leaf_vertex[0], 0);
    let coords = PathCoordinates::new(&rep_l.tree, leaf_vertex[0]).expect("vertex 0 exists");

    let mut is_leaf = vec![false; red.len()];
    for &x in &li.members {
        is_leaf[x] = true;
    }
    let others = &order[1..];
    let spans: Vec<(&str, Span)> = (0..red.len())
        .filter(|&z| !is_leaf[z])
        .map(|z| {
            let a = red.get(li.root, z);
            let hi = others
                .iter()
                .map(|&x| {
                    interval(a, red.get(x, z), red.get(li.root, x), tau)
                        .map_or(f64::NEG_INFINITY, |(_, h)| h)
                })
                .collect();
            (red.label(z), Span { a, hi })
        })
        .collect();

    let (tree, images) = place_spans(&rep_l.tree, &coords, &leaf_vertex[1..], &spans, tau)
        .map_err(|e| reject(Stage::Assemble, e, &li.members))?;
    let mut phi = rep_l.phi;
    for ((z, _), set) in spans.iter().zip(images) {
        phi.insert(z.to_string(), set);
    }
    let mut rep = finalize(Representation { tree, phi }, tau);
    debug_assert!(rep.tree.vertex_count() <= 4 * d.len() * d.len());
    attach_aliases(&mut rep, &dedup.aliases);

    let leaf_objects = LeafObjectSet {
        root: red.label(li.root).to_string(),
        farthest: (
            red.label(li.root).to_string(),
            red.label(li.other).to_string(),
        ),
        members: li
            .members
            .iter()
            .map(|&i| red.label(i).to_string())
            .collect(),
    };
    Ok(Reconstruction {
        representation: rep,
        leaf_objects,
        dedup,
        tau,
    })
}

/// Machine-readable verdict of a recognition run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecognitionReport {
    pub accepted: bool,
    pub stage: Option<Stage>,
    pub witness: Option<Value>,
    pub n: usize,
    pub leaf_objects: Vec<String>,
}

impl RecognitionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RecognitionReport,
    pub representation: Option<Representation>,
    pub leaf_objects: Option<LeafObjectSet>,
}

/// Reconstruct and verify. Accepts iff `d` is a subtree distance (within τ);
/// on acceptance the representation is its unique minimal one.
pub fn reconstruct_subtree_distance(d: &DissimilarityMatrix, tol: &Tolerance) -> Outcome {
    let n = d.len();
    match reconstruct_unverified(d, tol) {
        Err(rej) => Outcome {
            report: RecognitionReport {
                accepted: false,
                stage: Some(rej.stage),
                witness: Some(rej.error.witness()),
                n,
                leaf_objects: rej.leaf_objects,
            },
            representation: None,
            leaf_objects: None,
        },
        Ok(rec) => {
            let mismatches = verify_distances_tau(&rec.representation, d, rec.tau)
                .expect("every object has an image");
            let leaves = rec.leaf_objects.members.clone();
            if let Some(first) = mismatches.first() {
                Outcome {
                    report: RecognitionReport {
                        accepted: false,
                        stage: Some(Stage::Verify),
                        witness: Some(json!({
                            "error": first.to_string(),
                            "x": first.x,
                            "y": first.y,
                            "expected": first.expected,
                            "actual": first.actual,
                            "mismatches": mismatches.len(),
                        })),
                        n,
                        leaf_objects: leaves,
                    },
                    representation: None,
                    leaf_objects: Some(rec.leaf_objects),
                }
            } else {
                Outcome {
                    report: RecognitionReport {
                        accepted: true,
                        stage: None,
                        witness: None,
                        n,
                        leaf_objects: leaves,
                    },
                    representation: Some(rec.representation),
                    leaf_objects: Some(rec.leaf_objects),
                }
            }
        }
    }
}
