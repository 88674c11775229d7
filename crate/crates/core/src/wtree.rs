//! Weighted trees and representations `(tree, phi)` of a dissimilarity.
//!
//! Vertices are dense integer ids `0..vertex_count()`. Object labels are never
//! used as vertex ids: a non-leaf object maps to a whole set of vertices.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Index of a vertex in a [`WeightedTree`].
pub type VertexId = usize;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum TreeError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("no edge between {0} and {1}")]
    UnknownEdge(VertexId, VertexId),
    #[error("vertex set is empty")]
    EmptySet,
    #[error("offset {offset} outside (0, {weight}) or not strictly increasing")]
    OffsetOutOfRange { offset: f64, weight: f64 },
    #[error("not a tree: {0}")]
    NotATree(String),
    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),
    #[error("malformed representation JSON: {0}")]
    Json(String),
}

/// An undirected edge with its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub weight: f64,
}

/// A tree with nonnegative edge weights, stored as adjacency lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedTree {
    adj: Vec<Vec<(VertexId, f64)>>,
}

impl WeightedTree {
    /// A tree with one vertex (id 0).
    pub fn single_vertex() -> Self {
        WeightedTree {
            adj: vec![Vec::new()],
        }
    }

    /// Build and validate a tree on `vertex_count` vertices.
    pub fn from_edges(vertex_count: usize, edges: &[Edge]) -> Result<Self, TreeError> {
        let mut t = WeightedTree {
            adj: vec![Vec::new(); vertex_count],
        };
        for e in edges {
            for x in [e.u, e.v] {
                if x >= vertex_count {
                    return Err(TreeError::UnknownVertex(x));
                }
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(TreeError::NotATree(format!(
                    "edge {}-{} has weight {}",
                    e.u, e.v, e.weight
                )));
            }
            t.adj[e.u].push((e.v, e.weight));
            t.adj[e.v].push((e.u, e.weight));
        }
        t.validate()?;
        Ok(t)
    }

    /// Checks connectivity and acyclicity.
    pub fn validate(&self) -> Result<(), TreeError> {
        let n = self.vertex_count();
        if n == 0 {
            return Err(TreeError::NotATree("no vertices".into()));
        }
        if self.edge_count() != n - 1 {
            return Err(TreeError::NotATree(format!(
                "{} vertices but {} edges",
                n,
                self.edge_count()
            )));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(u, _) in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        if count != n {
            return Err(TreeError::NotATree("disconnected".into()));
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, f64)] {
        &self.adj[v]
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v < self.adj.len()
    }

    pub fn weight(&self, u: VertexId, v: VertexId) -> Option<f64> {
        self.adj
            .get(u)?
            .iter()
            .find(|&&(x, _)| x == v)
            .map(|&(_, w)| w)
    }

    /// Every edge once, with `u < v`, sorted.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out: Vec<Edge> = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| {
                nb.iter()
                    .filter(move |&&(v, _)| u < v)
                    .map(move |&(v, weight)| Edge { u, v, weight })
            })
            .collect();
        out.sort_by_key(|e| (e.u, e.v));
        out
    }

    pub fn total_weight(&self) -> f64 {
        self.edges().iter().map(|e| e.weight).sum()
    }

    /// Append a vertex joined to `parent` by an edge of `weight`.
    pub fn add_leaf(&mut self, parent: VertexId, weight: f64) -> Result<VertexId, TreeError> {
        self.check(parent)?;
        let id = self.adj.len();
        self.adj.push(vec![(parent, weight)]);
        self.adj[parent].push((id, weight));
        Ok(id)
    }

    fn check(&self, v: VertexId) -> Result<(), TreeError> {
        if v < self.adj.len() {
            Ok(())
        } else {
            Err(TreeError::UnknownVertex(v))
        }
    }

    /// Length of the unique `u`–`v` path.
    pub fn tree_distance(&self, u: VertexId, v: VertexId) -> Result<f64, TreeError> {
        self.check(u)?;
        self.check(v)?;
        if u == v {
            return Ok(0.0);
        }
        let mut stack = vec![(u, usize::MAX, 0.0)];
        while let Some((x, from, dist)) = stack.pop() {
            if x == v {
                return Ok(dist);
            }
            for &(y, w) in &self.adj[x] {
                if y != from {
                    stack.push((y, x, dist + w));
                }
            }
        }
        unreachable!("a validated tree is connected")
    }

    /// For every vertex, the distance to the nearest vertex of `sources`.
    /// Linear time.
    pub fn multi_source_distances(&self, sources: &[VertexId]) -> Result<Vec<f64>, TreeError> {
        let first = *sources.first().ok_or(TreeError::EmptySet)?;
        for &s in sources {
            self.check(s)?;
        }
        Ok(PathCoordinates::new(self, first)?.multi_source_distances(sources))
    }

    /// `min { d(u, w) : u ∈ a, w ∈ b }`.
    pub fn set_distance(&self, a: &[VertexId], b: &[VertexId]) -> Result<f64, TreeError> {
        if b.is_empty() {
            return Err(TreeError::EmptySet);
        }
        for &w in b {
            self.check(w)?;
        }
        let dist = self.multi_source_distances(a)?;
        Ok(b.iter().map(|&w| dist[w]).fold(f64::INFINITY, f64::min))
    }

    /// Replace edge `u`–`v` by a path through new vertices placed at the given
    /// distances from `u`. Returns the new vertex ids in order.
    pub fn subdivide_edge(
        &mut self,
        u: VertexId,
        v: VertexId,
        offsets: &[f64],
    ) -> Result<Vec<VertexId>, TreeError> {
        self.check(u)?;
        self.check(v)?;
        let weight = self.weight(u, v).ok_or(TreeError::UnknownEdge(u, v))?;
        let mut prev = 0.0;
        for &o in offsets {
            if !(o > prev && o < weight) {
                return Err(TreeError::OffsetOutOfRange { offset: o, weight });
            }
            prev = o;
        }
        if offsets.is_empty() {
            return Ok(Vec::new());
        }
        let first = self.adj.len();
        let k = offsets.len();
        let ids: Vec<VertexId> = (first..first + k).collect();
        for i in 0..k {
            let mut nb = Vec::with_capacity(2);
            if i == 0 {
                nb.push((u, offsets[0]));
            } else {
                nb.push((ids[i - 1], offsets[i] - offsets[i - 1]));
            }
            if i + 1 == k {
                nb.push((v, weight - offsets[k - 1]));
            } else {
                nb.push((ids[i + 1], offsets[i + 1] - offsets[i]));
            }
            self.adj.push(nb);
        }
        for slot in self.adj[u].iter_mut().filter(|s| s.0 == v) {
            *slot = (ids[0], offsets[0]);
        }
        for slot in self.adj[v].iter_mut().filter(|s| s.0 == u) {
            *slot = (ids[k - 1], weight - offsets[k - 1]);
        }
        Ok(ids)
    }

    /// Contract edges of weight ≤ `tau`, prune leaves outside `keep`, and
    /// suppress degree-2 vertices outside `keep`.
    ///
    /// Returns the compacted tree and, for every old vertex, its new id (merged
    /// vertices share an id; deleted ones map to `None`).
    pub fn smooth(&self, keep: &[bool], tau: f64) -> (WeightedTree, Vec<Option<VertexId>>) {
        let n = self.vertex_count();
        let mut uf: Vec<VertexId> = (0..n).collect();
        fn find(uf: &mut [VertexId], mut x: VertexId) -> VertexId {
            while uf[x] != x {
                uf[x] = uf[uf[x]];
                x = uf[x];
            }
            x
        }
        for e in self.edges() {
            if e.weight <= tau {
                let (a, b) = (find(&mut uf, e.u), find(&mut uf, e.v));
                // The smaller id represents the class.
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                uf[hi] = lo;
            }
        }
        let class: Vec<VertexId> = (0..n).map(|v| find(&mut uf, v)).collect();
        let mut kept = vec![false; n];
        for v in 0..n {
            if keep.get(v).copied().unwrap_or(false) {
                kept[class[v]] = true;
            }
        }
        let mut adj: Vec<Vec<(VertexId, f64)>> = vec![Vec::new(); n];
        for e in self.edges() {
            if e.weight > tau {
                let (a, b) = (class[e.u], class[e.v]);
                adj[a].push((b, e.weight));
                adj[b].push((a, e.weight));
            }
        }
        let mut alive: Vec<bool> = (0..n).map(|v| class[v] == v).collect();
        let mut alive_count = alive.iter().filter(|&&a| a).count();

        let mut queue: Vec<VertexId> = (0..n)
            .filter(|&v| alive[v] && !kept[v] && adj[v].len() == 1)
            .collect();
        queue.reverse();
        while let Some(v) = queue.pop() {
            if alive_count <= 1 || !alive[v] || kept[v] || adj[v].len() != 1 {
                continue;
            }
            let (u, _) = adj[v][0];
            adj[u].retain(|&(x, _)| x != v);
            adj[v].clear();
            alive[v] = false;
            alive_count -= 1;
            if !kept[u] && adj[u].len() == 1 {
                queue.push(u);
            }
        }
        for v in 0..n {
            if alive[v] && !kept[v] && adj[v].len() == 2 {
                let (a, wa) = adj[v][0];
                let (b, wb) = adj[v][1];
                let w = wa + wb;
                for slot in adj[a].iter_mut().filter(|s| s.0 == v) {
                    *slot = (b, w);
                }
                for slot in adj[b].iter_mut().filter(|s| s.0 == v) {
                    *slot = (a, w);
                }
                adj[v].clear();
                alive[v] = false;
            }
        }

        let mut new_id = vec![None; n];
        let mut next = 0;
        for v in 0..n {
            if alive[v] {
                new_id[v] = Some(next);
                next += 1;
            }
        }
        let mut out = vec![Vec::new(); next];
        for v in 0..n {
            if let Some(nv) = new_id[v] {
                out[nv] = adj[v]
                    .iter()
                    .map(|&(u, w)| (new_id[u].expect("neighbors are alive"), w))
                    .collect();
            }
        }
        let mapping = (0..n).map(|v| new_id[class[v]]).collect();
        (WeightedTree { adj: out }, mapping)
    }
}

/// A rooting of a tree: parents, depths and a BFS order from the root.
#[derive(Debug, Clone)]
pub struct PathCoordinates {
    pub root: VertexId,
    pub depth: Vec<f64>,
    pub parent: Vec<Option<VertexId>>,
    /// Weight of the edge to the parent (0 at the root).
    pub parent_weight: Vec<f64>,
    /// Vertices in BFS order; parents precede children.
    pub order: Vec<VertexId>,
}

impl PathCoordinates {
    pub fn new(tree: &WeightedTree, root: VertexId) -> Result<Self, TreeError> {
        tree.check(root)?;
        let n = tree.vertex_count();
        let mut depth = vec![0.0; n];
        let mut parent = vec![None; n];
        let mut parent_weight = vec![0.0; n];
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        seen[root] = true;
        order.push(root);
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &(u, w) in tree.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    parent[u] = Some(v);
                    parent_weight[u] = w;
                    depth[u] = depth[v] + w;
                    order.push(u);
                }
            }
        }
        Ok(PathCoordinates {
            root,
            depth,
            parent,
            parent_weight,
            order,
        })
    }

    /// Distance from every vertex to the nearest source: one upward and one
    /// downward sweep.
    pub fn multi_source_distances(&self, sources: &[VertexId]) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.depth.len()];
        for &s in sources {
            dist[s] = 0.0;
        }
        for &v in self.order.iter().rev() {
            if let Some(p) = self.parent[v] {
                let cand = dist[v] + self.parent_weight[v];
                if cand < dist[p] {
                    dist[p] = cand;
                }
            }
        }
        for &v in &self.order {
            if let Some(p) = self.parent[v] {
                let cand = dist[p] + self.parent_weight[v];
                if cand < dist[v] {
                    dist[v] = cand;
                }
            }
        }
        dist
    }
}

/// A tree together with an image `phi(x)` (a connected vertex set) per object.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub tree: WeightedTree,
    /// Object label → sorted, deduplicated vertex ids.
    pub phi: BTreeMap<String, Vec<VertexId>>,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    u: VertexId,
    v: VertexId,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct RepresentationJson {
    vertices: Vec<VertexId>,
    edges: Vec<EdgeJson>,
    phi: BTreeMap<String, Vec<VertexId>>,
}

/// True iff `set` (nonempty) induces a connected subgraph.
pub fn is_connected_subset(tree: &WeightedTree, set: &[VertexId]) -> bool {
    let Some(&start) = set.first() else {
        return false;
    };
    let members: HashMap<VertexId, bool> = set.iter().map(|&v| (v, false)).collect();
    let mut members = members;
    let mut stack = vec![start];
    members.insert(start, true);
    let mut reached = 1;
    while let Some(v) = stack.pop() {
        for &(u, _) in tree.neighbors(v) {
            if let Some(seen) = members.get_mut(&u) {
                if !*seen {
                    *seen = true;
                    reached += 1;
                    stack.push(u);
                }
            }
        }
    }
    reached == members.len()
}

impl Representation {
    /// Validates the tree and that every image is a nonempty connected set.
    pub fn new(
        tree: WeightedTree,
        phi: BTreeMap<String, Vec<VertexId>>,
    ) -> Result<Self, TreeError> {
        tree.validate()?;
        let mut clean = BTreeMap::new();
        for (label, mut set) in phi {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(TreeError::InvalidRepresentation(format!(
                    "phi({label}) is empty"
                )));
            }
            if let Some(&bad) = set.iter().find(|&&v| !tree.contains(v)) {
                return Err(TreeError::UnknownVertex(bad));
            }
            if !is_connected_subset(&tree, &set) {
                return Err(TreeError::InvalidRepresentation(format!(
                    "phi({label}) is not connected"
                )));
            }
            clean.insert(label, set);
        }
        Ok(Representation { tree, phi: clean })
    }

    pub fn image(&self, label: &str) -> Option<&[VertexId]> {
        self.phi.get(label).map(Vec::as_slice)
    }

    /// For every vertex, the sorted labels whose image contains it.
    pub fn annotations(&self) -> Vec<Vec<&str>> {
        let mut ann = vec![Vec::new(); self.tree.vertex_count()];
        for (label, set) in &self.phi {
            for &v in set {
                ann[v].push(label.as_str());
            }
        }
        ann
    }

    /// `d_T(phi(x), phi(y))`.
    pub fn object_distance(&self, x: &str, y: &str) -> Result<f64, TreeError> {
        let missing = |l: &str| TreeError::InvalidRepresentation(format!("no object `{l}`"));
        let a = self.image(x).ok_or_else(|| missing(x))?;
        let b = self.image(y).ok_or_else(|| missing(y))?;
        self.tree.set_distance(a, b)
    }

    /// Vertices of `phi(z)` with a neighbor outside `phi(z)`, for any `z`.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let n = self.tree.vertex_count();
        let mut boundary = vec![false; n];
        let mut member = vec![false; n];
        for set in self.phi.values() {
            for &v in set {
                member[v] = true;
            }
            for &v in set {
                if self.tree.neighbors(v).iter().any(|&(u, _)| !member[u]) {
                    boundary[v] = true;
                }
            }
            for &v in set {
                member[v] = false;
            }
        }
        boundary
    }

    /// Vertices that are the whole image of some object.
    pub fn singleton_images(&self) -> Vec<bool> {
        let mut out = vec![false; self.tree.vertex_count()];
        for set in self.phi.values() {
            if let [v] = set.as_slice() {
                out[*v] = true;
            }
        }
        out
    }

    /// Apply [`WeightedTree::smooth`] and carry `phi` along.
    pub fn smooth(&self, keep: &[bool], tau: f64) -> Representation {
        let (tree, map) = self.tree.smooth(keep, tau);
        let phi = self
            .phi
            .iter()
            .map(|(label, set)| {
                let mut s: Vec<VertexId> = set.iter().filter_map(|&v| map[v]).collect();
                s.sort_unstable();
                s.dedup();
                (label.clone(), s)
            })
            .collect();
        Representation { tree, phi }
    }

    /// Relabel objects through `rename` (labels absent from it are kept).
    pub fn rename_objects(&self, rename: &HashMap<String, String>) -> Representation {
        let phi = self
            .phi
            .iter()
            .map(|(l, s)| {
                (
                    rename.get(l).cloned().unwrap_or_else(|| l.clone()),
                    s.clone(),
                )
            })
            .collect();
        Representation {
            tree: self.tree.clone(),
            phi,
        }
    }

    pub fn to_json(&self) -> String {
        let doc = RepresentationJson {
            vertices: (0..self.tree.vertex_count()).collect(),
            edges: self
                .tree
                .edges()
                .into_iter()
                .map(|e| EdgeJson {
                    u: e.u,
                    v: e.v,
                    w: e.weight,
                })
                .collect(),
            phi: self.phi.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("plain data serializes")
    }

    /// Parse the JSON form. Vertex ids may be arbitrary integers; they are
    /// renumbered densely in increasing order.
    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let doc: RepresentationJson =
            serde_json::from_str(text).map_err(|e| TreeError::Json(e.to_string()))?;
        let mut ids = doc.vertices.clone();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != doc.vertices.len() {
            return Err(TreeError::Json("duplicate vertex id".into()));
        }
        let index: HashMap<VertexId, VertexId> =
            ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let look = |v: VertexId| index.get(&v).copied().ok_or(TreeError::UnknownVertex(v));
        let edges = doc
            .edges
            .iter()
            .map(|e| {
                Ok(Edge {
                    u: look(e.u)?,
                    v: look(e.v)?,
                    weight: e.w,
                })
            })
            .collect::<Result<Vec<_>, TreeError>>()?;
        let tree = WeightedTree::from_edges(ids.len(), &edges)?;
        let phi = doc
            .phi
            .into_iter()
            .map(|(l, set)| Ok((l, set.into_iter().map(look).collect::<Result<Vec<_>, _>>()?)))
            .collect::<Result<BTreeMap<_, _>, TreeError>>()?;
        Representation::new(tree, phi)
    }

    /// Graphviz export: vertices show the objects whose image contains them,
    /// edges show weights to six significant digits.
    pub fn to_dot(&self) -> String {
        let ann = self.annotations();
        let mut out = String::from("graph representation {\n");
        for (v, labels) in ann.iter().enumerate() {
            let text = labels.join(",").replace('\\', "\\\\").replace('"', "\\\"");
            let _ = writeln!(out, "  {v} [label=\"{text}\"];");
        }
        for e in self.tree.edges() {
            let _ = writeln!(
                out,
                "  {} -- {} [label=\"{}\"];",
                e.u,
                e.v,
                significant_digits(e.weight, 6)
            );
        }
        out.push_str("}\n");
        out
    }
}

/// `%g`-style formatting with `digits` significant digits.
pub fn significant_digits(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("scientific notation parses");
    rounded.to_string()
}

fn quantize(w: f64, tau: f64) -> String {
    if tau > 0.0 {
        format!("{}", (w / tau).round() as i128)
    } else {
        format!("{:016x}", w.to_bits())
    }
}

// Unweighted centroid(s): one or two adjacent vertices.
fn centroids(tree: &WeightedTree) -> Vec<VertexId> {
    let n = tree.vertex_count();
    let coords = PathCoordinates::new(tree, 0).expect("vertex 0 exists");
    let mut size = vec![1usize; n];
    for &v in coords.order.iter().rev() {
        if let Some(p) = coords.parent[v] {
            size[p] += size[v];
        }
    }
    let heaviest = |v: VertexId| {
        let mut worst = n - size[v];
        for &(u, _) in tree.neighbors(v) {
            if coords.parent[u] == Some(v) {
                worst = worst.max(size[u]);
            }
        }
        worst
    };
    let best = (0..n).map(heaviest).min().unwrap_or(0);
    (0..n).filter(|&v| heaviest(v) == best).collect()
}

/// A fingerprint equal for isomorphic representations.
///
/// Each vertex is annotated with the objects whose image contains it and edge
/// weights are rounded to the `tau` grid (exact bits when `tau == 0`). The
/// tree is hashed bottom-up (AHU style with SHA-256 digests) from each
/// centroid and the smaller digest is returned.
pub fn canonical_hash(rep: &Representation, tau: f64) -> String {
    let tree = &rep.tree;
    let ann = rep.annotations();
    let mut vertex_tag: Vec<Vec<u8>> = Vec::with_capacity(ann.len());
    for labels in &ann {
        let mut tag = Vec::new();
        tag.extend_from_slice(&(labels.len() as u64).to_le_bytes());
        for l in labels {
            tag.extend_from_slice(&(l.len() as u64).to_le_bytes());
            tag.extend_from_slice(l.as_bytes());
        }
        vertex_tag.push(tag);
    }
    centroids(tree)
        .into_iter()
        .map(|c| {
            let coords = PathCoordinates::new(tree, c).expect("centroid exists");
            let mut digest: Vec<[u8; 32]> = vec![[0; 32]; tree.vertex_count()];
            for &v in coords.order.iter().rev() {
                let mut children: Vec<(String, [u8; 32])> = tree
                    .neighbors(v)
                    .iter()
                    .filter(|&&(u, _)| coords.parent[u] == Some(v))
                    .map(|&(u, w)| (quantize(w, tau), digest[u]))
                    .collect();
                children.sort();
                let mut h = Sha256::new();
                h.update(&vertex_tag[v]);
                h.update((children.len() as u64).to_le_bytes());
                for (w, d) in &children {
                    h.update((w.len() as u64).to_le_bytes());
                    h.update(w.as_bytes());
                    h.update(d);
                }
                digest[v] = h.finalize().into();
            }
            hex::encode(digest[c])
        })
        .min()
        .expect("a tree has at least one centroid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path_abc() -> WeightedTree {
        WeightedTree::from_edges(
            3,
            &[
                Edge {
                    u: 0,
                    v: 1,
                    weight: 1.0,
                },
                Edge {
                    u: 1,
                    v: 2,
                    weight: 2.0,
                },
            ],
        )
        .unwrap()
    }

    // Random tree by attaching each vertex to a uniformly chosen earlier one.
    fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> WeightedTree {
        let mut t = WeightedTree::single_vertex();
        for v in 1..n {
            let p = rng.gen_range(0..v);
            t.add_leaf(p, rng.gen_range(1..10) as f64).unwrap();
        }
        t
    }

    // Dijkstra-free oracle: explicit path enumeration by DFS from u.
    fn scan_distance(t: &WeightedTree, u: VertexId) -> Vec<f64> {
        let mut dist = vec![f64::NAN; t.vertex_count()];
        let mut stack = vec![(u, 0.0)];
        dist[u] = 0.0;
        while let Some((x, dx)) = stack.pop() {
            for &(y, w) in t.neighbors(x) {
                if dist[y].is_nan() {
                    dist[y] = dx + w;
                    stack.push((y, dx + w));
                }
            }
        }
        dist
    }

    #[test]
    fn distances_on_a_path() {
        let t = path_abc();
        assert_eq!(t.tree_distance(1, 1).unwrap(), 0.0);
        assert_eq!(t.tree_distance(0, 2).unwrap(), 3.0);
        assert_eq!(t.set_distance(&[0], &[2]).unwrap(), 3.0);
        assert_eq!(t.set_distance(&[0, 1], &[1, 2]).unwrap(), 0.0);
        assert_eq!(t.multi_source_distances(&[0]).unwrap(), vec![0.0, 1.0, 3.0]);
        assert_eq!(t.multi_source_distances(&[0, 1, 2]).unwrap(), vec![0.0; 3]);
        assert_eq!(t.tree_distance(0, 7), Err(TreeError::UnknownVertex(7)));
        assert_eq!(t.set_distance(&[], &[1]), Err(TreeError::EmptySet));
        assert_eq!(t.multi_source_distances(&[]), Err(TreeError::EmptySet));
    }

    #[test]
    fn distances_match_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_tree(&mut rng, 40);
        for _ in 0..100 {
            let (u, v) = (rng.gen_range(0..40), rng.gen_range(0..40));
            assert_eq!(t.tree_distance(u, v).unwrap(), scan_distance(&t, u)[v]);
        }
    }

    #[test]
    fn set_and_multi_source_match_pairwise_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let t = random_tree(&mut rng, 30);
            let a: Vec<VertexId> = (0..rng.gen_range(1..5))
                .map(|_| rng.gen_range(0..30))
                .collect();
            let b: Vec<VertexId> = (0..rng.gen_range(1..5))
                .map(|_| rng.gen_range(0..30))
                .collect();
            let brute = a
                .iter()
                .flat_map(|&u| b.iter().map(move |&w| (u, w)))
                .map(|(u, w)| scan_distance(&t, u)[w])
                .fold(f64::INFINITY, f64::min);
            assert_eq!(t.set_distance(&a, &b).unwrap(), brute);
            let ms = t.multi_source_distances(&a).unwrap();
            for v in 0..30 {
                assert_eq!(ms[v], t.set_distance(&a, &[v]).unwrap());
            }
        }
    }

    #[test]
    fn subdivision() {
        let mut t = WeightedTree::from_edges(
            2,
            &[Edge {
                u: 0,
                v: 1,
                weight: 6.0,
            }],
        )
        .unwrap();
        assert!(t.subdivide_edge(0, 1, &[]).unwrap().is_empty());
        let ids = t.subdivide_edge(0, 1, &[2.0, 4.0]).unwrap();
        assert_eq!(ids, vec![2, 3]);
        let w: Vec<f64> = t.edges().iter().map(|e| e.weight).collect();
        assert_eq!(w, vec![2.0, 2.0, 2.0]);
        t.validate().unwrap();

        let mut t = WeightedTree::from_edges(
            2,
            &[Edge {
                u: 0,
                v: 1,
                weight: 10.0,
            }],
        )
        .unwrap();
        let m = t.subdivide_edge(0, 1, &[3.0]).unwrap()[0];
        assert_eq!(t.tree_distance(0, m).unwrap(), 3.0);
        assert_eq!(t.tree_distance(m, 1).unwrap(), 7.0);

        for bad in [[0.0], [10.0], [-1.0]] {
            assert!(matches!(
                t.clone().subdivide_edge(0, m, &bad),
                Err(TreeError::OffsetOutOfRange { .. })
            ));
        }
        assert!(t.clone().subdivide_edge(0, m, &[2.0, 1.0]).is_err());
        assert_eq!(
            t.clone().subdivide_edge(0, 1, &[1.0]),
            Err(TreeError::UnknownEdge(0, 1))
        );
    }

    #[test]
    fn smoothing_paths_and_zero_edges() {
        let (t, map) = path_abc().smooth(&[true, false, true], 0.0);
        assert_eq!(
            t.edges(),
            vec![Edge {
                u: 0,
                v: 1,
                weight: 3.0
            }]
        );
        assert_eq!(map, vec![Some(0), None, Some(1)]);

        let t = WeightedTree::from_edges(
            2,
            &[Edge {
                u: 0,
                v: 1,
                weight: 0.0,
            }],
        )
        .unwrap();
        let (s, map) = t.smooth(&[true, false], 0.0);
        assert_eq!(s.vertex_count(), 1);
        assert_eq!(map, vec![Some(0), Some(0)]);

        let (s, _) = WeightedTree::single_vertex().smooth(&[], 0.0);
        assert_eq!(s.vertex_count(), 1);
        let (s, _) = path_abc().smooth(&[], 0.0);
        assert_eq!(s.vertex_count(), 1);
    }

    #[test]
    fn smoothing_a_star_with_an_unused_leaf() {
        // Center 0, leaves 1..=3.
        let star = WeightedTree::from_edges(
            4,
            &[
                Edge {
                    u: 0,
                    v: 1,
                    weight: 1.0,
                },
                Edge {
                    u: 0,
                    v: 2,
                    weight: 2.0,
                },
                Edge {
                    u: 0,
                    v: 3,
                    weight: 3.0,
                },
            ],
        )
        .unwrap();
        let (s, map) = star.smooth(&[false, true, true, false], 0.0);
        assert_eq!(map[3], None);
        assert_eq!(map[0], None, "center drops to degree 2 and is suppressed");
        assert_eq!(
            s.edges(),
            vec![Edge {
                u: 0,
                v: 1,
                weight: 3.0
            }]
        );

        let (s, map) = star.smooth(&[true, true, true, false], 0.0);
        assert_eq!(map[0], Some(0));
        assert_eq!(s.vertex_count(), 3);
        assert_eq!(s.degree(0), 2);
    }

    fn rep(tree: WeightedTree, phi: &[(&str, &[VertexId])]) -> Representation {
        Representation::new(
            tree,
            phi.iter()
                .map(|(l, s)| (l.to_string(), s.to_vec()))
                .collect(),
        )
        .unwrap()
    }

    fn permute(r: &Representation, perm: &[VertexId]) -> Representation {
        let edges: Vec<Edge> = r
            .tree
            .edges()
            .iter()
            .map(|e| Edge {
                u: perm[e.u],
                v: perm[e.v],
                weight: e.weight,
            })
            .collect();
        let tree = WeightedTree::from_edges(r.tree.vertex_count(), &edges).unwrap();
        let phi = r
            .phi
            .iter()
            .map(|(l, s)| (l.clone(), s.iter().map(|&v| perm[v]).collect()))
            .collect();
        Representation::new(tree, phi).unwrap()
    }

    #[test]
    fn hash_invariant_under_relabeling_and_reflection() {
        let r = rep(path_abc(), &[("a", &[0]), ("c", &[2]), ("z", &[1, 2])]);
        let p = permute(&r, &[2, 0, 1]);
        assert_eq!(canonical_hash(&r, 0.0), canonical_hash(&p, 0.0));

        let fwd = rep(path_abc(), &[("a", &[0]), ("c", &[2])]);
        let mirrored = WeightedTree::from_edges(
            3,
            &[
                Edge {
                    u: 0,
                    v: 1,
                    weight: 2.0,
                },
                Edge {
                    u: 1,
                    v: 2,
                    weight: 1.0,
                },
            ],
        )
        .unwrap();
        let back = rep(mirrored, &[("a", &[2]), ("c", &[0])]);
        assert_eq!(canonical_hash(&fwd, 1e-9), canonical_hash(&back, 1e-9));
    }

    // Exhaustive isomorphism check: try every vertex bijection.
    fn isomorphic(a: &Representation, b: &Representation) -> bool {
        let n = a.tree.vertex_count();
        if n != b.tree.vertex_count() {
            return false;
        }
        let ann_b = b.annotations();
        let ann_a = a.annotations();
        let mut perm: Vec<VertexId> = (0..n).collect();
        fn next_perm(p: &mut [usize]) -> bool {
            let n = p.len();
            if n < 2 {
                return false;
            }
            let mut i = n - 1;
            while i > 0 && p[i - 1] >= p[i] {
                i -= 1;
            }
            if i == 0 {
                return false;
            }
            let mut j = n - 1;
            while p[j] <= p[i - 1] {
                j -= 1;
            }
            p.swap(i - 1, j);
            p[i..].reverse();
            true
        }
        loop {
            let ok = (0..n).all(|v| ann_a[v] == ann_b[perm[v]])
                && a.tree
                    .edges()
                    .iter()
                    .all(|e| b.tree.weight(perm[e.u], perm[e.v]) == Some(e.weight));
            if ok {
                return true;
            }
            if !next_perm(&mut perm) {
                return false;
            }
        }
    }

    #[test]
    fn hash_separates_quartet_topologies() {
        // Three resolved quartets on leaves a..d with unit weights.
        let quartet = |pairs: [(&str, &str); 2]| {
            let t = WeightedTree::from_edges(
                6,
                &[
                    Edge {
                        u: 4,
                        v: 5,
                        weight: 1.0,
                    },
                    Edge {
                        u: 0,
                        v: 4,
                        weight: 1.0,
                    },
                    Edge {
                        u: 1,
                        v: 4,
                        weight: 1.0,
                    },
                    Edge {
                        u: 2,
                        v: 5,
                        weight: 1.0,
                    },
                    Edge {
                        u: 3,
                        v: 5,
                        weight: 1.0,
                    },
                ],
            )
            .unwrap();
            let [(p, q), (s, u)] = pairs;
            rep(t, &[(p, &[0]), (q, &[1]), (s, &[2]), (u, &[3])])
        };
        let reps = [
            quartet([("a", "b"), ("c", "d")]),
            quartet([("a", "c"), ("b", "d")]),
            quartet([("a", "d"), ("b", "c")]),
            quartet([("d", "c"), ("b", "a")]),
        ];
        for x in &reps {
            for y in &reps {
                assert_eq!(
                    canonical_hash(x, 0.0) == canonical_hash(y, 0.0),
                    isomorphic(x, y)
                );
            }
        }
        assert_eq!(canonical_hash(&reps[0], 0.0), canonical_hash(&reps[3], 0.0));
    }

    #[test]
    fn json_and_dot() {
        let r = rep(path_abc(), &[("a", &[0]), ("c", &[2]), ("z", &[1, 2])]);
        let back = Representation::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let shifted = r#"{"vertices":[10,20],"edges":[{"u":10,"v":20,"w":1.5}],"phi":{"x":[20]}}"#;
        let s = Representation::from_json(shifted).unwrap();
        assert_eq!(s.phi["x"], vec![1]);
        assert!(Representation::from_json(r#"{"vertices":[0,1],"edges":[],"phi":{}}"#).is_err());
        let dot = r.to_dot();
        assert!(dot.contains("2 [label=\"c,z\"]"), "{dot}");
        assert!(dot.contains("1 -- 2 [label=\"2\"]"), "{dot}");
        assert_eq!(significant_digits(1.23456789, 6), "1.23457");
        assert_eq!(significant_digits(1234567.0, 6), "1234570");
    }

    #[test]
    fn representation_rejects_disconnected_images() {
        let err = Representation::new(
            path_abc(),
            [("z".to_string(), vec![0, 2])].into_iter().collect(),
        )
        .unwrap_err();
        assert!(matches!(err, TreeError::InvalidRepresentation(_)));
    }

    proptest! {
        #[test]
        fn triangle_equality_iff_on_path(seed in 0u64..500, n in 2usize..25) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tree(&mut rng, n);
            let (u, v, w) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            let d = |a, b| t.tree_distance(a, b).unwrap();
            prop_assert!(d(u, w) <= d(u, v) + d(v, w));
            // v is on the u-w path iff removing v separates u from w (or v is an end).
            let coords = PathCoordinates::new(&t, u).unwrap();
            let mut on_path = false;
            let mut x = Some(w);
            while let Some(y) = x {
                if y == v { on_path = true; }
                x = coords.parent[y];
            }
            prop_assert_eq!(d(u, w) == d(u, v) + d(v, w), on_path);
        }

        #[test]
        fn subdivision_preserves_distances(seed in 0u64..500, n in 2usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = random_tree(&mut rng, n);
            let before: Vec<Vec<f64>> = (0..n).map(|u| scan_distance(&t, u)).collect();
            let e = t.edges()[rng.gen_range(0..n - 1)];
            let k = rng.gen_range(1..4);
            let mut offs: Vec<f64> = (1..=k).map(|i| e.weight * i as f64 / (k + 1) as f64).collect();
            offs.dedup();
            t.subdivide_edge(e.u, e.v, &offs).unwrap();
            t.validate().unwrap();
            for u in 0..n {
                for v in 0..n {
                    let got = t.tree_distance(u, v).unwrap();
                    prop_assert!((got - before[u][v]).abs() <= 1e-9 * before[u][v].max(1.0));
                }
            }
        }

        #[test]
        fn hash_invariant_under_random_relabeling(seed in 0u64..300, n in 1usize..15) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tree(&mut rng, n);
            let phi: BTreeMap<String, Vec<VertexId>> = (0..3)
                .map(|i| (format!("o{i}"), vec![rng.gen_range(0..n)]))
                .collect();
            let r = Representation::new(t, phi).unwrap();
            let mut perm: Vec<VertexId> = (0..n).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut rng);
            prop_assert_eq!(canonical_hash(&r, 1e-9), canonical_hash(&permute(&r, &perm), 1e-9));
        }

        #[test]
        fn smoothing_preserves_distances_between_kept_sets(seed in 0u64..300, n in 2usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tree(&mut rng, n);
            let keep: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            let kept: Vec<VertexId> = (0..n).filter(|&v| keep[v]).collect();
            prop_assume!(kept.len() >= 2);
            let (s, map) = t.smooth(&keep, 0.0);
            for &u in &kept {
                for &v in &kept {
                    let before = t.tree_distance(u, v).unwrap();
                    let after = s.tree_distance(map[u].unwrap(), map[v].unwrap()).unwrap();
                    prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0));
                }
            }
            for v in 0..s.vertex_count() {
                let old = map.iter().position(|&m| m == Some(v)).unwrap();
                prop_assert!(s.degree(v) > 2 || keep[old]);
            }
        }
    }
}
