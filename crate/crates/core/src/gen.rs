//! Random instances: a weighted tree, objects mapped to random connected
//! subtrees, and the distances they induce.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dissim::{deduplicate, DissimilarityMatrix, Tolerance};
use crate::wtree::{Edge, PathCoordinates, Representation, VertexId, WeightedTree};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("subtree size {size} is outside 1..={vertices}")]
    SizeOutOfRange { size: usize, vertices: usize },
    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),
}

/// How edge weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weights {
    /// Uniform in `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Uniform integers in `1..=hi`, for exact comparisons.
    Integer { hi: u32 },
}

impl Default for Weights {
    fn default() -> Self {
        Weights::Uniform { lo: 1.0, hi: 10.0 }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<(), GenError> {
        match *self {
            Weights::Uniform { lo, hi }
                if lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi =>
            {
                Ok(())
            }
            Weights::Integer { hi } if hi >= 1 => Ok(()),
            w => Err(GenError::InvalidRange(format!("{w:?}"))),
        }
    }

    /// True when all weights are integers, so that distances are exact.
    pub fn is_exact(&self) -> bool {
        matches!(self, Weights::Integer { .. })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Weights::Uniform { lo, hi } if lo == hi => lo,
            Weights::Uniform { lo, hi } => rng.gen_range(lo..=hi),
            Weights::Integer { hi } => f64::from(rng.gen_range(1..=hi)),
        }
    }
}

/// Parses `lo:hi` or `int:hi`.
impl FromStr for Weights {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GenError::InvalidRange(format!("expected lo:hi or int:hi, got `{s}`"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let w = if a.trim() == "int" {
            Weights::Integer {
                hi: b.trim().parse().map_err(|_| bad())?,
            }
        } else {
            Weights::Uniform {
                lo: a.trim().parse().map_err(|_| bad())?,
                hi: b.trim().parse().map_err(|_| bad())?,
            }
        };
        w.validate()?;
        Ok(w)
    }
}

/// A uniformly random labelled tree on `v_count` vertices, decoded from a
/// random Prüfer sequence.
pub fn random_tree<R: Rng>(
    rng: &mut R,
    v_count: usize,
    weights: Weights,
) -> Result<WeightedTree, GenError> {
    weights.validate()?;
    if v_count == 0 {
        return Err(GenError::InvalidRange(
            "a tree needs at least one vertex".into(),
        ));
    }
    if v_count == 1 {
        return Ok(WeightedTree::single_vertex());
    }
    let prufer: Vec<usize> = (0..v_count - 2)
        .map(|_| rng.gen_range(0..v_count))
        .collect();
    let mut remaining = vec![1usize; v_count];
    for &p in &prufer {
        remaining[p] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> = (0..v_count)
        .filter(|&v| remaining[v] == 1)
        .map(Reverse)
        .collect();
    let mut edges = Vec::with_capacity(v_count - 1);
    for &p in &prufer {
        let Reverse(leaf) = leaves.pop().expect("a Prüfer step always has a leaf");
        edges.push(Edge {
            u: leaf,
            v: p,
            weight: weights.sample(rng),
        });
        remaining[p] -= 1;
        if remaining[p] == 1 {
            leaves.push(Reverse(p));
        }
    }
    let Reverse(u) = leaves.pop().expect("two vertices remain");
    let Reverse(v) = leaves.pop().expect("two vertices remain");
    edges.push(Edge {
        u,
        v,
        weight: weights.sample(rng),
    });
    Ok(WeightedTree::from_edges(v_count, &edges).expect("Prüfer decoding yields a tree"))
}

/// A random tree on `v_count` vertices with at least `leaves` leaves: a
/// random core on `v_count − leaves` vertices with `leaves` pendant vertices
/// attached at random.
pub fn random_tree_with_leaves<R: Rng>(
    rng: &mut R,
    v_count: usize,
    leaves: usize,
    weights: Weights,
) -> Result<WeightedTree, GenError> {
    if leaves >= v_count {
        return Err(GenError::InfeasibleParameters(format!(
            "{leaves} pendant leaves need more than {v_count} vertices"
        )));
    }
    let core = v_count - leaves;
    let mut tree = random_tree(rng, core, weights)?;
    for _ in 0..leaves {
        let parent = rng.gen_range(0..core);
        tree.add_leaf(parent, weights.sample(rng))
            .expect("core vertices exist");
    }
    Ok(tree)
}

/// A connected vertex set of the given size, grown from a random start by
/// repeatedly adding a random frontier vertex.
pub fn random_connected_subtree<R: Rng>(
    rng: &mut R,
    tree: &WeightedTree,
    size: usize,
) -> Result<Vec<VertexId>, GenError> {
    let n = tree.vertex_count();
    if size == 0 || size > n {
        return Err(GenError::SizeOutOfRange { size, vertices: n });
    }
    let mut inside = vec![false; n];
    let start = rng.gen_range(0..n);
    inside[start] = true;
    let mut set = vec![start];
    let mut frontier: Vec<VertexId> = tree.neighbors(start).iter().map(|&(w, _)| w).collect();
    while set.len() < size {
        let v = frontier.swap_remove(rng.gen_range(0..frontier.len()));
        if inside[v] {
            continue;
        }
        inside[v] = true;
        set.push(v);
        frontier.extend(
            tree.neighbors(v)
                .iter()
                .map(|&(w, _)| w)
                .filter(|&w| !inside[w]),
        );
    }
    set.sort_unstable();
    Ok(set)
}

/// The matrix of distances between images, in label order.
pub fn forward_distances(rep: &Representation) -> DissimilarityMatrix {
    let labels: Vec<String> = rep.phi.keys().cloned().collect();
    let images: Vec<&Vec<VertexId>> = rep.phi.values().collect();
    let n = labels.len();
    let coords = PathCoordinates::new(&rep.tree, 0).expect("trees have vertex 0");
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        let dist = coords.multi_source_distances(images[i]);
        for j in (i + 1)..n {
            let v = images[j]
                .iter()
                .map(|&u| dist[u])
                .fold(f64::INFINITY, f64::min);
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    DissimilarityMatrix::from_rows_with(labels, rows, &Tolerance::EXACT)
        .expect("tree distances are finite and nonnegative")
}

/// Zero-padded labels `o0..o{n-1}` so that label order is index order.
pub fn object_labels(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("o{i:0width$}")).collect()
}

const MAX_ATTEMPTS: u64 = 256;

fn leaves(tree: &WeightedTree) -> Vec<VertexId> {
    (0..tree.vertex_count())
        .filter(|&v| tree.degree(v) <= 1)
        .collect()
}

/// A random subtree-distance instance and its (non-minimal) ground truth.
///
/// `ceil(singleton_fraction · n_objects)` objects sit alone on distinct
/// leaves; the rest get random connected subtrees. Samples whose matrix
/// collapses below two distinct objects are redrawn from the next sub-seed.
/// When the uniform tree has too few leaves, the tree is redrawn with
/// [`random_tree_with_leaves`].
pub fn generate_instance(
    seed: u64,
    v_count: usize,
    n_objects: usize,
    singleton_fraction: f64,
    weights: Weights,
) -> Result<(DissimilarityMatrix, Representation), GenError> {
    generate_instance_with(
        seed,
        v_count,
        n_objects,
        singleton_fraction,
        weights,
        v_count.div_ceil(2),
    )
}

/// As [`generate_instance`], with non-singleton images of at most
/// `max_subtree` vertices.
pub fn generate_instance_with(
    seed: u64,
    v_count: usize,
    n_objects: usize,
    singleton_fraction: f64,
    weights: Weights,
    max_subtree: usize,
) -> Result<(DissimilarityMatrix, Representation), GenError> {
    weights.validate()?;
    if n_objects == 0 {
        return Err(GenError::InvalidRange(
            "at least one object is required".into(),
        ));
    }
    if !(0.0..=1.0).contains(&singleton_fraction) {
        return Err(GenError::InvalidRange(format!(
            "singleton fraction {singleton_fraction} is outside [0, 1]"
        )));
    }
    if v_count == 0 {
        return Err(GenError::InvalidRange(
            "a tree needs at least one vertex".into(),
        ));
    }
    let singles = ((singleton_fraction * n_objects as f64).ceil() as usize).min(n_objects);
    let max_leaves = if v_count <= 2 { v_count } else { v_count - 1 };
    if singles > max_leaves {
        return Err(GenError::InfeasibleParameters(format!(
            "{singles} leaf objects requested but a tree on {v_count} vertices has at most {max_leaves} leaves"
        )));
    }
    if v_count == 1 && n_objects >= 2 {
        return Err(GenError::InfeasibleParameters(
            "a single vertex cannot separate two objects".into(),
        ));
    }
    let labels = object_labels(n_objects);
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let mut tree = random_tree(&mut rng, v_count, weights)?;
        if leaves(&tree).len() < singles {
            tree = random_tree_with_leaves(&mut rng, v_count, singles, weights)?;
        }
        let mut leaf_pool = leaves(&tree);
        leaf_pool.shuffle(&mut rng);
        let max_size = max_subtree.clamp(1, v_count);
        let mut phi = BTreeMap::new();
        for (i, label) in labels.iter().enumerate() {
            let image = if i < singles {
                vec![leaf_pool[i]]
            } else {
                let size = rng.gen_range(1..=max_size);
                random_connected_subtree(&mut rng, &tree, size)?
            };
            phi.insert(label.clone(), image);
        }
        let rep = Representation::new(tree, phi).expect("images are connected");
        let d = forward_distances(&rep);
        if n_objects >= 2 && deduplicate(&d, &Tolerance::default()).reduced.len() < 2 {
            continue;
        }
        return Ok((d, rep));
    }
    Err(GenError::InfeasibleParameters(format!(
        "no admissible sample after {MAX_ATTEMPTS} attempts"
    )))
}
