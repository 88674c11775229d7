//! Minimal representation of a tree metric in O(n²).
//!
//! Objects are inserted one at a time into a tree rooted at the image of the
//! first object `r`. For a new object `x`, the point where it meets the
//! current tree has depth `h = max_y (d(r,x) + d(r,y) − d(x,y)) / 2` and lies
//! on the root path of a maximizing `y`; `x` hangs off that point by a pendant
//! edge of length `d(r,x) − h`. Computing `h` is O(n) and the climb from
//! `y`'s image is O(|V|) = O(n), so the whole construction is O(n²), and so is
//! the final all-pairs check.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dissim::{DissimilarityMatrix, Tolerance};
use crate::wtree::{PathCoordinates, Representation, VertexId, WeightedTree};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum TreeMetricError {
    #[error("negative {what} {value} when attaching `{x}` to the `{u}`-`{v}` path")]
    NegativeLength {
        u: String,
        v: String,
        x: String,
        what: &'static str,
        value: f64,
    },
    #[error("not a tree metric: {0}")]
    NotTreeMetric(String),
}

/// Where a new leaf meets the path between two placed objects.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafAttachment {
    pub ref_u: String,
    pub ref_v: String,
    /// Distance from `ref_u` to the meeting point along the path.
    pub split: f64,
    /// Length of the new leaf edge.
    pub pendant: f64,
}

#[inline]
fn split_of(d: &DissimilarityMatrix, u: usize, v: usize, x: usize) -> f64 {
    (d.get(u, x) + d.get(u, v) - d.get(v, x)) / 2.0
}

/// Three-point formula for attaching `x` to the `u`–`v` path. Values within
/// `tau` of the path ends, or of zero pendant, are snapped.
pub fn attachment_point(
    d: &DissimilarityMatrix,
    u: usize,
    v: usize,
    x: usize,
    tau: f64,
) -> Result<LeafAttachment, TreeMetricError> {
    let duv = d.get(u, v);
    let mut split = split_of(d, u, v, x);
    let mut pendant = (d.get(u, x) + d.get(v, x) - duv) / 2.0;
    let negative = |what, value| TreeMetricError::NegativeLength {
        u: d.label(u).to_string(),
        v: d.label(v).to_string(),
        x: d.label(x).to_string(),
        what,
        value,
    };
    if split < -tau {
        return Err(negative("split", split));
    }
    if duv - split < -tau {
        return Err(negative("split remainder", duv - split));
    }
    if pendant < -tau {
        return Err(negative("pendant", pendant));
    }
    if split.abs() <= tau {
        split = 0.0;
    } else if (duv - split).abs() <= tau {
        split = duv;
    }
    if pendant.abs() <= tau {
        pendant = 0.0;
    }
    Ok(LeafAttachment {
        ref_u: d.label(u).to_string(),
        ref_v: d.label(v).to_string(),
        split,
        pendant,
    })
}

/// Reconstruct with the resolved scale of `tol` on `d`.
pub fn reconstruct_tree_metric(
    d: &DissimilarityMatrix,
    tol: &Tolerance,
) -> Result<Representation, TreeMetricError> {
    reconstruct_tree_metric_tau(d, tol.scale(d))
}

/// Build the unique minimal representation of the tree metric `d`.
///
/// Every object maps to a single vertex; leaves are object images and every
/// degree-2 vertex is an object image. The first object is the root of the
/// construction, vertex 0. Fails with [`TreeMetricError`] when `d` is not a
/// tree metric within `tau`.
pub fn reconstruct_tree_metric_tau(
    d: &DissimilarityMatrix,
    tau: f64,
) -> Result<Representation, TreeMetricError> {
    let n = d.len();
    let mut tree = WeightedTree::single_vertex();
    let mut parent: Vec<Option<VertexId>> = vec![None];
    let mut depth: Vec<f64> = vec![0.0];
    let mut image: Vec<VertexId> = vec![0; n];

    for x in 1..n {
        let dr = d.get(0, x);
        // y = r contributes split 0.
        let (mut h, mut anchor) = (0.0, 0);
        for y in 1..x {
            let s = split_of(d, 0, y, x);
            if s > h {
                h = s;
                anchor = y;
            }
        }
        let att = attachment_point(d, 0, anchor, x, tau)?;
        if anchor != 0 {
            h = att.split;
        }
        let pendant = if anchor == 0 { dr } else { att.pendant };

        let mut v = image[anchor];
        if h > depth[v] + tau {
            return Err(TreeMetricError::NotTreeMetric(format!(
                "`{}` meets the tree beyond `{}`",
                d.label(x),
                d.label(anchor)
            )));
        }
        let attach = if depth[v] - h <= tau {
            v
        } else {
            while let Some(p) = parent[v] {
                if depth[p] <= h + tau {
                    break;
                }
                v = p;
            }
            let p = parent[v].expect("the root has depth 0 <= h + tau");
            let offset = h - depth[p];
            let w = tree.weight(p, v).expect("parent edge exists");
            if offset <= tau {
                p
            } else if offset >= w {
                v
            } else {
                let m = tree
                    .subdivide_edge(p, v, &[offset])
                    .expect("offset checked to lie inside the edge")[0];
                parent.push(Some(p));
                depth.push(depth[p] + offset);
                parent[v] = Some(m);
                m
            }
        };
        if pendant <= tau {
            image[x] = attach;
        } else {
            let leaf = tree
                .add_leaf(attach, pendant)
                .expect("attach vertex exists");
            parent.push(Some(attach));
            depth.push(depth[attach] + pendant);
            image[x] = leaf;
        }
    }

    let coords = PathCoordinates::new(&tree, 0).expect("vertex 0 exists");
    for x in 0..n {
        let dist = coords.multi_source_distances(&[image[x]]);
        for y in (x + 1)..n {
            let actual = dist[image[y]];
            if (actual - d.get(x, y)).abs() > tau {
                return Err(TreeMetricError::NotTreeMetric(format!(
                    "d({},{}) = {} but the tree gives {}",
                    d.label(x),
                    d.label(y),
                    d.get(x, y),
                    actual
                )));
            }
        }
    }

    let phi: BTreeMap<String, Vec<VertexId>> = (0..n)
        .map(|x| (d.label(x).to_string(), vec![image[x]]))
        .collect();
    Ok(Representation { tree, phi })
}
