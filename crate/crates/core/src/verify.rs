//! Checking a representation against a matrix, and auditing minimality.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dissim::{DissimilarityMatrix, Tolerance};
use crate::wtree::{PathCoordinates, Representation, VertexId};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum VerifyError {
    #[error("object `{0}` has no image in the representation")]
    MissingObject(String),
}

/// A pair whose tree distance disagrees with the matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub x: String,
    pub y: String,
    pub expected: f64,
    pub actual: f64,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "d({},{}) = {} but the tree gives {}",
            self.x, self.y, self.expected, self.actual
        )
    }
}

/// Every ordered pair `(x, y)` with `|d_T(phi(x), phi(y)) − d(x, y)| > τ`.
/// An empty list means `rep` represents `d`.
pub fn verify_distances(
    rep: &Representation,
    d: &DissimilarityMatrix,
    tol: &Tolerance,
) -> Result<Vec<Mismatch>, VerifyError> {
    verify_distances_tau(rep, d, tol.scale(d))
}

pub fn verify_distances_tau(
    rep: &Representation,
    d: &DissimilarityMatrix,
    tau: f64,
) -> Result<Vec<Mismatch>, VerifyError> {
    let images: Vec<&[VertexId]> = d
        .labels()
        .iter()
        .map(|l| {
            rep.image(l)
                .ok_or_else(|| VerifyError::MissingObject(l.clone()))
        })
        .collect::<Result<_, _>>()?;
    let coords = PathCoordinates::new(&rep.tree, 0).expect("trees have vertex 0");
    let per_object: Vec<Vec<Mismatch>> = (0..d.len())
        .into_par_iter()
        .map(|x| {
            let dist = coords.multi_source_distances(images[x]);
            (0..d.len())
                .filter_map(|y| {
                    let actual = images[y]
                        .iter()
                        .map(|&v| dist[v])
                        .fold(f64::INFINITY, f64::min);
                    let expected = d.get(x, y);
                    ((actual - expected).abs() > tau).then(|| Mismatch {
                        x: d.label(x).to_string(),
                        y: d.label(y).to_string(),
                        expected,
                        actual,
                    })
                })
                .collect()
        })
        .collect();
    Ok(per_object.into_iter().flatten().collect())
}

/// Ways a representation can fail to be minimal.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Defect {
    /// An edge of weight ≤ τ, which could be contracted.
    ShortEdge {
        u: VertexId,
        v: VertexId,
        weight: f64,
    },
    /// A leaf that is not the whole image of any object.
    UncoveredLeaf { vertex: VertexId },
    /// A degree-2 vertex that is neither an object's whole image nor on the
    /// boundary of any image.
    RedundantVertex { vertex: VertexId },
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::ShortEdge { u, v, weight } => write!(f, "edge {u}-{v} has weight {weight}"),
            Defect::UncoveredLeaf { vertex } => {
                write!(f, "leaf {vertex} is not the image of any object")
            }
            Defect::RedundantVertex { vertex } => {
                write!(
                    f,
                    "vertex {vertex} has degree 2 but is not a boundary vertex"
                )
            }
        }
    }
}

/// Lists minimality defects; an empty list means none were found.
///
/// A boundary vertex is one that lies in some `phi(z)` and has a neighbor
/// outside `phi(z)`.
pub fn audit_minimality(rep: &Representation, tau: f64) -> Vec<Defect> {
    let tree = &rep.tree;
    let mut defects: Vec<Defect> = tree
        .edges()
        .into_iter()
        .filter(|e| e.weight <= tau)
        .map(|e| Defect::ShortEdge {
            u: e.u,
            v: e.v,
            weight: e.weight,
        })
        .collect();
    let singleton = rep.singleton_images();
    let boundary = rep.boundary_vertices();
    for v in 0..tree.vertex_count() {
        let deg = tree.degree(v);
        if deg <= 1 && !singleton[v] {
            defects.push(Defect::UncoveredLeaf { vertex: v });
        } else if deg == 2 && !singleton[v] && !boundary[v] {
            defects.push(Defect::RedundantVertex { vertex: v });
        }
    }
    defects
}
