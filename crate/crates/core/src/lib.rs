//! Reconstruction and recognition of subtree distances.
//!
//! A dissimilarity `d` on objects is a subtree distance when there is a
//! positively weighted tree and a map from each object to a connected vertex
//! set such that `d(x, y)` is the distance between the two sets. This crate
//! recognizes such matrices and builds their unique minimal representation
//! in O(n²) time.
//!
//! ```
//! use subtree_core::{parse_matrix, reconstruct_subtree_distance, MatrixFormat, Tolerance};
//!
//! # fn main() -> Result<(), subtree_core::DissimError> {
//! let d = parse_matrix(",a,c,z\na,0,6,2\nc,6,0,2\nz,2,2,0\n", MatrixFormat::Csv)?;
//! let out = reconstruct_subtree_distance(&d, &Tolerance::default());
//! assert!(out.report.accepted);
//! let rep = out.representation.unwrap();
//! assert_eq!(rep.phi["z"].len(), 2);
//! # Ok(())
//! # }
//! ```

pub mod bench;
pub mod conditions;
pub mod dissim;
pub mod gen;
pub mod reconstruct;
pub mod treemetric;
pub mod verify;
pub mod wtree;

pub use conditions::{check_extended_four_point, check_four_point, ConditionViolation};
pub use dissim::{
    deduplicate, parse_matrix, DissimError, DissimilarityMatrix, MatrixFormat, Tolerance,
};
pub use gen::{forward_distances, generate_instance, GenError, Weights};
pub use reconstruct::{
    find_leaf_objects, reconstruct_subtree_distance, reconstruct_unverified, Outcome,
    RecognitionReport, Stage,
};
pub use treemetric::reconstruct_tree_metric;
pub use verify::{audit_minimality, verify_distances, Defect, Mismatch};
pub use wtree::{canonical_hash, Representation, VertexId, WeightedTree};
