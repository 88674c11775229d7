//! Brute-force O(n⁴) recognition oracles: the four-point condition for tree
//! metrics and its extension for subtree distances.
//!
//! Quadruples range over all index tuples, repeats included. The reported
//! violation is the first one in lexicographic `(x, y, z, w)` index order.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::dissim::{DissimilarityMatrix, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    FourPoint,
    ExtendedFourPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionViolation {
    pub condition: Condition,
    pub quadruple: [String; 4],
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for ConditionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.condition {
            Condition::FourPoint => "4PC",
            Condition::ExtendedFourPoint => "EXT4PC",
        };
        let [x, y, z, w] = &self.quadruple;
        write!(
            f,
            "{tag} violated at ({x},{y},{z},{w}): lhs={}, rhs={}",
            self.lhs, self.rhs
        )
    }
}

/// `(lhs, rhs)` of the four-point inequality for one index quadruple.
pub fn four_point_terms(
    d: &DissimilarityMatrix,
    x: usize,
    y: usize,
    z: usize,
    w: usize,
) -> (f64, f64) {
    let lhs = d.get(x, y) + d.get(z, w);
    let rhs = (d.get(x, z) + d.get(y, w)).max(d.get(x, w) + d.get(y, z));
    (lhs, rhs)
}

/// `(lhs, rhs)` of the extended inequality: the right side is the maximum of
/// the two cross sums, `d(x,y)`, `d(z,w)` and the four half-perimeters of the
/// triangles containing `(x,y)` or `(z,w)`.
pub fn extended_four_point_terms(
    d: &DissimilarityMatrix,
    x: usize,
    y: usize,
    z: usize,
    w: usize,
) -> (f64, f64) {
    let (dxy, dzw) = (d.get(x, y), d.get(z, w));
    let (dxz, dxw, dyz, dyw) = (d.get(x, z), d.get(x, w), d.get(y, z), d.get(y, w));
    let terms = [
        dxz + dyw,
        dxw + dyz,
        dxy,
        dzw,
        (dxy + dyz + dxz) / 2.0,
        (dxy + dyw + dxw) / 2.0,
        (dxz + dzw + dxw) / 2.0,
        (dyz + dzw + dyw) / 2.0,
    ];
    (
        dxy + dzw,
        terms.into_iter().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn first_violation(
    d: &DissimilarityMatrix,
    tol: &Tolerance,
    condition: Condition,
) -> Option<ConditionViolation> {
    let n = d.len();
    let tau = tol.scale(d);
    let terms = match condition {
        Condition::FourPoint => four_point_terms,
        Condition::ExtendedFourPoint => extended_four_point_terms,
    };
    (0..n).into_par_iter().find_map_first(|x| {
        for y in 0..n {
            for z in 0..n {
                for w in 0..n {
                    let (lhs, rhs) = terms(d, x, y, z, w);
                    if lhs > rhs + tau {
                        return Some(ConditionViolation {
                            condition,
                            quadruple: [x, y, z, w].map(|i| d.label(i).to_string()),
                            lhs,
                            rhs,
                        });
                    }
                }
            }
        }
        None
    })
}

/// `None` iff `d` satisfies the four-point condition within τ.
pub fn check_four_point(d: &DissimilarityMatrix, tol: &Tolerance) -> Option<ConditionViolation> {
    first_violation(d, tol, Condition::FourPoint)
}

/// `None` iff `d` satisfies the extended four-point condition within τ.
pub fn check_extended_four_point(
    d: &DissimilarityMatrix,
    tol: &Tolerance,
) -> Option<ConditionViolation> {
    first_violation(d, tol, Condition::ExtendedFourPoint)
}
