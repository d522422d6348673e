//! The canonical partition of the edge set associated with a configuration.
//!
//! Following the Henneberg construction: the base edge starts a part; when a
//! new vertex lands on the line of its parents' part, its two edges merge
//! into that part, otherwise each becomes a singleton part. The result does
//! not depend on the chosen construction order, every part induces a TLG,
//! and every part's sub-configuration is collinear.

use std::collections::{BTreeMap, BTreeSet};

use crate::dynamics::Configuration;
use crate::graph::{edge, Edge, InducedSubgraph, TlGraph};
use crate::{Error, Result};

/// One part: its edges (in first-appearance order), the induced subgraph,
/// and the unit direction of the common line.
#[derive(Debug, Clone)]
pub struct PartitionPart {
    pub edges: Vec<Edge>,
    pub subgraph: InducedSubgraph,
    pub direction: (f64, f64),
}

/// Ordered list of parts covering the edge set.
#[derive(Debug, Clone)]
pub struct CanonicalPartition {
    pub parts: Vec<PartitionPart>,
    pub collinear_tol: f64,
}

impl CanonicalPartition {
    /// The partition as a set of edge sets, for order-insensitive comparison.
    pub fn as_edge_sets(&self) -> BTreeSet<BTreeSet<Edge>> {
        self.parts
            .iter()
            .map(|p| p.edges.iter().copied().collect())
            .collect()
    }

    pub fn part_of(&self, e: Edge) -> Option<usize> {
        self.parts.iter().position(|p| p.edges.contains(&e))
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

/// Run the inductive partition rule along the graph's Henneberg order.
///
/// A step vertex `n` with parents `i, j` is collinear with them when the
/// normalized cross product `|(x_j - x_i) x (x_n - x_i)| / (|x_j - x_i| |x_n - x_i|)`
/// falls below `collinear_tol`.
pub fn canonical_partition(
    graph: &TlGraph,
    config: &Configuration,
    collinear_tol: f64,
) -> Result<CanonicalPartition> {
    let mut parts: Vec<Vec<Edge>> = Vec::new();
    let mut part_of: BTreeMap<Edge, usize> = BTreeMap::new();

    let base = graph.base_edge();
    if config.distance(base.0, base.1) == 0.0 {
        return Err(Error::EdgeCollision {
            i: base.0,
            j: base.1,
        });
    }
    parts.push(vec![base]);
    part_of.insert(base, 0);

    for step in graph.steps() {
        let (i, j) = step.parents;
        let v = step.vertex;
        for p in [i, j] {
            if config.distance(p, v) == 0.0 {
                return Err(Error::EdgeCollision {
                    i: p.min(v),
                    j: p.max(v),
                });
            }
        }
        let (xi, yi) = config.point(i);
        let (xj, yj) = config.point(j);
        let (xv, yv) = config.point(v);
        let (ux, uy) = (xj - xi, yj - yi);
        let (wx, wy) = (xv - xi, yv - yi);
        let cross = (ux * wy - uy * wx).abs();
        let norm = config.distance(i, j) * config.distance(i, v);
        let aligned = cross / norm < collinear_tol;

        let (e1, e2) = (edge(i, v), edge(j, v));
        if aligned {
            let idx = part_of[&edge(i, j)];
            parts[idx].push(e1);
            parts[idx].push(e2);
            part_of.insert(e1, idx);
            part_of.insert(e2, idx);
        } else {
            for e in [e1, e2] {
                parts.push(vec![e]);
                part_of.insert(e, parts.len() - 1);
            }
        }
    }

    let parts = parts
        .into_iter()
        .map(|edges| {
            let set: BTreeSet<Edge> = edges.iter().copied().collect();
            let subgraph = graph
                .induced_subsystem(&set)
                .expect("partition parts are triangulated Laman subgraphs");
            let (a, b) = edges[0];
            let (xa, ya) = config.point(a);
            let (xb, yb) = config.point(b);
            let len = config.distance(a, b);
            let mut dir = ((xb - xa) / len, (yb - ya) / len);
            if dir.0 < 0.0 || (dir.0 == 0.0 && dir.1 < 0.0) {
                dir = (-dir.0, -dir.1);
            }
            dir = (dir.0 + 0.0, dir.1 + 0.0); // clear negative zeros
            Ok(PartitionPart {
                edges,
                subgraph,
                direction: dir,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CanonicalPartition {
        parts,
        collinear_tol,
    })
}
