//! Triangulated Laman graphs (TLGs) and their Henneberg constructions.
//!
//! A TLG starts from a single edge; every further vertex joins two existing
//! *adjacent* vertices via two new edges. The result is minimally rigid in
//! the plane (`|E| = 2n - 3`) and closed under deleting the last-added
//! vertex, which is the backbone of the system-reduction recursion.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// 1-based dense vertex id.
pub type VertexId = usize;

/// Undirected edge, stored with the smaller endpoint first.
pub type Edge = (VertexId, VertexId);

/// Normalize an unordered vertex pair into an [`Edge`].
pub fn edge(a: VertexId, b: VertexId) -> Edge {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// One vertex addition of a Henneberg construction.
///
/// `parents` keeps the order given at construction; the reduction calculus
/// distinguishes the two (first parent plays the role of the left/"2" agent,
/// second the right/"3" agent).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HennebergStep {
    pub vertex: VertexId,
    pub parents: (VertexId, VertexId),
}

/// A triangulated Laman graph together with one Henneberg construction of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TlGraph {
    n: usize,
    base_edge: Edge,
    steps: Vec<HennebergStep>,
    edges: BTreeSet<Edge>,
}

impl TlGraph {
    /// Build a TLG from a base edge and an ordered list of Henneberg steps.
    ///
    /// Vertex ids must come out dense (`1..=n`). Each step's parents must
    /// be distinct, already present, and adjacent to each other.
    pub fn build(base_edge: (VertexId, VertexId), steps: Vec<HennebergStep>) -> Result<Self> {
        let (u, v) = base_edge;
        if u == v || u == 0 || v == 0 {
            return Err(Error::NotTlg(format!("invalid base edge ({u},{v})")));
        }
        let mut edges = BTreeSet::new();
        edges.insert(edge(u, v));
        let mut present: BTreeSet<VertexId> = [u, v].into_iter().collect();

        for step in &steps {
            let (a, b) = step.parents;
            let w = step.vertex;
            if w == 0 {
                return Err(Error::DanglingReference {
                    vertex: w,
                    missing: 0,
                });
            }
            for p in [a, b] {
                if !present.contains(&p) {
                    return Err(Error::DanglingReference {
                        vertex: w,
                        missing: p,
                    });
                }
            }
            if a == b || !edges.contains(&edge(a, b)) {
                return Err(Error::NonAdjacentParents { vertex: w, a, b });
            }
            if !present.insert(w) {
                return Err(Error::DuplicateVertex(w));
            }
            edges.insert(edge(w, a));
            edges.insert(edge(w, b));
        }

        let n = present.len();
        // dense 1..=n ids
        if present.iter().next_back() != Some(&n) {
            let missing = (1..=n).find(|i| !present.contains(i)).unwrap_or(n);
            return Err(Error::DanglingReference { vertex: n, missing });
        }
        debug_assert_eq!(edges.len(), 2 * n - 3);
        Ok(Self {
            n,
            base_edge: edge(u, v),
            steps,
            edges,
        })
    }

    /// Recover some Henneberg construction from a bare edge set, or fail with
    /// [`Error::NotTlg`]. Among all reverse-deletion orders the
    /// lexicographically smallest sequence of removed vertices is chosen, so
    /// recognition is deterministic.
    pub fn recognize(edge_set: &BTreeSet<Edge>) -> Result<Self> {
        let mut vertices = BTreeSet::new();
        for &(a, b) in edge_set {
            if a == b || a == 0 {
                return Err(Error::NotTlg(format!("invalid edge ({a},{b})")));
            }
            vertices.insert(a);
            vertices.insert(b);
        }
        let n = vertices.len();
        if n < 2 {
            return Err(Error::NotTlg("fewer than two vertices".into()));
        }
        if vertices.iter().next_back() != Some(&n) {
            return Err(Error::NotTlg("vertex ids are not dense 1..=n".into()));
        }
        if edge_set.len() != 2 * n - 3 {
            return Err(Error::NotTlg(format!(
                "|E| = {} but 2n - 3 = {}",
                edge_set.len(),
                2 * n - 3
            )));
        }

        let mut found = Vec::new();
        search_orders(&mut edge_set.clone(), &mut Vec::new(), 1, &mut found);
        match found.into_iter().next() {
            Some(g) => Ok(g),
            None => Err(Error::NotTlg("no reverse-deletion order exists".into())),
        }
    }

    /// Enumerate up to `limit` distinct Henneberg step orders that rebuild
    /// this graph's edge set. At least one order (this graph's own) exists.
    pub fn alternative_henneberg_orders(&self, limit: usize) -> Vec<TlGraph> {
        let mut found = Vec::new();
        search_orders(&mut self.edges.clone(), &mut Vec::new(), limit, &mut found);
        found
    }

    /// Restrict to a subset of edges and re-validate as a TLG.
    ///
    /// Returns the dense-relabeled subgraph plus the map from new ids to the
    /// original ones (`vertex_map[new - 1] = old`).
    pub fn induced_subsystem(&self, edge_subset: &BTreeSet<Edge>) -> Result<InducedSubgraph> {
        for e in edge_subset {
            if !self.edges.contains(e) {
                return Err(Error::NotTlg(format!("edge {e:?} is not in the graph")));
            }
        }
        let mut old_ids = BTreeSet::new();
        for &(a, b) in edge_subset {
            old_ids.insert(a);
            old_ids.insert(b);
        }
        let vertex_map: Vec<VertexId> = old_ids.iter().copied().collect();
        let to_new: BTreeMap<VertexId, VertexId> = vertex_map
            .iter()
            .enumerate()
            .map(|(i, &old)| (old, i + 1))
            .collect();
        let relabeled: BTreeSet<Edge> = edge_subset
            .iter()
            .map(|&(a, b)| edge(to_new[&a], to_new[&b]))
            .collect();
        let graph = Self::recognize(&relabeled)?;
        Ok(InducedSubgraph { graph, vertex_map })
    }

    /// Sample a random TLG on `n >= 2` vertices: base edge (1,2), then each
    /// new vertex joins the endpoints of a uniformly chosen existing edge.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        assert!(n >= 2, "a TLG needs at least two vertices");
        let mut steps = Vec::new();
        let mut edges: Vec<Edge> = vec![(1, 2)];
        for v in 3..=n {
            let &(a, b) = &edges[rng.gen_range(0..edges.len())];
            steps.push(HennebergStep {
                vertex: v,
                parents: (a, b),
            });
            edges.push(edge(v, a));
            edges.push(edge(v, b));
        }
        Self::build((1, 2), steps).expect("random construction is always valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base_edge(&self) -> Edge {
        self.base_edge
    }

    pub fn steps(&self) -> &[HennebergStep] {
        &self.steps
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.edges.contains(&edge(a, b))
    }

    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// The last Henneberg step, if any vertex beyond the base pair exists.
    pub fn last_step(&self) -> Option<&HennebergStep> {
        self.steps.last()
    }

    /// Remove the last step's vertex, yielding the TLG on `n - 1` vertices
    /// and a dense relabeling map (`vertex_map[new - 1] = old`).
    ///
    /// The removed vertex need not be `n`, so the remainder is relabeled to
    /// stay dense.
    pub fn drop_last_step(&self) -> Option<(InducedSubgraph, HennebergStep)> {
        let last = *self.steps.last()?;
        let remaining: BTreeSet<Edge> = self
            .edges
            .iter()
            .copied()
            .filter(|&(a, b)| a != last.vertex && b != last.vertex)
            .collect();
        let sub = self
            .induced_subsystem(&remaining)
            .expect("prefix of a Henneberg construction is a TLG");
        Some((sub, last))
    }
}

/// A relabeled subgraph plus the map back to the parent graph's vertex ids.
#[derive(Debug, Clone)]
pub struct InducedSubgraph {
    pub graph: TlGraph,
    /// `vertex_map[new_id - 1]` is the original vertex id.
    pub vertex_map: Vec<VertexId>,
}

impl InducedSubgraph {
    pub fn to_old(&self, new_id: VertexId) -> VertexId {
        self.vertex_map[new_id - 1]
    }

    pub fn to_new(&self, old_id: VertexId) -> Option<VertexId> {
        self.vertex_map
            .iter()
            .position(|&o| o == old_id)
            .map(|i| i + 1)
    }
}

/// Depth-first search over reverse deletions. A vertex is removable when it
/// has degree 2 and its two neighbors are adjacent; removable vertices are
/// tried in increasing id order, so the first completed order is the
/// lexicographically smallest removal sequence.
fn search_orders(
    edges: &mut BTreeSet<Edge>,
    removed: &mut Vec<HennebergStep>,
    limit: usize,
    found: &mut Vec<TlGraph>,
) {
    if found.len() >= limit {
        return;
    }
    if edges.len() == 1 {
        let base = *edges.iter().next().unwrap();
        let steps: Vec<HennebergStep> = removed.iter().rev().copied().collect();
        if let Ok(g) = TlGraph::build(base, steps) {
            found.push(g);
        }
        return;
    }

    let mut degree: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    for &(a, b) in edges.iter() {
        degree.entry(a).or_default().push(b);
        degree.entry(b).or_default().push(a);
    }
    let candidates: Vec<(VertexId, VertexId, VertexId)> = degree
        .iter()
        .filter_map(|(&v, nbrs)| match nbrs.as_slice() {
            &[a, b] if edges.contains(&edge(a, b)) => Some((v, a.min(b), a.max(b))),
            _ => None,
        })
        .collect();

    for (v, a, b) in candidates {
        edges.remove(&edge(v, a));
        edges.remove(&edge(v, b));
        removed.push(HennebergStep {
            vertex: v,
            parents: (a, b),
        });
        search_orders(edges, removed, limit, found);
        removed.pop();
        edges.insert(edge(v, a));
        edges.insert(edge(v, b));
        if found.len() >= limit {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(vertex: VertexId, a: VertexId, b: VertexId) -> HennebergStep {
        HennebergStep {
            vertex,
            parents: (a, b),
        }
    }

    /// 5-vertex example graph: base (1,2), then 3 -> (1,2), 4 -> (2,3), 5 -> (3,4).
    pub(crate) fn five_vertex() -> TlGraph {
        TlGraph::build((1, 2), vec![step(3, 1, 2), step(4, 2, 3), step(5, 3, 4)]).unwrap()
    }

    #[test]
    fn triangle_from_single_step() {
        let g = TlGraph::build((1, 2), vec![step(3, 1, 2)]).unwrap();
        assert_eq!(g.n(), 3);
        let want: BTreeSet<Edge> = [(1, 2), (1, 3), (2, 3)].into_iter().collect();
        assert_eq!(*g.edges(), want);
    }

    #[test]
    fn five_vertex_has_seven_edges() {
        let g = five_vertex();
        assert_eq!(g.n(), 5);
        assert_eq!(g.edges().len(), 7);
        assert_eq!(g.edges().len(), 2 * g.n() - 3);
    }

    #[test]
    fn dangling_parent_is_rejected() {
        let err = TlGraph::build((1, 2), vec![step(3, 1, 2), step(4, 1, 4)]).unwrap_err();
        assert!(matches!(
            err,
            Error::DanglingReference {
                vertex: 4,
                missing: 4
            }
        ));
    }

    #[test]
    fn non_adjacent_parents_are_rejected() {
        // 4 and 5 both exist but are not adjacent
        let err = TlGraph::build(
            (1, 2),
            vec![step(3, 1, 2), step(4, 1, 2), step(5, 1, 2), step(6, 4, 5)],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::NonAdjacentParents {
                vertex: 6,
                a: 4,
                b: 5
            }
        ));
    }

    #[test]
    fn duplicate_vertex_is_rejected() {
        let err = TlGraph::build((1, 2), vec![step(3, 1, 2), step(3, 1, 3)]).unwrap_err();
        // parent 3 exists by then, so the duplicate id is the failure
        assert!(matches!(err, Error::DuplicateVertex(3)));
    }

    #[test]
    fn recognize_triangle() {
        let edges: BTreeSet<Edge> = [(1, 2), (1, 3), (2, 3)].into_iter().collect();
        let g = TlGraph::recognize(&edges).unwrap();
        assert_eq!(g.steps().len(), 1);
        assert_eq!(*g.edges(), edges);
        // lexicographically smallest removal: vertex 1 goes first
        assert_eq!(g.steps()[0].vertex, 1);
    }

    #[test]
    fn recognize_rejects_four_cycle() {
        let edges: BTreeSet<Edge> = [(1, 2), (2, 3), (3, 4), (1, 4)].into_iter().collect();
        assert!(matches!(TlGraph::recognize(&edges), Err(Error::NotTlg(_))));
    }

    #[test]
    fn recognize_rejects_k4() {
        let edges: BTreeSet<Edge> = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
            .into_iter()
            .collect();
        assert!(matches!(TlGraph::recognize(&edges), Err(Error::NotTlg(_))));
    }

    #[test]
    fn recognize_roundtrips_build() {
        let g = five_vertex();
        let r = TlGraph::recognize(g.edges()).unwrap();
        assert_eq!(r.edges(), g.edges());
    }

    #[test]
    fn triangle_has_three_orders() {
        let g = TlGraph::build((1, 2), vec![step(3, 1, 2)]).unwrap();
        let orders = g.alternative_henneberg_orders(usize::MAX);
        assert_eq!(orders.len(), 3);
        for o in &orders {
            assert_eq!(o.edges(), g.edges());
        }
    }

    #[test]
    fn limit_one_gives_one_order() {
        let g = five_vertex();
        assert_eq!(g.alternative_henneberg_orders(1).len(), 1);
    }

    #[test]
    fn all_orders_rebuild_same_edges() {
        let g = five_vertex();
        let orders = g.alternative_henneberg_orders(usize::MAX);
        assert!(!orders.is_empty());
        for o in &orders {
            assert_eq!(o.edges(), g.edges());
        }
    }

    #[test]
    fn induced_triangle_subsystem() {
        let g = five_vertex();
        let subset: BTreeSet<Edge> = [(1, 2), (1, 3), (2, 3)].into_iter().collect();
        let sub = g.induced_subsystem(&subset).unwrap();
        assert_eq!(sub.graph.n(), 3);
        assert_eq!(sub.vertex_map, vec![1, 2, 3]);
    }

    #[test]
    fn induced_single_edge() {
        let g = five_vertex();
        let subset: BTreeSet<Edge> = [(2, 4)].into_iter().collect();
        let sub = g.induced_subsystem(&subset).unwrap();
        assert_eq!(sub.graph.n(), 2);
        assert_eq!(sub.vertex_map, vec![2, 4]);
    }

    #[test]
    fn induced_disconnected_fails() {
        let g = five_vertex();
        let subset: BTreeSet<Edge> = [(1, 2), (3, 4)].into_iter().collect();
        assert!(matches!(
            g.induced_subsystem(&subset),
            Err(Error::NotTlg(_))
        ));
    }

    #[test]
    fn drop_last_step_stays_tlg() {
        let mut g = five_vertex();
        while let Some((sub, _)) = g.drop_last_step() {
            assert_eq!(sub.graph.edges().len(), 2 * sub.graph.n() - 3);
            g = sub.graph;
        }
        assert_eq!(g.n(), 2);
    }

    #[test]
    fn every_prefix_is_valid() {
        let g = five_vertex();
        for k in 0..=g.steps().len() {
            let prefix = g.steps()[..k].to_vec();
            TlGraph::build(g.base_edge(), prefix).unwrap();
        }
    }

    #[test]
    fn random_graphs_are_valid_and_recognizable() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in 2..=9 {
            let g = TlGraph::random(n, &mut rng);
            assert_eq!(g.edges().len(), 2 * n - 3);
            let r = TlGraph::recognize(g.edges()).unwrap();
            assert_eq!(r.edges(), g.edges());
        }
    }
}
