//! GF(2) homology of the tessellation's restricted duals: embedded
//! distance and logical cycle bases.
//!
//! For each color c the restricted dual T*_c is the dual graph with the
//! color-c faces removed.  Concretely its nodes are the faces not colored
//! c, and its edges are exactly the primal edges of color c (an edge of
//! color c borders one face of each other color).  T*_c is again embedded
//! in the surface: its 2-cells correspond to the c-faces, the cell around
//! a c-face f being bounded by the unique color-c edge at each vertex of
//! f.  Cocycles of T*_c are computed as cycles of the dual embedded graph
//! D_c, whose nodes are the c-faces, whose edges are again the color-c
//! primal edges (joining the c-faces at the edge's two endpoints), and
//! whose 2-cells correspond to the non-c faces.
//!
//! A cycle is homologically nontrivial iff it lies outside the GF(2) span
//! of the 2-cell boundaries, iff it pairs oddly with some cohomology
//! class.  The minimum-weight nontrivial cycle is found exactly by the
//! double-cover method: for each element θ of a cocycle basis of H¹,
//! build the 2-lift in which traversing an edge of θ switches sheets;
//! the shortest path from (v, 0) to (v, 1), minimized over v, is the
//! shortest cycle pairing oddly with θ.  Minimizing over a basis suffices
//! because the pairing H¹ × H₁ → GF(2) is perfect: every nontrivial cycle
//! pairs oddly with at least one basis element.

use thiserror::Error;

use crate::gf2::{nullspace, BitVec, SpanSolver};
use crate::tess::{EdgeId, FaceId, Tessellation};

#[derive(Debug, Error)]
pub enum HomologyError {
    #[error("tessellation is not colored; run face/edge coloring first")]
    Uncolored,
    #[error("tessellation violates a coloring invariant: {0}")]
    Malformed(String),
    #[error("cycle basis rank {found}, expected {expected}")]
    RankDeficient { found: usize, expected: usize },
    #[error("surface has trivial H₁; no nontrivial cycle exists")]
    TrivialHomology,
}

/// Which homology of T*_c a graph computes: its own cycles, or (via the
/// dual embedded graph D_c) its cocycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DualKind {
    Cycle,
    Cocycle,
}

/// A restricted dual graph together with its 2-cell boundaries, ready for
/// homology computations.  Multi-edges and self-loops are allowed; edges
/// are indexed locally and mapped back to primal edges.
#[derive(Debug, Clone)]
pub struct RestrictedDual {
    pub color: u8,
    pub kind: DualKind,
    pub n_nodes: usize,
    /// Local edge endpoints (node ids); index is the local edge id.
    pub edges: Vec<[usize; 2]>,
    /// Local edge id → primal edge id.
    pub primal_edge: Vec<EdgeId>,
    /// Boundary of each embedded 2-cell as a local edge-set vector.
    pub cell_boundaries: Vec<BitVec>,
}

/// Per-vertex incidence: the unique edge and face of each color at every
/// vertex.  Fails if the tessellation breaks the one-of-each-color rule.
struct ColorIncidence {
    edge_at: Vec<[EdgeId; 3]>,
    face_at: Vec<[FaceId; 3]>,
}

fn color_incidence(t: &Tessellation) -> Result<ColorIncidence, HomologyError> {
    let to_err = |e: crate::tess::TessError| match e {
        crate::tess::TessError::Uncolored => HomologyError::Uncolored,
        other => HomologyError::Malformed(other.to_string()),
    };
    Ok(ColorIncidence {
        edge_at: t.edge_at_vertex_by_color().map_err(to_err)?,
        face_at: t.face_at_vertex_by_color().map_err(to_err)?,
    })
}

/// Builds T*_c: nodes are the non-c faces, edges the color-c primal
/// edges, 2-cells the c-faces.
pub fn restricted_dual(t: &Tessellation, c: u8) -> Result<RestrictedDual, HomologyError> {
    let fc = t.face_color.as_ref().ok_or(HomologyError::Uncolored)?;
    let ec = t.edge_color.as_ref().ok_or(HomologyError::Uncolored)?;
    let inc = color_incidence(t)?;

    let mut node_of_face = vec![usize::MAX; t.faces.len()];
    let mut n_nodes = 0;
    for f in 0..t.faces.len() {
        if fc[f] != c {
            node_of_face[f] = n_nodes;
            n_nodes += 1;
        }
    }

    let primal_edge: Vec<EdgeId> = (0..t.edges.len()).filter(|&e| ec[e] == c).collect();
    let mut local_of_primal = vec![usize::MAX; t.edges.len()];
    for (j, &e) in primal_edge.iter().enumerate() {
        local_of_primal[e] = j;
    }
    let edges = primal_edge
        .iter()
        .map(|&e| {
            let [f1, f2] = t.edge_faces[e];
            [node_of_face[f1], node_of_face[f2]]
        })
        .collect();

    // 2-cell around c-face f: the unique c-edge at each vertex of f
    // (each may appear twice when both endpoints lie on f; GF(2) XOR).
    let mut cell_boundaries = Vec::new();
    for f in 0..t.faces.len() {
        if fc[f] != c {
            continue;
        }
        let mut cell = BitVec::zeros(primal_edge.len());
        for &v in &t.face_vertices[f] {
            cell.flip(local_of_primal[inc.edge_at[v][c as usize]]);
        }
        cell_boundaries.push(cell);
    }

    Ok(RestrictedDual {
        color: c,
        kind: DualKind::Cycle,
        n_nodes,
        edges,
        primal_edge,
        cell_boundaries,
    })
}

/// Builds D_c, the embedded dual of T*_c: nodes are the c-faces, edges
/// the color-c primal edges, 2-cells the non-c faces.  Cycles of D_c are
/// the cocycles of T*_c.
pub fn cocycle_graph(t: &Tessellation, c: u8) -> Result<RestrictedDual, HomologyError> {
    let fc = t.face_color.as_ref().ok_or(HomologyError::Uncolored)?;
    let ec = t.edge_color.as_ref().ok_or(HomologyError::Uncolored)?;
    let inc = color_incidence(t)?;

    let mut node_of_face = vec![usize::MAX; t.faces.len()];
    let mut n_nodes = 0;
    for f in 0..t.faces.len() {
        if fc[f] == c {
            node_of_face[f] = n_nodes;
            n_nodes += 1;
        }
    }

    let primal_edge: Vec<EdgeId> = (0..t.edges.len()).filter(|&e| ec[e] == c).collect();
    let mut local_of_primal = vec![usize::MAX; t.edges.len()];
    for (j, &e) in primal_edge.iter().enumerate() {
        local_of_primal[e] = j;
    }
    let edges = primal_edge
        .iter()
        .map(|&e| {
            let [v1, v2] = t.edges[e];
            [
                node_of_face[inc.face_at[v1][c as usize]],
                node_of_face[inc.face_at[v2][c as usize]],
            ]
        })
        .collect();

    // 2-cell around non-c face h: the color-c edges on h's boundary.
    let mut cell_boundaries = Vec::new();
    for (f, boundary) in t.faces.iter().enumerate() {
        if fc[f] == c {
            continue;
        }
        let mut cell = BitVec::zeros(primal_edge.len());
        for &e in boundary {
            if ec[e] == c {
                cell.flip(local_of_primal[e]);
            }
        }
        cell_boundaries.push(cell);
    }

    Ok(RestrictedDual {
        color: c,
        kind: DualKind::Cocycle,
        n_nodes,
        edges,
        primal_edge,
        cell_boundaries,
    })
}

/// Representatives of a basis of H¹ = Z¹/B¹ for the embedded graph:
/// kernel vectors of the cell-boundary pairing that extend the cut space.
fn cohomology_basis(g: &RestrictedDual) -> Vec<BitVec> {
    let n_edges = g.edges.len();
    // Cut space: one star per node; a self-loop has both endpoints at the
    // node and so does not appear in its star.
    let mut cuts = SpanSolver::new(n_edges, g.n_nodes + n_edges + 1);
    for node in 0..g.n_nodes {
        let mut star = BitVec::zeros(n_edges);
        for (j, &[a, b]) in g.edges.iter().enumerate() {
            if (a == node) ^ (b == node) {
                star.flip(j);
            }
        }
        cuts.insert(&star);
    }
    let mut basis = Vec::new();
    for theta in nullspace(&g.cell_boundaries, n_edges) {
        if cuts.insert(&theta) {
            basis.push(theta);
        }
    }
    basis
}

/// Splits an even-degree edge set into edge-disjoint simple cycles
/// (self-loops count as cycles of length 1).
fn peel_simple_cycles(g: &RestrictedDual, support: &BitVec) -> Vec<BitVec> {
    let n_edges = g.edges.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); g.n_nodes];
    let mut used = vec![true; n_edges];
    for j in support.ones() {
        used[j] = false;
        let [a, b] = g.edges[j];
        adj[a].push((b, j));
        if a != b {
            adj[b].push((a, j));
        }
    }
    let mut cycles = Vec::new();
    for start_edge in support.ones() {
        if used[start_edge] {
            continue;
        }
        // Walk unused edges, popping a simple cycle whenever the walk
        // revisits a vertex already on its stack.
        let start = g.edges[start_edge][0];
        let mut stack: Vec<(usize, Option<usize>)> = vec![(start, None)];
        let mut on_stack = vec![usize::MAX; g.n_nodes];
        on_stack[start] = 0;
        loop {
            let (v, _) = *stack.last().unwrap();
            let next = adj[v].iter().find(|&&(_, j)| !used[j]).copied();
            let Some((w, j)) = next else {
                // Dead end: even degree guarantees this only happens once
                // the walk start has no unused edges left.
                break;
            };
            used[j] = true;
            if on_stack[w] != usize::MAX {
                let base = on_stack[w];
                let mut cyc = BitVec::zeros(n_edges);
                cyc.flip(j);
                for &(_, ej) in &stack[base + 1..] {
                    cyc.flip(ej.unwrap());
                }
                for &(u, _) in &stack[base + 1..] {
                    on_stack[u] = usize::MAX;
                }
                stack.truncate(base + 1);
                cycles.push(cyc);
            } else {
                on_stack[w] = stack.len();
                stack.push((w, Some(j)));
            }
        }
    }
    cycles
}

/// Shortest cycle pairing oddly with `theta`, via BFS in the 2-lift where
/// crossing a θ-edge switches sheets.  Returns (weight, edge set).
fn shortest_odd_cycle(g: &RestrictedDual, theta: &BitVec) -> Option<(usize, BitVec)> {
    let n = g.n_nodes;
    let n_edges = g.edges.len();
    let mut adj: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); n];
    for (j, &[a, b]) in g.edges.iter().enumerate() {
        let flip = theta.get(j);
        adj[a].push((b, j, flip));
        if a != b {
            adj[b].push((a, j, flip));
        } else if flip {
            // Sheet-switching self-loop: a cycle of weight 1 on its own.
            return Some((1, BitVec::from_ones(n_edges, &[j])));
        }
    }

    let mut best: Option<(usize, BitVec)> = None;
    // dist/parent arrays for states (node, sheet), reset per source by stamp.
    let mut dist = vec![usize::MAX; 2 * n];
    let mut stamp = vec![usize::MAX; 2 * n];
    let mut parent: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); 2 * n];
    let mut queue = std::collections::VecDeque::new();
    for src in 0..n {
        let bound = best.as_ref().map_or(usize::MAX, |(w, _)| *w);
        queue.clear();
        let s0 = 2 * src;
        dist[s0] = 0;
        stamp[s0] = src;
        queue.push_back(s0);
        while let Some(state) = queue.pop_front() {
            let d = dist[state];
            if d + 1 >= bound {
                continue;
            }
            let (v, sheet) = (state / 2, state % 2);
            for &(w, j, flip) in &adj[v] {
                let ns = 2 * w + (sheet ^ usize::from(flip));
                if stamp[ns] != src || dist[ns] > d + 1 {
                    stamp[ns] = src;
                    dist[ns] = d + 1;
                    parent[ns] = (state, j);
                    if ns == s0 + 1 {
                        // Reached (src, 1): project the lift path to an
                        // edge set; XOR cancels doubly-used edges.
                        let mut support = BitVec::zeros(n_edges);
                        let mut cur = ns;
                        while cur != s0 {
                            let (prev, ej) = parent[cur];
                            support.flip(ej);
                            cur = prev;
                        }
                        let w = support.count_ones();
                        if best.as_ref().is_none_or(|(bw, _)| w < *bw) {
                            best = Some((w, support));
                        }
                        queue.clear();
                        break;
                    }
                    queue.push_back(ns);
                }
            }
        }
    }

    // Reduce the winning support to a single simple cycle that still
    // pairs oddly with θ (at least one component must).
    let (_, support) = best?;
    let odd = peel_simple_cycles(g, &support)
        .into_iter()
        .filter(|cyc| cyc.dot(theta))
        .min_by_key(|cyc| cyc.count_ones())
        .expect("odd-pairing support contains an odd component");
    Some((odd.count_ones(), odd))
}

/// Minimum-weight homologically nontrivial cycle of the embedded graph,
/// or None when H₁ vanishes.  Exact: minimizes the double-cover answer
/// over a full cocycle basis.
pub fn min_nontrivial_cycle(g: &RestrictedDual) -> Option<(usize, BitVec)> {
    let mut best: Option<(usize, BitVec)> = None;
    for theta in cohomology_basis(g) {
        if let Some((w, cyc)) = shortest_odd_cycle(g, &theta) {
            if best.as_ref().is_none_or(|(bw, _)| w < *bw) {
                best = Some((w, cyc));
            }
        }
    }
    best
}

/// Exhaustive reference for tiny graphs: scans every edge subset for the
/// minimum even-degree set outside the span of the cell boundaries.
/// Intended for ≤ 20 edges; tests compare it against the BFS answer.
pub fn min_nontrivial_cycle_bruteforce(g: &RestrictedDual) -> Option<usize> {
    let n_edges = g.edges.len();
    assert!(n_edges <= 20, "brute force limited to tiny graphs");
    let mut boundaries = SpanSolver::new(n_edges, g.cell_boundaries.len() + 1);
    for b in &g.cell_boundaries {
        boundaries.insert(b);
    }
    let mut best: Option<usize> = None;
    for mask in 1u32..(1 << n_edges) {
        let w = mask.count_ones() as usize;
        if best.is_some_and(|b| w >= b) {
            continue;
        }
        let mut degree_ok = true;
        let mut deg = vec![0usize; g.n_nodes];
        let edges: Vec<usize> = (0..n_edges).filter(|&j| mask >> j & 1 == 1).collect();
        for &j in &edges {
            let [a, b] = g.edges[j];
            if a != b {
                deg[a] += 1;
                deg[b] += 1;
            }
        }
        if deg.iter().any(|&d| d % 2 != 0) {
            degree_ok = false;
        }
        if !degree_ok {
            continue;
        }
        let v = BitVec::from_ones(n_edges, &edges);
        if !boundaries.contains(&v) {
            best = Some(w);
        }
    }
    best
}

/// A witness for the embedded distance: where the minimum was attained
/// and the primal edges of the realizing cycle.
#[derive(Debug, Clone)]
pub struct DistanceWitness {
    pub d: usize,
    pub color: u8,
    pub kind: DualKind,
    pub primal_edges: Vec<EdgeId>,
}

/// Embedded distance: the minimum weight of a homologically nontrivial
/// cycle or cocycle over all three restricted duals (cocycles computed
/// as cycles on the dual complex).
pub fn embedded_distance(t: &Tessellation) -> Result<DistanceWitness, HomologyError> {
    let mut best: Option<DistanceWitness> = None;
    for c in 0..3u8 {
        for kind in [DualKind::Cycle, DualKind::Cocycle] {
            let g = match kind {
                DualKind::Cycle => restricted_dual(t, c)?,
                DualKind::Cocycle => cocycle_graph(t, c)?,
            };
            if let Some((w, cyc)) = min_nontrivial_cycle(&g) {
                if best.as_ref().is_none_or(|b| w < b.d) {
                    best = Some(DistanceWitness {
                        d: w,
                        color: c,
                        kind,
                        primal_edges: cyc.ones().map(|j| g.primal_edge[j]).collect(),
                    });
                }
            }
        }
    }
    best.ok_or(HomologyError::TrivialHomology)
}

/// A basis of H₁ realized as cycles on one restricted dual, with the
/// pairing matrix against a cohomology basis certifying independence.
#[derive(Debug, Clone)]
pub struct LogicalBasis {
    pub color: u8,
    /// Basis cycles as primal edge sets.
    pub cycles: Vec<Vec<EdgeId>>,
    /// Same cycles as local edge vectors of `restricted_dual(t, color)`.
    pub local_cycles: Vec<BitVec>,
    /// pairing[i].get(j) = ⟨θ_i, cycle_j⟩ over a cocycle basis θ.
    pub pairing: Vec<BitVec>,
}

/// Extracts 2g homologically independent cycles from T*_c (host color
/// fixed to 0; the circuit layer re-validates the choice by determinism).
pub fn logical_basis(t: &Tessellation) -> Result<LogicalBasis, HomologyError> {
    logical_basis_on(t, 0)
}

/// As [`logical_basis`], on a caller-chosen restricted dual.
pub fn logical_basis_on(t: &Tessellation, color: u8) -> Result<LogicalBasis, HomologyError> {
    let expected = 2 * t.genus;
    let g = restricted_dual(t, color)?;
    let n_edges = g.edges.len();

    if expected == 0 {
        return Ok(LogicalBasis {
            color,
            cycles: Vec::new(),
            local_cycles: Vec::new(),
            pairing: Vec::new(),
        });
    }

    // Spanning forest by BFS; fundamental cycles of non-tree edges.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); g.n_nodes];
    for (j, &[a, b]) in g.edges.iter().enumerate() {
        adj[a].push((b, j));
        if a != b {
            adj[b].push((a, j));
        }
    }
    let mut tree_edge = vec![false; n_edges];
    let mut parent: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); g.n_nodes];
    let mut seen = vec![false; g.n_nodes];
    let mut queue = std::collections::VecDeque::new();
    for root in 0..g.n_nodes {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            for &(w, j) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    tree_edge[j] = true;
                    parent[w] = (v, j);
                    queue.push_back(w);
                }
            }
        }
    }
    let tree_path_to_root = |mut v: usize, out: &mut BitVec| {
        while parent[v].0 != usize::MAX {
            out.flip(parent[v].1);
            v = parent[v].0;
        }
    };

    let mut span = SpanSolver::new(n_edges, g.cell_boundaries.len() + n_edges + 1);
    for b in &g.cell_boundaries {
        span.insert(b);
    }
    let boundary_rank = span.rank();
    let mut local_cycles: Vec<BitVec> = Vec::new();
    for j in 0..n_edges {
        if tree_edge[j] {
            continue;
        }
        let [a, b] = g.edges[j];
        let mut cyc = BitVec::zeros(n_edges);
        cyc.flip(j);
        // XOR of both endpoint-to-root paths = tree path a..b.
        tree_path_to_root(a, &mut cyc);
        tree_path_to_root(b, &mut cyc);
        if span.insert(&cyc) {
            local_cycles.push(cyc);
            if local_cycles.len() == expected {
                break;
            }
        }
    }
    if local_cycles.len() != expected {
        return Err(HomologyError::RankDeficient {
            found: local_cycles.len(),
            expected,
        });
    }
    // Cross-check: the full cycle space has dimension boundary_rank + 2g.
    let cycle_dim = n_edges - g.n_nodes + (0..g.n_nodes).filter(|&v| parent[v].0 == usize::MAX).count();
    if cycle_dim != boundary_rank + expected {
        return Err(HomologyError::RankDeficient {
            found: cycle_dim.saturating_sub(boundary_rank),
            expected,
        });
    }

    let thetas = cohomology_basis(&g);
    if thetas.len() != expected {
        return Err(HomologyError::RankDeficient {
            found: thetas.len(),
            expected,
        });
    }
    let pairing: Vec<BitVec> = thetas
        .iter()
        .map(|th| {
            let mut row = BitVec::zeros(expected);
            for (j, cyc) in local_cycles.iter().enumerate() {
                if th.dot(cyc) {
                    row.set(j, true);
                }
            }
            row
        })
        .collect();
    let mut rank = SpanSolver::new(expected, expected + 1);
    let pairing_rank = pairing.iter().filter(|r| rank.insert(r)).count();
    if pairing_rank != expected {
        return Err(HomologyError::RankDeficient {
            found: pairing_rank,
            expected,
        });
    }

    let cycles = local_cycles
        .iter()
        .map(|cyc| cyc.ones().map(|j| g.primal_edge[j]).collect())
        .collect();
    Ok(LogicalBasis {
        color,
        cycles,
        local_cycles,
        pairing,
    })
}

/// Degree parity check used by tests: a primal edge set is a cycle of
/// T*_c exactly when every node of the dual graph meets it evenly.
pub fn is_cycle(g: &RestrictedDual, local: &BitVec) -> bool {
    let mut deg = vec![0usize; g.n_nodes];
    for j in local.ones() {
        let [a, b] = g.edges[j];
        if a != b {
            deg[a] += 1;
            deg[b] += 1;
        }
    }
    deg.iter().all(|&d| d % 2 == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpgroup::{low_index_normal_search, todd_coxeter, GroupPresentation, SearchConfig};
    use crate::tess::{color_tessellation, extract_tessellation};

    fn cube() -> Tessellation {
        let pres = GroupPresentation::triangle_rotation(4, 3).unwrap();
        let table = todd_coxeter(&pres, &[], 100_000).unwrap();
        let mut t = extract_tessellation(&table, 4, 3).unwrap();
        color_tessellation(&mut t).unwrap();
        t
    }

    /// Smallest orientable {6,3} torus: the hexagonal embedding of K₃,₃
    /// (V=6, E=9, F=3, g=1), reached as the index-18 normal subgroup of
    /// Δ⁺(6,3,2).
    fn k33_torus() -> Tessellation {
        let pres = GroupPresentation::triangle_rotation(6, 3).unwrap();
        let cfg = SearchConfig {
            max_index: 18,
            ..SearchConfig::default()
        };
        let found = low_index_normal_search(&pres, &cfg).unwrap();
        let sub = found
            .iter()
            .find(|s| s.index == 18)
            .expect("index-18 torus quotient");
        let mut t = extract_tessellation(&sub.table, 6, 3).unwrap();
        assert_eq!(
            (t.n_vertices, t.edges.len(), t.faces.len(), t.genus),
            (6, 9, 3, 1)
        );
        color_tessellation(&mut t).unwrap();
        t
    }

    #[test]
    fn sphere_has_no_logicals_and_no_distance() {
        let t = cube();
        let basis = logical_basis(&t).unwrap();
        assert!(basis.cycles.is_empty());
        assert!(matches!(
            embedded_distance(&t),
            Err(HomologyError::TrivialHomology)
        ));
        // All six restricted graphs of a sphere carry trivial H₁.
        for c in 0..3 {
            assert!(min_nontrivial_cycle(&restricted_dual(&t, c).unwrap()).is_none());
            assert!(min_nontrivial_cycle(&cocycle_graph(&t, c).unwrap()).is_none());
        }
    }

    #[test]
    fn torus_distance_matches_bruteforce_on_all_duals() {
        let t = k33_torus();
        for c in 0..3u8 {
            for g in [restricted_dual(&t, c).unwrap(), cocycle_graph(&t, c).unwrap()] {
                let brute = min_nontrivial_cycle_bruteforce(&g);
                let fast = min_nontrivial_cycle(&g).map(|(w, cyc)| {
                    // The witness must be a nontrivial cycle of the weight
                    // claimed.
                    assert!(is_cycle(&g, &cyc));
                    let mut b = SpanSolver::new(g.edges.len(), g.cell_boundaries.len() + 1);
                    for cell in &g.cell_boundaries {
                        b.insert(cell);
                    }
                    assert!(!b.contains(&cyc));
                    assert_eq!(cyc.count_ones(), w);
                    w
                });
                assert_eq!(fast, brute, "color {c} kind {:?}", g.kind);
            }
        }
    }

    #[test]
    fn torus_has_rank_two_basis() {
        let t = k33_torus();
        let d = embedded_distance(&t).unwrap();
        assert!(d.d >= 1);
        for c in 0..3u8 {
            let basis = logical_basis_on(&t, c).unwrap();
            assert_eq!(basis.cycles.len(), 2);
            let g = restricted_dual(&t, c).unwrap();
            let mut b = SpanSolver::new(g.edges.len(), g.cell_boundaries.len() + 3);
            for cell in &g.cell_boundaries {
                b.insert(cell);
            }
            for cyc in &basis.local_cycles {
                assert!(is_cycle(&g, cyc));
                assert!(!b.contains(cyc), "basis cycle is null-homologous");
                assert!(cyc.count_ones() >= d.d);
            }
        }
    }

    #[test]
    fn witness_projects_to_primal_edges_of_one_color() {
        let t = k33_torus();
        let w = embedded_distance(&t).unwrap();
        let ec = t.edge_color.as_ref().unwrap();
        assert_eq!(w.primal_edges.len(), w.d);
        for &e in &w.primal_edges {
            assert_eq!(ec[e], w.color);
        }
    }
}
