//! Level-ℓ fine-graining: semi-hyperbolic codes by subdivision of the
//! dual triangulation.
//!
//! The dual of a colored 3-valent tessellation is a triangulation: one
//! triangle per primal vertex, whose corners are the three (distinctly
//! colored) faces at that vertex and whose sides are the three incident
//! primal edges.  Fine-graining at level ℓ subdivides every dual triangle
//! into ℓ² lattice triangles — inserting ℓ−1 points along each dual edge
//! and (ℓ−1)(ℓ−2)/2 interior points per triangle — and dualizes back:
//! fine vertices are the small triangles (ℓ²·n of them), fine edges the
//! shared triangle sides, fine faces the refined points.
//!
//! Colors are inherited by linear interpolation in barycentric
//! coordinates modulo 3: a lattice point (a, b, c) in a triangle with
//! corner colors (k₀, k₁, k₂) gets color a·k₀ + b·k₁ + c·k₂ (mod 3).
//! Adjacent lattice points differ by a step eᵢ − eⱼ, so their colors
//! differ by kᵢ − kⱼ ≢ 0: the coloring is proper for every ℓ, and shared
//! sides evaluate identically from both flanking triangles because the
//! formula only involves the common corner colors and coordinates.
//! Original faces survive as p-gons (possibly recolored: the corner value
//! is ℓ·k mod 3); subdivision points become hexagons on dual-edge
//! interiors and triangle interiors, so fine faces have size p or 6 and
//! every fine vertex remains 3-valent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tess::{EdgeId, FaceId, TessError, Tessellation, VertexId};

#[derive(Debug, Error)]
pub enum FineGrainError {
    #[error("fine-grain level must be ≥ 1")]
    BadLevel,
    #[error("base tessellation problem: {0}")]
    Base(#[from] TessError),
    #[error("color inheritance produced an improper coloring: {0}")]
    ColorInheritanceFailure(String),
    #[error("subdivision bookkeeping failed: {0}")]
    Invalid(String),
}

/// Where a fine face (refined dual point) came from in the base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefinedPoint {
    /// A base face (dual triangulation corner).
    Face(FaceId),
    /// The k-th of ℓ−1 points along a base edge (dual side), counted from
    /// the bordering face with the smaller id.
    EdgePoint { edge: EdgeId, k: u32 },
    /// An interior lattice point of the dual triangle at a base vertex;
    /// barycentric coordinates are ordered by corner color (0, 1, 2).
    Interior { vertex: VertexId, bary: [u32; 3] },
}

/// Provenance of a fine-grained tessellation, enough to reconstruct
/// coordinates for every fine cell from a base embedding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FineGrainMap {
    pub level: u32,
    /// Fine face id → refined dual point.
    pub face_origin: Vec<RefinedPoint>,
    /// Fine vertex → its three corner refined points, as fine face ids.
    pub vertex_corners: Vec<[usize; 3]>,
}

/// Subdivides `t` at level `level`.  Level 1 returns the tessellation
/// unchanged.
pub fn fine_grain(
    t: &Tessellation,
    level: u32,
) -> Result<(Tessellation, FineGrainMap), FineGrainError> {
    if level == 0 {
        return Err(FineGrainError::BadLevel);
    }
    let fc = t
        .face_color
        .as_ref()
        .ok_or(FineGrainError::Base(TessError::Uncolored))?;
    if level == 1 {
        let map = FineGrainMap {
            level: 1,
            face_origin: (0..t.faces.len()).map(RefinedPoint::Face).collect(),
            vertex_corners: t.face_at_vertex_by_color()?,
        };
        return Ok((t.clone(), map));
    }
    let l = level as usize;
    let edge_at = t.edge_at_vertex_by_color()?;
    let face_at = t.face_at_vertex_by_color()?;

    // Refined points, enumerated faces-first, then edge points in (edge, k)
    // order, then interior points in (vertex, a, b) order.
    let n_faces = t.faces.len();
    let n_edges = t.edges.len();
    let per_edge = l - 1;
    let per_tri = (l - 1) * (l - 2) / 2;
    let n_points = n_faces + n_edges * per_edge + t.n_vertices * per_tri;

    let mut face_origin = Vec::with_capacity(n_points);
    let mut point_color = Vec::with_capacity(n_points);
    for f in 0..n_faces {
        face_origin.push(RefinedPoint::Face(f));
        point_color.push(((level * fc[f] as u32) % 3) as u8);
    }
    for e in 0..n_edges {
        let [f1, f2] = t.edge_faces[e];
        let (lo, hi) = (f1.min(f2), f1.max(f2));
        for k in 1..=per_edge as u32 {
            face_origin.push(RefinedPoint::EdgePoint { edge: e, k });
            point_color
                .push((((level - k) * fc[lo] as u32 + k * fc[hi] as u32) % 3) as u8);
        }
    }
    // Interior index arithmetic: (a, b) with a, b ≥ 1, a + b ≤ ℓ − 1,
    // enumerated lexicographically.
    let interior_idx = |a: usize, b: usize| -> usize {
        // points before row a: sum_{a'=1}^{a-1} (l - 1 - a')
        let before: usize = (1..a).map(|ap| l - 1 - ap).sum();
        before + (b - 1)
    };
    for v in 0..t.n_vertices {
        for a in 1..=l.saturating_sub(2) {
            for b in 1..=(l - 1 - a) {
                let c = l - a - b;
                face_origin.push(RefinedPoint::Interior {
                    vertex: v,
                    bary: [a as u32, b as u32, c as u32],
                });
                // Corner colors are (0, 1, 2) in canonical corner order.
                point_color.push(((b + 2 * c) % 3) as u8);
            }
        }
    }
    debug_assert_eq!(face_origin.len(), n_points);

    // Lattice-point lookup inside the dual triangle at base vertex v,
    // corners ordered by color.
    let point_at = |v: usize, a: usize, b: usize, c: usize| -> usize {
        let corners = face_at[v];
        match (a, b, c) {
            (_, 0, 0) => corners[0],
            (0, _, 0) => corners[1],
            (0, 0, _) => corners[2],
            (0, _, _) => {
                // side between corners 1 and 2 = the color-0 edge at v
                let e = edge_at[v][0];
                let (f1, f2) = (corners[1], corners[2]);
                let k = if f1 < f2 { c } else { b };
                n_faces + e * per_edge + (k - 1)
            }
            (_, 0, _) => {
                let e = edge_at[v][1];
                let (f1, f2) = (corners[0], corners[2]);
                let k = if f1 < f2 { c } else { a };
                n_faces + e * per_edge + (k - 1)
            }
            (_, _, 0) => {
                let e = edge_at[v][2];
                let (f1, f2) = (corners[0], corners[1]);
                let k = if f1 < f2 { b } else { a };
                n_faces + e * per_edge + (k - 1)
            }
            _ => n_faces + n_edges * per_edge + v * per_tri + interior_idx(a, b),
        }
    };

    // Fine vertices: ℓ² small triangles per base vertex, upward lattice
    // triangles first, then downward, each in (a, b) lexicographic order.
    let n_fine = t.n_vertices * l * l;
    let mut corner_gids: Vec<[usize; 3]> = Vec::with_capacity(n_fine);
    for v in 0..t.n_vertices {
        for a in 0..l {
            for b in 0..(l - a) {
                let c = l - 1 - a - b;
                corner_gids.push([
                    point_at(v, a + 1, b, c),
                    point_at(v, a, b + 1, c),
                    point_at(v, a, b, c + 1),
                ]);
            }
        }
        for a in 0..l.saturating_sub(1) {
            for b in 0..(l - 1 - a) {
                let c = l - 2 - a - b;
                corner_gids.push([
                    point_at(v, a, b + 1, c + 1),
                    point_at(v, a + 1, b, c + 1),
                    point_at(v, a + 1, b + 1, c),
                ]);
            }
        }
    }
    if corner_gids.len() != n_fine {
        return Err(FineGrainError::Invalid(format!(
            "triangle count {} != ℓ²·V = {}",
            corner_gids.len(),
            n_fine
        )));
    }

    // Fine edges: shared triangle sides, keyed by refined point pair.
    let mut side_map: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
    for (tri, corners) in corner_gids.iter().enumerate() {
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            let (x, y) = (corners[i], corners[j]);
            side_map
                .entry([x.min(y), x.max(y)])
                .or_default()
                .push(tri);
        }
    }
    let mut edges = Vec::with_capacity(side_map.len());
    let mut edge_faces = Vec::with_capacity(side_map.len());
    for (side, tris) in &side_map {
        if tris.len() != 2 {
            return Err(FineGrainError::Invalid(format!(
                "refined side {side:?} lies on {} triangles, expected 2",
                tris.len()
            )));
        }
        edges.push([tris[0], tris[1]]);
        edge_faces.push([side[0], side[1]]);
    }

    // Fine faces: rotation of triangles and sides around each refined
    // point.  Each incident triangle carries exactly two incident sides.
    let mut incident_edges: Vec<Vec<usize>> = vec![Vec::new(); n_points];
    for (e, &[u, w]) in edge_faces.iter().enumerate() {
        incident_edges[u].push(e);
        incident_edges[w].push(e);
    }
    let mut faces = Vec::with_capacity(n_points);
    let mut face_vertices = Vec::with_capacity(n_points);
    for u in 0..n_points {
        let inc = &incident_edges[u];
        let mut tri_sides: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &e in inc {
            for &tri in [edges[e][0], edges[e][1]].iter() {
                tri_sides.entry(tri).or_default().push(e);
            }
        }
        for (tri, sides) in &tri_sides {
            if sides.len() != 2 {
                return Err(FineGrainError::Invalid(format!(
                    "triangle {tri} meets point {u} on {} sides",
                    sides.len()
                )));
            }
        }
        // Walk: start at the smallest incident edge, toward its smaller
        // triangle.
        let e0 = *inc.iter().min().ok_or_else(|| {
            FineGrainError::Invalid(format!("refined point {u} has no incident side"))
        })?;
        let start_tri = edges[e0][0].min(edges[e0][1]);
        let mut walk_edges = vec![e0];
        let mut walk_tris = vec![start_tri];
        loop {
            let cur_e = *walk_edges.last().unwrap();
            let cur_t = *walk_tris.last().unwrap();
            let next_t = if edges[cur_e][0] == cur_t {
                edges[cur_e][1]
            } else {
                edges[cur_e][0]
            };
            if next_t == start_tri {
                break;
            }
            walk_tris.push(next_t);
            let pair = &tri_sides[&next_t];
            let next_e = if pair[0] == cur_e { pair[1] } else { pair[0] };
            walk_edges.push(next_e);
        }
        if walk_edges.len() != inc.len() || walk_tris.len() != inc.len() {
            return Err(FineGrainError::Invalid(format!(
                "rotation around point {u} is not a single cycle"
            )));
        }
        // Align: faces[u][j] joins face_vertices[u][j] and [j+1].
        // walk_edges[j] joins walk_tris[j] and walk_tris[j+1]; the final
        // edge closes back to walk_tris[0].
        faces.push(walk_edges);
        face_vertices.push(walk_tris);
    }

    // Edge colors from the refined point coloring; properness is the
    // inheritance invariant.
    let mut edge_color = Vec::with_capacity(edges.len());
    for &[u, w] in &edge_faces {
        let (cu, cw) = (point_color[u], point_color[w]);
        if cu == cw {
            return Err(FineGrainError::ColorInheritanceFailure(format!(
                "refined points {u} and {w} share color {cu} across a side"
            )));
        }
        edge_color.push(3 - cu - cw);
    }

    let chi = n_fine as i64 - edges.len() as i64 + n_points as i64;
    if chi != 2 - 2 * t.genus as i64 {
        return Err(FineGrainError::Invalid(format!(
            "Euler characteristic {chi} changed from base {}",
            2 - 2 * t.genus as i64
        )));
    }

    let fine = Tessellation {
        p: t.p,
        q: t.q,
        n_vertices: n_fine,
        edges,
        faces,
        face_vertices,
        edge_faces,
        genus: t.genus,
        face_color: Some(point_color),
        edge_color: Some(edge_color),
        flags: None,
    };
    fine.check_consistency().map_err(FineGrainError::Base)?;
    Ok((
        fine,
        FineGrainMap {
            level,
            face_origin,
            vertex_corners: corner_gids,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpgroup::{
        low_index_normal_search, todd_coxeter, GroupPresentation, SearchConfig,
    };
    use crate::homology::{
        cocycle_graph, embedded_distance, min_nontrivial_cycle, min_nontrivial_cycle_bruteforce,
        restricted_dual,
    };
    use crate::tess::{color_tessellation, extract_tessellation};

    fn cube() -> Tessellation {
        let pres = GroupPresentation::triangle_rotation(4, 3).unwrap();
        let table = todd_coxeter(&pres, &[], 100_000).unwrap();
        let mut t = extract_tessellation(&table, 4, 3).unwrap();
        color_tessellation(&mut t).unwrap();
        t
    }

    fn k33_torus() -> Tessellation {
        let pres = GroupPresentation::triangle_rotation(6, 3).unwrap();
        let cfg = SearchConfig { max_index: 18, ..SearchConfig::default() };
        let found = low_index_normal_search(&pres, &cfg).unwrap();
        let sub = found.iter().find(|s| s.index == 18).unwrap();
        let mut t = extract_tessellation(&sub.table, 6, 3).unwrap();
        color_tessellation(&mut t).unwrap();
        t
    }

    #[test]
    fn level_one_is_identity() {
        let t = cube();
        let (fine, map) = fine_grain(&t, 1).unwrap();
        assert_eq!(fine, t);
        assert_eq!(map.face_origin.len(), t.faces.len());
    }

    #[test]
    fn cube_counts_scale_quadratically() {
        let t = cube();
        for level in 2..=5u32 {
            let l = level as usize;
            let (fine, map) = fine_grain(&t, level).unwrap();
            fine.check_consistency().unwrap();
            assert_eq!(fine.n_vertices, l * l * t.n_vertices);
            assert_eq!(fine.genus, 0);
            assert_eq!(
                fine.faces.len(),
                t.faces.len()
                    + t.edges.len() * (l - 1)
                    + t.n_vertices * (l - 1) * (l - 2) / 2
            );
            assert_eq!(2 * fine.edges.len(), 3 * fine.n_vertices);
            assert_eq!(map.face_origin.len(), fine.faces.len());
            // Original faces stay p-gons; subdivision faces are hexagons.
            for (f, origin) in map.face_origin.iter().enumerate() {
                match origin {
                    RefinedPoint::Face(_) => assert_eq!(fine.faces[f].len(), t.p as usize),
                    _ => assert_eq!(fine.faces[f].len(), 6),
                }
            }
        }
    }

    #[test]
    fn coloring_stays_proper_and_three_colored_per_vertex() {
        for base in [cube(), k33_torus()] {
            for level in 2..=4u32 {
                let (fine, _) = fine_grain(&base, level).unwrap();
                let ec = fine.edge_color.as_ref().unwrap();
                let fc = fine.face_color.as_ref().unwrap();
                for &[f1, f2] in &fine.edge_faces {
                    assert_ne!(fc[f1], fc[f2]);
                }
                for edges in fine.vertex_edges() {
                    let mut seen: Vec<u8> = edges.iter().map(|&e| ec[e]).collect();
                    seen.sort_unstable();
                    assert_eq!(seen, vec![0, 1, 2]);
                }
                // Fine-grained tessellations still feed the homology
                // machinery (color incidence must stay one-of-each).
                fine.edge_at_vertex_by_color().unwrap();
                fine.face_at_vertex_by_color().unwrap();
            }
        }
    }

    #[test]
    fn torus_level_two_distance_matches_bruteforce() {
        let t = k33_torus();
        let (fine, _) = fine_grain(&t, 2).unwrap();
        assert_eq!(fine.genus, 1);
        for c in 0..3u8 {
            for g in [restricted_dual(&fine, c).unwrap(), cocycle_graph(&fine, c).unwrap()] {
                let brute = min_nontrivial_cycle_bruteforce(&g);
                let fast = min_nontrivial_cycle(&g).map(|(w, _)| w);
                assert_eq!(fast, brute, "color {c} kind {:?}", g.kind);
            }
        }
        // Subdividing cannot shrink the embedded distance below the base's.
        let base_d = embedded_distance(&t).unwrap().d;
        let fine_d = embedded_distance(&fine).unwrap().d;
        assert!(fine_d >= base_d);
    }
}
