//! Combinatorial tessellations of closed orientable surfaces.
//!
//! A coset table for a torsion-free normal subgroup N of the rotation
//! triangle group Δ⁺(p, q, 2) is the flag set of a {p, q} tessellation of
//! the quotient surface H²/N.  Each coset ("flag") is an incident
//! (vertex, edge, face) triple; the cells themselves are recovered as
//! orbits of the generator cyclic subgroups acting on flags by right
//! multiplication:
//!
//! * vertices — orbits of β (rotation by 2π/q about a vertex),
//! * edges    — orbits of α (rotation by π about an edge midpoint),
//! * faces    — orbits of γ (rotation by 2π/p about a face centre).
//!
//! Torsion-freeness is equivalent to every orbit having the full size
//! (2 for α, q for β, p for γ); smaller orbits mean the subgroup caught a
//! conjugate of a generator power and the quotient is an orbifold, not a
//! surface.  Extraction rejects those tables, as well as degenerate maps
//! with self-loops or doubled edges.
//!
//! Faces and edges are 3-colored so that the color classes of edges form
//! perfect matchings: faces get colors {0, 1, 2} with adjacent faces
//! distinct (deterministic backtracking, lowest face id first), and each
//! edge takes the unique color missing from its two bordering faces.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::fpgroup::CosetTable;

pub type VertexId = usize;
pub type EdgeId = usize;
pub type FaceId = usize;

#[derive(Debug, Error)]
pub enum TessError {
    #[error("torsion in quotient: a <{generator}> flag orbit has size {got}, expected {expected}")]
    MalformedTable {
        generator: char,
        got: usize,
        expected: usize,
    },
    #[error("degenerate map: edge {edge} is a self-loop at vertex {vertex}")]
    SelfLoop { edge: EdgeId, vertex: VertexId },
    #[error("degenerate map: edges {first} and {second} both join vertices {v1} and {v2}")]
    MultiEdge {
        first: EdgeId,
        second: EdgeId,
        v1: VertexId,
        v2: VertexId,
    },
    #[error("Euler characteristic {chi} is odd; surface is non-orientable or table is corrupt")]
    OddEuler { chi: i64 },
    #[error("face adjacency graph admits no proper 3-coloring")]
    NotThreeColorable,
    #[error("operation requires colors; call color_faces/color_edges first")]
    Uncolored,
    #[error("invalid tessellation: {0}")]
    Invalid(String),
}

/// Flag-to-cell maps and generator actions kept from extraction;
/// fine-grained tessellations, which are not flag quotients, carry `None`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FlagMaps {
    pub vertex_of_flag: Vec<VertexId>,
    pub edge_of_flag: Vec<EdgeId>,
    pub face_of_flag: Vec<FaceId>,
    /// α action (fixes the flag's edge).
    pub alpha: Vec<usize>,
    /// β action (fixes the flag's vertex).
    pub beta: Vec<usize>,
    /// γ action (fixes the flag's face).
    pub gamma: Vec<usize>,
}

/// A {p, q} map on a closed orientable surface.
///
/// `faces[f]` lists boundary edges in rotation order around the face and
/// `face_vertices[f]` the corresponding corner walk, aligned so that
/// `faces[f][j]` joins `face_vertices[f][j]` and `face_vertices[f][(j+1) % p]`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Tessellation {
    pub p: u32,
    pub q: u32,
    pub n_vertices: usize,
    pub edges: Vec<[VertexId; 2]>,
    pub faces: Vec<Vec<EdgeId>>,
    pub face_vertices: Vec<Vec<VertexId>>,
    pub edge_faces: Vec<[FaceId; 2]>,
    pub genus: usize,
    pub face_color: Option<Vec<u8>>,
    pub edge_color: Option<Vec<u8>>,
    pub flags: Option<FlagMaps>,
}

/// Orbit partition of `0..n` under the permutation `perm`, with orbit ids
/// assigned in order of each orbit's smallest element.
fn orbits(perm: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = perm.len();
    let mut orbit_of = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if orbit_of[start] != usize::MAX {
            continue;
        }
        let id = members.len();
        let mut orbit = Vec::new();
        let mut x = start;
        loop {
            orbit_of[x] = id;
            orbit.push(x);
            x = perm[x];
            if x == start {
                break;
            }
        }
        members.push(orbit);
    }
    (orbit_of, members)
}

/// Builds the tessellation whose flags are the cosets of `table`, read as
/// a quotient of Δ⁺(p, q, 2).
pub fn extract_tessellation(table: &CosetTable, p: u32, q: u32) -> Result<Tessellation, TessError> {
    let alpha = table.gen_permutation(1);
    let beta = table.gen_permutation(2);
    let gamma = table.gen_permutation(3);

    let (vertex_of, vertex_members) = orbits(&beta);
    let (edge_of, edge_members) = orbits(&alpha);
    let (face_of, face_members) = orbits(&gamma);

    for (gen, members, expected) in [
        ('\u{3b1}', &edge_members, 2usize),
        ('\u{3b2}', &vertex_members, q as usize),
        ('\u{3b3}', &face_members, p as usize),
    ] {
        if let Some(orb) = members.iter().find(|o| o.len() != expected) {
            return Err(TessError::MalformedTable {
                generator: gen,
                got: orb.len(),
                expected,
            });
        }
    }

    let n_vertices = vertex_members.len();

    // Edge endpoints and bordering faces come from the two flags of each
    // α-orbit: α fixes the edge while swapping its vertex and its face.
    let mut edges = Vec::with_capacity(edge_members.len());
    let mut edge_faces = Vec::with_capacity(edge_members.len());
    let mut seen_pairs: HashMap<[VertexId; 2], EdgeId> = HashMap::new();
    for (e, orb) in edge_members.iter().enumerate() {
        let (c, ca) = (orb[0], orb[1]);
        let (v1, v2) = (vertex_of[c], vertex_of[ca]);
        if v1 == v2 {
            return Err(TessError::SelfLoop { edge: e, vertex: v1 });
        }
        let key = [v1.min(v2), v1.max(v2)];
        if let Some(&first) = seen_pairs.get(&key) {
            return Err(TessError::MultiEdge {
                first,
                second: e,
                v1: key[0],
                v2: key[1],
            });
        }
        seen_pairs.insert(key, e);
        edges.push([v1, v2]);
        edge_faces.push([face_of[c], face_of[ca]]);
    }

    // Face boundaries in γ-orbit order; a proper face visits p distinct
    // edges, and consecutive boundary edges share exactly one vertex,
    // which pins the corner walk.
    let mut faces = Vec::with_capacity(face_members.len());
    let mut face_vertices = Vec::with_capacity(face_members.len());
    for orb in &face_members {
        let boundary: Vec<EdgeId> = orb.iter().map(|&c| edge_of[c]).collect();
        let mut sorted = boundary.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != boundary.len() {
            return Err(TessError::Invalid(
                "face boundary revisits an edge".to_string(),
            ));
        }
        let len = boundary.len();
        let mut walk = Vec::with_capacity(len);
        for j in 0..len {
            let prev = edges[boundary[(j + len - 1) % len]];
            let cur = edges[boundary[j]];
            let shared = cur
                .iter()
                .copied()
                .find(|v| prev.contains(v))
                .ok_or_else(|| {
                    TessError::Invalid("consecutive boundary edges share no vertex".to_string())
                })?;
            walk.push(shared);
        }
        faces.push(boundary);
        face_vertices.push(walk);
    }

    let chi = n_vertices as i64 - edges.len() as i64 + faces.len() as i64;
    if (2 - chi) % 2 != 0 {
        return Err(TessError::OddEuler { chi });
    }
    let genus_x2 = 2 - chi;
    if genus_x2 < 0 {
        return Err(TessError::Invalid(format!(
            "Euler characteristic {chi} exceeds 2"
        )));
    }

    Ok(Tessellation {
        p,
        q,
        n_vertices,
        edges,
        faces,
        face_vertices,
        edge_faces,
        genus: (genus_x2 / 2) as usize,
        face_color: None,
        edge_color: None,
        flags: Some(FlagMaps {
            vertex_of_flag: vertex_of,
            edge_of_flag: edge_of,
            face_of_flag: face_of,
            alpha,
            beta,
            gamma,
        }),
    })
}

/// One named consistency check inside a [`ValidationReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Outcome of [`validate_parameters`]: individual named checks plus the
/// overall verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Checks the counting identities a {p, q} map of genus g must satisfy:
/// qV = 2E = pF, the Euler relation, the closed-form face count
/// F = 4q(g−1)/(pq−2p−2q), and hyperbolicity (p−2)(q−2) > 4.
pub fn validate_parameters(t: &Tessellation) -> ValidationReport {
    let (p, q) = (t.p as i64, t.q as i64);
    let (v, e, f) = (
        t.n_vertices as i64,
        t.edges.len() as i64,
        t.faces.len() as i64,
    );
    let g = t.genus as i64;
    let mut checks = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        checks.push(Check {
            name: name.to_string(),
            pass,
            detail,
        });
    };

    push(
        "regularity",
        q * v == 2 * e && p * f == 2 * e,
        format!("qV={} 2E={} pF={}", q * v, 2 * e, p * f),
    );
    push(
        "euler",
        v - e + f == 2 - 2 * g,
        format!("chi={} 2-2g={}", v - e + f, 2 - 2 * g),
    );
    let denom = p * q - 2 * p - 2 * q;
    let face_formula = denom != 0 && 4 * q * (g - 1) % denom == 0 && 4 * q * (g - 1) / denom == f;
    push(
        "face-count",
        face_formula,
        format!("F={} 4q(g-1)/(pq-2p-2q)={}/{}", f, 4 * q * (g - 1), denom),
    );
    push(
        "hyperbolic",
        (p - 2) * (q - 2) > 4,
        format!("(p-2)(q-2)={}", (p - 2) * (q - 2)),
    );
    ValidationReport { checks }
}

/// Properly 3-colors the faces, writing `face_color`.
///
/// Deterministic: faces are colored in ascending id order, trying colors
/// in ascending order, so face 0 always receives color 0 and the result
/// is the lexicographically least proper coloring.
pub fn color_faces(t: &mut Tessellation) -> Result<(), TessError> {
    let n_faces = t.faces.len();
    let mut adj = vec![Vec::new(); n_faces];
    for &[f1, f2] in &t.edge_faces {
        if f1 == f2 {
            // A face bordering itself can never be properly colored.
            return Err(TessError::NotThreeColorable);
        }
        adj[f1].push(f2);
        adj[f2].push(f1);
    }
    for nbrs in &mut adj {
        nbrs.sort_unstable();
        nbrs.dedup();
    }

    let mut color = vec![u8::MAX; n_faces];
    let mut face = 0usize;
    let mut next_try = vec![0u8; n_faces];
    while face < n_faces {
        let mut placed = false;
        for c in next_try[face]..3 {
            if adj[face]
                .iter()
                .all(|&nb| color[nb] == u8::MAX || color[nb] != c)
            {
                color[face] = c;
                next_try[face] = c + 1;
                placed = true;
                break;
            }
        }
        if placed {
            face += 1;
        } else {
            // Backtrack to the previous face and advance its color.
            next_try[face] = 0;
            color[face] = u8::MAX;
            if face == 0 {
                return Err(TessError::NotThreeColorable);
            }
            face -= 1;
            color[face] = u8::MAX;
        }
    }
    t.face_color = Some(color);
    Ok(())
}

/// Colors each edge with the unique color missing from its two bordering
/// faces: color(e) = 3 − color(f₁) − color(f₂).  Requires `face_color`.
pub fn color_edges(t: &mut Tessellation) -> Result<(), TessError> {
    let fc = t.face_color.as_ref().ok_or(TessError::Uncolored)?;
    let colors = t
        .edge_faces
        .iter()
        .map(|&[f1, f2]| 3 - fc[f1] - fc[f2])
        .collect();
    t.edge_color = Some(colors);
    Ok(())
}

/// Convenience: face-color then edge-color in one call.
pub fn color_tessellation(t: &mut Tessellation) -> Result<(), TessError> {
    color_faces(t)?;
    color_edges(t)
}

impl Tessellation {
    /// Edges incident to each vertex, in ascending edge id order.
    pub fn vertex_edges(&self) -> Vec<Vec<EdgeId>> {
        let mut out = vec![Vec::new(); self.n_vertices];
        for (e, &[v1, v2]) in self.edges.iter().enumerate() {
            out[v1].push(e);
            out[v2].push(e);
        }
        out
    }

    /// For each vertex, the unique incident edge of each color.  Errors if
    /// a vertex misses a color or sees one twice (broken matching).
    pub fn edge_at_vertex_by_color(&self) -> Result<Vec<[EdgeId; 3]>, TessError> {
        let ec = self.edge_color.as_ref().ok_or(TessError::Uncolored)?;
        let mut out = vec![[usize::MAX; 3]; self.n_vertices];
        for (e, &[v1, v2]) in self.edges.iter().enumerate() {
            for v in [v1, v2] {
                let slot = &mut out[v][ec[e] as usize];
                if *slot != usize::MAX {
                    return Err(TessError::Invalid(format!(
                        "vertex {v} has two edges of color {}",
                        ec[e]
                    )));
                }
                *slot = e;
            }
        }
        if let Some(v) = (0..self.n_vertices).find(|&v| out[v].contains(&usize::MAX)) {
            return Err(TessError::Invalid(format!(
                "vertex {v} is missing an edge color"
            )));
        }
        Ok(out)
    }

    /// For each vertex, the unique incident face of each color.
    pub fn face_at_vertex_by_color(&self) -> Result<Vec<[FaceId; 3]>, TessError> {
        let fc = self.face_color.as_ref().ok_or(TessError::Uncolored)?;
        let mut out = vec![[usize::MAX; 3]; self.n_vertices];
        for (f, walk) in self.face_vertices.iter().enumerate() {
            for &v in walk {
                let slot = &mut out[v][fc[f] as usize];
                if *slot != usize::MAX {
                    return Err(TessError::Invalid(format!(
                        "vertex {v} has two faces of color {}",
                        fc[f]
                    )));
                }
                *slot = f;
            }
        }
        if let Some(v) = (0..self.n_vertices).find(|&v| out[v].contains(&usize::MAX)) {
            return Err(TessError::Invalid(format!(
                "vertex {v} is missing a face color"
            )));
        }
        Ok(out)
    }

    /// Edge ids of one color class.  Requires `edge_color`.
    pub fn edges_of_color(&self, c: u8) -> Result<Vec<EdgeId>, TessError> {
        let ec = self.edge_color.as_ref().ok_or(TessError::Uncolored)?;
        Ok((0..self.edges.len()).filter(|&e| ec[e] == c).collect())
    }

    /// Face ids of one color class.  Requires `face_color`.
    pub fn faces_of_color(&self, c: u8) -> Result<Vec<FaceId>, TessError> {
        let fc = self.face_color.as_ref().ok_or(TessError::Uncolored)?;
        Ok((0..self.faces.len()).filter(|&f| fc[f] == c).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tessellation serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, TessError> {
        let t: Tessellation =
            serde_json::from_str(s).map_err(|e| TessError::Invalid(e.to_string()))?;
        t.check_consistency()?;
        Ok(t)
    }

    /// Structural sanity of the incidence data (used after deserialization
    /// and in tests).
    pub fn check_consistency(&self) -> Result<(), TessError> {
        let bad = |m: String| Err(TessError::Invalid(m));
        if self.face_vertices.len() != self.faces.len() {
            return bad("face_vertices length mismatch".to_string());
        }
        if self.edge_faces.len() != self.edges.len() {
            return bad("edge_faces length mismatch".to_string());
        }
        let mut edge_face_count = vec![0usize; self.edges.len()];
        for (f, boundary) in self.faces.iter().enumerate() {
            let walk = &self.face_vertices[f];
            if walk.len() != boundary.len() {
                return bad(format!("face {f}: walk/boundary length mismatch"));
            }
            let len = boundary.len();
            for j in 0..len {
                let e = boundary[j];
                if e >= self.edges.len() {
                    return bad(format!("face {f}: edge id {e} out of range"));
                }
                edge_face_count[e] += 1;
                let mut want = [walk[j], walk[(j + 1) % len]];
                want.sort_unstable();
                let mut got = self.edges[e];
                got.sort_unstable();
                if want != got {
                    return bad(format!("face {f}: edge {e} does not match corner walk"));
                }
                if !self.edge_faces[e].contains(&f) {
                    return bad(format!("edge {e} missing face {f} in edge_faces"));
                }
            }
        }
        if edge_face_count.iter().any(|&c| c != 2) {
            return bad("an edge does not lie on exactly two face boundaries".to_string());
        }
        for &[v1, v2] in &self.edges {
            if v1 >= self.n_vertices || v2 >= self.n_vertices {
                return bad("edge endpoint out of range".to_string());
            }
        }
        if let Some(fc) = &self.face_color {
            if fc.len() != self.faces.len() {
                return bad("face_color length mismatch".to_string());
            }
            for &[f1, f2] in &self.edge_faces {
                if f1 != f2 && fc[f1] == fc[f2] {
                    return bad("adjacent faces share a color".to_string());
                }
            }
        }
        if let Some(ec) = &self.edge_color {
            if ec.len() != self.edges.len() {
                return bad("edge_color length mismatch".to_string());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpgroup::{todd_coxeter, GroupPresentation};

    fn full_group_tessellation(p: u32, q: u32) -> Tessellation {
        let pres = GroupPresentation::triangle_rotation(p, q).unwrap();
        let table = todd_coxeter(&pres, &[], 100_000).unwrap();
        extract_tessellation(&table, p, q).unwrap()
    }

    #[test]
    fn cube_from_full_quotient() {
        // Δ⁺(4,3,2) has order 24 and acts freely on its own flags; the
        // quotient map is the cube: V=8, E=12, F=6, genus 0.
        let t = full_group_tessellation(4, 3);
        assert_eq!(
            (t.n_vertices, t.edges.len(), t.faces.len(), t.genus),
            (8, 12, 6, 0)
        );
        t.check_consistency().unwrap();
        let rep = validate_parameters(&t);
        let by_name = |n: &str| rep.checks.iter().find(|c| c.name == n).unwrap().pass;
        assert!(by_name("regularity"));
        assert!(by_name("euler"));
        assert!(by_name("face-count"));
        assert!(!by_name("hyperbolic")); // the cube is spherical
    }

    #[test]
    fn tetrahedron_extracts_but_is_not_three_colorable() {
        // Δ⁺(3,3,2) ≅ A₄: the tetrahedron.  Every pair of its four faces
        // is adjacent, so face 3-coloring must fail.
        let mut t = full_group_tessellation(3, 3);
        assert_eq!(
            (t.n_vertices, t.edges.len(), t.faces.len(), t.genus),
            (4, 6, 4, 0)
        );
        assert!(matches!(
            color_faces(&mut t),
            Err(TessError::NotThreeColorable)
        ));
    }

    #[test]
    fn cube_colors_form_perfect_matchings() {
        let mut t = full_group_tessellation(4, 3);
        color_tessellation(&mut t).unwrap();
        t.check_consistency().unwrap();
        let fc = t.face_color.as_ref().unwrap();
        assert_eq!(fc[0], 0); // lowest-id face gets color 0
        for c in 0..3u8 {
            assert_eq!(t.faces_of_color(c).unwrap().len(), 2);
            // Each color class of edges covers every vertex exactly once.
            let class = t.edges_of_color(c).unwrap();
            assert_eq!(class.len(), t.n_vertices / 2);
            let mut hit = vec![false; t.n_vertices];
            for e in class {
                for v in t.edges[e] {
                    assert!(!hit[v], "vertex covered twice by color {c}");
                    hit[v] = true;
                }
            }
            assert!(hit.iter().all(|&h| h));
        }
        // Every vertex sees all three edge colors.
        let ec = t.edge_color.as_ref().unwrap();
        for edges in t.vertex_edges() {
            let mut seen: Vec<u8> = edges.iter().map(|&e| ec[e]).collect();
            seen.sort_unstable();
            assert_eq!(seen, vec![0, 1, 2]);
        }
    }

    #[test]
    fn wrong_p_reports_torsion() {
        let pres = GroupPresentation::triangle_rotation(4, 3).unwrap();
        let table = todd_coxeter(&pres, &[], 100_000).unwrap();
        // Reading the cube's flags as a {8,3} quotient leaves γ-orbits of
        // size 4 < 8: an orbifold point.
        let err = extract_tessellation(&table, 8, 3).unwrap_err();
        assert!(matches!(
            err,
            TessError::MalformedTable {
                generator: '\u{3b3}',
                got: 4,
                expected: 8
            }
        ));
    }

    #[test]
    fn json_round_trip() {
        let mut t = full_group_tessellation(4, 3);
        color_tessellation(&mut t).unwrap();
        let s = t.to_json();
        let back = Tessellation::from_json(&s).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn face_walks_are_aligned_with_boundaries() {
        let t = full_group_tessellation(4, 3);
        for (f, boundary) in t.faces.iter().enumerate() {
            let walk = &t.face_vertices[f];
            let len = boundary.len();
            assert_eq!(len, t.p as usize);
            for j in 0..len {
                let mut want = [walk[j], walk[(j + 1) % len]];
                want.sort_unstable();
                let mut got = t.edges[boundary[j]];
                got.sort_unstable();
                assert_eq!(want, got);
            }
        }
    }
}
