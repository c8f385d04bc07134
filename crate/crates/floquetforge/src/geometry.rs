//! Poincaré-disk embedding: hyperbolic distance, Möbius maps, geodesic
//! interpolation, and a best-effort disk layout of {p, q} tessellations.
//!
//! The layout assigns each flag an isometry of the disk by breadth-first
//! search over the flag maps: the fundamental triangle has its face corner
//! at the origin, its vertex corner on the positive real axis, and the
//! generators act as double reflections in the triangle sides, so the
//! defining relations α² = β^q = γ^p = αβγ = 1 hold by construction.
//! A closed surface cannot embed injectively in the disk, so images wrap
//! around; everything here is advisory and never feeds back into the
//! combinatorial code structure.

use num_complex::Complex64;
use thiserror::Error;

use crate::finegrain::{FineGrainMap, RefinedPoint};
use crate::tess::Tessellation;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point ({0}, {1}) lies outside the open unit disk")]
    DomainError(f64, f64),
    #[error("{{{p}, {q}}} is not hyperbolic: (p-2)(q-2) must exceed 4")]
    NotHyperbolic { p: u32, q: u32 },
    #[error("tessellation carries no flag maps (fine-grained or deserialized)")]
    MissingFlags,
    #[error("invalid geometry input: {0}")]
    Invalid(String),
}

/// Strictness margin for disk membership and the clamp radius for
/// near-boundary positions.
const DISK_TOL: f64 = 1e-12;
const CLAMP_RADIUS: f64 = 1.0 - 1e-9;

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPoint {
    pub z: Complex64,
}

impl DiskPoint {
    pub fn new(re: f64, im: f64) -> Result<Self, GeometryError> {
        Self::from_complex(Complex64::new(re, im))
    }

    pub fn from_complex(z: Complex64) -> Result<Self, GeometryError> {
        if z.norm() >= 1.0 - DISK_TOL || !z.is_finite() {
            return Err(GeometryError::DomainError(z.re, z.im));
        }
        Ok(DiskPoint { z })
    }

    pub fn origin() -> Self {
        DiskPoint {
            z: Complex64::new(0.0, 0.0),
        }
    }
}

/// dist(z₁, z₂) = 2 arctanh(|z₁ − z₂| / |1 − z₁ z̄₂|).
pub fn hyperbolic_distance(z1: DiskPoint, z2: DiskPoint) -> f64 {
    let num = (z1.z - z2.z).norm();
    let den = (Complex64::new(1.0, 0.0) - z1.z * z2.z.conj()).norm();
    2.0 * (num / den).atanh()
}

/// An isometry of the disk: z ↦ (az + b)/(cz + d), optionally precomposed
/// with complex conjugation (orientation-reversing maps arise as mirror
/// reflections while building the triangle generators).
#[derive(Debug, Clone, Copy)]
pub struct MobiusMap {
    m: [Complex64; 4],
    conj: bool,
}

impl MobiusMap {
    pub fn identity() -> Self {
        MobiusMap {
            m: [
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
            conj: false,
        }
    }

    /// φ(z) = (z − z₁)/(1 − z̄₁ z): sends z₁ to the origin.
    pub fn to_origin(z1: DiskPoint) -> Self {
        MobiusMap {
            m: [
                Complex64::new(1.0, 0.0),
                -z1.z,
                -z1.z.conj(),
                Complex64::new(1.0, 0.0),
            ],
            conj: false,
        }
    }

    /// Rotation by `theta` about the origin.
    pub fn rotation(theta: f64) -> Self {
        MobiusMap {
            m: [
                Complex64::from_polar(1.0, theta),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
            conj: false,
        }
    }

    /// Rotation by `theta` about an arbitrary center.
    pub fn rotation_about(center: DiskPoint, theta: f64) -> Self {
        let to = Self::to_origin(center);
        to.inverse().compose(&Self::rotation(theta)).compose(&to)
    }

    /// Reflection across the diameter at angle `phi`: z ↦ e^{2iφ} z̄.
    fn diameter_reflection(phi: f64) -> Self {
        MobiusMap {
            m: [
                Complex64::from_polar(1.0, 2.0 * phi),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
            conj: true,
        }
    }

    /// Reflection across the geodesic through two distinct points.
    fn line_reflection(u: DiskPoint, v: DiskPoint) -> Self {
        // Send u to the origin, rotate v onto the positive real axis, then
        // the line is the real diameter and reflection is conjugation.
        let to = Self::to_origin(u);
        let w = to.apply(v.z);
        let h = Self::rotation(-w.arg()).compose(&to);
        h.inverse()
            .compose(&MobiusMap {
                m: Self::identity().m,
                conj: true,
            })
            .compose(&h)
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        let z = if self.conj { z.conj() } else { z };
        (self.m[0] * z + self.m[1]) / (self.m[2] * z + self.m[3])
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &MobiusMap) -> Self {
        let o = if self.conj {
            [
                other.m[0].conj(),
                other.m[1].conj(),
                other.m[2].conj(),
                other.m[3].conj(),
            ]
        } else {
            other.m
        };
        let [a, b, c, d] = self.m;
        let [e, f, g, h] = o;
        let mut m = [a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h];
        // Projective scale: renormalize so long compositions stay finite.
        let s = (m[0] * m[3] - m[1] * m[2]).norm().sqrt();
        if s > 0.0 {
            for entry in &mut m {
                *entry /= s;
            }
        }
        MobiusMap {
            m,
            conj: self.conj ^ other.conj,
        }
    }

    pub fn inverse(&self) -> Self {
        let [a, b, c, d] = self.m;
        let inv = [d, -b, -c, a];
        if self.conj {
            MobiusMap {
                m: [inv[0].conj(), inv[1].conj(), inv[2].conj(), inv[3].conj()],
                conj: true,
            }
        } else {
            MobiusMap {
                m: inv,
                conj: false,
            }
        }
    }
}

/// Geodesic midpoint: map z₁ to the origin, halve the radial distance
/// (r ↦ r/(1 + √(1 − r²))), and map back.
pub fn geodesic_midpoint(z1: DiskPoint, z2: DiskPoint) -> DiskPoint {
    let phi = MobiusMap::to_origin(z1);
    let w = phi.apply(z2.z);
    let r = w.norm();
    let m0 = if r == 0.0 {
        w
    } else {
        w * ((r / (1.0 + (1.0 - r * r).sqrt())) / r)
    };
    DiskPoint {
        z: phi.inverse().apply(m0),
    }
}

/// The point at parameter `t ∈ [0, 1]` along the geodesic from z₁ to z₂,
/// measured by hyperbolic arc length.
pub fn geodesic_point(z1: DiskPoint, z2: DiskPoint, t: f64) -> DiskPoint {
    let phi = MobiusMap::to_origin(z1);
    let w = phi.apply(z2.z);
    let r = w.norm();
    if r == 0.0 {
        return z1;
    }
    let d = 2.0 * r.atanh();
    let radius = (t * d / 2.0).tanh();
    DiskPoint {
        z: phi.inverse().apply(w * (radius / r)),
    }
}

/// The fundamental right triangle of the (p, q, 2) group and the disk
/// rotations realizing α, β, γ.
struct BaseDomain {
    /// Edge-midpoint corner (angle π/2).
    a: DiskPoint,
    /// Vertex corner (angle π/q), on the positive real axis.
    b: DiskPoint,
    /// Face corner (angle π/p), at the origin.
    c: DiskPoint,
    rho_alpha: MobiusMap,
    rho_beta: MobiusMap,
    rho_gamma: MobiusMap,
}

fn base_domain(p: u32, q: u32) -> Result<BaseDomain, GeometryError> {
    if (p as i64 - 2) * (q as i64 - 2) <= 4 {
        return Err(GeometryError::NotHyperbolic { p, q });
    }
    let (ap, aq) = (
        std::f64::consts::PI / p as f64,
        std::f64::consts::PI / q as f64,
    );
    // Right-triangle side lengths from the angles: the hypotenuse CB joins
    // the face corner to the vertex corner, the right angle sits at the
    // edge midpoint A.
    let d_cb = (1.0 / ap.tan() / aq.tan()).acosh();
    let d_ca = (aq.cos() / ap.sin()).acosh();
    let b = DiskPoint::new((d_cb / 2.0).tanh(), 0.0)?;
    let a = DiskPoint::from_complex(Complex64::from_polar((d_ca / 2.0).tanh(), ap))?;
    let c = DiskPoint::origin();

    // Generators as double reflections in the triangle sides; the products
    // telescope, so α β γ = 1 exactly, and each factor rotates about its
    // corner by twice the interior angle.
    let m_bc = MobiusMap {
        m: MobiusMap::identity().m,
        conj: true,
    };
    let m_ca = MobiusMap::diameter_reflection(ap);
    let m_ab = MobiusMap::line_reflection(a, b);
    Ok(BaseDomain {
        a,
        b,
        c,
        rho_alpha: m_ca.compose(&m_ab),
        rho_beta: m_ab.compose(&m_bc),
        rho_gamma: m_bc.compose(&m_ca),
    })
}

/// A best-effort disk layout of a flag tessellation.
#[derive(Debug)]
pub struct Embedding {
    /// Corners of the fundamental triangle: edge midpoint, vertex, face
    /// center (the face center sits at the origin).
    pub corner_edge: DiskPoint,
    pub corner_vertex: DiskPoint,
    pub corner_face: DiskPoint,
    /// Flag → isometry mapping the fundamental triangle onto that flag's
    /// copy; built over a BFS tree, so wrap-around paths may disagree.
    pub flag_transforms: Vec<MobiusMap>,
    /// Primary position of each vertex (image under its smallest flag).
    pub vertex_pos: Vec<DiskPoint>,
    /// Primary position of each face center.
    pub face_pos: Vec<DiskPoint>,
    /// Near-boundary positions that were clamped to radius 1 − 1e−9.
    pub warnings: Vec<String>,
}

impl Embedding {
    fn clamp(&mut self, z: Complex64, what: &str) -> DiskPoint {
        if z.norm() > CLAMP_RADIUS || !z.is_finite() {
            self.warnings.push(format!(
                "{what}: |z| = {:.12} clamped to the guard band",
                z.norm()
            ));
            let z = if z.is_finite() && z.norm() > 0.0 {
                z * (CLAMP_RADIUS / z.norm())
            } else {
                Complex64::new(CLAMP_RADIUS, 0.0)
            };
            DiskPoint { z }
        } else {
            DiskPoint { z }
        }
    }

    /// Local image of the vertex corner under a flag's transform.
    pub fn flag_vertex(&self, flag: usize) -> DiskPoint {
        DiskPoint {
            z: self.flag_transforms[flag].apply(self.corner_vertex.z),
        }
    }

    /// Local image of the face center under a flag's transform.
    pub fn flag_face_center(&self, flag: usize) -> DiskPoint {
        DiskPoint {
            z: self.flag_transforms[flag].apply(self.corner_face.z),
        }
    }
}

/// Lays out a flag tessellation by BFS from flag 0, assigning transforms
/// M_{i·x} = M_i ρ(x) along the flag-generator actions.
pub fn embed_tessellation(t: &Tessellation) -> Result<Embedding, GeometryError> {
    let flags = t.flags.as_ref().ok_or(GeometryError::MissingFlags)?;
    let dom = base_domain(t.p, t.q)?;
    let n = flags.vertex_of_flag.len();

    let mut inv_alpha = vec![0usize; n];
    let mut inv_beta = vec![0usize; n];
    let mut inv_gamma = vec![0usize; n];
    for i in 0..n {
        inv_alpha[flags.alpha[i]] = i;
        inv_beta[flags.beta[i]] = i;
        inv_gamma[flags.gamma[i]] = i;
    }

    let rho_alpha_inv = dom.rho_alpha.inverse();
    let rho_beta_inv = dom.rho_beta.inverse();
    let rho_gamma_inv = dom.rho_gamma.inverse();

    let mut transforms = vec![MobiusMap::identity(); n];
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let steps = [
            (flags.alpha[i], &dom.rho_alpha),
            (flags.beta[i], &dom.rho_beta),
            (flags.gamma[i], &dom.rho_gamma),
            (inv_alpha[i], &rho_alpha_inv),
            (inv_beta[i], &rho_beta_inv),
            (inv_gamma[i], &rho_gamma_inv),
        ];
        for (j, rho) in steps {
            if !seen[j] {
                seen[j] = true;
                transforms[j] = transforms[i].compose(rho);
                queue.push_back(j);
            }
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(GeometryError::Invalid(
            "flag action is not transitive".to_string(),
        ));
    }

    let mut emb = Embedding {
        corner_edge: dom.a,
        corner_vertex: dom.b,
        corner_face: dom.c,
        flag_transforms: transforms,
        vertex_pos: Vec::with_capacity(t.n_vertices),
        face_pos: Vec::with_capacity(t.faces.len()),
        warnings: Vec::new(),
    };

    let mut vertex_flag = vec![usize::MAX; t.n_vertices];
    let mut face_flag = vec![usize::MAX; t.faces.len()];
    for i in (0..n).rev() {
        vertex_flag[flags.vertex_of_flag[i]] = i;
        face_flag[flags.face_of_flag[i]] = i;
    }
    for (v, &i) in vertex_flag.iter().enumerate() {
        let z = emb.flag_transforms[i].apply(emb.corner_vertex.z);
        let p = emb.clamp(z, &format!("vertex {v}"));
        emb.vertex_pos.push(p);
    }
    for (f, &i) in face_flag.iter().enumerate() {
        let z = emb.flag_transforms[i].apply(emb.corner_face.z);
        let p = emb.clamp(z, &format!("face {f}"));
        emb.face_pos.push(p);
    }
    Ok(emb)
}

/// Corner positions of one face, walked in γ-orbit order from its
/// smallest flag; all corners live in a single wrap-consistent sheet.
pub fn face_polygon(t: &Tessellation, emb: &Embedding, face: usize) -> Vec<DiskPoint> {
    let flags = t.flags.as_ref().expect("embedding implies flag maps");
    let start = (0..flags.face_of_flag.len())
        .find(|&i| flags.face_of_flag[i] == face)
        .expect("face has at least one flag");
    let mut out = Vec::with_capacity(t.p as usize);
    let mut i = start;
    loop {
        out.push(emb.flag_vertex(i));
        i = flags.gamma[i];
        if i == start {
            break;
        }
    }
    // γ walks flags around the face; each vertex appears once because the
    // orbit has exactly p flags and the face has p distinct corners.
    out
}

/// Positions for the vertices of a fine-grained tessellation: each base
/// vertex's dual triangle is interpolated in its own BFS sheet, so every
/// refined point stays wrap-consistent with its neighbors.
pub fn fine_vertex_positions(
    base: &Tessellation,
    emb: &Embedding,
    map: &FineGrainMap,
) -> Result<Vec<DiskPoint>, GeometryError> {
    let flags = base.flags.as_ref().ok_or(GeometryError::MissingFlags)?;
    let l = map.level as usize;
    let n_fine = base.n_vertices * l * l;
    if map.vertex_corners.len() != n_fine {
        return Err(GeometryError::Invalid(format!(
            "fine map lists {} vertices, expected {n_fine}",
            map.vertex_corners.len()
        )));
    }
    let face_at = base
        .face_at_vertex_by_color()
        .map_err(|e| GeometryError::Invalid(e.to_string()))?;

    // Smallest flag per base vertex anchors that vertex's sheet.
    let mut vertex_flag = vec![usize::MAX; base.n_vertices];
    for i in (0..flags.vertex_of_flag.len()).rev() {
        vertex_flag[flags.vertex_of_flag[i]] = i;
    }

    let mut out = Vec::with_capacity(n_fine);
    for v in 0..base.n_vertices {
        // Local face centers for the three faces at v, in v's sheet.
        let mut local: std::collections::HashMap<usize, DiskPoint> =
            std::collections::HashMap::with_capacity(3);
        let mut i = vertex_flag[v];
        for _ in 0..3 {
            local.insert(flags.face_of_flag[i], emb.flag_face_center(i));
            local.insert(
                flags.face_of_flag[flags.alpha[i]],
                emb.flag_face_center(flags.alpha[i]),
            );
            i = flags.beta[i];
        }
        let place = |pt: &RefinedPoint| -> Result<DiskPoint, GeometryError> {
            let missing = |f: usize| {
                GeometryError::Invalid(format!("face {f} is not local to vertex {v}"))
            };
            match *pt {
                RefinedPoint::Face(f) => local.get(&f).copied().ok_or(missing(f)),
                RefinedPoint::EdgePoint { edge, k } => {
                    let [f1, f2] = base.edge_faces[edge];
                    let (lo, hi) = (f1.min(f2), f1.max(f2));
                    let a = local.get(&lo).copied().ok_or(missing(lo))?;
                    let b = local.get(&hi).copied().ok_or(missing(hi))?;
                    Ok(geodesic_point(a, b, k as f64 / l as f64))
                }
                RefinedPoint::Interior { vertex, bary } => {
                    let corners = face_at[vertex];
                    let ps: Vec<DiskPoint> = corners
                        .iter()
                        .map(|&f| local.get(&f).copied().ok_or(missing(f)))
                        .collect::<Result<_, _>>()?;
                    let [a, b, c] = bary.map(f64::from);
                    let q = geodesic_point(ps[1], ps[2], c / (b + c));
                    Ok(geodesic_point(ps[0], q, (b + c) / (a + b + c)))
                }
            }
        };
        for local_idx in 0..l * l {
            let corners = map.vertex_corners[v * l * l + local_idx];
            let p1 = place(&map.face_origin[corners[0]])?;
            let p2 = place(&map.face_origin[corners[1]])?;
            let p3 = place(&map.face_origin[corners[2]])?;
            // Hyperbolic centroid by iterated geodesic interpolation.
            out.push(geodesic_point(p1, geodesic_point(p2, p3, 0.5), 2.0 / 3.0));
        }
    }
    Ok(out)
}

/// Interior angle at `at` between the geodesics toward `u` and `v`.
pub fn corner_angle(at: DiskPoint, u: DiskPoint, v: DiskPoint) -> f64 {
    let phi = MobiusMap::to_origin(at);
    let du = phi.apply(u.z).arg();
    let dv = phi.apply(v.z).arg();
    let mut a = (du - dv).abs();
    if a > std::f64::consts::PI {
        a = 2.0 * std::f64::consts::PI - a;
    }
    a
}

const SVG_PALETTE: [&str; 3] = ["#e15759", "#59a14f", "#4e79a7"];

fn svg_xy(z: Complex64) -> (f64, f64) {
    // Flip the imaginary axis so the disk renders in standard orientation.
    (z.re, -z.im)
}

fn geodesic_path(points: &[DiskPoint]) -> String {
    let mut d = String::new();
    for (i, window) in points.windows(2).enumerate() {
        let (x0, y0) = svg_xy(window[0].z);
        if i == 0 {
            d.push_str(&format!("M {x0:.5} {y0:.5} "));
        }
        // Sample the geodesic so edges render as hyperbolic arcs.
        for s in 1..=6 {
            let p = geodesic_point(window[0], window[1], s as f64 / 6.0);
            let (x, y) = svg_xy(p.z);
            d.push_str(&format!("L {x:.5} {y:.5} "));
        }
    }
    d
}

/// SVG of an embedded flag tessellation: faces as geodesic polygons
/// filled by color class, vertices as dots.
pub fn render_svg(t: &Tessellation, emb: &Embedding) -> String {
    let mut s = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-1.05 -1.05 2.1 2.1\">\n\
         <circle cx=\"0\" cy=\"0\" r=\"1\" fill=\"white\" stroke=\"#555\" stroke-width=\"0.004\"/>\n",
    );
    for f in 0..t.faces.len() {
        let mut poly = face_polygon(t, emb, f);
        if let Some(&first) = poly.first() {
            poly.push(first);
        }
        let fill = t
            .face_color
            .as_ref()
            .map_or("#cccccc", |fc| SVG_PALETTE[fc[f] as usize]);
        s.push_str(&format!(
            "<path d=\"{}Z\" fill=\"{fill}\" fill-opacity=\"0.55\" stroke=\"#333\" stroke-width=\"0.003\"/>\n",
            geodesic_path(&poly)
        ));
    }
    for p in &emb.vertex_pos {
        let (x, y) = svg_xy(p.z);
        s.push_str(&format!(
            "<circle cx=\"{x:.5}\" cy=\"{y:.5}\" r=\"0.008\" fill=\"#111\"/>\n"
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// SVG of an arbitrary positioned graph (fine-grained codes): edges whose
/// endpoints appear unreasonably far apart are wrap-around artifacts and
/// are skipped.
pub fn render_graph_svg(t: &Tessellation, pos: &[DiskPoint]) -> String {
    let mut lengths: Vec<f64> = t
        .edges
        .iter()
        .map(|&[u, v]| hyperbolic_distance(pos[u], pos[v]))
        .collect();
    lengths.sort_by(f64::total_cmp);
    let cutoff = lengths
        .get(lengths.len() / 2)
        .map_or(f64::INFINITY, |m| 2.5 * m.max(1e-9));
    let mut s = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-1.05 -1.05 2.1 2.1\">\n\
         <circle cx=\"0\" cy=\"0\" r=\"1\" fill=\"white\" stroke=\"#555\" stroke-width=\"0.004\"/>\n",
    );
    for (e, &[u, v]) in t.edges.iter().enumerate() {
        if hyperbolic_distance(pos[u], pos[v]) > cutoff {
            continue;
        }
        let stroke = t
            .edge_color
            .as_ref()
            .map_or("#333333", |ec| SVG_PALETTE[ec[e] as usize]);
        s.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"0.003\"/>\n",
            geodesic_path(&[pos[u], pos[v]])
        ));
    }
    for p in pos {
        let (x, y) = svg_xy(p.z);
        s.push_str(&format!(
            "<circle cx=\"{x:.5}\" cy=\"{y:.5}\" r=\"0.005\" fill=\"#111\"/>\n"
        ));
    }
    s.push_str("</svg>\n");
    s
}
