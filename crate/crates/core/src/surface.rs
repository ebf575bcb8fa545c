//! Isosurface extraction and mesh metrics.
//!
//! Marching cubes with a 256-case lookup table. The table is generated once
//! by walking the six faces of the cube: on each face the crossing segments
//! separate corners above the isovalue ("high") from corners below it, and
//! are oriented with the high side on the left when the face is viewed from
//! outside the cell. Chaining segments across faces yields closed loops
//! around the cell; each loop is fanned into triangles whose right-hand
//! normals point toward increasing field values. The fan apex is chosen so
//! that no interior chord lies on a cell face, where it could coincide with
//! a chord of the neighbouring cell; loops without such an apex are fanned
//! from an extra vertex at the mean of their crossing points.
//!
//! A face with diagonally opposite high corners is ambiguous. It is resolved
//! by the sign of the face-center sample (mean of the four corners): if the
//! center is high the high corners are joined across the face. Both cells
//! sharing a face see the same four values, so they resolve it identically
//! and the mesh stays closed; the topology chosen inside such cells is a
//! heuristic. The table is therefore keyed by the corner case and one
//! center-sign bit per face.
//!
//! Vertices are welded by grid-edge identity, not by position.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ScalarField3;

/// Corner `c` of a cell sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
const fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// Edges as `(low corner, high corner)`; the axis is the differing bit.
pub const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Face corners, counter-clockwise seen from outside the cell.
pub const FACES: [[usize; 4]; 6] = [
    [0, 4, 6, 2], // x = 0
    [1, 3, 7, 5], // x = 1
    [0, 1, 5, 4], // y = 0
    [2, 6, 7, 3], // y = 1
    [0, 2, 3, 1], // z = 0
    [4, 5, 7, 6], // z = 1
];

fn edge_between(a: usize, b: usize) -> usize {
    let key = (a.min(b), a.max(b));
    EDGES.iter().position(|&e| e == key).expect("corners share an edge")
}

fn face_is_ambiguous(case: usize, face: usize) -> bool {
    let h: [bool; 4] = FACES[face].map(|c| case >> c & 1 == 1);
    h[0] == h[2] && h[1] == h[3] && h[0] != h[1]
}

/// First local vertex id used for loop centroids: id `CENTROID + l` is the
/// mean of the crossing points of loop `l`. Ids below it are cell edges.
pub const CENTROID: u8 = 12;

/// Whether two cell edges lie on a common face.
fn share_face(a: u8, b: u8) -> bool {
    let (ea, eb) = (EDGES[a as usize], EDGES[b as usize]);
    FACES
        .iter()
        .any(|f| [ea.0, ea.1, eb.0, eb.1].iter().all(|c| f.contains(c)))
}

/// Closed loops of crossed edges for corner `case` (bit `c` set when corner
/// `c` is high), with ambiguous faces resolved by `center_high` (bit `f` set
/// when face `f`'s center is high; ignored for unambiguous faces).
fn case_loops(case: usize, center_high: usize) -> Vec<Vec<u8>> {
    let high = |c: usize| case >> c & 1 == 1;
    let mut next = [usize::MAX; 12];
    for (f, corners) in FACES.iter().enumerate() {
        let crossings: Vec<(usize, bool)> = (0..4)
            .filter_map(|i| {
                let (a, b) = (corners[i], corners[(i + 1) % 4]);
                (high(a) != high(b)).then(|| (edge_between(a, b), high(a)))
            })
            .collect();
        let n = crossings.len();
        let forward = !face_is_ambiguous(case, f) || center_high >> f & 1 == 1;
        for (i, &(edge, exits)) in crossings.iter().enumerate() {
            if !exits {
                continue;
            }
            let partner = if forward { (i + 1) % n } else { (i + n - 1) % n };
            next[edge] = crossings[partner].0;
        }
    }
    let mut loops = Vec::new();
    let mut visited = [false; 12];
    for start in 0..12 {
        if next[start] == usize::MAX || visited[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut e = start;
        while !visited[e] {
            visited[e] = true;
            cycle.push(e as u8);
            e = next[e];
        }
        loops.push(cycle);
    }
    loops
}

/// Triangulated cell patch for one table entry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CasePatch {
    pub triangles: Vec<[u8; 3]>,
    /// `(vertex id, loop edges)` for every centroid the triangles use.
    pub centroids: Vec<(u8, Vec<u8>)>,
}

/// Fans each loop from an apex whose chords all cross the cell interior. A
/// chord lying on a face could coincide with the neighbouring cell's chord
/// and pinch the surface, so loops without such an apex are fanned from
/// their centroid instead.
pub fn case_patch(case: usize, center_high: usize) -> CasePatch {
    let mut patch = CasePatch::default();
    for (l, cycle) in case_loops(case, center_high).into_iter().enumerate() {
        let n = cycle.len();
        let apex = (0..n).find(|&a| {
            (2..n - 1).all(|off| !share_face(cycle[a], cycle[(a + off) % n]))
        });
        match apex {
            Some(a) => {
                for w in 1..n - 1 {
                    patch
                        .triangles
                        .push([cycle[a], cycle[(a + w) % n], cycle[(a + w + 1) % n]]);
                }
            }
            None => {
                let c = CENTROID + l as u8;
                for w in 0..n {
                    patch.triangles.push([c, cycle[w], cycle[(w + 1) % n]]);
                }
                patch.centroids.push((c, cycle));
            }
        }
    }
    patch
}

fn ambiguity_mask(case: usize) -> usize {
    (0..6).filter(|&f| face_is_ambiguous(case, f)).map(|f| 1 << f).sum()
}

struct CaseTable {
    entries: Vec<CasePatch>,
    ambiguous: [u8; 256],
}

fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut entries = Vec::with_capacity(256 * 64);
        let mut ambiguous = [0u8; 256];
        for case in 0..256 {
            ambiguous[case] = ambiguity_mask(case) as u8;
            for centers in 0..64 {
                entries.push(case_patch(case, centers & ambiguous[case] as usize));
            }
        }
        CaseTable { entries, ambiguous }
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Option<Vec<[f64; 3]>>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

impl TriangleMesh {
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::Format(format!("triangle {i} references a missing vertex")));
            }
            if t[0] == t[1] && t[1] == t[2] {
                return Err(Error::Format(format!("triangle {i} is degenerate")));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    fn corners(&self, t: &[u32; 3]) -> [[f64; 3]; 3] {
        t.map(|v| self.vertices[v as usize])
    }

    /// Unnormalized face normal (twice the area vector).
    pub fn face_normal(&self, t: &[u32; 3]) -> [f64; 3] {
        let [a, b, c] = self.corners(t);
        cross(sub(b, a), sub(c, a))
    }

    /// Area-weighted vertex normals, stored in `normals`.
    pub fn compute_vertex_normals(&mut self) {
        let mut normals = vec![[0.0; 3]; self.vertices.len()];
        for t in &self.triangles {
            let n = self.face_normal(t);
            for &v in t {
                for d in 0..3 {
                    normals[v as usize][d] += n[d];
                }
            }
        }
        for n in normals.iter_mut() {
            let len = norm(*n);
            if len > 0.0 {
                *n = n.map(|x| x / len);
            }
        }
        self.normals = Some(normals);
    }
}

/// Extracts the `isovalue` level set of `field`.
pub fn marching_cubes(field: &ScalarField3, isovalue: f64) -> Result<TriangleMesh> {
    field.ensure_finite()?;
    let (min, max) = field.min_max();
    if !(isovalue > min && isovalue < max) {
        return Err(Error::IsovalueOutOfRange {
            iso: isovalue,
            min,
            max,
        });
    }
    let table = case_table();
    let grid = field.grid;
    let [nx, ny, nz] = grid.dims;
    let bump = isovalue.abs().max(1.0) * 4.0 * f64::EPSILON;
    let value = |idx: usize| -> f64 {
        let v = field.values[idx];
        if v == isovalue {
            isovalue + bump
        } else {
            v
        }
    };

    let edge_point = |key: u64| -> [f64; 3] {
        let low = (key / 3) as usize;
        let axis = (key % 3) as usize;
        let [i, j, k] = grid.unravel(low);
        let mut hi = [i, j, k];
        hi[axis] += 1;
        let (fp, fq) = (value(low), value(grid.index(hi[0], hi[1], hi[2])));
        let s = (isovalue - fp) / (fq - fp);
        let mut p = grid.point(i, j, k);
        p[axis] += s * grid.spacing;
        p
    };

    // Edge vertices are keyed by 3 * (low corner voxel) + axis; centroid
    // vertices by CENTROID_KEY | 8 * (cell voxel) + loop.
    const CENTROID_KEY: u64 = 1 << 63;
    type Slab = (Vec<[u64; 3]>, Vec<(u64, [f64; 3])>);
    let slabs: Vec<Slab> = (0..nx - 1)
        .into_par_iter()
        .map(|i| {
            let mut tris = Vec::new();
            let mut centroids = Vec::new();
            let mut vals = [0.0; 8];
            let mut idx = [0usize; 8];
            for j in 0..ny - 1 {
                for k in 0..nz - 1 {
                    let mut case = 0usize;
                    for c in 0..8 {
                        let [dx, dy, dz] = corner_offset(c);
                        idx[c] = grid.index(i + dx, j + dy, k + dz);
                        vals[c] = value(idx[c]);
                        if vals[c] > isovalue {
                            case |= 1 << c;
                        }
                    }
                    if case == 0 || case == 255 {
                        continue;
                    }
                    let mut centers = 0usize;
                    let amb = table.ambiguous[case];
                    for f in 0..6 {
                        if amb >> f & 1 == 1 {
                            let mut cs = FACES[f];
                            cs.sort_unstable();
                            let mean = 0.25 * (vals[cs[0]] + vals[cs[1]] + vals[cs[2]] + vals[cs[3]]);
                            if mean > isovalue {
                                centers |= 1 << f;
                            }
                        }
                    }
                    let patch = &table.entries[case * 64 + centers];
                    let key = |v: u8| -> u64 {
                        if v >= CENTROID {
                            CENTROID_KEY | (8 * idx[0] as u64 + (v - CENTROID) as u64)
                        } else {
                            let (a, b) = EDGES[v as usize];
                            3 * idx[a] as u64 + (a ^ b).trailing_zeros() as u64
                        }
                    };
                    for (c, cycle) in &patch.centroids {
                        let mut p = [0.0; 3];
                        for &e in cycle {
                            let q = edge_point(key(e));
                            for d in 0..3 {
                                p[d] += q[d];
                            }
                        }
                        centroids.push((key(*c), p.map(|x| x / cycle.len() as f64)));
                    }
                    tris.extend(patch.triangles.iter().map(|t| t.map(key)));
                }
            }
            (tris, centroids)
        })
        .collect();

    let centroid_at: HashMap<u64, [f64; 3]> =
        slabs.iter().flat_map(|(_, c)| c.iter().copied()).collect();
    let mut vertex_of: HashMap<u64, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for tri in slabs.iter().flat_map(|(t, _)| t) {
        let t = tri.map(|key| {
            *vertex_of.entry(key).or_insert_with(|| {
                vertices.push(match centroid_at.get(&key) {
                    Some(&p) => p,
                    None => edge_point(key),
                });
                (vertices.len() - 1) as u32
            })
        });
        triangles.push(t);
    }
    if triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(TriangleMesh {
        vertices,
        triangles,
        normals: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshMetrics {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub triangle_count: usize,
    pub component_count: usize,
    pub euler_characteristic: i64,
    pub boundary_edge_count: usize,
    pub nonmanifold_edge_count: usize,
    pub area: f64,
    /// Signed-tetrahedra volume; positive when normals point outward.
    pub signed_volume: f64,
    pub enclosed_volume: f64,
    /// Smallest angle between adjacent faces across an edge, in degrees
    /// (180 = flat). `None` if no edge has two non-degenerate faces.
    pub min_dihedral: Option<f64>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn mesh_metrics(mesh: &TriangleMesh) -> MeshMetrics {
    let nv = mesh.vertices.len();
    let mut parent: Vec<usize> = (0..nv).collect();
    let mut used = vec![false; nv];
    let mut edges: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    let mut area = 0.0;
    let mut signed_volume = 0.0;
    for (f, t) in mesh.triangles.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            used[a as usize] = true;
            edges.entry((a.min(b), a.max(b))).or_default().push(f);
            let (ra, rb) = (find(&mut parent, a as usize), find(&mut parent, b as usize));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let [p, q, r] = mesh.corners(t);
        area += 0.5 * norm(cross(sub(q, p), sub(r, p)));
        signed_volume += dot(p, cross(q, r)) / 6.0;
    }
    let vertex_count = used.iter().filter(|&&u| u).count();
    let component_count = (0..nv)
        .filter(|&v| used[v] && find(&mut parent, v) == v)
        .count();

    let normals: Vec<[f64; 3]> = mesh.triangles.iter().map(|t| mesh.face_normal(t)).collect();
    let scale = mesh
        .triangles
        .iter()
        .map(|t| {
            let [a, b, _] = mesh.corners(t);
            norm(sub(b, a))
        })
        .fold(0.0, f64::max);
    let degenerate = |n: &[f64; 3]| norm(*n) <= 1e-12 * scale * scale;
    let mut boundary_edge_count = 0;
    let mut nonmanifold_edge_count = 0;
    let mut min_dihedral: Option<f64> = None;
    // iterate edges in a fixed order so the float minimum is reproducible
    let mut keys: Vec<&(u32, u32)> = edges.keys().collect();
    keys.sort_unstable();
    for key in keys {
        let faces = &edges[key];
        match faces.len() {
            1 => boundary_edge_count += 1,
            2 => {
                let (n1, n2) = (&normals[faces[0]], &normals[faces[1]]);
                if degenerate(n1) || degenerate(n2) {
                    continue;
                }
                let cos = (dot(*n1, *n2) / (norm(*n1) * norm(*n2))).clamp(-1.0, 1.0);
                let dihedral = 180.0 - cos.acos().to_degrees();
                min_dihedral = Some(min_dihedral.map_or(dihedral, |m| m.min(dihedral)));
            }
            _ => nonmanifold_edge_count += 1,
        }
    }
    let edge_count = edges.len();
    MeshMetrics {
        vertex_count,
        edge_count,
        triangle_count: mesh.triangles.len(),
        component_count,
        euler_characteristic: vertex_count as i64 - edge_count as i64 + mesh.triangles.len() as i64,
        boundary_edge_count,
        nonmanifold_edge_count,
        area,
        signed_volume,
        enclosed_volume: signed_volume.abs(),
        min_dihedral,
    }
}

impl MeshMetrics {
    pub fn is_closed(&self) -> bool {
        self.boundary_edge_count == 0 && self.nonmanifold_edge_count == 0
    }

    /// Flat `key: value` report, one metric per line.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vertex_count: {}", self.vertex_count);
        let _ = writeln!(out, "edge_count: {}", self.edge_count);
        let _ = writeln!(out, "triangle_count: {}", self.triangle_count);
        let _ = writeln!(out, "component_count: {}", self.component_count);
        let _ = writeln!(out, "euler_characteristic: {}", self.euler_characteristic);
        let _ = writeln!(out, "boundary_edge_count: {}", self.boundary_edge_count);
        let _ = writeln!(out, "nonmanifold_edge_count: {}", self.nonmanifold_edge_count);
        let _ = writeln!(out, "area: {}", self.area);
        let _ = writeln!(out, "signed_volume: {}", self.signed_volume);
        let _ = writeln!(out, "enclosed_volume: {}", self.enclosed_volume);
        match self.min_dihedral {
            Some(d) => {
                let _ = writeln!(out, "min_dihedral: {d}");
            }
            None => out.push_str("min_dihedral: null\n"),
        }
        out
    }
}

fn writable(mesh: &TriangleMesh) -> Result<()> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    mesh.validate()
}

pub fn format_obj(mesh: &TriangleMesh) -> Result<String> {
    writable(mesh)?;
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {:.6} {:.6} {:.6}", v[0], v[1], v[2]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    Ok(out)
}

pub fn format_off(mesh: &TriangleMesh) -> Result<String> {
    writable(mesh)?;
    let mut out = String::from("OFF\n");
    let _ = writeln!(out, "{} {} 0", mesh.vertices.len(), mesh.triangles.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.6} {:.6} {:.6}", v[0], v[1], v[2]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    Ok(out)
}

pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    std::fs::write(path, format_obj(mesh)?).map_err(|e| Error::io(path, e))
}

pub fn write_off(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    std::fs::write(path, format_off(mesh)?).map_err(|e| Error::io(path, e))
}

/// Reads `v` and triangular `f` records of an OBJ file (`f a/b/c` forms
/// accepted, only the position index is kept).
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut mesh = TriangleMesh::default();
    for (n, line) in text.lines().enumerate() {
        let bad = |message: String| Error::Parse { line: n + 1, message };
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let xyz: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse().map_err(|_| bad(format!("bad coordinate {t:?}"))))
                    .collect::<Result<_>>()?;
                if xyz.len() != 3 {
                    return Err(bad("vertex needs three coordinates".into()));
                }
                mesh.vertices.push([xyz[0], xyz[1], xyz[2]]);
            }
            Some("f") => {
                let idx: Vec<u32> = tokens
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        match first.parse::<u32>() {
                            Ok(i) if i >= 1 => Ok(i - 1),
                            _ => Err(bad(format!("bad face index {t:?}"))),
                        }
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(bad("only triangular faces are supported".into()));
                }
                mesh.triangles.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    mesh.validate()?;
    Ok(mesh)
}
