use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::groups::icosahedron_vertices;
use crate::linalg::{add, cross, dot, mat3_apply, norm, normalize, scale, sub, Mat3, Vec3};

use super::{Axis, Result, SceneError};

/// A triangle mesh. Vertices live inside the unit sphere after
/// normalization; faces index into `vertices`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn validate(&self) -> Result<()> {
        for f in &self.faces {
            for &i in f {
                if i >= self.vertices.len() {
                    return Err(SceneError::Mesh(format!(
                        "face index {i} out of range ({} vertices)",
                        self.vertices.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Translate to the bounding-box center and rescale so max |v| = 1.
    pub fn normalize_to_unit_sphere(&mut self) {
        if self.vertices.is_empty() {
            return;
        }
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let center = [
            (lo[0] + hi[0]) / 2.0,
            (lo[1] + hi[1]) / 2.0,
            (lo[2] + hi[2]) / 2.0,
        ];
        for v in &mut self.vertices {
            *v = sub(v, &center);
        }
        let max_norm = self
            .vertices
            .iter()
            .map(norm)
            .fold(0.0f64, f64::max);
        if max_norm > 0.0 {
            for v in &mut self.vertices {
                *v = scale(v, 1.0 / max_norm);
            }
        }
    }
}

/// Icosphere: icosahedron faces subdivided `subdivisions` times, vertices
/// projected to the unit sphere.
pub(super) fn icosphere(subdivisions: usize) -> Mesh {
    let vertices = icosahedron_vertices();
    let faces = icosahedron_faces(&vertices);
    let mut mesh = Mesh { vertices, faces };
    for _ in 0..subdivisions {
        mesh = subdivide(&mesh);
    }
    mesh
}

/// Faces recovered from adjacency: any three mutually nearest-neighbor
/// vertices of the icosahedron span a face. Wound outward.
fn icosahedron_faces(vertices: &[Vec3]) -> Vec<[usize; 3]> {
    let n = vertices.len();
    let mut min_dist = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            min_dist = min_dist.min(norm(&sub(&vertices[i], &vertices[j])));
        }
    }
    let adjacent = |i: usize, j: usize| {
        (norm(&sub(&vertices[i], &vertices[j])) - min_dist).abs() < 1e-9
    };
    let mut faces = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !adjacent(i, j) {
                continue;
            }
            for k in (j + 1)..n {
                if adjacent(i, k) && adjacent(j, k) {
                    faces.push(wind_outward([i, j, k], vertices));
                }
            }
        }
    }
    faces
}

fn wind_outward(face: [usize; 3], vertices: &[Vec3]) -> [usize; 3] {
    let [a, b, c] = face;
    let n = cross(
        &sub(&vertices[b], &vertices[a]),
        &sub(&vertices[c], &vertices[a]),
    );
    let centroid = add(&add(&vertices[a], &vertices[b]), &vertices[c]);
    if dot(&n, &centroid) < 0.0 {
        [a, c, b]
    } else {
        [a, b, c]
    }
}

fn subdivide(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            let m = normalize(&add(&vertices[a], &vertices[b]));
            vertices.push(m);
            vertices.len() - 1
        })
    };
    for &[a, b, c] in &mesh.faces {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        faces.push([a, ab, ca]);
        faces.push([b, bc, ab]);
        faces.push([c, ca, bc]);
        faces.push([ab, bc, ca]);
    }
    Mesh { vertices, faces }
}

/// Deterministic procedural asymmetric mesh: a twice-subdivided icosphere
/// with seeded per-vertex radial noise, normalized so max |v| = 1.
pub fn generate_mesh(seed: u64) -> Mesh {
    const NOISE_AMPLITUDE: f64 = 0.35;
    for attempt in 0u64..16 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
        let mut mesh = icosphere(2);
        for v in &mut mesh.vertices {
            let r = 1.0 + NOISE_AMPLITUDE * (rng.gen::<f64>() * 2.0 - 1.0);
            *v = scale(v, r);
        }
        mesh.normalize_to_unit_sphere();
        if is_asymmetric(&mesh) {
            return mesh;
        }
    }
    unreachable!("radial noise produces an asymmetric mesh")
}

/// The symmetric control object: an unperturbed icosphere.
pub fn sphere_mesh() -> Mesh {
    icosphere(2)
}

/// No nontrivial rotation from the sampled set (the 60 icosahedral
/// rotations plus 30°-multiple principal-axis rotations) maps the vertex
/// cloud to itself within tolerance.
pub fn is_asymmetric(mesh: &Mesh) -> bool {
    let tol = 0.02;
    for rot in symmetry_candidates() {
        let mut max_dev = 0.0f64;
        'verts: for v in &mesh.vertices {
            let rv = mat3_apply(&rot, v);
            let mut best = f64::INFINITY;
            for w in &mesh.vertices {
                best = best.min(norm(&sub(&rv, w)));
                if best < 1e-12 {
                    break;
                }
            }
            max_dev = max_dev.max(best);
            if max_dev > tol {
                break 'verts;
            }
        }
        if max_dev <= tol {
            return false;
        }
    }
    true
}

/// Non-identity candidate symmetries to test against.
fn symmetry_candidates() -> Vec<Mat3> {
    let mut out = Vec::new();
    // Closure of the icosahedral rotation generators in matrix form.
    let gens: Vec<Mat3> = crate::groups::icosahedral_so3_generators()
        .iter()
        .map(|m| m.to_mat3().unwrap())
        .collect();
    let key = |m: &Mat3| -> [i64; 9] {
        let mut k = [0i64; 9];
        for i in 0..3 {
            for j in 0..3 {
                k[i * 3 + j] = (m[i][j] * 1e6).round() as i64;
            }
        }
        k
    };
    let mut seen = std::collections::BTreeSet::new();
    let mut queue = vec![crate::linalg::MAT3_IDENTITY];
    seen.insert(key(&queue[0]));
    let mut idx = 0;
    while idx < queue.len() {
        let cur = queue[idx];
        idx += 1;
        for g in &gens {
            let next = crate::linalg::mat3_mul(&cur, g);
            if seen.insert(key(&next)) {
                queue.push(next);
            }
        }
    }
    out.extend(queue.into_iter().skip(1)); // drop the identity
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        for k in 1..12 {
            out.push(axis.rotation(30.0 * k as f64));
        }
    }
    out
}

/// Load an ASCII PLY or OBJ mesh (triangles only) and normalize it to the
/// unit bounding sphere centered at the origin.
pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let is_ply = first.trim() == "ply"
        || path.extension().map_or(false, |e| e.eq_ignore_ascii_case("ply"));
    let mut mesh = if is_ply {
        parse_ply(&first, reader)?
    } else {
        parse_obj(&first, reader)?
    };
    mesh.validate()?;
    mesh.normalize_to_unit_sphere();
    Ok(mesh)
}

fn parse_float(tok: &str, what: &str) -> Result<f64> {
    tok.parse()
        .map_err(|_| SceneError::Mesh(format!("malformed {what}: {tok:?}")))
}

fn parse_obj(first_line: &str, reader: impl BufRead) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let lines = std::iter::once(Ok(first_line.to_string())).chain(reader.lines());
    for line in lines {
        let line = line?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("v") => {
                let mut coords = [0.0; 3];
                for c in &mut coords {
                    let tok = words
                        .next()
                        .ok_or_else(|| SceneError::Mesh("vertex with fewer than 3 coordinates".into()))?;
                    *c = parse_float(tok, "vertex coordinate")?;
                }
                vertices.push(coords);
            }
            Some("f") => {
                let idx: Vec<&str> = words.collect();
                if idx.len() != 3 {
                    return Err(SceneError::Mesh(format!(
                        "non-triangular face with {} vertices",
                        idx.len()
                    )));
                }
                let mut face = [0usize; 3];
                for (slot, tok) in face.iter_mut().zip(&idx) {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| SceneError::Mesh(format!("malformed face index {tok:?}")))?;
                    let resolved = if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        i - 1
                    };
                    if resolved < 0 {
                        return Err(SceneError::Mesh(format!("face index {i} out of range")));
                    }
                    *slot = resolved as usize;
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Ok(Mesh { vertices, faces })
}

fn parse_ply(first_line: &str, mut reader: impl BufRead) -> Result<Mesh> {
    if first_line.trim() != "ply" {
        return Err(SceneError::Mesh("missing 'ply' magic".into()));
    }
    let mut vertex_count = None;
    let mut face_count = None;
    let mut current_element: Option<String> = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(SceneError::Mesh("unterminated PLY header".into()));
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.first() {
            Some(&"format") => {
                if words.get(1) != Some(&"ascii") {
                    return Err(SceneError::Mesh("only ASCII PLY is supported".into()));
                }
            }
            Some(&"element") => {
                let name = words.get(1).copied().unwrap_or("");
                let count: usize = words
                    .get(2)
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| SceneError::Mesh("malformed element line".into()))?;
                match name {
                    "vertex" => vertex_count = Some(count),
                    "face" => face_count = Some(count),
                    _ => {}
                }
                current_element = Some(name.to_string());
            }
            Some(&"property") | Some(&"comment") => {
                let _ = &current_element;
            }
            Some(&"end_header") => break,
            _ => {}
        }
    }
    let nv = vertex_count.ok_or_else(|| SceneError::Mesh("PLY header lacks a vertex element".into()))?;
    let nf = face_count.ok_or_else(|| SceneError::Mesh("PLY header lacks a face element".into()))?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(SceneError::Mesh("truncated PLY vertex data".into()));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(SceneError::Mesh("PLY vertex with fewer than 3 coordinates".into()));
        }
        vertices.push([
            parse_float(toks[0], "vertex coordinate")?,
            parse_float(toks[1], "vertex coordinate")?,
            parse_float(toks[2], "vertex coordinate")?,
        ]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(SceneError::Mesh("truncated PLY face data".into()));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let n: usize = toks
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| SceneError::Mesh("malformed PLY face line".into()))?;
        if n != 3 || toks.len() < 4 {
            return Err(SceneError::Mesh(format!("non-triangular face with {n} vertices")));
        }
        let mut face = [0usize; 3];
        for (slot, tok) in face.iter_mut().zip(&toks[1..4]) {
            *slot = tok
                .parse()
                .map_err(|_| SceneError::Mesh(format!("malformed face index {tok:?}")))?;
        }
        faces.push(face);
    }
    Ok(Mesh { vertices, faces })
}

/// Write a mesh as a minimal OBJ file. Float formatting round-trips through
/// `load_mesh` exactly.
pub fn save_obj(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2])?;
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}
