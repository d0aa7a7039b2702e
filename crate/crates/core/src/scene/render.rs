use std::io::{Read, Write};
use std::path::Path;

use crate::linalg::{add, cross, dot, mat3_apply, norm, scale, sub, Vec3};

use super::{Level, Mesh, PoseState, Result, SceneError};

/// Frame side length in pixels.
pub const FRAME_SIZE: usize = 224;
/// Camera distance from the canonical object position.
pub const CAMERA_DEPTH: f64 = 3.0;
/// Focal length in pixels; a unit mesh at the canonical depth spans about
/// 60% of the frame.
pub const FOCAL_PX: f64 = 200.0;

const NEAR_PLANE: f64 = 0.05;
const AMBIENT: f64 = 0.15;
const DIFFUSE: f64 = 0.85;
/// Direction the light travels (from upper-left, behind the camera).
const LIGHT_DIR: Vec3 = [0.31234752377721214, 0.3904344047215152, 0.8660254037844387];

/// An 8-bit grayscale frame, 224×224, row-major. Background is exactly 0.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lit = self.pixels.iter().filter(|&&p| p != 0).count();
        write!(f, "Frame({FRAME_SIZE}x{FRAME_SIZE}, {lit} lit)")
    }
}

impl Frame {
    pub fn zero() -> Frame {
        Frame { pixels: vec![0; FRAME_SIZE * FRAME_SIZE] }
    }

    pub fn from_pixels(pixels: Vec<u8>) -> Result<Frame> {
        if pixels.len() != FRAME_SIZE * FRAME_SIZE {
            return Err(SceneError::Mesh(format!(
                "expected {} pixels, got {}",
                FRAME_SIZE * FRAME_SIZE,
                pixels.len()
            )));
        }
        Ok(Frame { pixels })
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Pixel at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * FRAME_SIZE + x]
    }

    pub fn is_black(&self) -> bool {
        self.pixels.iter().all(|&p| p == 0)
    }

    /// Euclidean distance between the raw pixel vectors.
    pub fn l2_distance(&self, other: &Frame) -> f64 {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| {
                let d = a as f64 - b as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Binary PGM (P5), maxval 255.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{FRAME_SIZE} {FRAME_SIZE}\n255\n")?;
        w.write_all(&self.pixels)
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() + 16);
        self.write_pgm(&mut out).expect("vec write");
        out
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_pgm(&mut f)?;
        Ok(())
    }

    pub fn load_pgm(path: &Path) -> Result<Frame> {
        let f = std::fs::File::open(path)?;
        read_pgm(std::io::BufReader::new(f))
    }
}

/// Parse a binary PGM frame; dimensions must match [`FRAME_SIZE`].
pub fn read_pgm<R: Read>(mut r: R) -> Result<Frame> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let bad = |msg: &str| SceneError::Mesh(format!("malformed PGM: {msg}"));
    if !data.starts_with(b"P5") {
        return Err(bad("missing P5 magic"));
    }
    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
        }
        let start = pos;
        while pos < data.len() && data[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(bad("missing header field"));
        }
        *field = std::str::from_utf8(&data[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| bad("header field too large"))?;
    }
    if fields[0] != FRAME_SIZE || fields[1] != FRAME_SIZE {
        return Err(bad(&format!("expected {FRAME_SIZE}x{FRAME_SIZE}, got {}x{}", fields[0], fields[1])));
    }
    if fields[2] != 255 {
        return Err(bad("maxval must be 255"));
    }
    pos += 1; // single whitespace after maxval
    let expected = FRAME_SIZE * FRAME_SIZE;
    if data.len() < pos + expected {
        return Err(bad("truncated pixel data"));
    }
    Frame::from_pixels(data[pos..pos + expected].to_vec())
}

/// Deterministic rasterization of a posed mesh.
///
/// Camera at the origin looking down +z (+x right, +y down); the object
/// sits at depth [`CAMERA_DEPTH`]. Level-3 fields (rotation, 3D scale,
/// camera-space translation) act before perspective projection; the 2D
/// translation and level-2 scale act on projected coordinates, so a 20 px
/// translation shifts the raster by exactly 20 columns. Flat Lambertian
/// shading with a fixed directional light, two-sided; depth-buffered fill
/// with no anti-aliasing. Triangles crossing the near plane are skipped.
pub fn render(state: &PoseState, mesh: &Mesh) -> Frame {
    let mut frame = Frame::zero();
    // Stores 1/z; larger is nearer, 0.0 is empty background.
    let mut zbuf = vec![0.0f64; FRAME_SIZE * FRAME_SIZE];

    let (scale3, scale2) = match state.level {
        Level::L1 => (1.0, 1.0),
        Level::L2 => (1.0, state.scale),
        Level::L3 => (state.scale, 1.0),
    };
    let base = [0.0, 0.0, CAMERA_DEPTH];
    let cam: Vec<Vec3> = mesh
        .vertices
        .iter()
        .map(|v| {
            add(
                &add(&mat3_apply(&state.rotation, &scale(v, scale3)), &base),
                &state.translation_3d,
            )
        })
        .collect();

    let center = FRAME_SIZE as f64 / 2.0;
    let t = state.translation_2d;

    for face in &mesh.faces {
        let a = cam[face[0]];
        let b = cam[face[1]];
        let c = cam[face[2]];
        if a[2] < NEAR_PLANE || b[2] < NEAR_PLANE || c[2] < NEAR_PLANE {
            continue;
        }
        let mut n = cross(&sub(&b, &a), &sub(&c, &a));
        let nn = norm(&n);
        if nn < 1e-15 {
            continue;
        }
        n = scale(&n, 1.0 / nn);
        if n[2] > 0.0 {
            n = scale(&n, -1.0);
        }
        let lambert = (-dot(&n, &LIGHT_DIR)).max(0.0);
        let gray = ((AMBIENT + DIFFUSE * lambert).min(1.0) * 255.0).round() as u8;

        // Projected offsets from the image center, in pixels.
        let ua = [FOCAL_PX * a[0] / a[2], FOCAL_PX * a[1] / a[2]];
        let ub = [FOCAL_PX * b[0] / b[2], FOCAL_PX * b[1] / b[2]];
        let uc = [FOCAL_PX * c[0] / c[2], FOCAL_PX * c[1] / c[2]];
        let (iza, izb, izc) = (1.0 / a[2], 1.0 / b[2], 1.0 / c[2]);

        let denom = orient(&ua, &ub, &uc);
        if denom.abs() < 1e-12 {
            continue;
        }

        // Pixel bounding box of the screen-space triangle.
        let sx = |u: &[f64; 2]| center + t[0] + scale2 * u[0];
        let sy = |u: &[f64; 2]| center + t[1] + scale2 * u[1];
        let min_x = sx(&ua).min(sx(&ub)).min(sx(&uc));
        let max_x = sx(&ua).max(sx(&ub)).max(sx(&uc));
        let min_y = sy(&ua).min(sy(&ub)).min(sy(&uc));
        let max_y = sy(&ua).max(sy(&ub)).max(sy(&uc));
        if max_x < 0.0 || min_x > (FRAME_SIZE - 1) as f64 || max_y < 0.0 || min_y > (FRAME_SIZE - 1) as f64 {
            continue;
        }
        let x0 = (min_x.floor() as i64 - 1).max(0) as usize;
        let x1 = (max_x.ceil() as i64 + 1).min(FRAME_SIZE as i64 - 1) as usize;
        let y0 = (min_y.floor() as i64 - 1).max(0) as usize;
        let y1 = (max_y.ceil() as i64 + 1).min(FRAME_SIZE as i64 - 1) as usize;

        for py in y0..=y1 {
            // Sample the triangle in the projection plane: mapping the pixel
            // center back through the screen transform keeps integer 2D
            // translations bit-exact raster shifts.
            let wy = ((py as f64 + 0.5) - center - t[1]) / scale2;
            for px in x0..=x1 {
                let wx = ((px as f64 + 0.5) - center - t[0]) / scale2;
                let p = [wx, wy];
                let b0 = orient(&ub, &uc, &p) / denom;
                let b1 = orient(&uc, &ua, &p) / denom;
                let b2 = orient(&ua, &ub, &p) / denom;
                if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                    continue;
                }
                let iz = b0 * iza + b1 * izb + b2 * izc;
                let idx = py * FRAME_SIZE + px;
                if iz > zbuf[idx] {
                    zbuf[idx] = iz;
                    frame.pixels[idx] = gray;
                }
            }
        }
    }
    frame
}

/// Twice the signed area of triangle (p, q, r).
fn orient(p: &[f64; 2], q: &[f64; 2], r: &[f64; 2]) -> f64 {
    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
}
