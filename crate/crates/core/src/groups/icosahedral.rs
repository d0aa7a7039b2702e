use crate::linalg::{mat3_apply, normalize, rot_axis_angle, sub, Vec3};

use super::{GroupError, MatrixElement, Permutation, Result};

/// The 12 vertices of a regular icosahedron, normalized to the unit sphere:
/// cyclic coordinate shifts of (0, ±1, ±φ) with φ the golden ratio.
pub fn icosahedron_vertices() -> Vec<Vec3> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw: [Vec3; 12] = [
        [0.0, 1.0, phi],
        [0.0, 1.0, -phi],
        [0.0, -1.0, phi],
        [0.0, -1.0, -phi],
        [1.0, phi, 0.0],
        [1.0, -phi, 0.0],
        [-1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, 1.0],
        [phi, 0.0, -1.0],
        [-phi, 0.0, -1.0],
    ];
    raw.iter().map(normalize).collect()
}

/// Rotation matrices generating the order-60 icosahedral subgroup of SO(3):
/// a five-fold rotation about a vertex axis and a two-fold rotation about an
/// edge-midpoint axis (the z-axis for this vertex layout).
pub fn icosahedral_so3_generators() -> Vec<MatrixElement> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let five_fold = rot_axis_angle(&[0.0, 1.0, phi], 2.0 * std::f64::consts::PI / 5.0);
    let two_fold = rot_axis_angle(&[0.0, 0.0, 1.0], std::f64::consts::PI);
    vec![
        MatrixElement::from_mat3(&five_fold, "so3"),
        MatrixElement::from_mat3(&two_fold, "so3"),
    ]
}

/// Quantize the action of a rotation on a vertex cloud to a permutation:
/// vertex `i` maps to the nearest vertex to `m · vᵢ`. Fails when the image
/// is not within `tol` of a unique vertex.
pub fn vertex_permutation(m: &MatrixElement, vertices: &[Vec3], tol: f64) -> Result<Permutation> {
    let mat = m.to_mat3()?;
    let mut images = Vec::with_capacity(vertices.len());
    for v in vertices {
        let rotated = mat3_apply(&mat, v);
        let mut best = (f64::INFINITY, 0usize);
        for (j, w) in vertices.iter().enumerate() {
            let d = crate::linalg::norm(&sub(&rotated, w));
            if d < best.0 {
                best = (d, j);
            }
        }
        if best.0 > tol {
            return Err(GroupError::Invalid(format!(
                "rotation does not preserve the vertex cloud (distance {:.3e})",
                best.0
            )));
        }
        images.push(best.1);
    }
    Permutation::from_images(images)
}

/// The icosahedral rotation generators realized as permutations of the 12
/// icosahedron vertices. Their closure has order 60 (≅ A₅).
pub fn icosahedral_permutation_generators() -> Vec<Permutation> {
    let vertices = icosahedron_vertices();
    icosahedral_so3_generators()
        .iter()
        .map(|m| vertex_permutation(m, &vertices, 1e-6).expect("icosahedral generators preserve the vertex cloud"))
        .collect()
}
