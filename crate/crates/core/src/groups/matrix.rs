use std::fmt;

use crate::linalg::Mat3;

use super::{GroupError, Result};

/// A square real matrix element of a linear representation, tagged with the
/// representation it belongs to. Row-major storage.
#[derive(Clone, PartialEq)]
pub struct MatrixElement {
    dim: usize,
    entries: Vec<f64>,
    rep_tag: String,
}

impl fmt::Debug for MatrixElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixElement({}x{}, {})", self.dim, self.dim, self.rep_tag)
    }
}

impl MatrixElement {
    pub fn new(dim: usize, entries: Vec<f64>, rep_tag: &str) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(GroupError::DimensionMismatch(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(MatrixElement { dim, entries, rep_tag: rep_tag.to_string() })
    }

    pub fn identity(dim: usize, rep_tag: &str) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        MatrixElement { dim, entries, rep_tag: rep_tag.to_string() }
    }

    pub fn from_mat3(m: &Mat3, rep_tag: &str) -> Self {
        let entries = m.iter().flat_map(|row| row.iter().copied()).collect();
        MatrixElement { dim: 3, entries, rep_tag: rep_tag.to_string() }
    }

    pub fn to_mat3(&self) -> Result<Mat3> {
        if self.dim != 3 {
            return Err(GroupError::DimensionMismatch(format!(
                "expected a 3x3 matrix, got {}x{}",
                self.dim, self.dim
            )));
        }
        let e = &self.entries;
        Ok([[e[0], e[1], e[2]], [e[3], e[4], e[5]], [e[6], e[7], e[8]]])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rep_tag(&self) -> &str {
        &self.rep_tag
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    /// The product `self · other`.
    pub fn multiply(&self, other: &MatrixElement) -> Result<MatrixElement> {
        if self.dim != other.dim {
            return Err(GroupError::CarrierMismatch(format!(
                "matrix dimensions differ: {} vs {}",
                self.dim, other.dim
            )));
        }
        let d = self.dim;
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entries[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    entries[i * d + j] += a * other.entries[k * d + j];
                }
            }
        }
        Ok(MatrixElement { dim: d, entries, rep_tag: self.rep_tag.clone() })
    }

    /// Matrix–vector product.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(GroupError::DimensionMismatch(format!(
                "vector length {} does not match matrix dimension {}",
                v.len(),
                self.dim
            )));
        }
        let d = self.dim;
        Ok((0..d)
            .map(|i| (0..d).map(|j| self.entries[i * d + j] * v[j]).sum())
            .collect())
    }

    pub fn transpose(&self) -> MatrixElement {
        let d = self.dim;
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[j * d + i] = self.entries[i * d + j];
            }
        }
        MatrixElement { dim: d, entries, rep_tag: self.rep_tag.clone() }
    }

    /// Inverse via Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<MatrixElement> {
        let d = self.dim;
        let mut a = self.entries.clone();
        let mut inv = MatrixElement::identity(d, &self.rep_tag).entries;
        for col in 0..d {
            let pivot_row = (col..d)
                .max_by(|&r1, &r2| {
                    a[r1 * d + col]
                        .abs()
                        .partial_cmp(&a[r2 * d + col].abs())
                        .unwrap()
                })
                .unwrap();
            let pivot = a[pivot_row * d + col];
            if pivot.abs() < 1e-14 {
                return Err(GroupError::Invalid("matrix is singular".into()));
            }
            if pivot_row != col {
                for j in 0..d {
                    a.swap(col * d + j, pivot_row * d + j);
                    inv.swap(col * d + j, pivot_row * d + j);
                }
            }
            let scale = 1.0 / a[col * d + col];
            for j in 0..d {
                a[col * d + j] *= scale;
                inv[col * d + j] *= scale;
            }
            for r in 0..d {
                if r == col {
                    continue;
                }
                let f = a[r * d + col];
                if f == 0.0 {
                    continue;
                }
                for j in 0..d {
                    a[r * d + j] -= f * a[col * d + j];
                    inv[r * d + j] -= f * inv[col * d + j];
                }
            }
        }
        Ok(MatrixElement { dim: d, entries: inv, rep_tag: self.rep_tag.clone() })
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let d = self.dim;
        self.entries.iter().enumerate().all(|(idx, &e)| {
            let expect = if idx / d == idx % d { 1.0 } else { 0.0 };
            (e - expect).abs() <= tol
        })
    }

    pub fn frobenius_dist(&self, other: &MatrixElement) -> Result<f64> {
        if self.dim != other.dim {
            return Err(GroupError::CarrierMismatch("dimensions differ".into()));
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Orthogonal with determinant +1 within `tol` (rotation test).
    pub fn is_rotation(&self, tol: f64) -> bool {
        let prod = match self.transpose().multiply(self) {
            Ok(p) => p,
            Err(_) => return false,
        };
        prod.is_identity(tol) && (self.det() - 1.0).abs() <= tol
    }

    /// Determinant via LU decomposition with partial pivoting.
    pub fn det(&self) -> f64 {
        let d = self.dim;
        let mut a = self.entries.clone();
        let mut det = 1.0;
        for col in 0..d {
            let pivot_row = (col..d)
                .max_by(|&r1, &r2| {
                    a[r1 * d + col]
                        .abs()
                        .partial_cmp(&a[r2 * d + col].abs())
                        .unwrap()
                })
                .unwrap();
            let pivot = a[pivot_row * d + col];
            if pivot == 0.0 {
                return 0.0;
            }
            if pivot_row != col {
                for j in 0..d {
                    a.swap(col * d + j, pivot_row * d + j);
                }
                det = -det;
            }
            det *= pivot;
            for r in (col + 1)..d {
                let f = a[r * d + col] / pivot;
                for j in col..d {
                    a[r * d + j] -= f * a[col * d + j];
                }
            }
        }
        det
    }
}
