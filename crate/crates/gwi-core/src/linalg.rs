//! Minimal 2-vector / 2x2-matrix arithmetic.
//!
//! Everything in the model lives in dimension two, so a pair of small fixed
//! types beats a general linear-algebra dependency.

use serde::{Deserialize, Serialize};

/// A real 2-vector.
pub type Vec2 = [f64; 2];

/// A real 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);

    pub fn identity() -> Mat2 {
        Mat2([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn matmul(&self, other: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &other.0;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }

    pub fn matvec(&self, v: Vec2) -> Vec2 {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2([
            [self.0[0][0], self.0[1][0]],
            [self.0[0][1], self.0[1][1]],
        ])
    }

    pub fn add(&self, other: &Mat2) -> Mat2 {
        let mut out = self.0;
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += other.0[i][j];
            }
        }
        Mat2(out)
    }

    pub fn scale(&self, c: f64) -> Mat2 {
        let mut out = self.0;
        for row in &mut out {
            for cell in row.iter_mut() {
                *cell *= c;
            }
        }
        Mat2(out)
    }

    /// Eigenvalues of a symmetric 2x2 matrix, ascending.
    pub fn sym_eigenvalues(&self) -> [f64; 2] {
        let tr = self.0[0][0] + self.0[1][1];
        let det = self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0];
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        [(tr - disc) / 2.0, (tr + disc) / 2.0]
    }

    /// Symmetric and positive semidefinite up to `tol` on the eigenvalues.
    pub fn is_psd(&self, tol: f64) -> bool {
        (self.0[0][1] - self.0[1][0]).abs() <= tol && self.sym_eigenvalues()[0] >= -tol
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        m
    }
}

/// Outer product `u v^T`.
pub fn outer(u: Vec2, v: Vec2) -> Mat2 {
    Mat2([[u[0] * v[0], u[0] * v[1]], [u[1] * v[0], u[1] * v[1]]])
}

pub fn vec_add(u: Vec2, v: Vec2) -> Vec2 {
    [u[0] + v[0], u[1] + v[1]]
}

pub fn vec_sub(u: Vec2, v: Vec2) -> Vec2 {
    [u[0] - v[0], u[1] - v[1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = Mat2([[1.0, 0.0], [0.7, 0.5]]);
        assert_eq!(a.matmul(&Mat2::identity()), a);
        assert_eq!(Mat2::identity().matmul(&a), a);
    }

    #[test]
    fn sym_eigenvalues_diag() {
        let a = Mat2([[2.0, 0.0], [0.0, 3.0]]);
        assert_eq!(a.sym_eigenvalues(), [2.0, 3.0]);
        assert!(a.is_psd(1e-12));
        assert!(!Mat2([[-1.0, 0.0], [0.0, 1.0]]).is_psd(1e-9));
    }
}
