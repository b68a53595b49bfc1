//! Small symmetric positive-definite matrix helpers (2x2 and 3x3).

use nalgebra::{Matrix2, Matrix3, SMatrix};

/// Absolute symmetry tolerance, scaled by the largest entry when that exceeds 1.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Operations the divergences need from a covariance matrix.
pub trait SpdMatrix: Copy + Sized {
    const DIM: usize;

    fn det(&self) -> f64;
    fn inverse(&self) -> Option<Self>;
    /// Principal square root of an SPD matrix.
    fn sqrt_spd(&self) -> Self;
    /// Eigenvalues in ascending order.
    fn eigenvalues_sym(&self) -> Vec<f64>;
}

impl SpdMatrix for Matrix2<f64> {
    const DIM: usize = 2;

    fn det(&self) -> f64 {
        self[(0, 0)] * self[(1, 1)] - self[(0, 1)] * self[(1, 0)]
    }

    fn inverse(&self) -> Option<Self> {
        let d = SpdMatrix::det(self);
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Matrix2::new(self[(1, 1)], -self[(0, 1)], -self[(1, 0)], self[(0, 0)]) / d)
    }

    /// sqrt(M) = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M)).
    fn sqrt_spd(&self) -> Self {
        let s = SpdMatrix::det(self).max(0.0).sqrt();
        let t = (self.trace() + 2.0 * s).sqrt();
        (self + Matrix2::identity() * s) / t
    }

    fn eigenvalues_sym(&self) -> Vec<f64> {
        let (a, b, c) = (self[(0, 0)], 0.5 * (self[(0, 1)] + self[(1, 0)]), self[(1, 1)]);
        let mean = 0.5 * (a + c);
        let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        vec![mean - r, mean + r]
    }
}

impl SpdMatrix for Matrix3<f64> {
    const DIM: usize = 3;

    fn det(&self) -> f64 {
        self.determinant()
    }

    fn inverse(&self) -> Option<Self> {
        self.try_inverse()
    }

    fn sqrt_spd(&self) -> Self {
        let eig = symmetrize(self).symmetric_eigen();
        let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        eig.eigenvectors * Matrix3::from_diagonal(&root) * eig.eigenvectors.transpose()
    }

    fn eigenvalues_sym(&self) -> Vec<f64> {
        let mut v: Vec<f64> = symmetrize(self).symmetric_eigen().eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

pub fn symmetrize<const D: usize>(m: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    (m + m.transpose()) * 0.5
}

/// Checks symmetry and strict positive definiteness; returns a description on failure.
pub fn check_spd<const D: usize>(m: &SMatrix<f64, D, D>) -> Result<(), String>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    if m.iter().any(|v| !v.is_finite()) {
        return Err("non-finite entry".into());
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(format!("asymmetry {asym:e}"));
    }
    let min_eig = m.eigenvalues_sym()[0];
    if !(min_eig > 0.0) {
        return Err(format!("smallest eigenvalue {min_eig:e}"));
    }
    Ok(())
}
