//! Cyclic Jacobi eigensolver for small dense real symmetric matrices.
//!
//! The spin Hamiltonian is only 21×21, so we use the plain cyclic Jacobi
//! method: a sequence of plane rotations, each annihilating one off-diagonal
//! element. It is slow asymptotically but unconditionally robust and gives
//! eigenvalues with small absolute error relative to ‖A‖, which matters when
//! resolving tunnel splittings thirteen orders of magnitude below the
//! level energies.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Maximum number of full sweeps over the upper triangle.
pub const MAX_SWEEPS: usize = 100;
/// Convergence threshold on the off-diagonal Frobenius norm, relative to ‖A‖.
pub const OFF_DIAGONAL_TOL: f64 = 1e-14;
/// Accepted asymmetry of the input, relative to ‖A‖.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues in ascending order with orthonormal eigenvectors stored as the
/// columns of `eigenvectors`.
///
/// Each eigenvector is normalised so that its largest-magnitude component is
/// positive, which makes downstream phases reproducible.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub sweeps: usize,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> nalgebra::DVectorView<'_, f64> {
        self.eigenvectors.column(k)
    }

    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        v * DMatrix::from_diagonal(&self.eigenvalues) * v.transpose()
    }
}

/// Diagonalises a real symmetric matrix.
pub fn eigh(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::validation(format!(
            "eigh needs a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("eigh: matrix has non-finite entries"));
    }
    let norm = a.norm();
    let asym = (a - a.transpose()).amax();
    if asym > SYMMETRY_TOL * norm {
        return Err(Error::validation(format!(
            "eigh: matrix is not symmetric (max |A - Aᵀ| = {asym:.3e}, ‖A‖ = {norm:.3e})"
        )));
    }

    // Work on the symmetrised copy so tiny input asymmetry cannot bias results.
    let mut w = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = OFF_DIAGONAL_TOL * norm;

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&w);
        if off <= target || norm == 0.0 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NonConvergence {
                what: "Jacobi eigensolver",
                iterations: sweeps,
                residual: off / norm,
            });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut w, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(i, i)].total_cmp(&w[(j, j)]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| w[(i, i)]));
    let mut eigenvectors = DMatrix::<f64>::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = v.column(i).into_owned();
        let lead = col.iter().copied().max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap_or(1.0);
        if lead < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(k, &col);
    }

    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

fn off_diagonal_norm(w: &DMatrix<f64>) -> f64 {
    let n = w.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += w[(i, j)] * w[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Applies the rotation in the (p, q) plane that zeroes `w[(p, q)]`.
fn rotate(w: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = w[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = w[(p, p)];
    let aqq = w[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_infinite() {
        0.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    if t == 0.0 {
        // |apq| is below the resolution of the diagonal difference.
        w[(p, q)] = 0.0;
        w[(q, p)] = 0.0;
        return;
    }
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);
    let n = w.nrows();

    w[(p, p)] = app - t * apq;
    w[(q, q)] = aqq + t * apq;
    w[(p, q)] = 0.0;
    w[(q, p)] = 0.0;
    for r in 0..n {
        if r != p && r != q {
            let arp = w[(r, p)];
            let arq = w[(r, q)];
            let new_rp = arp - s * (arq + tau * arp);
            let new_rq = arq + s * (arp - tau * arq);
            w[(r, p)] = new_rp;
            w[(p, r)] = new_rp;
            w[(r, q)] = new_rq;
            w[(q, r)] = new_rq;
        }
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = vrp - s * (vrq + tau * vrp);
        v[(r, q)] = vrq + s * (vrp - tau * vrq);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residuals(a: &DMatrix<f64>, e: &EigenDecomposition) -> (f64, f64) {
        let n = a.nrows();
        let norm = a.norm();
        let mut worst = 0.0f64;
        for k in 0..n {
            let v = e.vector(k);
            let r = a * v - v * e.eigenvalues[k];
            worst = worst.max(r.norm() / norm);
        }
        let ortho = (e.eigenvectors.transpose() * &e.eigenvectors - DMatrix::identity(n, n)).amax();
        (worst, ortho)
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let e = eigh(&DMatrix::identity(5, 5)).unwrap();
        assert!(e.eigenvalues.iter().all(|&x| x == 1.0));
        assert_eq!(e.sweeps, 0);
    }

    #[test]
    fn two_level_closed_form() {
        let (eps, w, d) = (0.3, 1.7, 0.4);
        let a = DMatrix::from_row_slice(2, 2, &[eps + w / 2.0, d / 2.0, d / 2.0, eps - w / 2.0]);
        let e = eigh(&a).unwrap();
        let half = (w * w + d * d).sqrt() / 2.0;
        assert!((e.eigenvalues[0] - (eps - half)).abs() < 1e-15);
        assert!((e.eigenvalues[1] - (eps + half)).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(eigh(&a), Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_non_square() {
        assert!(eigh(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn zero_matrix() {
        let e = eigh(&DMatrix::zeros(4, 4)).unwrap();
        assert!(e.eigenvalues.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn leading_component_is_positive() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let e = eigh(&a).unwrap();
        for k in 0..3 {
            let v = e.vector(k);
            let lead = v.iter().copied().max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap();
            assert!(lead > 0.0);
        }
    }

    proptest! {
        #[test]
        fn random_symmetric_21(seed in proptest::collection::vec(-1.0f64..1.0, 21 * 21), scale in -25.0f64..5.0) {
            let s = 10f64.powf(scale);
            let m = DMatrix::from_row_slice(21, 21, &seed) * s;
            let a = (&m + m.transpose()) * 0.5;
            let e = eigh(&a).unwrap();
            let (res, ortho) = residuals(&a, &e);
            prop_assert!(res <= 1e-10, "residual {res}");
            prop_assert!(ortho <= 1e-10, "orthonormality {ortho}");
            let rec = (e.reconstruct() - &a).amax();
            prop_assert!(rec <= 1e-10 * a.norm());
            for k in 1..21 {
                prop_assert!(e.eigenvalues[k - 1] <= e.eigenvalues[k]);
            }
        }
    }
}
