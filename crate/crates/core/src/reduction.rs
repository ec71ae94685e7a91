//! Reduction of H_S to an effective two-level Hamiltonian at an avoided
//! crossing.
//!
//! With P⁰ the projector on span{|m⟩, |m′⟩} and P the projector on the two
//! exact eigenstates grown out of that subspace, the unitary
//!
//! ```text
//! U = Σ_a (P⁰_a P_a P⁰_a)^{-1/2} P⁰_a P_a
//! ```
//!
//! (summed over the pair block and its complement) maps the exact pair
//! subspace onto span{|m⟩, |m′⟩}. `U H_S U†` is then block diagonal and its
//! pair block carries exactly the two tracked eigenvalues of H_S.
//!
//! In practice each term reduces to a polar factor: if `O` holds the
//! overlaps ⟨basis_r|v_c⟩ of a block, then `(O Oᵀ)^{-1/2} O` is orthogonal
//! and `U = Σ E W Vᵀ` with `E` the basis columns and `V` the eigenvectors.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::crossings::{track_pair, CrossingRecord};
use crate::eigen::{eigh, EigenDecomposition};
use crate::error::{Error, Result};
use crate::spin::{SpinHamiltonian, SpinOperators};

/// Required ratio between the distance to any third level and the pair gap.
pub const SEPARATION_FACTOR: f64 = 10.0;
/// Smallest admissible eigenvalue of P⁰PP⁰ restricted to a block.
pub const MIN_PROJECTION_OVERLAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationCheck {
    /// Require the pair to be isolated from every other level by
    /// [`SEPARATION_FACTOR`] times its own gap (the quasi-degenerate case).
    Enforce,
    /// Skip the isolation test. Used away from crossings, where other levels
    /// may lie between the two members of the pair.
    Skip,
}

/// Output of the block reduction at one field.
#[derive(Debug, Clone)]
pub struct PairReduction {
    pub m: i32,
    pub m_prime: i32,
    /// Basis indices of |m⟩ and |m′⟩.
    pub indices: [usize; 2],
    pub unitary: DMatrix<f64>,
    /// U H_S U†.
    pub transformed: DMatrix<f64>,
    /// Pair block of `transformed` in the (|m⟩, |m′⟩) basis, joules.
    pub block: Matrix2<f64>,
    /// The two tracked eigenvalues of H_S, the first being the more |m⟩-like.
    pub tracked_eigenvalues: [f64; 2],
}

impl PairReduction {
    /// Largest |element| coupling the pair block to its complement, relative
    /// to ‖H_S‖ (Frobenius).
    pub fn block_residual(&self) -> f64 {
        let h = &self.transformed;
        let norm = h.norm();
        let mut worst = 0.0f64;
        for &p in &self.indices {
            for c in 0..h.nrows() {
                if !self.indices.contains(&c) {
                    worst = worst.max(h[(p, c)].abs()).max(h[(c, p)].abs());
                }
            }
        }
        worst / norm
    }

    /// Eigenvalues of the 2×2 pair block, ascending.
    pub fn block_eigenvalues(&self) -> [f64; 2] {
        let b = &self.block;
        let mean = 0.5 * (b[(0, 0)] + b[(1, 1)]);
        let half_w = 0.5 * (b[(0, 0)] - b[(1, 1)]);
        let off = 0.5 * (b[(0, 1)] + b[(1, 0)]);
        let r = half_w.hypot(off);
        [mean - r, mean + r]
    }

    /// w = ⟨m|H_e|m⟩ - ⟨m′|H_e|m′⟩.
    pub fn detuning(&self) -> f64 {
        self.block[(0, 0)] - self.block[(1, 1)]
    }

    pub fn mean_energy(&self) -> f64 {
        0.5 * (self.block[(0, 0)] + self.block[(1, 1)])
    }

    /// Off-diagonal element of the pair block (Δ₀/2 in magnitude).
    pub fn off_diagonal(&self) -> f64 {
        0.5 * (self.block[(0, 1)] + self.block[(1, 0)])
    }
}

/// Inverse square root of a symmetric positive definite matrix.
fn inverse_sqrt(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let e = eigh(m)?;
    let min = e.eigenvalues.min();
    if !(min > MIN_PROJECTION_OVERLAP) {
        return Ok((DMatrix::zeros(0, 0), min));
    }
    let d = e.eigenvalues.map(|x| 1.0 / x.sqrt());
    Ok((&e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose(), min))
}

/// Builds the block-diagonalising unitary for the pair `(m, m_prime)` of the
/// matrix `h`, written in the Sz basis of a spin `spin`.
pub fn vanvleck_unitary(h: &DMatrix<f64>, spin: i32, m: i32, m_prime: i32, check: SeparationCheck) -> Result<PairReduction> {
    let eig = eigh(h)?;
    reduce_with(h, &eig, spin, m, m_prime, check)
}

pub(crate) fn reduce_with(
    h: &DMatrix<f64>,
    eig: &EigenDecomposition,
    spin: i32,
    m: i32,
    m_prime: i32,
    check: SeparationCheck,
) -> Result<PairReduction> {
    let n = h.nrows();
    if m == m_prime || m.abs() > spin || m_prime.abs() > spin || n != (2 * spin + 1) as usize {
        return Err(Error::validation(format!(
            "invalid pair ({m}, {m_prime}) for spin {spin} and dimension {n}"
        )));
    }
    let i = (m + spin) as usize;
    let j = (m_prime + spin) as usize;
    let tracked = track_pair(eig, i, j);
    let [a, b] = tracked.levels;
    let (ea, eb) = (eig.eigenvalues[a], eig.eigenvalues[b]);

    if check == SeparationCheck::Enforce {
        let gap = (ea - eb).abs();
        let nearest = (0..n)
            .filter(|&k| k != a && k != b)
            .map(|k| {
                let e = eig.eigenvalues[k];
                (e - ea).abs().min((e - eb).abs())
            })
            .fold(f64::INFINITY, f64::min);
        if nearest < SEPARATION_FACTOR * gap {
            return Err(Error::Reduction {
                m,
                m_prime,
                detail: format!("third level at {nearest:.3e} J from the pair, gap {gap:.3e} J"),
            });
        }
    }

    let pair_rows = [i, j];
    let pair_cols = [a, b];
    let comp_rows: Vec<usize> = (0..n).filter(|k| !pair_rows.contains(k)).collect();
    let comp_cols: Vec<usize> = (0..n).filter(|k| !pair_cols.contains(k)).collect();

    let mut u = DMatrix::<f64>::zeros(n, n);
    for (rows, cols) in [(&pair_rows[..], &pair_cols[..]), (&comp_rows[..], &comp_cols[..])] {
        let k = rows.len();
        let overlap = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(rows[r], cols[c])]);
        let (inv_sqrt, min) = inverse_sqrt(&(&overlap * overlap.transpose()))?;
        if inv_sqrt.is_empty() {
            return Err(Error::ProjectionMismatch {
                m,
                m_prime,
                min_eigenvalue: min,
            });
        }
        let polar = inv_sqrt * overlap;
        // U += E · W · Vᵀ
        for (r, &row) in rows.iter().enumerate() {
            for (c, &col) in cols.iter().enumerate() {
                let w = polar[(r, c)];
                if w != 0.0 {
                    for x in 0..n {
                        u[(row, x)] += w * eig.eigenvectors[(x, col)];
                    }
                }
            }
        }
    }

    let transformed = &u * h * u.transpose();
    let block = Matrix2::new(
        transformed[(i, i)],
        transformed[(i, j)],
        transformed[(j, i)],
        transformed[(j, j)],
    );
    Ok(PairReduction {
        m,
        m_prime,
        indices: [i, j],
        unitary: u,
        transformed,
        block,
        tracked_eigenvalues: [ea, eb],
    })
}

/// Reduces H_S at field `b0` onto the pair.
pub fn reduce_pair(ham: &SpinHamiltonian, b0: f64, m: i32, m_prime: i32, check: SeparationCheck) -> Result<PairReduction> {
    let h = ham.matrix(b0);
    let eig = eigh(&h)?;
    reduce_with(&h, &eig, ham.params().integer_spin()?, m, m_prime, check)
}

/// Transverse coupling of the pair after the transformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCoupling {
    /// ⟨m|U (Sx + Sy)/√2 U†|m′⟩.
    pub s: Complex64,
    /// Half the difference of the diagonal elements of the same operator.
    pub s_prime: f64,
    /// arg(s), radians.
    pub psi: f64,
}

pub fn effective_coupling(u: &DMatrix<f64>, ops: &SpinOperators, indices: [usize; 2]) -> EffectiveCoupling {
    let [i, j] = indices;
    // U is real, so U A Uᵀ splits into the Sx and Sy parts separately.
    let sx_t = u * &ops.sx * u.transpose();
    let sy_im = ops.sy.map(|z| z.im);
    let sy_t = u * sy_im * u.transpose();
    let element = |r: usize, c: usize| Complex64::new(sx_t[(r, c)], sy_t[(r, c)]) * std::f64::consts::FRAC_1_SQRT_2;
    let s = element(i, j);
    let s_prime = 0.5 * (element(i, i).re - element(j, j).re);
    EffectiveCoupling { s, s_prime, psi: s.arg() }
}

/// The reduced 2×2 model of one avoided crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTwoLevel {
    pub m: i32,
    pub m_prime: i32,
    /// Field at which the block detuning vanishes, tesla.
    pub b0: f64,
    pub epsilon0: f64,
    /// Off-diagonal element times two; its magnitude is the gap Δ₀.
    pub delta0: Complex64,
    pub sweep_rate: f64,
    pub mu_tilde: f64,
    pub s: Complex64,
    pub s_prime: f64,
    pub psi: f64,
}

impl EffectiveTwoLevel {
    pub fn gap(&self) -> f64 {
        self.delta0.norm()
    }

    /// dw/dt = -μ̃ Ḃ₀ (m - m′), J/s.
    pub fn w_rate(&self) -> f64 {
        -self.mu_tilde * self.sweep_rate * (self.m - self.m_prime) as f64
    }

    /// Detuning w at time `t` measured from the crossing instant.
    pub fn w_at(&self, t: f64) -> f64 {
        self.w_rate() * t
    }

    /// The 2×2 Hamiltonian at detuning `w` (real part of Δ₀ convention).
    pub fn matrix(&self, w: f64) -> Matrix2<f64> {
        let d = self.gap() / 2.0;
        Matrix2::new(self.epsilon0 + w / 2.0, d, d, self.epsilon0 - w / 2.0)
    }
}

/// Builds the effective two-level model at a catalogued crossing. The field
/// is first refined so that the block detuning vanishes, using the fact that
/// it is linear in B₀ across the crossing.
pub fn effective_two_level(ham: &SpinHamiltonian, record: &CrossingRecord, sweep_rate: f64) -> Result<EffectiveTwoLevel> {
    if !sweep_rate.is_finite() {
        return Err(Error::validation(format!("sweep rate must be finite, got {sweep_rate}")));
    }
    let (m, mp) = (record.m, record.m_prime);
    let mu = ham.params().mu_tilde();
    let slope_est = -mu * (m - mp) as f64;
    let mut b = record.b0_star;
    let mut red = reduce_pair(ham, b, m, mp, SeparationCheck::Enforce)?;
    for _ in 0..3 {
        let w = red.detuning();
        if w == 0.0 {
            break;
        }
        let h = (2.0 * red.off_diagonal().abs() / mu.abs()).max(1e-9 * b.abs().max(1.0));
        let probe = reduce_pair(ham, b + h, m, mp, SeparationCheck::Enforce)?;
        let mut slope = (probe.detuning() - w) / h;
        if !(slope.is_finite()) || slope == 0.0 {
            slope = slope_est;
        }
        let next = b - w / slope;
        let cand = reduce_pair(ham, next, m, mp, SeparationCheck::Enforce)?;
        if cand.detuning().abs() < w.abs() {
            b = next;
            red = cand;
        } else {
            break;
        }
    }
    let coupling = effective_coupling(&red.unitary, ham.operators(), red.indices);
    Ok(EffectiveTwoLevel {
        m,
        m_prime: mp,
        b0: b,
        epsilon0: red.mean_energy(),
        delta0: Complex64::new(2.0 * red.off_diagonal(), 0.0),
        sweep_rate,
        mu_tilde: mu,
        s: coupling.s,
        s_prime: coupling.s_prime,
        psi: coupling.psi,
    })
}
