//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use spincavity::spin::SpinHamiltonian;

/// Probability of adiabatic following through a linear crossing, from
/// fixed-step RK4 on the two-level Schrödinger equation
/// i dψ/ds = H(s) ψ, H = [[αs/2, 1/2], [1/2, -αs/2]].
///
/// Units: energy Δ₀, time ħ/Δ₀, so α = ħ w / Δ₀². The window is ±50
/// gap-times Δ₀/w, i.e. the detuning runs from -50Δ₀ to +50Δ₀. The state
/// starts in the lower adiabatic level and the result is the population of
/// the lower adiabatic level at the end.
pub fn lzs_schrodinger(alpha: f64) -> f64 {
    let s_end = 50.0 / alpha;
    let rate = 0.5 * (alpha * s_end).hypot(1.0);
    let steps = ((2.0 * s_end * rate / 0.004).ceil() as usize).max(20_000);
    let h = 2.0 * s_end / steps as f64;
    let i = Complex64::i();
    let rhs = |s: f64, psi: [Complex64; 2]| -> [Complex64; 2] {
        let d = 0.5 * alpha * s;
        [-i * (psi[0] * d + psi[1] * 0.5), -i * (psi[0] * 0.5 - psi[1] * d)]
    };
    let mut psi = lower_adiabatic(alpha, -s_end);
    let mut s = -s_end;
    for _ in 0..steps {
        let k1 = rhs(s, psi);
        let k2 = rhs(s + h / 2.0, add(psi, k1, h / 2.0));
        let k3 = rhs(s + h / 2.0, add(psi, k2, h / 2.0));
        let k4 = rhs(s + h, add(psi, k3, h));
        for c in 0..2 {
            psi[c] += (k1[c] + k2[c] * 2.0 + k3[c] * 2.0 + k4[c]) * (h / 6.0);
        }
        s += h;
    }
    let g = lower_adiabatic(alpha, s_end);
    (g[0].conj() * psi[0] + g[1].conj() * psi[1]).norm_sqr()
}

fn add(a: [Complex64; 2], k: [Complex64; 2], h: f64) -> [Complex64; 2] {
    [a[0] + k[0] * h, a[1] + k[1] * h]
}

fn lower_adiabatic(alpha: f64, s: f64) -> [Complex64; 2] {
    // eigenvector of [[d, 1/2], [1/2, -d]] for eigenvalue -sqrt(d² + 1/4)
    let d = 0.5 * alpha * s;
    let e = d.hypot(0.5);
    let (x, y): (f64, f64) = (0.5, -d - e);
    let n = x.hypot(y);
    [Complex64::new(x / n, 0.0), Complex64::new(y / n, 0.0)]
}

/// Eigen-decomposition with nalgebra's own solver, ascending.
pub fn reference_eigh(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = order.iter().map(|&k| e.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(h.nrows(), h.ncols(), |r, c| e.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// The two eigenlevels with the largest weight on {|m⟩, |m′⟩}.
pub fn pair_levels(vecs: &DMatrix<f64>, i: usize, j: usize) -> (usize, usize) {
    let w = |k: usize| vecs[(i, k)].powi(2) + vecs[(j, k)].powi(2);
    let mut order: Vec<usize> = (0..vecs.ncols()).collect();
    order.sort_by(|&a, &b| w(b).total_cmp(&w(a)));
    (order[0], order[1])
}

pub fn pair_gap(ham: &SpinHamiltonian, b: f64, i: usize, j: usize) -> f64 {
    let (vals, vecs) = reference_eigh(&ham.matrix(b));
    let (a, c) = pair_levels(&vecs, i, j);
    (vals[a] - vals[c]).abs()
}

/// Minimum gap of the pair in [lo, hi] by repeated dense scans, each
/// zooming onto the neighbourhood of the previous minimum, followed by a
/// parabola through the last three points. Returns (field, gap).
pub fn gap_minimum(ham: &SpinHamiltonian, m: i32, m_prime: i32, lo: f64, hi: f64) -> (f64, f64) {
    let (i, j) = (ham.index_of(m).unwrap(), ham.index_of(m_prime).unwrap());
    let (mut a, mut b) = (lo, hi);
    let n = 41;
    let mut best = (a, f64::INFINITY);
    for _ in 0..12 {
        let xs: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
        let gs: Vec<f64> = xs.iter().map(|&x| pair_gap(ham, x, i, j)).collect();
        let k = (0..n).min_by(|&p, &q| gs[p].total_cmp(&gs[q])).unwrap();
        best = (xs[k], gs[k]);
        if k > 0 && k < n - 1 {
            let (x0, x1, x2) = (xs[k - 1], xs[k], xs[k + 1]);
            let (g0, g1, g2) = (gs[k - 1], gs[k], gs[k + 1]);
            let denom = g0 - 2.0 * g1 + g2;
            if denom > 0.0 {
                let xv = x1 + 0.5 * (x1 - x0) * (g0 - g2) / denom;
                if xv > x0 && xv < x2 {
                    let gv = pair_gap(ham, xv, i, j);
                    if gv < best.1 {
                        best = (xv, gv);
                    }
                }
            }
        }
        let step = (b - a) / (n - 1) as f64;
        a = xs[k.saturating_sub(1)];
        b = xs[(k + 1).min(n - 1)];
        if step < 1e-12 {
            break;
        }
    }
    best
}

/// |⟨m̃|(Sx + Sy)/√2|m̃′⟩| where |m̃⟩, |m̃′⟩ are the bare states projected
/// onto the span of the pair's two eigenvectors and then orthonormalized
/// symmetrically (G^{-1/2} with G their Gram matrix).
pub fn projected_coupling(ham: &SpinHamiltonian, b: f64, m: i32, m_prime: i32) -> f64 {
    let (_, vecs) = reference_eigh(&ham.matrix(b));
    let (i, j) = (ham.index_of(m).unwrap(), ham.index_of(m_prime).unwrap());
    let (a, c) = pair_levels(&vecs, i, j);
    let basis = DMatrix::from_columns(&[vecs.column(a), vecs.column(c)]);
    let p = &basis * basis.transpose();
    let x = p.column(i).into_owned();
    let y = p.column(j).into_owned();
    let g = DMatrix::from_row_slice(2, 2, &[x.dot(&x), x.dot(&y), y.dot(&x), y.dot(&y)]);
    let ge = SymmetricEigen::new(g);
    let inv_sqrt = &ge.eigenvectors * DMatrix::from_diagonal(&ge.eigenvalues.map(|l| l.powf(-0.5))) * ge.eigenvectors.transpose();
    let raw = DMatrix::from_columns(&[x, y]);
    let w = raw * inv_sqrt;
    let ops = ham.operators();
    let op = (ops.sx.map(|x| Complex64::new(x, 0.0)) + &ops.sy) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let u = w.column(0).map(|x| Complex64::new(x, 0.0));
    let v = w.column(1).map(|x| Complex64::new(x, 0.0));
    (u.adjoint() * op * v)[(0, 0)].norm()
}
