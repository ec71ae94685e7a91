//! Level crossings of H₀ and avoided crossings of the full H_S.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::eigen::EigenDecomposition;
use crate::error::{Error, Result};
use crate::spin::{SpinHamiltonian, SpinSystemParams};

/// Coarse scan resolution before golden-section refinement, tesla.
pub const SCAN_STEP: f64 = 1e-3;
/// Minimum field resolution of the refined crossing, tesla.
pub const FIELD_TOL: f64 = 1e-6;
/// Overlap below which level continuation is considered lost.
pub const TRACKING_OVERLAP: f64 = 0.5;
/// Half-width of the per-pair window used when building a catalog, tesla.
pub const CATALOG_HALF_WINDOW: f64 = 0.02;

/// One avoided crossing between the adiabatic levels connected to |m⟩, |m′⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingRecord {
    pub m: i32,
    pub m_prime: i32,
    /// Field of minimum gap, tesla.
    pub b0_star: f64,
    /// Minimum gap Δ₀, joules.
    pub delta0: f64,
    /// Mean energy of the pair at the crossing, joules.
    pub epsilon0: f64,
}

impl CrossingRecord {
    pub fn delta_m(&self) -> i32 {
        (self.m - self.m_prime).abs()
    }
}

/// Field at which |m⟩ and |m′⟩ are degenerate under H₀:
/// μ̃B₀ = -D (m + m′) (1 + (F/D)(m² + m′²)).
pub fn crossing_field_h0(m: i32, m_prime: i32, params: &SpinSystemParams) -> Result<f64> {
    if m == m_prime {
        return Err(Error::validation(format!("crossing needs two distinct levels, got m = m' = {m}")));
    }
    params.validate()?;
    let (mf, mpf) = (m as f64, m_prime as f64);
    let ratio = params.f_over_kb / params.d_over_kb;
    let energy = -params.d() * (mf + mpf) * (1.0 + ratio * (mf * mf + mpf * mpf));
    Ok(energy / params.mu_tilde())
}

/// The two adiabatic levels carrying the most weight on span{|m⟩, |m′⟩}.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TrackedPair {
    /// Eigen-indices, the first being the more |m⟩-like of the two.
    pub levels: [usize; 2],
    /// Smallest of the two weights on the pair subspace.
    pub min_weight: f64,
}

pub(crate) fn track_pair(eig: &EigenDecomposition, i: usize, j: usize) -> TrackedPair {
    let n = eig.dim();
    let weight = |k: usize| {
        let v = eig.vector(k);
        v[i] * v[i] + v[j] * v[j]
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)));
    let (a, b) = (order[0], order[1]);
    let (va, vb) = (eig.vector(a), eig.vector(b));
    let levels = if va[i] * va[i] >= vb[i] * vb[i] { [a, b] } else { [b, a] };
    TrackedPair {
        levels,
        min_weight: weight(a).min(weight(b)),
    }
}

/// Weight of each vector of `new` on the subspace spanned by `old`.
fn continuation_overlap(old: &EigenDecomposition, old_pair: &TrackedPair, new: &EigenDecomposition, new_pair: &TrackedPair) -> f64 {
    new_pair
        .levels
        .iter()
        .map(|&k| {
            let v = new.vector(k);
            old_pair
                .levels
                .iter()
                .map(|&l| {
                    let d = v.dot(&old.vector(l));
                    d * d
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

struct PairScanner<'a> {
    ham: &'a SpinHamiltonian,
    m: i32,
    m_prime: i32,
    i: usize,
    j: usize,
}

impl PairScanner<'_> {
    fn eval(&self, b0: f64) -> Result<(EigenDecomposition, TrackedPair)> {
        let eig = self.ham.eigen(b0)?;
        let pair = track_pair(&eig, self.i, self.j);
        if pair.min_weight < TRACKING_OVERLAP {
            return Err(Error::TrackingLost {
                m: self.m,
                m_prime: self.m_prime,
                field: b0,
                overlap: pair.min_weight,
            });
        }
        Ok((eig, pair))
    }

    fn gap(&self, b0: f64) -> Result<(f64, f64)> {
        let (eig, pair) = self.eval(b0)?;
        let [a, b] = pair.levels;
        let (ea, eb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        Ok(((ea - eb).abs(), 0.5 * (ea + eb)))
    }
}

/// Locates the avoided crossing of the pair inside `window` (tesla).
///
/// A coarse scan at [`SCAN_STEP`] follows the pair by eigenvector continuation
/// and brackets the gap minimum; golden-section search then shrinks the
/// bracket until it is below [`FIELD_TOL`] and small enough that the sweep
/// term across it is negligible next to the gap itself.
pub fn scan_avoided_crossing(ham: &SpinHamiltonian, m: i32, m_prime: i32, window: (f64, f64)) -> Result<CrossingRecord> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite()) || !(hi > lo) {
        return Err(Error::validation(format!("scan window [{lo}, {hi}] must have positive width")));
    }
    let predicted = crossing_field_h0(m, m_prime, ham.params())?;
    if !(predicted > lo && predicted < hi) {
        return Err(Error::validation(format!(
            "window [{lo}, {hi}] T does not bracket the H0 crossing of ({m}, {m_prime}) at {predicted:.6} T"
        )));
    }
    let scanner = PairScanner {
        ham,
        m,
        m_prime,
        i: ham.index_of(m)?,
        j: ham.index_of(m_prime)?,
    };

    let n = (((hi - lo) / SCAN_STEP).ceil() as usize).max(2) + 1;
    let fields: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let mut gaps = Vec::with_capacity(n);
    let mut prev: Option<(EigenDecomposition, TrackedPair)> = None;
    for &b in &fields {
        let (eig, pair) = scanner.eval(b)?;
        if let Some((pe, pp)) = &prev {
            let overlap = continuation_overlap(pe, pp, &eig, &pair);
            if overlap < TRACKING_OVERLAP {
                return Err(Error::TrackingLost {
                    m,
                    m_prime,
                    field: b,
                    overlap,
                });
            }
        }
        let [a, c] = pair.levels;
        gaps.push((eig.eigenvalues[a] - eig.eigenvalues[c]).abs());
        prev = Some((eig, pair));
    }
    let k_min = gaps
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    if k_min == 0 || k_min == n - 1 {
        return Err(Error::Bracketing { m, m_prime, lo, hi });
    }

    let slope = ham.params().mu_tilde() * (m - m_prime).abs() as f64;
    let (b_star, mut delta0, epsilon0) = golden_section(&scanner, fields[k_min - 1], fields[k_min + 1], slope)?;
    if !connected(&ham.matrix(predicted), scanner.i, scanner.j) {
        // No chain of nonzero elements links the two states: the levels
        // cross exactly and the residual is bracketing resolution.
        delta0 = 0.0;
    }
    if !(b_star > lo && b_star < hi) {
        return Err(Error::Bracketing { m, m_prime, lo, hi });
    }
    Ok(CrossingRecord {
        m,
        m_prime,
        b0_star: b_star,
        delta0,
        epsilon0,
    })
}

/// Whether `i` and `j` lie in the same block of the sparsity graph of `h`.
fn connected(h: &DMatrix<f64>, i: usize, j: usize) -> bool {
    let n = h.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![i];
    seen[i] = true;
    while let Some(r) = stack.pop() {
        if r == j {
            return true;
        }
        for c in 0..n {
            if !seen[c] && h[(r, c)] != 0.0 {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    false
}

fn golden_section(scanner: &PairScanner<'_>, mut a: f64, mut b: f64, slope: f64) -> Result<(f64, f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    const MAX_ITER: usize = 400;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = scanner.gap(c)?;
    let mut fd = scanner.gap(d)?;
    let mut best = if fc.0 <= fd.0 { (c, fc) } else { (d, fd) };
    for _ in 0..MAX_ITER {
        let width = b - a;
        let floor = 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300);
        let sweep_term = slope * width;
        if (width < FIELD_TOL && sweep_term < 1e-3 * best.1 .0) || width <= floor {
            break;
        }
        if fc.0 <= fd.0 {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = scanner.gap(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = scanner.gap(d)?;
        }
        for (x, f) in [(c, fc), (d, fd)] {
            if f.0 < best.1 .0 {
                best = (x, f);
            }
        }
    }
    Ok((best.0, best.1 .0, best.1 .1))
}

/// Eigenvalues of H_S on a field grid.
#[derive(Debug, Clone)]
pub struct LevelDiagram {
    pub fields: Vec<f64>,
    /// Ascending eigenvalues per field, joules.
    pub energies: Vec<Vec<f64>>,
}

impl LevelDiagram {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.energies.first().map_or(0, Vec::len);
        write!(w, "B0_tesla")?;
        for k in 1..=dim {
            write!(w, ",E_{k}_joule")?;
        }
        writeln!(w)?;
        for (b, row) in self.fields.iter().zip(&self.energies) {
            write!(w, "{b:.16e}")?;
            for e in row {
                write!(w, ",{e:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn level_diagram(ham: &SpinHamiltonian, grid: &[f64]) -> Result<LevelDiagram> {
    if grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::validation("level diagram grid must be sorted ascending"));
    }
    let energies = grid
        .par_iter()
        .map(|&b| ham.eigen(b).map(|e| e.eigenvalues.iter().copied().collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(LevelDiagram {
        fields: grid.to_vec(),
        energies,
    })
}

/// Avoided crossings found in a field window, plus the pairs that could not
/// be resolved.
#[derive(Debug, Default)]
pub struct CrossingCatalog {
    /// Sorted by crossing field.
    pub records: Vec<CrossingRecord>,
    pub skipped: Vec<(i32, i32, String)>,
}

/// Scans every pair with m < 0 < m′ whose H₀ crossing lies strictly inside
/// `window`. Pairs whose levels cannot be followed (strong mixing near the
/// barrier top) are reported in `skipped` instead of failing the catalog.
pub fn build_catalog(ham: &SpinHamiltonian, window: (f64, f64)) -> Result<CrossingCatalog> {
    let s = ham.params().integer_spin()?;
    let mut candidates = Vec::new();
    for m in -s..0 {
        for m_prime in 1..=s {
            let b = crossing_field_h0(m, m_prime, ham.params())?;
            if b > window.0 && b < window.1 {
                candidates.push((m, m_prime, b));
            }
        }
    }
    let results: Vec<_> = candidates
        .par_iter()
        .map(|&(m, m_prime, b)| {
            let lo = (b - CATALOG_HALF_WINDOW).max(window.0);
            let hi = (b + CATALOG_HALF_WINDOW).min(window.1);
            (m, m_prime, scan_avoided_crossing(ham, m, m_prime, (lo, hi)))
        })
        .collect();
    let mut catalog = CrossingCatalog::default();
    for (m, m_prime, r) in results {
        match r {
            Ok(rec) => catalog.records.push(rec),
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => catalog.skipped.push((m, m_prime, e.to_string())),
        }
    }
    catalog.records.sort_by(|a, b| a.b0_star.total_cmp(&b.b0_star));
    Ok(catalog)
}
