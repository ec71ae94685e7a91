//! Quantities derived from trajectories and level catalogs: dM/dB₀ peak
//! curves, the minimal-T₀ temperature scan and the emitted energy.

use std::io::Write;

use rayon::prelude::*;

use crate::constants::HBAR;
use crate::dynamics::{characteristic_time, PhysicalContext, Trajectory};
use crate::error::{Error, Result};
use crate::lzs::metastable_populations;
use crate::reduction::{effective_coupling, reduce_pair, SeparationCheck};
use crate::spin::SpinHamiltonian;

/// dM/dB₀ along a sweep, in the dimensionless form -dZ/d(vτ).
#[derive(Debug, Clone)]
pub struct PeakReport {
    pub v: f64,
    /// vτ at the largest |dM/dB₀|.
    pub peak_abscissa: f64,
    /// Signed curve value there.
    pub peak_height: f64,
    pub abscissa: Vec<f64>,
    pub curve: Vec<f64>,
}

impl PeakReport {
    /// Sign changes of the curve, ignoring samples whose magnitude is below
    /// `rel_threshold` times the peak.
    pub fn sign_changes(&self, rel_threshold: f64) -> usize {
        let cut = rel_threshold * self.peak_height.abs();
        let mut count = 0;
        let mut last = 0.0f64;
        for &c in &self.curve {
            if c.abs() <= cut {
                continue;
            }
            if last != 0.0 && c.signum() != last.signum() {
                count += 1;
            }
            last = c;
        }
        count
    }
}

/// Centered differences of Z with respect to vτ on the trajectory grid.
/// Emission (Z decreasing) shows up as a positive peak.
pub fn dm_db0_curve(traj: &Trajectory) -> Result<PeakReport> {
    let v = traj.config.v;
    if v == 0.0 {
        return Err(Error::validation("dM/dB0 needs a nonzero sweep rate v"));
    }
    let n = traj.len();
    if n < 3 || !(traj.tau[0] < 0.0 && traj.tau[n - 1] > 0.0) {
        return Err(Error::validation("trajectory must span the resonance at tau = 0"));
    }
    let mut abscissa = Vec::with_capacity(n - 2);
    let mut curve = Vec::with_capacity(n - 2);
    for k in 1..n - 1 {
        abscissa.push(v * traj.tau[k]);
        curve.push(-(traj.z[k + 1] - traj.z[k - 1]) / (v * (traj.tau[k + 1] - traj.tau[k - 1])));
    }
    let k = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, _)| k)
        .expect("curve has samples");
    Ok(PeakReport {
        v,
        peak_abscissa: abscissa[k],
        peak_height: curve[k],
        abscissa,
        curve,
    })
}

pub fn write_peak_csv<W: Write>(reports: &[PeakReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "v,peak_abscissa,peak_height")?;
    for r in reports {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", r.v, r.peak_abscissa, r.peak_height)?;
    }
    Ok(())
}

pub fn write_curve_csv<W: Write>(report: &PeakReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "v_tau,dM_dB0")?;
    for (x, c) in report.abscissa.iter().zip(&report.curve) {
        writeln!(w, "{x:.16e},{c:.16e}")?;
    }
    Ok(())
}

/// A radiating transition at a fixed field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionCoupling {
    pub m: i32,
    pub m_prime: i32,
    pub s_magnitude: f64,
    /// Transition angular frequency, rad/s.
    pub omega: f64,
}

/// Transitions m → m′ with m < 0 < m′ whose m-like level lies above the
/// m′-like one at `b0`, so that a molecule left in the metastable well can
/// emit. Pairs the reduction cannot isolate are dropped.
pub fn transition_catalog(ham: &SpinHamiltonian, b0: f64) -> Result<Vec<TransitionCoupling>> {
    let s = ham.params().integer_spin()?;
    let pairs: Vec<(i32, i32)> = (-s..0).flat_map(|m| (1..=s).map(move |mp| (m, mp))).collect();
    let found: Vec<Option<TransitionCoupling>> = pairs
        .par_iter()
        .map(|&(m, mp)| {
            let red = reduce_pair(ham, b0, m, mp, SeparationCheck::Skip).ok()?;
            let [e_m, e_mp] = red.tracked_eigenvalues;
            if e_m <= e_mp {
                return None;
            }
            let c = effective_coupling(&red.unitary, ham.operators(), red.indices);
            Some(TransitionCoupling {
                m,
                m_prime: mp,
                s_magnitude: c.s.norm(),
                omega: (e_m - e_mp) / HBAR,
            })
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T0ScanRow {
    pub temperature: f64,
    pub m: i32,
    pub m_prime: i32,
    /// Smallest T₀ over the catalog, seconds.
    pub t0: f64,
}

/// Per temperature, the transition with the shortest T₀ when the active
/// density is `total_density` times the metastable-well population of m.
pub fn t0_scan(ham: &SpinHamiltonian, b0: f64, temperatures: &[f64], total_density: f64, catalog: &[TransitionCoupling]) -> Result<Vec<T0ScanRow>> {
    if !(total_density > 0.0) || !total_density.is_finite() {
        return Err(Error::validation(format!("total density must be > 0, got {total_density}")));
    }
    if catalog.iter().all(|c| c.s_magnitude == 0.0) {
        return Err(Error::ScanEmpty);
    }
    let mu = ham.params().mu_tilde();
    temperatures
        .par_iter()
        .map(|&t| {
            let pop = metastable_populations(ham, b0, t)?;
            let mut best: Option<T0ScanRow> = None;
            for c in catalog {
                let n0 = total_density * pop[ham.index_of(c.m)?];
                if n0 <= 0.0 || c.s_magnitude == 0.0 {
                    continue;
                }
                let t0 = characteristic_time(n0, c.omega, mu, c.s_magnitude);
                if best.is_none_or(|b| t0 < b.t0) {
                    best = Some(T0ScanRow {
                        temperature: t,
                        m: c.m,
                        m_prime: c.m_prime,
                        t0,
                    });
                }
            }
            best.ok_or(Error::ScanEmpty)
        })
        .collect()
}

pub fn write_t0_csv<W: Write>(rows: &[T0ScanRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "temperature_K,m,m_prime,T0_seconds")?;
    for r in rows {
        writeln!(w, "{:.16e},{},{},{:.16e}", r.temperature, r.m, r.m_prime, r.t0)?;
    }
    Ok(())
}

/// Energy leaving the cavity, ħΩ · (η N₀ V) · κ∫I dτ: photons leaked per
/// active molecule times the number of active molecules.
pub fn emitted_energy(traj: &Trajectory, ctx: &PhysicalContext) -> Result<f64> {
    let volume = ctx
        .sample_volume
        .ok_or_else(|| Error::validation("emitted energy needs the sample volume"))?;
    if !(volume > 0.0) {
        return Err(Error::validation(format!("sample volume must be > 0, got {volume}")));
    }
    let photons = traj.config.kappa * traj.integrated_intensity();
    Ok(HBAR * ctx.omega * ctx.n0_eta * volume * photons)
}
