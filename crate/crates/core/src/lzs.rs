//! Landau–Zener–Stückelberg transitions, thermal initial states, the
//! staircase hysteresis cascade and the fit of the transverse coefficients
//! to step heights.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constants::{HBAR, KB};
use crate::crossings::{build_catalog, CrossingRecord};
use crate::error::{Error, Result};
use crate::nelder_mead::{minimize, SimplexOptions};
use crate::spin::{SpinHamiltonian, SpinSystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LzsOutcome {
    pub probability: f64,
    /// Set when the sweep rate is zero and the adiabatic limit P = 1 was
    /// returned instead of the formula.
    pub adiabatic_limit: bool,
}

/// P = 1 - exp(-π Δ₀² / (2ħ |w_rate|)), the probability of following the
/// adiabatic level through the crossing, i.e. of the m → m′ transfer.
pub fn lzs_probability(delta0: f64, w_rate: f64) -> Result<LzsOutcome> {
    if !(delta0 >= 0.0) || !delta0.is_finite() {
        return Err(Error::validation(format!("gap must be finite and >= 0, got {delta0}")));
    }
    if !w_rate.is_finite() {
        return Err(Error::validation(format!("sweep rate must be finite, got {w_rate}")));
    }
    if w_rate == 0.0 {
        return Ok(LzsOutcome {
            probability: 1.0,
            adiabatic_limit: true,
        });
    }
    let exponent = PI * delta0 * delta0 / (2.0 * HBAR * w_rate.abs());
    Ok(LzsOutcome {
        probability: -(-exponent).exp_m1(),
        adiabatic_limit: false,
    })
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::validation(format!("temperature must be > 0 K, got {t}")));
    }
    Ok(())
}

/// Boltzmann weights of `energies` (joules) at temperature `t`, shifted by
/// the lowest energy so the largest exponent is zero.
pub fn boltzmann(energies: &[f64], t: f64) -> Result<Vec<f64>> {
    check_temperature(t)?;
    let lowest = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - lowest) / (KB * t)).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Thermal populations of the eigenlevels of H_S at `b0`, in ascending
/// energy order.
pub fn thermal_populations(ham: &SpinHamiltonian, b0: f64, t: f64) -> Result<Vec<f64>> {
    check_temperature(t)?;
    let eig = ham.eigen(b0)?;
    boltzmann(eig.eigenvalues.as_slice(), t)
}

/// Labels every eigenlevel with the |m⟩ it overlaps most, assigning labels
/// greedily in order of decreasing weight so that each m is used once.
/// Returns the eigen-energy of each basis state, indexed like the basis.
pub fn labelled_energies(ham: &SpinHamiltonian, b0: f64) -> Result<Vec<f64>> {
    let eig = ham.eigen(b0)?;
    let n = eig.dim();
    let mut weights = Vec::with_capacity(n * n);
    for k in 0..n {
        for i in 0..n {
            weights.push((eig.eigenvectors[(i, k)].powi(2), i, k));
        }
    }
    weights.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut energy = vec![f64::NAN; n];
    let mut level_used = vec![false; n];
    for (_, i, k) in weights {
        if energy[i].is_nan() && !level_used[k] {
            energy[i] = eig.eigenvalues[k];
            level_used[k] = true;
        }
    }
    Ok(energy)
}

/// Populations of the basis states after negative saturation: Boltzmann
/// weights over the m < 0 well only, zero elsewhere. Indexed like the basis.
pub fn metastable_populations(ham: &SpinHamiltonian, b0: f64, t: f64) -> Result<Vec<f64>> {
    check_temperature(t)?;
    let energy = labelled_energies(ham, b0)?;
    let ops = ham.operators();
    let well: Vec<usize> = (0..ham.dim()).filter(|&i| ops.m_of(i) < 0.0).collect();
    let w = boltzmann(&well.iter().map(|&i| energy[i]).collect::<Vec<_>>(), t)?;
    let mut p = vec![0.0; ham.dim()];
    for (&i, wi) in well.iter().zip(w) {
        p[i] = wi;
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisConfig {
    /// dB₀/dt, T/s.
    pub sweep_rate: f64,
    pub temperature: f64,
    pub field_range: (f64, f64),
    pub grid_points: usize,
    /// Re-thermalize each well after every crossing.
    pub rethermalize: bool,
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        Self {
            sweep_rate: 0.03,
            temperature: 0.5,
            field_range: (0.05, 1.3),
            grid_points: 1251,
            rethermalize: false,
        }
    }
}

impl HysteresisConfig {
    pub fn validate(&self) -> Result<()> {
        check_temperature(self.temperature)?;
        if !(self.sweep_rate > 0.0) || !self.sweep_rate.is_finite() {
            return Err(Error::validation(format!("sweep rate must be > 0 T/s, got {}", self.sweep_rate)));
        }
        let (lo, hi) = self.field_range;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::validation(format!("field range [{lo}, {hi}] is empty")));
        }
        if self.grid_points < 2 {
            return Err(Error::validation("hysteresis grid needs at least 2 points"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.field_range;
        let n = self.grid_points - 1;
        (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub crossing: CrossingRecord,
    pub probability: f64,
    /// Population moved from m to m′.
    pub transferred: f64,
}

impl StepRecord {
    /// Magnetization jump caused by this crossing.
    pub fn height(&self) -> f64 {
        self.transferred * (self.crossing.m_prime - self.crossing.m) as f64
    }
}

#[derive(Debug, Clone)]
pub struct HysteresisResult {
    pub field_grid: Vec<f64>,
    /// ⟨S_z⟩ per molecule.
    pub magnetization: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub sweep_rate: f64,
    pub temperature: f64,
    /// Pairs whose crossing could not be resolved, with the reason.
    pub skipped: Vec<(i32, i32, String)>,
    /// Final populations, indexed like the basis.
    pub populations: Vec<f64>,
}

impl HysteresisResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "B0_tesla,magnetization")?;
        for (b, m) in self.field_grid.iter().zip(&self.magnetization) {
            writeln!(w, "{b:.16e},{m:.16e}")?;
        }
        Ok(())
    }

    /// Total step height within `window` tesla of `b0`.
    pub fn step_near(&self, b0: f64, window: f64) -> f64 {
        self.steps
            .iter()
            .filter(|s| (s.crossing.b0_star - b0).abs() <= window)
            .map(StepRecord::height)
            .sum()
    }

    pub fn largest_step(&self) -> Option<&StepRecord> {
        self.steps.iter().max_by(|a, b| a.height().total_cmp(&b.height()))
    }
}

fn magnetization(ham: &SpinHamiltonian, p: &[f64]) -> f64 {
    let ops = ham.operators();
    p.iter().enumerate().map(|(i, pi)| pi * ops.m_of(i)).sum()
}

fn rethermalize_wells(ham: &SpinHamiltonian, p: &mut [f64], b0: f64, t: f64) -> Result<()> {
    let ops = ham.operators();
    for sign in [-1.0, 1.0] {
        let well: Vec<usize> = (0..p.len()).filter(|&i| ops.m_of(i) * sign > 0.0).collect();
        let total: f64 = well.iter().map(|&i| p[i]).sum();
        if total == 0.0 {
            continue;
        }
        let energies: Vec<f64> = well.iter().map(|&i| ham.diagonal_energy(ops.m_of(i), b0)).collect();
        for (&i, w) in well.iter().zip(boltzmann(&energies, t)?) {
            p[i] = total * w;
        }
    }
    Ok(())
}

/// Up-sweep from the negatively saturated state. Every catalogued crossing
/// is passed once, in field order, transferring p_m·P from m to m′.
pub fn simulate_hysteresis(ham: &SpinHamiltonian, cfg: &HysteresisConfig) -> Result<HysteresisResult> {
    cfg.validate()?;
    let catalog = build_catalog(ham, cfg.field_range)?;
    if catalog.records.is_empty() {
        return Err(Error::validation(format!(
            "no crossings in field range [{}, {}] T",
            cfg.field_range.0, cfg.field_range.1
        )));
    }
    let mu = ham.params().mu_tilde();
    let mut p = metastable_populations(ham, cfg.field_range.0, cfg.temperature)?;
    let grid = cfg.grid();
    let mut magnet = Vec::with_capacity(grid.len());
    let mut steps = Vec::with_capacity(catalog.records.len());
    let mut next = 0;
    for &b in &grid {
        while next < catalog.records.len() && catalog.records[next].b0_star <= b {
            let rec = catalog.records[next];
            let w_rate = mu * cfg.sweep_rate * rec.delta_m() as f64;
            let prob = lzs_probability(rec.delta0, w_rate)?.probability;
            let (i, j) = (ham.index_of(rec.m)?, ham.index_of(rec.m_prime)?);
            let moved = p[i] * prob;
            p[i] -= moved;
            p[j] += moved;
            if cfg.rethermalize {
                rethermalize_wells(ham, &mut p, rec.b0_star, cfg.temperature)?;
            }
            steps.push(StepRecord {
                crossing: rec,
                probability: prob,
                transferred: moved,
            });
            next += 1;
        }
        magnet.push(magnetization(ham, &p));
    }
    Ok(HysteresisResult {
        field_grid: grid,
        magnetization: magnet,
        steps,
        sweep_rate: cfg.sweep_rate,
        temperature: cfg.temperature,
        skipped: catalog.skipped,
        populations: p,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// (B₀ in tesla, step height in units of ⟨S_z⟩).
    pub targets: Vec<(f64, f64)>,
    /// Initial (C/k_B in K, E/k_B in K, K_coeff).
    pub initial: [f64; 3],
    pub xtol: f64,
    pub ftol: f64,
    pub max_iterations: usize,
    /// Steps within this distance of a target field count toward it, tesla.
    pub match_window: f64,
    /// Relative misfit denominators are at least this large.
    pub height_floor: f64,
    /// Additional simplex starts from randomly perturbed guesses.
    pub restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        let p = SpinSystemParams::default();
        Self {
            targets: Vec::new(),
            initial: [p.c_over_kb, p.e_over_kb, p.k_coeff],
            xtol: 1e-5,
            ftol: 1e-12,
            max_iterations: 400,
            match_window: 0.02,
            height_floor: 1e-300,
            restarts: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.targets.len() < 3 {
            return Err(Error::validation(format!(
                "fit needs at least 3 target steps for 3 parameters, got {}",
                self.targets.len()
            )));
        }
        if self.targets.iter().any(|(b, h)| !b.is_finite() || !h.is_finite()) {
            return Err(Error::validation("fit targets must be finite"));
        }
        if !(self.xtol > 0.0 && self.ftol > 0.0) {
            return Err(Error::validation("simplex tolerances must be > 0"));
        }
        if !(self.match_window > 0.0) || !(self.height_floor > 0.0) {
            return Err(Error::validation("match window and height floor must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("max_iterations must be > 0"));
        }
        if self.initial.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("initial guess must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub c_over_kb: f64,
    pub e_over_kb: f64,
    pub k_coeff: f64,
    pub residual: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn params(&self, base: &SpinSystemParams) -> SpinSystemParams {
        with_transverse(base, [self.c_over_kb, self.e_over_kb, self.k_coeff])
    }

    pub fn write_report<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "c_over_kb = {:.16e}", self.c_over_kb)?;
        writeln!(w, "e_over_kb = {:.16e}", self.e_over_kb)?;
        writeln!(w, "k_coeff = {:.16e}", self.k_coeff)?;
        writeln!(w, "residual = {:.16e}", self.residual)?;
        writeln!(w, "iterations = {}", self.iterations)?;
        writeln!(w, "evaluations = {}", self.evaluations)?;
        writeln!(w, "converged = {}", self.converged)
    }
}

fn with_transverse(base: &SpinSystemParams, x: [f64; 3]) -> SpinSystemParams {
    SpinSystemParams {
        c_over_kb: x[0],
        e_over_kb: x[1],
        k_coeff: x[2],
        ..*base
    }
}

/// Step heights of the model at the target fields.
pub fn model_steps(params: &SpinSystemParams, fit: &FitConfig, hyst: &HysteresisConfig) -> Result<Vec<f64>> {
    let ham = SpinHamiltonian::new(*params)?;
    let result = simulate_hysteresis(&ham, hyst)?;
    Ok(fit.targets.iter().map(|&(b, _)| result.step_near(b, fit.match_window)).collect())
}

/// Σ ((h - t) / max(|t|, floor))² over the targets. Step heights span many
/// decades, so each target is weighted by its own scale.
pub fn fit_residual(params: &SpinSystemParams, fit: &FitConfig, hyst: &HysteresisConfig) -> Result<f64> {
    let model = model_steps(params, fit, hyst)?;
    Ok(model
        .iter()
        .zip(&fit.targets)
        .map(|(h, &(_, t))| ((h - t) / t.abs().max(fit.height_floor)).powi(2))
        .sum())
}

/// Fits (C, E, K_coeff) to the target steps with a simplex search in
/// variables scaled by the initial guess (or by the default magnitudes
/// where the guess is zero).
pub fn fit_anisotropy_params(fit: &FitConfig, base: &SpinSystemParams, hyst: &HysteresisConfig, seed: u64) -> Result<FitResult> {
    fit.validate()?;
    hyst.validate()?;
    base.validate()?;
    let defaults = SpinSystemParams::default();
    let fallback = [defaults.c_over_kb, defaults.e_over_kb, defaults.k_coeff];
    let scale: Vec<f64> = fit
        .initial
        .iter()
        .zip(fallback)
        .map(|(&g, d)| if g != 0.0 { g.abs() } else { d.abs() })
        .collect();
    let unscale = |x: &[f64]| [x[0] * scale[0], x[1] * scale[1], x[2] * scale[2]];
    let objective = |x: &[f64]| fit_residual(&with_transverse(base, unscale(x)), fit, hyst).unwrap_or(f64::INFINITY);
    let opts = SimplexOptions {
        xtol: fit.xtol,
        ftol: fit.ftol,
        max_iterations: fit.max_iterations,
        initial_step: 0.1,
    };

    let start: Vec<f64> = fit.initial.iter().zip(&scale).map(|(g, s)| g / s).collect();
    let mut best = minimize(objective, &start, &opts);
    let mut iterations = best.iterations;
    let mut evaluations = best.evaluations;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..fit.restarts {
        let perturbed: Vec<f64> = start.iter().map(|x| x * (1.0 + rng.gen_range(-0.2..0.2))).collect();
        let r = minimize(objective, &perturbed, &opts);
        iterations += r.iterations;
        evaluations += r.evaluations;
        if r.value < best.value {
            best = r;
        }
    }
    let x = unscale(&best.x);
    Ok(FitResult {
        c_over_kb: x[0],
        e_over_kb: x[1],
        k_coeff: x[2],
        residual: best.value,
        iterations,
        evaluations,
        converged: best.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mn12() -> SpinHamiltonian {
        SpinHamiltonian::new(SpinSystemParams::default()).unwrap()
    }

    #[test]
    fn no_gap_no_transfer() {
        assert_eq!(lzs_probability(0.0, 1e-23).unwrap().probability, 0.0);
    }

    #[test]
    fn forced_half() {
        let w = 1e-23;
        let delta = (2.0 * HBAR * w * 2f64.ln() / PI).sqrt();
        let p = lzs_probability(delta, w).unwrap();
        assert!((p.probability - 0.5).abs() < 1e-14);
        assert!(!p.adiabatic_limit);
        assert_eq!(lzs_probability(delta, -w).unwrap().probability, p.probability);
    }

    #[test]
    fn zero_sweep_is_adiabatic() {
        let p = lzs_probability(1e-30, 0.0).unwrap();
        assert_eq!(p.probability, 1.0);
        assert!(p.adiabatic_limit);
        assert!(lzs_probability(-1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn monotone(d1 in 0.0f64..1e-27, d2 in 0.0f64..1e-27, w1 in 1e-26f64..1e-20, w2 in 1e-26f64..1e-20) {
            let (dl, dh) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let (wl, wh) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
            let p = |d, w| lzs_probability(d, w).unwrap().probability;
            prop_assert!(p(dl, wl) <= p(dh, wl));
            prop_assert!(p(dl, wh) <= p(dl, wl));
            prop_assert!((0.0..=1.0).contains(&p(dh, wl)));
        }
    }

    #[test]
    fn thermal_limits() {
        let ham = mn12();
        let hot = thermal_populations(&ham, 1.4, 1e9).unwrap();
        assert!(hot.iter().all(|p| (p - 1.0 / 21.0).abs() < 1e-6));
        let cold = thermal_populations(&ham, 1.4, 1e-3).unwrap();
        assert!((cold[0] - 1.0).abs() < 1e-12);
        assert!(thermal_populations(&ham, 1.4, 0.0).is_err());
        assert!(thermal_populations(&ham, 1.4, -1.0).is_err());
    }

    #[test]
    fn metastable_well_at_two_kelvin() {
        let ham = mn12();
        let p = metastable_populations(&ham, 1.4, 2.0).unwrap();
        // oracle: Boltzmann over the eigenvalues whose vectors peak on m < 0
        let eig = ham.eigen(1.4).unwrap();
        let mut e = Vec::new();
        for k in 0..21 {
            let (imax, _) = eig.eigenvectors.column(k).iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            if imax < 10 {
                e.push((imax, eig.eigenvalues[k]));
            }
        }
        assert_eq!(e.len(), 10);
        let emin = e.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let z: f64 = e.iter().map(|x| (-(x.1 - emin) / (KB * 2.0)).exp()).sum();
        for (i, en) in e {
            let expect = (-(en - emin) / (KB * 2.0)).exp() / z;
            assert!((p[i] - expect).abs() < 1e-12, "m index {i}: {} vs {expect}", p[i]);
        }
        assert!(p[10..].iter().all(|&x| x == 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[0] > 0.99);
    }

    #[test]
    fn flat_without_transverse_terms() {
        let ham = SpinHamiltonian::new(SpinSystemParams::default().without_transverse()).unwrap();
        let cfg = HysteresisConfig {
            field_range: (0.3, 1.2),
            grid_points: 91,
            ..HysteresisConfig::default()
        };
        let r = simulate_hysteresis(&ham, &cfg).unwrap();
        let m0 = r.magnetization[0];
        assert!(r.magnetization.iter().all(|&m| m == m0));
        assert!(r.steps.iter().all(|s| s.transferred == 0.0));
    }

    #[test]
    fn staircase_properties() {
        let ham = mn12();
        let cfg = HysteresisConfig {
            temperature: 2.0,
            field_range: (0.05, 1.3),
            grid_points: 251,
            rethermalize: false,
            ..HysteresisConfig::default()
        };
        let r = simulate_hysteresis(&ham, &cfg).unwrap();
        assert!(r.magnetization.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.magnetization.iter().all(|m| (-10.0..=10.0).contains(m)));
        assert!((r.populations.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r.populations.iter().all(|&p| p >= 0.0));
        for s in &r.steps {
            let b = crate::crossings::crossing_field_h0(s.crossing.m, s.crossing.m_prime, ham.params()).unwrap();
            assert!((s.crossing.b0_star - b).abs() < 0.02);
        }
        // magnetization only changes at crossing fields
        for (k, w) in r.magnetization.windows(2).enumerate() {
            if w[1] != w[0] {
                let (lo, hi) = (r.field_grid[k], r.field_grid[k + 1]);
                assert!(r.steps.iter().any(|s| s.crossing.b0_star > lo && s.crossing.b0_star <= hi));
            }
        }
    }

    #[test]
    fn rethermalized_cascade_stays_on_simplex() {
        let ham = mn12();
        let cfg = HysteresisConfig {
            temperature: 3.0,
            field_range: (0.3, 1.2),
            grid_points: 91,
            rethermalize: true,
            ..HysteresisConfig::default()
        };
        let r = simulate_hysteresis(&ham, &cfg).unwrap();
        assert!((r.populations.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r.populations.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn empty_range_rejected() {
        let cfg = HysteresisConfig {
            field_range: (0.001, 0.002),
            ..HysteresisConfig::default()
        };
        assert!(matches!(simulate_hysteresis(&mn12(), &cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn zero_targets_zero_guess() {
        let fit = FitConfig {
            targets: vec![(0.55, 0.0), (1.05, 0.0), (1.1, 0.0)],
            initial: [0.0, 0.0, 0.0],
            ..FitConfig::default()
        };
        let hyst = HysteresisConfig {
            field_range: (0.3, 1.2),
            grid_points: 11,
            ..HysteresisConfig::default()
        };
        let r = fit_anisotropy_params(&fit, &SpinSystemParams::default(), &hyst, 0).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
    }

    #[test]
    fn fit_needs_three_targets() {
        let fit = FitConfig {
            targets: vec![(1.1, 1e-9), (0.55, 1e-12)],
            ..FitConfig::default()
        };
        let r = fit_anisotropy_params(&fit, &SpinSystemParams::default(), &HysteresisConfig::default(), 0);
        assert!(matches!(r, Err(Error::Validation(_))));
    }
}
