//! Dimensionless cavity–spin dynamics.
//!
//! Time is measured in units of the characteristic time T₀ and the cavity
//! field in units where |h|²/2 counts emitted photons per active molecule.
//! Two models are provided:
//!
//! * the coherent cavity Bloch system
//!   ```text
//!   dh/dτ = -(κ/2) h + i R e^{-iψ}
//!   dZ/dτ = -i (b* R e^{-iψ} - b R* e^{iψ})
//!   dR/dτ = -i v τ R - i b e^{iψ} Z - γ R
//!   ```
//!   with b = h inside the sample unless a local-field term is requested;
//! * the maser rate equations obtained when R follows b adiabatically
//!   ```text
//!   dZ/dτ = -Z |b|² 2γ / (γ² + v²τ²)
//!   db/dτ = -(κ/2) b + b Z / (γ + i v τ)
//!   ```
//!
//! The detuning is T₀(ω(τ) - Ω) = v τ, so τ = 0 is exact resonance.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::constants::{HBAR, MU_0};
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions, OdeStats};

/// Slack allowed on the Bloch-sphere bound Z0² + 2|R0|² ≤ 1.
const BLOCH_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    /// γ = T₀/T₂.
    pub gamma: f64,
    /// κ = T₀/T_c.
    pub kappa: f64,
    /// Dimensionless sweep rate.
    pub v: f64,
    /// Phase of the transverse coupling s.
    pub psi: f64,
    /// Coefficient c in b = h + c R e^{-iψ}; zero means b = h.
    pub local_field: f64,
    pub z0: f64,
    /// Explicit initial coherence; when `None` it is seeded from `theta0`.
    pub r0: Option<Complex64>,
    /// Explicit initial field; when `None` the coherent model starts from
    /// h = 0 and the rate model from b = Z0 θ₀/√2.
    pub h0: Option<Complex64>,
    pub theta0: f64,
    pub tau_start: f64,
    pub tau_end: f64,
    /// Spacing of the uniform output grid.
    pub dtau: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            kappa: 1.0,
            v: 0.2,
            psi: FRAC_PI_2,
            local_field: 0.0,
            z0: 1.0,
            r0: None,
            h0: None,
            theta0: 1e-4,
            tau_start: -50.0,
            tau_end: 150.0,
            dtau: 0.05,
            rtol: 1e-9,
            atol: 1e-12,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("v", self.v),
            ("psi", self.psi),
            ("local_field", self.local_field),
            ("Z0", self.z0),
            ("theta0", self.theta0),
            ("tau_start", self.tau_start),
            ("tau_end", self.tau_end),
        ];
        for (name, x) in finite {
            if !x.is_finite() {
                return Err(Error::validation(format!("{name} must be finite, got {x}")));
            }
        }
        if self.gamma < 0.0 {
            return Err(Error::validation(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.kappa < 0.0 {
            return Err(Error::validation(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !(self.tau_end > self.tau_start) {
            return Err(Error::validation(format!(
                "tau span [{}, {}] is empty",
                self.tau_start, self.tau_end
            )));
        }
        if !(self.dtau > 0.0) || self.dtau > self.tau_end - self.tau_start {
            return Err(Error::validation(format!("dtau must be in (0, span], got {}", self.dtau)));
        }
        if let Some(r) = self.r0 {
            if !(r.re.is_finite() && r.im.is_finite()) {
                return Err(Error::validation("R0 must be finite"));
            }
            let bloch = self.z0 * self.z0 + 2.0 * r.norm_sqr();
            if bloch > 1.0 + BLOCH_SLACK {
                return Err(Error::validation(format!("Z0² + 2|R0|² = {bloch} exceeds 1")));
            }
        } else if self.z0.abs() > 1.0 + BLOCH_SLACK {
            return Err(Error::validation(format!("|Z0| = {} exceeds 1", self.z0.abs())));
        }
        if let Some(h) = self.h0 {
            if !(h.re.is_finite() && h.im.is_finite()) {
                return Err(Error::validation("h0 must be finite"));
            }
        }
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            ..OdeOptions::default()
        }
        .validate()
    }

    /// Initial (Z, R). A tipping angle θ₀ rotates the inversion Z0 on the
    /// Bloch sphere, Z = Z0 cos θ₀ and |R| = Z0 sin θ₀/√2, with the phase of
    /// R chosen so that the seed grows for any ψ.
    pub fn initial_bloch(&self) -> (f64, Complex64) {
        match self.r0 {
            Some(r) => (self.z0, r),
            None => {
                let amp = self.z0 * self.theta0.sin() * FRAC_1_SQRT_2;
                (self.z0 * self.theta0.cos(), Complex64::from_polar(amp, self.psi - FRAC_PI_2))
            }
        }
    }

    /// Uniform output grid from `tau_start` to `tau_end` inclusive.
    pub fn output_grid(&self) -> Vec<f64> {
        let span = self.tau_end - self.tau_start;
        let n = (span / self.dtau).round().max(1.0) as usize;
        (0..=n).map(|k| self.tau_start + span * k as f64 / n as f64).collect()
    }

    fn ode_options(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            h_max: None,
            max_steps: OdeOptions::default().max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsModel {
    Coherent,
    RateEquations,
    Pendulum,
}

impl DynamicsModel {
    pub fn name(&self) -> &'static str {
        match self {
            DynamicsModel::Coherent => "coherent",
            DynamicsModel::RateEquations => "rate",
            DynamicsModel::Pendulum => "pendulum",
        }
    }
}

/// Sampled solution of one of the dynamical models.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: DynamicsModel,
    pub config: DynamicsConfig,
    pub tau: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<Complex64>,
    pub h: Vec<Complex64>,
    /// I = |h|²/2.
    pub intensity: Vec<f64>,
    pub stats: OdeStats,
}

impl Trajectory {
    fn from_samples(model: DynamicsModel, config: DynamicsConfig, tau: Vec<f64>, z: Vec<f64>, r: Vec<Complex64>, h: Vec<Complex64>, stats: OdeStats) -> Self {
        let intensity = h.iter().map(|x| 0.5 * x.norm_sqr()).collect();
        Self {
            model,
            config,
            tau,
            z,
            r,
            h,
            intensity,
            stats,
        }
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn z_final(&self) -> f64 {
        *self.z.last().expect("trajectory has samples")
    }

    /// Z² + 2|R|² per sample.
    pub fn bloch_norm(&self) -> Vec<f64> {
        self.z.iter().zip(&self.r).map(|(z, r)| z * z + 2.0 * r.norm_sqr()).collect()
    }

    /// Largest deviation of Z² + 2|R|² from its initial value.
    pub fn conservation_defect(&self) -> f64 {
        let norms = self.bloch_norm();
        let first = norms[0];
        norms.iter().map(|x| (x - first).abs()).fold(0.0, f64::max)
    }

    /// Trapezoidal ∫ I dτ over the sampled span.
    pub fn integrated_intensity(&self) -> f64 {
        self.tau
            .windows(2)
            .zip(self.intensity.windows(2))
            .map(|(t, i)| 0.5 * (t[1] - t[0]) * (i[0] + i[1]))
            .sum()
    }

    /// Peak of I and where it occurs.
    pub fn intensity_peak(&self) -> (f64, f64) {
        let (k, &peak) = self
            .intensity
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("trajectory has samples");
        (self.tau[k], peak)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau,Z,re_R,im_R,re_h,im_h,intensity")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.tau[k], self.z[k], self.r[k].re, self.r[k].im, self.h[k].re, self.h[k].im, self.intensity[k]
            )?;
        }
        Ok(())
    }
}

/// Integrates the coherent cavity Bloch system.
///
/// R and h are propagated in the frame rotating with the sweep,
/// R̃ = R e^{iφ}, h̃ = h e^{iφ} with φ = v(τ² - τ_start²)/2. The sweep term
/// then moves to the cavity equation, where it is damped by κ, and the
/// long tail after the pulse becomes quasi-static instead of a chirp.
pub fn integrate_bloch_cavity(cfg: &DynamicsConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let (z_init, r_init) = cfg.initial_bloch();
    let h_init = cfg.h0.unwrap_or(Complex64::new(0.0, 0.0));
    let phase = Complex64::from_polar(1.0, -cfg.psi);
    let (gamma, kappa, v, local) = (cfg.gamma, cfg.kappa, cfg.v, cfg.local_field);
    let rhs = move |tau: f64, y: &[f64; 5]| -> [f64; 5] {
        let z = y[0];
        let r = Complex64::new(y[1], y[2]);
        let h = Complex64::new(y[3], y[4]);
        let re = r * phase;
        let b = h + re * local;
        let i = Complex64::i();
        let dh = h * Complex64::new(-0.5 * kappa, v * tau) + i * re;
        // -i (X - X*) = 2 Im X with X = b* R e^{-iψ}
        let dz = 2.0 * (b.conj() * re).im;
        let dr = -i * b * phase.conj() * z - r * gamma;
        [dz, dr.re, dr.im, dh.re, dh.im]
    };
    let grid = cfg.output_grid();
    let y0 = [z_init, r_init.re, r_init.im, h_init.re, h_init.im];
    let (ys, stats) = integrate(rhs, cfg.tau_start, y0, &grid, &cfg.ode_options())?;
    let mut z = Vec::with_capacity(ys.len());
    let mut r = Vec::with_capacity(ys.len());
    let mut h = Vec::with_capacity(ys.len());
    for (y, &tau) in ys.iter().zip(&grid) {
        let back = Complex64::from_polar(1.0, -0.5 * v * (tau - cfg.tau_start) * (tau + cfg.tau_start));
        z.push(y[0]);
        r.push(Complex64::new(y[1], y[2]) * back);
        h.push(Complex64::new(y[3], y[4]) * back);
    }
    Ok(Trajectory::from_samples(DynamicsModel::Coherent, *cfg, grid, z, r, h, stats))
}

/// Integrates the maser rate equations. The R column holds the adiabatically
/// eliminated coherence R = -i b e^{iψ} Z / (γ + i v τ).
pub fn integrate_rate_equations(cfg: &DynamicsConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if !(cfg.gamma > 0.0) {
        return Err(Error::validation("rate equations need gamma > 0"));
    }
    if cfg.v != 0.0 && (cfg.tau_start >= 0.0 || (cfg.v * cfg.tau_start).abs() < 10.0 * cfg.gamma) {
        return Err(Error::validation(format!(
            "rate equations must start off resonance: need tau_start < 0 and |v tau_start| >= 10 gamma (got v tau_start = {})",
            cfg.v * cfg.tau_start
        )));
    }
    let b_init = cfg
        .h0
        .unwrap_or_else(|| Complex64::new(cfg.z0 * cfg.theta0 * FRAC_1_SQRT_2, 0.0));
    let (gamma, kappa, v) = (cfg.gamma, cfg.kappa, cfg.v);
    let rhs = move |tau: f64, y: &[f64; 3]| -> [f64; 3] {
        let z = y[0];
        let b = Complex64::new(y[1], y[2]);
        let vt = v * tau;
        let dz = -z * b.norm_sqr() * 2.0 * gamma / (gamma * gamma + vt * vt);
        let db = b * (-0.5 * kappa) + b * z / Complex64::new(gamma, vt);
        [dz, db.re, db.im]
    };
    let grid = cfg.output_grid();
    let (ys, stats) = integrate(rhs, cfg.tau_start, [cfg.z0, b_init.re, b_init.im], &grid, &cfg.ode_options())?;
    let e_psi = Complex64::from_polar(1.0, cfg.psi);
    let mut z = Vec::with_capacity(ys.len());
    let mut r = Vec::with_capacity(ys.len());
    let mut h = Vec::with_capacity(ys.len());
    for (y, &tau) in ys.iter().zip(&grid) {
        let b = Complex64::new(y[1], y[2]);
        z.push(y[0]);
        h.push(b);
        r.push(-Complex64::i() * b * e_psi * y[0] / Complex64::new(gamma, v * tau));
    }
    Ok(Trajectory::from_samples(DynamicsModel::RateEquations, *cfg, grid, z, r, h, stats))
}

/// Runs independent configurations on the current rayon pool, preserving
/// input order.
pub fn integrate_many(model: DynamicsModel, configs: &[DynamicsConfig]) -> Vec<Result<Trajectory>> {
    configs
        .par_iter()
        .map(|c| match model {
            DynamicsModel::Coherent => integrate_bloch_cavity(c),
            DynamicsModel::RateEquations => integrate_rate_equations(c),
            DynamicsModel::Pendulum => Err(Error::validation("pendulum solutions are built with pendulum_solution")),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PendulumBranch {
    /// Closed-form sech² pulse of the overdamped pendulum.
    Overdamped,
    /// Numerical solution of θ̈ + κθ̇/2 - Z0 sin θ = 0 with θ̇(0) = 0.
    Full,
}

#[derive(Debug, Clone)]
pub struct PendulumSolution {
    pub trajectory: Trajectory,
    /// τ_R = κ/(2 Z0).
    pub tau_r: f64,
    /// τ_d = τ_R ln(2/θ₀).
    pub tau_d: f64,
    /// θ₀ = 0 gives the trivial (unstable equilibrium) solution.
    pub degenerate: bool,
}

/// Pendulum reduction of the resonant coherent dynamics (γ = v = 0, ψ = π/2,
/// real R). θ is measured from the inverted position, Z = Z0 cos θ,
/// R = Z0 sin θ/√2 and h = θ̇/√2, so |h|² = θ̇²/2.
pub fn pendulum_solution(kappa: f64, z0: f64, theta0: f64, tau_grid: &[f64], branch: PendulumBranch) -> Result<PendulumSolution> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::validation(format!("pendulum needs kappa > 0, got {kappa}")));
    }
    if !(z0 > 0.0) || z0 > 1.0 + BLOCH_SLACK {
        return Err(Error::validation(format!("pendulum needs 0 < Z0 <= 1, got {z0}")));
    }
    if !(0.0..std::f64::consts::PI).contains(&theta0) {
        return Err(Error::validation(format!("pendulum needs 0 <= theta0 < pi, got {theta0}")));
    }
    if tau_grid.is_empty() || tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation("pendulum grid must be non-empty and strictly increasing"));
    }
    let tau_r = kappa / (2.0 * z0);
    let tau_d = if theta0 > 0.0 { tau_r * (2.0 / theta0).ln() } else { f64::INFINITY };
    let config = DynamicsConfig {
        gamma: 0.0,
        kappa,
        v: 0.0,
        psi: FRAC_PI_2,
        z0,
        theta0,
        tau_start: tau_grid[0],
        tau_end: *tau_grid.last().unwrap(),
        ..DynamicsConfig::default()
    };
    let n = tau_grid.len();
    let to_traj = |theta: Vec<f64>, theta_dot: Vec<f64>, stats: OdeStats| {
        let z = theta.iter().map(|t| z0 * t.cos()).collect();
        let r = theta.iter().map(|t| Complex64::new(z0 * t.sin() * FRAC_1_SQRT_2, 0.0)).collect();
        let h = theta_dot.iter().map(|d| Complex64::new(d * FRAC_1_SQRT_2, 0.0)).collect();
        Trajectory::from_samples(DynamicsModel::Pendulum, config, tau_grid.to_vec(), z, r, h, stats)
    };

    if theta0 == 0.0 {
        return Ok(PendulumSolution {
            trajectory: to_traj(vec![0.0; n], vec![0.0; n], OdeStats::default()),
            tau_r,
            tau_d,
            degenerate: true,
        });
    }

    let trajectory = match branch {
        PendulumBranch::Overdamped => {
            // tan(θ/2) = e^{(τ - τ_d)/τ_R}, θ̇ = sech((τ - τ_d)/τ_R)/τ_R
            let theta = tau_grid
                .iter()
                .map(|&t| 2.0 * ((t - tau_grid[0] - tau_d) / tau_r).exp().atan())
                .collect();
            let theta_dot = tau_grid
                .iter()
                .map(|&t| 1.0 / (((t - tau_grid[0] - tau_d) / tau_r).cosh() * tau_r))
                .collect();
            to_traj(theta, theta_dot, OdeStats::default())
        }
        PendulumBranch::Full => {
            let rhs = move |_t: f64, y: &[f64; 2]| [y[1], z0 * y[0].sin() - 0.5 * kappa * y[1]];
            let (ys, stats) = integrate(rhs, tau_grid[0], [theta0, 0.0], tau_grid, &OdeOptions::default())?;
            to_traj(ys.iter().map(|y| y[0]).collect(), ys.iter().map(|y| y[1]).collect(), stats)
        }
    };
    Ok(PendulumSolution {
        trajectory,
        tau_r,
        tau_d,
        degenerate: false,
    })
}

/// Physical inputs that fix the dimensionless parameters of one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalContext {
    /// η N₀, active molecules per m³ weighted by the filling factor.
    pub n0_eta: f64,
    /// Cavity (transition) angular frequency, rad/s.
    pub omega: f64,
    pub s_magnitude: f64,
    pub t2: f64,
    pub tc: f64,
    /// Sweep rate, T/s.
    pub b0_dot: f64,
    pub m: i32,
    pub m_prime: i32,
    /// Sample volume, m³; only needed for energies.
    pub sample_volume: Option<f64>,
    pub g_factor: f64,
}

impl PhysicalContext {
    pub fn mu_tilde(&self) -> f64 {
        self.g_factor * crate::constants::MU_B
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("n0_eta", self.n0_eta),
            ("omega", self.omega),
            ("T2", self.t2),
            ("Tc", self.tc),
            ("g_factor", self.g_factor),
        ] {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::validation(format!("{name} must be positive, got {x}")));
            }
        }
        if !(self.s_magnitude >= 0.0) || !self.b0_dot.is_finite() || self.b0_dot < 0.0 {
            return Err(Error::validation("|s| and the sweep rate must be non-negative"));
        }
        if self.m == self.m_prime {
            return Err(Error::validation("transition needs m != m'"));
        }
        if let Some(v) = self.sample_volume {
            if !(v > 0.0) {
                return Err(Error::validation(format!("sample volume must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimensionless {
    /// Characteristic time, seconds.
    pub t0: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub v: f64,
}

impl Dimensionless {
    /// A dynamics configuration carrying these parameters, other fields at
    /// their defaults.
    pub fn config(&self) -> DynamicsConfig {
        DynamicsConfig {
            gamma: self.gamma,
            kappa: self.kappa,
            v: self.v,
            ..DynamicsConfig::default()
        }
    }
}

/// T₀ = (2ħ / (η N₀ Ω μ₀ μ̃² |s|²))^{1/2}.
pub fn characteristic_time(n0_eta: f64, omega: f64, mu_tilde: f64, s_magnitude: f64) -> f64 {
    (2.0 * HBAR / (n0_eta * omega * MU_0 * mu_tilde * mu_tilde * s_magnitude * s_magnitude)).sqrt()
}

/// v = T₀² μ̃ Ḃ₀ |m - m′| / ħ.
pub fn sweep_parameter(t0: f64, mu_tilde: f64, b0_dot: f64, delta_m: i32) -> f64 {
    t0 * t0 * mu_tilde * b0_dot * delta_m.abs() as f64 / HBAR
}

pub fn derive_dimensionless(ctx: &PhysicalContext) -> Result<Dimensionless> {
    ctx.validate()?;
    if ctx.s_magnitude == 0.0 {
        return Err(Error::DarkTransition {
            m: ctx.m,
            m_prime: ctx.m_prime,
        });
    }
    let t0 = characteristic_time(ctx.n0_eta, ctx.omega, ctx.mu_tilde(), ctx.s_magnitude);
    Ok(Dimensionless {
        t0,
        gamma: t0 / ctx.t2,
        kappa: t0 / ctx.tc,
        v: sweep_parameter(t0, ctx.mu_tilde(), ctx.b0_dot, ctx.m - ctx.m_prime),
    })
}
