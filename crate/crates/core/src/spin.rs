//! Spin operators and the single-molecule spin Hamiltonian
//!
//! ```text
//! H_S = -D Sz² - F Sz⁴ - μ̃ B₀ Sz + C (S₊⁴ + S₋⁴) + E (S₊² + S₋²)/2 + K (S₊ + S₋)/2
//! ```
//!
//! with μ̃ = g μ_B and K = K_coeff · μ̃ B₀. The basis is the Sz eigenbasis
//! ordered m = -S, …, S, so index `i` carries m = i - S.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::constants::{KB, MU_B};
use crate::eigen::{eigh, EigenDecomposition};
use crate::error::{Error, Result};

/// Anisotropy parameters, with energies given in kelvin (E/k_B).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSystemParams {
    pub spin: f64,
    pub d_over_kb: f64,
    pub f_over_kb: f64,
    pub c_over_kb: f64,
    pub e_over_kb: f64,
    /// Linear transverse term as a fraction of μ̃ B₀.
    pub k_coeff: f64,
    pub g_factor: f64,
}

impl Default for SpinSystemParams {
    /// Mn₁₂-Ac values used for the level diagram.
    fn default() -> Self {
        Self {
            spin: 10.0,
            d_over_kb: 0.56,
            f_over_kb: 1.1e-3,
            c_over_kb: 1.36e-5,
            e_over_kb: -4.48e-3,
            k_coeff: 0.025,
            g_factor: 2.0,
        }
    }
}

impl SpinSystemParams {
    pub fn validate(&self) -> Result<()> {
        let twice = 2.0 * self.spin;
        if !(self.spin > 0.0) || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::validation(format!(
                "spin must be a positive integer or half-integer, got {}",
                self.spin
            )));
        }
        if !(self.d_over_kb > 0.0) {
            return Err(Error::validation(format!(
                "D/kB must be positive (easy axis), got {}",
                self.d_over_kb
            )));
        }
        for (name, x) in [
            ("F/kB", self.f_over_kb),
            ("C/kB", self.c_over_kb),
            ("E/kB", self.e_over_kb),
            ("K_coeff", self.k_coeff),
            ("g_factor", self.g_factor),
        ] {
            if !x.is_finite() {
                return Err(Error::validation(format!("{name} must be finite, got {x}")));
            }
        }
        if !(self.g_factor > 0.0) {
            return Err(Error::validation(format!("g_factor must be positive, got {}", self.g_factor)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        (2.0 * self.spin).round() as usize + 1
    }

    /// μ̃ = g μ_B in J/T.
    pub fn mu_tilde(&self) -> f64 {
        self.g_factor * MU_B
    }

    pub fn d(&self) -> f64 {
        self.d_over_kb * KB
    }

    pub fn f(&self) -> f64 {
        self.f_over_kb * KB
    }

    pub fn c(&self) -> f64 {
        self.c_over_kb * KB
    }

    pub fn e(&self) -> f64 {
        self.e_over_kb * KB
    }

    /// Integer spin magnitude; level labels are integers only for integer S.
    pub fn integer_spin(&self) -> Result<i32> {
        if (self.spin - self.spin.round()).abs() > 1e-12 {
            return Err(Error::validation(format!(
                "integer level labels need integer spin, got S = {}",
                self.spin
            )));
        }
        Ok(self.spin.round() as i32)
    }

    /// Copy with every H₁ coefficient multiplied by `factor`.
    pub fn scale_transverse(&self, factor: f64) -> Self {
        Self {
            c_over_kb: self.c_over_kb * factor,
            e_over_kb: self.e_over_kb * factor,
            k_coeff: self.k_coeff * factor,
            ..*self
        }
    }

    /// Copy with C = E = K = 0.
    pub fn without_transverse(&self) -> Self {
        self.scale_transverse(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub dim: usize,
    pub spin: f64,
    pub sz: DMatrix<f64>,
    pub sx: DMatrix<f64>,
    pub sy: DMatrix<Complex64>,
    pub splus: DMatrix<f64>,
    pub sminus: DMatrix<f64>,
}

impl SpinOperators {
    /// m value of basis index `i`.
    pub fn m_of(&self, i: usize) -> f64 {
        i as f64 - self.spin
    }

    /// The transverse coupling operator (Sx + Sy)/√2.
    pub fn transverse_coupling(&self) -> DMatrix<Complex64> {
        let sx = self.sx.map(|x| Complex64::new(x, 0.0));
        (sx + &self.sy) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
    }
}

pub fn build_spin_operators(spin: f64) -> Result<SpinOperators> {
    let twice = 2.0 * spin;
    if !(spin > 0.0) || !spin.is_finite() || (twice - twice.round()).abs() > 1e-12 {
        return Err(Error::validation(format!(
            "spin must be a positive integer or half-integer, got {spin}"
        )));
    }
    let dim = twice.round() as usize + 1;
    let mut sz = DMatrix::zeros(dim, dim);
    let mut splus = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let m = i as f64 - spin;
        sz[(i, i)] = m;
        if i + 1 < dim {
            splus[(i + 1, i)] = (spin * (spin + 1.0) - m * (m + 1.0)).sqrt();
        }
    }
    let sminus = splus.transpose();
    let sx = (&splus + &sminus) * 0.5;
    // Sy = (S₊ - S₋) / 2i
    let sy = (&splus - &sminus).map(|x| Complex64::new(0.0, -0.5 * x));
    Ok(SpinOperators {
        dim,
        spin,
        sz,
        sx,
        sy,
        splus,
        sminus,
    })
}

/// Field-independent pieces of H_S, cached so that repeated evaluation along a
/// field sweep costs only a few matrix additions.
#[derive(Debug, Clone)]
pub struct SpinHamiltonian {
    params: SpinSystemParams,
    ops: SpinOperators,
    anisotropy: DMatrix<f64>,
    transverse: DMatrix<f64>,
    linear: DMatrix<f64>,
}

impl SpinHamiltonian {
    pub fn new(params: SpinSystemParams) -> Result<Self> {
        params.validate()?;
        let ops = build_spin_operators(params.spin)?;
        let sz2 = &ops.sz * &ops.sz;
        let sz4 = &sz2 * &sz2;
        let anisotropy = &sz2 * (-params.d()) - &sz4 * params.f();

        let sp2 = &ops.splus * &ops.splus;
        let sp4 = &sp2 * &sp2;
        let quartic = &sp4 + sp4.transpose();
        let quadratic = &sp2 + sp2.transpose();
        let transverse = quartic * params.c() + quadratic * (params.e() / 2.0);
        let linear = (&ops.splus + &ops.sminus) * 0.5;
        Ok(Self {
            params,
            ops,
            anisotropy,
            transverse,
            linear,
        })
    }

    pub fn params(&self) -> &SpinSystemParams {
        &self.params
    }

    pub fn operators(&self) -> &SpinOperators {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.ops.dim
    }

    /// H₀ at field `b0` (tesla), in joules.
    pub fn h0(&self, b0: f64) -> DMatrix<f64> {
        &self.anisotropy - &self.ops.sz * (self.params.mu_tilde() * b0)
    }

    /// H₁ at field `b0`; the linear term scales with the field through K.
    pub fn h1(&self, b0: f64) -> DMatrix<f64> {
        let k = self.params.k_coeff * self.params.mu_tilde() * b0;
        &self.transverse + &self.linear * k
    }

    /// Full H_S = H₀ + H₁ at field `b0`, in joules.
    pub fn matrix(&self, b0: f64) -> DMatrix<f64> {
        self.h0(b0) + self.h1(b0)
    }

    pub fn eigen(&self, b0: f64) -> Result<EigenDecomposition> {
        if !b0.is_finite() {
            return Err(Error::validation(format!("B0 must be finite, got {b0}")));
        }
        eigh(&self.matrix(b0))
    }

    /// Diagonal energy of |m⟩ under H₀, in joules.
    pub fn diagonal_energy(&self, m: f64, b0: f64) -> f64 {
        let p = &self.params;
        -p.d() * m * m - p.f() * m.powi(4) - p.mu_tilde() * b0 * m
    }

    /// Basis index of integer label `m`.
    pub fn index_of(&self, m: i32) -> Result<usize> {
        let s = self.params.integer_spin()?;
        if m < -s || m > s {
            return Err(Error::validation(format!("level m = {m} outside [-{s}, {s}]")));
        }
        Ok((m + s) as usize)
    }
}

/// Builds H_S at field `b0` (tesla), returned in joules.
pub fn build_hamiltonian(params: &SpinSystemParams, b0: f64) -> Result<DMatrix<f64>> {
    if !b0.is_finite() {
        return Err(Error::validation(format!("B0 must be finite, got {b0}")));
    }
    Ok(SpinHamiltonian::new(*params)?.matrix(b0))
}
