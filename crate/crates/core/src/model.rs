//! Physical system description: free Hamiltonian, periodic potential, the
//! truncated momentum lattice `p_n = n * hbar` for `n in [-M, M]`, and the
//! probability/amplitude containers shared by every propagator.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Symmetric momentum lattice `n in [-M, M]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basis {
    m: usize,
}

impl Basis {
    pub fn new(m: usize) -> Self {
        Basis { m }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        2 * self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_index(&self) -> i64 {
        self.m as i64
    }

    /// Storage slot for lattice index `n`, if it lies inside the truncation.
    pub fn slot(&self, n: i64) -> Option<usize> {
        let m = self.m as i64;
        (-m..=m).contains(&n).then(|| (n + m) as usize)
    }

    pub fn index_of_slot(&self, slot: usize) -> i64 {
        slot as i64 - self.m as i64
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        let m = self.m as i64;
        -m..=m
    }
}

/// Free (unperturbed) Hamiltonian `H0(p)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FreeHamiltonian {
    /// `p^2 / (2 I)`.
    Rotator { inertia: f64 },
    /// `sum_k c_k p^k`, coefficients in increasing power.
    Polynomial { coefficients: Vec<f64> },
    /// Values `H0(p_n)` on the lattice, ordered `n = -M..=M`.
    Tabulated { values: Vec<f64> },
}

impl FreeHamiltonian {
    /// Energy at continuous momentum `p`; `None` for tabulated forms.
    pub fn energy(&self, p: f64) -> Option<f64> {
        match self {
            FreeHamiltonian::Rotator { inertia } => Some(p * p / (2.0 * inertia)),
            FreeHamiltonian::Polynomial { coefficients } => {
                Some(coefficients.iter().rev().fold(0.0, |acc, &c| acc * p + c))
            }
            FreeHamiltonian::Tabulated { .. } => None,
        }
    }

    /// `H0'(p)`, the twist frequency.
    pub fn velocity(&self, p: f64) -> Option<f64> {
        match self {
            FreeHamiltonian::Rotator { inertia } => Some(p / inertia),
            FreeHamiltonian::Polynomial { coefficients } => Some(
                coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, &c)| acc * p + k as f64 * c),
            ),
            FreeHamiltonian::Tabulated { .. } => None,
        }
    }

    /// Effective mass when `H0` is purely kinetic, `p^2 / 2m (+ const)`.
    pub fn mass(&self) -> Option<f64> {
        match self {
            FreeHamiltonian::Rotator { inertia } => Some(*inertia),
            FreeHamiltonian::Polynomial { coefficients } => {
                let c2 = *coefficients.get(2)?;
                let others_vanish = coefficients
                    .iter()
                    .enumerate()
                    .all(|(k, &c)| k == 0 || k == 2 || c == 0.0);
                (others_vanish && c2 > 0.0).then(|| 0.5 / c2)
            }
            FreeHamiltonian::Tabulated { .. } => None,
        }
    }

    fn validate(&self, basis: Basis) -> Result<()> {
        match self {
            FreeHamiltonian::Rotator { inertia } => {
                if !(inertia.is_finite() && *inertia > 0.0) {
                    return Err(Error::validation("inertia", format!("must be > 0, got {inertia}")));
                }
            }
            FreeHamiltonian::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::validation(
                        "coefficients",
                        "polynomial needs at least one finite coefficient",
                    ));
                }
            }
            FreeHamiltonian::Tabulated { values } => {
                if values.len() != basis.len() {
                    return Err(Error::validation(
                        "values",
                        format!("tabulated H0 needs {} values, got {}", basis.len(), values.len()),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::validation("values", "tabulated H0 must be finite"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub k: u32,
    pub weight: f64,
}

/// Potential sampled on the uniform grid `x_j = -pi + 2 pi j / L`, carried as
/// its trigonometric interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPotential {
    values: Vec<f64>,
    mean: f64,
    // (k, a_k, b_k): V = mean + sum a_k cos kx + b_k sin kx, 0 < k < L/2
    modes: Vec<(f64, f64, f64)>,
    // cosine amplitude of the Nyquist mode, zero for odd L
    nyquist: f64,
}

impl SampledPotential {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let len = values.len();
        if len < 3 {
            return Err(Error::validation("samples", "need at least 3 samples"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("samples", "samples must be finite"));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(len).process(&mut buf);
        let scale = 1.0 / len as f64;
        // the grid starts at -pi, so c_k picks up (-1)^k
        let coeff = |k: usize| -> Complex64 {
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            buf[k] * (sign * scale)
        };
        let mean = coeff(0).re;
        let half = len.div_ceil(2);
        let modes = (1..half)
            .map(|k| {
                let c = coeff(k);
                (k as f64, 2.0 * c.re, -2.0 * c.im)
            })
            .collect();
        let nyquist = if len.is_multiple_of(2) { coeff(len / 2).re } else { 0.0 };
        Ok(SampledPotential {
            values,
            mean,
            modes,
            nyquist,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn value(&self, x: f64) -> f64 {
        let nyq = self.values.len() as f64 / 2.0;
        self.mean
            + self.nyquist * (nyq * x).cos()
            + self
                .modes
                .iter()
                .map(|&(k, a, b)| a * (k * x).cos() + b * (k * x).sin())
                .sum::<f64>()
    }

    // Odd derivatives drop the Nyquist mode, the usual spectral convention.
    fn derivative(&self, x: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(k, a, b)| k * (b * (k * x).cos() - a * (k * x).sin()))
            .sum()
    }

    fn second_derivative(&self, x: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(k, a, b)| -k * k * (a * (k * x).cos() + b * (k * x).sin()))
            .sum()
    }

    // Parseval on the spectral derivative: exact for band-limited samples.
    fn mean_derivative_power(&self, order: u32) -> f64 {
        self.modes
            .iter()
            .map(|&(k, a, b)| 0.5 * k.powi(2 * order as i32) * (a * a + b * b))
            .sum()
    }
}

/// Periodic kick potential on `[-pi, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Cosine,
    CosineSum(Vec<Harmonic>),
    Sampled(SampledPotential),
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Cosine => x.cos(),
            Potential::CosineSum(terms) => terms
                .iter()
                .map(|h| h.weight * (h.k as f64 * x).cos())
                .sum(),
            Potential::Sampled(s) => s.value(x),
        }
    }

    /// `V'(x)`; the force is `f = -V'`.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Potential::Cosine => -x.sin(),
            Potential::CosineSum(terms) => terms
                .iter()
                .map(|h| {
                    let k = h.k as f64;
                    -h.weight * k * (k * x).sin()
                })
                .sum(),
            Potential::Sampled(s) => s.derivative(x),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            Potential::Cosine => -x.cos(),
            Potential::CosineSum(terms) => terms
                .iter()
                .map(|h| {
                    let k = h.k as f64;
                    -h.weight * k * k * (k * x).cos()
                })
                .sum(),
            Potential::Sampled(s) => s.second_derivative(x),
        }
    }

    pub fn force(&self, x: f64) -> f64 {
        -self.derivative(x)
    }

    /// Highest harmonic present in a closed form, or the interpolant's band
    /// limit for sampled potentials.
    pub fn highest_harmonic(&self) -> usize {
        match self {
            Potential::Cosine => 1,
            Potential::CosineSum(terms) => terms.iter().map(|h| h.k as usize).max().unwrap_or(0),
            Potential::Sampled(s) => s.values.len() / 2,
        }
    }

    pub fn id(&self) -> String {
        match self {
            Potential::Cosine => "cos(x)".to_string(),
            Potential::CosineSum(terms) if terms.is_empty() => "0".to_string(),
            Potential::CosineSum(terms) => terms
                .iter()
                .map(|h| format!("{}*cos({}x)", h.weight, h.k))
                .collect::<Vec<_>>()
                .join(" + "),
            Potential::Sampled(s) => format!("sampled[{}]", s.values.len()),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Potential::CosineSum(terms) = self {
            for h in terms {
                if h.k < 1 {
                    return Err(Error::validation("harmonics", "harmonic index must be >= 1"));
                }
                if !h.weight.is_finite() {
                    return Err(Error::validation("harmonics", "weights must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// Uniform angle average `(1/2pi) int g(x) dx` by the periodic trapezoidal rule.
pub fn angle_average(grid: usize, g: impl Fn(f64) -> f64) -> f64 {
    let h = 2.0 * PI / grid as f64;
    let mut sum = 0.0;
    for j in 0..grid {
        sum += g(-PI + h * j as f64);
    }
    sum / grid as f64
}

/// Mean squared force `<f^2> = (1/2pi) int (V')^2 dx`.
pub fn mean_force_squared(v: &Potential, grid: usize) -> f64 {
    match v {
        Potential::Sampled(s) => s.mean_derivative_power(1),
        _ => angle_average(grid, |x| v.derivative(x).powi(2)),
    }
}

/// `<(f')^2> = (1/2pi) int (V'')^2 dx`.
pub fn mean_force_deriv_squared(v: &Potential, grid: usize) -> f64 {
    match v {
        Potential::Sampled(s) => s.mean_derivative_power(2),
        _ => angle_average(grid, |x| v.second_derivative(x).powi(2)),
    }
}

/// Smallest admissible quadrature grid for a basis of half-width `m`.
pub fn grid_floor(m: usize) -> usize {
    4 * m + 1
}

/// Default quadrature grid: the first power of two above the floor.
pub fn default_grid(m: usize) -> usize {
    grid_floor(m).next_power_of_two()
}

/// Unvalidated system parameters, as read from configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub h0: FreeHamiltonian,
    pub potential: Potential,
    pub lambda: f64,
    pub period: f64,
    pub tau: f64,
    pub hbar: f64,
    pub basis_m: usize,
    pub grid: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            h0: FreeHamiltonian::Rotator { inertia: 1.0 },
            potential: Potential::Cosine,
            lambda: 1.0,
            period: 1.0,
            tau: 0.5,
            hbar: 1.0,
            basis_m: 256,
            grid: default_grid(256),
        }
    }
}

/// Validated kicked system. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct KickedSystem {
    h0: FreeHamiltonian,
    potential: Potential,
    lambda: f64,
    period: f64,
    tau: f64,
    hbar: f64,
    basis: Basis,
    grid: usize,
}

pub fn build_system(params: &SystemParams) -> Result<KickedSystem> {
    KickedSystem::new(params.clone())
}

impl KickedSystem {
    pub fn new(p: SystemParams) -> Result<Self> {
        if p.basis_m < 1 {
            return Err(Error::validation("basis_m", "must be >= 1"));
        }
        let basis = Basis::new(p.basis_m);
        p.h0.validate(basis)?;
        p.potential.validate()?;
        if !(p.lambda.is_finite() && p.lambda >= 0.0) {
            return Err(Error::validation("lambda", format!("must be >= 0, got {}", p.lambda)));
        }
        if !(p.period.is_finite() && p.period > 0.0) {
            return Err(Error::validation("period", format!("must be > 0, got {}", p.period)));
        }
        if !(p.tau.is_finite() && p.tau > 0.0 && p.tau < p.period) {
            return Err(Error::validation(
                "tau",
                format!("must satisfy 0 < tau < period = {}, got {}", p.period, p.tau),
            ));
        }
        if !(p.hbar.is_finite() && p.hbar > 0.0) {
            return Err(Error::validation("hbar", format!("must be > 0, got {}", p.hbar)));
        }
        let minimum = grid_floor(p.basis_m);
        if p.grid < minimum {
            return Err(Error::GridTooSmall {
                grid: p.grid,
                minimum,
            });
        }
        Ok(KickedSystem {
            h0: p.h0,
            potential: p.potential,
            lambda: p.lambda,
            period: p.period,
            tau: p.tau,
            hbar: p.hbar,
            basis,
            grid: p.grid,
        })
    }

    pub fn params(&self) -> SystemParams {
        SystemParams {
            h0: self.h0.clone(),
            potential: self.potential.clone(),
            lambda: self.lambda,
            period: self.period,
            tau: self.tau,
            hbar: self.hbar,
            basis_m: self.basis.m(),
            grid: self.grid,
        }
    }

    pub fn h0(&self) -> &FreeHamiltonian {
        &self.h0
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn momentum(&self, n: i64) -> f64 {
        n as f64 * self.hbar
    }

    /// `H0(p_n)` on the lattice.
    pub fn level_energy(&self, n: i64) -> f64 {
        match &self.h0 {
            FreeHamiltonian::Tabulated { values } => {
                values[self.basis.slot(n).expect("lattice index inside basis")]
            }
            h0 => h0.energy(self.momentum(n)).expect("closed-form H0"),
        }
    }

    /// Diagonal free-evolution phases `exp(-i H0(p_n) t / hbar)` over the basis.
    pub fn free_phases(&self, t: f64) -> Vec<Complex64> {
        self.basis
            .indices()
            .map(|n| Complex64::from_polar(1.0, -self.level_energy(n) * t / self.hbar))
            .collect()
    }

    /// Quasilinear per-kick increment of `<p^2>`, `lambda^2 <f^2>`.
    pub fn kick_heating(&self) -> f64 {
        self.lambda * self.lambda * mean_force_squared(&self.potential, self.grid)
    }

    /// Quasilinear diffusion constant `lambda^2 <f^2> / T`.
    pub fn quasilinear_diffusion(&self) -> f64 {
        self.kick_heating() / self.period
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        KickedSystem::new(SystemParams {
            lambda,
            ..self.params()
        })
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        KickedSystem::new(SystemParams { tau, ..self.params() })
    }
}

/// Occupation probabilities on the truncated lattice plus the mass lost to
/// truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumDistribution {
    probs: Vec<f64>,
    leak: f64,
}

impl MomentumDistribution {
    pub fn new(basis: Basis, probs: Vec<f64>, leak: f64) -> Result<Self> {
        if probs.len() != basis.len() {
            return Err(Error::BasisMismatch {
                expected: basis.m(),
                found: probs.len().saturating_sub(1) / 2,
            });
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::validation("probs", "probabilities must be finite and >= 0"));
        }
        Ok(MomentumDistribution { probs, leak })
    }

    pub(crate) fn from_parts(probs: Vec<f64>, leak: f64) -> Self {
        MomentumDistribution { probs, leak }
    }

    pub fn delta(basis: Basis, n: i64) -> Result<Self> {
        let slot = basis
            .slot(n)
            .ok_or_else(|| Error::validation("initial_index", format!("{n} outside [-M, M]")))?;
        let mut probs = vec![0.0; basis.len()];
        probs[slot] = 1.0;
        Ok(MomentumDistribution { probs, leak: 0.0 })
    }

    /// Equal weights on the listed lattice indices.
    pub fn uniform_over(basis: Basis, indices: &[i64]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let mut probs = vec![0.0; basis.len()];
        let w = 1.0 / indices.len() as f64;
        for &n in indices {
            let slot = basis
                .slot(n)
                .ok_or_else(|| Error::validation("indices", format!("{n} outside [-M, M]")))?;
            probs[slot] += w;
        }
        Ok(MomentumDistribution { probs, leak: 0.0 })
    }

    pub fn basis(&self) -> Basis {
        Basis::new(self.probs.len() / 2)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, n: i64) -> f64 {
        self.basis().slot(n).map_or(0.0, |s| self.probs[s])
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Non-negativity and `sum + leak = 1` within `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        if let Some(p) = self.probs.iter().find(|p| p.is_nan() || **p < 0.0) {
            return Err(Error::Invariant(format!("negative probability {p}")));
        }
        let err = (self.total() + self.leak - 1.0).abs();
        if err > tol {
            return Err(Error::Invariant(format!(
                "probability + leak deviates from 1 by {err:e}"
            )));
        }
        Ok(())
    }

    /// Convex combination `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &Self, alpha: f64) -> Result<Self> {
        if self.probs.len() != other.probs.len() {
            return Err(Error::BasisMismatch {
                expected: self.basis().m(),
                found: other.basis().m(),
            });
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        Ok(MomentumDistribution {
            probs,
            leak: alpha * self.leak + (1.0 - alpha) * other.leak,
        })
    }
}

/// Pure state in the momentum basis. Norm lost to truncation is tracked in
/// `leak`; amplitudes are never renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    leak: f64,
}

impl StateVector {
    pub fn new(basis: Basis, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis.len() {
            return Err(Error::BasisMismatch {
                expected: basis.m(),
                found: amps.len().saturating_sub(1) / 2,
            });
        }
        Ok(StateVector { amps, leak: 0.0 })
    }

    pub(crate) fn from_parts(amps: Vec<Complex64>, leak: f64) -> Self {
        StateVector { amps, leak }
    }

    pub fn delta(basis: Basis, n: i64) -> Result<Self> {
        let slot = basis
            .slot(n)
            .ok_or_else(|| Error::validation("initial_index", format!("{n} outside [-M, M]")))?;
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.len()];
        amps[slot] = Complex64::new(1.0, 0.0);
        Ok(StateVector { amps, leak: 0.0 })
    }

    pub fn basis(&self) -> Basis {
        Basis::new(self.amps.len() / 2)
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amp(&self, n: i64) -> Complex64 {
        self.basis()
            .slot(n)
            .map_or(Complex64::new(0.0, 0.0), |s| self.amps[s])
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let err = (self.norm_sqr() + self.leak - 1.0).abs();
        if err > tol {
            return Err(Error::Invariant(format!("norm + leak deviates from 1 by {err:e}")));
        }
        Ok(())
    }

    pub fn distribution(&self) -> MomentumDistribution {
        MomentumDistribution {
            probs: self.amps.iter().map(|a| a.norm_sqr()).collect(),
            leak: self.leak,
        }
    }
}
