//! Kick-to-kick propagation: measured (master equation on occupation
//! probabilities), coherent (Floquet map on a pure state), and trajectory
//! (explicit projective sampling).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::classical::{batched_moments, MomentSeries};
use crate::error::{Error, Result};
use crate::kick::{kick_factors, kick_matrix, transition_matrix, KickMatrix, TransitionMatrix};
use crate::model::{Basis, KickedSystem, MomentumDistribution, StateVector};
use crate::observables::{moments_from_distribution, Moments};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Abort once cumulative truncation leak exceeds this.
    pub leak_budget: f64,
    /// Keep every intermediate distribution or state, not just moments.
    pub record_states: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            leak_budget: 1e-9,
            record_states: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Complete,
    /// The run stopped early; records cover kicks `0..=last_valid`.
    LeakBudgetExceeded { last_valid: usize, leak: f64 },
}

impl RunStatus {
    pub fn is_complete(&self) -> bool {
        matches!(self, RunStatus::Complete)
    }

    pub fn into_result(self, budget: f64) -> Result<()> {
        match self {
            RunStatus::Complete => Ok(()),
            RunStatus::LeakBudgetExceeded { last_valid, leak } => Err(Error::LeakBudget {
                last_valid,
                leak,
                budget,
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeasuredRun {
    pub lambda: f64,
    pub hbar: f64,
    pub period: f64,
    /// Moments after `N = 0, 1, ...` kicks.
    pub moments: Vec<Moments>,
    pub leaks: Vec<f64>,
    pub distributions: Option<Vec<MomentumDistribution>>,
    pub final_distribution: MomentumDistribution,
    pub status: RunStatus,
}

impl MeasuredRun {
    pub fn kicks(&self) -> usize {
        self.moments.len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct CoherentRun {
    pub lambda: f64,
    pub hbar: f64,
    pub period: f64,
    pub moments: Vec<Moments>,
    pub leaks: Vec<f64>,
    pub states: Option<Vec<StateVector>>,
    pub final_state: StateVector,
    pub status: RunStatus,
}

fn check_basis(expected: Basis, found: Basis) -> Result<()> {
    if expected != found {
        return Err(Error::BasisMismatch {
            expected: expected.m(),
            found: found.m(),
        });
    }
    Ok(())
}

/// One master-equation step `P_n <- sum_m W_nm P_m`.
pub fn step_master(p: &MomentumDistribution, w: &TransitionMatrix) -> Result<MomentumDistribution> {
    let basis = w.basis();
    check_basis(basis, p.basis())?;
    let len = basis.len();
    let band = w.band() as i64;
    let src = p.probs();
    let mut out = vec![0.0; len];
    for (i, slot) in out.iter_mut().enumerate() {
        let lo = (i as i64 - band).max(0) as usize;
        let hi = ((i as i64 + band) as usize).min(len - 1);
        let mut acc = 0.0;
        for (j, &pj) in src.iter().enumerate().take(hi + 1).skip(lo) {
            acc += w.diagonal(i as i64 - j as i64) * pj;
        }
        *slot = acc;
    }
    let scattered: f64 = src
        .iter()
        .zip(w.column_leak())
        .map(|(pj, leak)| pj * leak)
        .sum();
    Ok(MomentumDistribution::from_parts(out, p.leak() + scattered))
}

/// Iterate the master equation for `kicks` steps.
pub fn evolve_measured(
    system: &KickedSystem,
    initial: &MomentumDistribution,
    kicks: usize,
    options: &RunOptions,
) -> Result<MeasuredRun> {
    let w = transition_matrix(&kick_matrix(system));
    evolve_measured_with(system, &w, initial, kicks, options)
}

/// As [`evolve_measured`], reusing a precomputed transition matrix.
pub fn evolve_measured_with(
    system: &KickedSystem,
    w: &TransitionMatrix,
    initial: &MomentumDistribution,
    kicks: usize,
    options: &RunOptions,
) -> Result<MeasuredRun> {
    if kicks < 1 {
        return Err(Error::validation("kicks", "need at least one kick"));
    }
    check_basis(system.basis(), initial.basis())?;
    let hbar = system.hbar();
    let mut moments = vec![moments_from_distribution(initial, hbar).moments];
    let mut leaks = vec![initial.leak()];
    let mut history = options.record_states.then(|| vec![initial.clone()]);
    let mut current = initial.clone();
    let mut status = RunStatus::Complete;
    for n in 1..=kicks {
        let next = step_master(&current, w)?;
        if next.leak() > options.leak_budget {
            status = RunStatus::LeakBudgetExceeded {
                last_valid: n - 1,
                leak: next.leak(),
            };
            break;
        }
        moments.push(moments_from_distribution(&next, hbar).moments);
        leaks.push(next.leak());
        if let Some(h) = history.as_mut() {
            h.push(next.clone());
        }
        current = next;
    }
    Ok(MeasuredRun {
        lambda: system.lambda(),
        hbar,
        period: system.period(),
        moments,
        leaks,
        distributions: history,
        final_distribution: current,
        status,
    })
}

/// How the kick is applied inside the coherent propagator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KickMethod {
    /// To the angle grid, multiply by `exp(-i lambda V / hbar)`, and back.
    Spectral,
    /// Banded product with the precomputed kick matrix.
    Banded,
}

/// Floquet map `U_free(tau) U_kick U_free(T - tau)` on momentum amplitudes.
pub struct CoherentPropagator {
    basis: Basis,
    method: KickMethod,
    before: Vec<Complex64>,
    after: Vec<Complex64>,
    grid: usize,
    factors: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex64>,
    kick: Option<KickMatrix>,
}

impl CoherentPropagator {
    pub fn new(system: &KickedSystem, method: KickMethod) -> Self {
        let grid = system.grid();
        let mut planner = FftPlanner::new();
        let kick = (method == KickMethod::Banded).then(|| kick_matrix(system));
        let factors = match method {
            KickMethod::Spectral => {
                kick_factors(system.potential(), system.lambda() / system.hbar(), grid)
            }
            KickMethod::Banded => Vec::new(),
        };
        CoherentPropagator {
            basis: system.basis(),
            method,
            before: system.free_phases(system.period() - system.tau()),
            after: system.free_phases(system.tau()),
            grid,
            factors,
            forward: planner.plan_fft_forward(grid),
            inverse: planner.plan_fft_inverse(grid),
            buffer: vec![Complex64::new(0.0, 0.0); grid],
            kick,
        }
    }

    pub fn method(&self) -> KickMethod {
        self.method
    }

    pub fn step(&mut self, psi: &StateVector) -> Result<StateVector> {
        check_basis(self.basis, psi.basis())?;
        let dressed: Vec<Complex64> = psi
            .amps()
            .iter()
            .zip(&self.before)
            .map(|(a, ph)| a * ph)
            .collect();
        let (mut kicked, lost) = match self.method {
            KickMethod::Spectral => self.kick_spectral(&dressed),
            KickMethod::Banded => self.kick_banded(&dressed),
        };
        for (a, ph) in kicked.iter_mut().zip(&self.after) {
            *a *= ph;
        }
        Ok(StateVector::from_parts(kicked, psi.leak() + lost))
    }

    fn kick_spectral(&mut self, amps: &[Complex64]) -> (Vec<Complex64>, f64) {
        let g = self.grid as i64;
        let zero = Complex64::new(0.0, 0.0);
        self.buffer.iter_mut().for_each(|c| *c = zero);
        // the grid starts at -pi: e^{inx_j} = (-1)^n e^{2 pi i n j / G}
        for (slot, &a) in amps.iter().enumerate() {
            let n = self.basis.index_of_slot(slot);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            self.buffer[n.rem_euclid(g) as usize] = a * sign;
        }
        self.inverse.process(&mut self.buffer);
        for (c, u) in self.buffer.iter_mut().zip(&self.factors) {
            *c *= u;
        }
        self.forward.process(&mut self.buffer);
        let scale = 1.0 / g as f64;
        let m = self.basis.max_index();
        let mut out = vec![zero; amps.len()];
        let mut kept = vec![false; self.grid];
        for (slot, value) in out.iter_mut().enumerate() {
            let k = self.basis.index_of_slot(slot);
            let r = k.rem_euclid(g) as usize;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *value = self.buffer[r] * (sign * scale);
            kept[r] = true;
        }
        debug_assert!(2 * m < g);
        let lost = self
            .buffer
            .iter()
            .zip(&kept)
            .filter(|(_, k)| !**k)
            .map(|(c, _)| (c * scale).norm_sqr())
            .sum();
        (out, lost)
    }

    fn kick_banded(&self, amps: &[Complex64]) -> (Vec<Complex64>, f64) {
        let b = self.kick.as_ref().expect("banded propagator carries its kick matrix");
        let band = b.bandwidth() as i64;
        let m = self.basis.max_index();
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![zero; amps.len()];
        let mut lost = 0.0;
        for n in -m - band..=m + band {
            let mut acc = zero;
            for j in (n - band).max(-m)..=(n + band).min(m) {
                acc += b.diagonal(n - j) * amps[(j + m) as usize];
            }
            match self.basis.slot(n) {
                Some(s) => out[s] = acc,
                None => lost += acc.norm_sqr(),
            }
        }
        (out, lost)
    }
}

/// One coherent Floquet step with the spectral propagator.
pub fn step_coherent(psi: &StateVector, system: &KickedSystem) -> Result<StateVector> {
    CoherentPropagator::new(system, KickMethod::Spectral).step(psi)
}

fn moments_of_state(psi: &StateVector, hbar: f64) -> Moments {
    moments_from_distribution(&psi.distribution(), hbar).moments
}

pub fn evolve_coherent(
    system: &KickedSystem,
    initial: &StateVector,
    kicks: usize,
    options: &RunOptions,
) -> Result<CoherentRun> {
    evolve_coherent_with(system, KickMethod::Spectral, initial, kicks, options)
}

pub fn evolve_coherent_with(
    system: &KickedSystem,
    method: KickMethod,
    initial: &StateVector,
    kicks: usize,
    options: &RunOptions,
) -> Result<CoherentRun> {
    if kicks < 1 {
        return Err(Error::validation("kicks", "need at least one kick"));
    }
    check_basis(system.basis(), initial.basis())?;
    let hbar = system.hbar();
    let mut propagator = CoherentPropagator::new(system, method);
    let mut moments = vec![moments_of_state(initial, hbar)];
    let mut leaks = vec![initial.leak()];
    let mut history = options.record_states.then(|| vec![initial.clone()]);
    let mut current = initial.clone();
    let mut status = RunStatus::Complete;
    for n in 1..=kicks {
        let next = propagator.step(&current)?;
        if next.leak() > options.leak_budget {
            status = RunStatus::LeakBudgetExceeded {
                last_valid: n - 1,
                leak: next.leak(),
            };
            break;
        }
        moments.push(moments_of_state(&next, hbar));
        leaks.push(next.leak());
        if let Some(h) = history.as_mut() {
            h.push(next.clone());
        }
        current = next;
    }
    Ok(CoherentRun {
        lambda: system.lambda(),
        hbar,
        period: system.period(),
        moments,
        leaks,
        states: history,
        final_state: current,
        status,
    })
}

/// Outcome of one projective momentum measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measurement {
    pub index: i64,
    /// Draws that landed in the leaked mass and were redrawn.
    pub resamples: u32,
}

/// Inverse-CDF draw over `(index, weight)` pairs whose weights sum to at most
/// one; the missing mass triggers a redraw.
fn sample_weights(
    weights: impl Iterator<Item = (i64, f64)> + Clone,
    total: f64,
    rng: &mut StreamRng,
) -> Result<Measurement> {
    if total.is_nan() || total <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    let mut resamples = 0;
    loop {
        let u = rng.uniform();
        let mut cdf = 0.0;
        let mut last = None;
        for (n, w) in weights.clone() {
            if w <= 0.0 {
                continue;
            }
            cdf += w;
            last = Some(n);
            if u < cdf {
                return Ok(Measurement {
                    index: n,
                    resamples,
                });
            }
        }
        // u fell past the in-basis mass: either genuine leak or rounding
        if total >= 1.0 - 1e-15 {
            if let Some(n) = last {
                return Ok(Measurement {
                    index: n,
                    resamples,
                });
            }
        }
        resamples += 1;
    }
}

/// Projective momentum measurement: returns `n` with probability `P_n`.
pub fn sample_measurement(p: &MomentumDistribution, rng: &mut StreamRng) -> Result<Measurement> {
    let basis = p.basis();
    let total = p.total();
    sample_weights(
        p.probs()
            .iter()
            .enumerate()
            .map(move |(s, &w)| (basis.index_of_slot(s), w)),
        total,
        rng,
    )
}

/// Monte Carlo unravelling of the master equation: each trajectory starts
/// from a draw of `initial` and after every kick jumps to a momentum
/// eigenstate drawn from the corresponding column of `W`. Trajectory `t`
/// uses stream `t` of `seed`.
pub fn evolve_trajectories(
    system: &KickedSystem,
    w: &TransitionMatrix,
    initial: &MomentumDistribution,
    kicks: usize,
    count: usize,
    seed: u64,
) -> Result<MomentSeries> {
    if count == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let basis = w.basis();
    check_basis(basis, initial.basis())?;
    if initial.total() <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    let hbar = system.hbar();
    let band = w.band() as i64;
    let m = basis.max_index();
    let (records, errors, batches) = batched_moments(count, kicks, |t, out| {
        let mut rng = StreamRng::new(seed, t as u64);
        let mut n = sample_measurement(initial, &mut rng)?.index;
        out.push(n as f64 * hbar);
        for _ in 0..kicks {
            let lo = (n - band).max(-m);
            let hi = (n + band).min(m);
            let col = (lo..=hi).map(|k| (k, w.diagonal(k - n)));
            let total: f64 = col.clone().map(|(_, x)| x).sum();
            n = sample_weights(col, total, &mut rng)?.index;
            out.push(n as f64 * hbar);
        }
        Ok(())
    })?;
    Ok(MomentSeries {
        records,
        errors,
        batches,
        lambda: system.lambda(),
        period: system.period(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_j;
    use crate::model::{build_system, default_grid, SystemParams};

    fn rotator(lambda: f64, m: usize) -> KickedSystem {
        build_system(&SystemParams {
            lambda,
            basis_m: m,
            grid: default_grid(m),
            ..SystemParams::default()
        })
        .unwrap()
    }

    fn matrix(sys: &KickedSystem) -> TransitionMatrix {
        transition_matrix(&kick_matrix(sys))
    }

    #[test]
    fn identity_kick_leaves_distribution() {
        let sys = rotator(0.0, 8);
        let p = MomentumDistribution::uniform_over(sys.basis(), &[-3, 0, 5]).unwrap();
        let q = step_master(&p, &matrix(&sys)).unwrap();
        assert_eq!(q.probs(), p.probs());
        assert_eq!(q.leak(), 0.0);
    }

    #[test]
    fn single_kick_from_delta_is_bessel_squared() {
        let sys = rotator(1.0, 32);
        let p0 = MomentumDistribution::delta(sys.basis(), 0).unwrap();
        let p1 = step_master(&p0, &matrix(&sys)).unwrap();
        assert!((p1.prob(0) - 0.585_527_499_513_664_1).abs() < 1e-12);
        assert!((p1.prob(1) - 0.193_644_518_014_459_1).abs() < 1e-12);
        for n in -10..=10 {
            let j = bessel_j(n, 1.0).unwrap();
            assert!((p1.prob(n) - j * j).abs() < 1e-14);
        }
        p1.check(1e-12).unwrap();
    }

    #[test]
    fn basis_mismatch_is_rejected() {
        let w = matrix(&rotator(1.0, 8));
        let p = MomentumDistribution::delta(Basis::new(4), 0).unwrap();
        assert!(matches!(step_master(&p, &w), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn edge_mass_leaks_and_is_accounted() {
        let sys = rotator(3.0, 6);
        let w = matrix(&sys);
        let mut p = MomentumDistribution::delta(sys.basis(), 6).unwrap();
        for _ in 0..5 {
            p = step_master(&p, &w).unwrap();
            p.check(1e-12).unwrap();
        }
        assert!(p.leak() > 0.1);
    }

    #[test]
    fn leak_budget_stops_run() {
        let sys = rotator(3.0, 6);
        let p0 = MomentumDistribution::delta(sys.basis(), 0).unwrap();
        let run = evolve_measured(&sys, &p0, 50, &RunOptions::default()).unwrap();
        match run.status {
            RunStatus::LeakBudgetExceeded { last_valid, .. } => {
                assert_eq!(run.moments.len(), last_valid + 1);
            }
            RunStatus::Complete => panic!("expected the budget to trip"),
        }
    }

    #[test]
    fn measured_run_records_consistent_pairs() {
        let sys = rotator(1.0, 64);
        let w = matrix(&sys);
        let p0 = MomentumDistribution::delta(sys.basis(), 0).unwrap();
        let opts = RunOptions {
            record_states: true,
            ..RunOptions::default()
        };
        let run = evolve_measured_with(&sys, &w, &p0, 20, &opts).unwrap();
        let dists = run.distributions.as_ref().unwrap();
        for pair in dists.windows(2) {
            let next = step_master(&pair[0], &w).unwrap();
            for (a, b) in next.probs().iter().zip(pair[1].probs()) {
                assert!((a - b).abs() < 1e-13);
            }
        }
        for (n, m) in run.moments.iter().enumerate() {
            assert!((m.mean_p2 - 0.5 * n as f64).abs() < 1e-11);
        }
    }

    #[test]
    fn spectral_and_banded_agree() {
        let params = SystemParams {
            lambda: 2.5,
            basis_m: 48,
            grid: default_grid(48),
            ..SystemParams::default()
        };
        let sys = build_system(&params).unwrap();
        let mut spectral = CoherentPropagator::new(&sys, KickMethod::Spectral);
        let mut banded = CoherentPropagator::new(&sys, KickMethod::Banded);
        let mut a = StateVector::delta(sys.basis(), 3).unwrap();
        let mut b = a.clone();
        for _ in 0..10 {
            a = spectral.step(&a).unwrap();
            b = banded.step(&b).unwrap();
            for (x, y) in a.amps().iter().zip(b.amps()) {
                assert!((x - y).norm() < 1e-10);
            }
            assert!((a.leak() - b.leak()).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_step_preserves_norm() {
        let sys = rotator(1.5, 32);
        let psi = StateVector::delta(sys.basis(), 0).unwrap();
        let next = step_coherent(&psi, &sys).unwrap();
        assert!((next.norm_sqr() + next.leak() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_zero_kick_is_diagonal() {
        let sys = rotator(0.0, 8);
        let amps: Vec<Complex64> = (0..17)
            .map(|s| Complex64::new((s as f64).sin(), (s as f64 * 0.3).cos()))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let amps: Vec<Complex64> = amps.iter().map(|a| a / norm.sqrt()).collect();
        let psi = StateVector::new(sys.basis(), amps).unwrap();
        let next = step_coherent(&psi, &sys).unwrap();
        for (a, b) in psi.amps().iter().zip(next.amps()) {
            assert!((a.norm_sqr() - b.norm_sqr()).abs() < 1e-14);
        }
    }

    #[test]
    fn first_coherent_step_matches_master_step() {
        let sys = rotator(1.3, 32);
        let psi = StateVector::delta(sys.basis(), 0).unwrap();
        let p = step_master(&psi.distribution(), &matrix(&sys)).unwrap();
        let c = step_coherent(&psi, &sys).unwrap().distribution();
        for (a, b) in p.probs().iter().zip(c.probs()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn sampling_a_delta_is_certain() {
        let p = MomentumDistribution::delta(Basis::new(5), 3).unwrap();
        let mut rng = StreamRng::new(9, 0);
        for _ in 0..100 {
            assert_eq!(sample_measurement(&p, &mut rng).unwrap().index, 3);
        }
    }

    #[test]
    fn sampling_two_points_is_binomial() {
        let p = MomentumDistribution::uniform_over(Basis::new(5), &[-1, 1]).unwrap();
        let mut rng = StreamRng::new(2024, 0);
        let draws = 100_000;
        let plus = (0..draws)
            .filter(|_| sample_measurement(&p, &mut rng).unwrap().index == 1)
            .count();
        let sigma = (draws as f64 * 0.25).sqrt();
        assert!((plus as f64 - draws as f64 / 2.0).abs() < 4.0 * sigma);
    }

    #[test]
    fn sampling_empty_distribution_fails() {
        let p = MomentumDistribution::new(Basis::new(2), vec![0.0; 5], 1.0).unwrap();
        let mut rng = StreamRng::new(0, 0);
        assert!(matches!(
            sample_measurement(&p, &mut rng),
            Err(Error::EmptyDistribution)
        ));
    }

    #[test]
    fn sampling_redraws_leaked_mass() {
        let basis = Basis::new(2);
        let p = MomentumDistribution::new(basis, vec![0.0, 0.0, 0.1, 0.0, 0.0], 0.9).unwrap();
        let mut rng = StreamRng::new(5, 1);
        let mut redraws = 0;
        for _ in 0..200 {
            let s = sample_measurement(&p, &mut rng).unwrap();
            assert_eq!(s.index, 0);
            redraws += s.resamples;
        }
        assert!(redraws > 0);
    }
}
