//! Unitary measurement model: every kick entangles the momentum eigenstate
//! with a fresh spin register, so the joint state is a sum over momentum
//! paths `(m, l, j, ...)`. Each path labels an orthogonal register
//! configuration; the registers themselves are never stored.
//!
//! After `N` kicks the state is `(-i)^(N+1) sum_paths A_..  A_lm c'_m |last>`
//! with `c'_m = c_m exp(-i H0(p_m) tau / hbar)` and the dressed amplitude
//! `A_lm = <l|U_free(tau) U_kick U_free(T - tau)|m>`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kick::{kick_matrix, KickMatrix};
use crate::model::{Basis, KickedSystem, MomentumDistribution, StateVector};

/// Branches whose amplitude modulus falls below this are dropped into leak.
pub const AMPLITUDE_FLOOR: f64 = 1e-14;

/// Default cap on the number of live branches.
pub const DEFAULT_BRANCH_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub path: Vec<i64>,
    pub amplitude: Complex64,
}

#[derive(Debug, Clone)]
pub struct BranchState {
    basis: Basis,
    branches: Vec<Branch>,
    /// Power of `-i` multiplying every branch.
    phase_exponent: u32,
    leak: f64,
    kicks: usize,
}

impl BranchState {
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn phase_exponent(&self) -> u32 {
        self.phase_exponent
    }

    /// `(-i)^phase_exponent`.
    pub fn global_phase(&self) -> Complex64 {
        Complex64::new(0.0, -1.0).powu(self.phase_exponent)
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    pub fn kicks(&self) -> usize {
        self.kicks
    }

    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.amplitude.norm_sqr()).sum()
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }
}

/// Precomputed dressed amplitudes `A_lm` for a system.
pub struct BranchPropagator {
    basis: Basis,
    kick: KickMatrix,
    before: Vec<Complex64>,
    after: Vec<Complex64>,
    budget: usize,
}

impl BranchPropagator {
    pub fn new(system: &KickedSystem) -> Self {
        Self::with_budget(system, DEFAULT_BRANCH_BUDGET)
    }

    pub fn with_budget(system: &KickedSystem, budget: usize) -> Self {
        BranchPropagator {
            basis: system.basis(),
            kick: kick_matrix(system),
            before: system.free_phases(system.period() - system.tau()),
            after: system.free_phases(system.tau()),
            budget,
        }
    }

    /// `A_lm`, zero outside the basis.
    pub fn amplitude(&self, l: i64, m: i64) -> Complex64 {
        match (self.basis.slot(l), self.basis.slot(m)) {
            (Some(sl), Some(sm)) => self.after[sl] * self.kick.entry(l, m) * self.before[sm],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn kick(&self, state: &BranchState) -> Result<BranchState> {
        let band = self.kick.bandwidth();
        let projected = state.branches.len().saturating_mul(2 * band + 1);
        if projected > self.budget {
            return Err(Error::BranchBudget {
                kick: state.kicks + 1,
                branches: projected,
                budget: self.budget,
            });
        }
        let band = band as i64;
        let m_max = self.basis.max_index();
        let expanded: Vec<(Vec<Branch>, f64)> = state
            .branches
            .par_iter()
            .map(|parent| {
                let m = *parent.path.last().expect("paths are never empty");
                let mut children = Vec::new();
                let mut lost = 0.0;
                // mass the kick sends outside the basis
                for l in m - band..=m + band {
                    if l < -m_max || l > m_max {
                        lost += (self.kick.diagonal(l - m) * parent.amplitude).norm_sqr();
                        continue;
                    }
                    let amplitude = self.amplitude(l, m) * parent.amplitude;
                    if amplitude.norm() < AMPLITUDE_FLOOR {
                        lost += amplitude.norm_sqr();
                        continue;
                    }
                    let mut path = Vec::with_capacity(parent.path.len() + 1);
                    path.extend_from_slice(&parent.path);
                    path.push(l);
                    children.push(Branch { path, amplitude });
                }
                (children, lost)
            })
            .collect();
        let mut branches = Vec::new();
        let mut leak = state.leak;
        for (children, lost) in expanded {
            branches.extend(children);
            leak += lost;
        }
        // mass beyond the kick's band that was never materialized
        let parent_mass = state.total_probability();
        let band_mass: f64 = (-band..=band).map(|k| self.kick.diagonal(k).norm_sqr()).sum();
        leak += parent_mass * (1.0 - band_mass).max(0.0);
        Ok(BranchState {
            basis: state.basis,
            branches,
            phase_exponent: state.phase_exponent + 1,
            leak,
            kicks: state.kicks + 1,
        })
    }
}

/// Spins all down, then the first register flip at `t = tau`.
pub fn init_branches(c0: &StateVector, system: &KickedSystem) -> Result<BranchState> {
    let basis = system.basis();
    if c0.basis() != basis {
        return Err(Error::BasisMismatch {
            expected: basis.m(),
            found: c0.basis().m(),
        });
    }
    let phases = system.free_phases(system.tau());
    let branches = c0
        .amps()
        .iter()
        .zip(&phases)
        .enumerate()
        .filter(|(_, (c, _))| c.norm_sqr() > 0.0)
        .map(|(slot, (c, ph))| Branch {
            path: vec![basis.index_of_slot(slot)],
            amplitude: c * ph,
        })
        .collect();
    Ok(BranchState {
        basis,
        branches,
        phase_exponent: 1,
        leak: c0.leak(),
        kicks: 0,
    })
}

pub fn kick_branches(state: &BranchState, system: &KickedSystem) -> Result<BranchState> {
    BranchPropagator::new(system).kick(state)
}

/// `P_n = sum over branches ending at n of |amplitude|^2`. Distinct paths are
/// orthogonal register states, so no cross terms appear.
pub fn branch_occupation(state: &BranchState) -> MomentumDistribution {
    let mut probs = vec![0.0; state.basis.len()];
    for b in &state.branches {
        let last = *b.path.last().expect("paths are never empty");
        if let Some(slot) = state.basis.slot(last) {
            probs[slot] += b.amplitude.norm_sqr();
        }
    }
    MomentumDistribution::from_parts(probs, state.leak)
}

/// Initialize and apply `kicks` kicks.
pub fn evolve_branches(
    c0: &StateVector,
    system: &KickedSystem,
    kicks: usize,
    budget: usize,
) -> Result<BranchState> {
    let propagator = BranchPropagator::with_budget(system, budget);
    let mut state = init_branches(c0, system)?;
    for _ in 0..kicks {
        state = propagator.kick(&state)?;
    }
    Ok(state)
}
