//! Classical radial twist map, its angle-randomized counterpart, ensemble
//! Monte Carlo with batch-means errors, and the exact moment recursion for
//! the randomized map.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{angle_average, FreeHamiltonian, KickedSystem, Potential};
use crate::observables::Moments;
use crate::rng::StreamRng;

/// Number of batches for batch-means standard errors.
pub const BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalState {
    pub x: f64,
    pub p: f64,
}

/// Reduce an angle into `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(2.0 * PI) - PI;
    if r >= PI {
        -PI
    } else {
        r
    }
}

impl ClassicalState {
    pub fn new(x: f64, p: f64) -> Self {
        ClassicalState { x: wrap_angle(x), p }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalEnsemble {
    pub particles: Vec<ClassicalState>,
    pub master_seed: u64,
}

impl ClassicalEnsemble {
    pub fn new(particles: Vec<ClassicalState>, master_seed: u64) -> Self {
        ClassicalEnsemble {
            particles,
            master_seed,
        }
    }

    /// Angles uniform on `[-pi, pi)` (counter 0 of each particle's stream),
    /// all momenta equal to `p0`.
    pub fn uniform_angles(count: usize, p0: f64, master_seed: u64) -> Self {
        let particles = (0..count)
            .map(|i| ClassicalState::new(StreamRng::at(master_seed, i as u64, 0).angle(), p0))
            .collect();
        ClassicalEnsemble {
            particles,
            master_seed,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Twist,
    Randomized,
}

/// Per-kick ensemble moments. Monte Carlo series carry batch-means errors and
/// the per-batch series; exact series have zero errors and no batches.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub records: Vec<Moments>,
    pub errors: Vec<Moments>,
    pub batches: Vec<Vec<Moments>>,
    pub lambda: f64,
    pub period: f64,
}

impl MomentSeries {
    pub fn kicks(&self) -> usize {
        self.records.len() - 1
    }
}

/// The deterministic twist map `x += H0'(p) T; p -= lambda V'(x)`.
#[derive(Debug, Clone)]
pub struct TwistMap {
    h0: FreeHamiltonian,
    potential: Potential,
    lambda: f64,
    period: f64,
}

impl TwistMap {
    pub fn new(system: &KickedSystem) -> Result<Self> {
        if system.h0().velocity(0.0).is_none() {
            return Err(Error::UnsupportedHamiltonian(
                "the twist map needs H0'(p) at continuous p; tabulated H0 has none".into(),
            ));
        }
        Ok(TwistMap {
            h0: system.h0().clone(),
            potential: system.potential().clone(),
            lambda: system.lambda(),
            period: system.period(),
        })
    }

    #[inline]
    pub fn step(&self, s: ClassicalState) -> ClassicalState {
        let v = match &self.h0 {
            FreeHamiltonian::Rotator { inertia } => s.p / inertia,
            h0 => h0.velocity(s.p).unwrap_or(0.0),
        };
        self.kick_at(s.x + v * self.period, s.p)
    }

    #[inline]
    fn kick_at(&self, x: f64, p: f64) -> ClassicalState {
        let x = wrap_angle(x);
        ClassicalState {
            x,
            p: p - self.lambda * self.potential.derivative(x),
        }
    }

    /// Angle replaced by a fresh uniform draw, then the kick.
    #[inline]
    pub fn step_randomized(&self, s: ClassicalState, rng: &mut StreamRng) -> ClassicalState {
        self.kick_at(rng.angle(), s.p)
    }
}

pub fn step_twist(s: ClassicalState, system: &KickedSystem) -> Result<ClassicalState> {
    Ok(TwistMap::new(system)?.step(s))
}

pub fn step_randomized(
    s: ClassicalState,
    system: &KickedSystem,
    rng: &mut StreamRng,
) -> ClassicalState {
    let x = rng.angle();
    ClassicalState {
        x,
        p: s.p - system.lambda() * system.potential().derivative(x),
    }
}

type BatchedMoments = (Vec<Moments>, Vec<Moments>, Vec<Vec<Moments>>);

/// Run `item(i, out)` for every `i < count`, each filling `out` with its
/// momentum after kicks `0..=kicks`, and reduce into means, batch-means
/// errors, and per-batch means. Batches are contiguous index ranges reduced
/// in a fixed order, so the result does not depend on the thread count.
pub(crate) fn batched_moments<F>(count: usize, kicks: usize, item: F) -> Result<BatchedMoments>
where
    F: Fn(usize, &mut Vec<f64>) -> Result<()> + Sync,
{
    if count == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let nb = BATCHES.min(count);
    let len = kicks + 1;
    let sums: Vec<Vec<[f64; 4]>> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![[0.0; 4]; len];
            let mut path = Vec::with_capacity(len);
            for i in b * count / nb..(b + 1) * count / nb {
                path.clear();
                item(i, &mut path)?;
                debug_assert_eq!(path.len(), len);
                for (a, &p) in acc.iter_mut().zip(&path) {
                    let p2 = p * p;
                    a[0] += p;
                    a[1] += p2;
                    a[2] += p2 * p;
                    a[3] += p2 * p2;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let batch_means: Vec<Vec<Moments>> = sums
        .iter()
        .enumerate()
        .map(|(b, acc)| {
            let size = ((b + 1) * count / nb - b * count / nb) as f64;
            acc.iter()
                .map(|a| Moments::from_orders(a.map(|s| s / size)))
                .collect()
        })
        .collect();

    let mut records = Vec::with_capacity(len);
    let mut errors = Vec::with_capacity(len);
    for n in 0..len {
        let mut total = [0.0; 4];
        for acc in &sums {
            for k in 0..4 {
                total[k] += acc[n][k];
            }
        }
        let mean = total.map(|s| s / count as f64);
        let mut se = [0.0; 4];
        if nb > 1 {
            for k in 0..4 {
                let ss: f64 = batch_means
                    .iter()
                    .map(|b| (b[n].as_array()[k] - mean[k]).powi(2))
                    .sum();
                se[k] = (ss / (nb as f64 * (nb as f64 - 1.0))).sqrt();
            }
        }
        records.push(Moments::from_orders(mean));
        errors.push(Moments::from_orders(se));
    }
    Ok((records, errors, batch_means))
}

/// Evolve every particle for `kicks` kicks. Randomized kick `k` of particle
/// `i` uses counter `k` of stream `i` under the ensemble seed.
pub fn run_ensemble(
    system: &KickedSystem,
    ensemble: &ClassicalEnsemble,
    kicks: usize,
    mode: MapKind,
) -> Result<MomentSeries> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if kicks < 1 {
        return Err(Error::validation("kicks", "need at least one kick"));
    }
    let map = TwistMap::new(system).or_else(|e| match mode {
        // the randomized map never evaluates H0'
        MapKind::Randomized => Ok(TwistMap {
            h0: FreeHamiltonian::Rotator { inertia: 1.0 },
            potential: system.potential().clone(),
            lambda: system.lambda(),
            period: system.period(),
        }),
        MapKind::Twist => Err(e),
    })?;
    let seed = ensemble.master_seed;
    let (records, errors, batches) = batched_moments(ensemble.len(), kicks, |i, out| {
        let mut s = ensemble.particles[i];
        out.push(s.p);
        match mode {
            MapKind::Twist => {
                for _ in 0..kicks {
                    s = map.step(s);
                    out.push(s.p);
                }
            }
            MapKind::Randomized => {
                let mut rng = StreamRng::at(seed, i as u64, 1);
                for _ in 0..kicks {
                    s = map.step_randomized(s, &mut rng);
                    out.push(s.p);
                }
            }
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

/// Exact moments of the randomized map. Because `xi_N` is independent of
/// `p_(N-1)`, `<<p_N^k>> = sum_j C(k, j) <<p_(N-1)^(k-j)>> <(lambda f(xi))^j>`
/// with the single-angle averages evaluated once by quadrature.
pub fn exact_randomized_moments(
    system: &KickedSystem,
    initial: Moments,
    kicks: usize,
) -> MomentSeries {
    let v = system.potential();
    let lambda = system.lambda();
    let grid = system.grid().max(8 * v.highest_harmonic() + 1);
    let kick_power: Vec<f64> = (0..=4)
        .map(|j| {
            if j == 0 {
                1.0
            } else {
                angle_average(grid, |x| (-lambda * v.derivative(x)).powi(j))
            }
        })
        .collect();
    const BINOM: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    let mut records = Vec::with_capacity(kicks + 1);
    records.push(initial);
    let mut cur = initial;
    for _ in 0..kicks {
        let mut next = [0.0; 4];
        for (k, slot) in next.iter_mut().enumerate() {
            let k = k + 1;
            *slot = (0..=k)
                .map(|j| BINOM[k][j] * cur.order(k - j) * kick_power[j])
                .sum();
        }
        cur = Moments::from_orders(next);
        records.push(cur);
    }
    MomentSeries {
        errors: vec![Moments::default(); records.len()],
        records,
        batches: Vec::new(),
        lambda,
        period: system.period(),
    }
}
