//! Moments, friction/diffusion fits, heating rate, and the quantum-classical
//! fourth-moment discrepancy.

use crate::classical::MomentSeries;
use crate::dynamics::MeasuredRun;
use crate::error::{Error, Result};
use crate::model::{KickedSystem, MomentumDistribution};

/// Raw momentum moments `<p^k>`, `k = 1..=4`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub mean_p: f64,
    pub mean_p2: f64,
    pub mean_p3: f64,
    pub mean_p4: f64,
}

impl Moments {
    pub fn order(&self, k: usize) -> f64 {
        match k {
            0 => 1.0,
            1 => self.mean_p,
            2 => self.mean_p2,
            3 => self.mean_p3,
            4 => self.mean_p4,
            _ => panic!("moment order {k} not tracked"),
        }
    }

    pub fn from_orders(m: [f64; 4]) -> Self {
        Moments {
            mean_p: m[0],
            mean_p2: m[1],
            mean_p3: m[2],
            mean_p4: m[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.mean_p, self.mean_p2, self.mean_p3, self.mean_p4]
    }

    /// `<Delta p^2> = <p^2> - <p>^2`.
    pub fn variance(&self) -> f64 {
        self.mean_p2 - self.mean_p * self.mean_p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRecord {
    pub moments: Moments,
    pub leak: f64,
    /// `leak * ((M + 1) hbar)^k`: the smallest contribution the leaked mass
    /// could make to `<|p|^k>`.
    pub leak_scale: [f64; 4],
}

pub fn moments_from_distribution(p: &MomentumDistribution, hbar: f64) -> MomentRecord {
    let basis = p.basis();
    let mut acc = [0.0; 4];
    for (slot, &w) in p.probs().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let x = basis.index_of_slot(slot) as f64 * hbar;
        let x2 = x * x;
        acc[0] += w * x;
        acc[1] += w * x2;
        acc[2] += w * x2 * x;
        acc[3] += w * x2 * x2;
    }
    let edge = (basis.m() + 1) as f64 * hbar;
    let leak = p.leak();
    MomentRecord {
        moments: Moments::from_orders(acc),
        leak,
        leak_scale: [leak * edge, leak * edge.powi(2), leak * edge.powi(3), leak * edge.powi(4)],
    }
}

/// Inclusive kick-index range used by a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitWindow {
    pub first: usize,
    pub last: usize,
}

impl FitWindow {
    pub fn new(first: usize, last: usize) -> Self {
        FitWindow { first, last }
    }

    pub fn full(len: usize) -> Self {
        FitWindow {
            first: 0,
            last: len.saturating_sub(1),
        }
    }

    /// Last quarter of a series of `len` records, widened to at least three
    /// records when the series allows it.
    pub fn last_quarter(len: usize) -> Self {
        let last = len.saturating_sub(1);
        FitWindow {
            first: (last - last / 4).min(last.saturating_sub(2)),
            last,
        }
    }

    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, series_len: usize) -> Result<()> {
        if self.last < self.first || self.last >= series_len || self.len() < 3 {
            return Err(Error::DegenerateWindow {
                first: self.first,
                last: self.last,
                len: series_len,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionFit {
    /// Drift of `<p>` per unit time.
    pub friction: f64,
    /// Growth of `<Delta p^2>` per unit time.
    pub diffusion: f64,
    /// Max absolute deviation of `<Delta p^2>` from the fitted line.
    pub residual: f64,
    /// Spread (max - min) of `<Delta p^2>` inside the window.
    pub range: f64,
    pub window: FitWindow,
    /// Batch-means standard error of `diffusion`, Monte Carlo series only.
    pub std_error: Option<f64>,
}

/// Least-squares line through `(t_i, y_i)`: `(slope, intercept)`.
pub fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let mut sty = 0.0;
    let mut stt = 0.0;
    for (a, b) in t.iter().zip(y) {
        sty += (a - tm) * (b - ym);
        stt += (a - tm) * (a - tm);
    }
    let slope = sty / stt;
    (slope, ym - slope * tm)
}

fn times(window: FitWindow, period: f64) -> Vec<f64> {
    (window.first..=window.last).map(|n| n as f64 * period).collect()
}

pub fn fit_diffusion(series: &[Moments], period: f64, window: FitWindow) -> Result<DiffusionFit> {
    window.check(series.len())?;
    let t = times(window, period);
    let slice = &series[window.first..=window.last];
    let mean: Vec<f64> = slice.iter().map(|m| m.mean_p).collect();
    let var: Vec<f64> = slice.iter().map(Moments::variance).collect();
    let (friction, _) = linear_fit(&t, &mean);
    let (diffusion, intercept) = linear_fit(&t, &var);
    let residual = t
        .iter()
        .zip(&var)
        .map(|(ti, v)| (diffusion * ti + intercept - v).abs())
        .fold(0.0, f64::max);
    let hi = var.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = var.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DiffusionFit {
        friction,
        diffusion,
        residual,
        range: hi - lo,
        window,
        std_error: None,
    })
}

/// Fit on the ensemble means, with the standard error of `D` from the spread
/// of per-batch fits.
pub fn fit_diffusion_batched(series: &MomentSeries, window: FitWindow) -> Result<DiffusionFit> {
    let mut fit = fit_diffusion(&series.records, series.period, window)?;
    let nb = series.batches.len();
    if nb >= 2 {
        let slopes = series
            .batches
            .iter()
            .map(|b| fit_diffusion(b, series.period, window).map(|f| f.diffusion))
            .collect::<Result<Vec<_>>>()?;
        let mean = slopes.iter().sum::<f64>() / nb as f64;
        let ss: f64 = slopes.iter().map(|s| (s - mean).powi(2)).sum();
        fit.std_error = Some((ss / (nb as f64 * (nb as f64 - 1.0))).sqrt());
    }
    Ok(fit)
}

/// Per-time growth of `<K> = <p^2> / 2m` over the whole series.
pub fn heating_rate(series: &[Moments], system: &KickedSystem) -> Result<f64> {
    let mass = system.h0().mass().ok_or_else(|| {
        Error::UnsupportedHamiltonian("heating rate needs a quadratic H0 with a mass".into())
    })?;
    let window = FitWindow::full(series.len());
    window.check(series.len())?;
    let t = times(window, system.period());
    let kinetic: Vec<f64> = series.iter().map(|m| m.mean_p2 / (2.0 * mass)).collect();
    Ok(linear_fit(&t, &kinetic).0)
}

/// Tolerance for the orders 1-3 increment match that must hold before the
/// fourth-moment comparison means anything.
pub const LOW_ORDER_MATCH: f64 = 1e-9;

/// `Delta_N` = quantum minus classical per-kick increment of the fourth
/// moment, for `N = 1..`. Expected constant `lambda^2 hbar^2 <(f')^2>`.
pub fn fourth_moment_discrepancy(
    quantum: &MeasuredRun,
    classical: &MomentSeries,
    system: &KickedSystem,
) -> Result<Vec<f64>> {
    let q = &quantum.moments;
    let c = &classical.records;
    if classical.lambda != system.lambda() || classical.period != system.period() {
        return Err(Error::ParameterMismatch(format!(
            "classical series has lambda={}, T={}; system has lambda={}, T={}",
            classical.lambda,
            classical.period,
            system.lambda(),
            system.period()
        )));
    }
    if quantum.lambda != system.lambda() || quantum.hbar != system.hbar() {
        return Err(Error::ParameterMismatch(
            "quantum run was produced by a different system".into(),
        ));
    }
    if q.len() != c.len() || q.len() < 2 {
        return Err(Error::ParameterMismatch(format!(
            "series lengths differ or are too short: {} vs {}",
            q.len(),
            c.len()
        )));
    }
    for k in 1..=4 {
        let d = (q[0].order(k) - c[0].order(k)).abs();
        if d > LOW_ORDER_MATCH * (1.0 + q[0].order(k).abs()) {
            return Err(Error::Prerequisite(format!(
                "initial moment of order {k} differs by {d:e}"
            )));
        }
    }
    let mut out = Vec::with_capacity(q.len() - 1);
    for n in 1..q.len() {
        for k in 1..=3 {
            let dq = q[n].order(k) - q[n - 1].order(k);
            let dc = c[n].order(k) - c[n - 1].order(k);
            if (dq - dc).abs() > LOW_ORDER_MATCH {
                return Err(Error::Prerequisite(format!(
                    "order-{k} increments differ by {:e} at kick {n}",
                    (dq - dc).abs()
                )));
            }
        }
        let dq = q[n].mean_p4 - q[n - 1].mean_p4;
        let dc = c[n].mean_p4 - c[n - 1].mean_p4;
        out.push(dq - dc);
    }
    Ok(out)
}
