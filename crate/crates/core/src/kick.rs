//! Kick operator `B = exp(-i lambda V / hbar)` in the momentum basis and the
//! transition probabilities `W_nm = |B_nm|^2`.
//!
//! `V` depends on `x` only, so `B_nm` depends only on `n - m`. A single FFT of
//! the kick factor sampled on the periodic grid yields every diagonal.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{Basis, KickedSystem, Potential};

/// Entries below this modulus count as outside the band.
pub const BAND_THRESHOLD: f64 = 1e-14;

/// Magic bytes of the binary transition-matrix dump.
pub const DUMP_MAGIC: [u8; 8] = *b"MDIFFW01";

/// `exp(-i ratio V(x_j))` on `x_j = -pi + 2 pi j / grid`.
pub(crate) fn kick_factors(potential: &Potential, ratio: f64, grid: usize) -> Vec<Complex64> {
    let h = 2.0 * PI / grid as f64;
    (0..grid)
        .into_par_iter()
        .map(|j| Complex64::from_polar(1.0, -ratio * potential.value(-PI + h * j as f64)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct KickMatrix {
    basis: Basis,
    // B_k for k in [-2M, 2M], stored at k + 2M
    diagonals: Vec<Complex64>,
    // |B_k|^2 over every grid residue, signed representative order
    residue_power: Vec<(i64, f64)>,
    ratio: f64,
    potential_id: String,
    bandwidth: usize,
    converged: bool,
}

/// Build `<n|exp(-i lambda V / hbar)|m>` by trapezoidal quadrature on the
/// system grid.
pub fn kick_matrix(system: &KickedSystem) -> KickMatrix {
    let basis = system.basis();
    let grid = system.grid();
    let m = basis.m() as i64;
    let ratio = system.lambda() / system.hbar();

    let mut buf = kick_factors(system.potential(), ratio, grid);
    FftPlanner::new().plan_fft_forward(grid).process(&mut buf);
    let scale = 1.0 / grid as f64;
    let coefficient = |k: i64| -> Complex64 {
        let r = k.rem_euclid(grid as i64) as usize;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        buf[r] * (sign * scale)
    };

    let diagonals: Vec<Complex64> = (-2 * m..=2 * m).map(coefficient).collect();
    let half = grid as i64 / 2;
    let residue_power = (0..grid as i64)
        .map(|r| {
            let k = if r > half { r - grid as i64 } else { r };
            (k, (buf[r as usize] * scale).norm_sqr())
        })
        .collect();

    let bandwidth = diagonals
        .iter()
        .enumerate()
        .filter(|(_, b)| b.norm() >= BAND_THRESHOLD)
        .map(|(i, _)| (i as i64 - 2 * m).unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    let converged = bandwidth < 2 * basis.m();

    KickMatrix {
        basis,
        diagonals,
        residue_power,
        ratio,
        potential_id: system.potential().id(),
        bandwidth,
        converged,
    }
}

impl KickMatrix {
    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// `B_k` for offset `k = n - m`, `|k| <= 2M`.
    pub fn diagonal(&self, k: i64) -> Complex64 {
        let m2 = 2 * self.basis.m() as i64;
        assert!(k.abs() <= m2, "offset {k} outside [-2M, 2M]");
        self.diagonals[(k + m2) as usize]
    }

    pub fn entry(&self, n: i64, m: i64) -> Complex64 {
        self.diagonal(n - m)
    }

    /// Row-major dense copy over `n, m in [-M, M]`.
    pub fn dense(&self) -> Vec<Complex64> {
        let idx: Vec<i64> = self.basis.indices().collect();
        idx.iter()
            .flat_map(|&n| idx.iter().map(move |&m| (n, m)))
            .map(|(n, m)| self.entry(n, m))
            .collect()
    }

    /// `lambda / hbar`.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn potential_id(&self) -> &str {
        &self.potential_id
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// False when entries at `|n - m| = 2M` are still above threshold.
    pub fn converged(&self) -> bool {
        self.converged
    }
}

/// Banded Toeplitz transition matrix with explicit truncation leaks.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    basis: Basis,
    band: usize,
    // w_k for k in [-band, band], stored at k + band
    diagonals: Vec<f64>,
    column_leak: Vec<f64>,
    row_leak: Vec<f64>,
    converged: bool,
}

pub fn transition_matrix(b: &KickMatrix) -> TransitionMatrix {
    let basis = b.basis;
    let m = basis.m() as i64;
    let band = b.bandwidth.min(2 * basis.m());
    let diagonals: Vec<f64> = (-(band as i64)..=band as i64)
        .map(|k| b.diagonal(k).norm_sqr())
        .collect();

    // Leaks are tail sums over the offsets that leave the basis, so they stay
    // accurate far below the rounding level of 1 - sum.
    let mut sorted = b.residue_power.clone();
    sorted.sort_by_key(|(k, _)| *k);
    let first = sorted[0].0;
    let mut below = vec![0.0; sorted.len() + 1];
    for (i, (_, w)) in sorted.iter().enumerate() {
        below[i + 1] = below[i] + w;
    }
    let mut above = vec![0.0; sorted.len() + 1];
    for (i, (_, w)) in sorted.iter().enumerate().rev() {
        above[i] = above[i + 1] + w;
    }
    let outside = |lo: i64, hi: i64| -> f64 {
        // sum of w_k for k < lo plus k > hi
        let lo_i = (lo - first).clamp(0, sorted.len() as i64) as usize;
        let hi_i = (hi - first + 1).clamp(0, sorted.len() as i64) as usize;
        below[lo_i] + above[hi_i]
    };
    let column_leak = basis.indices().map(|j| outside(-m - j, m - j)).collect();
    let row_leak = basis.indices().map(|i| outside(i - m, i + m)).collect();

    TransitionMatrix {
        basis,
        band,
        diagonals,
        column_leak,
        row_leak,
        converged: b.converged,
    }
}

impl TransitionMatrix {
    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// `w_k` for `k = n - m`; zero outside the band.
    pub fn diagonal(&self, k: i64) -> f64 {
        if k.unsigned_abs() as usize > self.band {
            0.0
        } else {
            self.diagonals[(k + self.band as i64) as usize]
        }
    }

    pub fn entry(&self, n: i64, m: i64) -> f64 {
        if self.basis.slot(n).is_none() || self.basis.slot(m).is_none() {
            return 0.0;
        }
        self.diagonal(n - m)
    }

    pub fn column_leak(&self) -> &[f64] {
        &self.column_leak
    }

    pub fn row_leak(&self) -> &[f64] {
        &self.row_leak
    }

    pub fn column_sum(&self, m: i64) -> f64 {
        self.basis.indices().map(|n| self.entry(n, m)).sum()
    }

    pub fn row_sum(&self, n: i64) -> f64 {
        self.basis.indices().map(|m| self.entry(n, m)).sum()
    }

    /// Row-major dense copy over `n, m in [-M, M]`.
    pub fn dense(&self) -> Vec<f64> {
        let idx: Vec<i64> = self.basis.indices().collect();
        idx.iter()
            .flat_map(|&n| idx.iter().map(move |&m| (n, m)))
            .map(|(n, m)| self.entry(n, m))
            .collect()
    }

    /// Binary dump: 8-byte magic, `M` and band as little-endian `u32`, then
    /// the dense matrix row-major as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let m = u32::try_from(self.basis.m())
            .map_err(|_| Error::validation("basis_m", "too large for the dump header"))?;
        out.write_all(&DUMP_MAGIC)?;
        out.write_all(&m.to_le_bytes())?;
        out.write_all(&(self.band as u32).to_le_bytes())?;
        for w in self.dense() {
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Parse a binary dump back into `(M, band, row-major entries)`.
pub fn read_binary(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let bad = |msg: &str| Error::validation("transition dump", msg.to_string());
    if bytes.len() < 16 || bytes[..8] != DUMP_MAGIC {
        return Err(bad("missing header"));
    }
    let m = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let band = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let n = 2 * m + 1;
    let body = &bytes[16..];
    if body.len() != n * n * 8 {
        return Err(bad("body length does not match header"));
    }
    let entries = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((m, band, entries))
}
