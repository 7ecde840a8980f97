//! Integer-order Bessel functions of the first kind, used as an independent
//! reference for kicked-rotator matrix elements
//! (`<n|exp(-i k cos x)|m> = (-i)^(n-m) J_(n-m)(k)`).
//!
//! Small arguments use the power series; everything else uses Miller's
//! downward recurrence normalized by `J_0 + 2 sum J_2k = 1`.

use crate::error::{Error, Result};

const MAX_ORDER: i64 = 100_000;
const MAX_ARGUMENT: f64 = 1.0e4;
const SERIES_LIMIT: f64 = 1.0;

pub fn bessel_j(order: i64, x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > MAX_ARGUMENT || order.abs() > MAX_ORDER {
        return Err(Error::BesselRange { order, argument: x });
    }
    let n = order.unsigned_abs() as usize;
    // J_{-n} = (-1)^n J_n and J_n(-x) = (-1)^n J_n(x)
    let flip = (order < 0) != (x < 0.0);
    let sign = if flip && n % 2 == 1 { -1.0 } else { 1.0 };
    let x = x.abs();
    if x == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let value = if x < SERIES_LIMIT {
        series(n, x)
    } else {
        miller(n, x)[n]
    };
    Ok(sign * value)
}

/// `J_0(x) ..= J_max(x)` for `x >= 0`, all from a single downward sweep.
pub fn bessel_j_table(max_order: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() || !(0.0..=MAX_ARGUMENT).contains(&x) || max_order as i64 > MAX_ORDER {
        return Err(Error::BesselRange {
            order: max_order as i64,
            argument: x,
        });
    }
    if x == 0.0 {
        let mut out = vec![0.0; max_order + 1];
        out[0] = 1.0;
        return Ok(out);
    }
    let mut table = miller(max_order, x);
    table.truncate(max_order + 1);
    Ok(table)
}

fn series(n: usize, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut sum = term;
    for k in 1.. {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || term == 0.0 {
            break;
        }
    }
    sum
}

fn miller(n: usize, x: f64) -> Vec<f64> {
    let reach = n.max(x.ceil() as usize);
    let mut start = reach + 20 * (x.cbrt().ceil() as usize) + 60;
    start += start % 2;
    let mut vals = vec![0.0; start + 2];
    let mut next = 0.0;
    let mut cur = 1e-300;
    vals[start] = cur;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        vals[k - 1] = cur;
        if cur.abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
    }
    norm += vals[0];
    for v in vals.iter_mut() {
        *v /= norm;
    }
    vals
}
