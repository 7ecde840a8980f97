//! CSV rendering. Files open with `#` metadata lines, then a header row and
//! data rows, and end with a `#`-prefixed summary block. Floats use the
//! shortest round-trip representation so output is byte-stable.

use std::fmt::Write as _;

use crate::classical::MomentSeries;
use crate::observables::{DiffusionFit, Moments};

#[derive(Debug, Clone, Default)]
pub struct CsvDocument {
    pub meta: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<(i64, Vec<f64>)>,
    pub summary: Vec<String>,
}

impl CsvDocument {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.meta {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for (key, values) in &self.rows {
            let _ = write!(out, "{key}");
            for v in values {
                let _ = write!(out, ",{v:e}");
            }
            out.push('\n');
        }
        for line in &self.summary {
            let _ = writeln!(out, "# {line}");
        }
        out
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Quantum run series: `N, mean_p, mean_p2, mean_p4, leak`.
pub fn run_series_csv(meta: Vec<String>, moments: &[Moments], leaks: &[f64]) -> CsvDocument {
    CsvDocument {
        meta,
        header: header(&["N", "mean_p", "mean_p2", "mean_p4", "leak"]),
        rows: moments
            .iter()
            .zip(leaks)
            .enumerate()
            .map(|(n, (m, l))| (n as i64, vec![m.mean_p, m.mean_p2, m.mean_p4, *l]))
            .collect(),
        summary: Vec::new(),
    }
}

/// Ensemble series: moments with standard errors (zero for exact series).
pub fn moment_series_csv(meta: Vec<String>, series: &MomentSeries) -> CsvDocument {
    CsvDocument {
        meta,
        header: header(&[
            "N", "mean_p", "se_p", "mean_p2", "se_p2", "mean_p3", "se_p3", "mean_p4", "se_p4",
        ]),
        rows: series
            .records
            .iter()
            .zip(&series.errors)
            .enumerate()
            .map(|(n, (m, e))| {
                (
                    n as i64,
                    vec![
                        m.mean_p, e.mean_p, m.mean_p2, e.mean_p2, m.mean_p3, e.mean_p3,
                        m.mean_p4, e.mean_p4,
                    ],
                )
            })
            .collect(),
        summary: Vec::new(),
    }
}

pub fn fit_summary(fit: &DiffusionFit) -> Vec<String> {
    let mut lines = vec![
        "fit".to_string(),
        format!("window = [{}, {}]", fit.window.first, fit.window.last),
        format!("friction = {:e}", fit.friction),
        format!("diffusion = {:e}", fit.diffusion),
        format!("residual = {:e}", fit.residual),
    ];
    if let Some(se) = fit.std_error {
        lines.push(format!("diffusion_se = {se:e}"));
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::FitWindow;

    #[test]
    fn layout() {
        let m = Moments {
            mean_p: 0.0,
            mean_p2: 0.5,
            mean_p3: 0.0,
            mean_p4: 0.875,
        };
        let mut doc = run_series_csv(vec!["seed = 3".into()], &[Moments::default(), m], &[0.0, 1e-30]);
        doc.summary = fit_summary(&DiffusionFit {
            friction: 0.0,
            diffusion: 0.5,
            residual: 0.0,
            range: 0.5,
            window: FitWindow::new(0, 1),
            std_error: None,
        });
        let text = doc.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed = 3");
        assert_eq!(lines[1], "N,mean_p,mean_p2,mean_p4,leak");
        assert_eq!(lines[3], "1,0e0,5e-1,8.75e-1,1e-30");
        assert!(lines[4..].iter().all(|l| l.starts_with('#')));
        assert!(text.contains("# diffusion = 5e-1"));
    }
}
