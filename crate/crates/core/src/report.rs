//! Human-readable summary table of scenario outcomes.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scenario::ScenarioOutcome;

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"))
}

/// Render the outcome table. Rows A-D come first in table order, then any
/// unitary-model check; each line carries the fitted `D`, the quasilinear
/// value, their ratio, the verdict and whether it matches the expectation.
pub fn emit_report(outcomes: &[ScenarioOutcome]) -> Result<String> {
    if outcomes.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut sorted: Vec<&ScenarioOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.scenario.row().unwrap_or('Z'));

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<4}{:<22}{:>14}{:>14}{:>10}  {:<15}{:<15}{:<6}file",
        "row", "scenario", "D_fit", "D_ql", "ratio", "verdict", "expected", "pass"
    );
    for o in &sorted {
        let d = o.fit.as_ref().map(|f| f.diffusion);
        let ratio = d.filter(|_| o.quasilinear > 0.0).map(|d| d / o.quasilinear);
        let pass = o.matches_expectation() && o.invariants_hold();
        let file = o
            .files
            .first()
            .map_or_else(|| "-".to_string(), |p| p.display().to_string());
        let _ = writeln!(
            out,
            "{:<4}{:<22}{:>14}{:>14}{:>10}  {:<15}{:<15}{:<6}{}",
            o.scenario.row().map_or('-', |c| c),
            o.scenario.name(),
            fmt_opt(d),
            format!("{:.6e}", o.quasilinear),
            ratio.map_or_else(|| "-".to_string(), |r| format!("{r:.4}")),
            o.verdict.label(),
            o.expected.map_or("-", |e| e.label()),
            if pass { "PASS" } else { "FAIL" },
            file
        );
        if let Some(se) = o.fit.as_ref().and_then(|f| f.std_error) {
            let _ = writeln!(out, "    D standard error {se:.3e}");
        }
        for c in &o.checks {
            let _ = writeln!(
                out,
                "    [{}] {}: {}",
                if c.passed { "ok" } else { "FAILED" },
                c.name,
                c.detail
            );
        }
    }
    let _ = writeln!(
        out,
        "thresholds: diffusive if D_fit > 0.2 D_ql with residual < 10% of range; localized if late slope < 10% of D_ql"
    );
    Ok(out)
}
