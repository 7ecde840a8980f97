//! Scenario orchestration: the four table rows (classical twist, coherent
//! quantum, measured quantum, randomized classical) and the unitary
//! measurement-model check.

use std::fs;
use std::path::{Path, PathBuf};

use crate::classical::{
    exact_randomized_moments, run_ensemble, ClassicalEnsemble, MapKind, MomentSeries,
};
use crate::config::{OutputFormat, Scenario, ScenarioConfig};
use crate::dynamics::{evolve_coherent, evolve_measured_with, evolve_trajectories, RunOptions};
use crate::error::{Error, Result};
use crate::kick::{kick_matrix, transition_matrix};
use crate::measurement::{branch_occupation, evolve_branches};
use crate::model::{FreeHamiltonian, KickedSystem, MomentumDistribution, Potential, StateVector};
use crate::observables::{
    fit_diffusion, fit_diffusion_batched, linear_fit, DiffusionFit, FitWindow, Moments,
};
use crate::output::{fit_summary, moment_series_csv, run_series_csv, CsvDocument};

/// Diffusive when the fitted `D` exceeds this fraction of the quasilinear value.
pub const DIFFUSIVE_FRACTION: f64 = 0.2;
/// ... and the fit residual stays below this fraction of the window's range.
pub const LINEARITY_FRACTION: f64 = 0.1;
/// Localized when the late-window slope is below this fraction of `D_ql`.
pub const LOCALIZED_FRACTION: f64 = 0.1;
/// Classical threshold of the kicked rotator, `K = lambda T / I`.
pub const ROTATOR_CRITICAL_K: f64 = 0.972;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Diffusive,
    Localized,
    SubThreshold,
    NotDiffusive,
    Equivalent,
    NotEquivalent,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Diffusive => "diffusive",
            Verdict::Localized => "localized",
            Verdict::SubThreshold => "sub-threshold",
            Verdict::NotDiffusive => "not diffusive",
            Verdict::Equivalent => "equivalent",
            Verdict::NotEquivalent => "not equivalent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub verdict: Verdict,
    /// What the table predicts for this row, when it predicts anything.
    pub expected: Option<Verdict>,
    pub fit: Option<DiffusionFit>,
    pub quasilinear: f64,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl ScenarioOutcome {
    pub fn invariants_hold(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn matches_expectation(&self) -> bool {
        self.expected.is_none_or(|e| e == self.verdict)
    }
}

/// Result of running a configuration: one outcome per sub-run.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub outcomes: Vec<ScenarioOutcome>,
    pub files: Vec<PathBuf>,
}

/// Diffusive verdict from a fit against the quasilinear diffusion constant.
pub fn classify_diffusion(fit: &DiffusionFit, quasilinear: f64) -> bool {
    fit.diffusion > DIFFUSIVE_FRACTION * quasilinear
        && fit.residual < LINEARITY_FRACTION * fit.range
}

fn slope(series: &[Moments], period: f64, w: [usize; 2]) -> f64 {
    let t: Vec<f64> = (w[0]..=w[1]).map(|n| n as f64 * period).collect();
    let y: Vec<f64> = series[w[0]..=w[1]].iter().map(Moments::variance).collect();
    linear_fit(&t, &y).0
}

/// Localized when the late-window growth rate of the variance is a small
/// fraction of the quasilinear rate. Returns `(localized, early, late)`
/// slopes; the early one is diagnostic only, since coherent `<p^2>` can
/// oscillate strongly before it saturates.
pub fn classify_localization(
    series: &[Moments],
    period: f64,
    quasilinear: f64,
    early: [usize; 2],
    late: [usize; 2],
) -> (bool, f64, f64) {
    let e = slope(series, period, early);
    let l = slope(series, period, late);
    (l.abs() < LOCALIZED_FRACTION * quasilinear, e, l)
}

fn expected_verdict(scenario: Scenario, system: &KickedSystem) -> Option<Verdict> {
    let driven = system.lambda() > 0.0;
    match scenario {
        Scenario::ClassicalTwist => match (system.h0(), system.potential()) {
            (FreeHamiltonian::Rotator { inertia }, Potential::Cosine) => {
                let k = system.lambda() * system.period() / inertia;
                Some(if k > ROTATOR_CRITICAL_K {
                    Verdict::Diffusive
                } else {
                    Verdict::SubThreshold
                })
            }
            _ => None,
        },
        Scenario::QuantumCoherent => Some(Verdict::Localized),
        Scenario::QuantumMeasured | Scenario::ClassicalRandomized => driven.then_some(Verdict::Diffusive),
        Scenario::UnitaryModelCheck => Some(Verdict::Equivalent),
        Scenario::FullTable => None,
    }
}

struct Context<'a> {
    cfg: &'a ScenarioConfig,
    system: KickedSystem,
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Context<'_> {
    fn meta(&self, scenario: Scenario) -> Vec<String> {
        let s = &self.system;
        let r = &self.cfg.run;
        vec![
            format!("measdiff {}", env!("CARGO_PKG_VERSION")),
            format!("scenario = {scenario}"),
            format!(
                "system: H0 = {:?}, V = {}, lambda = {}, T = {}, tau = {}, hbar = {}, M = {}, grid = {}",
                s.h0(),
                s.potential().id(),
                s.lambda(),
                s.period(),
                s.tau(),
                s.hbar(),
                s.basis().m(),
                s.grid()
            ),
            format!(
                "run: kicks = {}, ensemble = {}, trajectories = {}, initial_index = {}, seed = {}",
                r.kicks, r.ensemble, r.trajectories, r.initial_index, r.seed
            ),
        ]
    }

    fn write_csv(&mut self, name: &str, doc: &CsvDocument) -> Result<Option<PathBuf>> {
        if !self.cfg.output.wants(OutputFormat::Csv) {
            return Ok(None);
        }
        let path = self.dir.join(format!("{name}.csv"));
        fs::write(&path, doc.render())?;
        self.files.push(path.clone());
        Ok(Some(path))
    }

    fn monte_carlo_window(&self) -> FitWindow {
        match self.cfg.run.fit_window {
            Some([a, b]) => FitWindow::new(a, b),
            None => FitWindow::new(3.min(self.cfg.run.kicks.saturating_sub(2)), self.cfg.run.kicks),
        }
    }

    fn exact_window(&self) -> FitWindow {
        match self.cfg.run.fit_window {
            Some([a, b]) => FitWindow::new(a, b),
            None => FitWindow::full(self.cfg.run.kicks + 1),
        }
    }

    fn initial_momentum(&self) -> f64 {
        self.system.momentum(self.cfg.run.initial_index)
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            leak_budget: self.cfg.run.leak_budget,
            record_states: false,
        }
    }

    fn outcome(&self, scenario: Scenario, verdict: Verdict, fit: Option<DiffusionFit>, checks: Vec<Check>, files: Vec<PathBuf>) -> ScenarioOutcome {
        ScenarioOutcome {
            scenario,
            verdict,
            expected: expected_verdict(scenario, &self.system),
            fit,
            quasilinear: self.system.quasilinear_diffusion(),
            checks,
            files,
        }
    }

    fn ensemble_row(&mut self, scenario: Scenario, mode: MapKind) -> Result<ScenarioOutcome> {
        let r = &self.cfg.run;
        if mode == MapKind::Twist {
            crate::classical::TwistMap::new(&self.system)?;
        }
        let ensemble = ClassicalEnsemble::uniform_angles(r.ensemble, self.initial_momentum(), r.seed);
        let series = run_ensemble(&self.system, &ensemble, r.kicks, mode)?;
        let fit = fit_diffusion_batched(&series, self.monte_carlo_window())?;
        let quasilinear = self.system.quasilinear_diffusion();
        let mut checks = Vec::new();
        if mode == MapKind::Randomized {
            checks.push(randomized_oracle_check(&self.system, &series, self.initial_momentum()));
        }
        let diffusive = classify_diffusion(&fit, quasilinear);
        let verdict = match (diffusive, mode) {
            (true, _) => Verdict::Diffusive,
            (false, MapKind::Twist) => Verdict::SubThreshold,
            (false, MapKind::Randomized) => Verdict::NotDiffusive,
        };
        let mut doc = moment_series_csv(self.meta(scenario), &series);
        doc.summary = fit_summary(&fit);
        doc.summary.push(format!("verdict = {}", verdict.label()));
        let files = self.write_csv(scenario.name(), &doc)?.into_iter().collect();
        Ok(self.outcome(scenario, verdict, Some(fit), checks, files))
    }

    fn coherent_row(&mut self) -> Result<ScenarioOutcome> {
        let scenario = Scenario::QuantumCoherent;
        let r = self.cfg.run.clone();
        let psi0 = StateVector::delta(self.system.basis(), r.initial_index)?;
        let run = evolve_coherent(&self.system, &psi0, r.kicks, &self.options())?;
        run.status.into_result(r.leak_budget)?;
        let late = r.late_window.unwrap_or_else(|| {
            let w = FitWindow::last_quarter(r.kicks + 1);
            [w.first, w.last]
        });
        let (localized, early_slope, late_slope) =
            classify_localization(
            &run.moments,
            self.system.period(),
            self.system.quasilinear_diffusion(),
            r.early_window.unwrap_or([0, r.kicks.min(5)]),
            late,
        );
        let fit = fit_diffusion(&run.moments, self.system.period(), self.exact_window())?;
        let norm_err = (run.final_state.norm_sqr() + run.final_state.leak() - 1.0).abs();
        let checks = vec![Check::new(
            "norm_conserved",
            norm_err < 1e-10,
            format!("|norm + leak - 1| = {norm_err:e}"),
        )];
        let verdict = if localized {
            Verdict::Localized
        } else if classify_diffusion(&fit, self.system.quasilinear_diffusion()) {
            Verdict::Diffusive
        } else {
            Verdict::NotDiffusive
        };
        let mut doc = run_series_csv(self.meta(scenario), &run.moments, &run.leaks);
        doc.summary = fit_summary(&fit);
        doc.summary.push(format!("early_slope = {early_slope:e}"));
        doc.summary.push(format!("late_slope = {late_slope:e}"));
        doc.summary.push(format!("verdict = {}", verdict.label()));
        let files = self.write_csv(scenario.name(), &doc)?.into_iter().collect();
        Ok(self.outcome(scenario, verdict, Some(fit), checks, files))
    }

    fn measured_row(&mut self) -> Result<ScenarioOutcome> {
        let scenario = Scenario::QuantumMeasured;
        let r = self.cfg.run.clone();
        let w = transition_matrix(&kick_matrix(&self.system));
        if self.cfg.output.wants(OutputFormat::TransitionBin) {
            let path = self.dir.join("transition.bin");
            let mut bytes = Vec::new();
            w.write_binary(&mut bytes)?;
            fs::write(&path, bytes)?;
            self.files.push(path);
        }
        let p0 = MomentumDistribution::delta(self.system.basis(), r.initial_index)?;
        let run = evolve_measured_with(&self.system, &w, &p0, r.kicks, &self.options())?;
        run.status.into_result(r.leak_budget)?;
        let fit = fit_diffusion(&run.moments, self.system.period(), self.exact_window())?;
        let heating = self.system.kick_heating();
        let scale = (self.system.basis().m() as f64 * self.system.hbar()).powi(2);
        let mut worst = 0.0f64;
        let mut ok = true;
        for (n, pair) in run.moments.windows(2).enumerate() {
            let err = (pair[1].mean_p2 - pair[0].mean_p2 - heating).abs();
            let tol = 1e-9f64.max(10.0 * run.leaks[n + 1] * scale);
            ok &= err <= tol;
            worst = worst.max(err);
        }
        let drift = run
            .moments
            .iter()
            .map(|m| (m.mean_p - run.moments[0].mean_p).abs())
            .fold(0.0, f64::max);
        let mut checks = vec![
            Check::new(
                "linear_heating",
                ok,
                format!("max |increment - lambda^2 <f^2>| = {worst:e}"),
            ),
            Check::new("zero_friction", drift < 1e-9, format!("max |<p>_N - <p>_0| = {drift:e}")),
        ];
        if r.trajectories > 0 {
            let traj = evolve_trajectories(&self.system, &w, &p0, r.kicks, r.trajectories, r.seed)?;
            let last = r.kicks;
            let want = run.moments[last].mean_p2;
            let got = traj.records[last].mean_p2;
            let se = traj.errors[last].mean_p2;
            checks.push(Check::new(
                "trajectory_agreement",
                (got - want).abs() <= 5.0 * se.max(1e-12),
                format!("trajectory <p^2> = {got:e} +- {se:e}, master equation {want:e}"),
            ));
            let doc = moment_series_csv(self.meta(scenario), &traj);
            self.write_csv("quantum_measured_trajectories", &doc)?;
        }
        let verdict = if classify_diffusion(&fit, self.system.quasilinear_diffusion()) {
            Verdict::Diffusive
        } else {
            Verdict::NotDiffusive
        };
        let mut doc = run_series_csv(self.meta(scenario), &run.moments, &run.leaks);
        doc.summary = fit_summary(&fit);
        doc.summary.push(format!("verdict = {}", verdict.label()));
        let files = self.write_csv(scenario.name(), &doc)?.into_iter().collect();
        Ok(self.outcome(scenario, verdict, Some(fit), checks, files))
    }

    fn unitary_row(&mut self) -> Result<ScenarioOutcome> {
        let scenario = Scenario::UnitaryModelCheck;
        let r = self.cfg.run.clone();
        let c0 = StateVector::delta(self.system.basis(), r.initial_index)?;
        let branches = evolve_branches(&c0, &self.system, r.unitary_kicks, r.branch_budget)?;
        let occupied = branch_occupation(&branches);
        let w = transition_matrix(&kick_matrix(&self.system));
        let mut p = c0.distribution();
        for _ in 0..r.unitary_kicks {
            p = crate::dynamics::step_master(&p, &w)?;
        }
        let basis = self.system.basis();
        let mut doc = CsvDocument {
            meta: self.meta(scenario),
            header: ["n", "p_branch", "p_master", "diff"].map(String::from).to_vec(),
            ..CsvDocument::default()
        };
        let mut max_diff = 0.0f64;
        for n in basis.indices() {
            let (a, b) = (occupied.prob(n), p.prob(n));
            max_diff = max_diff.max((a - b).abs());
            if a > 0.0 || b > 0.0 {
                doc.rows.push((n, vec![a, b, a - b]));
            }
        }
        let unitarity = (branches.total_probability() + branches.leak() - 1.0).abs();
        let phase_ok = branches.phase_exponent() as usize == r.unitary_kicks + 1;
        let equivalent = max_diff < r.unitary_tolerance;
        let checks = vec![
            Check::new(
                "occupation_equivalence",
                equivalent,
                format!("max |P_branch - P_master| = {max_diff:e}"),
            ),
            Check::new(
                "phase_exponent",
                phase_ok,
                format!("(-i)^{} after {} kicks", branches.phase_exponent(), r.unitary_kicks),
            ),
            Check::new("unitarity", unitarity < 1e-12, format!("|prob + leak - 1| = {unitarity:e}")),
        ];
        doc.summary = vec![
            format!("branches = {}", branches.len()),
            format!("max_diff = {max_diff:e}"),
            format!("phase_exponent = {}", branches.phase_exponent()),
        ];
        let verdict = if equivalent {
            Verdict::Equivalent
        } else {
            Verdict::NotEquivalent
        };
        let files = self.write_csv(scenario.name(), &doc)?.into_iter().collect();
        Ok(self.outcome(scenario, verdict, None, checks, files))
    }
}

/// Monte Carlo randomized-map moments must sit within 5 standard errors of
/// the exact recursion at the final kick.
fn randomized_oracle_check(system: &KickedSystem, series: &MomentSeries, p0: f64) -> Check {
    let init = Moments::from_orders([p0, p0.powi(2), p0.powi(3), p0.powi(4)]);
    let exact = exact_randomized_moments(system, init, series.kicks());
    let n = series.kicks();
    let mut worst = 0.0f64;
    for k in 1..=4 {
        let se = series.errors[n].order(k);
        let d = (series.records[n].order(k) - exact.records[n].order(k)).abs();
        worst = worst.max(if se > 0.0 { d / se } else if d > 1e-12 { f64::INFINITY } else { 0.0 });
    }
    Check::new(
        "randomized_oracle",
        worst <= 5.0,
        format!("max deviation from exact moments at N = {n}: {worst:.2} standard errors"),
    )
}

/// Run every sub-run of a configuration and write its outputs.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let system = cfg.system.build()?;
    let dir = PathBuf::from(&cfg.output.directory);
    fs::create_dir_all(&dir)?;
    let mut ctx = Context {
        cfg,
        system,
        dir,
        files: Vec::new(),
    };
    let echo = ctx.dir.join("resolved_config.toml");
    fs::write(&echo, cfg.to_toml()?)?;
    ctx.files.push(echo);

    let mut outcomes = Vec::new();
    for sub in cfg.scenario.expand() {
        let outcome = match sub {
            Scenario::ClassicalTwist => ctx.ensemble_row(sub, MapKind::Twist)?,
            Scenario::ClassicalRandomized => ctx.ensemble_row(sub, MapKind::Randomized)?,
            Scenario::QuantumCoherent => ctx.coherent_row()?,
            Scenario::QuantumMeasured => ctx.measured_row()?,
            Scenario::UnitaryModelCheck => ctx.unitary_row()?,
            Scenario::FullTable => unreachable!("expanded above"),
        };
        outcomes.push(outcome);
    }
    if cfg.output.wants(OutputFormat::Report) {
        let path = ctx.dir.join("report.txt");
        fs::write(&path, crate::report::emit_report(&outcomes)?)?;
        ctx.files.push(path);
    }
    Ok(ScenarioReport {
        outcomes,
        files: ctx.files,
    })
}

/// First failed invariant across outcomes, as an error.
pub fn invariant_failure(outcomes: &[ScenarioOutcome]) -> Option<Error> {
    outcomes.iter().find_map(|o| {
        o.checks.iter().find(|c| !c.passed).map(|c| {
            Error::Invariant(format!("{}: {} ({})", o.scenario, c.name, c.detail))
        })
    })
}

pub fn output_dir(cfg: &ScenarioConfig) -> &Path {
    Path::new(&cfg.output.directory)
}
