//! Scenario configuration: a TOML document with `scenario`, `[system]`,
//! `[run]` and `[output]` sections. Unknown keys are rejected; every field
//! has a default.
//!
//! ```toml
//! scenario = "quantum_measured"
//!
//! [system]
//! lambda = 1.0
//! basis_m = 256
//!
//! [system.hamiltonian]
//! kind = "rotator"
//! inertia = 1.0
//!
//! [system.potential]
//! kind = "cosine_sum"
//! harmonics = [{ k = 1, weight = 1.0 }, { k = 2, weight = 1.0 }]
//!
//! [run]
//! kicks = 200
//! seed = 7
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    self, FreeHamiltonian, Harmonic, KickedSystem, Potential, SampledPotential, SystemParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Row A: classical twist map.
    ClassicalTwist,
    /// Row B: coherent quantum evolution.
    QuantumCoherent,
    /// Row C: measured quantum evolution.
    #[default]
    QuantumMeasured,
    /// Row D: randomized classical map.
    ClassicalRandomized,
    UnitaryModelCheck,
    /// Rows A-D on one system.
    FullTable,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::ClassicalTwist => "classical_twist",
            Scenario::QuantumCoherent => "quantum_coherent",
            Scenario::QuantumMeasured => "quantum_measured",
            Scenario::ClassicalRandomized => "classical_randomized",
            Scenario::UnitaryModelCheck => "unitary_model_check",
            Scenario::FullTable => "full_table",
        }
    }

    /// Report row label, when the scenario is one.
    pub fn row(&self) -> Option<char> {
        match self {
            Scenario::ClassicalTwist => Some('A'),
            Scenario::QuantumCoherent => Some('B'),
            Scenario::QuantumMeasured => Some('C'),
            Scenario::ClassicalRandomized => Some('D'),
            _ => None,
        }
    }

    /// Sub-runs: `full_table` expands to rows A-D, everything else to itself.
    pub fn expand(&self) -> Vec<Scenario> {
        match self {
            Scenario::FullTable => vec![
                Scenario::ClassicalTwist,
                Scenario::QuantumCoherent,
                Scenario::QuantumMeasured,
                Scenario::ClassicalRandomized,
            ],
            s => vec![*s],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    Rotator { inertia: f64 },
    Polynomial { coefficients: Vec<f64> },
    Tabulated { values: Vec<f64> },
}

impl Default for HamiltonianSpec {
    fn default() -> Self {
        HamiltonianSpec::Rotator { inertia: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicSpec {
    pub k: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Cosine {},
    CosineSum {
        harmonics: Vec<HarmonicSpec>,
    },
    /// Samples on `x_j = -pi + 2 pi j / L`.
    Sampled {
        values: Vec<f64>,
    },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Cosine {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub lambda: f64,
    pub period: f64,
    pub tau: f64,
    pub hbar: f64,
    pub basis_m: usize,
    /// Defaults to the first power of two at or above `4 * basis_m + 1`.
    pub grid: Option<usize>,
    pub hamiltonian: HamiltonianSpec,
    pub potential: PotentialSpec,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            lambda: 1.0,
            period: 1.0,
            tau: 0.5,
            hbar: 1.0,
            basis_m: 256,
            grid: None,
            hamiltonian: HamiltonianSpec::default(),
            potential: PotentialSpec::default(),
        }
    }
}

impl SystemSection {
    pub fn params(&self) -> Result<SystemParams> {
        let h0 = match &self.hamiltonian {
            HamiltonianSpec::Rotator { inertia } => FreeHamiltonian::Rotator { inertia: *inertia },
            HamiltonianSpec::Polynomial { coefficients } => FreeHamiltonian::Polynomial {
                coefficients: coefficients.clone(),
            },
            HamiltonianSpec::Tabulated { values } => FreeHamiltonian::Tabulated {
                values: values.clone(),
            },
        };
        let potential = match &self.potential {
            PotentialSpec::Cosine {} => Potential::Cosine,
            PotentialSpec::CosineSum { harmonics } => Potential::CosineSum(
                harmonics
                    .iter()
                    .map(|h| Harmonic {
                        k: h.k,
                        weight: h.weight,
                    })
                    .collect(),
            ),
            PotentialSpec::Sampled { values } => {
                Potential::Sampled(SampledPotential::new(values.clone())?)
            }
        };
        Ok(SystemParams {
            h0,
            potential,
            lambda: self.lambda,
            period: self.period,
            tau: self.tau,
            hbar: self.hbar,
            basis_m: self.basis_m,
            grid: self.grid.unwrap_or_else(|| model::default_grid(self.basis_m)),
        })
    }

    pub fn build(&self) -> Result<KickedSystem> {
        model::build_system(&self.params()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub kicks: usize,
    /// Classical ensemble size (rows A and D).
    pub ensemble: usize,
    /// Trajectory-mode cross-check for row C; 0 disables it.
    pub trajectories: usize,
    pub seed: u64,
    /// Initial momentum eigenstate index; classical runs start at `p = n hbar`
    /// with uniform angles.
    pub initial_index: i64,
    /// Diffusion fit window `[first, last]`; defaults to the full series for
    /// quantum runs and `[3, kicks]` for Monte Carlo.
    pub fit_window: Option<[usize; 2]>,
    /// Window for the reported early-time slope of the coherent run;
    /// defaults to `[0, min(5, kicks)]`.
    pub early_window: Option<[usize; 2]>,
    /// Window for the localization test slope; defaults to the last quarter.
    pub late_window: Option<[usize; 2]>,
    pub leak_budget: f64,
    pub branch_budget: usize,
    /// Kicks applied in the unitary-model check.
    pub unitary_kicks: usize,
    /// Max occupation difference allowed in the unitary-model check.
    pub unitary_tolerance: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            kicks: 200,
            ensemble: 10_000,
            trajectories: 1000,
            seed: 20_240_917,
            initial_index: 0,
            fit_window: None,
            early_window: None,
            late_window: None,
            leak_budget: 1e-9,
            branch_budget: crate::measurement::DEFAULT_BRANCH_BUDGET,
            unitary_kicks: 3,
            unitary_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Report,
    TransitionBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: "out".to_string(),
            formats: vec![OutputFormat::Csv, OutputFormat::Report],
        }
    }
}

impl OutputSection {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub system: SystemSection,
    pub run: RunSection,
    pub output: OutputSection,
}

impl ScenarioConfig {
    /// Fill every optional field with its concrete default.
    pub fn resolved(mut self) -> Self {
        let kicks = self.run.kicks;
        self.system.grid = Some(
            self.system
                .grid
                .unwrap_or_else(|| model::default_grid(self.system.basis_m)),
        );
        if self.run.early_window.is_none() {
            self.run.early_window = Some([0, kicks.min(5)]);
        }
        if self.run.late_window.is_none() {
            let w = crate::observables::FitWindow::last_quarter(kicks + 1);
            self.run.late_window = Some([w.first, w.last]);
        }
        self
    }

    fn validate(&self) -> Result<()> {
        self.system.build()?;
        let r = &self.run;
        if r.kicks < 2 {
            return Err(Error::validation("run.kicks", "must be >= 2 so fits see three records"));
        }
        let check_window = |name: &'static str, w: [usize; 2]| -> Result<()> {
            if w[0] + 2 > w[1] || w[1] > r.kicks {
                return Err(Error::validation(
                    name,
                    format!("window {w:?} needs first + 2 <= last <= kicks = {}", r.kicks),
                ));
            }
            Ok(())
        };
        if let Some(w) = r.fit_window {
            check_window("run.fit_window", w)?;
        }
        if let Some(w) = r.early_window {
            check_window("run.early_window", w)?;
        }
        if let Some(w) = r.late_window {
            check_window("run.late_window", w)?;
        }
        if r.leak_budget.is_nan() || r.leak_budget < 0.0 {
            return Err(Error::validation("run.leak_budget", "must be >= 0"));
        }
        if r.unitary_tolerance.is_nan() || r.unitary_tolerance <= 0.0 {
            return Err(Error::validation("run.unitary_tolerance", "must be > 0"));
        }
        if r.unitary_kicks < 1 {
            return Err(Error::validation("run.unitary_kicks", "must be >= 1"));
        }
        if self
            .system
            .build()?
            .basis()
            .slot(r.initial_index)
            .is_none()
        {
            return Err(Error::validation("run.initial_index", "outside [-M, M]"));
        }
        Ok(())
    }

    /// Resolved configuration as TOML, suitable for re-parsing.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parse, fill defaults, and validate a configuration document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}
