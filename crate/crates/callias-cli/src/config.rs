//! Experiment configuration: a validated model description plus numerical
//! parameters and the list of tasks to run. The schema is strict —
//! unknown fields are rejected so a typo cannot silently change a run.

use callias_core::flow_eta::EtaMethod;
use callias_core::model::ModelSpec;
use serde::{Deserialize, Serialize};

/// One experiment: model, numerics, and tasks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional human-readable tag echoed into the report.
    #[serde(default)]
    pub label: Option<String>,
    pub model: ModelSpec,
    pub numerics: Numerics,
    pub tasks: Vec<Task>,
    /// Seed echoed into the report; all computations are deterministic,
    /// so identical config + seed reproduces byte-identical output.
    #[serde(default)]
    pub seed: u64,
}

/// Numerical parameters shared by the tasks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    /// Spatial resolution: Fourier mode cutoff on the circle, node count
    /// on the line.
    pub resolution: usize,
    /// Propagator time steps.
    #[serde(default = "default_steps")]
    pub time_steps: usize,
    /// Eigenvalue-track samples for the spectral-flow scan.
    #[serde(default = "default_steps")]
    pub flow_samples: usize,
    /// Time steps of the Wick-rotated boundary value problem, when the
    /// `wick` task (or a Wick-aware `index` task) is requested.
    #[serde(default)]
    pub wick_time_steps: Option<usize>,
    /// Eta regularization used by the `eta` task.
    #[serde(default = "default_eta")]
    pub eta_method: EtaMethod,
}

fn default_steps() -> usize {
    32
}

fn default_eta() -> EtaMethod {
    EtaMethod::SymmetricWindow
}

/// Units of work the runner knows how to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Boundary spectra and kernel dimensions.
    Spectrum,
    /// Propagator with unitarity and propagation-speed diagnostics.
    Evolve,
    /// Block decomposition: indices, kernel pairing, off-diagonal decay.
    Qblocks,
    /// Eigenvalue tracking and signed zero crossings (CSV export).
    Flow,
    /// Eta invariants at the endpoints, the relative eta, and the
    /// anomaly integral.
    Eta,
    /// The full chain of index identities with residuals.
    Index,
    /// APS and anti-APS indices of the Wick-rotated system.
    Wick,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Spectrum => "spectrum",
            Task::Evolve => "evolve",
            Task::Qblocks => "qblocks",
            Task::Flow => "flow",
            Task::Eta => "eta",
            Task::Index => "index",
            Task::Wick => "wick",
        }
    }
}
