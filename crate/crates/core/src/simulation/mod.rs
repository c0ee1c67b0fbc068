//! Split-step Vlasov–Poisson simulation in tensor-train format.

pub mod cases;
pub mod compare;
pub mod config;
pub mod diagnostics;
pub mod projection;
pub mod run;
pub mod stepper;

pub use cases::init_case;
pub use config::{CaseId, SimulationConfig, SolverKind, StepOrder};
pub use diagnostics::DiagnosticsRecord;
pub use projection::{project_conserve, ConservationTargets};
pub use run::{run, run_tt, write_outputs, FinalState, OutputFiles, RunOutput};
pub use stepper::{strang_step, tolerance_schedule, Stepper};
