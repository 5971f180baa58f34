//! Lazy α ∈ Z, the actions π_α, density steps and their scheduler, plus
//! graphs of groups and the free-group machinery.

mod density;
pub mod free;
pub mod gog;
mod scheduler;
mod setup;

pub use scheduler::{run_scheduler, verify_certificate, CertWitness, Certificate, PhiEnumerator, Requirement, SchedulerOptions, SchedulerRun};
pub use setup::{Eval, Setup, SetupKind};
