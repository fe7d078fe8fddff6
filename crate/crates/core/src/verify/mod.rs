//! Estimators, certificate generation and replay.

pub mod certificate;
pub mod estimate;
pub mod pontriagin;
pub mod scenario;

pub use certificate::{replay_witness, BackendTag, BaseRef, Certificate, SetRef, Verdict, WitnessRecord};
pub use estimate::{consistency_check, estimate_osc, estimate_t1, estimate_t2, Estimate, RecordCtx, SeparationInput};
pub use pontriagin::{pontriagin_check, ConditionReport, PontriaginReport};
pub use scenario::{expected_verdict, run_scenario, ScenarioParams, SCENARIOS};
