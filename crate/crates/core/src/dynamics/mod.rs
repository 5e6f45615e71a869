//! The resilient protocol, the malicious-free reference dynamic, the W-MSR
//! baseline and the simulation driver.

pub mod attack;
pub mod rounds;
pub mod schedule;
pub mod sim;

pub use attack::{Attack, DegreeReport, MaliciousStrategy};
pub use rounds::{
    mean_distance_to_average, nominal_round, resilient_round, wmsr_filter, wmsr_round, Inbox,
    RoundWeights, Values,
};
pub use schedule::{StepKind, StepSchedule};
pub use sim::{
    derive_seed, initial_values, run_simulation, Algorithm, Record, RunConfig, RunOptions,
    SimulationTrace, TfObservation,
};
