//! Task definition language, household simulator, rule-based agents and
//! benchmark harness for two-agent embodied dialogue tasks.

pub mod world;
pub mod tdl;
pub mod checker;
pub mod fuzz;
pub mod sim;
pub mod agents;
pub mod harness;
pub mod protocol;
