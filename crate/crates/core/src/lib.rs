//! Simulation of online learning split between edge sites and a cloud.
//!
//! * [`streams`]: synthetic drifting streams and their division across sites.
//! * [`learners`]: moving-frame classifiers, scoring and model serialization.
//! * [`engine`]: the three delta patterns as a discrete-event simulation.
//! * [`netsim`]: transaction time and energy per backhaul medium.
//! * [`transpiler`]: decision trees lowered to dependency-free C.
//! * [`harness`]: scenario matrices, result tables and trend checks.

pub mod engine;
pub mod harness;
pub mod learners;
pub mod netsim;
pub mod streams;
pub mod transpiler;
