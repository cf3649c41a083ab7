//! Railway rescheduling study toolkit.
//!
//! The crate models a grid-world railway: infrastructures are generated from
//! the eight basic track elements ([`grid`]), per-train route alternatives are
//! condensed into DAGs ([`routing`]), an initial conflict-free timetable is
//! produced ([`schedule`]), a single train malfunction turns the timetable
//! into a re-scheduling problem ([`resched`]), and scope-restriction
//! strategies ([`scopers`]) shrink that problem before an exact solver
//! ([`solver`]) runs on it. [`metrics`] quantifies what the restriction cost
//! and saved, and [`pipeline`] orchestrates whole experiment agendas.

pub mod grid;
pub mod metrics;
pub mod pipeline;
pub mod resched;
pub mod routing;
pub mod schedule;
pub mod scopers;
pub mod seeds;
pub mod solver;
