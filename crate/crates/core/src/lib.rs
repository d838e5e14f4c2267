//! Window-level UAV delivery: a synthetic building world, oracle and remote
//! perception backends, floor localization, depth-discontinuity exploration,
//! the episode state machine, task generation and metrics.

pub mod explore;
pub mod floorloc;
pub mod geometry;
pub mod metrics;
pub mod mission;
pub mod perception;
pub mod seed;
pub mod tasks;
pub mod world;
