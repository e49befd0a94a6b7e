//! Performance metrics and reference oracles.

mod assignment;
mod bernoulli;
mod enumeration;
mod ospa;

pub use assignment::{optimal_assignment, Assignment};
pub use bernoulli::{bernoulli_oracle, BernoulliStep, BernoulliTrajectory, Grid, LinearScenario};
pub use enumeration::{count_association_maps, exact_association_marginals, EnumerationError, MAX_ASSOCIATION_MAPS};
pub use ospa::{ospa, OspaParams};
