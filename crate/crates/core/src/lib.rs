//! Capacity-risk analysis for EV charging facilities.
//!
//! A charging facility serves a stream of users arriving as a Poisson
//! process. Each user brings a random energy demand, an impatience factor
//! (their cost of waiting, in $/hr) and a desired dwell time at the
//! location. The facility prices charging either through a fixed menu of
//! rate/price pairs (the *defined service level*, or DSL, model) or by
//! letting users pick a departure deadline against a convex price
//! schedule (the *prescribed deadline*, or PD, model).
//!
//! This crate computes, for either model:
//!
//! * the distribution of the charging rate a rational user selects
//!   ([`dsl::rate_pmf`], [`dsl::rate_pmf_free_parking`]),
//! * the moments that drive facility load ([`dsl::dsl_moments_metered`],
//!   [`pd::pd_moments`]),
//! * high-confidence tail bounds on the number of present users and on
//!   the aggregate power draw ([`bounds::occupancy_bound`],
//!   [`bounds::power_bound`]), and
//! * an infinite-server Monte-Carlo simulator used to validate those
//!   bounds empirically ([`sim::simulate`], [`sim::run_ensemble`]).

pub mod bounds;
pub mod dist;
pub mod dsl;
pub mod pd;
pub mod quad;
pub mod sim;

mod error;

pub use error::{Error, Result};
