//! Active information for finite-state stochastic searches.
//!
//! Active information compares how likely an informed search is to hit a
//! target `A` with how likely a null search is: `I+ = log[P(A) / P0(A)]`,
//! in nats. This crate provides
//!
//! * exponential tilting of a null law by a specificity function ([`tilting`]),
//! * Metropolis-Hastings and Moran-type chains with tilted equilibria, and
//!   their time evolution ([`chains`]),
//! * searches stopped on first target entry ([`absorption`]),
//! * seeded sampling of i.i.d. draws and chain trajectories ([`sampling`]),
//! * nonparametric, parametric, nuisance-parameter and two-sample estimators
//!   with fine-tuning tests ([`inference`]),
//! * large-deviation rates of those tests ([`deviations`]),
//! * the worked models: cosmology, student scores and molecular machines
//!   ([`models`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod absorption;
pub mod chains;
pub mod deviations;
pub mod error;
pub mod inference;
pub mod info;
pub mod io;
pub mod models;
pub mod numerics;
pub mod sampling;
pub mod space;
pub mod tilting;

pub use error::{Error, Result};
pub use space::{Distribution, SpecificityProfile, StateSpace, TargetSet};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
