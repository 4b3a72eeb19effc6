//! Energy-minimal trajectory planning for a mobile robot that must sustain an
//! average uplink rate through an IRS-assisted mm-wave link.
//!
//! Pipeline: [`channel`] realizations feed a [`radiomap`], a parametric
//! [`snrmodel`] is fitted to the map, [`planner`] produces an initial
//! trajectory on a time-expanded graph and [`sco`] refines it by successive
//! convex optimization, each step solved by the conic solver in [`socp`].

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod audit;
pub mod channel;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod planner;
pub mod radiomap;
pub mod scenario;
pub mod sco;
pub mod snrmodel;
pub mod socp;

pub use error::{Error, Result};
pub use scenario::{LinkClass, Position, Scenario, ScenarioConfig, Visibility};
