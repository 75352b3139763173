//! A simulation laboratory for the Poisson-Boolean model of continuum
//! percolation.
//!
//! Balls `x + B_r` are centred at the points of a Poisson process of
//! intensity `lambda dx (x) dmu(r)`. The crate provides:
//!
//! * [`geometry`]: balls, unit cubes, space-height hypercubes, cones and
//!   union volumes;
//! * [`distributions`]: the radius law with sampling, masses, moments and
//!   cone volumes;
//! * [`field`]: the lazily revealed process, window samples, ghost fields and
//!   thinning;
//! * [`explorer`]: breadth-first cluster exploration of the origin;
//! * [`revealment`]: the cone-revealment exploration algorithm and its traces;
//! * [`entropy`]: relative-entropy identities and bounds;
//! * [`experiments`]: estimators for the critical quantities and checkers for
//!   the mean-field inequalities.

pub mod distributions;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod explorer;
pub mod field;
pub mod geometry;
pub mod quadrature;
pub mod revealment;
pub mod rng;

pub use distributions::{ConditionReport, Moment, MomentCondition, RadiusLaw};
pub use error::{Error, Result};
pub use field::{FieldConfig, FieldPoint, GhostField, GhostRegion, RevealedHypercube, WindowSample};
pub use geometry::{Ball, ConeBase, CubeIndex, HypercubeIndex};
