//! Bayesian structural time series for comparing prediction-market prices
//! with opinion polls.
//!
//! The pipeline is: [`ingest`] daily market and poll files into
//! [`series::Series`] and [`series::AlignedPanel`] values, fit local-level
//! (or trend) models with spike-and-slab regressors by Gibbs sampling
//! ([`gibbs`]) on top of the Kalman machinery in [`ssm`], project
//! rolling forecasts to election day ([`forecast`]) and compare the two
//! sources ([`compare`]).

pub mod compare;
pub mod error;
pub mod forecast;
pub mod gibbs;
pub mod ingest;
pub mod series;
pub mod ssm;
pub(crate) mod stats;

pub use error::{Error, Result};
pub use series::{AlignedPanel, DateRange, DateStamp, PollRecord, Series, Source};
pub use ssm::{StateSpaceModel, TrendSpec};
