//! Sparse vector autoregression with exogenous inputs (VAR-X) for weekly
//! multivariate series.
//!
//! The pipeline: seasonal differencing and normalization ([`timeseries`]),
//! CSV ingestion and regional aggregation ([`ingestion`]), lag stacking
//! ([`design`]), ℓ1-penalized least squares by FISTA ([`solver`]), the fitted
//! model and its forecasts ([`model`]), and rolling validation and test
//! evaluation across model variants ([`evaluation`]).

pub mod design;
pub mod error;
pub mod evaluation;
pub mod ingestion;
pub mod model;
pub mod solver;
pub mod timeseries;

pub use error::{Result, VarxError};
