//! Hourly building-load forecasting.
//!
//! The crate covers the whole operational loop: interval-data handling and
//! a synthetic campus ([`timeseries`], [`synthetic`]), sensor quality control
//! ([`quality`]), a from-scratch LSTM ([`lstm`]), the 18-hour forecasting
//! pipeline ([`pipeline`]), a versioned on-disk model store ([`registry`]),
//! a Haystack-style HTTP gateway with a latest-wins forecast cache
//! ([`gateway`]), and the scheduler that retrains and issues forecasts
//! ([`ops`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gateway;
pub mod lstm;
pub mod ops;
pub mod pipeline;
pub mod quality;
pub mod registry;
pub mod synthetic;
pub mod time;
pub mod timeseries;

pub use error::{Error, Result};
