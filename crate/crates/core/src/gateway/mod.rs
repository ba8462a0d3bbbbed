//! Haystack-style HTTP gateway: JSON grids, a persisted latest-wins
//! forecast cache, and the matching client.

mod cache;
mod client;
mod grid;
mod server;
mod store;

pub use cache::{CacheEntry, ForecastCache, WriteOutcome};
pub use client::{GatewayClient, HttpTransport, RetryPolicy, Transport};
pub use grid::{Col, GridDocument};
pub use server::{parse_his_write, parse_range, serve, ServerHandle, PRODUCT_NAME};
pub use store::{forecast_point_id, HisRows, PointInfo, PointKind, Store};
