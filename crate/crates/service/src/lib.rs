//! HTTP service, journal store and admin operations for the cafe grading
//! engine.

pub mod config;
pub mod http;
pub mod service;
pub mod store;

pub use config::{Config, Principal, Role};
pub use service::{ApiError, Clock, ManualClock, Service, SystemClock};
pub use store::{replay, State, Store, StoreError};
