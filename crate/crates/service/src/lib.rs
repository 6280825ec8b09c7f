//! HTTP service for running a dose-finding trial cohort by cohort.

pub mod api;
pub mod error;
pub mod session;
pub mod store;

pub use api::router;
pub use error::ApiError;
pub use store::Store;
