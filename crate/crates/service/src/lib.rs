//! Sessions over a trained or imported forest, served as JSON documents.
//!
//! [`payload`] builds every response document; the HTTP router in [`http`]
//! and the command-line tool both go through it.

pub mod engine;
pub mod error;
pub mod http;
pub mod payload;
pub mod session;
pub mod store;

pub use engine::Engine;
pub use error::{Diagnostic, Result, ServiceError};
pub use http::{router, serve};
pub use session::{CsvOptions, Session};
pub use store::Store;
