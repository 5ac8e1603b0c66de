//! Flows of linear vector fields on vector bundles over box domains.

pub mod error;
pub mod expr;
pub mod geometry;
pub mod linalg;

pub use error::{Error, ErrorClass, Result, SceneErrorKind};
pub mod flow;
pub mod odesolve;
pub mod trivialize;
pub mod report;
pub mod sampling;
pub mod algebroid;
pub mod scene;
pub mod verify;
pub mod cli;
