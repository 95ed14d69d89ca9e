//! Adapted-frame geometry of stationary spacetimes `-u^2 (dt + theta)^2 + g`.

pub mod catalog;
pub mod checks;
pub mod cli;
pub mod error;
pub mod estimates;
pub mod fields;
pub mod geodesics;
pub mod geometry;
pub mod jet;
pub mod ode;
pub mod oracle;
pub mod reduction4d;

pub use error::{Error, Result};
pub use fields::{ChartDomain, ChartPoint, FDPolicy, MetricField, ScalarField};
pub use geometry::{Branch, StationarySpacetime};
pub use jet::Jet;
