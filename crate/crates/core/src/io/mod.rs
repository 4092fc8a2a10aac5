//! Session containers, run configuration, reports and the embedded reference table.

mod config;
mod container;
mod report;
mod table2;

pub use config::*;
pub use container::*;
pub use report::*;
pub use table2::*;
