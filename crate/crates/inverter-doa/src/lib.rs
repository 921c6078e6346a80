//! Study files, parallel sweeps, CSV/JSON/SVG exports and the command line
//! for `inverter-doa-core`.

pub mod basin;
pub mod error;
pub mod export;
pub mod run;
pub mod study;
pub mod svg;

pub use error::{Error, Result};
pub use run::{run_point, run_study, PointResult, StudyResult};
pub use study::{Study, StudyPoint, SweepSpec};
