//! Design-space exploration for spatial accelerators.
//!
//! A loop nest is parsed and checked ([`ir`]), lowered to a
//! [`problem::ProblemInstance`], mapped onto an [`arch::Architecture`] with a
//! [`mapping::Mapping`], and evaluated by the analytical model in [`cost`].
//! [`mapspace`] builds the set of legal mappings, [`mappers`] searches it,
//! and [`oracle`] replays mappings one MAC at a time to check the model.
//!
//! Real-valued quantities are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root pick `f64`.

pub mod arch;
pub mod casestudy;
pub mod cost;
pub mod ir;
pub mod mappers;
pub mod mapping;
pub mod mapspace;
pub mod oracle;
pub mod problem;
pub mod scalar;
pub mod workloads;

pub use scalar::Scalar;

pub type Architecture = arch::Architecture<f64>;
pub type ArchitectureF32 = arch::Architecture<f32>;
pub type CostReport = cost::CostReport<f64>;
pub type CostReportF32 = cost::CostReport<f32>;
pub type MapSpace = mapspace::MapSpace<f64>;
pub type MapSpaceF32 = mapspace::MapSpace<f32>;
pub type SearchResult = mappers::SearchResult<f64>;
