//! Simulation and analysis of association cells in multi-tier random wireless networks.
//!
//! Access points form a marked Poisson process on a square torus. Every location is
//! served by the AP chosen by a translation-covariant rule (max received power,
//! max SIR or nearest AP), and the resulting cells are rasterized to measure
//! typical-cell and zero-cell areas. The [`analytics`] module evaluates the
//! mean-area and association-probability formulas these statistics are checked against.

pub mod analytics;
pub mod association;
pub mod cli;
pub mod config;
pub mod error;
pub mod fading;
pub mod oracles;
pub mod output;
pub mod pointprocess;
pub mod rng;
pub mod stats;
pub mod tessellation;

pub use analytics::{AnalyticPrediction, Kernel, QuadratureEstimate};
pub use association::{AssociationStrategy, Score};
pub use config::SimulationConfig;
pub use error::{Error, Result};
pub use fading::{FadingModel, GainFieldMode};
pub use pointprocess::{Point, PointPattern, TierConfig, Window};
pub use rng::StreamKey;
pub use stats::{AreaStatistics, Experiment, ExperimentPlan};
pub use tessellation::{AssociationMap, CellRecord};
