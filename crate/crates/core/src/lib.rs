//! Long-term dynamic MVA rating estimation for power transformers.
//!
//! The pipeline turns multi-year hourly weather and fleet loading history into
//! 365-day rating profiles under high, medium and low temperature scenarios:
//!
//! 1. [`temperature`] builds the three annual scenario profiles and retrieves
//!    similar historical days for each profile day.
//! 2. [`gmm`] clusters the load compositions of the fleet on those days.
//! 3. [`load_shape`] synthesizes the forecast transformer's normalized shape
//!    from its cluster memberships.
//! 4. [`thermal`] runs the IEEE C57.91 hourly aging model.
//! 5. [`rating`] scales the shape until the daily equivalent aging factor is
//!    one and assembles the annual profiles.

pub mod error;
pub mod export;
pub mod ingest;
pub mod gmm;
pub mod load_shape;
pub mod pipeline;
pub mod rating;
pub mod synthetic;
pub mod temperature;
pub mod thermal;

pub use error::{Error, Result};

/// Hours per simulated day.
pub const HOURS: usize = 24;
/// Days in every profile year (Feb 29 is dropped on ingest).
pub const DAYS_PER_YEAR: usize = 365;
