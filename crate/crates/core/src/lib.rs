//! Wideband modelling of spatially under-sampled antenna arrays and design of
//! linear operators that suppress their angular grating lobes.
//!
//! A ring array with multi-wavelength spacing has strong grating lobes when
//! observed over a narrow band. The same array observed over a wide band does
//! not, because the inter-element phase shifts then vary with frequency. The
//! [`design`] module fits an operator, applied to narrow-band snapshots, whose
//! effective spatial correlation approaches that of the wide-band system.

pub mod correlation;
pub mod design;
pub mod error;
pub mod manifold;
pub mod multiway;
pub mod persist;

pub use correlation::{CorrMap, PeakSidelobe, ScfMap};
pub use design::{AdamState, DesignConfig, ManifoldGridPair, OperatorTensor, TrainingLog};
pub use error::{Error, FormatError, Result};
pub use manifold::{ElementPattern, FrequencyGrid, PathParams, RingArrayGeometry, WidebandManifold};
pub use multiway::{contract, ComplexMultiArray};
pub use num_complex::Complex64;
