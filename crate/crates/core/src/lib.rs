//! Seeded source transformations for building families of equivalent CTF
//! challenges, plus the verification and analytics around them.

pub mod analytics;
pub mod config;
pub mod error;
pub mod family;
pub mod names;
pub mod rng;
pub mod transforms;
pub mod verify;

pub use config::{InsertionReport, InsertionSite, PassConfig, Ratio, TransformTag};
pub use error::{AnalyticsError, FamilyError, TransformError, VerifyError};
pub use family::{FamilyInstance, FamilyManifest, TransformChain};
pub use verify::{GoldenSpec, VerificationResult, VerificationStatus};
