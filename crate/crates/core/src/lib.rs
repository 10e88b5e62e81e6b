//! Acoustic time-of-flight ranging from compressed measurements.
//!
//! A received trace is split into reference-length buffers, each buffer is
//! projected onto a balanced ±1 sensing matrix, and the receiver recovers a
//! sparse code of the trace in the dictionary of shifted reference chirps.
//! That code is the cross-correlation, so its first tall peak gives the delay.

pub mod baselines;
pub mod detect;
pub mod dictionary;
pub mod error;
pub mod experiment;
pub mod localize;
pub mod pipeline;
pub mod recovery;
pub mod rng;
pub mod sensing;
pub mod signal;

pub use baselines::Correlation;
pub use detect::{DetectConfig, Method, RangeEstimate};
pub use dictionary::CorrelationDictionary;
pub use error::{Error, Result};
pub use localize::{AnchorSet, PositionFix};
pub use pipeline::{range_trace, PipelineConfig};
pub use recovery::{BufferedRecovery, RecoveryMode, SolverConfig, SparseCoefficients};
pub use sensing::{MeasurementPacket, SensingMatrix};
pub use signal::{ChannelPreset, ChirpSpec, SampledSignal};
