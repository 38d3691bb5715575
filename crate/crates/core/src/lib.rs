//! Desk-scale toolchain for solving maximum weighted co-k-plex problems on a
//! Chimera-topology annealer.
//!
//! The pipeline runs formulation ([`qubo`]), minor embedding ([`embedding`]
//! on a [`chimera`] hardware graph), parameter setting ([`params`]),
//! sampling with a classical stand-in sampler ([`sampler`]), decoding
//! ([`decode`]) and time-to-solution statistics ([`stats`]).
//! [`pipeline`] composes the stages into the benchmark grid driven by the CLI.

pub mod chimera;
pub mod decode;
pub mod embedding;
pub mod graph;
pub mod io;
pub mod params;
pub mod pipeline;
pub mod qubo;
pub mod sampler;
pub mod seed;
pub mod stats;

pub use chimera::HardwareGraph;
pub use decode::DecodedSet;
pub use embedding::{Embedding, EmbeddingMetrics};
pub use graph::{ConflictGraph, DegreeHistogram, LabelledGraph};
pub use params::{EmbeddedIsing, HardwareRanges};
pub use qubo::{IsingProblem, PseudoBooleanPolynomial, QuboProblem};
pub use sampler::SampleSet;
pub use stats::{PosteriorSummary, TtsDistribution};

/// A classical Ising spin, always `+1` or `-1`.
pub type Spin = i8;

/// Physical qubit index on the hardware graph.
pub type Qubit = usize;
