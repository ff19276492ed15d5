//! Probabilistic spiking winner-take-all networks (WTA-SNNs) trained with an
//! online, local variational EM rule.
//!
//! A network is a directed graph of WTA circuits. At every time step a
//! circuit with `C` units emits either silence or exactly one spike at unit
//! `c`, with probabilities given by a softmax over its membrane potential
//! (the implicit silence logit is 0). Circuits are either clamped input
//! sources, hidden circuits sampled from the model, or visible read-out
//! circuits clamped to targets during training.
//!
//! - [`mathcore`]: cross-entropy, KL, temporal averages, WTA softmax, sampling
//! - [`filters`]: kernel construction and ring-buffered spike traces
//! - [`network`]: topology, parameters, membrane potentials, stepping
//! - [`learning`]: reward, log-probability gradients, eligibility traces,
//!   optimized baselines and the visible/hidden parameter updates
//! - [`oracle`]: finite differences, exhaustive ELBO enumeration, MC means
//! - [`data`]: event files, binning, pooling, input encodings, synthetic tasks
//!
//! With every `C = 1` the model reduces to the conventional binary GLM SNN.

pub mod data;
pub mod error;
pub mod filters;
pub mod learning;
pub mod mathcore;
pub mod network;
pub mod oracle;

pub use error::{Error, Result};
pub use mathcore::{ProbVector, SpikeSymbol, TemporalAverage};
