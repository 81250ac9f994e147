//! Pseudorandom codes and a language-model watermark built on them.
//!
//! The crate has three layers:
//!
//! * binary codes robust to substitution noise ([`prc_substitution`]),
//!   keyed by a local weak PRF ([`prf`]),
//! * an indexing wrapper that lifts any such code to a large alphabet and
//!   buys robustness to insertions and deletions ([`prc_indexing`]),
//! * a watermark that embeds indexing codewords into the sampling loop of
//!   an autoregressive token model ([`watermark`], toy models in [`lm`]).
//!
//! [`channels`] provides the adversarial corruptions the codes are measured
//! against, and [`oracle`] holds independent brute-force reference
//! computations used by the test suite to pin down the math.

pub mod channels;
mod keyfile;
pub mod lm;
pub mod oracle;
pub mod prc_indexing;
pub mod prc_substitution;
pub mod prf;
pub mod seed;
pub mod symbols;
pub mod watermark;
