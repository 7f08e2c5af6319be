//! Bayesian variable selection regression (BVSR) for sparse linear models
//! with far more covariates than observations.
//!
//! The crate is `no_std` and only needs an allocator. It contains the
//! hierarchical model with the PVE-anchored prior on effect sizes, the
//! closed-form marginal likelihood with incremental Cholesky maintenance,
//! the Metropolis–Hastings sampler over `(h, π, γ)`, Rao–Blackwellized
//! posterior summaries, the probit extension for binary traits, a
//! simulation harness and evaluation metrics. File formats, the CLI and
//! multi-chain orchestration live in the `bvsr` companion crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod evaluate;
pub mod genotype;
pub mod likelihood;
pub mod linalg;
pub mod math;
pub mod model;
pub mod probit;
pub mod proposal;
pub mod rao_blackwell;
pub mod sampler;
pub mod simulate;

pub use error::{Error, Result};
pub use genotype::{GenotypeMatrix, Phenotype, Response, SnpInfo};
pub use likelihood::ModelFactorization;
pub use model::{EffectDraw, Hyperparameters, ModelState};
pub use probit::{LatentConfig, LatentState};
pub use proposal::{MoveKernel, ProposalConfig, SnpRanking};
pub use rao_blackwell::RbAccumulator;
pub use sampler::{Chain, ChainConfig, Draw, PosteriorSamples};

/// Random number generator used by every chain.
///
/// ChaCha supports independent streams from one seed, which is how
/// parallel chains stay reproducible.
pub type ChainRng = rand_chacha::ChaCha8Rng;

/// Builds the generator for chain `stream` of a run seeded with `seed`.
pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    use rand::SeedableRng;
    let mut rng = ChainRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
