//! The MCMC engine.

mod chain;
mod config;
mod latent;
mod updates;

pub use chain::{run_chain, ChainState, Draw, PosteriorSamples, SamplesMeta, Variances};
pub use config::McmcConfig;
pub use latent::{sample_latent_times, sample_latent_times_counted};
pub use updates::{
    aggregate_latent, block_grams, coefficient_prior, combination_stats,
    dirichlet_posterior_params, eval_on_blocks, penalty_eigenvalues, subject_stats, update_atoms,
    update_cluster_labels, update_random_coeffs, update_variance_pair, update_weights,
    DatasetIndex, SuffStats,
};
