//! Sampler configuration.

use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::model::Dataset;
use crate::projection::SimplexSpec;

/// Everything a chain needs besides the data. `spec` is the drift constraint
/// set; `b` the (fixed) decision boundary; `m_prob` the race count per
/// probability estimate; `mh_step` the log-normal proposal scale for the
/// variance moves; `retry_cap` bounds the latent-time rejection loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub m_prob: usize,
    pub mh_step: f64,
    pub seed: u64,
    pub b: f64,
    pub spec: SimplexSpec,
    pub z_max: usize,
    pub k_basis: usize,
    pub degree: usize,
    pub alpha: f64,
    #[serde(default = "default_retry_cap")]
    pub retry_cap: usize,
}

fn default_retry_cap() -> usize {
    1_000_000
}

impl McmcConfig {
    /// Defaults for a design with `d0` categories over `t_blocks` blocks:
    /// 5000 iterations, 2000 burn-in, thinning 5, 2000 races per probability,
    /// boundary 2, constraint sum `d0` with floor 0.01, `d0²` potential
    /// clusters, cubic splines with `min(t_blocks, 6)` basis functions (the
    /// degree drops below cubic when very few blocks leave no room).
    pub fn default_for(d0: usize, t_blocks: usize, seed: u64) -> Result<Self> {
        let k_basis = t_blocks.min(6).max(2);
        Ok(McmcConfig {
            n_iter: 5000,
            burn_in: 2000,
            thin: 5,
            m_prob: 2000,
            mh_step: 0.1,
            seed,
            b: 2.0,
            spec: SimplexSpec::default_for(d0)?,
            z_max: d0 * d0,
            k_basis,
            degree: 3.min(k_basis - 1),
            alpha: 1.0,
            retry_cap: default_retry_cap(),
        })
    }

    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(DriftError::Config(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(DriftError::Config("thinning interval must be at least 1".into()));
        }
        if self.m_prob == 0 {
            return Err(DriftError::Config("m_prob must be at least 1".into()));
        }
        if !(self.b > 0.0) {
            return Err(DriftError::Config(format!("boundary must be positive, got {}", self.b)));
        }
        if !(self.alpha > 0.0) {
            return Err(DriftError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.z_max == 0 {
            return Err(DriftError::Config("z_max must be at least 1".into()));
        }
        if !(self.mh_step >= 0.0) {
            return Err(DriftError::Config(format!("mh_step must be nonnegative, got {}", self.mh_step)));
        }
        if self.retry_cap == 0 {
            return Err(DriftError::Config("retry cap must be at least 1".into()));
        }
        if self.spec.d0 != ds.d0 {
            return Err(DriftError::Config(format!(
                "constraint dimension {} does not match dataset categories {}",
                self.spec.d0, ds.d0
            )));
        }
        if self.k_basis < self.degree + 1 {
            return Err(DriftError::Config(format!(
                "basis size {} too small for degree {}",
                self.k_basis, self.degree
            )));
        }
        SimplexSpec::new(self.spec.k, self.spec.eps, self.spec.d0)?;
        Ok(())
    }

    /// Number of stored draws: `floor((n_iter - burn_in) / thin)`.
    pub fn stored_draws(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }

    /// Whether iteration `iter` (1-based) is kept.
    pub fn stores(&self, iter: usize) -> bool {
        iter > self.burn_in && (iter - self.burn_in) % self.thin == 0
    }
}
