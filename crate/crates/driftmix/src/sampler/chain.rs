//! The full MCMC loop: latent times, label/weight/atom updates, random
//! effects, variance moves, drift reassembly and projection, and probability
//! estimation for stored draws.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::model::{
    assemble_drifts, category_prob_mc, Dataset, DriftField, Field4, FixedEffects,
    RandomEffects,
};
use crate::rng::{substream, StreamTag};
use crate::sampler::config::McmcConfig;
use crate::sampler::latent::sample_latent_times;
use crate::sampler::updates::{
    aggregate_latent, block_grams, coefficient_prior, combination_stats, eval_on_blocks,
    penalty_eigenvalues, subject_stats, update_atoms, update_cluster_labels, update_random_coeffs,
    update_variance_pair, update_weights, DatasetIndex,
};
use crate::splines::{build_basis, penalty_matrix, SplineBasis};

/// Variance components of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variances {
    pub sigma_a2: f64,
    pub sigma_s2: f64,
    pub sigma_c_a2: f64,
    pub sigma_c_s2: f64,
    pub sigma_i_a2: f64,
    pub sigma_i_s2: f64,
}

/// One stored posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub iteration: usize,
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
    pub atoms: Vec<DVector<f64>>,
    pub beta_c: Vec<DVector<f64>>,
    pub beta_i: Vec<DVector<f64>>,
    pub variances: Variances,
    /// Projected drift field of this iteration.
    pub drift: Field4,
    /// Monte Carlo probability field over `(d, s, i, t)`.
    pub prob: Field4,
}

/// Provenance carried with the draws so fits are auditable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesMeta {
    pub config: McmcConfig,
    pub n: usize,
    pub t_blocks: usize,
    pub l_trials: usize,
    pub d0: usize,
    pub dataset_digest: String,
}

/// Thinned post-burn-in draws plus their metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub draws: Vec<Draw>,
    pub meta: SamplesMeta,
}

impl PosteriorSamples {
    pub fn x_max(&self) -> usize {
        self.meta.d0 * self.meta.d0
    }

    /// Check that `ds` is the dataset these samples were fitted to.
    pub fn verify_dataset(&self, ds: &Dataset) -> Result<()> {
        let digest = ds.digest();
        if digest != self.meta.dataset_digest {
            return Err(DriftError::Integrity(format!(
                "dataset digest {digest} does not match manifest {}",
                self.meta.dataset_digest
            )));
        }
        Ok(())
    }
}

/// All mutable quantities of one iteration.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub latent_times: Vec<Vec<f64>>,
    pub fe: FixedEffects,
    pub re: RandomEffects,
    pub field: DriftField,
    pub iteration: usize,
}

pub(crate) struct Chain<'a> {
    cfg: &'a McmcConfig,
    index: DatasetIndex,
    basis: SplineBasis,
    penalty: DMatrix<f64>,
    pen_eigvals: Vec<f64>,
    grams: Vec<DMatrix<f64>>,
    pub(crate) state: ChainState,
}

impl<'a> Chain<'a> {
    pub(crate) fn new(ds: &Dataset, cfg: &'a McmcConfig) -> Result<Self> {
        cfg.validate(ds)?;
        let basis = build_basis(ds.t_blocks, cfg.k_basis, cfg.degree)?;
        let penalty = penalty_matrix(cfg.k_basis)?.p;
        let pen_eigvals = penalty_eigenvalues(&penalty)?;
        let grams = block_grams(&basis);
        let index = DatasetIndex::new(ds);

        // initialization: atoms at the prior location (1, ..., 1), one label
        // per combination, weights flat, random effects zero, all variances
        // 0.1. Starting from singleton clusters lets each combination's atom
        // settle on its own trajectory before any merging; random initial
        // labels seed mixture atoms that capture combinations they do not fit.
        let k = cfg.k_basis;
        let mu_beta0 = DVector::from_element(k, 1.0);
        let labels: Vec<usize> = (0..ds.d0 * ds.d0).map(|x| x % cfg.z_max).collect();
        let fe = FixedEffects {
            atoms: vec![mu_beta0.clone(); cfg.z_max],
            labels,
            weights: vec![1.0 / cfg.z_max as f64; cfg.z_max],
            alpha: cfg.alpha,
            mu_beta0,
            sigma_a2: 0.1,
            sigma_s2: 0.1,
        };
        let re = RandomEffects::zeros(ds.n, k);
        let field = assemble_drifts(&fe, &re, &basis, &cfg.spec)?;
        Ok(Chain {
            cfg,
            index,
            basis,
            penalty,
            pen_eigvals,
            grams,
            state: ChainState { latent_times: Vec::new(), fe, re, field, iteration: 0 },
        })
    }

    /// One full sweep. Latent times condition on the previous iteration's
    /// projected drifts; the drift field is reassembled and re-projected
    /// after all coefficient updates.
    pub(crate) fn step(&mut self, iter: usize) -> Result<()> {
        let cfg = self.cfg;
        let field = &self.state.field.projected;
        let latent: Vec<Vec<f64>> = self
            .index
            .trials
            .par_iter()
            .enumerate()
            .map(|(trial_idx, &(i, t, s, d))| {
                let mut rng =
                    substream(cfg.seed, StreamTag::LatentTimes, &[iter as u64, trial_idx as u64]);
                sample_latent_times(&mut rng, field.fiber(s, i, t), cfg.b, d, cfg.retry_cap)
            })
            .collect::<Result<_>>()?;
        debug_assert!(latent
            .iter()
            .zip(self.index.trials.iter())
            .all(|(times, &(_, _, _, d))| times.iter().all(|&x| times[d] <= x)));
        self.state.latent_times = latent;

        let tau_agg = aggregate_latent(&self.index, &self.state.latent_times);
        let u_correct = eval_on_blocks(&self.basis, &self.state.re.beta_c);
        let u_incorrect = eval_on_blocks(&self.basis, &self.state.re.beta_i);
        let stats = combination_stats(
            &self.index,
            &tau_agg,
            &u_correct,
            &u_incorrect,
            &self.basis,
            &self.grams,
            cfg.b,
        );

        let mut gibbs = substream(cfg.seed, StreamTag::Gibbs, &[iter as u64]);

        self.state.fe.labels =
            update_cluster_labels(&mut gibbs, &stats, &self.state.fe.atoms, &self.state.fe.weights);
        self.state.fe.weights =
            update_weights(&mut gibbs, &self.state.fe.labels, cfg.alpha, cfg.z_max)?;
        let atom_prior = coefficient_prior(
            self.state.fe.sigma_a2,
            self.state.fe.sigma_s2,
            &self.penalty,
            Some(&self.state.fe.mu_beta0),
        );
        self.state.fe.atoms =
            update_atoms(&mut gibbs, &stats, &self.state.fe.labels, &atom_prior, cfg.z_max)?;

        // random effects see the refreshed fixed-effect curves
        let assigned: Vec<DVector<f64>> = (0..self.index.d0 * self.index.d0)
            .map(|x| self.state.fe.coeffs_for(x).clone())
            .collect();
        let f_xt = eval_on_blocks(&self.basis, &assigned);
        let (stats_c, stats_i) =
            subject_stats(&self.index, &tau_agg, &f_xt, &self.basis, &self.grams, cfg.b);
        let prior_c = coefficient_prior(
            self.state.re.sigma_c_a2,
            self.state.re.sigma_c_s2,
            &self.penalty,
            None,
        );
        self.state.re.beta_c = update_random_coeffs(&mut gibbs, &stats_c, &prior_c)?;
        let prior_i = coefficient_prior(
            self.state.re.sigma_i_a2,
            self.state.re.sigma_i_s2,
            &self.penalty,
            None,
        );
        self.state.re.beta_i = update_random_coeffs(&mut gibbs, &stats_i, &prior_i)?;

        let mut sigma_a2 = self.state.fe.sigma_a2;
        let mut sigma_s2 = self.state.fe.sigma_s2;
        update_variance_pair(
            &mut gibbs,
            &self.state.fe.atoms,
            Some(&self.state.fe.mu_beta0.clone()),
            &self.penalty,
            &self.pen_eigvals,
            &mut sigma_a2,
            &mut sigma_s2,
            cfg.mh_step,
        );
        self.state.fe.sigma_a2 = sigma_a2;
        self.state.fe.sigma_s2 = sigma_s2;

        let mut c_a2 = self.state.re.sigma_c_a2;
        let mut c_s2 = self.state.re.sigma_c_s2;
        update_variance_pair(
            &mut gibbs,
            &self.state.re.beta_c,
            None,
            &self.penalty,
            &self.pen_eigvals,
            &mut c_a2,
            &mut c_s2,
            cfg.mh_step,
        );
        self.state.re.sigma_c_a2 = c_a2;
        self.state.re.sigma_c_s2 = c_s2;

        let mut i_a2 = self.state.re.sigma_i_a2;
        let mut i_s2 = self.state.re.sigma_i_s2;
        update_variance_pair(
            &mut gibbs,
            &self.state.re.beta_i,
            None,
            &self.penalty,
            &self.pen_eigvals,
            &mut i_a2,
            &mut i_s2,
            cfg.mh_step,
        );
        self.state.re.sigma_i_a2 = i_a2;
        self.state.re.sigma_i_s2 = i_s2;

        self.state.field = assemble_drifts(&self.state.fe, &self.state.re, &self.basis, &cfg.spec)?;
        self.state.iteration = iter;
        Ok(())
    }

    /// Monte Carlo probability field from the current projected drifts, one
    /// independent substream per `(s, i, t)` cell.
    pub(crate) fn probability_field(&self, iter: usize) -> Result<Field4> {
        let cfg = self.cfg;
        let (d0, n, t_blocks) = (self.index.d0, self.index.n, self.index.t_blocks);
        let field = &self.state.field.projected;
        let cells: Vec<(usize, usize, usize)> = (0..d0)
            .flat_map(|s| (0..n).flat_map(move |i| (0..t_blocks).map(move |t| (s, i, t))))
            .collect();
        let fibers: Vec<Vec<f64>> = cells
            .par_iter()
            .enumerate()
            .map(|(cell_idx, &(s, i, t))| {
                let mut rng =
                    substream(cfg.seed, StreamTag::ProbField, &[iter as u64, cell_idx as u64]);
                category_prob_mc(&mut rng, field.fiber(s, i, t), cfg.b, cfg.m_prob)
            })
            .collect::<Result<_>>()?;
        let mut prob = Field4::zeros(d0, n, t_blocks);
        for (&(s, i, t), probs) in cells.iter().zip(fibers.iter()) {
            for (d, &p) in probs.iter().enumerate() {
                prob.set(d, s, i, t, p);
            }
        }
        Ok(prob)
    }

    fn snapshot(&self, iter: usize, prob: Field4) -> Draw {
        Draw {
            iteration: iter,
            labels: self.state.fe.labels.clone(),
            weights: self.state.fe.weights.clone(),
            atoms: self.state.fe.atoms.clone(),
            beta_c: self.state.re.beta_c.clone(),
            beta_i: self.state.re.beta_i.clone(),
            variances: Variances {
                sigma_a2: self.state.fe.sigma_a2,
                sigma_s2: self.state.fe.sigma_s2,
                sigma_c_a2: self.state.re.sigma_c_a2,
                sigma_c_s2: self.state.re.sigma_c_s2,
                sigma_i_a2: self.state.re.sigma_i_a2,
                sigma_i_s2: self.state.re.sigma_i_s2,
            },
            drift: self.state.field.projected.clone(),
            prob,
        }
    }
}

/// Run one chain to completion. Deterministic given the seed, including
/// under parallel execution of the latent-time and probability steps.
pub fn run_chain(ds: &Dataset, cfg: &McmcConfig) -> Result<PosteriorSamples> {
    let mut chain = Chain::new(ds, cfg)?;
    let mut draws = Vec::with_capacity(cfg.stored_draws());
    for iter in 1..=cfg.n_iter {
        chain
            .step(iter)
            .map_err(|e| DriftError::Numerical(format!("iteration {iter}: {e}")))?;
        if cfg.stores(iter) {
            let prob = chain
                .probability_field(iter)
                .map_err(|e| DriftError::Numerical(format!("iteration {iter}: {e}")))?;
            draws.push(chain.snapshot(iter, prob));
        }
    }
    Ok(PosteriorSamples {
        draws,
        meta: SamplesMeta {
            config: cfg.clone(),
            n: ds.n,
            t_blocks: ds.t_blocks,
            l_trials: ds.l_trials,
            d0: ds.d0,
            dataset_digest: ds.digest(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrialRecord;
    use crate::rng::{substream, StreamTag};
    use rand::Rng;

    fn toy_dataset(seed: u64, n: usize, t_blocks: usize, trials_per_stim: usize) -> Dataset {
        let d0 = 2usize;
        let mut rng = substream(seed, StreamTag::Simulate, &[99]);
        let mut records = Vec::new();
        for i in 1..=n {
            for t in 1..=t_blocks {
                let mut trial = 0u32;
                for s in 1..=d0 {
                    for _ in 0..trials_per_stim {
                        trial += 1;
                        let response = if rng.random::<f64>() < 0.7 { s } else { 1 + (s % d0) };
                        records.push(TrialRecord {
                            subject: i as u32,
                            block: t as u32,
                            trial,
                            stimulus: s as u32,
                            response: response as u32,
                        });
                    }
                }
            }
        }
        Dataset::new(records, Some(d0)).unwrap()
    }

    fn toy_config(seed: u64, ds: &Dataset) -> McmcConfig {
        let mut cfg = McmcConfig::default_for(ds.d0, ds.t_blocks, seed).unwrap();
        cfg.n_iter = 10;
        cfg.burn_in = 0;
        cfg.thin = 1;
        cfg.m_prob = 200;
        cfg.k_basis = ds.t_blocks.min(4);
        cfg.degree = 2.min(cfg.k_basis - 1);
        cfg
    }

    #[test]
    fn stores_the_requested_number_of_draws() {
        let ds = toy_dataset(1, 2, 3, 4);
        let cfg = toy_config(11, &ds);
        let samples = run_chain(&ds, &cfg).unwrap();
        assert_eq!(samples.draws.len(), 10);
        assert_eq!(samples.meta.d0, 2);
        assert_eq!(samples.draws[0].iteration, 1);
        assert_eq!(samples.draws[9].iteration, 10);
    }

    #[test]
    fn chains_are_bit_reproducible() {
        let ds = toy_dataset(2, 2, 3, 4);
        let cfg = toy_config(12, &ds);
        let a = run_chain(&ds, &cfg).unwrap();
        let b = run_chain(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        let mut cfg2 = cfg.clone();
        cfg2.seed = 13;
        let c = run_chain(&ds, &cfg2).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let ds = toy_dataset(3, 2, 3, 4);
        let cfg = toy_config(14, &ds);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_chain(&ds, &cfg).unwrap());
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_chain(&ds, &cfg).unwrap());
        assert_eq!(single, multi);
    }

    #[test]
    fn state_invariants_hold_during_stepping() {
        let ds = toy_dataset(4, 2, 3, 5);
        let cfg = toy_config(15, &ds);
        let mut chain = Chain::new(&ds, &cfg).unwrap();
        for iter in 1..=5 {
            chain.step(iter).unwrap();
            // winner-minimum on every latent vector
            for (times, &(_, _, _, d)) in
                chain.state.latent_times.iter().zip(chain.index.trials.iter())
            {
                assert!(times.iter().all(|&x| times[d] <= x));
            }
            // projected fibers on the constraint set
            for s in 0..2 {
                for i in 0..2 {
                    for t in 0..3 {
                        let fiber = chain.state.field.projected.fiber(s, i, t);
                        assert!((fiber.iter().sum::<f64>() - cfg.spec.k).abs() < 1e-10);
                        assert!(fiber.iter().all(|&w| w >= cfg.spec.eps));
                    }
                }
            }
            // weights stay on the simplex
            assert!((chain.state.fe.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // variances stay positive
            assert!(chain.state.fe.sigma_a2 > 0.0 && chain.state.fe.sigma_s2 > 0.0);
        }
    }

    #[test]
    fn stored_probability_fields_are_simplex_valued() {
        let ds = toy_dataset(5, 2, 2, 4);
        let cfg = toy_config(16, &ds);
        let samples = run_chain(&ds, &cfg).unwrap();
        for draw in &samples.draws {
            for s in 0..2 {
                for i in 0..2 {
                    for t in 0..2 {
                        let mut total = 0.0;
                        for d in 0..2 {
                            let p = draw.prob.get(d, s, i, t);
                            assert!((0.0..=1.0).contains(&p));
                            total += p;
                        }
                        assert!((total - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn digest_verification_guards_mismatches() {
        let ds = toy_dataset(6, 2, 2, 3);
        let cfg = toy_config(17, &ds);
        let samples = run_chain(&ds, &cfg).unwrap();
        assert!(samples.verify_dataset(&ds).is_ok());
        let other = toy_dataset(7, 2, 2, 3);
        assert!(samples.verify_dataset(&other).is_err());
    }
}
