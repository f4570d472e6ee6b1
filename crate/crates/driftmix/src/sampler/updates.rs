//! Conditional updates of the Gibbs sweep: cluster labels, mixture weights,
//! coefficient atoms, subject random effects, and the variance moves.
//!
//! Given latent times, each latent component contributes a Gaussian kernel
//! in its drift, so every combination `x` carries quadratic sufficient
//! statistics `(precision, linear)`: the label, atom, and random-effect
//! conditionals are all assembled from them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dists::{dirichlet_sample, half_cauchy_logpdf, mvn_sample_natural};
use crate::error::{DriftError, Result};
use crate::model::{Combo, Dataset, Field4};
use crate::splines::SplineBasis;

/// Quadratic sufficient statistics of a Gaussian-in-coefficients likelihood:
/// log-likelihood(β) = const + linearᵀβ − ½ βᵀ·precision·β.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    pub precision: DMatrix<f64>,
    pub linear: DVector<f64>,
}

impl SuffStats {
    pub fn zeros(k: usize) -> Self {
        SuffStats { precision: DMatrix::zeros(k, k), linear: DVector::zeros(k) }
    }

    /// Log likelihood kernel evaluated at `beta` (normalizing constant
    /// dropped; it cancels in label weights).
    pub fn log_kernel(&self, beta: &DVector<f64>) -> f64 {
        self.linear.dot(beta) - 0.5 * (beta.transpose() * &self.precision * beta)[(0, 0)]
    }
}

/// Static trial bookkeeping reused every iteration: trial keys (0-based) and
/// the stimulus-trial counts per `(s, i, t)` cell.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    pub d0: usize,
    pub n: usize,
    pub t_blocks: usize,
    /// `(subject, block, stimulus, response)` per trial, 0-based.
    pub trials: Vec<(usize, usize, usize, usize)>,
    counts: Vec<f64>,
}

impl DatasetIndex {
    pub fn new(ds: &Dataset) -> Self {
        let (d0, n, t_blocks) = (ds.d0, ds.n, ds.t_blocks);
        let mut counts = vec![0.0; d0 * n * t_blocks];
        let mut trials = Vec::with_capacity(ds.records().len());
        for r in ds.records() {
            let (i, t) = (r.subject as usize - 1, r.block as usize - 1);
            let (s, d) = (r.stimulus as usize - 1, r.response as usize - 1);
            trials.push((i, t, s, d));
            counts[(s * n + i) * t_blocks + t] += 1.0;
        }
        DatasetIndex { d0, n, t_blocks, trials, counts }
    }

    /// Number of stimulus-`s` trials for subject `i` in block `t`. Every such
    /// trial contributes one latent component to each response category.
    #[inline]
    pub fn stimulus_count(&self, s: usize, i: usize, t: usize) -> f64 {
        self.counts[(s * self.n + i) * self.t_blocks + t]
    }
}

/// Sum the latent components into per-`(d, s, i, t)` totals.
pub fn aggregate_latent(index: &DatasetIndex, latent: &[Vec<f64>]) -> Field4 {
    let mut agg = Field4::zeros(index.d0, index.n, index.t_blocks);
    for ((i, t, s, _), times) in index.trials.iter().zip(latent.iter()) {
        let fiber = agg.fiber_mut(*s, *i, *t);
        for (slot, &tau) in fiber.iter_mut().zip(times.iter()) {
            *slot += tau;
        }
    }
    agg
}

/// Per-block Gram matrices `B(t)ᵀ B(t)`.
pub fn block_grams(basis: &SplineBasis) -> Vec<DMatrix<f64>> {
    (1..=basis.t_max)
        .map(|t| {
            let row = basis.block_row(t);
            row.transpose() * row
        })
        .collect()
}

/// Evaluate `B(t)·coeffs` over the integer blocks for a set of coefficient
/// vectors; returns a row-major `[vector][block]` table.
pub fn eval_on_blocks(basis: &SplineBasis, coeffs: &[DVector<f64>]) -> Vec<f64> {
    let t_blocks = basis.t_max;
    let mut out = vec![0.0; coeffs.len() * t_blocks];
    for (j, c) in coeffs.iter().enumerate() {
        for t in 0..t_blocks {
            out[j * t_blocks + t] = basis.block_row(t + 1).transpose().dot(c);
        }
    }
    out
}

/// Sufficient statistics of every combination `x = (d, s)`, given the latent
/// aggregates and current random-effect curves (`u_by_class[class][i*T + t]`,
/// class 0 = correct, 1 = incorrect).
pub fn combination_stats(
    index: &DatasetIndex,
    tau_agg: &Field4,
    u_correct: &[f64],
    u_incorrect: &[f64],
    basis: &SplineBasis,
    grams: &[DMatrix<f64>],
    b: f64,
) -> Vec<SuffStats> {
    let (d0, n, t_blocks) = (index.d0, index.n, index.t_blocks);
    let k = basis.k_basis;
    let mut stats = vec![SuffStats::zeros(k); d0 * d0];
    for d in 0..d0 {
        for s in 0..d0 {
            let x = Combo { d, s }.index(d0);
            let st = &mut stats[x];
            let correct = d == s;
            for t in 0..t_blocks {
                let mut tau_total = 0.0;
                let mut m_xt = 0.0;
                for i in 0..n {
                    let tau = tau_agg.get(d, s, i, t);
                    tau_total += tau;
                    let u = if correct { u_correct[i * t_blocks + t] } else { u_incorrect[i * t_blocks + t] };
                    m_xt += b * index.stimulus_count(s, i, t) - u * tau;
                }
                if tau_total != 0.0 {
                    st.precision += tau_total * &grams[t];
                }
                if m_xt != 0.0 {
                    st.linear += m_xt * basis.block_row(t + 1).transpose();
                }
            }
        }
    }
    stats
}

/// Sufficient statistics of each subject's correct and incorrect deviation
/// coefficients, given current fixed-effect curves `f_xt[x*T + t]`.
pub fn subject_stats(
    index: &DatasetIndex,
    tau_agg: &Field4,
    f_xt: &[f64],
    basis: &SplineBasis,
    grams: &[DMatrix<f64>],
    b: f64,
) -> (Vec<SuffStats>, Vec<SuffStats>) {
    let (d0, n, t_blocks) = (index.d0, index.n, index.t_blocks);
    let k = basis.k_basis;
    let mut stats_c = vec![SuffStats::zeros(k); n];
    let mut stats_i = vec![SuffStats::zeros(k); n];
    for i in 0..n {
        for t in 0..t_blocks {
            let mut tau_c = 0.0;
            let mut m_c = 0.0;
            let mut tau_i = 0.0;
            let mut m_i = 0.0;
            for s in 0..d0 {
                let count = index.stimulus_count(s, i, t);
                for d in 0..d0 {
                    let tau = tau_agg.get(d, s, i, t);
                    let f = f_xt[Combo { d, s }.index(d0) * t_blocks + t];
                    if d == s {
                        tau_c += tau;
                        m_c += b * count - f * tau;
                    } else {
                        tau_i += tau;
                        m_i += b * count - f * tau;
                    }
                }
            }
            let row_t = basis.block_row(t + 1).transpose();
            if tau_c != 0.0 {
                stats_c[i].precision += tau_c * &grams[t];
            }
            if m_c != 0.0 {
                stats_c[i].linear += m_c * &row_t;
            }
            if tau_i != 0.0 {
                stats_i[i].precision += tau_i * &grams[t];
            }
            if m_i != 0.0 {
                stats_i[i].linear += m_i * &row_t;
            }
        }
    }
    (stats_c, stats_i)
}

/// Draw a cluster label for every combination: `P(z_x = z) ∝ π_z ·
/// exp{kernel of x's likelihood at atom z}`, computed in the log domain with
/// max subtraction. Combinations with no trials fall back to the weights.
pub fn update_cluster_labels<R: Rng + ?Sized>(
    rng: &mut R,
    stats: &[SuffStats],
    atoms: &[DVector<f64>],
    weights: &[f64],
) -> Vec<usize> {
    let z_max = atoms.len();
    let mut labels = Vec::with_capacity(stats.len());
    let mut logw = vec![0.0f64; z_max];
    for st in stats {
        for (z, atom) in atoms.iter().enumerate() {
            let prior = if weights[z] > 0.0 { weights[z].ln() } else { f64::NEG_INFINITY };
            logw[z] = prior + st.log_kernel(atom);
        }
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for w in logw.iter_mut() {
            *w = (*w - top).exp();
            total += *w;
        }
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = z_max - 1;
        for (z, &w) in logw.iter().enumerate() {
            acc += w;
            if u <= acc {
                chosen = z;
                break;
            }
        }
        labels.push(chosen);
    }
    labels
}

/// Posterior Dirichlet parameters for the mixture weights:
/// `alpha/z_max + N_z` with `N_z` the label counts.
pub fn dirichlet_posterior_params(labels: &[usize], alpha: f64, z_max: usize) -> Vec<f64> {
    let mut params = vec![alpha / z_max as f64; z_max];
    for &z in labels {
        params[z] += 1.0;
    }
    params
}

pub fn update_weights<R: Rng + ?Sized>(
    rng: &mut R,
    labels: &[usize],
    alpha: f64,
    z_max: usize,
) -> Result<Vec<f64>> {
    dirichlet_sample(rng, &dirichlet_posterior_params(labels, alpha, z_max))
}

/// Prior natural parameters shared by all atoms:
/// precision `σ_a⁻² I + σ_s⁻² P`, linear part `precision · μ₀`.
pub fn coefficient_prior(
    sigma_a2: f64,
    sigma_s2: f64,
    penalty: &DMatrix<f64>,
    center: Option<&DVector<f64>>,
) -> SuffStats {
    let k = penalty.nrows();
    let precision = DMatrix::identity(k, k) / sigma_a2 + penalty / sigma_s2;
    let linear = match center {
        Some(mu0) => &precision * mu0,
        None => DVector::zeros(k),
    };
    SuffStats { precision, linear }
}

/// Redraw every atom from its Gaussian full conditional: members' statistics
/// accumulate onto the prior; empty clusters fall back to the prior alone.
pub fn update_atoms<R: Rng + ?Sized>(
    rng: &mut R,
    stats: &[SuffStats],
    labels: &[usize],
    prior: &SuffStats,
    z_max: usize,
) -> Result<Vec<DVector<f64>>> {
    let mut atoms = Vec::with_capacity(z_max);
    for z in 0..z_max {
        let mut precision = prior.precision.clone();
        let mut linear = prior.linear.clone();
        for (x, st) in stats.iter().enumerate() {
            if labels[x] == z {
                precision += &st.precision;
                linear += &st.linear;
            }
        }
        atoms.push(mvn_sample_natural(rng, &linear, &precision)?);
    }
    Ok(atoms)
}

/// Redraw a set of subject coefficients from their Gaussian full
/// conditionals (zero-centered prior).
pub fn update_random_coeffs<R: Rng + ?Sized>(
    rng: &mut R,
    stats: &[SuffStats],
    prior: &SuffStats,
) -> Result<Vec<DVector<f64>>> {
    stats
        .iter()
        .map(|st| {
            let precision = &prior.precision + &st.precision;
            mvn_sample_natural(rng, &st.linear, &precision)
        })
        .collect()
}

/// Log joint of `n_vectors` Gaussian coefficient vectors under the
/// `(σ_a², σ_s²)` prior plus the half-Cauchy hyperpriors. `ssd_identity` and
/// `ssd_penalty` are the summed quadratic forms of the centered coefficients
/// against `I` and `P`; `eigvals` are the penalty eigenvalues.
fn variance_log_joint(
    sigma_a2: f64,
    sigma_s2: f64,
    n_vectors: usize,
    ssd_identity: f64,
    ssd_penalty: f64,
    eigvals: &[f64],
) -> f64 {
    let logdet: f64 = eigvals
        .iter()
        .map(|&l| (1.0 / sigma_a2 + l / sigma_s2).ln())
        .sum();
    0.5 * n_vectors as f64 * logdet - 0.5 * (ssd_identity / sigma_a2 + ssd_penalty / sigma_s2)
        + half_cauchy_logpdf(sigma_a2, 1.0).expect("positive variance")
        + half_cauchy_logpdf(sigma_s2, 1.0).expect("positive variance")
}

/// One Metropolis–Hastings move on a single variance component with a
/// log-normal proposal centered at the current value. Returns the (possibly
/// unchanged) value and whether the proposal was accepted.
#[allow(clippy::too_many_arguments)]
fn variance_mh_step<R: Rng + ?Sized>(
    rng: &mut R,
    current: f64,
    other: f64,
    update_smoothness: bool,
    mh_step: f64,
    n_vectors: usize,
    ssd_identity: f64,
    ssd_penalty: f64,
    eigvals: &[f64],
) -> (f64, bool) {
    let z: f64 = rng.sample(StandardNormal);
    let proposal = current * (mh_step * z).exp();
    let (a_cur, s_cur) = if update_smoothness { (other, current) } else { (current, other) };
    let (a_new, s_new) = if update_smoothness { (other, proposal) } else { (proposal, other) };
    let log_ratio = variance_log_joint(a_new, s_new, n_vectors, ssd_identity, ssd_penalty, eigvals)
        - variance_log_joint(a_cur, s_cur, n_vectors, ssd_identity, ssd_penalty, eigvals)
        + proposal.ln()
        - current.ln();
    let u: f64 = rng.random();
    if u.ln() < log_ratio {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Update one `(σ_a², σ_s²)` pair given its coefficient vectors; returns the
/// two acceptance flags.
pub fn update_variance_pair<R: Rng + ?Sized>(
    rng: &mut R,
    coeffs: &[DVector<f64>],
    center: Option<&DVector<f64>>,
    penalty: &DMatrix<f64>,
    eigvals: &[f64],
    sigma_a2: &mut f64,
    sigma_s2: &mut f64,
    mh_step: f64,
) -> (bool, bool) {
    let mut ssd_identity = 0.0;
    let mut ssd_penalty = 0.0;
    for c in coeffs {
        let dev = match center {
            Some(mu0) => c - mu0,
            None => c.clone(),
        };
        ssd_identity += dev.norm_squared();
        ssd_penalty += (dev.transpose() * penalty * &dev)[(0, 0)];
    }
    let n_vectors = coeffs.len();
    let (a2, acc_a) = variance_mh_step(
        rng, *sigma_a2, *sigma_s2, false, mh_step, n_vectors, ssd_identity, ssd_penalty, eigvals,
    );
    *sigma_a2 = a2;
    let (s2, acc_s) = variance_mh_step(
        rng, *sigma_s2, *sigma_a2, true, mh_step, n_vectors, ssd_identity, ssd_penalty, eigvals,
    );
    *sigma_s2 = s2;
    (acc_a, acc_s)
}

/// Eigenvalues of the penalty matrix (computed once per chain).
pub fn penalty_eigenvalues(penalty: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = penalty.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(DriftError::Numerical("penalty eigendecomposition failed".into()));
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}
