//! Synthetic category-learning experiments: a default four-cluster design
//! mimicking longitudinal tone-learning studies, plus arbitrary user designs.
//! Generated data double as ground truth for validation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::model::{category_prob_quad, Combo, Dataset, Field4, TrialRecord};
use crate::rng::{substream, StreamTag};
use crate::splines::build_basis;

/// Drift trajectory of one cluster over blocks, evaluated at the normalized
/// position `u = (t - 1) / (T - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Trajectory {
    Constant(f64),
    Linear { start: f64, end: f64 },
}

impl Trajectory {
    pub fn eval(&self, t: usize, t_blocks: usize) -> f64 {
        match *self {
            Trajectory::Constant(v) => v,
            Trajectory::Linear { start, end } => {
                let u = if t_blocks > 1 { (t - 1) as f64 / (t_blocks - 1) as f64 } else { 0.0 };
                start + (end - start) * u
            }
        }
    }
}

/// A cluster of input-response combinations sharing one trajectory.
/// Combinations are 0-based `(d, s)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueCluster {
    pub members: Vec<(usize, usize)>,
    pub trajectory: Trajectory,
}

/// A simulation design. `l_trials` is the number of trials per stimulus per
/// block per subject; subject effects are smooth spline perturbations with
/// coefficient standard deviation `subject_effect_sd`, shared within each
/// subject's correct and incorrect combinations and floored at 0.05.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub n: usize,
    pub t_blocks: usize,
    pub l_trials: usize,
    pub d0: usize,
    pub b: f64,
    pub subject_effect_sd: f64,
    pub seed: u64,
    pub clusters: Vec<TrueCluster>,
}

/// What the generator knows and the fitted model must recover.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Subject-specific true drifts over `(d, s, i, t)` (after perturbation
    /// and flooring).
    pub drift: Field4,
    /// Race probabilities of the true drifts, by quadrature.
    pub prob: Field4,
    /// True cluster id per combination index.
    pub cluster_labels: Vec<usize>,
}

/// The four-cluster design of the accompanying simulation study: two correct
/// clusters (hard tones 1-2, easy tones 3-4) with rising drifts and two
/// incorrect clusters (confusable vs easy alternatives) with slowly decaying
/// drifts. Sums over each stimulus fiber stay at least 0.5 away from `d0`,
/// so the truth never satisfies the fitted constraint.
pub fn default_design() -> SimDesign {
    let correct_hard = TrueCluster {
        members: vec![(0, 0), (1, 1)],
        trajectory: Trajectory::Linear { start: 2.0, end: 4.0 },
    };
    let correct_easy = TrueCluster {
        members: vec![(2, 2), (3, 3)],
        trajectory: Trajectory::Linear { start: 2.12, end: 4.12 },
    };
    let wrong_hard = TrueCluster {
        members: vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 3), (3, 2)],
        trajectory: Trajectory::Linear { start: 1.5, end: 1.1 },
    };
    let wrong_easy = TrueCluster {
        members: vec![(0, 3), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)],
        trajectory: Trajectory::Constant(0.5),
    };
    SimDesign {
        n: 20,
        t_blocks: 10,
        l_trials: 40,
        d0: 4,
        b: 2.0,
        subject_effect_sd: 0.1,
        seed: 0,
        clusters: vec![correct_hard, correct_easy, wrong_hard, wrong_easy],
    }
}

impl SimDesign {
    pub fn validate(&self) -> Result<()> {
        if self.d0 < 2 || self.n == 0 || self.t_blocks < 2 || self.l_trials == 0 {
            return Err(DriftError::Config(format!(
                "degenerate design: n={}, T={}, L={}, d0={}",
                self.n, self.t_blocks, self.l_trials, self.d0
            )));
        }
        if !(self.b > 0.0) {
            return Err(DriftError::Config(format!("boundary must be positive, got {}", self.b)));
        }
        if !(self.subject_effect_sd >= 0.0) {
            return Err(DriftError::Config("subject effect sd must be nonnegative".into()));
        }
        let mut seen = vec![false; self.d0 * self.d0];
        for cluster in &self.clusters {
            for &(d, s) in &cluster.members {
                if d >= self.d0 || s >= self.d0 {
                    return Err(DriftError::Config(format!(
                        "cluster member ({d}, {s}) outside 0..{}",
                        self.d0
                    )));
                }
                let x = Combo { d, s }.index(self.d0);
                if seen[x] {
                    return Err(DriftError::Config(format!(
                        "combination ({d}, {s}) assigned to two clusters"
                    )));
                }
                seen[x] = true;
            }
            for t in 1..=self.t_blocks {
                if cluster.trajectory.eval(t, self.t_blocks) <= 0.0 {
                    return Err(DriftError::Config(format!(
                        "trajectory nonpositive at block {t}"
                    )));
                }
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(DriftError::Config(
                "every input-response combination needs a cluster".into(),
            ));
        }
        Ok(())
    }

    /// True cluster id per combination index.
    pub fn cluster_labels(&self) -> Vec<usize> {
        let mut labels = vec![0usize; self.d0 * self.d0];
        for (cid, cluster) in self.clusters.iter().enumerate() {
            for &(d, s) in &cluster.members {
                labels[Combo { d, s }.index(self.d0)] = cid;
            }
        }
        labels
    }

    /// Population-level trajectory of combination `(d, s)` at block `t`
    /// (1-based).
    pub fn true_drift(&self, d: usize, s: usize, t: usize) -> f64 {
        let x = Combo { d, s }.index(self.d0);
        let labels = self.cluster_labels();
        self.clusters[labels[x]].trajectory.eval(t, self.t_blocks)
    }
}

/// Simulate one experiment: draw smooth subject effects, floor the drifts,
/// run the latent race for every trial (balanced stimulus schedule), and
/// compute the subject-level true probability field by quadrature.
pub fn generate<R: Rng + ?Sized>(design: &SimDesign, rng: &mut R) -> Result<(Dataset, GroundTruth)> {
    design.validate()?;
    let (d0, n, t_blocks, l) = (design.d0, design.n, design.t_blocks, design.l_trials);
    let master: u64 = rng.random();
    let labels = design.cluster_labels();

    // smooth per-subject perturbations, one curve each for correct and
    // incorrect combinations, mirroring the fitted random-effect structure
    let basis = build_basis(t_blocks, t_blocks.min(6), 3.min(t_blocks.min(6) - 1))?;
    let k = basis.k_basis;
    let mut drift = Field4::zeros(d0, n, t_blocks);
    for i in 0..n {
        let mut subj_rng = substream(master, StreamTag::Simulate, &[i as u64, 0]);
        let curve = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            let coeffs: Vec<f64> = (0..k)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    design.subject_effect_sd * z
                })
                .collect();
            (1..=t_blocks)
                .map(|t| {
                    let row = basis.block_row(t);
                    coeffs.iter().enumerate().map(|(j, c)| c * row[j]).sum()
                })
                .collect()
        };
        let u_correct = curve(&mut subj_rng);
        let u_incorrect = curve(&mut subj_rng);
        for s in 0..d0 {
            for dcat in 0..d0 {
                let x = Combo { d: dcat, s }.index(d0);
                let traj = &design.clusters[labels[x]].trajectory;
                for t in 1..=t_blocks {
                    let u = if dcat == s { u_correct[t - 1] } else { u_incorrect[t - 1] };
                    let value = (traj.eval(t, t_blocks) + u).max(0.05);
                    drift.set(dcat, s, i, t - 1, value);
                }
            }
        }
    }

    // balanced schedule: every stimulus gets l trials per (subject, block)
    let mut records = Vec::with_capacity(n * t_blocks * d0 * l);
    for i in 0..n {
        for t in 0..t_blocks {
            let mut race_rng = substream(master, StreamTag::Simulate, &[i as u64, 1 + t as u64]);
            let mut trial = 0u32;
            for s in 0..d0 {
                let fiber = drift.fiber(s, i, t);
                for _ in 0..l {
                    trial += 1;
                    let mut best = 0usize;
                    let mut best_t = f64::INFINITY;
                    for (dcat, &mu) in fiber.iter().enumerate() {
                        let time = crate::dists::ig_sample_unchecked(&mut race_rng, mu, design.b);
                        if time < best_t {
                            best_t = time;
                            best = dcat;
                        }
                    }
                    records.push(TrialRecord {
                        subject: i as u32 + 1,
                        block: t as u32 + 1,
                        trial,
                        stimulus: s as u32 + 1,
                        response: best as u32 + 1,
                    });
                }
            }
        }
    }

    let mut prob = Field4::zeros(d0, n, t_blocks);
    for s in 0..d0 {
        for i in 0..n {
            for t in 0..t_blocks {
                let probs = category_prob_quad(drift.fiber(s, i, t), design.b)?;
                for (dcat, &p) in probs.iter().enumerate() {
                    prob.set(dcat, s, i, t, p);
                }
            }
        }
    }

    let dataset = Dataset::new(records, Some(d0))?;
    Ok((dataset, GroundTruth { drift, prob, cluster_labels: labels }))
}
