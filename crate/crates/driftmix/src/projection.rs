//! Euclidean projection onto the ε-interior constant-sum simplex
//! `{w : Σ wᵢ = k, wᵢ ≥ ε}`, the identifiability device for drift vectors.

use crate::error::{DriftError, Result};

/// The constraint set: component floor `eps`, target sum `k`, dimension `d0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimplexSpec {
    pub k: f64,
    pub eps: f64,
    pub d0: usize,
}

impl SimplexSpec {
    pub fn new(k: f64, eps: f64, d0: usize) -> Result<Self> {
        if d0 < 2 {
            return Err(DriftError::Config(format!(
                "simplex dimension must be at least 2, got {d0}"
            )));
        }
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(DriftError::Config(format!("eps must be nonnegative, got {eps}")));
        }
        if !(k > d0 as f64 * eps) {
            return Err(DriftError::Config(format!(
                "infeasible simplex: need k > d0 * eps, got k = {k}, d0 * eps = {}",
                d0 as f64 * eps
            )));
        }
        Ok(Self { k, eps, d0 })
    }

    /// Default constraint for `d0` categories: sum `d0`, floor 0.01.
    pub fn default_for(d0: usize) -> Result<Self> {
        Self::new(d0 as f64, 0.01, d0)
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        w.len() == self.d0
            && (w.iter().sum::<f64>() - self.k).abs() <= tol
            && w.iter().all(|&x| x >= self.eps - tol)
    }
}

/// Project `mu` onto the constraint set by sort and thresholding.
///
/// After shifting by the floor (`v = mu - ε`, target sum `k - d0·ε`) this is
/// the classic sorted-cumulative-sum simplex projection; the output is the
/// unique Euclidean minimizer. The threshold uses `(d0 - ρ)·ε`, which is what
/// makes the active components sum to `k` exactly.
pub fn project(mu: &[f64], spec: &SimplexSpec) -> Result<Vec<f64>> {
    let mut out = vec![0.0; mu.len()];
    project_into(mu, &mut out, spec)?;
    Ok(out)
}

/// In-place variant used by the sampler's per-fiber loop.
pub fn project_into(mu: &[f64], out: &mut [f64], spec: &SimplexSpec) -> Result<()> {
    if mu.len() != spec.d0 || out.len() != spec.d0 {
        return Err(DriftError::Config(format!(
            "projection expects dimension {}, got input {} / output {}",
            spec.d0,
            mu.len(),
            out.len()
        )));
    }
    if mu.iter().any(|x| x.is_nan()) {
        return Err(DriftError::Domain("cannot project a vector containing NaN".into()));
    }
    let d0 = spec.d0;
    let (k, eps) = (spec.k, spec.eps);

    let mut sorted: Vec<f64> = mu.to_vec();
    // descending; ties keep original order, which cannot change the threshold
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("NaN filtered above"));

    let mut cumsum = 0.0;
    let mut rho = 0usize;
    let mut theta = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - k + (d0 - (j + 1)) as f64 * eps) / (j + 1) as f64;
        if v - candidate > eps {
            rho = j + 1;
            theta = candidate;
        }
    }
    debug_assert!(rho >= 1, "active set is nonempty for a feasible spec");

    for (o, &m) in out.iter_mut().zip(mu.iter()) {
        *o = (m - theta).max(eps);
    }
    Ok(())
}

/// Row-wise projection of a batch of vectors.
pub fn project_batch(rows: &[Vec<f64>], spec: &SimplexSpec) -> Result<Vec<Vec<f64>>> {
    rows.iter().map(|r| project(r, spec)).collect()
}
