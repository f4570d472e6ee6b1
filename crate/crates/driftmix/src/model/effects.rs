//! Fixed and random effects, and their assembly into drift fields.

use nalgebra::DVector;

use crate::error::{DriftError, Result};
use crate::model::data::Combo;
use crate::projection::{project_into, SimplexSpec};
use crate::splines::SplineBasis;

/// Dense array over `(d, s, i, t)`, stored so the `d`-fiber of any `(s, i, t)`
/// is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Field4 {
    pub d0: usize,
    pub n: usize,
    pub t_blocks: usize,
    data: Vec<f64>,
}

impl Field4 {
    pub fn zeros(d0: usize, n: usize, t_blocks: usize) -> Self {
        Field4 { d0, n, t_blocks, data: vec![0.0; d0 * d0 * n * t_blocks] }
    }

    #[inline]
    fn fiber_start(&self, s: usize, i: usize, t: usize) -> usize {
        ((s * self.n + i) * self.t_blocks + t) * self.d0
    }

    /// Value at 0-based `(d, s, i, t)`.
    #[inline]
    pub fn get(&self, d: usize, s: usize, i: usize, t: usize) -> f64 {
        self.data[self.fiber_start(s, i, t) + d]
    }

    #[inline]
    pub fn set(&mut self, d: usize, s: usize, i: usize, t: usize, v: f64) {
        let idx = self.fiber_start(s, i, t) + d;
        self.data[idx] = v;
    }

    /// The drift vector over response categories for one `(s, i, t)` cell.
    #[inline]
    pub fn fiber(&self, s: usize, i: usize, t: usize) -> &[f64] {
        let start = self.fiber_start(s, i, t);
        &self.data[start..start + self.d0]
    }

    pub fn fiber_mut(&mut self, s: usize, i: usize, t: usize) -> &mut [f64] {
        let start = self.fiber_start(s, i, t);
        &mut self.data[start..start + self.d0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Population-level state: per-combination cluster labels into shared
/// coefficient atoms, mixture weights, and the atom prior's location and
/// variance components.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedEffects {
    /// `z_max` coefficient vectors of length `k_basis`.
    pub atoms: Vec<DVector<f64>>,
    /// Cluster label (0-based) per combination `x`, length `d0²`.
    pub labels: Vec<usize>,
    /// Mixture weights over atoms, length `z_max`.
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub mu_beta0: DVector<f64>,
    pub sigma_a2: f64,
    pub sigma_s2: f64,
}

impl FixedEffects {
    pub fn z_max(&self) -> usize {
        self.atoms.len()
    }

    /// Coefficients currently assigned to combination `x`.
    pub fn coeffs_for(&self, x: usize) -> &DVector<f64> {
        &self.atoms[self.labels[x]]
    }
}

/// Subject-level state: smooth deviations for correct and incorrect
/// identifications, with their variance components.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomEffects {
    pub beta_c: Vec<DVector<f64>>,
    pub beta_i: Vec<DVector<f64>>,
    pub sigma_c_a2: f64,
    pub sigma_c_s2: f64,
    pub sigma_i_a2: f64,
    pub sigma_i_s2: f64,
}

impl RandomEffects {
    pub fn zeros(n: usize, k_basis: usize) -> Self {
        RandomEffects {
            beta_c: vec![DVector::zeros(k_basis); n],
            beta_i: vec![DVector::zeros(k_basis); n],
            sigma_c_a2: 0.1,
            sigma_c_s2: 0.1,
            sigma_i_a2: 0.1,
            sigma_i_s2: 0.1,
        }
    }

    pub fn n(&self) -> usize {
        self.beta_c.len()
    }
}

/// The unconstrained drift surface and its projection onto the constraint
/// set, fiber by fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftField {
    pub unconstrained: Field4,
    pub projected: Field4,
}

/// Assemble drifts from effects: for each `(d, s, i, t)`,
/// `B(t)·β_{x}` plus the subject's correct or incorrect deviation
/// (`d == s` selects the correct one), then project each `(s, i, t)` fiber.
pub fn assemble_drifts(
    fe: &FixedEffects,
    re: &RandomEffects,
    basis: &SplineBasis,
    spec: &SimplexSpec,
) -> Result<DriftField> {
    let d0 = spec.d0;
    let n = re.n();
    let t_blocks = basis.t_max;
    if fe.labels.len() != d0 * d0 {
        return Err(DriftError::Config(format!(
            "expected {} combination labels, got {}",
            d0 * d0,
            fe.labels.len()
        )));
    }
    if re.beta_i.len() != n {
        return Err(DriftError::Config("random-effect matrices differ in subject count".into()));
    }
    let k_basis = basis.k_basis;
    for (what, len) in [("atom", fe.atoms.first().map(|a| a.len()).unwrap_or(k_basis))]
        .into_iter()
        .chain(re.beta_c.first().map(|b| ("random effect", b.len())))
    {
        if len != k_basis {
            return Err(DriftError::Config(format!(
                "{what} coefficient length {len} does not match basis size {k_basis}"
            )));
        }
    }

    // f_x(t) per combination, u per (subject, class, t)
    let bmat = basis.block_matrix();
    let x_max = d0 * d0;
    let mut f_xt = vec![0.0; x_max * t_blocks];
    for x in 0..x_max {
        let coeff = fe.coeffs_for(x);
        for t in 0..t_blocks {
            f_xt[x * t_blocks + t] = bmat.row(t).transpose().dot(coeff);
        }
    }
    let mut u_c = vec![0.0; n * t_blocks];
    let mut u_i = vec![0.0; n * t_blocks];
    for i in 0..n {
        for t in 0..t_blocks {
            let row = bmat.row(t).transpose();
            u_c[i * t_blocks + t] = row.dot(&re.beta_c[i]);
            u_i[i * t_blocks + t] = row.dot(&re.beta_i[i]);
        }
    }

    let mut unconstrained = Field4::zeros(d0, n, t_blocks);
    for s in 0..d0 {
        for i in 0..n {
            for t in 0..t_blocks {
                let fiber = unconstrained.fiber_mut(s, i, t);
                for (d, slot) in fiber.iter_mut().enumerate() {
                    let x = Combo { d, s }.index(d0);
                    let u = if d == s { u_c[i * t_blocks + t] } else { u_i[i * t_blocks + t] };
                    *slot = f_xt[x * t_blocks + t] + u;
                }
            }
        }
    }

    let mut projected = Field4::zeros(d0, n, t_blocks);
    for s in 0..d0 {
        for i in 0..n {
            for t in 0..t_blocks {
                let src = unconstrained.fiber(s, i, t).to_vec();
                project_into(&src, projected.fiber_mut(s, i, t), spec)?;
            }
        }
    }

    Ok(DriftField { unconstrained, projected })
}
