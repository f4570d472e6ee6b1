//! Probability laws used by the model: first-passage (inverse Gaussian)
//! densities and samplers, multivariate Gaussian draws parameterized by a
//! precision matrix, Dirichlet draws, and the half-Cauchy log density.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{DriftError, Result};
use crate::numeric::{norm_cdf, norm_logcdf};

/// Parameters of the first-passage law of a unit-variance drifted Wiener
/// process: drift rate `mu`, decision boundary `b`, and encoding offset
/// `delta`. The offset is unidentifiable from category data and is fixed to 0
/// throughout fitting; it is kept here only so densities carry the full
/// three-parameter form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IGParams {
    pub mu: f64,
    pub b: f64,
    pub delta: f64,
}

impl IGParams {
    pub fn new(mu: f64, b: f64) -> Result<Self> {
        Self::with_offset(mu, b, 0.0)
    }

    pub fn with_offset(mu: f64, b: f64, delta: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(DriftError::Domain(format!("drift must be positive, got {mu}")));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(DriftError::Domain(format!("boundary must be positive, got {b}")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(DriftError::Domain(format!("offset must be nonnegative, got {delta}")));
        }
        Ok(Self { mu, b, delta })
    }

    /// Mean of the first-passage time, `b / mu` (plus the offset).
    pub fn mean(&self) -> f64 {
        self.delta + self.b / self.mu
    }

    /// Variance `b / mu³` at unit diffusion.
    pub fn variance(&self) -> f64 {
        self.b / self.mu.powi(3)
    }
}

/// First-passage density at `tau`.
pub fn ig_pdf(tau: f64, p: &IGParams) -> Result<f64> {
    let t = tau - p.delta;
    if !(t > 0.0) {
        return Err(DriftError::Domain(format!(
            "pdf requires tau > delta (tau = {tau}, delta = {})",
            p.delta
        )));
    }
    Ok(ig_pdf_unchecked(t, p.mu, p.b))
}

#[inline]
pub(crate) fn ig_pdf_unchecked(t: f64, mu: f64, b: f64) -> f64 {
    let z = b - mu * t;
    b / (2.0 * std::f64::consts::PI * t * t * t).sqrt() * (-z * z / (2.0 * t)).exp()
}

/// First-passage CDF at `tau`, via the standard Gaussian-CDF closed form for
/// an inverse Gaussian with mean `b/mu` and shape `b²`. The second term is
/// assembled in log space so large `2·b·mu` cannot overflow.
pub fn ig_cdf(tau: f64, p: &IGParams) -> Result<f64> {
    let t = tau - p.delta;
    if !(t > 0.0) {
        return Err(DriftError::Domain(format!(
            "cdf requires tau > delta (tau = {tau}, delta = {})",
            p.delta
        )));
    }
    Ok(ig_cdf_unchecked(t, p.mu, p.b))
}

#[inline]
pub(crate) fn ig_cdf_unchecked(t: f64, mu: f64, b: f64) -> f64 {
    let rt = t.sqrt();
    let first = norm_cdf((mu * t - b) / rt);
    let second = (2.0 * b * mu + norm_logcdf(-(mu * t + b) / rt)).exp();
    (first + second).clamp(0.0, 1.0)
}

/// Survival function `1 - G(tau)`; kept separate because race probabilities
/// multiply many survivals together.
#[inline]
pub(crate) fn ig_survival_unchecked(t: f64, mu: f64, b: f64) -> f64 {
    let rt = t.sqrt();
    let first = norm_cdf((b - mu * t) / rt);
    let second = (2.0 * b * mu + norm_logcdf(-(mu * t + b) / rt)).exp();
    (first - second).clamp(0.0, 1.0)
}

/// Draw one first-passage time by the chi-square transformation method
/// (Michael–Schucany–Haas). The larger quadratic root is formed first and the
/// smaller recovered as `mean² / root`, which avoids cancellation.
pub fn ig_sample<R: Rng + ?Sized>(rng: &mut R, p: &IGParams) -> f64 {
    p.delta + ig_sample_unchecked(rng, p.mu, p.b)
}

#[inline]
pub(crate) fn ig_sample_unchecked<R: Rng + ?Sized>(rng: &mut R, mu: f64, b: f64) -> f64 {
    let mean = b / mu;
    let shape = b * b;
    let z: f64 = rng.sample(StandardNormal);
    let y = z * z;
    let my = mean * y;
    let big = mean + mean / (2.0 * shape) * (my + (4.0 * shape * my + my * my).sqrt());
    let small = mean * mean / big;
    let u: f64 = rng.random();
    if u <= mean / (mean + small) {
        small
    } else {
        big
    }
}

/// Draw from `N(mean, precision⁻¹)` by factorizing the precision once and
/// back-solving; the covariance is never formed.
pub fn mvn_sample<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    precision: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let chol = spd_cholesky(precision)?;
    Ok(mean + whitened_solve(rng, &chol))
}

/// Draw from the Gaussian with natural parameters `(linear, precision)`,
/// i.e. mean `precision⁻¹ · linear`. This is the form every conjugate update
/// in the sampler produces.
pub fn mvn_sample_natural<R: Rng + ?Sized>(
    rng: &mut R,
    linear: &DVector<f64>,
    precision: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let chol = spd_cholesky(precision)?;
    Ok(chol.solve(linear) + whitened_solve(rng, &chol))
}

/// Posterior mean implied by natural parameters; used by oracle tests.
pub fn mvn_natural_mean(linear: &DVector<f64>, precision: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(spd_cholesky(precision)?.solve(linear))
}

fn spd_cholesky(precision: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(precision.clone()).ok_or_else(|| {
        DriftError::Numerical(format!(
            "precision matrix ({}x{}) is not symmetric positive definite",
            precision.nrows(),
            precision.ncols()
        ))
    })
}

fn whitened_solve<R: Rng + ?Sized>(
    rng: &mut R,
    chol: &Cholesky<f64, nalgebra::Dyn>,
) -> DVector<f64> {
    let k = chol.l_dirty().nrows();
    let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
    chol.l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("Cholesky factor is nonsingular")
}

/// Dirichlet draw via normalized Gamma variates.
pub fn dirichlet_sample<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return Err(DriftError::Domain("empty Dirichlet parameter vector".into()));
    }
    for &a in alpha {
        if !(a > 0.0) || !a.is_finite() {
            return Err(DriftError::Domain(format!(
                "Dirichlet parameters must be positive, got {a}"
            )));
        }
    }
    // underflow of every component at once is astronomically unlikely; retry a
    // few times before giving up
    for _ in 0..16 {
        let mut draws: Vec<f64> = alpha
            .iter()
            .map(|&a| {
                Gamma::new(a, 1.0)
                    .expect("validated shape")
                    .sample(rng)
            })
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            for d in &mut draws {
                *d /= total;
            }
            return Ok(draws);
        }
    }
    Err(DriftError::Numerical(
        "Dirichlet sampler underflowed repeatedly".into(),
    ))
}

/// Log density of the half-Cauchy distribution C⁺(0, scale) at `x > 0`.
pub fn half_cauchy_logpdf(x: f64, scale: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(DriftError::Domain(format!("half-Cauchy support is x > 0, got {x}")));
    }
    if !(scale > 0.0) {
        return Err(DriftError::Domain(format!("scale must be positive, got {scale}")));
    }
    let r = x / scale;
    Ok((2.0 / (std::f64::consts::PI * scale)).ln() - r.mul_add(r, 1.0).ln())
}
