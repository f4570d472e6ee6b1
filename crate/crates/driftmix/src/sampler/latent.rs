//! Accept-reject sampling of the latent first-passage times of one trial,
//! conditioned on the observed response having the minimal time.

use rand::Rng;

use crate::dists::ig_sample_unchecked;
use crate::error::{DriftError, Result};

/// Draw the joint vector of first-passage times conditioned on component
/// `winner` being the smallest: propose from the unconditional product law
/// and accept when the winner is minimal. Also returns the number of
/// proposals, whose reciprocal estimates the conditioning probability.
pub fn sample_latent_times_counted<R: Rng + ?Sized>(
    rng: &mut R,
    mu_fiber: &[f64],
    b: f64,
    winner: usize,
    retry_cap: usize,
) -> Result<(Vec<f64>, usize)> {
    let d0 = mu_fiber.len();
    if winner >= d0 {
        return Err(DriftError::Domain(format!(
            "winner index {winner} outside 0..{d0}"
        )));
    }
    if mu_fiber.iter().any(|&m| !(m > 0.0) || !m.is_finite()) || !(b > 0.0) {
        return Err(DriftError::Domain(format!(
            "invalid race parameters: fiber {mu_fiber:?}, boundary {b}"
        )));
    }
    let mut times = vec![0.0f64; d0];
    for tries in 1..=retry_cap {
        for (slot, &mu) in times.iter_mut().zip(mu_fiber.iter()) {
            *slot = ig_sample_unchecked(rng, mu, b);
        }
        let w = times[winner];
        if times.iter().all(|&t| w <= t) {
            return Ok((times, tries));
        }
    }
    Err(DriftError::Numerical(format!(
        "latent-time sampler exceeded {retry_cap} proposals for fiber {mu_fiber:?} (winner {winner})"
    )))
}

/// As [`sample_latent_times_counted`], dropping the proposal count.
pub fn sample_latent_times<R: Rng + ?Sized>(
    rng: &mut R,
    mu_fiber: &[f64],
    b: f64,
    winner: usize,
    retry_cap: usize,
) -> Result<Vec<f64>> {
    sample_latent_times_counted(rng, mu_fiber, b, winner, retry_cap).map(|(t, _)| t)
}
