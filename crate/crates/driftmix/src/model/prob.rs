//! Inverse-probit category probabilities: the probability of choosing
//! category `d` is the probability that its latent first-passage time wins
//! the race against every other category.

use std::collections::BTreeMap;

use rand::Rng;

use crate::dists::{ig_pdf_unchecked, ig_sample_unchecked, ig_survival_unchecked};
use crate::error::{DriftError, Result};
use crate::model::data::Dataset;
use crate::model::effects::Field4;
use crate::numeric::integrate_density;

fn check_fiber(mu_fiber: &[f64], b: f64) -> Result<()> {
    if mu_fiber.len() < 2 {
        return Err(DriftError::Domain("need at least 2 categories in a fiber".into()));
    }
    if mu_fiber.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
        return Err(DriftError::Domain(format!("drift fiber must be positive, got {mu_fiber:?}")));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(DriftError::Domain(format!("boundary must be positive, got {b}")));
    }
    Ok(())
}

/// Monte Carlo estimate: fraction of `m` simulated races each category wins.
/// Components sum to 1 exactly.
pub fn category_prob_mc<R: Rng + ?Sized>(
    rng: &mut R,
    mu_fiber: &[f64],
    b: f64,
    m: usize,
) -> Result<Vec<f64>> {
    check_fiber(mu_fiber, b)?;
    if m == 0 {
        return Err(DriftError::Config("need at least one race simulation".into()));
    }
    let d0 = mu_fiber.len();
    let mut wins = vec![0u64; d0];
    for _ in 0..m {
        let mut best = 0usize;
        let mut best_t = f64::INFINITY;
        for (d, &mu) in mu_fiber.iter().enumerate() {
            let t = ig_sample_unchecked(rng, mu, b);
            if t < best_t {
                best_t = t;
                best = d;
            }
        }
        wins[best] += 1;
    }
    Ok(wins.iter().map(|&w| w as f64 / m as f64).collect())
}

/// Upper truncation point: beyond it the fastest racer has survival below
/// `tail`, which bounds the truncation error of every component's integral.
fn race_upper_bound(mu_fiber: &[f64], b: f64, tail: f64) -> f64 {
    let mu_max = mu_fiber.iter().cloned().fold(f64::MIN, f64::max);
    let mut hi = (b / mu_max).max(b * b);
    while ig_survival_unchecked(hi, mu_max, b) > tail {
        hi *= 2.0;
    }
    hi
}

/// Quadrature evaluation of the race integral, one 1-D integral per
/// component. Intended as the d0 ≤ 4 testing oracle; errors if the computed
/// components fail to sum to 1 within 1e-6.
pub fn category_prob_quad(mu_fiber: &[f64], b: f64) -> Result<Vec<f64>> {
    check_fiber(mu_fiber, b)?;
    let d0 = mu_fiber.len();
    let hi = race_upper_bound(mu_fiber, b, 1e-14);
    let mu_max = mu_fiber.iter().cloned().fold(f64::MIN, f64::max);
    let scale = b / mu_max;
    let mut probs = Vec::with_capacity(d0);
    for d in 0..d0 {
        let p = integrate_density(
            |tau| {
                if tau <= 0.0 {
                    return 0.0;
                }
                let mut v = ig_pdf_unchecked(tau, mu_fiber[d], b);
                for (dd, &mu) in mu_fiber.iter().enumerate() {
                    if dd != d {
                        v *= ig_survival_unchecked(tau, mu, b);
                    }
                }
                v
            },
            scale,
            hi,
            2e-10,
        )
        .map_err(|e| {
            DriftError::Numerical(format!("race integral for component {d} failed: {e}"))
        })?;
        probs.push(p.clamp(0.0, 1.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(DriftError::Numerical(format!(
            "race integrals sum to {total}, expected 1 within 1e-6 (fiber {mu_fiber:?})"
        )));
    }
    Ok(probs)
}

/// Monte Carlo log likelihood of the observed responses under a drift field.
/// Probabilities are estimated once per `(s, i, t)` cell (in a fixed cell
/// order, so trial order cannot matter) and floored at `1/(m+1)`.
pub fn loglik<R: Rng + ?Sized>(
    ds: &Dataset,
    field: &Field4,
    b: f64,
    m: usize,
    rng: &mut R,
) -> Result<f64> {
    if ds.records().is_empty() {
        return Err(DriftError::Domain("dataset has no trials".into()));
    }
    if field.d0 != ds.d0 || field.n < ds.n || field.t_blocks < ds.t_blocks {
        return Err(DriftError::Config(format!(
            "drift field ({}, {}, {}) does not cover dataset ({}, {}, {})",
            field.d0, field.n, field.t_blocks, ds.d0, ds.n, ds.t_blocks
        )));
    }
    // response counts per (s, i, t) cell
    let mut counts: BTreeMap<(usize, usize, usize), Vec<u64>> = BTreeMap::new();
    for r in ds.records() {
        let cell = (
            r.stimulus as usize - 1,
            r.subject as usize - 1,
            r.block as usize - 1,
        );
        counts.entry(cell).or_insert_with(|| vec![0; ds.d0])[r.response as usize - 1] += 1;
    }
    let floor = 1.0 / (m as f64 + 1.0);
    let mut total = 0.0;
    for ((s, i, t), by_response) in counts {
        let probs = category_prob_mc(rng, field.fiber(s, i, t), b, m)?;
        for (d, &c) in by_response.iter().enumerate() {
            if c > 0 {
                total += c as f64 * probs[d].max(floor).ln();
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::data::TrialRecord;
    use crate::projection::{project, SimplexSpec};
    use crate::rng::{substream, StreamTag};
    use rand::seq::SliceRandom;
    use rand::Rng;

    #[test]
    fn equal_drifts_are_symmetric_mc() {
        let mut rng = substream(1, StreamTag::Init, &[20]);
        let p = category_prob_mc(&mut rng, &[1.0; 4], 2.0, 2000).unwrap();
        let se = (0.25f64 * 0.75 / 2000.0).sqrt();
        for &v in &p {
            assert!((v - 0.25).abs() < 3.0 * se, "{p:?}");
        }
        assert_eq!(p.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn equal_drifts_are_symmetric_quad() {
        let p = category_prob_quad(&[1.3; 3], 2.0).unwrap();
        for &v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-6, "{p:?}");
        }
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mc_agrees_with_quadrature_two_categories() {
        let mut rng = substream(2, StreamTag::Init, &[21]);
        let mc = category_prob_mc(&mut rng, &[2.0, 1.0], 2.0, 100_000).unwrap();
        let quad = category_prob_quad(&[2.0, 1.0], 2.0).unwrap();
        assert!((mc[0] - quad[0]).abs() < 0.01, "{mc:?} vs {quad:?}");
    }

    #[test]
    fn mc_agrees_with_quadrature_random_fibers_large_m() {
        let mut rng = substream(3, StreamTag::Init, &[22]);
        for _ in 0..3 {
            let fiber: Vec<f64> = (0..4).map(|_| 0.3 + 3.0 * rng.random::<f64>()).collect();
            let quad = category_prob_quad(&fiber, 2.0).unwrap();
            let mc = category_prob_mc(&mut rng, &fiber, 2.0, 1_000_000).unwrap();
            for d in 0..4 {
                assert!((mc[d] - quad[d]).abs() < 0.003, "{mc:?} vs {quad:?}");
            }
        }
    }

    #[test]
    fn scale_invariance_of_drift_and_boundary() {
        let mut rng = substream(4, StreamTag::Init, &[23]);
        for _ in 0..5 {
            let fiber: Vec<f64> = (0..3).map(|_| 0.2 + 4.0 * rng.random::<f64>()).collect();
            let base = category_prob_quad(&fiber, 2.0).unwrap();
            for c in [0.5, 2.0] {
                let scaled: Vec<f64> = fiber.iter().map(|m| c * m).collect();
                let probs = category_prob_quad(&scaled, 2.0 / c).unwrap();
                for d in 0..3 {
                    assert!((probs[d] - base[d]).abs() < 1e-6, "c = {c}: {probs:?} vs {base:?}");
                }
            }
        }
    }

    #[test]
    fn probability_map_is_injective_on_the_constraint_set() {
        let spec = SimplexSpec::new(4.0, 0.0, 4).unwrap();
        let mut rng = substream(5, StreamTag::Init, &[24]);
        let mut checked = 0;
        while checked < 100 {
            let a: Vec<f64> = (0..4).map(|_| 0.05 + 3.0 * rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..4).map(|_| 0.05 + 3.0 * rng.random::<f64>()).collect();
            let pa = project(&a, &spec).unwrap();
            let pb = project(&b, &spec).unwrap();
            let linf = pa
                .iter()
                .zip(&pb)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max);
            if linf < 0.05 || pa.iter().chain(pb.iter()).any(|&w| w <= 0.0) {
                continue;
            }
            let qa = category_prob_quad(&pa, 2.0).unwrap();
            let qb = category_prob_quad(&pb, 2.0).unwrap();
            let pdist = qa
                .iter()
                .zip(&qb)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max);
            assert!(pdist >= 1e-4, "fibers {pa:?} / {pb:?} gave probs {qa:?} / {qb:?}");
            checked += 1;
        }
    }

    #[test]
    fn raising_a_drift_raises_its_win_probability() {
        let base = category_prob_quad(&[1.0, 1.5, 0.7], 2.0).unwrap();
        let bumped = category_prob_quad(&[1.4, 1.5, 0.7], 2.0).unwrap();
        assert!(bumped[0] > base[0] + 1e-4);
    }

    #[test]
    fn invalid_inputs_error() {
        let mut rng = substream(6, StreamTag::Init, &[25]);
        assert!(category_prob_mc(&mut rng, &[1.0, -1.0], 2.0, 10).is_err());
        assert!(category_prob_mc(&mut rng, &[1.0, 1.0], 2.0, 0).is_err());
        assert!(category_prob_quad(&[0.0, 1.0], 2.0).is_err());
    }

    fn single_cell_dataset(d0: usize, responses: &[u32]) -> Dataset {
        let records: Vec<TrialRecord> = responses
            .iter()
            .enumerate()
            .map(|(idx, &resp)| TrialRecord {
                subject: 1,
                block: 1,
                trial: idx as u32 + 1,
                stimulus: 1,
                response: resp,
            })
            .collect();
        Dataset::new(records, Some(d0)).unwrap()
    }

    fn flat_field(d0: usize, values: &[f64]) -> Field4 {
        let mut field = Field4::zeros(d0, 1, 1);
        for (d, &v) in values.iter().enumerate() {
            field.set(d, 0, 0, 0, v);
        }
        field
    }

    #[test]
    fn single_symmetric_trial_has_log_quarter_likelihood() {
        let ds = single_cell_dataset(4, &[3]);
        let field = flat_field(4, &[1.0; 4]);
        let mut rng = substream(7, StreamTag::Init, &[26]);
        let ll = loglik(&ds, &field, 2.0, 100_000, &mut rng).unwrap();
        assert!((ll - 0.25f64.ln()).abs() < 0.02, "ll = {ll}");
    }

    #[test]
    fn loglik_ignores_trial_order() {
        let mut responses: Vec<u32> = (0..40).map(|i| 1 + (i % 2) as u32).collect();
        let ds1 = single_cell_dataset(2, &responses);
        let mut shuffle_rng = substream(8, StreamTag::Init, &[27]);
        responses.shuffle(&mut shuffle_rng);
        // reassign trial ids so keys stay unique after the shuffle
        let ds2 = single_cell_dataset(2, &responses);
        let field = flat_field(2, &[1.7, 0.9]);
        let ll1 = loglik(&ds1, &field, 2.0, 50_000, &mut substream(9, StreamTag::Init, &[28])).unwrap();
        let ll2 = loglik(&ds2, &field, 2.0, 50_000, &mut substream(9, StreamTag::Init, &[28])).unwrap();
        assert_eq!(ll1, ll2);
    }

    #[test]
    fn loglik_matches_quadrature_for_two_categories() {
        let responses: Vec<u32> = (0..60).map(|i| if i % 3 == 0 { 2 } else { 1 }).collect();
        let ds = single_cell_dataset(2, &responses);
        let field = flat_field(2, &[2.0, 1.0]);
        let mut rng = substream(10, StreamTag::Init, &[29]);
        let ll = loglik(&ds, &field, 2.0, 200_000, &mut rng).unwrap();
        let q = category_prob_quad(&[2.0, 1.0], 2.0).unwrap();
        let exact: f64 = 40.0 * q[0].ln() + 20.0 * q[1].ln();
        assert!((ll - exact).abs() / 60.0 < 0.01, "ll={ll} exact={exact}");
    }
}
