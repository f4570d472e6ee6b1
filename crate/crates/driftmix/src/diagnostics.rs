//! Convergence diagnostics and clustering-quality indices.

use crate::error::{DriftError, Result};
use crate::numeric::norm_cdf;
use crate::sampler::PosteriorSamples;

/// A partition of objects given as a cluster id per object; ids need not be
/// contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub labels: Vec<usize>,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(DriftError::Domain("partition over zero objects".into()));
        }
        Ok(Partition { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Result of the Geweke stationarity test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GewekeResult {
    pub z: f64,
    pub p: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Variance of the window mean via the spectral density at frequency zero
/// (Bartlett lag window); falls back to batch means on short windows.
fn mean_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    let m = mean(xs);
    if n >= 100 {
        let lags = (n as f64).sqrt().floor() as usize;
        let mut s = 0.0;
        for lag in 0..=lags {
            let mut gamma = 0.0;
            for t in 0..n - lag {
                gamma += (xs[t] - m) * (xs[t + lag] - m);
            }
            gamma /= n as f64;
            if lag == 0 {
                s += gamma;
            } else {
                s += 2.0 * (1.0 - lag as f64 / (lags + 1) as f64) * gamma;
            }
        }
        if s > 0.0 {
            return s / n as f64;
        }
        // a negative spectral estimate can happen on pathological windows
    }
    let batches = ((n as f64).sqrt().floor() as usize).clamp(2, 30);
    let size = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| mean(&xs[b * size..(b + 1) * size]))
        .collect();
    let bm = mean(&means);
    let var = means.iter().map(|x| (x - bm) * (x - bm)).sum::<f64>() / (batches - 1) as f64;
    var / batches as f64
}

/// Geweke's two-window stationarity z-score: compare the mean of the first
/// `frac_a` of the chain against the last `frac_b`, using spectral estimates
/// of each window mean's variance.
pub fn geweke(chain: &[f64], frac_a: f64, frac_b: f64) -> Result<GewekeResult> {
    let n = chain.len();
    if n < 20 {
        return Err(DriftError::Domain(format!(
            "Geweke needs at least 20 samples, got {n}"
        )));
    }
    if !(frac_a > 0.0) || !(frac_b > 0.0) || frac_a + frac_b > 1.0 {
        return Err(DriftError::Domain(format!(
            "window fractions must be positive with sum at most 1, got {frac_a} and {frac_b}"
        )));
    }
    let na = ((n as f64 * frac_a).floor() as usize).max(2);
    let nb = ((n as f64 * frac_b).floor() as usize).max(2);
    let a = &chain[..na];
    let b = &chain[n - nb..];
    let var = mean_variance(a) + mean_variance(b);
    if var <= 0.0 || !var.is_finite() {
        return Err(DriftError::Numerical(
            "Geweke statistic undefined: zero-variance chain".into(),
        ));
    }
    let z = (mean(a) - mean(b)) / var.sqrt();
    let p = 2.0 * (1.0 - norm_cdf(z.abs()));
    Ok(GewekeResult { z, p })
}

/// Default Geweke windows: first 10% against last 50%.
pub fn geweke_default(chain: &[f64]) -> Result<GewekeResult> {
    geweke(chain, 0.1, 0.5)
}

/// Sample autocorrelations up to `max_lag`; entry 0 is 1.
pub fn autocorrelation(chain: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = chain.len();
    if max_lag >= n {
        return Err(DriftError::Domain(format!(
            "max_lag {max_lag} must be below the chain length {n}"
        )));
    }
    let m = mean(chain);
    let gamma0: f64 = chain.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if gamma0 <= 0.0 {
        return Err(DriftError::Numerical("autocorrelation of a constant chain".into()));
    }
    let mut acf = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let mut g = 0.0;
        for t in 0..n - lag {
            g += (chain[t] - m) * (chain[t + lag] - m);
        }
        acf.push(g / n as f64 / gamma0);
    }
    Ok(acf)
}

/// Effective-sample-size proxy `n / (1 + 2 Σ ρ_k)`, truncating the
/// autocorrelation sum when it drops below 0.05.
pub fn ess_proxy(chain: &[f64], max_lag: usize) -> Result<f64> {
    let acf = autocorrelation(chain, max_lag.min(chain.len().saturating_sub(1)))?;
    let mut s = 0.0;
    for &rho in acf.iter().skip(1) {
        if rho < 0.05 {
            break;
        }
        s += rho;
    }
    Ok(chain.len() as f64 / (1.0 + 2.0 * s))
}

fn contingency(u: &Partition, v: &Partition) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    if u.len() != v.len() {
        return Err(DriftError::Domain(format!(
            "partitions compare {} vs {} objects",
            u.len(),
            v.len()
        )));
    }
    let relabel = |labels: &[usize]| -> Vec<usize> {
        let mut map = std::collections::HashMap::new();
        labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect()
    };
    let lu = relabel(&u.labels);
    let lv = relabel(&v.labels);
    let r = lu.iter().max().unwrap() + 1;
    let c = lv.iter().max().unwrap() + 1;
    let mut table = vec![vec![0.0; c]; r];
    for (&a, &b) in lu.iter().zip(lv.iter()) {
        table[a][b] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
    let cols: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    Ok((table, rows, cols))
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Rand index: the fraction of object pairs on which the two partitions
/// agree (both together or both apart).
pub fn rand_index(u: &Partition, v: &Partition) -> Result<f64> {
    let (table, rows, cols) = contingency(u, v)?;
    let n = u.len() as f64;
    let pairs = choose2(n);
    if pairs == 0.0 {
        return Ok(1.0);
    }
    let together: f64 = table.iter().flatten().map(|&x| choose2(x)).sum();
    let same_u: f64 = rows.iter().map(|&x| choose2(x)).sum();
    let same_v: f64 = cols.iter().map(|&x| choose2(x)).sum();
    let apart = pairs - same_u - same_v + together;
    Ok((together + apart) / pairs)
}

/// Adjusted Rand index via the contingency-table formula. When the formula
/// degenerates to 0/0 (both partitions trivial in the same way), this returns
/// 1 if the partitions are identical up to relabeling and 0 otherwise.
pub fn adjusted_rand_index(u: &Partition, v: &Partition) -> Result<f64> {
    let (table, rows, cols) = contingency(u, v)?;
    let n = u.len() as f64;
    let pairs = choose2(n);
    let together: f64 = table.iter().flatten().map(|&x| choose2(x)).sum();
    let same_u: f64 = rows.iter().map(|&x| choose2(x)).sum();
    let same_v: f64 = cols.iter().map(|&x| choose2(x)).sum();
    let denom = 0.5 * (same_u + same_v) - same_u * same_v / pairs.max(1.0);
    if denom == 0.0 || pairs == 0.0 {
        let equal = rand_index(u, v)? == 1.0;
        return Ok(if equal { 1.0 } else { 0.0 });
    }
    Ok((together - same_u * same_v / pairs) / denom)
}

/// Posterior co-clustering matrix: entry `(x, x')` is the fraction of stored
/// draws in which the two combinations share a label.
pub fn coclustering_matrix(samples: &PosteriorSamples) -> Result<Vec<Vec<f64>>> {
    if samples.draws.is_empty() {
        return Err(DriftError::Domain("no stored draws".into()));
    }
    let x_max = samples.x_max();
    let mut matrix = vec![vec![0.0; x_max]; x_max];
    for draw in &samples.draws {
        for a in 0..x_max {
            for b in 0..x_max {
                if draw.labels[a] == draw.labels[b] {
                    matrix[a][b] += 1.0;
                }
            }
        }
    }
    let total = samples.draws.len() as f64;
    for row in &mut matrix {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(matrix)
}

/// Chains tracked by the `diagnose` command: the population-averaged
/// projected drift of every `(d, s, t)` cell plus the six variance
/// components, pulled from the stored draws.
pub fn tracked_chains(samples: &PosteriorSamples) -> Vec<(String, Vec<f64>)> {
    let (d0, n, t_blocks) = (samples.meta.d0, samples.meta.n, samples.meta.t_blocks);
    let mut chains = Vec::new();
    for d in 0..d0 {
        for s in 0..d0 {
            for t in 0..t_blocks {
                let series: Vec<f64> = samples
                    .draws
                    .iter()
                    .map(|draw| {
                        (0..n).map(|i| draw.drift.get(d, s, i, t)).sum::<f64>() / n as f64
                    })
                    .collect();
                chains.push((format!("drift[d={},s={},t={}]", d + 1, s + 1, t + 1), series));
            }
        }
    }
    let vars: [(&str, fn(&crate::sampler::Variances) -> f64); 6] = [
        ("sigma_a2", |v| v.sigma_a2),
        ("sigma_s2", |v| v.sigma_s2),
        ("sigma_c_a2", |v| v.sigma_c_a2),
        ("sigma_c_s2", |v| v.sigma_c_s2),
        ("sigma_i_a2", |v| v.sigma_i_a2),
        ("sigma_i_s2", |v| v.sigma_i_s2),
    ];
    for (name, pick) in vars {
        chains.push((
            name.to_string(),
            samples.draws.iter().map(|draw| pick(&draw.variances)).collect(),
        ));
    }
    chains
}

/// Point-estimate partition: the stored draw whose co-clustering indicator is
/// closest (least squares) to the posterior co-clustering matrix.
pub fn point_partition(samples: &PosteriorSamples) -> Result<Partition> {
    let matrix = coclustering_matrix(samples)?;
    let x_max = samples.x_max();
    let mut best: Option<(f64, &Vec<usize>)> = None;
    for draw in &samples.draws {
        let mut dist = 0.0;
        for a in 0..x_max {
            for b in 0..x_max {
                let ind = if draw.labels[a] == draw.labels[b] { 1.0 } else { 0.0 };
                let d = ind - matrix[a][b];
                dist += d * d;
            }
        }
        match best {
            Some((d, _)) if d <= dist => {}
            _ => best = Some((dist, &draw.labels)),
        }
    }
    Partition::new(best.expect("nonempty draws").1.clone())
}
