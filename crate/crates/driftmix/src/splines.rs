//! Clamped B-spline basis over the block axis `[1, T]` and the first-order
//! difference penalty.

use nalgebra::{DMatrix, DVector};

use crate::error::{DriftError, Result};

/// A clamped B-spline basis with `k_basis` functions of the given degree on
/// `[1, t_max]`, with equally spaced interior knots. Rows of `block_matrix`
/// are the basis evaluated at the integer blocks `1..=t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    pub degree: usize,
    pub k_basis: usize,
    pub t_max: usize,
    knots: Vec<f64>,
    block_matrix: DMatrix<f64>,
}

/// First-difference penalty `P = DᵀD`, a tridiagonal positive-semidefinite
/// matrix with `P · 1 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    pub p: DMatrix<f64>,
}

/// Build the basis; fails when `k_basis < degree + 1` or `t_max < 2`.
pub fn build_basis(t_max: usize, k_basis: usize, degree: usize) -> Result<SplineBasis> {
    if t_max < 2 {
        return Err(DriftError::Config(format!(
            "need at least 2 blocks, got {t_max}"
        )));
    }
    if k_basis < degree + 1 {
        return Err(DriftError::Config(format!(
            "basis size {k_basis} too small for degree {degree} (need at least degree + 1)"
        )));
    }
    let lo = 1.0;
    let hi = t_max as f64;
    let interior = k_basis - degree - 1;
    let mut knots = Vec::with_capacity(k_basis + degree + 1);
    knots.extend(std::iter::repeat(lo).take(degree + 1));
    for j in 1..=interior {
        knots.push(lo + (hi - lo) * j as f64 / (interior + 1) as f64);
    }
    knots.extend(std::iter::repeat(hi).take(degree + 1));

    let mut basis = SplineBasis {
        degree,
        k_basis,
        t_max,
        knots,
        block_matrix: DMatrix::zeros(t_max, k_basis),
    };
    let mut rows = DMatrix::zeros(t_max, k_basis);
    for t in 1..=t_max {
        let row = basis.eval(t as f64)?;
        rows.row_mut(t - 1).copy_from(&row.transpose());
    }
    basis.block_matrix = rows;

    if k_basis <= t_max {
        let rank = basis.block_matrix.clone().svd(false, false).rank(1e-10);
        if rank < k_basis {
            return Err(DriftError::Config(format!(
                "evaluation matrix over {t_max} blocks is rank deficient ({rank} < {k_basis})"
            )));
        }
    }
    Ok(basis)
}

impl SplineBasis {
    /// Evaluate all basis functions at `t` by the Cox–de Boor recurrence.
    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        let lo = 1.0;
        let hi = self.t_max as f64;
        if !(lo..=hi).contains(&t) {
            return Err(DriftError::Domain(format!(
                "evaluation point {t} outside [{lo}, {hi}]"
            )));
        }
        let p = self.degree;
        let n = self.k_basis;
        let knots = &self.knots;

        // knot span containing t, clamped so the right endpoint belongs to
        // the last non-degenerate interval
        let mut span = p;
        while span < n - 1 && t >= knots[span + 1] {
            span += 1;
        }

        // triangular table of the p+1 nonzero values at this span
        let mut values = vec![0.0; p + 1];
        values[0] = 1.0;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        for j in 1..=p {
            left[j] = t - knots[span + 1 - j];
            right[j] = knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let term = if denom != 0.0 { values[r] / denom } else { 0.0 };
                values[r] = saved + right[r + 1] * term;
                saved = left[j - r] * term;
            }
            values[j] = saved;
        }

        let mut out = DVector::zeros(n);
        for (r, &v) in values.iter().enumerate() {
            let idx = span + 1 + r - (p + 1);
            out[idx] = v;
        }
        Ok(out)
    }

    /// Basis row at an integer block (1-based), precomputed at build time.
    pub fn block_row(&self, block: usize) -> nalgebra::RowDVector<f64> {
        self.block_matrix.row(block - 1).into_owned()
    }

    /// `t_max × k_basis` matrix of basis values at the integer blocks.
    pub fn block_matrix(&self) -> &DMatrix<f64> {
        &self.block_matrix
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
}

/// The `K × K` first-difference penalty.
pub fn penalty_matrix(k_basis: usize) -> Result<PenaltyMatrix> {
    if k_basis < 2 {
        return Err(DriftError::Config(format!(
            "penalty needs at least 2 coefficients, got {k_basis}"
        )));
    }
    let mut d = DMatrix::zeros(k_basis - 1, k_basis);
    for r in 0..k_basis - 1 {
        d[(r, r)] = -1.0;
        d[(r, r + 1)] = 1.0;
    }
    Ok(PenaltyMatrix {
        p: d.transpose() * d,
    })
}
