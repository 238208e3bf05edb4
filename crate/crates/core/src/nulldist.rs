//! Limiting null distribution of the bias-corrected distance correlation
//! statistic: marginal eigenvalues, the weight grid, Monte-Carlo sampling of
//! the weighted quadratic form, and the two analytic p-value rules.
//!
//! Under independence the statistic converges to
//! `sum_lm w_lm (Z_lm^2 - 1)` with independent standard normals `Z_lm` and
//! weights `w_lm = l_l m_m / sqrt(sum l^2 sum m^2)` built from the marginal
//! eigenvalue vectors. For a marginal distribution `p` the eigenvalues are
//! those of the symmetric matrix `S = p p^T - diag(p)`, which is similar to
//! the centered-distance limit matrix via `diag(sqrt(p))`; `S` is negative
//! semidefinite with rank I-1 for strictly positive margins.
//!
//! Note `sum_lm w_lm` is generally not 1 (already for uniform 3-category
//! margins it is 2); the mean-zero quadratic form above is the limit law in
//! all cases, while `sum w^2 = 1` always holds, fixing the variance at 2.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::table::MASS_TOL;

/// Round-off clamp: eigenvalues in (-1e-12, 1e-12] are treated as exact zeros.
pub const EIGVAL_CLAMP: f64 = 1e-12;

/// Marginal eigenvalues and the induced weight grid for the limiting
/// quadratic form.
#[derive(Debug, Clone)]
pub struct EigenWeightGrid {
    lambda: Vec<f64>,
    mu: Vec<f64>,
    omega: Vec<Vec<f64>>,
    /// (row index, col index, weight) for the nonzero weights, row-major.
    nonzero: Vec<f64>,
}

impl EigenWeightGrid {
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Full I x J weight grid, including zero rows/columns.
    pub fn omega(&self) -> &[Vec<f64>] {
        &self.omega
    }

    /// `sum_lm w_lm`; reported because it is not 1 in general.
    pub fn weight_sum(&self) -> f64 {
        self.omega.iter().flatten().sum()
    }

    /// `sum_lm w_lm^2`; equals 1 by construction, up to round-off.
    pub fn weight_sq_sum(&self) -> f64 {
        self.omega.iter().flatten().map(|w| w * w).sum()
    }
}

fn validate_margin(margin: &[f64]) -> Result<()> {
    if margin.is_empty() {
        return Err(Error::InvalidInput("marginal distribution is empty".into()));
    }
    if margin.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(Error::InvalidInput(
            "marginal entries must be finite and nonnegative".into(),
        ));
    }
    let s: f64 = margin.iter().sum();
    if (s - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidInput(format!(
            "marginal sums to {}, expected 1",
            s
        )));
    }
    Ok(())
}

/// Eigenvalues of `S = p p^T - diag(p)` for a marginal distribution `p`,
/// sorted ascending, with round-off-sized values clamped to exact zero.
pub fn marginal_eigvals(margin: &[f64]) -> Result<Vec<f64>> {
    validate_margin(margin)?;
    let k = margin.len();
    let m = DMatrix::from_fn(k, k, |i, j| {
        let v = margin[i] * margin[j];
        if i == j {
            v - margin[i]
        } else {
            v
        }
    });
    let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    for v in &mut eig {
        if v.abs() <= EIGVAL_CLAMP {
            *v = 0.0;
        }
    }
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eig)
}

/// Closed form for two categories: `{-2 p1 p2, 0}` ascending.
pub fn marginal_eigvals_closed2(margin: &[f64; 2]) -> Vec<f64> {
    vec![-2.0 * margin[0] * margin[1], 0.0]
}

/// Closed form for three categories:
/// `-(e2) -+ sqrt(p1^2 p2^2 + p1^2 p3^2 + p2^2 p3^2 - p1 p2 p3)` and 0,
/// where `e2 = p1 p2 + p1 p3 + p2 p3`.
pub fn marginal_eigvals_closed3(margin: &[f64; 3]) -> Vec<f64> {
    let [a, b, c] = *margin;
    let e2 = a * b + a * c + b * c;
    let disc = (a * a * b * b + a * a * c * c + b * b * c * c - a * b * c).max(0.0);
    let root = disc.sqrt();
    let mut out = vec![-e2 - root, -e2 + root, 0.0];
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out
}

/// Build the weight grid `w_lm = l_l m_m / sqrt(sum l^2 sum m^2)`.
///
/// Errors when either eigenvalue vector is all zero (a constant variable has
/// no limiting quadratic form).
pub fn weight_grid(lambda: &[f64], mu: &[f64]) -> Result<EigenWeightGrid> {
    let l2: f64 = lambda.iter().map(|v| v * v).sum();
    let m2: f64 = mu.iter().map(|v| v * v).sum();
    if l2 <= 0.0 || m2 <= 0.0 {
        return Err(Error::DegenerateStatistic(
            "all marginal eigenvalues are zero (constant variable)".into(),
        ));
    }
    let norm = (l2 * m2).sqrt();
    let omega: Vec<Vec<f64>> = lambda
        .iter()
        .map(|&l| mu.iter().map(|&m| l * m / norm).collect())
        .collect();
    let nonzero = omega
        .iter()
        .flatten()
        .copied()
        .filter(|w| *w != 0.0)
        .collect();
    Ok(EigenWeightGrid {
        lambda: lambda.to_vec(),
        mu: mu.to_vec(),
        omega,
        nonzero,
    })
}

/// Weight grid from a contingency table's MLE margins.
pub fn weight_grid_from_margins(row: &[f64], col: &[f64]) -> Result<EigenWeightGrid> {
    weight_grid(&marginal_eigvals(row)?, &marginal_eigvals(col)?)
}

/// Draw `draws` realizations of `sum_lm w_lm (Z_lm^2 - 1)`.
///
/// One standard normal is consumed per nonzero weight per draw, in row-major
/// weight order, so the output is deterministic given the generator state.
pub fn sample_null<R: Rng + ?Sized>(grid: &EigenWeightGrid, draws: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut acc = 0.0;
        for &w in &grid.nonzero {
            let z: f64 = rng.sample(StandardNormal);
            acc += w * (z * z - 1.0);
        }
        out.push(acc);
    }
    out
}

/// Monte-Carlo tail probability `P(Q >= t)` for the weighted quadratic form,
/// with the add-one estimator `(1 + #{q >= t}) / (draws + 1)`.
pub fn pvalue_weighted<R: Rng + ?Sized>(
    t: f64,
    grid: &EigenWeightGrid,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if draws < 1000 {
        return Err(Error::InvalidInput(format!(
            "weighted p-value needs at least 1000 draws, got {}",
            draws
        )));
    }
    let sample = sample_null(grid, draws, rng);
    let hits = sample.iter().filter(|&&q| q >= t).count();
    Ok((1 + hits) as f64 / (draws + 1) as f64)
}

/// Tail probability under the `chi2(1) - 1` approximation:
/// `P(chi2_1 > t + 1)`, i.e. 1 for `t <= -1`.
pub fn pvalue_chi1(t: f64) -> f64 {
    if t <= -1.0 {
        return 1.0;
    }
    let chi = ChiSquared::new(1.0).expect("df = 1 is valid");
    (1.0 - chi.cdf(t + 1.0)).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Upper-tail probability of a chi-squared distribution with `df` degrees of
/// freedom, clamped into (0, 1].
pub fn chi2_upper_tail(stat: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::UndefinedTest("zero degrees of freedom".into()));
    }
    let chi = ChiSquared::new(df as f64)
        .map_err(|e| Error::InvalidInput(format!("chi-squared df {}: {}", df, e)))?;
    if stat <= 0.0 {
        return Ok(1.0);
    }
    Ok((1.0 - chi.cdf(stat)).clamp(f64::MIN_POSITIVE, 1.0))
}

/// Quantile of the chi-squared distribution with `df` degrees of freedom.
pub fn chi2_quantile(p: f64, df: usize) -> f64 {
    ChiSquared::new(df as f64)
        .expect("positive df")
        .inverse_cdf(p)
}
