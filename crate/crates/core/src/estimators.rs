//! Dependence functionals and their estimators.
//!
//! The population functionals are the squared-distance-covariance form
//! `delta = sum (p_ij - p_i. p_.j)^2` and the chi-squared form
//! `eta = sum (p_ij - p_i. p_.j)^2 / (p_i. p_.j)`. Plug-in estimators use the
//! MLE pmf; the unbiased estimators `delta_tilde` and `omega_tilde` are
//! fourth-order U-statistics under the 0/1 metric, computed here from count
//! reductions of the pairwise-distance sums rather than expanded polynomial
//! forms (the reductions are exact in integer arithmetic and are checked
//! against literal pairwise/triple loops in the test suite).

use crate::error::{Error, Result};
use crate::table::{ContingencyTable, JointPMF};

/// The three raw sums entering a fourth-order U-statistic combination.
///
/// For the pair (X, Y): `t1 = sum_{l,m} d(X_l,X_m) d(Y_l,Y_m)`,
/// `t2 = sum_l (sum_m d(X_l,X_m)) (sum_m d(Y_l,Y_m))`, and
/// `t3 = (sum d(X_l,X_m)) (sum d(Y_l,Y_m))` with the 0/1 metric `d`.
/// For a single variable, Y is replaced by X and `t3` is the square of the
/// total pair distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UStatComponents {
    pub t1: u128,
    pub t2: u128,
    pub t3: u128,
}

impl UStatComponents {
    /// Combine into `t1/(n(n-3)) - 2 t2/(n(n-2)(n-3)) + t3/(n(n-1)(n-2)(n-3))`.
    fn combine(&self, n: u64) -> f64 {
        let n = n as f64;
        self.t1 as f64 / (n * (n - 3.0)) - 2.0 * self.t2 as f64 / (n * (n - 2.0) * (n - 3.0))
            + self.t3 as f64 / (n * (n - 1.0) * (n - 2.0) * (n - 3.0))
    }
}

/// Population squared distance covariance: `sum (p_ij - p_i. p_.j)^2`.
///
/// Nonnegative, and zero exactly when the pmf factorizes into its margins.
pub fn delta_pop(pmf: &JointPMF) -> f64 {
    let mut acc = 0.0;
    for i in 0..pmf.rows() {
        for j in 0..pmf.cols() {
            let r = pmf.prob(i, j) - pmf.row_margins()[i] * pmf.col_margins()[j];
            acc += r * r;
        }
    }
    acc
}

/// Population chi-squared functional: `sum (p_ij - p_i. p_.j)^2 / (p_i. p_.j)`.
///
/// Cells whose margin product is zero contribute nothing (a valid pmf has
/// `p_ij = 0` there).
pub fn eta_pop(pmf: &JointPMF) -> f64 {
    let mut acc = 0.0;
    for i in 0..pmf.rows() {
        for j in 0..pmf.cols() {
            let e = pmf.row_margins()[i] * pmf.col_margins()[j];
            if e > 0.0 {
                let r = pmf.prob(i, j) - e;
                acc += r * r / e;
            }
        }
    }
    acc
}

/// Plug-in estimate of the squared distance covariance: `delta_pop` of the MLE pmf.
pub fn delta_hat(table: &ContingencyTable) -> Result<f64> {
    Ok(delta_pop(&table.mle_pmf()?))
}

/// Pearson's chi-squared statistic in functional and scaled form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonChi2 {
    /// The plug-in functional value.
    pub eta_hat: f64,
    /// `n * eta_hat`, the classical test statistic.
    pub scaled: f64,
    /// Degrees of freedom `(I'-1)(J'-1)` counting nonempty rows and columns.
    pub df: usize,
}

/// Pearson's chi-squared statistic; empty rows and columns contribute nothing
/// and reduce the degrees of freedom.
pub fn pearson_chi2(table: &ContingencyTable) -> Result<PearsonChi2> {
    let pmf = table.mle_pmf()?;
    let eta_hat = eta_pop(&pmf);
    let nonempty_rows = table.row_margins().iter().filter(|&&m| m > 0).count();
    let nonempty_cols = table.col_margins().iter().filter(|&&m| m > 0).count();
    let df = nonempty_rows.saturating_sub(1) * nonempty_cols.saturating_sub(1);
    Ok(PearsonChi2 {
        eta_hat,
        scaled: table.total() as f64 * eta_hat,
        df,
    })
}

/// Likelihood-ratio statistic `g = 2 sum p_ij log(p_ij / (p_i. p_.j))` on the
/// MLE pmf; empty cells contribute nothing.
pub fn lrt_g(table: &ContingencyTable) -> Result<f64> {
    let pmf = table.mle_pmf()?;
    let mut acc = 0.0;
    for i in 0..pmf.rows() {
        for j in 0..pmf.cols() {
            let p = pmf.prob(i, j);
            if p > 0.0 {
                let e = pmf.row_margins()[i] * pmf.col_margins()[j];
                acc += p * (p / e).ln();
            }
        }
    }
    Ok(2.0 * acc)
}

/// Pairwise-sum components for the pair (X, Y), reduced to count form:
///
/// ```text
/// t1 = n^2 - sum_i r_i^2 - sum_j c_j^2 + sum_ij n_ij^2
/// t2 = sum_ij n_ij (n - r_i)(n - c_j)
/// t3 = (n^2 - sum_i r_i^2)(n^2 - sum_j c_j^2)
/// ```
pub fn ustat_components_xy(table: &ContingencyTable) -> UStatComponents {
    let n = table.total() as u128;
    let sum_r2: u128 = table.row_margins().iter().map(|&r| (r as u128) * (r as u128)).sum();
    let sum_c2: u128 = table.col_margins().iter().map(|&c| (c as u128) * (c as u128)).sum();
    let mut sum_n2 = 0u128;
    let mut t2 = 0u128;
    for i in 0..table.rows() {
        for j in 0..table.cols() {
            let nij = table.count(i, j) as u128;
            sum_n2 += nij * nij;
            let ri = table.row_margins()[i] as u128;
            let cj = table.col_margins()[j] as u128;
            t2 += nij * (n - ri) * (n - cj);
        }
    }
    UStatComponents {
        // additions first: the intermediate n^2 - sum_r2 - sum_c2 can go
        // negative even though t1 itself is a pair count
        t1: n * n + sum_n2 - sum_r2 - sum_c2,
        t2,
        t3: (n * n - sum_r2) * (n * n - sum_c2),
    }
}

/// Single-variable components from marginal counts:
///
/// ```text
/// t1 = n^2 - sum_i m_i^2
/// t2 = sum_i m_i (n - m_i)^2
/// t3 = (n^2 - sum_i m_i^2)^2
/// ```
pub fn ustat_components_single(margin_counts: &[u64], n: u64) -> UStatComponents {
    let n = n as u128;
    let sum_m2: u128 = margin_counts.iter().map(|&m| (m as u128) * (m as u128)).sum();
    let t2: u128 = margin_counts
        .iter()
        .map(|&m| {
            let m = m as u128;
            m * (n - m) * (n - m)
        })
        .sum();
    let pair_total = n * n - sum_m2;
    UStatComponents {
        t1: pair_total,
        t2,
        t3: pair_total * pair_total,
    }
}

fn require_n4(n: u64) -> Result<()> {
    if n < 4 {
        return Err(Error::InsufficientSample {
            needed: 4,
            got: n as usize,
        });
    }
    Ok(())
}

/// Unbiased estimate of the squared distance covariance (may be negative).
pub fn delta_tilde(table: &ContingencyTable) -> Result<f64> {
    require_n4(table.total())?;
    Ok(ustat_components_xy(table).combine(table.total()))
}

/// Unbiased estimate of the squared distance variance of one categorical
/// variable, from its marginal counts. Zero for a constant variable; not
/// guaranteed nonnegative for every sample.
pub fn omega_tilde(margin_counts: &[u64], n: u64) -> Result<f64> {
    require_n4(n)?;
    let total: u64 = margin_counts.iter().sum();
    if total != n {
        return Err(Error::InvalidInput(format!(
            "margin counts sum to {}, expected n = {}",
            total, n
        )));
    }
    Ok(ustat_components_single(margin_counts, n).combine(n))
}

/// Bias-corrected distance correlation statistic
/// `n * delta_tilde / sqrt(omega_tilde(X) * omega_tilde(Y))`.
///
/// Errors when either variance estimate is not strictly positive (constant
/// variables, or the rare small-sample margins that zero the U-statistic).
pub fn bcdcor_stat(table: &ContingencyTable) -> Result<f64> {
    let n = table.total();
    let dt = delta_tilde(table)?;
    let ox = omega_tilde(table.row_margins(), n)?;
    let oy = omega_tilde(table.col_margins(), n)?;
    if ox <= 0.0 || oy <= 0.0 {
        return Err(Error::DegenerateStatistic(format!(
            "variance estimates must be positive, got ({}, {})",
            ox, oy
        )));
    }
    Ok(n as f64 * dt / (ox * oy).sqrt())
}
