//! Influence functions of the population dependence functionals.
//!
//! The influence function at a contamination point (x, y) is the one-sided
//! derivative of the functional along `(1-eps) pmf + eps point_mass(x,y)` at
//! `eps = 0`. Closed forms below are obtained by differentiating cell by
//! cell; each is verified against the finite-difference quotient
//! [`gateaux_fd`] in the test suites, which is the independent oracle for
//! this module.
//!
//! Writing `R_ij = p_ij - p_i. p_.j` and `P_ij = p_i. p_.j`, the
//! distance-covariance functional has influence
//!
//! ```text
//! IF_dcov(x, y) = 2 sum_ij R_ij (2 P_ij - p_ij)
//!               - 2 sum_j p_.j R_xj - 2 sum_i p_i. R_iy + 2 R_xy
//! ```
//!
//! and the chi-squared functional, at strictly positive margins,
//!
//! ```text
//! IF_chisq(x, y) = sum_{i/=x, j/=y} 2 R_ij
//!                + sum_{j/=y} [ -p_xj^2/(p_x.^2 p_.j) + 2 p_xj + p_.j - 2 p_x. p_.j ]
//!                + sum_{i/=x} [ -p_iy^2/(p_i. p_.y^2) + 2 p_iy + p_i. - 2 p_i. p_.y ]
//!                - p_xy^2/(p_x. p_.y^2) - p_xy^2/(p_x.^2 p_.y) + 2 p_xy/(p_x. p_.y)
//!                + 2 p_xy + p_x. + p_.y - 2 p_x. p_.y - 2
//! ```
//!
//! The chi-squared influence is unbounded as margins vanish (the
//! `2 p_xy/(p_x. p_.y)` term); the distance-covariance influence is bounded
//! by 11 for every pmf and every table size.

use crate::error::{Error, Result};
use crate::estimators::{delta_pop, eta_pop};
use crate::table::JointPMF;

/// Which population functional to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// Squared distance covariance.
    Dcov,
    /// Pearson's chi-squared functional.
    ChiSq,
}

/// Influence values over every contamination point, with the sup norm.
#[derive(Debug, Clone)]
pub struct InfluenceSurface {
    /// `values[x-1][y-1]` is the influence at contamination point (x, y).
    /// Singular points hold `f64::INFINITY`.
    pub values: Vec<Vec<f64>>,
    /// Supremum of absolute influence over the grid; infinite when any point
    /// is singular.
    pub gamma: f64,
}

fn check_point(pmf: &JointPMF, x: usize, y: usize) {
    assert!(
        (1..=pmf.rows()).contains(&x) && (1..=pmf.cols()).contains(&y),
        "contamination point ({}, {}) outside 1..={} x 1..={}",
        x,
        y,
        pmf.rows(),
        pmf.cols()
    );
}

/// Influence function of the squared distance covariance at (x, y), 1-based.
pub fn if_delta(pmf: &JointPMF, x: usize, y: usize) -> f64 {
    let parts = if_delta_parts(pmf, x, y);
    parts.iter().sum()
}

/// The four summands of [`if_delta`]: shared grid term, row-x term, column-y
/// term, point term.
pub fn if_delta_parts(pmf: &JointPMF, x: usize, y: usize) -> [f64; 4] {
    check_point(pmf, x, y);
    let (xi, yi) = (x - 1, y - 1);
    let rm = pmf.row_margins();
    let cm = pmf.col_margins();

    let mut shared = 0.0;
    for i in 0..pmf.rows() {
        for j in 0..pmf.cols() {
            let p = pmf.prob(i, j);
            let e = rm[i] * cm[j];
            shared += (p - e) * (2.0 * e - p);
        }
    }
    let row_term: f64 = (0..pmf.cols())
        .map(|j| cm[j] * (pmf.prob(xi, j) - rm[xi] * cm[j]))
        .sum();
    let col_term: f64 = (0..pmf.rows())
        .map(|i| rm[i] * (pmf.prob(i, yi) - rm[i] * cm[yi]))
        .sum();
    let point = pmf.prob(xi, yi) - rm[xi] * cm[yi];

    [2.0 * shared, -2.0 * row_term, -2.0 * col_term, 2.0 * point]
}

/// The four summands of [`if_eta`]: complement-block sum, row-x sum,
/// column-y sum, and the point term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaInfluenceParts {
    pub complement_sum: f64,
    pub row_sum: f64,
    pub col_sum: f64,
    pub point: f64,
}

impl EtaInfluenceParts {
    pub fn total(&self) -> f64 {
        self.complement_sum + self.row_sum + self.col_sum + self.point
    }
}

fn b_term(pxj: f64, px: f64, pj: f64) -> f64 {
    -pxj * pxj / (px * px * pj) + 2.0 * pxj + pj - 2.0 * px * pj
}

fn c_term(piy: f64, pi: f64, py: f64) -> f64 {
    -piy * piy / (pi * py * py) + 2.0 * piy + pi - 2.0 * pi * py
}

fn d_term(pxy: f64, px: f64, py: f64) -> f64 {
    -pxy * pxy / (px * py * py) - pxy * pxy / (px * px * py) + 2.0 * pxy / (px * py)
        + 2.0 * pxy
        + px
        + py
        - 2.0 * px * py
        - 2.0
}

fn eta_margins_ok(pmf: &JointPMF) -> bool {
    pmf.row_margins().iter().all(|&m| m > 0.0) && pmf.col_margins().iter().all(|&m| m > 0.0)
}

/// Influence function of the chi-squared functional at (x, y), 1-based.
///
/// Requires every row and column margin to be strictly positive; a zero
/// margin makes the derivative singular and is reported as an error rather
/// than a NaN.
pub fn if_eta(pmf: &JointPMF, x: usize, y: usize) -> Result<f64> {
    Ok(if_eta_parts(pmf, x, y)?.total())
}

/// Componentwise version of [`if_eta`].
pub fn if_eta_parts(pmf: &JointPMF, x: usize, y: usize) -> Result<EtaInfluenceParts> {
    check_point(pmf, x, y);
    if !eta_margins_ok(pmf) {
        return Err(Error::SingularInfluence { x, y });
    }
    let (xi, yi) = (x - 1, y - 1);
    let rm = pmf.row_margins();
    let cm = pmf.col_margins();

    let mut complement_sum = 0.0;
    for i in 0..pmf.rows() {
        if i == xi {
            continue;
        }
        for j in 0..pmf.cols() {
            if j == yi {
                continue;
            }
            complement_sum += 2.0 * (pmf.prob(i, j) - rm[i] * cm[j]);
        }
    }
    let row_sum: f64 = (0..pmf.cols())
        .filter(|&j| j != yi)
        .map(|j| b_term(pmf.prob(xi, j), rm[xi], cm[j]))
        .sum();
    let col_sum: f64 = (0..pmf.rows())
        .filter(|&i| i != xi)
        .map(|i| c_term(pmf.prob(i, yi), rm[i], cm[yi]))
        .sum();
    let point = d_term(pmf.prob(xi, yi), rm[xi], cm[yi]);

    Ok(EtaInfluenceParts {
        complement_sum,
        row_sum,
        col_sum,
        point,
    })
}

/// Finite-difference quotient `[R((1-eps) pmf + eps point_mass) - R(pmf)] / eps`.
///
/// This is the direct realization of the influence-function definition and
/// serves as the independent oracle for the closed forms above.
pub fn gateaux_fd(functional: Functional, pmf: &JointPMF, x: usize, y: usize, eps: f64) -> Result<f64> {
    check_point(pmf, x, y);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!(
            "eps must lie in (0, 1), got {}",
            eps
        )));
    }
    let mut grid = vec![vec![0.0; pmf.cols()]; pmf.rows()];
    for (i, row) in grid.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (1.0 - eps) * pmf.prob(i, j);
        }
    }
    grid[x - 1][y - 1] += eps;
    let contaminated = JointPMF::new(grid)?;
    let eval = |p: &JointPMF| match functional {
        Functional::Dcov => delta_pop(p),
        Functional::ChiSq => eta_pop(p),
    };
    Ok((eval(&contaminated) - eval(pmf)) / eps)
}

/// Richardson-refined finite difference: evaluates [`gateaux_fd`] at `eps`
/// and `eps / 2` and extrapolates, cancelling the leading O(eps) truncation
/// term. Preferred oracle form when the functional's curvature along the
/// contamination direction is large (chi-squared on fine grids).
pub fn gateaux_fd_refined(
    functional: Functional,
    pmf: &JointPMF,
    x: usize,
    y: usize,
    eps: f64,
) -> Result<f64> {
    let coarse = gateaux_fd(functional, pmf, x, y, eps)?;
    let fine = gateaux_fd(functional, pmf, x, y, eps / 2.0)?;
    Ok(2.0 * fine - coarse)
}

/// Full influence surface and gross error sensitivity
/// `gamma = sup_{x,y} |IF(x, y)|`.
///
/// The sweep shares the O(IJ) precomputations across contamination points,
/// so the whole grid costs O(IJ); it must agree with the pointwise
/// evaluations exactly up to round-off (tested).
pub fn gross_error_sensitivity(functional: Functional, pmf: &JointPMF) -> InfluenceSurface {
    let rows = pmf.rows();
    let cols = pmf.cols();
    let rm = pmf.row_margins();
    let cm = pmf.col_margins();

    let mut values = vec![vec![0.0; cols]; rows];
    match functional {
        Functional::Dcov => {
            let mut shared = 0.0;
            for i in 0..rows {
                for j in 0..cols {
                    let p = pmf.prob(i, j);
                    let e = rm[i] * cm[j];
                    shared += (p - e) * (2.0 * e - p);
                }
            }
            let row_terms: Vec<f64> = (0..rows)
                .map(|i| {
                    (0..cols)
                        .map(|j| cm[j] * (pmf.prob(i, j) - rm[i] * cm[j]))
                        .sum()
                })
                .collect();
            let col_terms: Vec<f64> = (0..cols)
                .map(|j| {
                    (0..rows)
                        .map(|i| rm[i] * (pmf.prob(i, j) - rm[i] * cm[j]))
                        .sum()
                })
                .collect();
            for x in 0..rows {
                for y in 0..cols {
                    let point = pmf.prob(x, y) - rm[x] * cm[y];
                    values[x][y] = 2.0 * shared - 2.0 * row_terms[x] - 2.0 * col_terms[y] + 2.0 * point;
                }
            }
        }
        Functional::ChiSq => {
            if !eta_margins_ok(pmf) {
                let values = vec![vec![f64::INFINITY; cols]; rows];
                return InfluenceSurface {
                    values,
                    gamma: f64::INFINITY,
                };
            }
            // residual sums for the complement block via inclusion-exclusion
            let mut total_a = 0.0;
            let mut row_a = vec![0.0; rows];
            let mut col_a = vec![0.0; cols];
            let mut row_b = vec![0.0; rows];
            let mut col_c = vec![0.0; cols];
            for i in 0..rows {
                for j in 0..cols {
                    let a = 2.0 * (pmf.prob(i, j) - rm[i] * cm[j]);
                    total_a += a;
                    row_a[i] += a;
                    col_a[j] += a;
                    row_b[i] += b_term(pmf.prob(i, j), rm[i], cm[j]);
                    col_c[j] += c_term(pmf.prob(i, j), rm[i], cm[j]);
                }
            }
            for x in 0..rows {
                for y in 0..cols {
                    let p = pmf.prob(x, y);
                    let a_part = total_a - row_a[x] - col_a[y] + 2.0 * (p - rm[x] * cm[y]);
                    let b_part = row_b[x] - b_term(p, rm[x], cm[y]);
                    let c_part = col_c[y] - c_term(p, rm[x], cm[y]);
                    values[x][y] = a_part + b_part + c_part + d_term(p, rm[x], cm[y]);
                }
            }
        }
    }

    let gamma = values
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    InfluenceSurface { values, gamma }
}

/// Families of pmfs with a distinguished corner cell whose margin structure
/// drives the chi-squared influence to extremes. The corner sits at
/// category pair (1, 1); the remaining mass is spread uniformly over the
/// complement block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpikeFamily {
    /// Corner mass `beta` with both corner margins `2 beta`: the corner row
    /// and column each spread another `beta` over their off-corner cells.
    /// Off-corner margins must stay above `margin_floor`.
    VanishingCorner {
        rows: usize,
        cols: usize,
        beta: f64,
        margin_floor: f64,
    },
    /// Corner mass `alpha` equal to the full corner row and column margins:
    /// the corner category pair is isolated from the rest of the grid.
    IsolatedCorner { rows: usize, cols: usize, alpha: f64 },
}

/// Construct the fully specified pmf of a [`SpikeFamily`].
pub fn spike_pmf(family: &SpikeFamily) -> Result<JointPMF> {
    match *family {
        SpikeFamily::VanishingCorner {
            rows,
            cols,
            beta,
            margin_floor,
        } => {
            if rows < 2 || cols < 2 {
                return Err(Error::InvalidInput(
                    "vanishing-corner family needs at least a 2x2 grid".into(),
                ));
            }
            if beta.is_nan() || beta <= 0.0 || 3.0 * beta >= 1.0 {
                return Err(Error::InvalidInput(format!(
                    "corner mass beta = {} must lie in (0, 1/3)",
                    beta
                )));
            }
            let off_row_margin = (1.0 - 2.0 * beta) / (rows as f64 - 1.0);
            let off_col_margin = (1.0 - 2.0 * beta) / (cols as f64 - 1.0);
            if off_row_margin <= margin_floor || off_col_margin <= margin_floor {
                return Err(Error::InvalidInput(format!(
                    "off-corner margins ({}, {}) do not clear the floor {}",
                    off_row_margin, off_col_margin, margin_floor
                )));
            }
            let row_fill = beta / (cols as f64 - 1.0);
            let col_fill = beta / (rows as f64 - 1.0);
            let bulk = (1.0 - 3.0 * beta) / ((rows as f64 - 1.0) * (cols as f64 - 1.0));
            let grid = (0..rows)
                .map(|i| {
                    (0..cols)
                        .map(|j| match (i, j) {
                            (0, 0) => beta,
                            (0, _) => row_fill,
                            (_, 0) => col_fill,
                            _ => bulk,
                        })
                        .collect()
                })
                .collect();
            JointPMF::new(grid)
        }
        SpikeFamily::IsolatedCorner { rows, cols, alpha } => {
            if rows < 2 || cols < 2 {
                return Err(Error::InvalidInput(
                    "isolated-corner family needs at least a 2x2 grid".into(),
                ));
            }
            if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
                return Err(Error::InvalidInput(format!(
                    "corner mass alpha = {} must lie in (0, 1)",
                    alpha
                )));
            }
            let bulk = (1.0 - alpha) / ((rows as f64 - 1.0) * (cols as f64 - 1.0));
            let grid = (0..rows)
                .map(|i| {
                    (0..cols)
                        .map(|j| match (i, j) {
                            (0, 0) => alpha,
                            (0, _) | (_, 0) => 0.0,
                            _ => bulk,
                        })
                        .collect()
                })
                .collect();
            JointPMF::new(grid)
        }
    }
}
