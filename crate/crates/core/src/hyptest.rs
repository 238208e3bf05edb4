//! End-to-end independence tests on paired categorical samples.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{bcdcor_stat, delta_hat, delta_tilde, lrt_g, pearson_chi2};
use crate::nulldist::{chi2_upper_tail, pvalue_chi1, pvalue_weighted, weight_grid_from_margins};
use crate::table::{ContingencyTable, PairedSample};

/// Test method identifiers, as serialized in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Permutation,
    WeightedChisq,
    ChisqDf1,
    Pearson,
    Lrt,
}

/// Statistic used inside the permutation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermutationStat {
    /// Plug-in squared distance covariance (the default).
    #[serde(rename = "dcov")]
    Dcov,
    /// Unbiased U-statistic estimate.
    #[serde(rename = "dcov-unbiased")]
    DcovUnbiased,
}

/// Result of a single hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub method: TestMethod,
    pub statistic: f64,
    pub pvalue: f64,
    pub n: u64,
    #[serde(rename = "I")]
    pub i_cats: usize,
    #[serde(rename = "J")]
    pub j_cats: usize,
    /// Permutation count B or Monte-Carlo draw count; 0 for analytic tests.
    pub replicates_or_draws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Distance-covariance permutation test: permute the y labels holding x
/// fixed, with the add-one p-value estimator `(1 + #{perm >= obs}) / (B + 1)`.
pub fn permutation_test<R: Rng + ?Sized>(
    sample: &PairedSample,
    stat: PermutationStat,
    b: usize,
    rng: &mut R,
) -> Result<TestOutcome> {
    if b < 1 {
        return Err(Error::InvalidInput("need at least one permutation".into()));
    }
    let eval = |t: &ContingencyTable| match stat {
        PermutationStat::Dcov => delta_hat(t),
        PermutationStat::DcovUnbiased => delta_tilde(t),
    };
    let table = ContingencyTable::from_sample(sample);
    let observed = eval(&table)?;

    let mut shuffled = sample.clone();
    let mut hits = 0usize;
    for _ in 0..b {
        shuffled.y_labels_mut().shuffle(rng);
        let t = ContingencyTable::from_sample(&shuffled);
        if eval(&t)? >= observed {
            hits += 1;
        }
    }
    Ok(TestOutcome {
        method: TestMethod::Permutation,
        statistic: observed,
        pvalue: (1 + hits) as f64 / (b + 1) as f64,
        n: table.total(),
        i_cats: table.rows(),
        j_cats: table.cols(),
        replicates_or_draws: b,
        seed: None,
    })
}

/// Weighted chi-squared test: bias-corrected statistic against the
/// Monte-Carlo tail of the weighted quadratic form with weights estimated
/// from the sample margins.
pub fn weighted_chi2_test<R: Rng + ?Sized>(
    table: &ContingencyTable,
    draws: usize,
    rng: &mut R,
) -> Result<TestOutcome> {
    let stat = bcdcor_stat(table)?;
    let pmf = table.mle_pmf()?;
    let grid = weight_grid_from_margins(pmf.row_margins(), pmf.col_margins())?;
    let pvalue = pvalue_weighted(stat, &grid, draws, rng)?;
    Ok(TestOutcome {
        method: TestMethod::WeightedChisq,
        statistic: stat,
        pvalue,
        n: table.total(),
        i_cats: table.rows(),
        j_cats: table.cols(),
        replicates_or_draws: draws,
        seed: None,
    })
}

/// Chi-squared (df = 1) approximation test on the bias-corrected statistic.
pub fn chi1_test(table: &ContingencyTable) -> Result<TestOutcome> {
    let stat = bcdcor_stat(table)?;
    Ok(TestOutcome {
        method: TestMethod::ChisqDf1,
        statistic: stat,
        pvalue: pvalue_chi1(stat),
        n: table.total(),
        i_cats: table.rows(),
        j_cats: table.cols(),
        replicates_or_draws: 0,
        seed: None,
    })
}

fn chi2_outcome(
    method: TestMethod,
    stat: f64,
    df: usize,
    table: &ContingencyTable,
) -> Result<TestOutcome> {
    if df == 0 {
        return Err(Error::UndefinedTest(
            "effective table is a single row or column".into(),
        ));
    }
    Ok(TestOutcome {
        method,
        statistic: stat,
        pvalue: chi2_upper_tail(stat, df)?,
        n: table.total(),
        i_cats: table.rows(),
        j_cats: table.cols(),
        replicates_or_draws: 0,
        seed: None,
    })
}

/// Pearson's asymptotic chi-squared test on `n * eta_hat`.
pub fn pearson_test(table: &ContingencyTable) -> Result<TestOutcome> {
    let chi = pearson_chi2(table)?;
    chi2_outcome(TestMethod::Pearson, chi.scaled, chi.df, table)
}

/// Likelihood-ratio asymptotic test on `n * g_hat`, with the same effective
/// degrees of freedom as Pearson's test.
pub fn lrt_test(table: &ContingencyTable) -> Result<TestOutcome> {
    let g = lrt_g(table)?;
    let df = pearson_chi2(table)?.df;
    chi2_outcome(TestMethod::Lrt, table.total() as f64 * g, df, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::substream;
    use approx::assert_relative_eq;

    fn table(grid: Vec<Vec<u64>>) -> ContingencyTable {
        ContingencyTable::from_counts(grid).unwrap()
    }

    #[test]
    fn permutation_detects_perfect_association() {
        let labels: Vec<usize> = (0..20).map(|i| i % 2 + 1).collect();
        let sample = PairedSample::new(labels.clone(), labels, 2, 2).unwrap();
        let out = permutation_test(
            &sample,
            PermutationStat::Dcov,
            999,
            &mut substream(2, &[0]),
        )
        .unwrap();
        // a permutation ties the maximal statistic only if it reproduces the
        // diagonal or anti-diagonal table (chance ~1e-5 per permutation)
        assert_eq!(out.pvalue, 0.001);
        assert_relative_eq!(out.statistic, 0.25, max_relative = 1e-14);
    }

    #[test]
    fn permutation_single_round_support() {
        let sample = PairedSample::new(vec![1, 2, 1, 2], vec![1, 2, 2, 1], 2, 2).unwrap();
        for seed in 0..10u64 {
            let out = permutation_test(
                &sample,
                PermutationStat::Dcov,
                1,
                &mut substream(seed, &[0]),
            )
            .unwrap();
            assert!(out.pvalue == 0.5 || out.pvalue == 1.0, "p = {}", out.pvalue);
        }
    }

    #[test]
    fn permutation_supports_unbiased_statistic() {
        let labels: Vec<usize> = (0..16).map(|i| i % 4 + 1).collect();
        let sample = PairedSample::new(labels.clone(), labels, 4, 4).unwrap();
        let out = permutation_test(
            &sample,
            PermutationStat::DcovUnbiased,
            99,
            &mut substream(2, &[0]),
        )
        .unwrap();
        assert!(out.pvalue <= 0.02);
    }

    #[test]
    fn permutation_invariant_to_category_relabeling() {
        // n = 16 keeps every cell probability dyadic, so the statistic is
        // computed exactly and invariance is bit-exact
        let x = vec![1, 2, 3, 1, 2, 3, 1, 2, 3, 3, 2, 1, 1, 3, 2, 2];
        let y = vec![1, 1, 2, 2, 1, 2, 1, 2, 2, 1, 1, 2, 2, 1, 2, 1];
        let a = PairedSample::new(x.clone(), y.clone(), 3, 2).unwrap();
        let rx: Vec<usize> = x.iter().map(|&c| 4 - c).collect();
        let ry: Vec<usize> = y.iter().map(|&c| 3 - c).collect();
        let b = PairedSample::new(rx, ry, 3, 2).unwrap();
        let oa =
            permutation_test(&a, PermutationStat::Dcov, 199, &mut substream(3, &[1])).unwrap();
        let ob =
            permutation_test(&b, PermutationStat::Dcov, 199, &mut substream(3, &[1])).unwrap();
        assert_eq!(oa.statistic, ob.statistic);
        assert_eq!(oa.pvalue, ob.pvalue);
    }

    #[test]
    fn weighted_test_on_balanced_table() {
        let out = weighted_chi2_test(&table(vec![vec![5, 5], vec![5, 5]]), 10_000, &mut substream(4, &[0]))
            .unwrap();
        assert_relative_eq!(out.statistic, -10.0 / 9.0, max_relative = 1e-12);
        assert!(out.pvalue > 0.5);
    }

    #[test]
    fn weighted_test_detects_association() {
        let out = weighted_chi2_test(
            &table(vec![vec![10, 0], vec![0, 10]]),
            100_000,
            &mut substream(4, &[1]),
        )
        .unwrap();
        assert!(out.pvalue < 0.01, "p = {}", out.pvalue);
    }

    #[test]
    fn weighted_test_rejects_constant_margin() {
        assert!(matches!(
            weighted_chi2_test(&table(vec![vec![4, 4]]), 10_000, &mut substream(4, &[2])),
            Err(Error::DegenerateStatistic(_))
        ));
    }

    #[test]
    fn chi1_test_balanced_table() {
        // statistic -10/9 < -1, so the shifted chi-squared tail is exhausted
        let out = chi1_test(&table(vec![vec![5, 5], vec![5, 5]])).unwrap();
        assert_relative_eq!(out.statistic, -10.0 / 9.0, max_relative = 1e-12);
        assert_eq!(out.pvalue, 1.0);
    }

    #[test]
    fn pearson_and_lrt_tests() {
        let diag = table(vec![vec![10, 0], vec![0, 10]]);
        let p = pearson_test(&diag).unwrap();
        assert_relative_eq!(p.statistic, 20.0, max_relative = 1e-14);
        assert!((p.pvalue - 7.7e-6).abs() < 1e-6, "p = {}", p.pvalue);

        let flat = pearson_test(&table(vec![vec![5, 5], vec![5, 5]])).unwrap();
        assert_eq!(flat.statistic, 0.0);
        assert_eq!(flat.pvalue, 1.0);

        let l = lrt_test(&diag).unwrap();
        assert_relative_eq!(l.statistic, 40.0 * std::f64::consts::LN_2, max_relative = 1e-12);
        assert!(l.pvalue < 1e-4);
    }

    #[test]
    fn degenerate_df_errors() {
        let row = table(vec![vec![3, 4, 5]]);
        assert!(matches!(pearson_test(&row), Err(Error::UndefinedTest(_))));
        assert!(matches!(lrt_test(&row), Err(Error::UndefinedTest(_))));
    }

    #[test]
    fn outcome_serializes_with_dimension_keys() {
        let out = chi1_test(&table(vec![vec![5, 5], vec![5, 5]])).unwrap();
        let json = serde_json::to_string(&out).unwrap();
        assert!(json.contains("\"method\":\"chisq_df1\""));
        assert!(json.contains("\"I\":2"));
        assert!(json.contains("\"J\":2"));
    }
}
