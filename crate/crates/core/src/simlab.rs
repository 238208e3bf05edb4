//! Seeded simulation engine: screening experiments over synthetic feature
//! panels, and type-I / power experiments for the independence tests.
//!
//! Every replicate, feature, and stochastic method derives its own generator
//! from the master seed via [`crate::stream::substream`], so a report is a
//! pure function of its spec (worker count and scheduling never matter).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyptest::{
    chi1_test, permutation_test, weighted_chi2_test, PermutationStat, TestMethod,
};
use crate::nulldist::chi2_quantile;
use crate::screening::{
    changepoint_threshold, max_ratio_threshold, roc_auc, select, sens_spec, stat_of_table,
    RocPoint, ScreeningStat,
};
use crate::stream::substream;
use crate::table::{ContingencyTable, JointPMF, PairedSample};

const TAG_SCREEN: u64 = 1;
const TAG_TEST: u64 = 2;

/// Experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    Screening,
    Null,
    Alternative,
}

/// How feature panels are sampled in screening experiments.
///
/// The per-feature joint pmfs of the screening settings are mutually
/// inconsistent with a single shared response realization, so the default
/// draws each feature's (x, y) pairs independently from that feature's
/// joint; marginal statistics are unaffected. `SharedResponse` instead draws
/// one uniform response vector per replicate and samples each feature from
/// its conditional given the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    IndependentPairs,
    SharedResponse,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_b() -> usize {
    999
}

fn default_draws() -> usize {
    10_000
}

fn default_sampling() -> SamplingMode {
    SamplingMode::IndependentPairs
}

fn default_perm_stat() -> PermutationStat {
    PermutationStat::Dcov
}

/// Fully resolved experiment description. Serializable as a JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub kind: SimKind,
    pub name: String,
    /// Categories per feature (screening) or for X (null/alternative).
    pub feature_cats: usize,
    /// Categories of the response (screening) or for Y (null/alternative).
    pub response_cats: usize,
    /// Feature-panel width K; unused for null/alternative kinds.
    #[serde(default)]
    pub num_features: usize,
    /// Fraction of features that are dependent on the response.
    #[serde(default)]
    pub signal_fraction: f64,
    pub sample_size: usize,
    pub replicates: usize,
    /// Number of high-probability cells in a dependent pmf (0 = uniform).
    #[serde(default)]
    pub high_cell_count: usize,
    #[serde(default)]
    pub high_cell_prob: f64,
    #[serde(default)]
    pub low_cell_prob: f64,
    #[serde(default)]
    pub estimators: Vec<ScreeningStat>,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_b")]
    pub permutation_b: usize,
    #[serde(default = "default_perm_stat")]
    pub permutation_stat: PermutationStat,
    #[serde(default = "default_draws")]
    pub null_draws: usize,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingMode,
}

/// Optional overrides applied on top of a named setting.
#[derive(Debug, Clone, Default)]
pub struct SettingOverrides {
    pub n: Option<usize>,
    pub replicates: Option<usize>,
    pub num_features: Option<usize>,
    pub signal_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub estimators: Option<Vec<ScreeningStat>>,
    pub alpha: Option<f64>,
    pub permutation_b: Option<usize>,
    pub permutation_stat: Option<PermutationStat>,
    pub null_draws: Option<usize>,
    pub sampling: Option<SamplingMode>,
}

/// Resolve a named setting into a full spec.
///
/// Screening settings use desk-scale defaults (K = 2000, 50 replicates)
/// rather than the full-size panels; override to scale up. Cell masses are
/// the settings' stated high/low values rescaled so the grid sums to one —
/// a no-op where they already normalize (8x8 settings), and a
/// contrast-preserving renormalization where they do not (the 10x10
/// settings total 14/15 as stated; a normalizing categorical sampler fed
/// those masses draws from the rescaled grid).
pub fn build_setting(name: &str, overrides: &SettingOverrides) -> Result<SimulationSpec> {
    let (kind, cats, default_n, replicates, high_cell_count, stated_high, stated_low, signal_fraction) =
        match name {
            "setting1" => (SimKind::Screening, 8, 25, 50, 10, 1.0 / 20.0, 1.0 / 108.0, 0.05),
            "setting2" => (SimKind::Screening, 10, 25, 50, 20, 1.0 / 50.0, 1.0 / 150.0, 0.05),
            "setting3" => (SimKind::Screening, 8, 25, 50, 10, 1.0 / 20.0, 1.0 / 108.0, 0.10),
            "setting4" => (SimKind::Screening, 10, 25, 50, 20, 1.0 / 50.0, 1.0 / 150.0, 0.10),
            "null1" => (SimKind::Null, 8, 32, 5000, 0, 0.0, 1.0 / 64.0, 0.0),
            "null2" => (SimKind::Null, 10, 50, 5000, 0, 0.0, 1.0 / 100.0, 0.0),
            "alt1" => (SimKind::Alternative, 8, 32, 2000, 10, 1.0 / 20.0, 1.0 / 108.0, 0.0),
            "alt2" => (SimKind::Alternative, 10, 50, 2000, 20, 1.0 / 50.0, 1.0 / 150.0, 0.0),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown setting \"{}\"; expected setting1..setting4, null1, null2, alt1, alt2",
                    name
                )))
            }
        };
    let cells = cats * cats;
    let total = high_cell_count as f64 * stated_high
        + (cells - high_cell_count) as f64 * stated_low;
    let high_cell_prob = stated_high / total;
    let low_cell_prob = stated_low / total;
    let spec = SimulationSpec {
        kind,
        name: name.to_string(),
        feature_cats: cats,
        response_cats: cats,
        num_features: if kind == SimKind::Screening {
            overrides.num_features.unwrap_or(2000)
        } else {
            0
        },
        signal_fraction: overrides.signal_fraction.unwrap_or(signal_fraction),
        sample_size: overrides.n.unwrap_or(default_n),
        replicates: overrides.replicates.unwrap_or(replicates),
        high_cell_count,
        high_cell_prob,
        low_cell_prob,
        estimators: overrides
            .estimators
            .clone()
            .unwrap_or_else(|| vec![ScreeningStat::Dcov, ScreeningStat::ChiSq]),
        seed: overrides.seed.unwrap_or(0),
        alpha: overrides.alpha.unwrap_or_else(default_alpha),
        permutation_b: overrides.permutation_b.unwrap_or_else(default_b),
        permutation_stat: overrides.permutation_stat.unwrap_or_else(default_perm_stat),
        null_draws: overrides.null_draws.unwrap_or_else(default_draws),
        sampling: overrides.sampling.unwrap_or_else(default_sampling),
    };
    spec.validate()?;
    Ok(spec)
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size < 4 {
            return Err(Error::InvalidInput(
                "sample size must be at least 4".into(),
            ));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidInput("need at least one replicate".into()));
        }
        if self.feature_cats == 0 || self.response_cats == 0 {
            return Err(Error::InvalidInput("category counts must be >= 1".into()));
        }
        if self.kind == SimKind::Screening {
            if self.num_features == 0 {
                return Err(Error::InvalidInput(
                    "screening spec needs at least one feature".into(),
                ));
            }
            if !(0.0..=1.0).contains(&self.signal_fraction) {
                return Err(Error::InvalidInput(
                    "signal fraction must lie in [0, 1]".into(),
                ));
            }
            if self.estimators.is_empty() {
                return Err(Error::InvalidInput(
                    "screening spec needs at least one estimator".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput("alpha must lie in [0, 1]".into()));
        }
        let cells = self.feature_cats * self.response_cats;
        if self.high_cell_count > cells {
            return Err(Error::InvalidInput(
                "more high cells than grid cells".into(),
            ));
        }
        Ok(())
    }

    /// Number of dependent features implied by the signal fraction.
    pub fn signal_count(&self) -> usize {
        (self.signal_fraction * self.num_features as f64).round() as usize
    }

    fn uniform_pmf(&self) -> JointPMF {
        let cells = (self.feature_cats * self.response_cats) as f64;
        JointPMF::new(vec![
            vec![1.0 / cells; self.response_cats];
            self.feature_cats
        ])
        .expect("uniform grid is a valid pmf")
    }
}

/// Draw a dependent-cell pmf: `high_cell_count` distinct cells chosen
/// uniformly without replacement carry `high_cell_prob`, the rest carry
/// `low_cell_prob`.
pub fn gen_relevant_pmf<R: rand::Rng + ?Sized>(
    spec: &SimulationSpec,
    rng: &mut R,
) -> Result<JointPMF> {
    let rows = spec.feature_cats;
    let cols = spec.response_cats;
    let cells = rows * cols;
    if spec.high_cell_count > cells {
        return Err(Error::InvalidInput(
            "more high cells than grid cells".into(),
        ));
    }
    let mass = spec.high_cell_count as f64 * spec.high_cell_prob
        + (cells - spec.high_cell_count) as f64 * spec.low_cell_prob;
    if (mass - 1.0).abs() > crate::table::MASS_TOL {
        return Err(Error::InvalidInput(format!(
            "cell masses sum to {}, expected 1",
            mass
        )));
    }
    let mut grid = vec![vec![spec.low_cell_prob; cols]; rows];
    let picks = rand::seq::index::sample(rng, cells, spec.high_cell_count);
    for cell in picks.iter() {
        grid[cell / cols][cell % cols] = spec.high_cell_prob;
    }
    JointPMF::new(grid)
}

/// Per-replicate screening metrics; one entry per estimator in spec order.
/// Metrics requiring a two-class truth are `None` when the signal fraction
/// is 0 or 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReplicate {
    pub auc: Vec<Option<f64>>,
    pub sensitivity: Vec<Option<f64>>,
    pub specificity: Vec<Option<f64>>,
    pub covers_truth: Vec<Option<bool>>,
    pub selected_changepoint: Vec<usize>,
    pub selected_maxratio: Vec<usize>,
}

/// Aggregated screening results. Means are over replicates; `None` when the
/// underlying metric was undefined (one-class truth).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningAggregate {
    pub estimators: Vec<ScreeningStat>,
    pub one_class_truth: bool,
    pub mean_auc: Vec<Option<f64>>,
    pub mean_sensitivity: Vec<Option<f64>>,
    pub mean_specificity: Vec<Option<f64>>,
    /// Fraction of replicates whose change-point selection covers the truth.
    pub truth_coverage: Vec<Option<f64>>,
    pub mean_selected_changepoint: Vec<f64>,
    pub mean_selected_maxratio: Vec<f64>,
    pub replicates: Vec<ScreeningReplicate>,
    /// ROC of the statistics pooled across replicates, per estimator
    /// (plot data; the AUC column above averages per-replicate curves).
    pub pooled_roc: Vec<Vec<RocPoint>>,
}

/// Per-method testing results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub rejections: usize,
    pub rate: f64,
    /// Binomial standard error of the rate.
    pub se: f64,
    /// Observed statistics, one per replicate (plot/QQ data).
    pub statistics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestingAggregate {
    pub alpha: f64,
    pub methods: BTreeMap<String, MethodSummary>,
}

/// The full output of one experiment. Serialization is byte-stable: field
/// order is fixed and no wall-clock data is included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub spec: SimulationSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screening: Option<ScreeningAggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub testing: Option<TestingAggregate>,
}

fn method_tag(m: TestMethod) -> u64 {
    match m {
        TestMethod::Permutation => 0,
        TestMethod::WeightedChisq => 1,
        TestMethod::ChisqDf1 => 2,
        TestMethod::Pearson => 3,
        TestMethod::Lrt => 4,
    }
}

fn method_key(m: TestMethod) -> String {
    serde_json::to_value(m)
        .expect("method serializes")
        .as_str()
        .expect("method is a string")
        .to_string()
}

/// Sample one feature's paired sample under the requested sampling mode.
fn sample_feature<R: rand::Rng + ?Sized>(
    pmf: &JointPMF,
    shared_y: Option<&[usize]>,
    n: usize,
    rng: &mut R,
) -> Result<PairedSample> {
    match shared_y {
        None => Ok(pmf.sample(n, rng)),
        Some(ys) => {
            // conditional inverse-CDF per response column
            let rows = pmf.rows();
            let cols = pmf.cols();
            let mut cum = vec![vec![0.0; rows]; cols];
            for j in 0..cols {
                let margin = pmf.col_margins()[j];
                if margin <= 0.0 {
                    return Err(Error::InvalidInput(
                        "shared-response sampling needs positive response margins".into(),
                    ));
                }
                let mut acc = 0.0;
                for i in 0..rows {
                    acc += pmf.prob(i, j) / margin;
                    cum[j][i] = acc;
                }
            }
            let mut xs = Vec::with_capacity(n);
            for &y in ys {
                let col = &cum[y - 1];
                let u: f64 = rng.gen();
                let idx = col.partition_point(|&c| c <= u).min(rows - 1);
                xs.push(idx + 1);
            }
            PairedSample::new(xs, ys.to_vec(), rows, cols)
        }
    }
}

/// Run a screening experiment: per replicate, draw every feature's panel,
/// compute per-feature statistics for each estimator, apply both threshold
/// selectors, and evaluate against the known truth.
pub fn run_screening_experiment(spec: &SimulationSpec) -> Result<SimulationReport> {
    spec.validate()?;
    if spec.kind != SimKind::Screening {
        return Err(Error::InvalidInput(
            "run_screening_experiment needs a screening spec".into(),
        ));
    }
    let k = spec.num_features;
    let signal = spec.signal_count();
    let truth: Vec<bool> = (0..k).map(|j| j < signal).collect();
    let one_class = signal == 0 || signal == k;
    let uniform = spec.uniform_pmf();
    let n = spec.sample_size;

    struct RepOutput {
        replicate: ScreeningReplicate,
        stats: Vec<Vec<f64>>,
    }

    let reps: Vec<RepOutput> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| -> Result<RepOutput> {
            let r64 = r as u64;
            let shared_y: Option<Vec<usize>> = match spec.sampling {
                SamplingMode::IndependentPairs => None,
                SamplingMode::SharedResponse => {
                    let mut rng = substream(spec.seed, &[TAG_SCREEN, r64, 2]);
                    Some(
                        (0..n)
                            .map(|_| rng.gen_range(1..=spec.response_cats))
                            .collect(),
                    )
                }
            };
            // per-feature statistics for every estimator
            let mut stats = vec![vec![0.0; k]; spec.estimators.len()];
            for feat in 0..k {
                let mut rng = substream(spec.seed, &[TAG_SCREEN, r64, 1, feat as u64]);
                let pmf = if truth[feat] {
                    gen_relevant_pmf(spec, &mut rng)?
                } else {
                    uniform.clone()
                };
                let sample = sample_feature(&pmf, shared_y.as_deref(), n, &mut rng)?;
                let table = ContingencyTable::from_sample(&sample);
                for (e, &est) in spec.estimators.iter().enumerate() {
                    stats[e][feat] = stat_of_table(&table, est)?;
                }
            }

            let m = spec.estimators.len();
            let mut rep = ScreeningReplicate {
                auc: vec![None; m],
                sensitivity: vec![None; m],
                specificity: vec![None; m],
                covers_truth: vec![None; m],
                selected_changepoint: vec![0; m],
                selected_maxratio: vec![0; m],
            };
            for e in 0..m {
                let (c_change, _) = changepoint_threshold(&stats[e])?;
                let picked = select(&stats[e], c_change);
                rep.selected_changepoint[e] = picked.len();
                rep.selected_maxratio[e] =
                    select(&stats[e], max_ratio_threshold(&stats[e])?).len();
                if !one_class {
                    let (_, auc) = roc_auc(&stats[e], &truth)?;
                    let (sens, spc) = sens_spec(&picked, &truth)?;
                    rep.auc[e] = Some(auc);
                    rep.sensitivity[e] = Some(sens);
                    rep.specificity[e] = Some(spc);
                    rep.covers_truth[e] = Some(sens == 1.0);
                }
            }
            Ok(RepOutput {
                replicate: rep,
                stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let m = spec.estimators.len();
    let count = reps.len() as f64;
    let mean_opt = |f: &dyn Fn(&ScreeningReplicate, usize) -> Option<f64>, e: usize| {
        if one_class {
            None
        } else {
            Some(reps.iter().filter_map(|r| f(&r.replicate, e)).sum::<f64>() / count)
        }
    };
    let mut aggregate = ScreeningAggregate {
        estimators: spec.estimators.clone(),
        one_class_truth: one_class,
        mean_auc: Vec::new(),
        mean_sensitivity: Vec::new(),
        mean_specificity: Vec::new(),
        truth_coverage: Vec::new(),
        mean_selected_changepoint: Vec::new(),
        mean_selected_maxratio: Vec::new(),
        replicates: Vec::new(),
        pooled_roc: Vec::new(),
    };
    for e in 0..m {
        aggregate
            .mean_auc
            .push(mean_opt(&|r, e| r.auc[e], e));
        aggregate
            .mean_sensitivity
            .push(mean_opt(&|r, e| r.sensitivity[e], e));
        aggregate
            .mean_specificity
            .push(mean_opt(&|r, e| r.specificity[e], e));
        aggregate.truth_coverage.push(if one_class {
            None
        } else {
            Some(
                reps.iter()
                    .filter(|r| r.replicate.covers_truth[e] == Some(true))
                    .count() as f64
                    / count,
            )
        });
        aggregate.mean_selected_changepoint.push(
            reps.iter()
                .map(|r| r.replicate.selected_changepoint[e] as f64)
                .sum::<f64>()
                / count,
        );
        aggregate.mean_selected_maxratio.push(
            reps.iter()
                .map(|r| r.replicate.selected_maxratio[e] as f64)
                .sum::<f64>()
                / count,
        );
        if one_class {
            aggregate.pooled_roc.push(Vec::new());
        } else {
            let pooled_stats: Vec<f64> = reps
                .iter()
                .flat_map(|r| r.stats[e].iter().copied())
                .collect();
            let pooled_truth: Vec<bool> = reps
                .iter()
                .flat_map(|_| truth.iter().copied())
                .collect();
            let (points, _) = roc_auc(&pooled_stats, &pooled_truth)?;
            aggregate.pooled_roc.push(points);
        }
    }
    aggregate.replicates = reps.into_iter().map(|r| r.replicate).collect();

    Ok(SimulationReport {
        spec: spec.clone(),
        screening: Some(aggregate),
        testing: None,
    })
}

/// Run a type-I (null) or power (alternative) experiment: per replicate,
/// draw a table from the setting's pmf and apply each requested test at the
/// spec's alpha.
pub fn run_test_experiment(
    spec: &SimulationSpec,
    methods: &[TestMethod],
) -> Result<SimulationReport> {
    spec.validate()?;
    if spec.kind == SimKind::Screening {
        return Err(Error::InvalidInput(
            "run_test_experiment needs a null or alternative spec".into(),
        ));
    }
    if methods.is_empty() {
        return Err(Error::InvalidInput("no test methods requested".into()));
    }
    let uniform = spec.uniform_pmf();
    let n = spec.sample_size;

    let rows: Vec<Vec<(f64, bool)>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| -> Result<Vec<(f64, bool)>> {
            let r64 = r as u64;
            let pmf = match spec.kind {
                SimKind::Null => uniform.clone(),
                SimKind::Alternative => {
                    // fresh high-cell placement every replicate
                    let mut rng = substream(spec.seed, &[TAG_TEST, r64, 0]);
                    gen_relevant_pmf(spec, &mut rng)?
                }
                SimKind::Screening => unreachable!(),
            };
            let sample = pmf.sample(n, &mut substream(spec.seed, &[TAG_TEST, r64, 1]));
            let table = ContingencyTable::from_sample(&sample);
            methods
                .iter()
                .map(|&m| {
                    let mut rng = substream(spec.seed, &[TAG_TEST, r64, 2, method_tag(m)]);
                    let outcome = match m {
                        TestMethod::Permutation => permutation_test(
                            &sample,
                            spec.permutation_stat,
                            spec.permutation_b,
                            &mut rng,
                        )?,
                        TestMethod::WeightedChisq => {
                            weighted_chi2_test(&table, spec.null_draws, &mut rng)?
                        }
                        TestMethod::ChisqDf1 => chi1_test(&table)?,
                        TestMethod::Pearson => crate::hyptest::pearson_test(&table)?,
                        TestMethod::Lrt => crate::hyptest::lrt_test(&table)?,
                    };
                    Ok((outcome.statistic, outcome.pvalue <= spec.alpha))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let count = rows.len() as f64;
    let mut summaries = BTreeMap::new();
    for (idx, &m) in methods.iter().enumerate() {
        let rejections = rows.iter().filter(|row| row[idx].1).count();
        let rate = rejections as f64 / count;
        summaries.insert(
            method_key(m),
            MethodSummary {
                rejections,
                rate,
                se: (rate * (1.0 - rate) / count).sqrt(),
                statistics: rows.iter().map(|row| row[idx].0).collect(),
            },
        );
    }

    Ok(SimulationReport {
        spec: spec.clone(),
        screening: None,
        testing: Some(TestingAggregate {
            alpha: spec.alpha,
            methods: summaries,
        }),
    })
}

/// Report file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn open(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
}

fn io_ctx(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Pooled ROC points of one estimator as `threshold,fpr,tpr` CSV.
pub fn write_roc_csv(report: &SimulationReport, estimator_index: usize, path: &Path) -> Result<()> {
    let screening = report
        .screening
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("report has no screening section".into()))?;
    let roc = screening
        .pooled_roc
        .get(estimator_index)
        .ok_or_else(|| Error::InvalidInput(format!("no estimator {}", estimator_index)))?;
    if roc.is_empty() {
        return Err(Error::InvalidInput(
            "ROC undefined (one-class truth)".into(),
        ));
    }
    let mut w = open(path)?;
    let ctx = io_ctx(path);
    writeln!(w, "threshold,fpr,tpr").map_err(&ctx)?;
    for p in roc {
        writeln!(w, "{},{},{}", p.threshold, p.fpr, p.tpr).map_err(&ctx)?;
    }
    w.flush().map_err(&ctx)
}

/// QQ data for a null run: sorted observed statistics against quantiles of
/// the limiting weighted form at the setting's uniform margins, as
/// `theoretical,empirical` CSV.
pub fn write_qq_csv(report: &SimulationReport, path: &Path) -> Result<()> {
    if report.spec.kind != SimKind::Null {
        return Err(Error::InvalidInput(
            "QQ data is only defined for null experiments".into(),
        ));
    }
    let testing = report
        .testing
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("report has no testing section".into()))?;
    let stats = testing
        .methods
        .iter()
        .find(|(k, _)| k.as_str() == "weighted_chisq" || k.as_str() == "chisq_df1")
        .map(|(_, v)| &v.statistics)
        .ok_or_else(|| {
            Error::InvalidInput("QQ data needs a weighted_chisq or chisq_df1 method".into())
        })?;
    if stats.is_empty() {
        return Err(Error::InvalidInput("no replicates to plot".into()));
    }
    let mut sorted = stats.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // uniform margins make all nonzero weights equal, so the limit is a
    // shifted, scaled chi-squared with (I-1)(J-1) degrees of freedom
    let df = (report.spec.feature_cats - 1) * (report.spec.response_cats - 1);
    let scale = (df as f64).sqrt();
    let m = sorted.len() as f64;
    let mut w = open(path)?;
    let ctx = io_ctx(path);
    writeln!(w, "theoretical,empirical").map_err(&ctx)?;
    for (i, &emp) in sorted.iter().enumerate() {
        let p = (i as f64 + 0.5) / m;
        let theo = (chi2_quantile(p, df) - df as f64) / scale;
        writeln!(w, "{},{}", theo, emp).map_err(&ctx)?;
    }
    w.flush().map_err(&ctx)
}

/// Serialize a report to `path`.
///
/// JSON writes the whole report. CSV writes the report's bulk plot data:
/// the first estimator's pooled ROC for screening runs, or the QQ pairs for
/// null runs. Identical reports produce byte-identical files.
pub fn emit_report(report: &SimulationReport, format: ReportFormat, path: &Path) -> Result<()> {
    let empty = match (&report.screening, &report.testing) {
        (Some(s), _) => s.replicates.is_empty(),
        (_, Some(t)) => t.methods.values().all(|m| m.statistics.is_empty()),
        (None, None) => true,
    };
    if empty {
        return Err(Error::InvalidInput("report has no replicates".into()));
    }
    match format {
        ReportFormat::Json => {
            let mut w = open(path)?;
            let ctx = io_ctx(path);
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w).map_err(&ctx)?;
            w.flush().map_err(&ctx)
        }
        ReportFormat::Csv => {
            if report.screening.is_some() {
                write_roc_csv(report, 0, path)
            } else {
                write_qq_csv(report, path)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::substream;
    use approx::assert_relative_eq;

    #[test]
    fn setting1_parameters() {
        let spec = build_setting("setting1", &SettingOverrides::default()).unwrap();
        assert_eq!(spec.feature_cats, 8);
        assert_eq!(spec.response_cats, 8);
        assert_eq!(spec.signal_fraction, 0.05);
        assert_eq!(spec.high_cell_count, 10);
        assert_relative_eq!(spec.high_cell_prob, 0.05, epsilon = 1e-15);
        assert_relative_eq!(spec.low_cell_prob, 1.0 / 108.0, epsilon = 1e-15);
        assert_eq!(spec.sample_size, 25);
    }

    #[test]
    fn setting2_cells_rescaled_to_unit_mass() {
        // stated masses 20/50 + 80/150 total 14/15; rescaling preserves the
        // 3:1 contrast: high = 3/140, low = 1/140
        let spec = build_setting("setting2", &SettingOverrides::default()).unwrap();
        assert_relative_eq!(spec.high_cell_prob, 3.0 / 140.0, epsilon = 1e-15);
        assert_relative_eq!(spec.low_cell_prob, 1.0 / 140.0, epsilon = 1e-15);
        assert_relative_eq!(spec.high_cell_prob / spec.low_cell_prob, 3.0, epsilon = 1e-12);
        let mass = 20.0 * spec.high_cell_prob + 80.0 * spec.low_cell_prob;
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null2_is_uniform() {
        let spec = build_setting("null2", &SettingOverrides::default()).unwrap();
        assert_eq!(spec.high_cell_count, 0);
        assert_relative_eq!(spec.low_cell_prob, 0.01, epsilon = 1e-15);
        assert_eq!(spec.sample_size, 50);
    }

    #[test]
    fn unknown_setting_rejected() {
        assert!(build_setting("setting9", &SettingOverrides::default()).is_err());
    }

    #[test]
    fn relevant_pmf_structure() {
        let spec = build_setting("setting1", &SettingOverrides::default()).unwrap();
        let pmf = gen_relevant_pmf(&spec, &mut substream(1, &[0])).unwrap();
        let mut high = 0;
        let mut low = 0;
        let mut mass = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                let p = pmf.prob(i, j);
                mass += p;
                if (p - 0.05).abs() < 1e-15 {
                    high += 1;
                } else {
                    assert_relative_eq!(p, 1.0 / 108.0, epsilon = 1e-15);
                    low += 1;
                }
            }
        }
        assert_eq!((high, low), (10, 54));
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relevant_pmf_placement_varies_but_values_do_not() {
        let spec = build_setting("setting1", &SettingOverrides::default()).unwrap();
        let a = gen_relevant_pmf(&spec, &mut substream(1, &[1])).unwrap();
        let b = gen_relevant_pmf(&spec, &mut substream(1, &[2])).unwrap();
        let cells = |p: &JointPMF| {
            let mut v: Vec<u64> = (0..8)
                .flat_map(|i| (0..8).map(move |j| (i, j)))
                .map(|(i, j)| p.prob(i, j).to_bits())
                .collect();
            v.sort();
            v
        };
        assert_eq!(cells(&a), cells(&b));
        assert_ne!(
            (0..8).flat_map(|i| (0..8).map(move |j| (i, j))).map(|(i, j)| a.prob(i, j).to_bits()).collect::<Vec<_>>(),
            (0..8).flat_map(|i| (0..8).map(move |j| (i, j))).map(|(i, j)| b.prob(i, j).to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn full_high_cell_grid_is_uniform() {
        let mut spec = build_setting("setting1", &SettingOverrides::default()).unwrap();
        spec.high_cell_count = 64;
        spec.high_cell_prob = 1.0 / 64.0;
        spec.low_cell_prob = 0.0;
        let pmf = gen_relevant_pmf(&spec, &mut substream(2, &[0])).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_relative_eq!(pmf.prob(i, j), 1.0 / 64.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn infeasible_masses_rejected() {
        let mut spec = build_setting("setting1", &SettingOverrides::default()).unwrap();
        spec.low_cell_prob = 0.02;
        assert!(gen_relevant_pmf(&spec, &mut substream(2, &[1])).is_err());
    }

    #[test]
    fn screening_experiment_smoke() {
        let spec = build_setting(
            "setting1",
            &SettingOverrides {
                num_features: Some(40),
                replicates: Some(3),
                n: Some(30),
                seed: Some(5),
                ..Default::default()
            },
        )
        .unwrap();
        let report = run_screening_experiment(&spec).unwrap();
        let agg = report.screening.unwrap();
        assert_eq!(agg.replicates.len(), 3);
        assert!(!agg.one_class_truth);
        for e in 0..2 {
            let auc = agg.mean_auc[e].unwrap();
            assert!((0.0..=1.0).contains(&auc));
        }
    }

    #[test]
    fn shared_response_mode_runs_and_separates_signal() {
        let spec = build_setting(
            "setting1",
            &SettingOverrides {
                num_features: Some(40),
                replicates: Some(4),
                n: Some(60),
                seed: Some(12),
                sampling: Some(SamplingMode::SharedResponse),
                estimators: Some(vec![ScreeningStat::Dcov]),
                ..Default::default()
            },
        )
        .unwrap();
        let a = run_screening_experiment(&spec).unwrap();
        let b = run_screening_experiment(&spec).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let auc = a.screening.unwrap().mean_auc[0].unwrap();
        assert!(auc > 0.6, "shared-response AUC {auc}");
    }

    #[test]
    fn zero_signal_fraction_flags_one_class() {
        let spec = build_setting(
            "setting1",
            &SettingOverrides {
                num_features: Some(20),
                replicates: Some(2),
                signal_fraction: Some(0.0),
                seed: Some(6),
                ..Default::default()
            },
        )
        .unwrap();
        let report = run_screening_experiment(&spec).unwrap();
        let agg = report.screening.unwrap();
        assert!(agg.one_class_truth);
        assert!(agg.mean_auc.iter().all(Option::is_none));
    }

    #[test]
    fn test_experiment_alpha_one_rejects_everything() {
        let spec = build_setting(
            "null1",
            &SettingOverrides {
                n: Some(64),
                replicates: Some(20),
                alpha: Some(1.0),
                seed: Some(7),
                ..Default::default()
            },
        )
        .unwrap();
        let report = run_test_experiment(&spec, &[TestMethod::ChisqDf1]).unwrap();
        let rate = report.testing.unwrap().methods["chisq_df1"].rate;
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn reports_are_deterministic_across_worker_counts() {
        let spec = build_setting(
            "setting1",
            &SettingOverrides {
                num_features: Some(30),
                replicates: Some(4),
                n: Some(25),
                seed: Some(9),
                ..Default::default()
            },
        )
        .unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_screening_experiment(&spec).unwrap())
        };
        let a = serde_json::to_string(&run(1)).unwrap();
        let b = serde_json::to_string(&run(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn emit_report_round_trip_and_guards() {
        let dir = tempfile::tempdir().unwrap();
        let spec = build_setting(
            "null1",
            &SettingOverrides {
                n: Some(32),
                replicates: Some(50),
                seed: Some(3),
                ..Default::default()
            },
        )
        .unwrap();
        let report = run_test_experiment(&spec, &[TestMethod::ChisqDf1]).unwrap();

        let json_path = dir.path().join("report.json");
        emit_report(&report, ReportFormat::Json, &json_path).unwrap();
        emit_report(&report, ReportFormat::Json, &dir.path().join("again.json")).unwrap();
        let a = std::fs::read(&json_path).unwrap();
        let b = std::fs::read(dir.path().join("again.json")).unwrap();
        assert_eq!(a, b);

        let qq_path = dir.path().join("qq.csv");
        emit_report(&report, ReportFormat::Csv, &qq_path).unwrap();
        let qq = std::fs::read_to_string(&qq_path).unwrap();
        assert!(qq.starts_with("theoretical,empirical\n"));
        assert_eq!(qq.lines().count(), 51);
    }

    #[test]
    fn roc_csv_schema() {
        let dir = tempfile::tempdir().unwrap();
        let spec = build_setting(
            "setting1",
            &SettingOverrides {
                num_features: Some(25),
                replicates: Some(2),
                n: Some(25),
                seed: Some(4),
                ..Default::default()
            },
        )
        .unwrap();
        let report = run_screening_experiment(&spec).unwrap();
        let path = dir.path().join("roc.csv");
        emit_report(&report, ReportFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("threshold,fpr,tpr\n"));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = build_setting("alt2", &SettingOverrides::default()).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: SimulationSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }
}
