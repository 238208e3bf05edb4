//! High-dimensional marginal feature screening: per-feature dependence
//! statistics, threshold selectors, and truth-relative evaluation metrics.

use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{delta_hat, delta_tilde, pearson_chi2};
use crate::table::ContingencyTable;

/// Which per-feature statistic to screen with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScreeningStat {
    /// Plug-in squared distance covariance.
    #[serde(rename = "dcov")]
    Dcov,
    /// Unbiased U-statistic estimate (needs n >= 4).
    #[serde(rename = "dcov-unbiased")]
    DcovUnbiased,
    /// Pearson's chi-squared functional.
    #[serde(rename = "chisq")]
    ChiSq,
}

/// Which threshold selector drives the selected set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Changepoint,
    Maxratio,
}

/// A categorical response paired with K categorical features over n samples.
///
/// Labels are 1-based; `feature_cats[k]` and `response_cats` declare the
/// category counts.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    response: Vec<usize>,
    /// Column-major: `features[k]` is the length-n label vector of feature k.
    features: Vec<Vec<usize>>,
    feature_cats: Vec<usize>,
    response_cats: usize,
    feature_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        response: Vec<usize>,
        features: Vec<Vec<usize>>,
        feature_cats: Vec<usize>,
        response_cats: usize,
    ) -> Result<Self> {
        let n = response.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty response".into()));
        }
        if features.is_empty() {
            return Err(Error::InvalidInput("no features".into()));
        }
        if features.len() != feature_cats.len() {
            return Err(Error::InvalidInput(
                "feature count and category declaration mismatch".into(),
            ));
        }
        if response_cats == 0 || response.iter().any(|&y| y < 1 || y > response_cats) {
            return Err(Error::InvalidInput("response label out of range".into()));
        }
        for (k, (col, &cats)) in features.iter().zip(&feature_cats).enumerate() {
            if col.len() != n {
                return Err(Error::InvalidInput(format!(
                    "feature {} has {} rows, expected {}",
                    k,
                    col.len(),
                    n
                )));
            }
            if cats == 0 || col.iter().any(|&x| x < 1 || x > cats) {
                return Err(Error::InvalidInput(format!(
                    "feature {} label out of range",
                    k
                )));
            }
        }
        let feature_names = (0..features.len()).map(|k| format!("x{}", k + 1)).collect();
        Ok(Self {
            response,
            features,
            feature_cats,
            response_cats,
            feature_names,
        })
    }

    /// Parse an integer CSV whose first column is the response and remaining
    /// columns are features. A header row is required; its names label the
    /// features in reports. Category counts are inferred from the data.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let names: Vec<String> = {
            let headers = rdr.headers().map_err(|e| Error::CsvParse {
                line: 1,
                msg: e.to_string(),
            })?;
            headers.iter().map(|h| h.trim().to_string()).collect()
        };
        if names.len() < 2 {
            return Err(Error::CsvParse {
                line: 1,
                msg: "need a response column and at least one feature column".into(),
            });
        }
        let width = names.len();
        let mut response = Vec::new();
        let mut features: Vec<Vec<usize>> = vec![Vec::new(); width - 1];
        for record in rdr.records() {
            let record = record.map_err(|e| Error::CsvParse {
                line: 0,
                msg: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != width {
                return Err(Error::CsvParse {
                    line,
                    msg: format!("expected {} fields, got {}", width, record.len()),
                });
            }
            let parse = |field: &str| -> Result<usize> {
                let v: usize = field.trim().parse().map_err(|_| Error::CsvParse {
                    line,
                    msg: format!("expected a positive integer label, got \"{}\"", field),
                })?;
                if v == 0 {
                    return Err(Error::CsvParse {
                        line,
                        msg: "labels are 1-based; got 0".into(),
                    });
                }
                Ok(v)
            };
            response.push(parse(record.get(0).unwrap_or(""))?);
            for (k, col) in features.iter_mut().enumerate() {
                col.push(parse(record.get(k + 1).unwrap_or(""))?);
            }
        }
        if response.is_empty() {
            return Err(Error::CsvParse {
                line: 1,
                msg: "no data rows".into(),
            });
        }
        let response_cats = response.iter().copied().max().unwrap_or(1);
        let feature_cats = features
            .iter()
            .map(|col| col.iter().copied().max().unwrap_or(1))
            .collect();
        let mut fm = Self::new(response, features, feature_cats, response_cats)?;
        fm.feature_names = names[1..].to_vec();
        Ok(fm)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Contingency table of feature k against the response.
    pub fn marginal_table(&self, k: usize) -> ContingencyTable {
        let cats = self.feature_cats[k];
        let cols = self.response_cats;
        let mut counts = vec![vec![0u64; cols]; cats];
        for (&x, &y) in self.features[k].iter().zip(&self.response) {
            counts[x - 1][y - 1] += 1;
        }
        ContingencyTable::from_counts(counts).expect("validated dimensions")
    }
}

/// Per-feature statistics plus a flag for a constant response (which makes
/// every statistic exactly zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureStats {
    pub values: Vec<f64>,
    pub constant_response: bool,
}

/// Evaluate one screening statistic on a marginal table.
pub fn stat_of_table(table: &ContingencyTable, stat: ScreeningStat) -> Result<f64> {
    match stat {
        ScreeningStat::Dcov => delta_hat(table),
        ScreeningStat::DcovUnbiased => delta_tilde(table),
        ScreeningStat::ChiSq => pearson_chi2(table).map(|c| c.eta_hat),
    }
}

/// Compute the chosen statistic for every feature's marginal table against
/// the response. Parallel over features; output order is the feature order.
pub fn feature_stats(data: &FeatureMatrix, stat: ScreeningStat) -> Result<FeatureStats> {
    let values = (0..data.num_features())
        .into_par_iter()
        .map(|k| stat_of_table(&data.marginal_table(k), stat))
        .collect::<Result<Vec<f64>>>()?;
    let constant_response = {
        let first = data.response[0];
        data.response.iter().all(|&y| y == first)
    };
    Ok(FeatureStats {
        values,
        constant_response,
    })
}

/// Descending order of `stats` with ties broken by ascending index.
pub fn descending_order(stats: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..stats.len()).collect();
    idx.sort_by(|&a, &b| {
        stats[b]
            .partial_cmp(&stats[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Maximum-ratio threshold: sort the strictly positive statistics ascending
/// as `s_(1) <= ... <= s_(m)` and cut at the largest consecutive ratio,
/// returning `C = s_(r*+1)` with the smallest maximizing rank on ties.
pub fn max_ratio_threshold(stats: &[f64]) -> Result<f64> {
    let mut positive: Vec<f64> = stats.iter().copied().filter(|&s| s > 0.0).collect();
    if positive.len() < 2 {
        return Err(Error::Selector(format!(
            "need at least 2 strictly positive statistics, got {}",
            positive.len()
        )));
    }
    positive.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best_r = 0;
    let mut best_ratio = f64::NEG_INFINITY;
    for r in 0..positive.len() - 1 {
        let ratio = positive[r + 1] / positive[r];
        if ratio > best_ratio {
            best_ratio = ratio;
            best_r = r;
        }
    }
    Ok(positive[best_r + 1])
}

/// Change-point threshold on the descending-sorted statistics: exhaustive
/// grid search of the breakpoint rank `b` (segment 1 = ranks `1..=b`) over
/// `2..=K-2`, minimizing the summed residual squares of least-squares lines
/// fitted to the two segments; the threshold is the midpoint of the
/// statistics flanking the breakpoint. Ties pick the smallest rank.
pub fn changepoint_threshold(stats: &[f64]) -> Result<(f64, usize)> {
    let k = stats.len();
    if k < 4 {
        return Err(Error::Selector(format!(
            "change-point fit needs at least 4 statistics, got {}",
            k
        )));
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    if sorted.iter().all(|&s| s == sorted[0]) {
        return Err(Error::Selector(
            "all statistics are equal; breakpoint undefined".into(),
        ));
    }

    // prefix sums over (rank, value) pairs for O(1) segment fits
    let m = k + 1;
    let mut sx = vec![0.0; m];
    let mut sy = vec![0.0; m];
    let mut sxx = vec![0.0; m];
    let mut sxy = vec![0.0; m];
    let mut syy = vec![0.0; m];
    for (i, &v) in sorted.iter().enumerate() {
        let x = (i + 1) as f64;
        sx[i + 1] = sx[i] + x;
        sy[i + 1] = sy[i] + v;
        sxx[i + 1] = sxx[i] + x * x;
        sxy[i + 1] = sxy[i] + x * v;
        syy[i + 1] = syy[i] + v * v;
    }
    // residual sum of squares of the least-squares line over ranks l+1..=r
    let rss = |l: usize, r: usize| -> f64 {
        let cnt = (r - l) as f64;
        let dx = sx[r] - sx[l];
        let dy = sy[r] - sy[l];
        let dxx = sxx[r] - sxx[l];
        let dxy = sxy[r] - sxy[l];
        let dyy = syy[r] - syy[l];
        let varx = dxx - dx * dx / cnt;
        let vary = dyy - dy * dy / cnt;
        let cov = dxy - dx * dy / cnt;
        // ranks are distinct, so varx > 0 for segments of length >= 2
        (vary - cov * cov / varx).max(0.0)
    };

    let mut best_b = 2;
    let mut best_rss = f64::INFINITY;
    for b in 2..=k - 2 {
        let total = rss(0, b) + rss(b, k);
        if total < best_rss {
            best_rss = total;
            best_b = b;
        }
    }
    let c = (sorted[best_b - 1] + sorted[best_b]) / 2.0;
    Ok((c, best_b))
}

/// Inclusive selection: indices with `stats[k] >= c`, ascending.
pub fn select(stats: &[f64], c: f64) -> Vec<usize> {
    stats
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= c)
        .map(|(k, _)| k)
        .collect()
}

/// One point of an ROC curve: predict positive when `stat >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve (threshold sweep over the unique statistic values, descending)
/// and AUC via tie-averaged ranks, which equals the Mann-Whitney statistic.
pub fn roc_auc(stats: &[f64], truth: &[bool]) -> Result<(Vec<RocPoint>, f64)> {
    if stats.len() != truth.len() {
        return Err(Error::Metric("stats and truth lengths differ".into()));
    }
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(
            "truth must contain both positives and negatives".into(),
        ));
    }

    // sweep thresholds from high to low over unique values
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| stats[b].partial_cmp(&stats[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = stats[order[i]];
        // consume the whole tie group
        while i < order.len() && stats[order[i]] == threshold {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }

    // AUC from tie-averaged ranks of the positive statistics
    let mut rank_sum = 0.0;
    let mut j = 0;
    let mut asc: Vec<usize> = (0..stats.len()).collect();
    asc.sort_by(|&a, &b| stats[a].partial_cmp(&stats[b]).unwrap_or(std::cmp::Ordering::Equal));
    while j < asc.len() {
        let v = stats[asc[j]];
        let start = j;
        while j < asc.len() && stats[asc[j]] == v {
            j += 1;
        }
        let avg_rank = (start + 1 + j) as f64 / 2.0;
        for &idx in &asc[start..j] {
            if truth[idx] {
                rank_sum += avg_rank;
            }
        }
    }
    let auc = (rank_sum - pos as f64 * (pos as f64 + 1.0) / 2.0) / (pos as f64 * neg as f64);
    Ok((points, auc))
}

/// Sensitivity `|selected ∩ true| / |true|` and specificity
/// `|unselected ∩ false| / |false|`.
pub fn sens_spec(selected: &[usize], truth: &[bool]) -> Result<(f64, f64)> {
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(
            "truth must contain both positives and negatives".into(),
        ));
    }
    let mut picked = vec![false; truth.len()];
    for &k in selected {
        if k >= truth.len() {
            return Err(Error::Metric(format!("selected index {} out of range", k)));
        }
        picked[k] = true;
    }
    let tp = truth
        .iter()
        .zip(&picked)
        .filter(|(&t, &p)| t && p)
        .count();
    let tn = truth
        .iter()
        .zip(&picked)
        .filter(|(&t, &p)| !t && !p)
        .count();
    Ok((tp as f64 / pos as f64, tn as f64 / neg as f64))
}

/// Full screening report: statistics, both thresholds, and the selected set
/// under the active selector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningReport {
    pub estimator: ScreeningStat,
    pub selector: Selector,
    pub stats: Vec<f64>,
    /// Feature indices sorted by descending statistic.
    pub order: Vec<usize>,
    /// Threshold from the max-ratio rule, if it is defined for these stats.
    pub threshold_maxratio: Option<f64>,
    /// Threshold and breakpoint rank from the change-point rule, if defined.
    pub threshold_changepoint: Option<f64>,
    pub breakpoint_rank: Option<usize>,
    /// 0-based indices selected by the active selector's threshold.
    pub selected: Vec<usize>,
    pub feature_names: Vec<String>,
    pub constant_response: bool,
}

/// Run the full screening pipeline on a feature matrix.
pub fn screen(data: &FeatureMatrix, stat: ScreeningStat, selector: Selector) -> Result<ScreeningReport> {
    let fs = feature_stats(data, stat)?;
    let order = descending_order(&fs.values);
    let maxratio = max_ratio_threshold(&fs.values).ok();
    let changepoint = changepoint_threshold(&fs.values).ok();
    let active = match selector {
        Selector::Maxratio => maxratio.ok_or_else(|| {
            Error::Selector("max-ratio threshold undefined for these statistics".into())
        })?,
        Selector::Changepoint => {
            changepoint
                .ok_or_else(|| {
                    Error::Selector("change-point threshold undefined for these statistics".into())
                })?
                .0
        }
    };
    Ok(ScreeningReport {
        estimator: stat,
        selector,
        selected: select(&fs.values, active),
        stats: fs.values,
        order,
        threshold_maxratio: maxratio,
        threshold_changepoint: changepoint.map(|(c, _)| c),
        breakpoint_rank: changepoint.map(|(_, b)| b),
        feature_names: data.feature_names().to_vec(),
        constant_response: fs.constant_response,
    })
}
