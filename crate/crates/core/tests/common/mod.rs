//! Shared test oracles: literal pairwise/triple-loop U-statistic sums with
//! exact rational combination, exhaustive multinomial enumeration, and
//! random-instance generators. Everything here is deliberately independent
//! of the library's count-form implementations.
#![allow(dead_code)]

use catdcov::table::{ContingencyTable, JointPMF};
use num_rational::Ratio;
use rand::Rng;

/// Expand a table into its per-observation label lists.
pub fn expand_labels(table: &ContingencyTable) -> (Vec<usize>, Vec<usize>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..table.rows() {
        for j in 0..table.cols() {
            for _ in 0..table.count(i, j) {
                xs.push(i);
                ys.push(j);
            }
        }
    }
    (xs, ys)
}

/// Literal O(n^2) pairwise sums for the pair statistic: t1, t2, t3.
pub fn pairwise_components_xy(xs: &[usize], ys: &[usize]) -> (u128, u128, u128) {
    let n = xs.len();
    let d = |a: usize, b: usize| u128::from(a != b);
    let mut t1 = 0u128;
    for l in 0..n {
        for m in 0..n {
            t1 += d(xs[l], xs[m]) * d(ys[l], ys[m]);
        }
    }
    let mut t2 = 0u128;
    for l in 0..n {
        let dx: u128 = (0..n).map(|m| d(xs[l], xs[m])).sum();
        let dy: u128 = (0..n).map(|m| d(ys[l], ys[m])).sum();
        t2 += dx * dy;
    }
    let totx: u128 = (0..n)
        .flat_map(|l| (0..n).map(move |m| (l, m)))
        .map(|(l, m)| d(xs[l], xs[m]))
        .sum();
    let toty: u128 = (0..n)
        .flat_map(|l| (0..n).map(move |m| (l, m)))
        .map(|(l, m)| d(ys[l], ys[m]))
        .sum();
    (t1, t2, totx * toty)
}

/// Literal loops for the single-variable statistic, with the O(n^3) triple
/// loop for t2.
pub fn triple_components_single(xs: &[usize]) -> (u128, u128, u128) {
    let n = xs.len();
    let d = |a: usize, b: usize| u128::from(a != b);
    let mut t1 = 0u128;
    for l in 0..n {
        for m in 0..n {
            t1 += d(xs[l], xs[m]);
        }
    }
    let mut t2 = 0u128;
    for l in 0..n {
        for m in 0..n {
            for q in 0..n {
                t2 += d(xs[l], xs[m]) * d(xs[l], xs[q]);
            }
        }
    }
    (t1, t2, t1 * t1)
}

/// Exact rational value of `t1/(n(n-3)) - 2 t2/(n(n-2)(n-3)) +
/// t3/(n(n-1)(n-2)(n-3))`.
pub fn rational_combine(t1: u128, t2: u128, t3: u128, n: u64) -> Ratio<i64> {
    let n = n as i64;
    Ratio::new(t1 as i64, n * (n - 3)) - Ratio::new(2 * t2 as i64, n * (n - 2) * (n - 3))
        + Ratio::new(t3 as i64, n * (n - 1) * (n - 2) * (n - 3))
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Random table with the given dimensions: n observations dropped uniformly
/// into the cells.
pub fn random_table<R: Rng>(rng: &mut R, rows: usize, cols: usize, n: u64) -> ContingencyTable {
    let mut grid = vec![vec![0u64; cols]; rows];
    for _ in 0..n {
        let cell = rng.gen_range(0..rows * cols);
        grid[cell / cols][cell % cols] += 1;
    }
    ContingencyTable::from_counts(grid).unwrap()
}

/// Strictly positive random pmf: cells uniform on [0.5, 1.5], normalized,
/// keeping every cell and margin well away from zero.
pub fn random_positive_pmf<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> JointPMF {
    let mut grid: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|_| 0.5 + rng.gen::<f64>()).collect())
        .collect();
    let total: f64 = grid.iter().flatten().sum();
    for row in &mut grid {
        for cell in row.iter_mut() {
            *cell /= total;
        }
    }
    JointPMF::new(grid).unwrap()
}

/// Random pmf that may contain zero cells and sharp spikes.
pub fn random_rough_pmf<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> JointPMF {
    let style = rng.gen_range(0..3u8);
    let mut grid: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    let v: f64 = rng.gen();
                    match style {
                        0 => v,
                        1 => {
                            if rng.gen::<f64>() < 0.7 {
                                0.0
                            } else {
                                v
                            }
                        }
                        _ => v * v * v * v,
                    }
                })
                .collect()
        })
        .collect();
    let mut total: f64 = grid.iter().flatten().sum();
    if total <= 0.0 {
        grid[0][0] = 1.0;
        total = 1.0;
    }
    if style == 2 {
        // plant a dominant spike
        let spike = 9.0 * total;
        grid[rng.gen_range(0..rows)][rng.gen_range(0..cols)] += spike;
        total += spike;
    }
    for row in &mut grid {
        for cell in row.iter_mut() {
            *cell /= total;
        }
    }
    JointPMF::new(grid).unwrap()
}

/// All count grids over `cells` cells summing to `n`.
pub fn enumerate_count_vectors(cells: usize, n: u64) -> Vec<Vec<u64>> {
    fn rec(cells: usize, n: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if cells == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=n {
            prefix.push(c);
            rec(cells - 1, n - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(cells, n, &mut Vec::new(), &mut out);
    out
}

/// Multinomial probability of `counts` under cell probabilities `probs`.
pub fn multinomial_weight(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let fact = |k: u64| -> f64 { (1..=k).map(|v| v as f64).product::<f64>().max(1.0) };
    let mut w = fact(n);
    for (&c, &p) in counts.iter().zip(probs) {
        if c > 0 && p == 0.0 {
            return 0.0;
        }
        w *= p.powi(c as i32) / fact(c);
    }
    w
}

/// Empirical quantile by nearest order statistic on a sorted copy.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}
