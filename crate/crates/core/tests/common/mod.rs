//! Independent reference implementations shared by the test targets.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Shrinkage estimate written straight from the estimator's definition:
/// normalized Frobenius norm `<A, B> = tr(A B^T) / p`, target `m I`,
/// `b^2` as the mean normalized distance of each outer product from `S`.
pub fn ledoit_wolf_literal(x: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = x.len();
    let p = x[0].len();
    let mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let z: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&mean).map(|(a, m)| a - m).collect()).collect();
    let mut s = vec![vec![0.0; p]; p];
    for r in &z {
        for i in 0..p {
            for j in 0..p {
                s[i][j] += r[i] * r[j] / n as f64;
            }
        }
    }
    let norm2 = |a: &dyn Fn(usize, usize) -> f64| {
        let mut acc = 0.0;
        for i in 0..p {
            for j in 0..p {
                acc += a(i, j) * a(i, j);
            }
        }
        acc / p as f64
    };
    let m = (0..p).map(|i| s[i][i]).sum::<f64>() / p as f64;
    let d2 = norm2(&|i, j| s[i][j] - if i == j { m } else { 0.0 });
    let mut b_bar2 = 0.0;
    for r in &z {
        b_bar2 += norm2(&|i, j| r[i] * r[j] - s[i][j]);
    }
    b_bar2 /= (n * n) as f64;
    let b2 = b_bar2.min(d2);
    let lambda = if d2 == 0.0 { 0.0 } else { b2 / d2 };
    let a2 = d2 - b2;
    let sigma = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    let target = if i == j { m } else { 0.0 };
                    if d2 == 0.0 {
                        s[i][j]
                    } else {
                        (b2 / d2) * target + (a2 / d2) * s[i][j]
                    }
                })
                .collect()
        })
        .collect();
    (sigma, lambda)
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// O(n^2) pair counting, ties one half.
pub fn auc_pairs(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if positive[i] && !positive[j] {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Repeated-measures F from the textbook partition
/// `SS_total = SS_subjects + SS_conditions + SS_error`.
pub fn rm_anova_ss(data: &[Vec<f64>]) -> (f64, usize, usize) {
    let n = data.len();
    let k = data[0].len();
    let all: Vec<f64> = data.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let ss_total: f64 = all.iter().map(|v| (v - grand).powi(2)).sum();
    let ss_subj: f64 = data
        .iter()
        .map(|r| k as f64 * (r.iter().sum::<f64>() / k as f64 - grand).powi(2))
        .sum();
    let ss_cond: f64 = (0..k)
        .map(|j| n as f64 * (data.iter().map(|r| r[j]).sum::<f64>() / n as f64 - grand).powi(2))
        .sum();
    let ss_err = ss_total - ss_subj - ss_cond;
    let (df1, df2) = (k - 1, (k - 1) * (n - 1));
    ((ss_cond / df1 as f64) / (ss_err / df2 as f64), df1, df2)
}
