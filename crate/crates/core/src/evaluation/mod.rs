//! Leave-one-out evaluation, AUC and permutation significance.

mod fast;

pub use fast::FastLdaLoo;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lda::{class_counts, Classifier, Trainer};

/// Largest tolerated share of folds skipped because a class vanished.
pub const MAX_SKIPPED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Explicit,
    Group,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Explicit => "explicit",
            Task::Group => "group",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Task::Explicit),
            "group" => Ok(Task::Group),
            _ => invalid(format!("unknown task {s:?}")),
        }
    }
}

/// Held-out probability rows, `None` where the fold was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct LooOutcome {
    pub classes: Vec<i32>,
    pub rows: Vec<Option<Vec<f64>>>,
    pub skipped: usize,
}

impl LooOutcome {
    pub(crate) fn finish(classes: Vec<i32>, rows: Vec<Option<Vec<f64>>>, skipped: usize) -> Result<Self> {
        if skipped as f64 > MAX_SKIPPED_FRACTION * rows.len() as f64 {
            return Err(Error::TooManySkippedFolds {
                skipped,
                total: rows.len(),
            });
        }
        Ok(LooOutcome {
            classes,
            rows,
            skipped,
        })
    }

    pub fn fold_count(&self) -> usize {
        self.rows.len() - self.skipped
    }

    /// AUC over the folds that were evaluated.
    pub fn auc(&self, labels: &[i32]) -> Result<f64> {
        if labels.len() != self.rows.len() {
            return Err(Error::Dimension {
                expected: self.rows.len(),
                actual: labels.len(),
            });
        }
        let (rows, kept): (Vec<Vec<f64>>, Vec<i32>) = self
            .rows
            .iter()
            .zip(labels)
            .filter_map(|(r, &l)| r.clone().map(|r| (r, l)))
            .unzip();
        auc_with_classes(&rows, &kept, &self.classes)
    }
}

/// Anything that can run a complete leave-one-out pass for a labelling.
pub trait LooEvaluator: Sync {
    fn n_samples(&self) -> usize;
    fn evaluate(&self, labels: &[i32]) -> Result<LooOutcome>;
}

/// Reference leave-one-out: refits the trainer on every fold.
pub struct NaiveLoo<'a, T> {
    pub features: &'a DMatrix<f64>,
    pub trainer: T,
}

impl<T: Trainer + Sync> LooEvaluator for NaiveLoo<'_, T> {
    fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    fn evaluate(&self, labels: &[i32]) -> Result<LooOutcome> {
        loo_scores(self.features, labels, &self.trainer)
    }
}

/// Per-sample held-out probability rows, refitting `trainer` for every fold.
/// A fold whose training part would lose a class is skipped.
pub fn loo_scores<T: Trainer>(features: &DMatrix<f64>, labels: &[i32], trainer: &T) -> Result<LooOutcome> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: labels.len(),
        });
    }
    let counts = class_counts(labels);
    if counts.len() < 2 {
        return invalid("leave-one-out needs at least two classes");
    }
    let classes: Vec<i32> = counts.iter().map(|(c, _)| *c).collect();
    let mut rows = Vec::with_capacity(n);
    let mut skipped = 0;
    for i in 0..n {
        let c = classes.binary_search(&labels[i]).unwrap();
        if counts[c].1 < 2 {
            rows.push(None);
            skipped += 1;
            continue;
        }
        let x = features.clone().remove_row(i);
        let mut y = labels.to_vec();
        y.remove(i);
        let model = trainer.fit(&x, &y)?;
        let xi: Vec<f64> = features.row(i).iter().copied().collect();
        let proba = model.predict_proba(&xi)?;
        if model.classes() != classes.as_slice() {
            return Err(Error::Numeric("fold model lost a class".into()));
        }
        rows.push(Some(proba));
    }
    LooOutcome::finish(classes, rows, skipped)
}

/// Mann-Whitney AUC of `scores` for the positives, ties counted one half.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Dimension {
            expected: scores.len(),
            actual: positive.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return invalid("AUC scores contain NaN");
    }
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return invalid("AUC needs both positive and negative samples");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // doubled midranks keep the sums integral
    let mut rank2_pos: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mid2 = (start + 1 + end) as u64;
        for &j in &order[start..end] {
            if positive[j] {
                rank2_pos += mid2;
            }
        }
        start = end;
    }
    let np = n_pos as u64;
    let u2 = rank2_pos - np * (np + 1);
    Ok(u2 as f64 / 2.0 / (n_pos as f64 * n_neg as f64))
}

/// Binary AUC of the larger class label, or the unweighted mean of the
/// one-vs-rest AUCs for more than two classes.
pub fn auc(rows: &[Vec<f64>], labels: &[i32]) -> Result<f64> {
    let classes: Vec<i32> = class_counts(labels).into_iter().map(|(c, _)| c).collect();
    auc_with_classes(rows, labels, &classes)
}

/// As [`auc`], with the column order of `rows` given by `classes`.
pub fn auc_with_classes(rows: &[Vec<f64>], labels: &[i32], classes: &[i32]) -> Result<f64> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != classes.len()) {
        return Err(Error::Dimension {
            expected: classes.len(),
            actual: r.len(),
        });
    }
    let present = class_counts(labels);
    if present.len() < 2 {
        return invalid("AUC needs at least two classes in the labels");
    }
    if let Some((c, _)) = present.iter().find(|(c, _)| !classes.contains(c)) {
        return invalid(format!("label {c} has no probability column"));
    }
    if classes.len() == 2 {
        let pos: Vec<bool> = labels.iter().map(|&l| l == classes[1]).collect();
        let s: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        return binary_auc(&s, &pos);
    }
    let mut total = 0.0;
    let mut used = 0;
    for (k, &c) in classes.iter().enumerate() {
        if !present.iter().any(|(p, _)| *p == c) {
            continue;
        }
        let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        let s: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        total += binary_auc(&s, &pos)?;
        used += 1;
    }
    Ok(total / used as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub participant_id: String,
    pub task: Task,
    pub auc: f64,
    pub null_aucs: Vec<f64>,
    pub p_value: f64,
    pub fold_count: usize,
    pub skipped_folds: usize,
    pub class_histogram: BTreeMap<i32, usize>,
    pub seed: u64,
}

impl EvaluationReport {
    pub fn n_perm(&self) -> usize {
        self.null_aucs.len()
    }
}

/// Add-one permutation p-value.
pub fn permutation_p_value(observed: f64, null: &[f64]) -> f64 {
    let exceed = null.iter().filter(|&&v| v >= observed).count();
    (1 + exceed) as f64 / (1 + null.len()) as f64
}

/// Labels shuffled for permutation `index`; each permutation draws from
/// its own stream of the master seed.
pub fn permuted_labels(labels: &[i32], seed: u64, index: u64) -> Vec<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut y = labels.to_vec();
    y.shuffle(&mut rng);
    y
}

/// Observed leave-one-out AUC against `n_perm` full re-evaluations with
/// shuffled labels.
pub fn permutation_test<E: LooEvaluator>(
    evaluator: &E,
    participant_id: &str,
    task: Task,
    labels: &[i32],
    n_perm: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let observed = evaluator.evaluate(labels)?;
    let auc = observed.auc(labels)?;
    let null_aucs = (0..n_perm as u64)
        .into_par_iter()
        .map(|p| {
            let y = permuted_labels(labels, seed, p);
            evaluator.evaluate(&y)?.auc(&y)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EvaluationReport {
        participant_id: participant_id.to_string(),
        task,
        p_value: permutation_p_value(auc, &null_aucs),
        auc,
        null_aucs,
        fold_count: observed.fold_count(),
        skipped_folds: observed.skipped,
        class_histogram: class_counts(labels).into_iter().collect(),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantFlag {
    pub participant_id: String,
    pub auc: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n_participants: usize,
    pub mean_auc: f64,
    /// sample standard deviation, 0 for a single participant
    pub sd_auc: f64,
    pub alpha: f64,
    pub significant_count: usize,
    pub participants: Vec<ParticipantFlag>,
}

impl CohortSummary {
    pub fn significant_fraction(&self) -> f64 {
        self.significant_count as f64 / self.n_participants as f64
    }
}

pub fn cohort_summary(reports: &[EvaluationReport], alpha: f64) -> Result<CohortSummary> {
    if reports.is_empty() {
        return invalid("cohort summary needs at least one report");
    }
    let n = reports.len() as f64;
    let mean = reports.iter().map(|r| r.auc).sum::<f64>() / n;
    let sd = if reports.len() > 1 {
        (reports.iter().map(|r| (r.auc - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let participants: Vec<ParticipantFlag> = reports
        .iter()
        .map(|r| ParticipantFlag {
            participant_id: r.participant_id.clone(),
            auc: r.auc,
            p_value: r.p_value,
            significant: r.p_value <= alpha,
        })
        .collect();
    Ok(CohortSummary {
        n_participants: reports.len(),
        mean_auc: mean,
        sd_auc: sd,
        alpha,
        significant_count: participants.iter().filter(|p| p.significant).count(),
        participants,
    })
}
