//! Linear discriminant analysis with Ledoit-Wolf shrinkage.
//!
//! The shared covariance is estimated from the pooled within-class
//! centered training data and shrunk toward a scaled identity:
//!
//! ```text
//! S      = Z^T Z / n                      (1/n normalisation)
//! mu     = tr(S) / d
//! delta2 = ||S - mu I||_F^2 / d
//! beta2  = min(delta2, (sum_k ||z_k||^4 / n - ||S||_F^2) / (n d))
//! lambda = beta2 / delta2                 (0 when beta2 == 0)
//! Sigma* = (1 - lambda) S + lambda mu I
//! ```
//!
//! # Model blob layout
//!
//! Little-endian:
//!
//! ```text
//! "SLDA", u32 version (1), u32 dim, u32 n_classes, f64 shrinkage
//! n_classes x i32 class label
//! n_classes x f64 log prior
//! n_classes x dim f64 class means, row-major
//! dim (dim + 1) / 2 f64 lower Cholesky factor of Sigma*, packed by rows
//! ```

use nalgebra::{DMatrix, DVector};
use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};

/// Result of a Ledoit-Wolf fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LedoitWolf {
    pub covariance: DMatrix<f64>,
    pub shrinkage: f64,
    /// Shrinkage target scale `tr(S) / d`.
    pub target_scale: f64,
}

/// Sufficient statistics of centered data for the shrinkage intensity.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ShrinkageStats {
    pub n: f64,
    pub d: f64,
    pub trace_s: f64,
    pub frob2_s: f64,
    pub sum_norm4: f64,
}

impl ShrinkageStats {
    /// Returns `(lambda, mu)`.
    pub(crate) fn intensity(&self) -> (f64, f64) {
        let mu = self.trace_s / self.d;
        let delta2 = (self.frob2_s - self.d * mu * mu).max(0.0) / self.d;
        let beta_bar2 = ((self.sum_norm4 / self.n - self.frob2_s) / (self.n * self.d)).max(0.0);
        let beta2 = beta_bar2.min(delta2);
        let lambda = if beta2 == 0.0 { 0.0 } else { beta2 / delta2 };
        (lambda.clamp(0.0, 1.0), mu)
    }
}

/// Shrinks the covariance of already-centered rows.
fn shrink_centered(z: &DMatrix<f64>) -> LedoitWolf {
    let n = z.nrows();
    let d = z.ncols();
    let s = (z.transpose() * z) / n as f64;
    let stats = ShrinkageStats {
        n: n as f64,
        d: d as f64,
        trace_s: s.trace(),
        frob2_s: s.norm_squared(),
        sum_norm4: z.row_iter().map(|r| r.norm_squared().powi(2)).sum(),
    };
    let (lambda, mu) = stats.intensity();
    let mut cov = s * (1.0 - lambda);
    for i in 0..d {
        cov[(i, i)] += lambda * mu;
    }
    LedoitWolf {
        covariance: cov,
        shrinkage: lambda,
        target_scale: mu,
    }
}

/// Ledoit-Wolf shrunk covariance of the rows of `data` (n samples x d
/// features), centered by the column means.
pub fn ledoit_wolf(data: &DMatrix<f64>) -> Result<LedoitWolf> {
    if data.nrows() < 2 {
        return invalid("Ledoit-Wolf needs at least two samples");
    }
    if data.ncols() < 1 {
        return invalid("Ledoit-Wolf needs at least one feature");
    }
    if data.iter().any(|v| !v.is_finite()) {
        return invalid("Ledoit-Wolf input contains non-finite values");
    }
    let mean = data.row_mean();
    let mut z = data.clone();
    for mut row in z.row_iter_mut() {
        row -= &mean;
    }
    Ok(shrink_centered(&z))
}

/// Something that produces per-class probabilities for a feature vector.
pub trait Classifier {
    fn classes(&self) -> &[i32];
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Something that fits a [`Classifier`] to labelled rows.
pub trait Trainer {
    type Model: Classifier;
    fn fit(&self, features: &DMatrix<f64>, labels: &[i32]) -> Result<Self::Model>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageLdaModel {
    classes: Vec<i32>,
    /// n_classes x dim
    means: DMatrix<f64>,
    covariance: DMatrix<f64>,
    /// lower Cholesky factor of `covariance`
    factor: DMatrix<f64>,
    shrinkage: f64,
    log_priors: Vec<f64>,
    /// dim x n_classes, `Sigma*^-1 mu_k`
    coef: DMatrix<f64>,
    intercept: Vec<f64>,
}

/// Sorted distinct labels with their counts.
pub fn class_counts(labels: &[i32]) -> Vec<(i32, usize)> {
    let mut sorted = labels.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<(i32, usize)> = Vec::new();
    for l in sorted {
        match out.last_mut() {
            Some((c, n)) if *c == l => *n += 1,
            _ => out.push((l, 1)),
        }
    }
    out
}

fn cholesky_lower(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(cov.clone())
        .map(|c| c.l())
        .ok_or_else(|| Error::Numeric("shrunk covariance is not positive definite".into()))
}

impl ShrinkageLdaModel {
    fn assemble(
        classes: Vec<i32>,
        means: DMatrix<f64>,
        covariance: DMatrix<f64>,
        factor: DMatrix<f64>,
        shrinkage: f64,
        log_priors: Vec<f64>,
    ) -> Result<Self> {
        let mt = means.transpose();
        let y = factor
            .solve_lower_triangular(&mt)
            .ok_or_else(|| Error::Numeric("singular covariance factor".into()))?;
        let coef = factor
            .tr_solve_lower_triangular(&y)
            .ok_or_else(|| Error::Numeric("singular covariance factor".into()))?;
        let intercept = (0..classes.len())
            .map(|k| -0.5 * mt.column(k).dot(&coef.column(k)) + log_priors[k])
            .collect();
        Ok(ShrinkageLdaModel {
            classes,
            means,
            covariance,
            factor,
            shrinkage,
            log_priors,
            coef,
            intercept,
        })
    }

    fn fit_with_min(features: &DMatrix<f64>, labels: &[i32], min_per_class: usize) -> Result<Self> {
        let (n, d) = features.shape();
        if labels.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: labels.len(),
            });
        }
        if d == 0 {
            return invalid("features must have at least one column");
        }
        if features.iter().any(|v| !v.is_finite()) {
            return invalid("features contain non-finite values");
        }
        let counts = class_counts(labels);
        if counts.len() < 2 {
            return invalid("training needs at least two classes");
        }
        if let Some((c, k)) = counts.iter().find(|(_, k)| *k < min_per_class) {
            return invalid(format!(
                "class {c} has {k} samples, need at least {min_per_class}"
            ));
        }
        let classes: Vec<i32> = counts.iter().map(|(c, _)| *c).collect();
        let class_of = |l: i32| classes.binary_search(&l).expect("known class");

        let mut means = DMatrix::zeros(classes.len(), d);
        for (i, &l) in labels.iter().enumerate() {
            let mut row = means.row_mut(class_of(l));
            row += features.row(i);
        }
        for (k, (_, cnt)) in counts.iter().enumerate() {
            let mut row = means.row_mut(k);
            row /= *cnt as f64;
        }
        let mut z = features.clone();
        for (i, &l) in labels.iter().enumerate() {
            let mut row = z.row_mut(i);
            row -= means.row(class_of(l));
        }
        let lw = shrink_centered(&z);
        let factor = cholesky_lower(&lw.covariance)?;
        let log_priors = counts
            .iter()
            .map(|(_, k)| (*k as f64 / n as f64).ln())
            .collect();
        Self::assemble(classes, means, lw.covariance, factor, lw.shrinkage, log_priors)
    }

    pub fn classes(&self) -> &[i32] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    /// Linear discriminant scores `x^T S^-1 mu_k - mu_k^T S^-1 mu_k / 2 + log pi_k`.
    pub fn decision_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let xv = DVector::from_column_slice(x);
        Ok((0..self.classes.len())
            .map(|k| xv.dot(&self.coef.column(k)) + self.intercept[k])
            .collect())
    }

    pub fn predict_log_prob(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(log_softmax(&self.decision_scores(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<i32> {
        let s = self.decision_scores(x)?;
        let best = s
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .expect("at least two classes");
        Ok(self.classes[best])
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let d = self.dim();
        w.write_all(b"SLDA")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(d as u32).to_le_bytes())?;
        w.write_all(&(self.classes.len() as u32).to_le_bytes())?;
        w.write_all(&self.shrinkage.to_le_bytes())?;
        for c in &self.classes {
            w.write_all(&c.to_le_bytes())?;
        }
        for p in &self.log_priors {
            w.write_all(&p.to_le_bytes())?;
        }
        for k in 0..self.classes.len() {
            for j in 0..d {
                w.write_all(&self.means[(k, j)].to_le_bytes())?;
            }
        }
        for i in 0..d {
            for j in 0..=i {
                w.write_all(&self.factor[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |len: usize| -> Result<&[u8]> {
            let out = buf
                .get(pos..pos + len)
                .ok_or_else(|| Error::Format("truncated model blob".into()))?;
            pos += len;
            Ok(out)
        };
        if take(4)? != b"SLDA" {
            return Err(Error::Format("not a model blob".into()));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let version = u32_at(take(4)?);
        if version != 1 {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let d = u32_at(take(4)?) as usize;
        let k = u32_at(take(4)?) as usize;
        if d == 0 || k < 2 {
            return Err(Error::Format("model blob has empty dimensions".into()));
        }
        let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
        let shrinkage = f64_at(take(8)?);
        let mut classes = Vec::with_capacity(k);
        for _ in 0..k {
            classes.push(i32::from_le_bytes(take(4)?.try_into().unwrap()));
        }
        let mut log_priors = Vec::with_capacity(k);
        for _ in 0..k {
            log_priors.push(f64_at(take(8)?));
        }
        let mut means = DMatrix::zeros(k, d);
        for c in 0..k {
            for j in 0..d {
                means[(c, j)] = f64_at(take(8)?);
            }
        }
        let mut factor = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                factor[(i, j)] = f64_at(take(8)?);
            }
        }
        if pos != buf.len() {
            return Err(Error::Format("trailing bytes after model blob".into()));
        }
        let covariance = &factor * factor.transpose();
        Self::assemble(classes, means, covariance, factor, shrinkage, log_priors)
    }
}

impl Classifier for ShrinkageLdaModel {
    fn classes(&self) -> &[i32] {
        &self.classes
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.decision_scores(x)?))
    }
}

pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - lse).collect()
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Shrinkage LDA trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShrinkageLda {
    /// Smallest class size accepted by [`Trainer::fit`].
    pub min_class_size: usize,
}

impl Default for ShrinkageLda {
    fn default() -> Self {
        ShrinkageLda { min_class_size: 2 }
    }
}

impl ShrinkageLda {
    /// Trainer for cross-validation folds, where a held-out sample may
    /// leave a class with a single member.
    pub fn for_folds() -> Self {
        ShrinkageLda { min_class_size: 1 }
    }
}

impl Trainer for ShrinkageLda {
    type Model = ShrinkageLdaModel;

    fn fit(&self, features: &DMatrix<f64>, labels: &[i32]) -> Result<ShrinkageLdaModel> {
        ShrinkageLdaModel::fit_with_min(features, labels, self.min_class_size.max(1))
    }
}

/// Trains a model; every class needs at least two samples.
pub fn train(features: &DMatrix<f64>, labels: &[i32]) -> Result<ShrinkageLdaModel> {
    ShrinkageLda::default().fit(features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn one_dimensional_pair() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        let lw = ledoit_wolf(&x).unwrap();
        assert_eq!(lw.covariance[(0, 0)], 1.0);
        assert_eq!(lw.target_scale, 1.0);
        assert!((0.0..=1.0).contains(&lw.shrinkage));
    }

    #[test]
    fn isotropic_sample_unchanged() {
        // Rows +-sqrt(n/2) e_j give S = I exactly.
        let d = 3;
        let mut x = DMatrix::zeros(2 * d, d);
        let a = (d as f64).sqrt();
        for j in 0..d {
            x[(2 * j, j)] = a;
            x[(2 * j + 1, j)] = -a;
        }
        let lw = ledoit_wolf(&x).unwrap();
        assert!((&lw.covariance - DMatrix::identity(d, d)).amax() < 1e-12);
        assert!((0.0..=1.0).contains(&lw.shrinkage));
    }

    #[test]
    fn ledoit_wolf_input_checks() {
        assert!(ledoit_wolf(&DMatrix::zeros(1, 3)).is_err());
        let mut x = DMatrix::zeros(3, 2);
        x[(1, 1)] = f64::INFINITY;
        assert!(ledoit_wolf(&x).is_err());
    }

    #[test]
    fn separated_one_dimensional_classes() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 0.1, 10.0, 10.1]);
        let model = train(&x, &[0, 0, 1, 1]).unwrap();
        assert_eq!(model.predict(&[0.1]).unwrap(), 0);
        assert_eq!(model.predict(&[10.0]).unwrap(), 1);
        // boundary strictly between the classes
        let mut lo = 0.1;
        let mut hi = 10.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if model.predict(&[mid]).unwrap() == 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!(lo > 0.1 && hi < 10.0);
    }

    #[test]
    fn training_errors() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        assert!(train(&x, &[0, 0, 1]).is_err());
        assert!(train(&x, &[0, 0, 0]).is_err());
        assert!(train(&x, &[0, 1]).is_err());
        assert!(ShrinkageLda::for_folds().fit(&x, &[0, 0, 1]).is_ok());
    }

    #[test]
    fn probabilities_normalised() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = randn(40, 6, &mut rng);
        let labels: Vec<i32> = (0..40).map(|i| (i % 4) as i32).collect();
        let model = train(&x, &labels).unwrap();
        for _ in 0..20 {
            let q = randn(1, 6, &mut rng);
            let lp = model.predict_log_prob(q.as_slice()).unwrap();
            let total: f64 = lp.iter().map(|v| v.exp()).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        assert!(model.predict_log_prob(&[0.0; 5]).is_err());
    }

    #[test]
    fn class_mean_wins_with_equal_priors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = randn(30, 4, &mut rng) * 0.1;
        let labels: Vec<i32> = (0..30).map(|i| (i % 3) as i32).collect();
        for (i, &l) in labels.iter().enumerate() {
            x[(i, l as usize)] += 5.0;
        }
        let model = train(&x, &labels).unwrap();
        for k in 0..3 {
            let mean: Vec<f64> = model.means().row(k).iter().copied().collect();
            assert_eq!(model.predict(&mean).unwrap(), k as i32);
        }
    }

    #[test]
    fn model_blob_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = randn(25, 5, &mut rng);
        let labels: Vec<i32> = (0..25).map(|i| [3, 1, 2][i % 3]).collect();
        let model = train(&x, &labels).unwrap();
        let blob = model.to_bytes();
        let back = ShrinkageLdaModel::from_bytes(&blob).unwrap();
        assert_eq!(back.classes(), model.classes());
        assert_eq!(back.means(), model.means());
        assert_eq!(back.cholesky_factor(), model.cholesky_factor());
        assert_eq!(back.shrinkage(), model.shrinkage());
        let q = [0.3, -1.0, 0.2, 0.0, 1.5];
        assert_eq!(
            back.predict_log_prob(&q).unwrap(),
            model.predict_log_prob(&q).unwrap()
        );
        assert_eq!(back.to_bytes(), blob);
        assert!(ShrinkageLdaModel::from_bytes(&blob[..blob.len() - 3]).is_err());
        let mut bad = blob.clone();
        bad[4] = 2;
        assert!(ShrinkageLdaModel::from_bytes(&bad).is_err());
    }
}
