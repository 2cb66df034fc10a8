//! Exact leave-one-out for shrinkage LDA without refitting.
//!
//! The data are centered once and expressed in an orthonormal basis of
//! their row space where the total scatter is diagonal (`Lambda`). For a
//! labelling, the within-class scatter is `W = Lambda - sum_k n_k m_k m_k^T`.
//! Removing sample `i` of class `c` gives
//!
//! ```text
//! W' = W - alpha u u^T,  u = x_i - m_c,  alpha = n_c / (n_c - 1)
//! ```
//!
//! The Ledoit-Wolf statistics of the reduced fold (trace, Frobenius norm,
//! fourth moments) follow from per-labelling sums, so each fold's
//! `Sigma*' = a W' + b I = D - U U^T` with diagonal `D` and `K + 1` rank-one
//! terms. Every vector a prediction needs lies in the span of the class
//! means and `x_i`, so the Woodbury identity reduces each fold to a
//! `(K+1) x (K+1)` solve. Predictions are invariant to translating all
//! samples, which makes the initial centering harmless.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{LooEvaluator, LooOutcome};
use crate::error::{invalid, Error, Result};
use crate::lda::{class_counts, softmax, ShrinkageStats};

/// Label-independent decomposition of one feature matrix.
#[derive(Debug, Clone)]
pub struct FastLdaLoo {
    n: usize,
    /// full feature dimension, used by the shrinkage target
    d: usize,
    /// reduced dimension
    r: usize,
    /// n x r row-major coordinates
    coords: Vec<f64>,
    /// diagonal total scatter in the reduced basis
    lambda: Vec<f64>,
    /// n x n Gram matrix
    gram: Vec<f64>,
    /// x_i^T Lambda x_i
    x_lambda_x: Vec<f64>,
    sum_lambda: f64,
    sum_lambda2: f64,
}

impl FastLdaLoo {
    pub fn new(features: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = features.shape();
        if n < 3 || d == 0 {
            return invalid("fast leave-one-out needs at least three samples and one feature");
        }
        if features.iter().any(|v| !v.is_finite()) {
            return invalid("features contain non-finite values");
        }
        let mean = features.row_mean();
        let mut x = features.clone();
        for mut row in x.row_iter_mut() {
            row -= &mean;
        }
        let (tilde, lambda) = if n >= d {
            let eig = SymmetricEigen::new(x.transpose() * &x);
            let lambda: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
            (&x * eig.eigenvectors, lambda)
        } else {
            let eig = SymmetricEigen::new(&x * x.transpose());
            let lambda: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
            let mut t = eig.eigenvectors;
            for (j, mut col) in t.column_iter_mut().enumerate() {
                col *= lambda[j].sqrt();
            }
            (t, lambda)
        };
        let r = tilde.ncols();
        let mut coords = vec![0.0; n * r];
        for i in 0..n {
            for j in 0..r {
                coords[i * r + j] = tilde[(i, j)];
            }
        }
        let g = &tilde * tilde.transpose();
        let gram = (0..n * n).map(|p| g[(p / n, p % n)]).collect();
        let x_lambda_x = (0..n)
            .map(|i| {
                let row = &coords[i * r..(i + 1) * r];
                row.iter().zip(&lambda).map(|(v, l)| v * v * l).sum()
            })
            .collect();
        Ok(FastLdaLoo {
            n,
            d,
            r,
            coords,
            sum_lambda: lambda.iter().sum(),
            sum_lambda2: lambda.iter().map(|l| l * l).sum(),
            lambda,
            gram,
            x_lambda_x,
        })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.r..(i + 1) * self.r]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LooEvaluator for FastLdaLoo {
    fn n_samples(&self) -> usize {
        self.n
    }

    fn evaluate(&self, labels: &[i32]) -> Result<LooOutcome> {
        let (n, r) = (self.n, self.r);
        if labels.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: labels.len(),
            });
        }
        let counts = class_counts(labels);
        let kk = counts.len();
        if kk < 2 {
            return invalid("leave-one-out needs at least two classes");
        }
        let classes: Vec<i32> = counts.iter().map(|(c, _)| *c).collect();
        let nk: Vec<f64> = counts.iter().map(|(_, k)| *k as f64).collect();
        let cls: Vec<usize> = labels
            .iter()
            .map(|l| classes.binary_search(l).unwrap())
            .collect();

        // class means and their products
        let mut means = vec![vec![0.0; r]; kk];
        for i in 0..n {
            for (m, x) in means[cls[i]].iter_mut().zip(self.row(i)) {
                *m += x;
            }
        }
        for (k, m) in means.iter_mut().enumerate() {
            m.iter_mut().for_each(|v| *v /= nk[k]);
        }
        let lam_means: Vec<Vec<f64>> = means
            .iter()
            .map(|m| m.iter().zip(&self.lambda).map(|(a, l)| a * l).collect())
            .collect();
        let mut mm = vec![vec![0.0; kk]; kk];
        for k in 0..kk {
            for l in 0..=k {
                let v = dot(&means[k], &means[l]);
                mm[k][l] = v;
                mm[l][k] = v;
            }
        }
        let m_lam_m: Vec<f64> = (0..kk).map(|k| dot(&means[k], &lam_means[k])).collect();

        // P[i][k] = x_i . m_k,  Q[i][k] = x_i^T Lambda m_k
        let mut p = vec![0.0; n * kk];
        let mut q = vec![0.0; n * kk];
        for i in 0..n {
            let x = self.row(i);
            for k in 0..kk {
                p[i * kk + k] = dot(x, &means[k]);
                q[i * kk + k] = dot(x, &lam_means[k]);
            }
        }

        // squared norms of within-class residuals
        let zz = |i: usize, j: usize| -> f64 {
            let c = cls[i];
            debug_assert_eq!(c, cls[j]);
            self.gram[i * n + j] - p[i * kk + c] - p[j * kk + c] + mm[c][c]
        };
        let a: Vec<f64> = (0..n).map(|i| zz(i, i)).collect();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); kk];
        for i in 0..n {
            members[cls[i]].push(i);
        }
        let class_a: Vec<f64> = members
            .iter()
            .map(|m| m.iter().map(|&i| a[i]).sum())
            .collect();
        let mut h = vec![0.0; n];
        let mut gz = vec![0.0; n];
        for m in &members {
            for &i in m {
                let (mut hs, mut gs) = (0.0, 0.0);
                for &j in m {
                    let v = zz(i, j);
                    hs += v * v;
                    gs += a[j] * v;
                }
                h[i] = hs;
                gz[i] = gs;
            }
        }
        let f_total: f64 = a.iter().map(|v| v * v).sum();

        // Frobenius norm and trace of W
        let tr_w = self.sum_lambda - (0..kk).map(|k| nk[k] * mm[k][k]).sum::<f64>();
        let mut frob_w = self.sum_lambda2 - 2.0 * (0..kk).map(|k| nk[k] * m_lam_m[k]).sum::<f64>();
        for k in 0..kk {
            for l in 0..kk {
                frob_w += nk[k] * nk[l] * mm[k][l] * mm[k][l];
            }
        }

        let n_train = (n - 1) as f64;
        let dim = kk + 1;
        let mut rows = vec![None; n];
        let mut skipped = 0;
        let mut weights = vec![0.0; r];
        for i in 0..n {
            let c = cls[i];
            let nc = nk[c];
            if nc < 2.0 {
                skipped += 1;
                continue;
            }
            let ncm1 = nc - 1.0;
            let alpha = nc / ncm1;
            let ai = a[i];

            let m_dot_u: Vec<f64> = (0..kk).map(|k| p[i * kk + k] - mm[k][c]).collect();
            let u_lam_u = self.x_lambda_x[i] - 2.0 * q[i * kk + c] + m_lam_m[c];
            let u_w_u = u_lam_u - (0..kk).map(|k| nk[k] * m_dot_u[k].powi(2)).sum::<f64>();
            let tr_wi = tr_w - alpha * ai;
            let frob_wi = frob_w - 2.0 * alpha * u_w_u + alpha * alpha * ai * ai;

            let s = ai / (ncm1 * ncm1);
            let sum_a = class_a[c] - ai;
            let sum_b = -ai / ncm1;
            let sum_b2 = (h[i] - ai * ai) / (ncm1 * ncm1);
            let sum_ab = (gz[i] - ai * ai) / ncm1;
            let f_i = f_total - ai * ai
                + 4.0 * sum_ab
                + 4.0 * sum_b2
                + ncm1 * s * s
                + 2.0 * s * sum_a
                + 4.0 * s * sum_b;

            let stats = ShrinkageStats {
                n: n_train,
                d: self.d as f64,
                trace_s: tr_wi / n_train,
                frob2_s: frob_wi / (n_train * n_train),
                sum_norm4: f_i,
            };
            let (lam, mu) = stats.intensity();
            let sa = (1.0 - lam) / n_train;
            let sb = lam * mu;

            // H = B^T D^-1 B over B = [m_0 .. m_{K-1}, x_i]
            for (w, l) in weights.iter_mut().zip(&self.lambda) {
                let dj = sa * l + sb;
                *w = 1.0 / dj;
            }
            if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                return Err(Error::Numeric(
                    "shrunk covariance is not positive definite".into(),
                ));
            }
            let x = self.row(i);
            let mut hm = DMatrix::zeros(dim, dim);
            for k in 0..dim {
                let bk: &[f64] = if k < kk { &means[k] } else { x };
                for l in 0..=k {
                    let bl: &[f64] = if l < kk { &means[l] } else { x };
                    let mut acc = 0.0;
                    for j in 0..r {
                        acc += bk[j] * bl[j] * weights[j];
                    }
                    hm[(k, l)] = acc;
                    hm[(l, k)] = acc;
                }
            }
            let mut cm = DMatrix::zeros(dim, dim);
            for k in 0..kk {
                cm[(k, k)] = (sa * nk[k]).sqrt();
            }
            let su = (sa * alpha).sqrt();
            cm[(kk, kk)] = su;
            cm[(c, kk)] = -su;
            let hc = &hm * &cm;
            let inner = DMatrix::identity(dim, dim) - cm.transpose() * &hc;
            let chol = inner
                .cholesky()
                .ok_or_else(|| Error::Numeric("shrunk covariance is not positive definite".into()))?;
            let g = &hm + &hc * chol.solve(&hc.transpose());

            let mut scores = Vec::with_capacity(kk);
            for k in 0..kk {
                let mut coef = vec![0.0; dim];
                coef[k] = 1.0;
                let mut nk_train = nk[k];
                if k == c {
                    coef[k] += 1.0 / ncm1;
                    coef[kk] = -1.0 / ncm1;
                    nk_train -= 1.0;
                }
                let mut x_g_m = 0.0;
                let mut m_g_m = 0.0;
                for s in 0..dim {
                    x_g_m += g[(kk, s)] * coef[s];
                    for t in 0..dim {
                        m_g_m += coef[s] * g[(s, t)] * coef[t];
                    }
                }
                scores.push(x_g_m - 0.5 * m_g_m + (nk_train / n_train).ln());
            }
            rows[i] = Some(softmax(&scores));
        }
        LooOutcome::finish(classes, rows, skipped)
    }
}
