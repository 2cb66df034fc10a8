//! Windowed-mean feature vectors.
//!
//! Window `k` covers `[50 + 50k, 100 + 50k)` ms after onset, `k < 15`.
//! Values are ordered channel-major: channel 0 windows 0..15, then
//! channel 1, and so on.

use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::labeling::LabeledEpochSet;
use crate::signal::{baseline_len, Epoch};

pub const N_WINDOWS: usize = 15;
pub const WINDOW_START_MS: f64 = 50.0;
pub const WINDOW_MS: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub participant_id: String,
    pub stimulus_id: String,
    pub values: Vec<f64>,
    pub label: i32,
}

/// First sample index whose offset is at or after `ms`; exact grid hits
/// are detected with a tolerance so `50 ms * 2 kHz` lands on 100.
fn index_at_or_after(ms: f64, rate: f64) -> usize {
    let x = ms * rate / 1000.0;
    let r = x.round();
    let samples = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    samples.max(0.0) as usize
}

/// Sample ranges `[start, end)` of the windows within an epoch.
pub fn window_bounds(sampling_rate_hz: f64) -> Vec<(usize, usize)> {
    let onset = baseline_len(sampling_rate_hz);
    (0..N_WINDOWS)
        .map(|k| {
            let a = WINDOW_START_MS + WINDOW_MS * k as f64;
            (
                onset + index_at_or_after(a, sampling_rate_hz),
                onset + index_at_or_after(a + WINDOW_MS, sampling_rate_hz),
            )
        })
        .collect()
}

/// Windowed means of a channels x samples array.
pub fn windowed_means(data: ArrayView2<f64>, sampling_rate_hz: f64) -> Result<Vec<f64>> {
    let bounds = window_bounds(sampling_rate_hz);
    let need = bounds.last().map(|b| b.1).unwrap_or(0);
    if data.ncols() < need {
        return invalid(format!(
            "epoch has {} samples, windows need {need}",
            data.ncols()
        ));
    }
    if bounds.iter().any(|(a, b)| b <= a) {
        return invalid(format!("sampling rate {sampling_rate_hz} Hz leaves a window empty"));
    }
    let mut out = Vec::with_capacity(data.nrows() * N_WINDOWS);
    for row in data.rows() {
        for &(a, b) in &bounds {
            let s = row.slice(ndarray::s![a..b]);
            out.push(s.sum() / (b - a) as f64);
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return invalid("epoch contains non-finite values");
    }
    Ok(out)
}

/// Feature vector of one labelled, non-rejected epoch.
pub fn vectorize(epoch: &Epoch, sampling_rate_hz: f64) -> Result<FeatureVector> {
    if epoch.is_rejected() {
        return invalid("cannot vectorize a rejected epoch");
    }
    let Some(label) = epoch.label else {
        return invalid("cannot vectorize an unlabelled epoch");
    };
    Ok(FeatureVector {
        participant_id: epoch.participant_id.clone(),
        stimulus_id: epoch.stimulus_id.clone(),
        values: windowed_means(epoch.data.view(), sampling_rate_hz)?,
        label: label as i32,
    })
}

pub fn vectorize_set(set: &LabeledEpochSet) -> Result<Vec<FeatureVector>> {
    let rate = set.epochs.sampling_rate_hz;
    set.epochs
        .epochs
        .par_iter()
        .map(|e| vectorize(e, rate))
        .collect()
}

/// Stacks feature vectors into an n x d matrix plus label list.
pub fn feature_matrix(vectors: &[FeatureVector]) -> Result<(DMatrix<f64>, Vec<i32>)> {
    let d = vectors.first().map(|v| v.values.len()).unwrap_or(0);
    if let Some(v) = vectors.iter().find(|v| v.values.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            actual: v.values.len(),
        });
    }
    let x = DMatrix::from_fn(vectors.len(), d, |i, j| vectors[i].values[j]);
    Ok((x, vectors.iter().map(|v| v.label).collect()))
}

pub fn write_features_csv(path: impl AsRef<Path>, vectors: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = vectors.first().map(|v| v.values.len()).unwrap_or(N_WINDOWS * 32);
    let mut header = vec![
        "participant_id".to_string(),
        "stimulus_id".into(),
        "label".into(),
    ];
    header.extend((0..d).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for v in vectors {
        let mut rec = vec![v.participant_id.clone(), v.stimulus_id.clone(), v.label.to_string()];
        rec.extend(v.values.iter().map(|x| format!("{x:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 3 {
            return Err(Error::Format("feature row has fewer than three fields".into()));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad feature value {s:?}")))
        };
        out.push(FeatureVector {
            participant_id: rec[0].to_string(),
            stimulus_id: rec[1].to_string(),
            label: rec[2]
                .parse()
                .map_err(|_| Error::Format(format!("bad label {:?}", &rec[2])))?,
            values: rec.iter().skip(3).map(parse).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

/// Convenience for tests and callers holding raw arrays.
pub fn vectorize_array(data: &Array2<f64>, sampling_rate_hz: f64) -> Result<Vec<f64>> {
    windowed_means(data.view(), sampling_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{epoch_len, epoch_time_axis_ms};

    #[test]
    fn windows_tile_interval_at_2khz() {
        let b = window_bounds(2000.0);
        assert_eq!(b.len(), 15);
        assert_eq!(b[0], (500, 600));
        for k in 0..15 {
            assert_eq!(b[k].1 - b[k].0, 100);
            if k > 0 {
                assert_eq!(b[k].0, b[k - 1].1);
            }
        }
        assert_eq!(b[14].1, 2000);
    }

    #[test]
    fn constant_epoch() {
        let x = Array2::from_elem((32, 2200), 3.25);
        let v = vectorize_array(&x, 2000.0).unwrap();
        assert_eq!(v.len(), 480);
        assert!(v.iter().all(|&a| a == 3.25));
    }

    #[test]
    fn ramp_first_window() {
        let t = epoch_time_axis_ms(2000.0);
        let mut x = Array2::zeros((32, epoch_len(2000.0)));
        for (j, &ms) in t.iter().enumerate() {
            x[(3, j)] = ms;
        }
        let v = vectorize_array(&x, 2000.0).unwrap();
        assert_eq!(v[3 * 15], 74.75);
        assert_eq!(v[3 * 15 + 14], 774.75);
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn short_epoch_rejected() {
        let x = Array2::zeros((32, 1999));
        assert!(vectorize_array(&x, 2000.0).is_err());
    }

    #[test]
    fn odd_rate_windows_partition() {
        let rate = 333.0;
        let b = window_bounds(rate);
        let t = epoch_time_axis_ms(rate);
        for (k, &(a, e)) in b.iter().enumerate() {
            let lo = 50.0 + 50.0 * k as f64;
            assert!(t[a] >= lo - 1e-9 && t[a - 1] < lo);
            assert!(t[e - 1] < lo + 50.0);
            if k > 0 {
                assert_eq!(a, b[k - 1].1);
            }
        }
    }
}
