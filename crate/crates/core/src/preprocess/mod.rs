//! Reference, filter, epoch, baseline-correct, reject.

pub mod filter;

use ndarray::{s, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{
    baseline_len, epoch_len, ContinuousRecording, Epoch, EpochSet, RejectReason,
};
pub use filter::{design_bandpass, FilterSpec, SosFilter};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum RejectionPolicy {
    /// Reject epochs whose absolute maximum exceeds this many microvolts.
    FixedThreshold(f64),
    /// Pick the threshold whose rejection fraction is closest to this value.
    TargetFraction(f64),
}

impl Default for RejectionPolicy {
    fn default() -> Self {
        RejectionPolicy::TargetFraction(0.122)
    }
}

impl RejectionPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RejectionPolicy::FixedThreshold(t) if !(t > 0.0) || !t.is_finite() => {
                invalid(format!("rejection threshold must be positive, got {t}"))
            }
            RejectionPolicy::TargetFraction(f) if !(f > 0.0 && f < 1.0) => {
                invalid(format!("rejection fraction must lie in (0, 1), got {f}"))
            }
            _ => Ok(()),
        }
    }
}

/// Subtracts the across-channel mean from every time point, in place.
pub fn common_average_reference_inplace(rec: &mut ContinuousRecording) -> Result<()> {
    if rec.n_channels() < 2 {
        return invalid("common average reference needs at least two channels");
    }
    let mean = rec.samples.mean_axis(Axis(0)).expect("non-empty");
    rec.samples -= &mean.insert_axis(Axis(0));
    Ok(())
}

pub fn common_average_reference(rec: &ContinuousRecording) -> Result<ContinuousRecording> {
    let mut out = rec.clone();
    common_average_reference_inplace(&mut out)?;
    Ok(out)
}

pub fn bandpass_inplace(rec: &mut ContinuousRecording, spec: &FilterSpec) -> Result<()> {
    let sos = design_bandpass(spec, rec.sampling_rate_hz)?;
    if rec.samples.iter().any(|v| !v.is_finite()) {
        return invalid("recording contains non-finite samples");
    }
    let n = rec.n_samples();
    if n == 0 {
        return Ok(());
    }
    let data = rec
        .samples
        .as_slice_mut()
        .ok_or_else(|| Error::InvalidInput("recording samples must be contiguous".into()))?;
    data.par_chunks_mut(n)
        .try_for_each(|row| sos.apply(row, spec.zero_phase))
}

pub fn bandpass(rec: &ContinuousRecording, spec: &FilterSpec) -> Result<ContinuousRecording> {
    let mut out = rec.clone();
    bandpass_inplace(&mut out, spec)?;
    Ok(out)
}

/// Cuts one `[-200, +900)` ms epoch per event. Events without enough
/// history or future are kept, zero-filled where out of range, and flagged
/// [`RejectReason::Edge`].
pub fn extract_epochs(rec: &ContinuousRecording) -> EpochSet {
    let rate = rec.sampling_rate_hz;
    let len = epoch_len(rate);
    let pre = baseline_len(rate);
    let n = rec.n_samples() as i64;
    let mut set = EpochSet::new(rate, rec.channel_labels.clone());
    set.epochs = rec
        .events
        .iter()
        .map(|ev| {
            let start = ev.sample_index as i64 - pre as i64;
            let end = start + len as i64;
            let (data, rejection) = if start >= 0 && end <= n {
                let d = rec
                    .samples
                    .slice(s![.., start as usize..end as usize])
                    .to_owned();
                (d, None)
            } else {
                let mut d = Array2::zeros((rec.n_channels(), len));
                let lo = start.max(0);
                let hi = end.min(n);
                if lo < hi {
                    d.slice_mut(s![.., (lo - start) as usize..(hi - start) as usize])
                        .assign(&rec.samples.slice(s![.., lo as usize..hi as usize]));
                }
                (d, Some(RejectReason::Edge))
            };
            Epoch {
                participant_id: rec.participant_id.clone(),
                stimulus_id: ev.stimulus_id.clone(),
                presentation_ordinal: ev.presentation_ordinal,
                data,
                rejection,
                label: None,
            }
        })
        .collect();
    set
}

/// Subtracts each channel's pre-stimulus mean from the whole epoch.
pub fn baseline_correct_inplace(set: &mut EpochSet) {
    let pre = baseline_len(set.sampling_rate_hz);
    if pre == 0 {
        return;
    }
    set.epochs.par_iter_mut().for_each(|e| {
        for mut row in e.data.rows_mut() {
            let m = row.slice(s![..pre]).sum() / pre as f64;
            row -= m;
        }
    });
}

pub fn baseline_correct(set: &EpochSet) -> EpochSet {
    let mut out = set.clone();
    baseline_correct_inplace(&mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionOutcome {
    /// Epochs are rejected when their absolute maximum exceeds this value.
    pub threshold_uv: f64,
    pub considered: usize,
    pub rejected: usize,
    pub fraction: f64,
}

fn abs_max(e: &Epoch) -> f64 {
    e.data.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Chooses the cut over descending order statistics whose rejected count is
/// closest to `fraction * n`. Returns the threshold (largest kept value).
fn quantile_threshold(maxima: &[f64], fraction: f64) -> f64 {
    let mut sorted = maxima.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let m = sorted.len();
    let target = fraction * m as f64;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..=m {
        // rejecting the top k requires a strict gap below position k
        let threshold = if k == m {
            sorted[m - 1] - 1.0
        } else if k == 0 || sorted[k] < sorted[k - 1] {
            sorted[k]
        } else {
            continue;
        };
        let dist = (k as f64 - target).abs();
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, threshold));
        }
    }
    best.expect("k = m is always achievable").1
}

/// Flags artifact epochs. Epochs already rejected (edge) are ignored.
pub fn reject_artifacts(set: &mut EpochSet, policy: &RejectionPolicy) -> Result<RejectionOutcome> {
    policy.validate()?;
    let candidates: Vec<usize> = (0..set.epochs.len())
        .filter(|&i| !set.epochs[i].is_rejected())
        .collect();
    if candidates.is_empty() {
        return invalid("no epochs available for artifact rejection");
    }
    let maxima: Vec<f64> = candidates
        .par_iter()
        .map(|&i| abs_max(&set.epochs[i]))
        .collect();
    let threshold = match *policy {
        RejectionPolicy::FixedThreshold(t) => t,
        RejectionPolicy::TargetFraction(f) => quantile_threshold(&maxima, f),
    };
    let mut rejected = 0;
    for (&i, &m) in candidates.iter().zip(&maxima) {
        if m > threshold {
            set.epochs[i].rejection = Some(RejectReason::Artifact);
            rejected += 1;
        }
    }
    Ok(RejectionOutcome {
        threshold_uv: threshold,
        considered: candidates.len(),
        rejected,
        fraction: rejected as f64 / candidates.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub participant_id: String,
    pub events: usize,
    pub edge_rejected: usize,
    pub artifact_rejected: usize,
    pub kept: usize,
    pub threshold_uv: f64,
    /// Artifact rejections over all epochs that reached the rejection stage.
    pub rejected_fraction: f64,
}

/// Runs the whole chain, consuming the recording to avoid a second copy.
pub fn preprocess_recording(
    mut rec: ContinuousRecording,
    spec: &FilterSpec,
    policy: &RejectionPolicy,
) -> Result<(EpochSet, PreprocessSummary)> {
    common_average_reference_inplace(&mut rec)?;
    bandpass_inplace(&mut rec, spec)?;
    let mut set = extract_epochs(&rec);
    let participant_id = std::mem::take(&mut rec.participant_id);
    drop(rec);
    baseline_correct_inplace(&mut set);
    let edge = set.n_rejected();
    let outcome = reject_artifacts(&mut set, policy)?;
    let summary = PreprocessSummary {
        participant_id,
        events: set.len(),
        edge_rejected: edge,
        artifact_rejected: outcome.rejected,
        kept: set.len() - edge - outcome.rejected,
        threshold_uv: outcome.threshold_uv,
        rejected_fraction: outcome.fraction,
    };
    Ok((set, summary))
}
