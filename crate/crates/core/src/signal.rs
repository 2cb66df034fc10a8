//! Shared domain types: continuous recordings, epochs, ratings and the
//! 32-channel montage used throughout the pipeline.
//!
//! Voltages are `f64` microvolts. Participant and stimulus identifiers are
//! opaque strings.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{invalid, Result};

pub const DEFAULT_SAMPLING_RATE_HZ: f64 = 2000.0;

/// Epoch window relative to stimulus onset, closed-open: `[-200, +900)` ms.
pub const EPOCH_PRE_MS: f64 = 200.0;
pub const EPOCH_POST_MS: f64 = 900.0;

/// The 32 scalp positions of the equidistant 10-20 cap, in recording order.
pub const STANDARD_CHANNELS: [&str; 32] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1", "FC2", "FC6", "T7", "C3", "Cz",
    "C4", "T8", "TP9", "CP5", "CP1", "CP2", "CP6", "TP10", "P7", "P3", "Pz", "P4", "P8", "PO9",
    "O1", "Oz", "O2", "PO10",
];

// (radius, azimuth in degrees clockwise from the nose). Radius 1 is the
// Fpz-T7-Oz circumference.
const CHANNEL_POLAR: [(f64, f64); 32] = [
    (1.0, -18.0),
    (1.0, 18.0),
    (1.0, -54.0),
    (0.55, -40.0),
    (0.4, 0.0),
    (0.55, 40.0),
    (1.0, 54.0),
    (0.72, -69.0),
    (0.28, -50.0),
    (0.28, 50.0),
    (0.72, 69.0),
    (1.0, -90.0),
    (0.5, -90.0),
    (0.0, 0.0),
    (0.5, 90.0),
    (1.0, 90.0),
    (1.2, -108.0),
    (0.72, -111.0),
    (0.28, -130.0),
    (0.28, 130.0),
    (0.72, 111.0),
    (1.2, 108.0),
    (1.0, -126.0),
    (0.55, -140.0),
    (0.4, 180.0),
    (0.55, 140.0),
    (1.0, 126.0),
    (1.2, -144.0),
    (1.0, -162.0),
    (1.0, 180.0),
    (1.0, 162.0),
    (1.2, 144.0),
];

/// Flat 2-D scalp position of a standard channel (x to the right, y to the nose).
pub fn channel_position(label: &str) -> Option<(f64, f64)> {
    let idx = STANDARD_CHANNELS
        .iter()
        .position(|c| c.eq_ignore_ascii_case(label))?;
    let (r, az) = CHANNEL_POLAR[idx];
    let rad = az.to_radians();
    Some((r * rad.sin(), r * rad.cos()))
}

pub fn standard_channel_labels() -> Vec<String> {
    STANDARD_CHANNELS.iter().map(|s| s.to_string()).collect()
}

/// Number of samples in one epoch: `round(1.1 * rate)`.
pub fn epoch_len(sampling_rate_hz: f64) -> usize {
    (1.1 * sampling_rate_hz).round() as usize
}

/// Number of pre-stimulus samples in one epoch: `round(0.2 * rate)`.
pub fn baseline_len(sampling_rate_hz: f64) -> usize {
    (0.2 * sampling_rate_hz).round() as usize
}

/// Millisecond offsets of every epoch sample relative to onset.
pub fn epoch_time_axis_ms(sampling_rate_hz: f64) -> Vec<f64> {
    let nb = baseline_len(sampling_rate_hz) as f64;
    (0..epoch_len(sampling_rate_hz))
        .map(|j| (j as f64 - nb) * 1000.0 / sampling_rate_hz)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub sample_index: usize,
    pub stimulus_id: String,
    pub presentation_ordinal: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRecording {
    pub participant_id: String,
    pub channel_labels: Vec<String>,
    pub sampling_rate_hz: f64,
    /// channels x time, microvolts
    pub samples: Array2<f64>,
    pub events: Vec<Event>,
}

impl ContinuousRecording {
    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channel_labels.iter().position(|c| c == label)
    }
}

/// One invariant violation found by [`validate_recording`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordingIssue {
    ChannelCountMismatch { rows: usize, labels: usize },
    EventsNotIncreasing { position: usize },
    EventOutOfRange { position: usize, sample_index: usize },
    NonPositiveRate,
    NonFiniteSample,
}

impl fmt::Display for RecordingIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordingIssue::ChannelCountMismatch { rows, labels } => {
                write!(f, "channel count mismatch ({rows} rows, {labels} labels)")
            }
            RecordingIssue::EventsNotIncreasing { position } => {
                write!(f, "events not increasing at position {position}")
            }
            RecordingIssue::EventOutOfRange {
                position,
                sample_index,
            } => write!(
                f,
                "event {position} at sample {sample_index} beyond recording end"
            ),
            RecordingIssue::NonPositiveRate => write!(f, "non-positive sampling rate"),
            RecordingIssue::NonFiniteSample => write!(f, "non-finite sample"),
        }
    }
}

/// Returns every invariant violation; an empty list means the recording is valid.
pub fn validate_recording(rec: &ContinuousRecording) -> Vec<RecordingIssue> {
    let mut issues = Vec::new();
    if rec.samples.nrows() != rec.channel_labels.len() {
        issues.push(RecordingIssue::ChannelCountMismatch {
            rows: rec.samples.nrows(),
            labels: rec.channel_labels.len(),
        });
    }
    if !(rec.sampling_rate_hz > 0.0) || !rec.sampling_rate_hz.is_finite() {
        issues.push(RecordingIssue::NonPositiveRate);
    }
    let n = rec.samples.ncols();
    for (i, ev) in rec.events.iter().enumerate() {
        if i > 0 && ev.sample_index <= rec.events[i - 1].sample_index {
            issues.push(RecordingIssue::EventsNotIncreasing { position: i });
        }
        if ev.sample_index >= n {
            issues.push(RecordingIssue::EventOutOfRange {
                position: i,
                sample_index: ev.sample_index,
            });
        }
    }
    if rec.samples.iter().any(|v| !v.is_finite()) {
        issues.push(RecordingIssue::NonFiniteSample);
    }
    issues
}

/// Why an epoch was excluded from analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    /// Amplitude exceeded the artifact threshold.
    Artifact,
    /// The window ran past the start or end of the recording.
    Edge,
}

impl RejectReason {
    pub(crate) fn code(self) -> u8 {
        match self {
            RejectReason::Artifact => 1,
            RejectReason::Edge => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Option<Self>> {
        match code {
            0 => Some(None),
            1 => Some(Some(RejectReason::Artifact)),
            2 => Some(Some(RejectReason::Edge)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub participant_id: String,
    pub stimulus_id: String,
    pub presentation_ordinal: i32,
    /// channels x samples, microvolts
    pub data: Array2<f64>,
    pub rejection: Option<RejectReason>,
    pub label: Option<i8>,
}

impl Epoch {
    pub fn is_rejected(&self) -> bool {
        self.rejection.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub sampling_rate_hz: f64,
    pub channel_labels: Vec<String>,
    pub epochs: Vec<Epoch>,
}

impl EpochSet {
    pub fn new(sampling_rate_hz: f64, channel_labels: Vec<String>) -> Self {
        EpochSet {
            sampling_rate_hz,
            channel_labels,
            epochs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn samples_per_epoch(&self) -> usize {
        self.epochs
            .first()
            .map(|e| e.data.ncols())
            .unwrap_or_else(|| epoch_len(self.sampling_rate_hz))
    }

    pub fn time_axis_ms(&self) -> Vec<f64> {
        epoch_time_axis_ms(self.sampling_rate_hz)
    }

    pub fn kept(&self) -> impl Iterator<Item = &Epoch> {
        self.epochs.iter().filter(|e| !e.is_rejected())
    }

    pub fn n_rejected(&self) -> usize {
        self.epochs.iter().filter(|e| e.is_rejected()).count()
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channel_labels.iter().position(|c| c == label)
    }

    /// Checks that every epoch shares the set's channel count and length.
    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz > 0.0) {
            return invalid("epoch set sampling rate must be positive");
        }
        let ns = self.samples_per_epoch();
        for (i, e) in self.epochs.iter().enumerate() {
            if e.data.nrows() != self.channel_labels.len() || e.data.ncols() != ns {
                return invalid(format!(
                    "epoch {i} has shape {:?}, expected ({}, {ns})",
                    e.data.dim(),
                    self.channel_labels.len()
                ));
            }
        }
        Ok(())
    }
}

/// A participant's explicit rating of one stimulus: how many blocks it was
/// selected in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitRating {
    pub participant_id: String,
    pub stimulus_id: String,
    pub count: u8,
}

impl ExplicitRating {
    pub fn new(participant_id: &str, stimulus_id: &str, count: u8) -> Result<Self> {
        if count > 3 {
            return invalid(format!("rating {count} outside 0..=3"));
        }
        Ok(ExplicitRating {
            participant_id: participant_id.to_string(),
            stimulus_id: stimulus_id.to_string(),
            count,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tertile {
    Low,
    Medium,
    High,
}

impl Tertile {
    /// Label value used in epoch files and classifiers.
    pub fn code(self) -> i8 {
        match self {
            Tertile::Low => 0,
            Tertile::Medium => 1,
            Tertile::High => 2,
        }
    }

    pub fn from_code(code: i8) -> Option<Self> {
        match code {
            0 => Some(Tertile::Low),
            1 => Some(Tertile::Medium),
            2 => Some(Tertile::High),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tertile::Low => "Low",
            Tertile::Medium => "Medium",
            Tertile::High => "High",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Low" => Some(Tertile::Low),
            "Medium" => Some(Tertile::Medium),
            "High" => Some(Tertile::High),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedStimulus {
    pub stimulus_id: String,
    pub score: u64,
    pub rank: usize,
    pub tertile: Tertile,
}

/// Population preference ordering: one entry per stimulus in rank order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRanking {
    pub entries: Vec<RankedStimulus>,
}

impl GroupRanking {
    pub fn tertile_of(&self, stimulus_id: &str) -> Option<Tertile> {
        self.entries
            .iter()
            .find(|e| e.stimulus_id == stimulus_id)
            .map(|e| e.tertile)
    }

    pub fn tertile_map(&self) -> BTreeMap<String, Tertile> {
        self.entries
            .iter()
            .map(|e| (e.stimulus_id.clone(), e.tertile))
            .collect()
    }

    pub fn tertile_sizes(&self) -> [usize; 3] {
        let mut sizes = [0; 3];
        for e in &self.entries {
            sizes[e.tertile.code() as usize] += 1;
        }
        sizes
    }
}
