//! Binary and CSV file formats.
//!
//! # ERP1 epoch files
//!
//! All integers little-endian.
//!
//! ```text
//! "ERP1"
//! u32 epoch_count, u32 channels, u32 samples_per_epoch, f64 sampling_rate_hz
//! epoch_count x {
//!     u32 len, utf8 participant_id
//!     u32 len, utf8 stimulus_id
//!     i32 presentation_ordinal
//!     u8  rejected (0 kept, 1 artifact, 2 edge)
//!     i8  label (-128 = none)
//!     channels x samples_per_epoch f64, row-major (channel 0 first)
//! }
//! optional trailer: "CHNL", u32 count, count x { u32 len, utf8 label }
//! ```
//!
//! Readers that stop after the last epoch record see exactly the base
//! layout. Without a trailer, channel labels default to the standard
//! 32-channel montage (or `ch<i>` for other counts).
//!
//! # REC1 recording files
//!
//! ```text
//! "REC1"
//! u32 channels, u64 samples, f64 sampling_rate_hz
//! u32 len, utf8 participant_id
//! channels x { u32 len, utf8 label }
//! u32 event_count, event_count x { u64 sample_index, u32 len, utf8 stimulus_id, i32 ordinal }
//! channels x samples f64, row-major
//! ```

use ndarray::Array2;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{
    standard_channel_labels, ContinuousRecording, Epoch, EpochSet, Event, ExplicitRating,
    GroupRanking, RejectReason, Tertile,
};

const EPOCH_MAGIC: &[u8; 4] = b"ERP1";
const CHANNEL_TRAILER: &[u8; 4] = b"CHNL";
const RECORDING_MAGIC: &[u8; 4] = b"REC1";
const NO_LABEL: i8 = -128;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

fn put_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn put_f64s<W: Write>(w: &mut W, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut buf = Vec::with_capacity(8 * 4096);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
        if buf.len() >= 8 * 4096 {
            w.write_all(&buf)?;
            buf.clear();
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Little-endian reader that maps short reads to a truncation error.
struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format("truncated file".into())
            } else {
                Error::Io(e)
            }
        })
    }

    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.exact(&mut b)?;
        Ok(b[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn i32(&mut self) -> Result<i32> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(i32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    fn string(&mut self, max_len: usize) -> Result<String> {
        let len = self.u32()? as usize;
        if len > max_len {
            return format_err(format!("string length {len} exceeds remaining payload"));
        }
        let mut b = vec![0u8; len];
        self.exact(&mut b)?;
        String::from_utf8(b).map_err(|_| Error::Format("invalid utf-8 string".into()))
    }

    fn f64s(&mut self, out: &mut [f64]) -> Result<()> {
        let mut buf = vec![0u8; 8 * 4096];
        for chunk in out.chunks_mut(4096) {
            let bytes = &mut buf[..chunk.len() * 8];
            self.exact(bytes)?;
            for (v, b) in chunk.iter_mut().zip(bytes.chunks_exact(8)) {
                *v = f64::from_le_bytes(b.try_into().unwrap());
            }
        }
        Ok(())
    }

    /// Reads one byte if any remain.
    fn next_byte(&mut self) -> Result<Option<u8>> {
        let mut b = [0u8; 1];
        loop {
            match self.inner.read(&mut b) {
                Ok(0) => return Ok(None),
                Ok(_) => return Ok(Some(b[0])),
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }
}

fn check_magic(found: [u8; 4], expected: &[u8; 4], what: &str) -> Result<()> {
    if &found == expected {
        return Ok(());
    }
    if found[..3] == expected[..3] {
        return format_err(format!(
            "{what} version mismatch: found {:?}, expected {:?}",
            String::from_utf8_lossy(&found),
            String::from_utf8_lossy(expected)
        ));
    }
    format_err(format!("not a {what} file"))
}

fn default_labels(n: usize) -> Vec<String> {
    if n == 32 {
        standard_channel_labels()
    } else {
        (0..n).map(|i| format!("ch{i}")).collect()
    }
}

pub fn write_epochs_to<W: Write>(w: &mut W, set: &EpochSet) -> Result<()> {
    set.validate()?;
    let channels = set.channel_labels.len();
    let samples = set.samples_per_epoch();
    w.write_all(EPOCH_MAGIC)?;
    w.write_all(&(set.epochs.len() as u32).to_le_bytes())?;
    w.write_all(&(channels as u32).to_le_bytes())?;
    w.write_all(&(samples as u32).to_le_bytes())?;
    w.write_all(&set.sampling_rate_hz.to_le_bytes())?;
    for e in &set.epochs {
        put_str(w, &e.participant_id)?;
        put_str(w, &e.stimulus_id)?;
        w.write_all(&e.presentation_ordinal.to_le_bytes())?;
        w.write_all(&[e.rejection.map_or(0, RejectReason::code)])?;
        w.write_all(&e.label.unwrap_or(NO_LABEL).to_le_bytes())?;
        put_f64s(w, e.data.iter().copied())?;
    }
    if set.channel_labels != default_labels(channels) {
        w.write_all(CHANNEL_TRAILER)?;
        w.write_all(&(channels as u32).to_le_bytes())?;
        for l in &set.channel_labels {
            put_str(w, l)?;
        }
    }
    Ok(())
}

pub fn read_epochs_from<R: Read>(r: R) -> Result<EpochSet> {
    let mut c = Cursor { inner: r };
    let mut magic = [0u8; 4];
    c.exact(&mut magic)?;
    check_magic(magic, EPOCH_MAGIC, "epoch")?;
    let count = c.u32()? as usize;
    let channels = c.u32()? as usize;
    let samples = c.u32()? as usize;
    let rate = c.f64()?;
    if !(rate > 0.0) {
        return format_err("header sampling rate must be positive");
    }
    if count > 0 && (channels == 0 || samples == 0) {
        return format_err("header declares epochs with zero channels or samples");
    }
    let mut set = EpochSet::new(rate, default_labels(channels));
    set.epochs.reserve(count.min(1 << 16));
    for _ in 0..count {
        let participant_id = c.string(1 << 20)?;
        let stimulus_id = c.string(1 << 20)?;
        let presentation_ordinal = c.i32()?;
        let flag = c.u8()?;
        let rejection = RejectReason::from_code(flag)
            .ok_or_else(|| Error::Format(format!("unknown rejected flag {flag}")))?;
        let label = c.u8()? as i8;
        let mut data = vec![0.0; channels * samples];
        c.f64s(&mut data)?;
        set.epochs.push(Epoch {
            participant_id,
            stimulus_id,
            presentation_ordinal,
            data: Array2::from_shape_vec((channels, samples), data)
                .map_err(|e| Error::Format(e.to_string()))?,
            rejection,
            label: (label != NO_LABEL).then_some(label),
        });
    }
    if let Some(first) = c.next_byte()? {
        let mut rest = [0u8; 3];
        c.exact(&mut rest)?;
        if first != CHANNEL_TRAILER[0] || rest != CHANNEL_TRAILER[1..] {
            return format_err("payload longer than header declares");
        }
        let n = c.u32()? as usize;
        if n != channels {
            return format_err(format!(
                "channel trailer lists {n} labels for {channels} channels"
            ));
        }
        set.channel_labels = (0..n).map(|_| c.string(1 << 16)).collect::<Result<_>>()?;
        if c.next_byte()?.is_some() {
            return format_err("trailing bytes after channel trailer");
        }
    }
    Ok(set)
}

pub fn write_epochs(path: impl AsRef<Path>, set: &EpochSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_epochs_to(&mut w, set)?;
    w.flush()?;
    Ok(())
}

pub fn read_epochs(path: impl AsRef<Path>) -> Result<EpochSet> {
    read_epochs_from(BufReader::new(File::open(path)?))
}

/// Inspection export: one row per sample per epoch.
pub fn write_epochs_csv(path: impl AsRef<Path>, set: &EpochSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "participant_id".to_string(),
        "stimulus_id".into(),
        "presentation_ordinal".into(),
        "rejected".into(),
        "label".into(),
        "t_ms".into(),
    ];
    header.extend(set.channel_labels.iter().cloned());
    w.write_record(&header)?;
    let t = set.time_axis_ms();
    for e in &set.epochs {
        for (j, tj) in t.iter().enumerate().take(e.data.ncols()) {
            let mut row = vec![
                e.participant_id.clone(),
                e.stimulus_id.clone(),
                e.presentation_ordinal.to_string(),
                (e.rejection.is_some() as u8).to_string(),
                e.label.map(|l| l.to_string()).unwrap_or_default(),
                tj.to_string(),
            ];
            row.extend(e.data.column(j).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_recording_to<W: Write>(w: &mut W, rec: &ContinuousRecording) -> Result<()> {
    w.write_all(RECORDING_MAGIC)?;
    w.write_all(&(rec.n_channels() as u32).to_le_bytes())?;
    w.write_all(&(rec.n_samples() as u64).to_le_bytes())?;
    w.write_all(&rec.sampling_rate_hz.to_le_bytes())?;
    put_str(w, &rec.participant_id)?;
    if rec.channel_labels.len() != rec.n_channels() {
        return Err(Error::Dimension {
            expected: rec.n_channels(),
            actual: rec.channel_labels.len(),
        });
    }
    for l in &rec.channel_labels {
        put_str(w, l)?;
    }
    w.write_all(&(rec.events.len() as u32).to_le_bytes())?;
    for ev in &rec.events {
        w.write_all(&(ev.sample_index as u64).to_le_bytes())?;
        put_str(w, &ev.stimulus_id)?;
        w.write_all(&ev.presentation_ordinal.to_le_bytes())?;
    }
    put_f64s(w, rec.samples.iter().copied())?;
    Ok(())
}

pub fn read_recording_from<R: Read>(r: R) -> Result<ContinuousRecording> {
    let mut c = Cursor { inner: r };
    let mut magic = [0u8; 4];
    c.exact(&mut magic)?;
    check_magic(magic, RECORDING_MAGIC, "recording")?;
    let channels = c.u32()? as usize;
    let samples = c.u64()? as usize;
    let rate = c.f64()?;
    let participant_id = c.string(1 << 20)?;
    let channel_labels = (0..channels)
        .map(|_| c.string(1 << 16))
        .collect::<Result<Vec<_>>>()?;
    let n_events = c.u32()? as usize;
    let mut events = Vec::with_capacity(n_events.min(1 << 20));
    for _ in 0..n_events {
        let sample_index = c.u64()? as usize;
        let stimulus_id = c.string(1 << 20)?;
        let presentation_ordinal = c.i32()?;
        events.push(Event {
            sample_index,
            stimulus_id,
            presentation_ordinal,
        });
    }
    let mut data = vec![0.0; channels * samples];
    c.f64s(&mut data)?;
    if c.next_byte()?.is_some() {
        return format_err("payload longer than header declares");
    }
    Ok(ContinuousRecording {
        participant_id,
        channel_labels,
        sampling_rate_hz: rate,
        samples: Array2::from_shape_vec((channels, samples), data)
            .map_err(|e| Error::Format(e.to_string()))?,
        events,
    })
}

pub fn write_recording(path: impl AsRef<Path>, rec: &ContinuousRecording) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_recording_to(&mut w, rec)?;
    w.flush()?;
    Ok(())
}

pub fn read_recording(path: impl AsRef<Path>) -> Result<ContinuousRecording> {
    read_recording_from(BufReader::new(File::open(path)?))
}

pub fn write_ratings_csv(path: impl AsRef<Path>, ratings: &[ExplicitRating]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["participant_id", "stimulus_id", "count"])?;
    for r in ratings {
        w.write_record([&r.participant_id, &r.stimulus_id, &r.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ratings_csv(path: impl AsRef<Path>) -> Result<Vec<ExplicitRating>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return format_err("ratings row must have 3 fields");
        }
        let count: u8 = rec[2]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad rating count {:?}", &rec[2])))?;
        out.push(ExplicitRating::new(&rec[0], &rec[1], count)?);
    }
    Ok(out)
}

pub fn write_ranking_csv(path: impl AsRef<Path>, ranking: &GroupRanking) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["stimulus_id", "score", "rank", "tertile"])?;
    for e in &ranking.entries {
        w.write_record([
            e.stimulus_id.as_str(),
            &e.score.to_string(),
            &e.rank.to_string(),
            e.tertile.name(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ranking_csv(path: impl AsRef<Path>) -> Result<GroupRanking> {
    let mut r = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return format_err("ranking row must have 4 fields");
        }
        let parse_err = || Error::Format(format!("bad ranking row {rec:?}"));
        entries.push(crate::signal::RankedStimulus {
            stimulus_id: rec[0].to_string(),
            score: rec[1].parse().map_err(|_| parse_err())?,
            rank: rec[2].parse().map_err(|_| parse_err())?,
            tertile: Tertile::parse(&rec[3]).ok_or_else(parse_err)?,
        });
    }
    Ok(GroupRanking { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use sha2::{Digest, Sha256};

    fn random_set(n: usize, channels: usize, samples: usize, seed: u64) -> EpochSet {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let labels = (0..channels).map(|i| format!("e{i}")).collect();
        let mut set = EpochSet::new(500.0, labels);
        for i in 0..n {
            let data = Array2::from_shape_fn((channels, samples), |_| rng.random_range(-50.0..50.0));
            set.epochs.push(Epoch {
                participant_id: "P01".into(),
                stimulus_id: format!("stim_{i:03}"),
                presentation_ordinal: i as i32,
                data,
                rejection: match i % 3 {
                    0 => None,
                    1 => Some(RejectReason::Artifact),
                    _ => Some(RejectReason::Edge),
                },
                label: (i % 4 != 0).then_some((i % 4) as i8),
            });
        }
        set
    }

    fn bytes_of(set: &EpochSet) -> Vec<u8> {
        let mut buf = Vec::new();
        write_epochs_to(&mut buf, set).unwrap();
        buf
    }

    #[test]
    fn empty_set_round_trips() {
        let set = EpochSet::new(2000.0, standard_channel_labels());
        let back = read_epochs_from(&bytes_of(&set)[..]).unwrap();
        assert_eq!(back, set);
        // standard montage needs no trailer: magic + 3 u32 + f64
        assert_eq!(bytes_of(&set).len(), 4 + 12 + 8);
    }

    #[test]
    fn zero_epoch_round_trips() {
        let mut set = EpochSet::new(2000.0, standard_channel_labels());
        set.epochs.push(Epoch {
            participant_id: "p".into(),
            stimulus_id: "s".into(),
            presentation_ordinal: 0,
            data: Array2::zeros((32, 2200)),
            rejection: None,
            label: None,
        });
        let back = read_epochs_from(&bytes_of(&set)[..]).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn seeded_payload_hash_is_stable() {
        let set = random_set(100, 4, 50, 42);
        let first = bytes_of(&set);
        let back = read_epochs_from(&first[..]).unwrap();
        assert_eq!(back, set);
        let second = bytes_of(&back);
        assert_eq!(first, second);
        let hash = hex::encode(Sha256::digest(&first));
        assert_eq!(
            hash,
            "187e1ec2d3787068753608caebbdbbd318cce691025ee9c025949a5b45ff73c6"
        );
    }

    #[test]
    fn version_mismatch_detected() {
        let mut b = bytes_of(&random_set(1, 2, 3, 1));
        b[3] = b'2';
        let err = read_epochs_from(&b[..]).unwrap_err().to_string();
        assert!(err.contains("version mismatch"), "{err}");
        b[0] = b'X';
        let err = read_epochs_from(&b[..]).unwrap_err().to_string();
        assert!(err.contains("not a epoch file"), "{err}");
    }

    #[test]
    fn truncation_detected() {
        let b = bytes_of(&random_set(3, 2, 10, 1));
        for cut in [3, 10, 30, b.len() - 1] {
            let err = read_epochs_from(&b[..cut]).unwrap_err().to_string();
            assert!(err.contains("truncated"), "cut {cut}: {err}");
        }
    }

    #[test]
    fn header_payload_inconsistency_detected() {
        let mut b = bytes_of(&random_set(3, 2, 10, 1));
        // claim fewer epochs than stored
        b[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(read_epochs_from(&b[..]).is_err());
        // claim more samples than stored
        let mut b = bytes_of(&random_set(3, 2, 10, 1));
        b[12..16].copy_from_slice(&11u32.to_le_bytes());
        assert!(read_epochs_from(&b[..]).is_err());
    }

    #[test]
    fn recording_round_trips() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rec = ContinuousRecording {
            participant_id: "P07".into(),
            channel_labels: vec!["Fz".into(), "Pz".into(), "Oz".into()],
            sampling_rate_hz: 250.0,
            samples: Array2::from_shape_fn((3, 777), |_| rng.random::<f64>()),
            events: vec![
                Event {
                    sample_index: 10,
                    stimulus_id: "a".into(),
                    presentation_ordinal: 0,
                },
                Event {
                    sample_index: 500,
                    stimulus_id: "b".into(),
                    presentation_ordinal: 1,
                },
            ],
        };
        let mut buf = Vec::new();
        write_recording_to(&mut buf, &rec).unwrap();
        assert_eq!(read_recording_from(&buf[..]).unwrap(), rec);
        assert!(read_recording_from(&buf[..buf.len() - 8]).is_err());
    }
}
