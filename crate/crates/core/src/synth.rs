//! Simulated RSVP sessions with a known preference structure.
//!
//! Every participant sees each block as two shuffled passes over all
//! stimuli, cut into trials with a fixed onset asynchrony. The recording
//! is white plus `1/f^alpha` background noise, a stimulus-locked kernel
//! whose parietal amplitude follows the participant's rating, a frontal
//! bump for any positive rating, optional spike artifacts, and for
//! carrier participants a parietal response to unrated stimuli that grows
//! with the stimulus's latent tertile.

use std::collections::BTreeSet;

use ndarray::{Array2, Axis};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::labeling::BlockSelection;
use crate::signal::{
    channel_position, standard_channel_labels, ContinuousRecording, Event, ExplicitRating, Tertile,
    EPOCH_POST_MS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_participants: usize,
    pub n_stimuli: usize,
    pub blocks: usize,
    pub trials_per_block: usize,
    pub images_per_trial: usize,
    pub soa_ms: f64,
    pub sampling_rate_hz: f64,
    /// white background noise
    pub noise_std_uv: f64,
    /// standard deviation of the `1/f^alpha` component
    pub pink_noise_std_uv: f64,
    pub pink_noise_exponent: f64,
    /// parietal peak amplitude for ratings 0..=3
    pub p3_amplitude_per_level: [f64; 4],
    /// frontal peak amplitude for any rating above 0
    pub frontal_amplitude_uv: f64,
    pub group_effect_amplitude_uv: f64,
    pub group_effect_carrier_fraction: f64,
    /// share of stimuli rated 0, 1, 2, 3
    pub rating_marginal: [f64; 4],
    /// idiosyncratic spread of preferences around the latent score
    pub taste_noise: f64,
    /// participants who rate every stimulus at least once; they come last
    pub n_all_attractive: usize,
    pub spike_rate_hz: f64,
    pub spike_amplitude_uv: f64,
    pub lead_in_ms: f64,
    pub inter_trial_gap_ms: f64,
    pub rng_seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_participants: 31,
            n_stimuli: 240,
            blocks: 3,
            trials_per_block: 8,
            images_per_trial: 60,
            soa_ms: 500.0,
            sampling_rate_hz: 2000.0,
            noise_std_uv: 10.0,
            pink_noise_std_uv: 10.0,
            pink_noise_exponent: 1.0,
            p3_amplitude_per_level: [-1.5, 4.5, 6.0, 9.0],
            frontal_amplitude_uv: 3.0,
            group_effect_amplitude_uv: 8.0,
            group_effect_carrier_fraction: 0.5,
            rating_marginal: [0.6, 0.2, 0.12, 0.08],
            taste_noise: 0.7,
            n_all_attractive: 0,
            spike_rate_hz: 0.05,
            spike_amplitude_uv: 250.0,
            lead_in_ms: 1500.0,
            inter_trial_gap_ms: 1500.0,
            rng_seed: 2024,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_participants", self.n_participants),
            ("n_stimuli", self.n_stimuli),
            ("blocks", self.blocks),
            ("trials_per_block", self.trials_per_block),
            ("images_per_trial", self.images_per_trial),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return invalid(format!("{name} must be positive"));
        }
        if self.blocks > crate::labeling::N_BLOCKS as usize {
            return invalid(format!(
                "at most {} blocks keep ratings within 0..=3",
                crate::labeling::N_BLOCKS
            ));
        }
        if self.trials_per_block * self.images_per_trial != 2 * self.n_stimuli {
            return invalid("each block must show every stimulus exactly twice");
        }
        if self.n_all_attractive > self.n_participants {
            return invalid("n_all_attractive exceeds n_participants");
        }
        let reals = [
            self.soa_ms,
            self.sampling_rate_hz,
            self.noise_std_uv,
            self.pink_noise_std_uv,
            self.pink_noise_exponent,
            self.frontal_amplitude_uv,
            self.group_effect_amplitude_uv,
            self.group_effect_carrier_fraction,
            self.taste_noise,
            self.spike_rate_hz,
            self.spike_amplitude_uv,
            self.lead_in_ms,
            self.inter_trial_gap_ms,
        ];
        if reals
            .iter()
            .chain(&self.p3_amplitude_per_level)
            .chain(&self.rating_marginal)
            .any(|v| !v.is_finite())
        {
            return invalid("simulation parameters must be finite");
        }
        if self.soa_ms <= 0.0 || self.sampling_rate_hz <= 0.0 {
            return invalid("soa_ms and sampling_rate_hz must be positive");
        }
        let soa = self.soa_ms * self.sampling_rate_hz / 1000.0;
        if (soa - soa.round()).abs() > 1e-9 {
            return invalid("soa_ms must be a whole number of samples");
        }
        if [
            self.noise_std_uv,
            self.pink_noise_std_uv,
            self.taste_noise,
            self.spike_rate_hz,
            self.lead_in_ms,
            self.inter_trial_gap_ms,
        ]
        .iter()
        .any(|v| *v < 0.0)
        {
            return invalid("noise levels, rates and gaps must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.group_effect_carrier_fraction) {
            return invalid("group_effect_carrier_fraction must lie in [0, 1]");
        }
        let total: f64 = self.rating_marginal.iter().sum();
        if self.rating_marginal.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return invalid("rating_marginal must be non-negative and sum to 1");
        }
        Ok(())
    }

    pub fn events_per_recording(&self) -> usize {
        self.blocks * self.trials_per_block * self.images_per_trial
    }

    fn samples(&self, ms: f64) -> usize {
        (ms * self.sampling_rate_hz / 1000.0).round() as usize
    }

    pub fn stimulus_ids(&self) -> Vec<String> {
        (0..self.n_stimuli).map(|i| format!("img{i:03}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantTruth {
    pub participant_id: String,
    pub carrier: bool,
    pub all_attractive: bool,
    pub ratings: Vec<ExplicitRating>,
    pub selections: Vec<BlockSelection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub stimulus_ids: Vec<String>,
    /// shared latent attractiveness, one per stimulus
    pub latent_scores: Vec<f64>,
    /// tertile of each stimulus by latent score
    pub latent_tertiles: Vec<Tertile>,
    pub participants: Vec<ParticipantTruth>,
}

impl GroundTruth {
    pub fn all_ratings(&self) -> Vec<ExplicitRating> {
        self.participants
            .iter()
            .flat_map(|p| p.ratings.iter().cloned())
            .collect()
    }
}

fn master_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rating counts from a participant's preference values: the top
/// `marginal[3]` share gets 3, the next `marginal[2]` share 2, and so on.
pub fn assign_ratings(
    latent: &[f64],
    taste_noise: f64,
    marginal: &[f64; 4],
    rng: &mut impl Rng,
) -> Vec<u8> {
    let n = latent.len();
    let pref: Vec<f64> = latent
        .iter()
        .map(|l| {
            let e: f64 = StandardNormal.sample(rng);
            l + taste_noise * e
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pref[b].total_cmp(&pref[a]).then(a.cmp(&b)));
    // cumulative cut points from the top
    let mut cuts = [0usize; 4];
    let mut acc = 0.0;
    for (slot, level) in [3usize, 2, 1, 0].iter().enumerate() {
        acc += marginal[*level];
        cuts[slot] = ((acc * n as f64).round() as usize).min(n);
    }
    let mut out = vec![0u8; n];
    for (pos, &s) in order.iter().enumerate() {
        let slot = cuts.iter().position(|&c| pos < c).unwrap_or(3);
        out[s] = 3 - slot as u8;
    }
    out
}

fn selections_for(
    ids: &[String],
    counts: &[u8],
    blocks: usize,
    rng: &mut impl Rng,
) -> Vec<BlockSelection> {
    let mut out = Vec::new();
    let all: Vec<u8> = (1..=blocks as u8).collect();
    for (id, &c) in ids.iter().zip(counts) {
        for &b in all.choose_multiple(rng, c as usize) {
            // sometimes picked in both presentations of the block
            let times = if rng.random_bool(0.3) { 2 } else { 1 };
            for _ in 0..times {
                out.push(BlockSelection {
                    block: b,
                    stimulus_id: id.clone(),
                });
            }
        }
    }
    out.sort_by(|a, b| a.block.cmp(&b.block).then_with(|| a.stimulus_id.cmp(&b.stimulus_id)));
    out
}

pub fn participant_id(index: usize) -> String {
    format!("P{:02}", index + 1)
}

/// Latent scores, carrier flags, ratings and selections for the cohort.
pub fn ground_truth(config: &SimulationConfig) -> Result<GroundTruth> {
    config.validate()?;
    let mut rng = master_rng(config.rng_seed, 0);
    let ids = config.stimulus_ids();
    let latent: Vec<f64> = (0..config.n_stimuli)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let mut order: Vec<usize> = (0..latent.len()).collect();
    order.sort_by(|&a, &b| latent[b].total_cmp(&latent[a]).then(a.cmp(&b)));
    let [_, n_mid, n_high] = crate::labeling::tertile_sizes(latent.len());
    let mut latent_tertiles = vec![Tertile::Low; latent.len()];
    for (pos, &s) in order.iter().enumerate() {
        latent_tertiles[s] = if pos < n_high {
            Tertile::High
        } else if pos < n_high + n_mid {
            Tertile::Medium
        } else {
            Tertile::Low
        };
    }

    let regular = config.n_participants - config.n_all_attractive;
    let n_carriers = (config.group_effect_carrier_fraction * regular as f64).round() as usize;
    let mut pool: Vec<usize> = (0..regular).collect();
    pool.shuffle(&mut rng);
    let carriers: BTreeSet<usize> = pool[..n_carriers].iter().copied().collect();

    let mut participants = Vec::with_capacity(config.n_participants);
    for p in 0..config.n_participants {
        let all_attractive = p >= regular;
        let marginal = if all_attractive {
            let m = config.rating_marginal;
            [0.0, m[0] + m[1], m[2], m[3]]
        } else {
            config.rating_marginal
        };
        let counts = assign_ratings(&latent, config.taste_noise, &marginal, &mut rng);
        let pid = participant_id(p);
        let ratings = ids
            .iter()
            .zip(&counts)
            .map(|(s, &c)| ExplicitRating::new(&pid, s, c))
            .collect::<Result<Vec<_>>>()?;
        let selections = selections_for(&ids, &counts, config.blocks, &mut rng);
        participants.push(ParticipantTruth {
            participant_id: pid,
            carrier: carriers.contains(&p),
            all_attractive,
            ratings,
            selections,
        });
    }
    Ok(GroundTruth {
        stimulus_ids: ids,
        latent_scores: latent,
        latent_tertiles,
        participants,
    })
}

fn normalized_bump(t_ms: f64, center: f64, sd: f64) -> f64 {
    let g = |t: f64| (-(t - center).powi(2) / (2.0 * sd * sd)).exp();
    let g0 = g(0.0);
    (g(t_ms) - g0) / (1.0 - g0)
}

const FALLOFF_RADIUS: f64 = 0.6;
const PARIETAL_CENTER_MS: f64 = 400.0;
const PARIETAL_SD_MS: f64 = 80.0;
const FRONTAL_CENTER_MS: f64 = 350.0;
const FRONTAL_SD_MS: f64 = 50.0;

fn spatial_weight(channel: (f64, f64), site: &str) -> f64 {
    let s = channel_position(site).expect("standard site");
    let dist = ((channel.0 - s.0).powi(2) + (channel.1 - s.1).powi(2)).sqrt();
    (1.0 - dist / FALLOFF_RADIUS).max(0.0)
}

fn position(channel: &str) -> Result<(f64, f64)> {
    channel_position(channel).ok_or_else(|| Error::InvalidInput(format!("unknown channel {channel:?}")))
}

/// Parietal part of the evoked response with unit peak at Pz.
pub fn parietal_shape(channel: &str, t_ms: f64) -> Result<f64> {
    let w = spatial_weight(position(channel)?, "Pz");
    if !(0.0..EPOCH_POST_MS).contains(&t_ms) {
        return Ok(0.0);
    }
    Ok(w * normalized_bump(t_ms, PARIETAL_CENTER_MS, PARIETAL_SD_MS))
}

/// Evoked response (uV) for a rating level at `t_ms` after onset.
pub fn erp_kernel(config: &SimulationConfig, level: u8, channel: &str, t_ms: f64) -> Result<f64> {
    if level > 3 {
        return invalid(format!("rating level {level} outside 0..=3"));
    }
    let pos = position(channel)?;
    if !(0.0..EPOCH_POST_MS).contains(&t_ms) {
        return Ok(0.0);
    }
    let mut v = config.p3_amplitude_per_level[level as usize]
        * spatial_weight(pos, "Pz")
        * normalized_bump(t_ms, PARIETAL_CENTER_MS, PARIETAL_SD_MS);
    if level > 0 {
        v += config.frontal_amplitude_uv
            * spatial_weight(pos, "Fz")
            * normalized_bump(t_ms, FRONTAL_CENTER_MS, FRONTAL_SD_MS);
    }
    Ok(v)
}

/// Two independent background noise traces of length `n`.
///
/// A circular complex Gaussian spectrum shaped as `white^2 + pink^2 / f^alpha`
/// goes through one inverse FFT; the real and imaginary parts are
/// independent realisations whose expected variance is `white^2 + pink^2`.
fn background_noise_pair(
    n: usize,
    white: f64,
    pink: f64,
    alpha: f64,
    rng: &mut impl Rng,
    planner: &mut FftPlanner<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let len = n.next_power_of_two().max(2);
    let inv_f: Vec<f64> = (0..len)
        .map(|k| if k == 0 { 0.0 } else { (k.min(len - k) as f64).powf(-alpha) })
        .collect();
    let pink_norm = inv_f.iter().sum::<f64>();
    let mut buf: Vec<Complex64> = inv_f
        .iter()
        .map(|w| {
            let power = white * white / len as f64 + pink * pink * w / pink_norm;
            // each part carries half the bin power
            let a = power.sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(a * re, a * im)
        })
        .collect();
    planner.plan_fft_inverse(len).process(&mut buf);
    buf.truncate(n);
    buf.into_iter().map(|c| (c.re, c.im)).unzip()
}

/// One participant's recording.
pub fn simulate_participant(
    config: &SimulationConfig,
    truth: &GroundTruth,
    index: usize,
) -> Result<ContinuousRecording> {
    config.validate()?;
    let Some(who) = truth.participants.get(index) else {
        return invalid(format!("participant index {index} out of range"));
    };
    if truth.stimulus_ids.len() != config.n_stimuli {
        return invalid("ground truth does not match the configuration");
    }
    let mut rng = master_rng(config.rng_seed, index as u64 + 1);
    let rate = config.sampling_rate_hz;
    let soa = config.samples(config.soa_ms);
    let lead = config.samples(config.lead_in_ms);
    let gap = config.samples(config.inter_trial_gap_ms);
    let tail = config.samples(EPOCH_POST_MS) + lead;
    let trial_span = (config.images_per_trial - 1) * soa;

    // schedule
    let mut events = Vec::with_capacity(config.events_per_recording());
    let mut cursor = lead;
    let stimuli: Vec<usize> = (0..config.n_stimuli).collect();
    for _ in 0..config.blocks {
        let mut block = Vec::with_capacity(2 * config.n_stimuli);
        for _ in 0..2 {
            let mut pass = stimuli.clone();
            pass.shuffle(&mut rng);
            block.extend(pass);
        }
        for trial in block.chunks(config.images_per_trial) {
            for (j, &s) in trial.iter().enumerate() {
                events.push((cursor + j * soa, s));
            }
            cursor += trial_span + soa + gap;
        }
    }
    let n_samples = cursor - soa - gap + tail;
    if events.last().is_some_and(|e| e.0 + config.samples(EPOCH_POST_MS) > n_samples) {
        return Err(Error::Numeric("event schedule overflows the recording".into()));
    }

    let labels = standard_channel_labels();
    let n_ch = labels.len();
    let klen = config.samples(EPOCH_POST_MS);
    let t_of = |j: usize| j as f64 * 1000.0 / rate;
    // kernels[level][channel][sample]
    let mut kernels = vec![vec![vec![0.0; klen]; n_ch]; 4];
    for (level, per_level) in kernels.iter_mut().enumerate() {
        for (c, k) in per_level.iter_mut().enumerate() {
            for (j, v) in k.iter_mut().enumerate() {
                *v = erp_kernel(config, level as u8, &labels[c], t_of(j))?;
            }
        }
    }
    let group_kernel: Vec<Vec<f64>> = labels
        .iter()
        .map(|ch| (0..klen).map(|j| parietal_shape(ch, t_of(j))).collect::<Result<_>>())
        .collect::<Result<_>>()?;

    let rating_of: Vec<u8> = who.ratings.iter().map(|r| r.count).collect();
    let mut samples = Array2::<f64>::zeros((n_ch, n_samples));

    // background noise, one stream per channel pair derived in order
    let pair_seeds: Vec<u64> = (0..n_ch.div_ceil(2)).map(|_| rng.random()).collect();
    let (white, pink, alpha) = (config.noise_std_uv, config.pink_noise_std_uv, config.pink_noise_exponent);
    if white > 0.0 || pink > 0.0 {
        samples
            .axis_chunks_iter_mut(Axis(0), 2)
            .into_par_iter()
            .zip(pair_seeds.par_iter())
            .for_each(|(mut rows, &seed)| {
                let mut crng = ChaCha8Rng::seed_from_u64(seed);
                let mut planner = FftPlanner::new();
                let (a, b) = background_noise_pair(rows.ncols(), white, pink, alpha, &mut crng, &mut planner);
                for (r, trace) in [a, b].into_iter().enumerate().take(rows.nrows()) {
                    rows.row_mut(r).iter_mut().zip(trace).for_each(|(v, x)| *v = x);
                }
            });
    }

    let group_amp = if who.carrier { config.group_effect_amplitude_uv } else { 0.0 };
    let mut out_events = Vec::with_capacity(events.len());
    for (ordinal, &(onset, s)) in events.iter().enumerate() {
        let level = rating_of[s] as usize;
        let scale = match truth.latent_tertiles[s] {
            Tertile::Low => 0.0,
            Tertile::Medium => 0.5,
            Tertile::High => 1.0,
        };
        let g = if level == 0 { group_amp * scale } else { 0.0 };
        for c in 0..n_ch {
            let k = &kernels[level][c];
            let gk = &group_kernel[c];
            let mut row = samples.row_mut(c);
            let seg = row.slice_mut(ndarray::s![onset..onset + klen]);
            for ((v, a), b) in seg.into_iter().zip(k).zip(gk) {
                *v += a + g * b;
            }
        }
        out_events.push(Event {
            sample_index: onset,
            stimulus_id: truth.stimulus_ids[s].clone(),
            presentation_ordinal: ordinal as i32,
        });
    }

    // spike artifacts: a brief large transient on a few neighbouring channels
    if config.spike_rate_hz > 0.0 && config.spike_amplitude_uv != 0.0 {
        let duration_s = n_samples as f64 / rate;
        let expected = config.spike_rate_hz * duration_s;
        let n_spikes = rand_distr::Poisson::new(expected)
            .map(|d| d.sample(&mut rng) as usize)
            .unwrap_or(0);
        let width = config.samples(20.0).max(1);
        for _ in 0..n_spikes {
            let at = rng.random_range(0..n_samples.saturating_sub(width).max(1));
            let c0 = rng.random_range(0..n_ch);
            let amp = config.spike_amplitude_uv * rng.random_range(0.6..1.4);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            for c in [c0, (c0 + 1) % n_ch] {
                for j in 0..width {
                    let shape = (std::f64::consts::PI * j as f64 / width as f64).sin();
                    samples[(c, at + j)] += sign * amp * shape;
                }
            }
        }
    }

    Ok(ContinuousRecording {
        participant_id: who.participant_id.clone(),
        channel_labels: labels,
        sampling_rate_hz: rate,
        samples,
        events: out_events,
    })
}

/// Every recording plus the ground truth. Holds the whole cohort in
/// memory; see [`simulate_participant`] to stream participants.
pub fn simulate_cohort(config: &SimulationConfig) -> Result<(Vec<ContinuousRecording>, GroundTruth)> {
    let truth = ground_truth(config)?;
    let recs = (0..config.n_participants)
        .map(|p| simulate_participant(config, &truth, p))
        .collect::<Result<Vec<_>>>()?;
    Ok((recs, truth))
}
