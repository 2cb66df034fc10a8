//! Stage orchestration over a work directory.
//!
//! ```text
//! ground_truth.json  ratings.csv  recordings/<pid>.rec          simulate
//! preprocess_summary.json         epochs/<pid>.erp              preprocess
//! ranking.csv  label_summary.json labeled/<pid>.<task>.erp      label
//! features/<pid>.<task>.csv                                     featurize
//! reports/<pid>.<task>.json  cohort_<task>.csv  cohort_<task>.json  evaluate
//! stats/erp_<task>.csv  stats/erp_<task>_<channel>.svg  stats/stats.json  stats
//! manifest.json                                                 run
//! ```
//!
//! Each stage reads only files written by earlier stages, so stages can be
//! rerun one at a time. Participants are discovered from file names and
//! processed one after another to bound memory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluation::{
    cohort_summary, permutation_test, CohortSummary, EvaluationReport, FastLdaLoo, Task,
};
use crate::features::{feature_matrix, read_features_csv, vectorize_set, write_features_csv, FeatureVector};
use crate::io;
use crate::labeling::{
    contradiction_subset, explicit_labels, group_ranking, tertile_sizes, Contradiction, LabelDomain,
    LabeledEpochSet,
};
use crate::neurostats::{
    bin_table_curves, curves_svg, explicit_conditions, grand_average_curves, group_conditions,
    participant_curves, post_hoc, sliding_rm_anova, wilcoxon_signed_rank, write_curves_csv,
    ConditionSpec, PairwiseT, ParticipantCurves, SlidingAnovaResult, WilcoxonResult,
};
use crate::preprocess::{preprocess_recording, FilterSpec, PreprocessSummary, RejectionPolicy};
use crate::signal::{validate_recording, ContinuousRecording, EpochSet, ExplicitRating, GroupRanking};
use crate::synth::{ground_truth, simulate_participant};

pub const TASKS: [Task; 2] = [Task::Explicit, Task::Group];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Preprocess,
    Label,
    Featurize,
    Evaluate(Task),
    Stats,
    Manifest,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Simulate => f.write_str("simulate"),
            Stage::Preprocess => f.write_str("preprocess"),
            Stage::Label => f.write_str("label"),
            Stage::Featurize => f.write_str("featurize"),
            Stage::Evaluate(t) => write!(f, "evaluate ({})", t.name()),
            Stage::Stats => f.write_str("stats"),
            Stage::Manifest => f.write_str("manifest"),
        }
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// File locations inside a work directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn ground_truth(&self) -> PathBuf {
        self.root.join("ground_truth.json")
    }
    pub fn ratings(&self) -> PathBuf {
        self.root.join("ratings.csv")
    }
    pub fn recordings(&self) -> PathBuf {
        self.root.join("recordings")
    }
    pub fn recording(&self, pid: &str) -> PathBuf {
        self.recordings().join(format!("{pid}.rec"))
    }
    pub fn epochs_dir(&self) -> PathBuf {
        self.root.join("epochs")
    }
    pub fn epochs(&self, pid: &str) -> PathBuf {
        self.epochs_dir().join(format!("{pid}.erp"))
    }
    pub fn preprocess_summary(&self) -> PathBuf {
        self.root.join("preprocess_summary.json")
    }
    pub fn ranking(&self) -> PathBuf {
        self.root.join("ranking.csv")
    }
    pub fn label_summary(&self) -> PathBuf {
        self.root.join("label_summary.json")
    }
    pub fn labeled_dir(&self) -> PathBuf {
        self.root.join("labeled")
    }
    pub fn labeled(&self, pid: &str, task: Task) -> PathBuf {
        self.labeled_dir().join(format!("{pid}.{}.erp", task.name()))
    }
    pub fn features_dir(&self) -> PathBuf {
        self.root.join("features")
    }
    pub fn features(&self, pid: &str, task: Task) -> PathBuf {
        self.features_dir().join(format!("{pid}.{}.csv", task.name()))
    }
    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }
    pub fn report(&self, pid: &str, task: Task) -> PathBuf {
        self.reports_dir().join(format!("{pid}.{}.json", task.name()))
    }
    pub fn cohort_csv(&self, task: Task) -> PathBuf {
        self.root.join(format!("cohort_{}.csv", task.name()))
    }
    pub fn cohort_json(&self, task: Task) -> PathBuf {
        self.root.join(format!("cohort_{}.json", task.name()))
    }
    pub fn stats_dir(&self) -> PathBuf {
        self.root.join("stats")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

/// Sorted participant ids of files in `dir` named `<pid><suffix>`.
pub fn participants_in(dir: &Path, suffix: &str) -> Result<Vec<String>> {
    if !dir.is_dir() {
        return Err(Error::InvalidInput(format!("missing directory {}", dir.display())));
    }
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(pid) = name.strip_suffix(suffix) {
            if !pid.is_empty() && !pid.contains('.') {
                ids.push(pid.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Permutation seed of one participant, derived from the master seed.
pub fn participant_seed(seed: u64, participant_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in participant_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

pub fn simulate(cfg: &PipelineConfig, layout: &Layout) -> Result<()> {
    let sim = cfg.simulation()?;
    let truth = ground_truth(&sim)?;
    fs::create_dir_all(layout.recordings())?;
    write_json(&layout.ground_truth(), &truth)?;
    io::write_ratings_csv(layout.ratings(), &truth.all_ratings())?;
    for p in 0..sim.n_participants {
        let rec = simulate_participant(&sim, &truth, p)?;
        check_recording(&rec)?;
        io::write_recording(layout.recording(&rec.participant_id), &rec)?;
    }
    Ok(())
}

fn check_recording(rec: &ContinuousRecording) -> Result<()> {
    let issues = validate_recording(rec);
    if issues.is_empty() {
        return Ok(());
    }
    let text: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
    Err(Error::Invariant(format!(
        "recording {}: {}",
        rec.participant_id,
        text.join("; ")
    )))
}

pub fn preprocess(cfg: &PipelineConfig, layout: &Layout) -> Result<Vec<PreprocessSummary>> {
    let ids = participants_in(&layout.recordings(), ".rec")?;
    fs::create_dir_all(layout.epochs_dir())?;
    let mut summaries = Vec::with_capacity(ids.len());
    for pid in ids {
        let rec = io::read_recording(layout.recording(&pid))?;
        check_recording(&rec)?;
        let (set, summary) = preprocess_recording(rec, &cfg.filter, &cfg.rejection)?;
        set.validate().map_err(|e| Error::Invariant(e.to_string()))?;
        io::write_epochs(layout.epochs(&pid), &set)?;
        summaries.push(summary);
    }
    write_json(&layout.preprocess_summary(), &summaries)?;
    Ok(summaries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupStatus {
    Ok { histogram: BTreeMap<i32, usize> },
    NotApplicable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub participant_id: String,
    pub explicit_histogram: BTreeMap<i32, usize>,
    pub group: GroupStatus,
}

fn check_ranking(ranking: &GroupRanking) -> Result<()> {
    if ranking.tertile_sizes() != tertile_sizes(ranking.entries.len()) {
        return Err(Error::Invariant(format!(
            "tertile sizes {:?} for {} stimuli",
            ranking.tertile_sizes(),
            ranking.entries.len()
        )));
    }
    Ok(())
}

pub fn label(layout: &Layout) -> Result<Vec<LabelSummary>> {
    let ratings = io::read_ratings_csv(layout.ratings())?;
    let ranking = group_ranking(&ratings)?;
    check_ranking(&ranking)?;
    io::write_ranking_csv(layout.ranking(), &ranking)?;
    fs::create_dir_all(layout.labeled_dir())?;
    let mut out = Vec::new();
    for pid in participants_in(&layout.epochs_dir(), ".erp")? {
        let set = io::read_epochs(layout.epochs(&pid))?;
        let explicit = explicit_labels(&set, &ratings)?;
        io::write_epochs(layout.labeled(&pid, Task::Explicit), &explicit.epochs)?;
        let group_path = layout.labeled(&pid, Task::Group);
        let group = match contradiction_subset(&set, &ratings, &ranking) {
            Contradiction::Subset(s) => {
                io::write_epochs(&group_path, &s.epochs)?;
                GroupStatus::Ok {
                    histogram: s.histogram(),
                }
            }
            Contradiction::NotApplicable(reason) => {
                if group_path.exists() {
                    fs::remove_file(&group_path)?;
                }
                GroupStatus::NotApplicable { reason }
            }
        };
        out.push(LabelSummary {
            participant_id: pid,
            explicit_histogram: explicit.histogram(),
            group,
        });
    }
    write_json(&layout.label_summary(), &out)?;
    Ok(out)
}

fn domain_of(task: Task) -> LabelDomain {
    match task {
        Task::Explicit => LabelDomain::Rating,
        Task::Group => LabelDomain::Tertile,
    }
}

pub fn featurize(layout: &Layout) -> Result<()> {
    fs::create_dir_all(layout.features_dir())?;
    for task in TASKS {
        let suffix = format!(".{}.erp", task.name());
        for pid in participants_in(&layout.labeled_dir(), &suffix)? {
            let set = LabeledEpochSet {
                domain: domain_of(task),
                epochs: io::read_epochs(layout.labeled(&pid, task))?,
            };
            if set.epochs.epochs.iter().any(|e| e.label.is_none() || e.is_rejected()) {
                return Err(Error::Invariant(format!(
                    "labeled set of {pid} holds unlabeled or rejected epochs"
                )));
            }
            let vectors = vectorize_set(&set)?;
            write_features_csv(layout.features(&pid, task), &vectors)?;
        }
    }
    Ok(())
}

/// Leave-one-out permutation report for one participant's vectors.
pub fn evaluate_vectors(
    vectors: &[FeatureVector],
    participant_id: &str,
    task: Task,
    n_perm: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let (x, labels) = feature_matrix(vectors)?;
    let engine = FastLdaLoo::new(&x)?;
    let report = permutation_test(&engine, participant_id, task, &labels, n_perm, seed)?;
    let expect = (1 + report.null_aucs.iter().filter(|v| **v >= report.auc).count()) as f64
        / (1 + n_perm) as f64;
    if report.p_value != expect || !(0.0..=1.0).contains(&report.auc) {
        return Err(Error::Invariant(format!(
            "report of {participant_id} breaks the p-value or AUC range contract"
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub participant_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortFile {
    pub task: Task,
    pub n_perm: usize,
    pub summary: Option<CohortSummary>,
    pub not_applicable: Vec<Exclusion>,
}

pub fn evaluate(cfg: &PipelineConfig, layout: &Layout, task: Task) -> Result<CohortFile> {
    let seed = cfg.seed()?;
    let n_perm = cfg.evaluation.n_perm;
    fs::create_dir_all(layout.reports_dir())?;
    let suffix = format!(".{}.csv", task.name());
    let mut reports = Vec::new();
    let mut not_applicable = Vec::new();
    if task == Task::Group && layout.label_summary().exists() {
        let labels: Vec<LabelSummary> = read_json(&layout.label_summary())?;
        for l in labels {
            if let GroupStatus::NotApplicable { reason } = l.group {
                not_applicable.push(Exclusion {
                    participant_id: l.participant_id,
                    reason,
                });
            }
        }
    }
    for pid in participants_in(&layout.features_dir(), &suffix)? {
        let vectors = read_features_csv(layout.features(&pid, task))?;
        let report_path = layout.report(&pid, task);
        match evaluate_vectors(&vectors, &pid, task, n_perm, participant_seed(seed, &pid)) {
            Ok(r) => {
                write_json(&report_path, &r)?;
                reports.push(r);
            }
            Err(e @ (Error::TooManySkippedFolds { .. } | Error::InvalidInput(_))) => {
                if report_path.exists() {
                    fs::remove_file(&report_path)?;
                }
                not_applicable.push(Exclusion {
                    participant_id: pid,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    not_applicable.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));

    let mut w = csv::Writer::from_path(layout.cohort_csv(task))?;
    w.write_record(["participant_id", "auc", "p", "n_folds"])?;
    for r in &reports {
        w.write_record([
            r.participant_id.clone(),
            format!("{:?}", r.auc),
            format!("{:?}", r.p_value),
            r.fold_count.to_string(),
        ])?;
    }
    w.flush()?;
    let file = CohortFile {
        task,
        n_perm,
        summary: if reports.is_empty() {
            None
        } else {
            Some(cohort_summary(&reports, cfg.evaluation.alpha)?)
        },
        not_applicable,
    };
    write_json(&layout.cohort_json(task), &file)?;
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub channel: String,
    pub anova: Option<SlidingAnovaResult>,
    /// pairwise tests in the bin with the largest F
    pub post_hoc: Vec<PairwiseT>,
    pub peak_center_ms: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub task: Task,
    pub conditions: Vec<ConditionSpec>,
    pub n_participants: usize,
    pub excluded: BTreeMap<String, usize>,
    pub channels: Vec<ChannelStats>,
    /// signed-rank test of observed AUC minus mean null AUC per participant
    pub auc_vs_null: Option<WilcoxonResult>,
    pub auc_vs_null_note: Option<String>,
    /// why the curves and tests are missing, when they are
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub tasks: Vec<TaskStats>,
    pub caveat: String,
}

const COHORT_CAVEAT: &str = "The signed-rank test is applied only to paired per-participant \
values (observed AUC against the mean of that participant's permutation null). Comparisons \
between disjoint participant groups are unpaired and are reported descriptively in the cohort \
files, not tested here.";

/// Epochs of unrated stimuli relabelled by tertile, Medium included.
fn unrated_by_tertile(explicit: &EpochSet, ranking: &GroupRanking) -> EpochSet {
    let tertiles = ranking.tertile_map();
    let mut out = EpochSet::new(explicit.sampling_rate_hz, explicit.channel_labels.clone());
    for e in explicit.kept() {
        if e.label != Some(0) {
            continue;
        }
        if let Some(t) = tertiles.get(&e.stimulus_id) {
            let mut e = e.clone();
            e.label = Some(t.code());
            out.epochs.push(e);
        }
    }
    out
}

fn task_stats(
    cfg: &PipelineConfig,
    layout: &Layout,
    task: Task,
    conditions: Vec<ConditionSpec>,
    parts: &[ParticipantCurves],
) -> Result<TaskStats> {
    let dir = layout.stats_dir();
    let ga = grand_average_curves(parts, &conditions)?;
    write_curves_csv(dir.join(format!("erp_{}.csv", task.name())), &ga.curves)?;
    let mut channels = Vec::new();
    for ch in &cfg.stats.channels {
        fs::write(
            dir.join(format!("erp_{}_{ch}.svg", task.name())),
            curves_svg(ch, &ga.curves),
        )?;
        let (_, table) = bin_table_curves(parts, ch, &cfg.stats.bins)?;
        if table.len() < 2 {
            channels.push(ChannelStats {
                channel: ch.clone(),
                anova: None,
                post_hoc: Vec::new(),
                peak_center_ms: None,
                note: Some(format!(
                    "{} participant(s) with every condition present; need 2",
                    table.len()
                )),
            });
            continue;
        }
        let anova = sliding_rm_anova(ch, &table, &cfg.stats.bins)?;
        let peak = anova.peak_bin().expect("at least one bin");
        channels.push(ChannelStats {
            channel: ch.clone(),
            post_hoc: post_hoc(&conditions, &table, peak)?,
            peak_center_ms: Some(anova.bins[peak].center_ms),
            anova: Some(anova),
            note: None,
        });
    }

    let mut deltas = Vec::new();
    if layout.reports_dir().is_dir() {
        let suffix = format!(".{}.json", task.name());
        for pid in participants_in(&layout.reports_dir(), &suffix)? {
            let r: EvaluationReport = read_json(&layout.report(&pid, task))?;
            if !r.null_aucs.is_empty() {
                let null_mean = r.null_aucs.iter().sum::<f64>() / r.null_aucs.len() as f64;
                deltas.push(r.auc - null_mean);
            }
        }
    }
    let (auc_vs_null, auc_vs_null_note) = match wilcoxon_signed_rank(&deltas) {
        Ok(w) => (Some(w), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(TaskStats {
        task,
        conditions,
        n_participants: parts.len(),
        excluded: ga.excluded,
        channels,
        auc_vs_null,
        auc_vs_null_note,
        note: None,
    })
}

/// Stats of one task, or an empty entry saying why they cannot be computed.
fn task_stats_or_note(
    cfg: &PipelineConfig,
    layout: &Layout,
    task: Task,
    conditions: Vec<ConditionSpec>,
    parts: &[ParticipantCurves],
) -> Result<TaskStats> {
    match task_stats(cfg, layout, task, conditions.clone(), parts) {
        Err(Error::InvalidInput(reason)) => Ok(TaskStats {
            task,
            conditions,
            n_participants: parts.len(),
            excluded: BTreeMap::new(),
            channels: Vec::new(),
            auc_vs_null: None,
            auc_vs_null_note: None,
            note: Some(reason),
        }),
        other => other,
    }
}

pub fn stats(cfg: &PipelineConfig, layout: &Layout) -> Result<StatsReport> {
    let ranking = io::read_ranking_csv(layout.ranking())?;
    fs::create_dir_all(layout.stats_dir())?;
    let suffix = format!(".{}.erp", Task::Explicit.name());
    let mut explicit_parts = Vec::new();
    let mut group_parts = Vec::new();
    let (ec, gc) = (explicit_conditions(), group_conditions());
    for pid in participants_in(&layout.labeled_dir(), &suffix)? {
        let set = io::read_epochs(layout.labeled(&pid, Task::Explicit))?;
        explicit_parts.push(participant_curves(&set, &ec, &cfg.stats.channels)?);
        let unrated = unrated_by_tertile(&set, &ranking);
        let mut curves = participant_curves(&unrated, &gc, &cfg.stats.channels)?;
        curves.participant_id = pid;
        group_parts.push(curves);
    }
    let tasks = vec![
        task_stats_or_note(cfg, layout, Task::Explicit, ec, &explicit_parts)?,
        task_stats_or_note(cfg, layout, Task::Group, gc, &group_parts)?,
    ];
    let report = StatsReport {
        tasks,
        caveat: COHORT_CAVEAT.to_string(),
    };
    write_json(&layout.stats_dir().join("stats.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub artifacts: Vec<ManifestEntry>,
}

fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let mut hasher = Sha256::new();
    let mut f = fs::File::open(path)?;
    let mut buf = vec![0u8; 1 << 20];
    let mut bytes = 0u64;
    loop {
        let n = std::io::Read::read(&mut f, &mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), bytes))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Hashes every file under the work directory except the manifest.
pub fn build_manifest(layout: &Layout, seed: u64) -> Result<Manifest> {
    let mut files = Vec::new();
    collect_files(&layout.root, &mut files)?;
    let manifest = layout.manifest();
    let mut artifacts = Vec::new();
    for f in files.into_iter().filter(|f| *f != manifest) {
        let rel = f
            .strip_prefix(&layout.root)
            .expect("inside root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let (sha256, bytes) = sha256_file(&f)?;
        artifacts.push(ManifestEntry {
            path: rel,
            sha256,
            bytes,
        });
    }
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(Manifest { seed, artifacts })
}

/// Runs every stage in order and writes the manifest.
pub fn run_pipeline(cfg: &PipelineConfig) -> std::result::Result<Manifest, StageError> {
    let layout = Layout::new(&cfg.paths.workdir);
    let seed = cfg.seed().at(Stage::Simulate)?;
    fs::create_dir_all(&layout.root).map_err(Error::from).at(Stage::Simulate)?;
    simulate(cfg, &layout).at(Stage::Simulate)?;
    preprocess(cfg, &layout).at(Stage::Preprocess)?;
    label(&layout).at(Stage::Label)?;
    featurize(&layout).at(Stage::Featurize)?;
    for task in TASKS {
        evaluate(cfg, &layout, task).at(Stage::Evaluate(task))?;
    }
    stats(cfg, &layout).at(Stage::Stats)?;
    let manifest = build_manifest(&layout, seed).at(Stage::Manifest)?;
    write_json(&layout.manifest(), &manifest).at(Stage::Manifest)?;
    Ok(manifest)
}

/// One participant's features computed in memory, without touching disk.
#[derive(Debug, Clone)]
pub struct ParticipantFeatures {
    pub participant_id: String,
    pub summary: PreprocessSummary,
    pub explicit: Vec<FeatureVector>,
    /// `Err(reason)` when the group task does not apply
    pub group: std::result::Result<Vec<FeatureVector>, String>,
}

pub fn participant_features(
    rec: ContinuousRecording,
    ratings: &[ExplicitRating],
    ranking: &GroupRanking,
    filter: &FilterSpec,
    policy: &RejectionPolicy,
) -> Result<ParticipantFeatures> {
    let participant_id = rec.participant_id.clone();
    let (set, summary) = preprocess_recording(rec, filter, policy)?;
    let explicit = vectorize_set(&explicit_labels(&set, ratings)?)?;
    let group = match contradiction_subset(&set, ratings, ranking) {
        Contradiction::Subset(s) => Ok(vectorize_set(&s)?),
        Contradiction::NotApplicable(reason) => Err(reason),
    };
    Ok(ParticipantFeatures {
        participant_id,
        summary,
        explicit,
        group,
    })
}
