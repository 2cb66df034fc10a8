//! The command-line tool, stage by stage and end to end.

use std::path::Path;
use std::process::{Command, Output};

use brainpref::pipeline::{CohortFile, LabelSummary, Manifest};

const BIN: &str = env!("CARGO_BIN_EXE_brainpref");

fn small_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    let text = format!(
        "seed = 21\n[paths]\nworkdir = {:?}\n[simulation]\nn_participants = 3\nn_stimuli = 60\ntrials_per_block = 2\n{extra}\n[evaluation]\nn_perm = 20\n",
        dir.join("work")
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn brainpref(config: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn stages_run_standalone_and_match_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    for stage in [
        &["simulate"][..],
        &["preprocess"],
        &["label"],
        &["featurize"],
        &["evaluate", "--task", "explicit"],
        &["evaluate", "--task", "group"],
        &["stats"],
    ] {
        ok(&brainpref(&cfg, stage));
    }
    let work = dir.path().join("work");
    for f in [
        "ratings.csv",
        "ranking.csv",
        "preprocess_summary.json",
        "cohort_explicit.csv",
        "cohort_group.json",
        "features/P01.explicit.csv",
        "reports/P01.explicit.json",
        "stats/stats.json",
        "stats/erp_explicit.csv",
        "stats/erp_explicit_Pz.svg",
    ] {
        assert!(work.join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(work.join("cohort_explicit.csv")).unwrap();
    assert!(csv.starts_with("participant_id,auc,p,n_folds\n"));
    assert_eq!(csv.lines().count(), 4);

    // the full run over the same work directory gives the same reports
    let before = std::fs::read(work.join("reports/P02.explicit.json")).unwrap();
    ok(&brainpref(&cfg, &["run"]));
    assert_eq!(before, std::fs::read(work.join("reports/P02.explicit.json")).unwrap());
    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(work.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.seed, 21);
    assert!(m.artifacts.windows(2).all(|w| w[0].path < w[1].path));
    assert!(m.artifacts.iter().any(|a| a.path == "stats/erp_group_Fz.svg"));
    assert!(!m.artifacts.iter().any(|a| a.path == "manifest.json"));
}

#[test]
fn all_attractive_participants_are_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "n_all_attractive = 3");
    let out = brainpref(&cfg, &["run"]);
    ok(&out);
    let work = dir.path().join("work");
    let labels: Vec<LabelSummary> =
        serde_json::from_str(&std::fs::read_to_string(work.join("label_summary.json")).unwrap()).unwrap();
    assert_eq!(labels.len(), 3);
    let cohort: CohortFile =
        serde_json::from_str(&std::fs::read_to_string(work.join("cohort_group.json")).unwrap()).unwrap();
    assert!(cohort.summary.is_none());
    assert_eq!(cohort.not_applicable.len(), 3);
    assert!(!work.join("labeled/P01.group.erp").exists());
    let explicit: CohortFile =
        serde_json::from_str(&std::fs::read_to_string(work.join("cohort_explicit.json")).unwrap()).unwrap();
    assert_eq!(explicit.summary.unwrap().n_participants, 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    // config error: no seed anywhere
    let bare = dir.path().join("bare.toml");
    std::fs::write(&bare, "[simulation]\nn_participants = 2\n").unwrap();
    assert_eq!(brainpref(&bare, &["simulate"]).status.code(), Some(2));
    // config error: unknown key
    std::fs::write(&bare, "seed = 1\nbogus = true\n").unwrap();
    assert_eq!(brainpref(&bare, &["simulate"]).status.code(), Some(2));

    // stage failure: nothing to preprocess
    let cfg = small_config(dir.path(), "");
    let out = brainpref(&cfg, &["preprocess"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("preprocess"));

    // invariant: a labeled file holding an unlabeled epoch
    let work = dir.path().join("work");
    std::fs::create_dir_all(work.join("labeled")).unwrap();
    let mut set = brainpref::signal::EpochSet::new(2000.0, vec!["Fz".into()]);
    set.epochs.push(brainpref::signal::Epoch {
        participant_id: "P01".into(),
        stimulus_id: "img000".into(),
        presentation_ordinal: 0,
        data: ndarray::Array2::zeros((1, 2200)),
        rejection: None,
        label: None,
    });
    brainpref::io::write_epochs(work.join("labeled/P01.explicit.erp"), &set).unwrap();
    assert_eq!(brainpref(&cfg, &["featurize"]).status.code(), Some(4));
}
