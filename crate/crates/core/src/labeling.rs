//! Explicit rating labels, the cohort-wide ranking, and tertile labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::signal::{EpochSet, ExplicitRating, GroupRanking, RankedStimulus, Tertile};

/// Number of selection blocks per session; ratings count blocks.
pub const N_BLOCKS: u8 = 3;

/// One confirmation-phase selection of a stimulus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSelection {
    /// 1-based block index.
    pub block: u8,
    pub stimulus_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelDomain {
    /// Explicit rating 0..=3.
    Rating,
    /// Group tertile code (Low 0, Medium 1, High 2).
    Tertile,
}

/// Non-rejected epochs, every one carrying a label from `domain`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEpochSet {
    pub domain: LabelDomain,
    pub epochs: EpochSet,
}

impl LabeledEpochSet {
    pub fn labels(&self) -> Vec<i32> {
        self.epochs
            .epochs
            .iter()
            .map(|e| e.label.expect("labeled set") as i32)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Label value -> number of epochs.
    pub fn histogram(&self) -> BTreeMap<i32, usize> {
        let mut h = BTreeMap::new();
        for l in self.labels() {
            *h.entry(l).or_insert(0) += 1;
        }
        h
    }
}

/// Collapses selections to per-stimulus counts: a stimulus scores one per
/// block in which it was selected at least once.
pub fn aggregate_ratings(
    participant_id: &str,
    stimuli: &[String],
    selections: &[BlockSelection],
) -> Result<Vec<ExplicitRating>> {
    let mut blocks: HashMap<&str, BTreeSet<u8>> =
        stimuli.iter().map(|s| (s.as_str(), BTreeSet::new())).collect();
    for sel in selections {
        if !(1..=N_BLOCKS).contains(&sel.block) {
            return invalid(format!("block {} outside 1..={N_BLOCKS}", sel.block));
        }
        match blocks.get_mut(sel.stimulus_id.as_str()) {
            Some(set) => {
                set.insert(sel.block);
            }
            None => return invalid(format!("unknown stimulus {:?}", sel.stimulus_id)),
        }
    }
    stimuli
        .iter()
        .map(|s| ExplicitRating::new(participant_id, s, blocks[s.as_str()].len() as u8))
        .collect()
}

/// Sizes `[low, medium, high]` of the tertiles for `n` ranked stimuli.
/// Extremes get `n / 3`; one leftover goes to Medium, two go to Medium
/// and High so no two tertiles differ by more than one.
pub fn tertile_sizes(n: usize) -> [usize; 3] {
    let k = n / 3;
    match n % 3 {
        0 => [k, k, k],
        1 => [k, k + 1, k],
        _ => [k, k + 1, k + 1],
    }
}

/// Sums every participant's counts per stimulus and splits the descending
/// order (ties by ascending stimulus id) into High, Medium and Low.
pub fn group_ranking(ratings: &[ExplicitRating]) -> Result<GroupRanking> {
    if ratings.is_empty() {
        return invalid("group ranking needs at least one rating");
    }
    let mut scores: BTreeMap<&str, u64> = BTreeMap::new();
    for r in ratings {
        *scores.entry(r.stimulus_id.as_str()).or_insert(0) += r.count as u64;
    }
    let mut order: Vec<(&str, u64)> = scores.into_iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let [_, n_mid, n_high] = tertile_sizes(order.len());
    let mut entries = Vec::with_capacity(order.len());
    let mut rank = 0;
    let mut prev = None;
    for (pos, (id, score)) in order.into_iter().enumerate() {
        if prev != Some(score) {
            rank += 1;
            prev = Some(score);
        }
        let tertile = if pos < n_high {
            Tertile::High
        } else if pos < n_high + n_mid {
            Tertile::Medium
        } else {
            Tertile::Low
        };
        entries.push(RankedStimulus {
            stimulus_id: id.to_string(),
            score,
            rank,
            tertile,
        });
    }
    Ok(GroupRanking { entries })
}

fn participant_ratings<'a>(
    participant_id: &str,
    ratings: &'a [ExplicitRating],
) -> HashMap<&'a str, u8> {
    ratings
        .iter()
        .filter(|r| r.participant_id == participant_id)
        .map(|r| (r.stimulus_id.as_str(), r.count))
        .collect()
}

/// Labels every kept epoch with its participant's rating of the stimulus.
pub fn explicit_labels(epochs: &EpochSet, ratings: &[ExplicitRating]) -> Result<LabeledEpochSet> {
    let mut cache: HashMap<&str, HashMap<&str, u8>> = HashMap::new();
    let mut out = EpochSet::new(epochs.sampling_rate_hz, epochs.channel_labels.clone());
    for e in epochs.kept() {
        let table = cache
            .entry(e.participant_id.as_str())
            .or_insert_with(|| participant_ratings(&e.participant_id, ratings));
        let Some(&count) = table.get(e.stimulus_id.as_str()) else {
            return invalid(format!(
                "no rating for stimulus {:?} of participant {:?}",
                e.stimulus_id, e.participant_id
            ));
        };
        let mut e = e.clone();
        e.label = Some(count as i8);
        out.epochs.push(e);
    }
    Ok(LabeledEpochSet {
        domain: LabelDomain::Rating,
        epochs: out,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Contradiction {
    Subset(LabeledEpochSet),
    NotApplicable(String),
}

/// Kept epochs of unrated (count 0) stimuli that sit in the High or Low
/// tertile, labelled by tertile code.
pub fn contradiction_subset(
    epochs: &EpochSet,
    ratings: &[ExplicitRating],
    ranking: &GroupRanking,
) -> Contradiction {
    let tertiles = ranking.tertile_map();
    let mut cache: HashMap<&str, HashMap<&str, u8>> = HashMap::new();
    let mut out = EpochSet::new(epochs.sampling_rate_hz, epochs.channel_labels.clone());
    for e in epochs.kept() {
        let table = cache
            .entry(e.participant_id.as_str())
            .or_insert_with(|| participant_ratings(&e.participant_id, ratings));
        if table.get(e.stimulus_id.as_str()) != Some(&0) {
            continue;
        }
        match tertiles.get(&e.stimulus_id) {
            Some(t @ (Tertile::Low | Tertile::High)) => {
                let mut e = e.clone();
                e.label = Some(t.code());
                out.epochs.push(e);
            }
            _ => {}
        }
    }
    let set = LabeledEpochSet {
        domain: LabelDomain::Tertile,
        epochs: out,
    };
    let h = set.histogram();
    if set.is_empty() {
        return Contradiction::NotApplicable(
            "no unrated stimulus in the High or Low tertile".into(),
        );
    }
    for t in [Tertile::Low, Tertile::High] {
        if !h.contains_key(&(t.code() as i32)) {
            return Contradiction::NotApplicable(format!(
                "every unrated stimulus misses the {} tertile",
                t.name()
            ));
        }
    }
    Contradiction::Subset(set)
}

/// Kept epochs of unrated stimuli labelled by the stimulus tertile,
/// Medium included. Used for grand averages, not classification.
pub fn unrated_tertile_labels(
    epochs: &EpochSet,
    ratings: &[ExplicitRating],
    ranking: &GroupRanking,
) -> LabeledEpochSet {
    let tertiles = ranking.tertile_map();
    let mut cache: HashMap<&str, HashMap<&str, u8>> = HashMap::new();
    let mut out = EpochSet::new(epochs.sampling_rate_hz, epochs.channel_labels.clone());
    for e in epochs.kept() {
        let table = cache
            .entry(e.participant_id.as_str())
            .or_insert_with(|| participant_ratings(&e.participant_id, ratings));
        if table.get(e.stimulus_id.as_str()) != Some(&0) {
            continue;
        }
        if let Some(t) = tertiles.get(&e.stimulus_id) {
            let mut e = e.clone();
            e.label = Some(t.code());
            out.epochs.push(e);
        }
    }
    LabeledEpochSet {
        domain: LabelDomain::Tertile,
        epochs: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{standard_channel_labels, Epoch, RejectReason};
    use ndarray::Array2;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:03}")).collect()
    }

    fn sel(block: u8, id: &str) -> BlockSelection {
        BlockSelection {
            block,
            stimulus_id: id.into(),
        }
    }

    fn rating(p: &str, s: &str, c: u8) -> ExplicitRating {
        ExplicitRating::new(p, s, c).unwrap()
    }

    fn epochs(p: &str, stimuli: &[&str]) -> EpochSet {
        let mut set = EpochSet::new(100.0, standard_channel_labels());
        for (i, s) in stimuli.iter().enumerate() {
            set.epochs.push(Epoch {
                participant_id: p.into(),
                stimulus_id: s.to_string(),
                presentation_ordinal: i as i32,
                data: Array2::zeros((32, 110)),
                rejection: None,
                label: None,
            });
        }
        set
    }

    #[test]
    fn ratings_count_blocks() {
        let stim = ids(3);
        let r = aggregate_ratings(
            "p",
            &stim,
            &[
                sel(1, "s000"),
                sel(2, "s000"),
                sel(3, "s000"),
                sel(2, "s001"),
                sel(2, "s001"),
            ],
        )
        .unwrap();
        let counts: Vec<u8> = r.iter().map(|r| r.count).collect();
        assert_eq!(counts, vec![3, 1, 0]);
        assert!(aggregate_ratings("p", &stim, &[sel(1, "zzz")]).is_err());
        assert!(aggregate_ratings("p", &stim, &[sel(4, "s000")]).is_err());
    }

    #[test]
    fn ranking_three_stimuli() {
        let rs = vec![rating("p", "a", 3), rating("q", "a", 2), rating("p", "b", 2), rating("p", "c", 0)];
        let g = group_ranking(&rs).unwrap();
        let got: Vec<(&str, u64, usize, Tertile)> = g
            .entries
            .iter()
            .map(|e| (e.stimulus_id.as_str(), e.score, e.rank, e.tertile))
            .collect();
        assert_eq!(
            got,
            vec![
                ("a", 5, 1, Tertile::High),
                ("b", 2, 2, Tertile::Medium),
                ("c", 0, 3, Tertile::Low)
            ]
        );
    }

    #[test]
    fn ranking_ties_use_id_order() {
        let rs: Vec<_> = ids(7).iter().rev().map(|s| rating("p", s, 1)).collect();
        let g = group_ranking(&rs).unwrap();
        assert!(g.entries.iter().all(|e| e.rank == 1));
        let order: Vec<&str> = g.entries.iter().map(|e| e.stimulus_id.as_str()).collect();
        assert_eq!(order, vec!["s000", "s001", "s002", "s003", "s004", "s005", "s006"]);
        assert_eq!(g.tertile_sizes(), [2, 3, 2]);
        assert!(group_ranking(&[]).is_err());
    }

    #[test]
    fn tertile_size_table() {
        assert_eq!(tertile_sizes(240), [80, 80, 80]);
        assert_eq!(tertile_sizes(7), [2, 3, 2]);
        assert_eq!(tertile_sizes(8), [2, 3, 3]);
        assert_eq!(tertile_sizes(1), [0, 1, 0]);
        for n in 0..50 {
            let s = tertile_sizes(n);
            assert_eq!(s.iter().sum::<usize>(), n);
            assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn explicit_labels_skip_rejected() {
        let mut set = epochs("p", &["a", "b", "a"]);
        set.epochs[1].rejection = Some(RejectReason::Artifact);
        let rs = vec![rating("p", "a", 2), rating("p", "b", 1), rating("q", "a", 0)];
        let l = explicit_labels(&set, &rs).unwrap();
        assert_eq!(l.labels(), vec![2, 2]);
        assert_eq!(l.domain, LabelDomain::Rating);
        assert!(explicit_labels(&epochs("p", &["c"]), &rs).is_err());
    }

    #[test]
    fn contradiction_cases() {
        let g = group_ranking(&[
            rating("x", "hi", 3),
            rating("x", "mid", 2),
            rating("x", "lo", 0),
        ])
        .unwrap();
        let set = epochs("p", &["hi", "mid", "lo", "hi"]);

        let all_zero = vec![rating("p", "hi", 0), rating("p", "mid", 0), rating("p", "lo", 0)];
        match contradiction_subset(&set, &all_zero, &g) {
            Contradiction::Subset(s) => {
                assert_eq!(s.labels(), vec![2, 0, 2]);
                assert_eq!(s.domain, LabelDomain::Tertile);
            }
            other => panic!("{other:?}"),
        }

        let none_zero = vec![rating("p", "hi", 1), rating("p", "mid", 1), rating("p", "lo", 2)];
        assert!(matches!(
            contradiction_subset(&set, &none_zero, &g),
            Contradiction::NotApplicable(_)
        ));

        let only_low = vec![rating("p", "hi", 1), rating("p", "mid", 0), rating("p", "lo", 0)];
        assert!(matches!(
            contradiction_subset(&set, &only_low, &g),
            Contradiction::NotApplicable(_)
        ));
    }
}
