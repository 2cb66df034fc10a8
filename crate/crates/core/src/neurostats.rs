//! Grand averages and the repeated-measures test battery.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

use crate::error::{invalid, Error, Result};
use crate::signal::{EpochSet, Tertile};

/// Named group of label codes averaged together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub name: String,
    pub labels: Vec<i8>,
}

impl ConditionSpec {
    pub fn new(name: &str, labels: &[i8]) -> Self {
        ConditionSpec {
            name: name.to_string(),
            labels: labels.to_vec(),
        }
    }
}

/// Explicit ratings with levels 1 and 2 merged.
pub fn explicit_conditions() -> Vec<ConditionSpec> {
    vec![
        ConditionSpec::new("0", &[0]),
        ConditionSpec::new("1+2", &[1, 2]),
        ConditionSpec::new("3", &[3]),
    ]
}

pub fn group_conditions() -> Vec<ConditionSpec> {
    [Tertile::Low, Tertile::Medium, Tertile::High]
        .iter()
        .map(|t| ConditionSpec::new(t.name(), &[t.code()]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErpCurve {
    pub channel: String,
    pub condition: String,
    pub time_ms: Vec<f64>,
    pub mean_uv: Vec<f64>,
    pub n_participants: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrandAverage {
    pub curves: Vec<ErpCurve>,
    /// condition -> participants without any epoch in it
    pub excluded: BTreeMap<String, usize>,
}

/// Mean waveform of one channel over the kept, labelled epochs of each
/// condition; `None` where the condition has no epoch.
pub fn participant_means(
    set: &EpochSet,
    conditions: &[ConditionSpec],
    channel: usize,
) -> Vec<Option<Vec<f64>>> {
    let len = set.samples_per_epoch();
    conditions
        .iter()
        .map(|cond| {
            let mut acc = vec![0.0; len];
            let mut count = 0usize;
            for e in set.kept() {
                if e.label.is_some_and(|l| cond.labels.contains(&l)) {
                    for (a, v) in acc.iter_mut().zip(e.data.row(channel)) {
                        *a += v;
                    }
                    count += 1;
                }
            }
            (count > 0).then(|| acc.into_iter().map(|a| a / count as f64).collect())
        })
        .collect()
}

fn channel_of(set: &EpochSet, label: &str) -> Result<usize> {
    set.channel_index(label)
        .ok_or_else(|| Error::InvalidInput(format!("unknown channel {label:?}")))
}

/// One participant's condition means for the channels of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantCurves {
    pub participant_id: String,
    pub time_ms: Vec<f64>,
    pub channels: Vec<String>,
    /// `means[channel][condition]`
    pub means: Vec<Vec<Option<Vec<f64>>>>,
}

pub fn participant_curves(
    set: &EpochSet,
    conditions: &[ConditionSpec],
    channels: &[String],
) -> Result<ParticipantCurves> {
    let means = channels
        .iter()
        .map(|ch| Ok(participant_means(set, conditions, channel_of(set, ch)?)))
        .collect::<Result<_>>()?;
    Ok(ParticipantCurves {
        participant_id: set
            .epochs
            .first()
            .map(|e| e.participant_id.clone())
            .unwrap_or_default(),
        time_ms: set.time_axis_ms(),
        channels: channels.to_vec(),
        means,
    })
}

fn check_curves(parts: &[ParticipantCurves]) -> Result<&ParticipantCurves> {
    let Some(first) = parts.first() else {
        return invalid("grand average needs at least one participant");
    };
    if parts
        .iter()
        .any(|p| p.time_ms != first.time_ms || p.channels != first.channels)
    {
        return invalid("participants differ in time axis or channels");
    }
    Ok(first)
}

/// Two-stage average: within each participant, then across participants.
pub fn grand_average_curves(
    parts: &[ParticipantCurves],
    conditions: &[ConditionSpec],
) -> Result<GrandAverage> {
    let first = check_curves(parts)?;
    let mut excluded = BTreeMap::new();
    let mut curves = Vec::new();
    for (c, ch) in first.channels.iter().enumerate() {
        for (k, cond) in conditions.iter().enumerate() {
            let present: Vec<&Vec<f64>> = parts
                .iter()
                .filter_map(|p| p.means[c].get(k).and_then(|m| m.as_ref()))
                .collect();
            excluded.insert(cond.name.clone(), parts.len() - present.len());
            if present.is_empty() {
                return invalid(format!("no participant has epochs in condition {}", cond.name));
            }
            let mut mean = vec![0.0; first.time_ms.len()];
            for p in &present {
                for (m, v) in mean.iter_mut().zip(p.iter()) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= present.len() as f64);
            curves.push(ErpCurve {
                channel: ch.clone(),
                condition: cond.name.clone(),
                time_ms: first.time_ms.clone(),
                mean_uv: mean,
                n_participants: present.len(),
            });
        }
    }
    Ok(GrandAverage { curves, excluded })
}

pub fn grand_average(
    sets: &[EpochSet],
    conditions: &[ConditionSpec],
    channels: &[String],
) -> Result<GrandAverage> {
    let parts = sets
        .iter()
        .map(|s| participant_curves(s, conditions, channels))
        .collect::<Result<Vec<_>>>()?;
    grand_average_curves(&parts, conditions)
}

/// Contiguous analysis bins `[start, start + width)` covering `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinSpec {
    pub lo_ms: f64,
    pub hi_ms: f64,
    pub width_ms: f64,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec {
            lo_ms: 100.0,
            hi_ms: 500.0,
            width_ms: 25.0,
        }
    }
}

impl BinSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_ms > 0.0 && self.hi_ms > self.lo_ms) {
            return invalid("bins need positive width and hi > lo");
        }
        let n = (self.hi_ms - self.lo_ms) / self.width_ms;
        if (n - n.round()).abs() > 1e-9 {
            return invalid("bin width must divide the analysis range");
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        ((self.hi_ms - self.lo_ms) / self.width_ms).round() as usize
    }

    pub fn centers_ms(&self) -> Vec<f64> {
        (0..self.count())
            .map(|b| self.lo_ms + self.width_ms * (b as f64 + 0.5))
            .collect()
    }

    /// Mean of `curve` within every bin.
    pub fn bin_means(&self, time_ms: &[f64], curve: &[f64]) -> Result<Vec<f64>> {
        (0..self.count())
            .map(|b| {
                let a = self.lo_ms + self.width_ms * b as f64;
                let e = a + self.width_ms;
                let tol = 1e-9;
                let (mut sum, mut n) = (0.0, 0usize);
                for (t, v) in time_ms.iter().zip(curve) {
                    if *t >= a - tol && *t < e - tol {
                        sum += v;
                        n += 1;
                    }
                }
                if n == 0 {
                    return invalid(format!("bin [{a}, {e}) ms holds no samples"));
                }
                Ok(sum / n as f64)
            })
            .collect()
    }
}

/// Per-participant bin means for one channel: `table[p][condition][bin]`,
/// keeping only participants with every condition present.
pub fn bin_table_curves(
    parts: &[ParticipantCurves],
    channel: &str,
    bins: &BinSpec,
) -> Result<(Vec<String>, Vec<Vec<Vec<f64>>>)> {
    bins.validate()?;
    let first = check_curves(parts)?;
    let Some(c) = first.channels.iter().position(|ch| ch == channel) else {
        return invalid(format!("channel {channel:?} was not averaged"));
    };
    let mut ids = Vec::new();
    let mut table = Vec::new();
    for p in parts {
        if p.means[c].iter().any(|m| m.is_none()) {
            continue;
        }
        let rows = p.means[c]
            .iter()
            .map(|m| bins.bin_means(&p.time_ms, m.as_ref().unwrap()))
            .collect::<Result<Vec<_>>>()?;
        ids.push(p.participant_id.clone());
        table.push(rows);
    }
    Ok((ids, table))
}

pub fn bin_table(
    sets: &[EpochSet],
    conditions: &[ConditionSpec],
    channel: &str,
    bins: &BinSpec,
) -> Result<(Vec<String>, Vec<Vec<Vec<f64>>>)> {
    let parts = sets
        .iter()
        .map(|s| participant_curves(s, conditions, &[channel.to_string()]))
        .collect::<Result<Vec<_>>>()?;
    bin_table_curves(&parts, channel, bins)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaStat {
    /// `inf` when the error term vanishes but conditions differ; JSON null
    pub f: f64,
    pub df1: usize,
    pub df2: usize,
    pub p: f64,
}

/// Upper tail of the F distribution.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_reg(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))
}

/// One-way repeated-measures ANOVA on `data[participant][condition]`.
pub fn rm_anova(data: &[Vec<f64>]) -> Result<AnovaStat> {
    let n = data.len();
    if n < 2 {
        return invalid("repeated-measures ANOVA needs at least two participants");
    }
    let k = data[0].len();
    if k < 2 {
        return invalid("repeated-measures ANOVA needs at least two conditions");
    }
    if let Some(r) = data.iter().find(|r| r.len() != k) {
        return Err(Error::Dimension {
            expected: k,
            actual: r.len(),
        });
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return invalid("ANOVA input contains non-finite values");
    }
    let grand = data.iter().flatten().sum::<f64>() / (n * k) as f64;
    let subj: Vec<f64> = data.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
    let cond: Vec<f64> = (0..k)
        .map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let ss_cond = n as f64 * cond.iter().map(|c| (c - grand).powi(2)).sum::<f64>();
    let mut ss_err = 0.0;
    for (i, r) in data.iter().enumerate() {
        for j in 0..k {
            ss_err += (r[j] - subj[i] - cond[j] + grand).powi(2);
        }
    }
    let df1 = k - 1;
    let df2 = (k - 1) * (n - 1);
    let scale = data.iter().flatten().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let eps = 1e-24 * scale;
    let f = if ss_cond <= eps {
        0.0
    } else if ss_err <= eps {
        f64::INFINITY
    } else {
        (ss_cond / df1 as f64) / (ss_err / df2 as f64)
    };
    Ok(AnovaStat {
        f,
        df1,
        df2,
        p: f_sf(f, df1 as f64, df2 as f64),
    })
}

pub fn bonferroni(p: &[f64]) -> Vec<f64> {
    let m = p.len() as f64;
    p.iter().map(|v| (v * m).min(1.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaBin {
    pub center_ms: f64,
    #[serde(flatten)]
    pub stat: AnovaStat,
    pub p_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlidingAnovaResult {
    pub channel: String,
    pub n_participants: usize,
    pub bins: Vec<AnovaBin>,
}

impl SlidingAnovaResult {
    /// Bin index with the largest F.
    pub fn peak_bin(&self) -> Option<usize> {
        self.bins
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.stat.f.total_cmp(&b.1.stat.f))
            .map(|(i, _)| i)
    }
}

/// RM-ANOVA in every bin of `table[participant][condition][bin]`,
/// Bonferroni-adjusted across bins.
pub fn sliding_rm_anova(
    channel: &str,
    table: &[Vec<Vec<f64>>],
    bins: &BinSpec,
) -> Result<SlidingAnovaResult> {
    bins.validate()?;
    let nb = bins.count();
    if let Some(r) = table.iter().flatten().find(|r| r.len() != nb) {
        return Err(Error::Dimension {
            expected: nb,
            actual: r.len(),
        });
    }
    let stats = (0..nb)
        .map(|b| {
            let slice: Vec<Vec<f64>> = table
                .iter()
                .map(|p| p.iter().map(|c| c[b]).collect())
                .collect();
            rm_anova(&slice)
        })
        .collect::<Result<Vec<_>>>()?;
    let adjusted = bonferroni(&stats.iter().map(|s| s.p).collect::<Vec<_>>());
    Ok(SlidingAnovaResult {
        channel: channel.to_string(),
        n_participants: table.len(),
        bins: bins
            .centers_ms()
            .into_iter()
            .zip(stats)
            .zip(adjusted)
            .map(|((center_ms, stat), p_adjusted)| AnovaBin {
                center_ms,
                stat,
                p_adjusted,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p: f64,
}

/// Two-sided p of Student's t.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

/// Paired t-test of `a - b`.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return invalid("paired t-test needs at least two pairs");
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return invalid("paired t-test input contains non-finite values");
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, df, p: 1.0 }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                df,
                p: f64::MIN_POSITIVE,
            }
        });
    }
    let t = mean / (var / n as f64).sqrt();
    Ok(TTest {
        t,
        df,
        p: t_two_sided_p(t, df as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseT {
    pub a: String,
    pub b: String,
    #[serde(flatten)]
    pub test: TTest,
    pub p_adjusted: f64,
}

/// Paired t-tests between every pair of conditions in one bin,
/// Bonferroni-adjusted across pairs.
pub fn post_hoc(
    conditions: &[ConditionSpec],
    table: &[Vec<Vec<f64>>],
    bin: usize,
) -> Result<Vec<PairwiseT>> {
    let k = conditions.len();
    let mut out = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let a: Vec<f64> = table.iter().map(|p| p[i][bin]).collect();
            let b: Vec<f64> = table.iter().map(|p| p[j][bin]).collect();
            out.push(PairwiseT {
                a: conditions[i].name.clone(),
                b: conditions[j].name.clone(),
                test: paired_t(&a, &b)?,
                p_adjusted: 0.0,
            });
        }
    }
    let adj = bonferroni(&out.iter().map(|r| r.test.p).collect::<Vec<_>>());
    for (r, p) in out.iter_mut().zip(adj) {
        r.p_adjusted = p;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`
    pub w: f64,
    pub n: usize,
    pub p: f64,
    pub method: WilcoxonMethod,
}

/// Largest sample size evaluated with the exact null distribution.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

/// Signed-rank test, exact up to [`WILCOXON_EXACT_MAX_N`] nonzero deltas.
pub fn wilcoxon_signed_rank(deltas: &[f64]) -> Result<WilcoxonResult> {
    let n = deltas.iter().filter(|d| **d != 0.0).count();
    let method = if n <= WILCOXON_EXACT_MAX_N {
        WilcoxonMethod::Exact
    } else {
        WilcoxonMethod::Normal
    };
    wilcoxon_signed_rank_with(deltas, method)
}

pub fn wilcoxon_signed_rank_with(deltas: &[f64], method: WilcoxonMethod) -> Result<WilcoxonResult> {
    if deltas.iter().any(|d| !d.is_finite()) {
        return invalid("signed-rank input contains non-finite values");
    }
    let nz: Vec<f64> = deltas.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return invalid("all deltas are zero");
    }
    if n < 5 {
        return invalid(format!("signed-rank test needs at least 5 nonzero deltas, got {n}"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| nz[a].abs().total_cmp(&nz[b].abs()));
    // doubled midranks
    let mut rank2 = vec![0u64; n];
    let mut ties = Vec::new();
    let mut s = 0;
    while s < n {
        let mut e = s + 1;
        while e < n && nz[order[e]].abs() == nz[order[s]].abs() {
            e += 1;
        }
        for &j in &order[s..e] {
            rank2[j] = (s + 1 + e) as u64;
        }
        ties.push(e - s);
        s = e;
    }
    let w_plus2: u64 = (0..n).filter(|&i| nz[i] > 0.0).map(|i| rank2[i]).sum();
    let total2: u64 = rank2.iter().sum();
    let w2 = w_plus2.min(total2 - w_plus2);
    let w = w2 as f64 / 2.0;
    let p = match method {
        WilcoxonMethod::Exact => {
            // counts[s] = sign patterns whose doubled positive-rank sum is s
            let mut counts = vec![0.0f64; total2 as usize + 1];
            counts[0] = 1.0;
            let mut reach = 0usize;
            for &r in &rank2 {
                let r = r as usize;
                for s in (0..=reach).rev() {
                    let c = counts[s];
                    if c != 0.0 {
                        counts[s + r] += c;
                    }
                }
                reach += r;
            }
            let tail: f64 = counts[..=w2 as usize].iter().sum();
            (2.0 * tail / 2f64.powi(n as i32)).min(1.0)
        }
        WilcoxonMethod::Normal => {
            let nf = n as f64;
            let mean = nf * (nf + 1.0) / 4.0;
            let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
            let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
            let z = ((w - mean + 0.5) / var.sqrt()).min(0.0);
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            (2.0 * normal.cdf(z)).min(1.0)
        }
    };
    Ok(WilcoxonResult { w, n, p, method })
}

pub fn write_curves_csv(path: impl AsRef<Path>, curves: &[ErpCurve]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["channel", "condition", "t_ms", "uv"])?;
    for c in curves {
        for (t, v) in c.time_ms.iter().zip(&c.mean_uv) {
            w.write_record([c.channel.clone(), c.condition.clone(), format!("{t:?}"), format!("{v:?}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line plot of every curve of `channel`.
pub fn curves_svg(channel: &str, curves: &[ErpCurve]) -> String {
    let (w, h, m) = (640.0, 360.0, 48.0);
    let sel: Vec<&ErpCurve> = curves.iter().filter(|c| c.channel == channel).collect();
    let t0 = sel.iter().flat_map(|c| c.time_ms.first()).copied().fold(f64::INFINITY, f64::min);
    let t1 = sel.iter().flat_map(|c| c.time_ms.last()).copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = sel.iter().flat_map(|c| c.mean_uv.iter()).copied().fold(f64::INFINITY, f64::min);
    let mut hi = sel.iter().flat_map(|c| c.mean_uv.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) || hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let (t0, t1) = if t1 > t0 { (t0, t1) } else { (0.0, 1.0) };
    let sx = |t: f64| m + (t - t0) / (t1 - t0) * (w - 2.0 * m);
    let sy = |v: f64| h - m - (v - lo) / (hi - lo) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{channel}</text>"#,
        w / 2.0
    );
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="{m}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#999" stroke-width="0.5"/>"##,
            w - m,
            y = sy(0.0)
        );
    }
    if t0 < 0.0 && t1 > 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{m}" x2="{x:.2}" y2="{}" stroke="#999" stroke-width="0.5"/>"##,
            h - m,
            x = sx(0.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{m}" y="{}" font-family="sans-serif" font-size="10">{t0:.0} ms</text>"#,
        h - m / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{t1:.0} ms</text>"#,
        w - m,
        h - m / 2.0
    );
    let _ = writeln!(s, r#"<text x="4" y="{m}" font-family="sans-serif" font-size="10">{hi:.2} uV</text>"#);
    let _ = writeln!(s, r#"<text x="4" y="{}" font-family="sans-serif" font-size="10">{lo:.2} uV</text>"#, h - m);
    for (k, c) in sel.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = c
            .time_ms
            .iter()
            .zip(&c.mean_uv)
            .map(|(t, v)| format!("{:.2},{:.2}", sx(*t), sy(*v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{colour}">{}</text>"#,
            w - m + 4.0,
            m + 14.0 * k as f64,
            c.condition
        );
    }
    s.push_str("</svg>\n");
    s
}
