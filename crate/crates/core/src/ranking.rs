//! Leaderboard arithmetic: per-dataset competition ranks, average rank,
//! duration tie-break and merging of parallel submission bundles.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One team's results over the configured datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionEntry {
    pub team: String,
    pub bundle: String,
    /// Mean AUC per dataset, in the leaderboard's dataset order.
    pub aucs: Vec<f64>,
    pub disqualified: Vec<bool>,
    pub duration_secs: f64,
}

impl SubmissionEntry {
    pub fn new(team: impl Into<String>, bundle: impl Into<String>, aucs: Vec<f64>, duration_secs: f64) -> Self {
        let disqualified = vec![false; aucs.len()];
        Self {
            team: team.into(),
            bundle: bundle.into(),
            aucs,
            disqualified,
            duration_secs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub position: usize,
    pub bundle: String,
    pub team: String,
    pub average_rank: f64,
    pub ranks: Vec<usize>,
    pub duration_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub datasets: Vec<String>,
    pub rows: Vec<LeaderboardRow>,
}

impl Leaderboard {
    pub fn row(&self, team: &str) -> Option<&LeaderboardRow> {
        self.rows.iter().find(|r| r.team == team)
    }

    /// Comma-separated rendering: position, bundle, team, average rank,
    /// one rank per dataset, duration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,bundle,team,avg_rank");
        for d in &self.datasets {
            out.push(',');
            out.push_str(d);
        }
        out.push_str(",duration\n");
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{:.1}", r.position, r.bundle, r.team, r.average_rank);
            for rank in &r.ranks {
                let _ = write!(out, ",{rank}");
            }
            let _ = writeln!(out, ",{:.2}", r.duration_secs);
        }
        out
    }
}

/// Competition ("1224") ranks: rank 1 is the highest AUC and equal AUCs
/// share the smallest rank.
pub fn rank_within_dataset(aucs: &[f64]) -> Vec<usize> {
    aucs.iter()
        .map(|a| 1 + aucs.iter().filter(|b| *b > a).count())
        .collect()
}

/// Like [`rank_within_dataset`], but disqualified entries rank below every
/// qualified entry, ordered among themselves by AUC.
pub fn rank_with_disqualification(aucs: &[f64], disqualified: &[bool]) -> Vec<usize> {
    let qualified = disqualified.iter().filter(|d| !**d).count();
    aucs.iter()
        .zip(disqualified)
        .map(|(a, &dq)| {
            let better = aucs
                .iter()
                .zip(disqualified)
                .filter(|(b, &bdq)| bdq == dq && *b > a)
                .count();
            if dq {
                qualified + 1 + better
            } else {
                1 + better
            }
        })
        .collect()
}

pub fn average_rank(ranks: &[usize]) -> f64 {
    ranks.iter().sum::<usize>() as f64 / ranks.len() as f64
}

fn validate(entries: &[SubmissionEntry], datasets: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for e in entries {
        if !seen.insert(e.team.as_str()) {
            return Err(Error::Ranking(format!("team `{}` appears twice", e.team)));
        }
        if e.aucs.len() != datasets.len() || e.disqualified.len() != datasets.len() {
            return Err(Error::Ranking(format!(
                "team `{}` has {} results for {} datasets",
                e.team,
                e.aucs.len(),
                datasets.len()
            )));
        }
        if e.aucs.iter().any(|a| a.is_nan()) {
            return Err(Error::Ranking(format!("team `{}` has a NaN AUC", e.team)));
        }
        if e.duration_secs.is_nan() || e.duration_secs < 0.0 {
            return Err(Error::Ranking(format!("team `{}` has negative duration", e.team)));
        }
    }
    Ok(())
}

/// Rank every dataset, then order by average rank, duration, and team id.
pub fn build_leaderboard(entries: &[SubmissionEntry], datasets: &[String]) -> Result<Leaderboard> {
    validate(entries, datasets)?;
    let mut ranks = vec![Vec::with_capacity(datasets.len()); entries.len()];
    for d in 0..datasets.len() {
        let aucs: Vec<f64> = entries.iter().map(|e| e.aucs[d]).collect();
        let dq: Vec<bool> = entries.iter().map(|e| e.disqualified[d]).collect();
        for (i, r) in rank_with_disqualification(&aucs, &dq).into_iter().enumerate() {
            ranks[i].push(r);
        }
    }

    let mut rows: Vec<LeaderboardRow> = entries
        .iter()
        .zip(ranks)
        .map(|(e, ranks)| LeaderboardRow {
            position: 0,
            bundle: e.bundle.clone(),
            team: e.team.clone(),
            average_rank: average_rank(&ranks),
            ranks,
            duration_secs: e.duration_secs,
        })
        .collect();
    rows.sort_by(compare_rows);
    for (i, row) in rows.iter_mut().enumerate() {
        row.position = i + 1;
    }
    Ok(Leaderboard {
        datasets: datasets.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapPolicy {
    /// Drop every team that submitted to more than one bundle.
    Exclude,
    /// Fail when any team appears in more than one bundle.
    Reject,
}

/// Re-rank the union of several bundles' submissions as one board.
pub fn merge_bundles(
    bundles: &[Vec<SubmissionEntry>],
    datasets: &[String],
    policy: OverlapPolicy,
) -> Result<Leaderboard> {
    let mut bundles_per_team: HashMap<&str, usize> = HashMap::new();
    for bundle in bundles {
        let teams: HashSet<&str> = bundle.iter().map(|e| e.team.as_str()).collect();
        for t in teams {
            *bundles_per_team.entry(t).or_insert(0) += 1;
        }
    }
    let overlapping: HashSet<&str> = bundles_per_team
        .into_iter()
        .filter(|(_, n)| *n > 1)
        .map(|(t, _)| t)
        .collect();
    if policy == OverlapPolicy::Reject && !overlapping.is_empty() {
        let mut teams: Vec<&str> = overlapping.into_iter().collect();
        teams.sort_unstable();
        return Err(Error::Ranking(format!(
            "teams present in several bundles: {}",
            teams.join(", ")
        )));
    }
    let merged: Vec<SubmissionEntry> = bundles
        .iter()
        .flatten()
        .filter(|e| !overlapping.contains(e.team.as_str()))
        .cloned()
        .collect();
    build_leaderboard(&merged, datasets)
}

/// Leaderboard order: average rank, then duration, then team id. Rank sums
/// are compared instead of averages since every row shares the dataset count.
pub fn compare_rows(a: &LeaderboardRow, b: &LeaderboardRow) -> Ordering {
    a.ranks
        .iter()
        .sum::<usize>()
        .cmp(&b.ranks.iter().sum::<usize>())
        .then_with(|| a.duration_secs.total_cmp(&b.duration_secs))
        .then_with(|| a.team.cmp(&b.team))
}
