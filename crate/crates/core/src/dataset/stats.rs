use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::DatasetRecord;

pub const TABLE_COLUMNS: [&str; 9] = [
    "Repo",
    "Total # variants",
    "# Fix patches",
    "# Lines edited",
    "# Diff hunk",
    "# Files edited",
    "# Fail tests",
    "Test log length",
    "# Steps per traj",
];

/// Counts are totals, fail tests and log length are medians over distinct
/// variants, everything else is a mean over records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub repo: String,
    pub total_variants: usize,
    pub fix_patches: usize,
    pub mean_lines_edited: f64,
    pub mean_diff_hunks: f64,
    pub mean_files_edited: f64,
    pub median_fail_tests: usize,
    pub median_log_tokens: usize,
    /// Mean over records that carry a trajectory; `None` when none do.
    pub mean_steps_per_traj: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub rows: Vec<StatsRow>,
    pub summary: StatsRow,
}

/// Lower of the two middle values for even counts; 0 for no values.
pub fn lower_median(values: &mut [usize]) -> usize {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

fn mean(sum: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

fn row(repo: &str, records: &[&DatasetRecord]) -> StatsRow {
    let mut per_variant: BTreeMap<&str, &DatasetRecord> = BTreeMap::new();
    for r in records {
        per_variant.entry(&r.variant_id).or_insert(r);
    }
    let n = records.len();
    let sum = |f: fn(&DatasetRecord) -> usize| records.iter().map(|r| f(r)).sum::<usize>();
    let mut fail: Vec<usize> = per_variant.values().map(|r| r.failing_tests.len()).collect();
    let mut logs: Vec<usize> = per_variant.values().map(|r| r.error_log_tokens).collect();
    let steps: Vec<usize> = records.iter().filter_map(|r| r.trajectory.as_ref()).map(|t| t.steps.len()).collect();
    StatsRow {
        repo: repo.to_string(),
        total_variants: per_variant.len(),
        fix_patches: n,
        mean_lines_edited: mean(sum(|r| r.fix_patch.stats.lines_edited), n),
        mean_diff_hunks: mean(sum(|r| r.fix_patch.stats.hunks), n),
        mean_files_edited: mean(sum(|r| r.fix_patch.stats.files_edited), n),
        median_fail_tests: lower_median(&mut fail),
        median_log_tokens: lower_median(&mut logs),
        mean_steps_per_traj: (!steps.is_empty()).then(|| mean(steps.iter().sum(), steps.len())),
    }
}

pub fn compute_statistics(records: &[DatasetRecord]) -> StatsReport {
    let mut by_repo: BTreeMap<&str, Vec<&DatasetRecord>> = BTreeMap::new();
    for r in records {
        by_repo.entry(&r.repo).or_default().push(r);
    }
    let all: Vec<&DatasetRecord> = records.iter().collect();
    StatsReport {
        rows: by_repo.iter().map(|(repo, rs)| row(repo, rs)).collect(),
        summary: row("Total", &all),
    }
}

impl StatsReport {
    fn cells(r: &StatsRow) -> [String; 9] {
        [
            r.repo.clone(),
            r.total_variants.to_string(),
            r.fix_patches.to_string(),
            format!("{:.2}", r.mean_lines_edited),
            format!("{:.2}", r.mean_diff_hunks),
            format!("{:.2}", r.mean_files_edited),
            r.median_fail_tests.to_string(),
            r.median_log_tokens.to_string(),
            r.mean_steps_per_traj.map_or_else(|| "-".to_string(), |s| format!("{s:.2}")),
        ]
    }

    /// Aligned text table; the first column is left-aligned, numbers right.
    pub fn to_table(&self) -> String {
        let mut lines: Vec<[String; 9]> = vec![TABLE_COLUMNS.map(str::to_string)];
        lines.extend(self.rows.iter().map(Self::cells));
        lines.push(Self::cells(&self.summary));
        let widths: Vec<usize> = (0..9).map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (n, l) in lines.iter().enumerate() {
            if n == 1 || n == lines.len() - 1 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                let _ = writeln!(out, "{}", rule.join("  "));
            }
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}
