//! Text, JSON and CSV renderings of reports.

use std::fmt::Write as _;

use serde::Serialize;

use crate::attack_sim::SimulationSummary;
use crate::error::{Error, Result};
use crate::risk::{RiskReport, ThetaEstimate};

/// Shown in place of an unreliable θ.
pub const UNRELIABLE: &str = "\u{2212}";

const LISTWISE_HEADER: [&str; 9] = [
    "Quasi-Identifier",
    "n_deleted",
    "n",
    "k = 1",
    "k \u{2264} 5",
    "k \u{2264} 10",
    "Pr(SU)_new",
    "Pr(SU)_full",
    "\u{3b8}",
];

const MATCH_HEADER: [&str; 6] = [
    "Quasi-identifier",
    "n_match = 1",
    "n_match \u{2264} 5",
    "n_match \u{2264} 10",
    "Pr(SU)",
    "\u{3b8}",
];

pub fn proportion(p: f64) -> String {
    format!("{p:.4}")
}

pub fn theta_cell(t: &ThetaEstimate) -> String {
    match t.value {
        Some(v) if t.reliable => format!("{v:.4}"),
        _ => UNRELIABLE.to_owned(),
    }
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let width = |s: &str| s.chars().count();
    let mut widths: Vec<usize> = header.iter().map(|h| width(h)).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(width(cell));
        }
    }
    let line = |cells: Vec<&str>| {
        let mut out = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            let pad = w - width(cell);
            if i == 0 {
                out.push_str(cell);
                out.push_str(&" ".repeat(pad));
            } else {
                out.push_str("  ");
                out.push_str(&" ".repeat(pad));
                out.push_str(cell);
            }
        }
        out.push('\n');
        out
    };
    let mut out = line(header.to_vec());
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

pub fn report_text(report: &RiskReport) -> String {
    let mut out = String::new();
    let meta = &report.metadata;
    let _ = writeln!(
        out,
        "n_full = {}, N = {}, require_observed_overlap = {}",
        meta.n_full, meta.population_size, meta.require_observed_overlap
    );
    let listwise: Vec<Vec<String>> = report
        .listwise()
        .map(|r| {
            vec![
                r.quasi_identifier.clone(),
                r.n_deleted.to_string(),
                r.n.to_string(),
                r.k_eq_1.to_string(),
                r.k_le_5.to_string(),
                r.k_le_10.to_string(),
                proportion(r.pr_su_new),
                proportion(r.pr_su_full),
                theta_cell(&r.theta),
            ]
        })
        .collect();
    if !listwise.is_empty() {
        out.push_str("\nListwise deletion\n");
        out.push_str(&table(&LISTWISE_HEADER, &listwise));
    }
    let matches: Vec<Vec<String>> = report
        .n_match()
        .map(|r| {
            vec![
                r.quasi_identifier.clone(),
                r.n_match_eq_1.to_string(),
                r.n_match_le_5.to_string(),
                r.n_match_le_10.to_string(),
                proportion(r.pr_su),
                theta_cell(&r.theta),
            ]
        })
        .collect();
    if !matches.is_empty() {
        out.push_str("\nNumber of matches\n");
        out.push_str(&table(&MATCH_HEADER, &matches));
    }
    out
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        context: "serializing output".into(),
        source: e,
    })?;
    s.push('\n');
    Ok(s)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn report_csv(report: &RiskReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "method",
        "quasi_identifier",
        "n_deleted",
        "n",
        "count_eq_1",
        "count_le_5",
        "count_le_10",
        "pr_su_new",
        "pr_su_full",
        "pr_su",
        "theta",
        "theta_reliable",
    ];
    let err = |e| Error::csv("rendering report", e);
    w.write_record(header).map_err(err)?;
    for r in report.listwise() {
        w.write_record([
            "listwise".to_owned(),
            r.quasi_identifier.clone(),
            r.n_deleted.to_string(),
            r.n.to_string(),
            r.k_eq_1.to_string(),
            r.k_le_5.to_string(),
            r.k_le_10.to_string(),
            r.pr_su_new.to_string(),
            r.pr_su_full.to_string(),
            String::new(),
            opt(r.theta.value),
            r.theta.reliable.to_string(),
        ])
        .map_err(err)?;
    }
    for r in report.n_match() {
        w.write_record([
            "n_match".to_owned(),
            r.quasi_identifier.clone(),
            String::new(),
            r.n.to_string(),
            r.n_match_eq_1.to_string(),
            r.n_match_le_5.to_string(),
            r.n_match_le_10.to_string(),
            String::new(),
            String::new(),
            r.pr_su.to_string(),
            opt(r.theta.value),
            r.theta.reliable.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn simulation_text(summary: &SimulationSummary) -> String {
    let mut out = String::new();
    let fmt = |v: Option<f64>| {
        v.map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| UNRELIABLE.to_owned())
    };
    let rows: Vec<Vec<String>> = summary
        .replicates
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                i.to_string(),
                r.sample_size.to_string(),
                r.draws.to_string(),
                r.unique_matches.to_string(),
                r.correct_unique_matches.to_string(),
                fmt(r.empirical_theta),
                fmt(r.predicted_theta.value),
            ]
        })
        .collect();
    out.push_str(&table(
        &[
            "replicate",
            "n",
            "draws",
            "unique",
            "correct",
            "empirical \u{3b8}",
            "predicted \u{3b8}",
        ],
        &rows,
    ));
    let _ = writeln!(
        out,
        "\npooled empirical \u{3b8} = {}, mean predicted \u{3b8} = {}, within tolerance: {}",
        fmt(summary.pooled_empirical_theta),
        fmt(summary.mean_predicted_theta),
        summary
            .within_tolerance
            .map(|b| if b { "yes" } else { "no" })
            .unwrap_or("n/a")
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_cells() {
        let mut t = ThetaEstimate {
            value: Some(0.00099987),
            n1: 3,
            n2: 1.0,
            pi: 0.5,
            reliable: true,
        };
        assert_eq!(theta_cell(&t), "0.0010");
        t.reliable = false;
        assert_eq!(theta_cell(&t), "\u{2212}");
    }

    #[test]
    fn table_alignment() {
        let t = table(&["a", "\u{3b8}"], &[vec!["long name".into(), "1".into()]]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "a          \u{3b8}");
        assert_eq!(lines[2], "long name  1");
    }
}
