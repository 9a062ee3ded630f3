use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Cells, Scoreboard};
use crate::extract::KnowledgePoint;

/// Column order of the per-point table.
const KP_COLUMNS: [KnowledgePoint; 9] = [
    KnowledgePoint::GS,
    KnowledgePoint::SC,
    KnowledgePoint::DO,
    KnowledgePoint::IO,
    KnowledgePoint::MVP,
    KnowledgePoint::ADJ,
    KnowledgePoint::ADV,
    KnowledgePoint::PPA,
    KnowledgePoint::CO,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScoreboard {
    pub label: String,
    pub scoreboard: Scoreboard,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".to_string())
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn label_width(rows: &[LabeledScoreboard]) -> usize {
    rows.iter().map(|r| r.label.len()).chain([6]).max().unwrap_or(6)
}

/// Model rows with TF, MC, FITB Acc., FITB F1 and OA columns.
pub fn main_table(rows: &[LabeledScoreboard]) -> String {
    let w = label_width(rows);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<w$}  {:>8} {:>8} {:>10} {:>10} {:>8}",
        "Model", "TF Acc.", "MC Acc.", "FITB Acc.", "FITB F1", "OA"
    );
    for r in rows {
        let c = &r.scoreboard.overall;
        let _ = writeln!(
            out,
            "{:<w$}  {:>8} {:>8} {:>10} {:>10} {:>8}",
            r.label,
            cell(c.tf_acc),
            cell(c.mc_acc),
            cell(c.fitb_acc),
            cell(c.fitb_f1),
            cell(c.oa)
        );
    }
    out
}

/// Model rows with one OA column per knowledge point and an average row.
pub fn kp_table(rows: &[LabeledScoreboard]) -> String {
    let w = label_width(rows);
    let mut out = String::new();
    let _ = write!(out, "{:<w$} ", "Model");
    for kp in KP_COLUMNS {
        let _ = write!(out, " {:>7}", kp.abbr());
    }
    out.push('\n');
    let oa = |r: &LabeledScoreboard, kp| r.scoreboard.breakdown.get(&kp).and_then(|c: &Cells| c.oa);
    for r in rows {
        let _ = write!(out, "{:<w$} ", r.label);
        for kp in KP_COLUMNS {
            let _ = write!(out, " {:>7}", cell(oa(r, kp)));
        }
        out.push('\n');
    }
    if rows.len() > 1 {
        let _ = write!(out, "{:<w$} ", "Avg.");
        for kp in KP_COLUMNS {
            let vals: Vec<f64> = rows.iter().filter_map(|r| oa(r, kp)).collect();
            let avg = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            let _ = write!(out, " {:>7}", cell(avg));
        }
        out.push('\n');
    }
    out
}

/// Long-format CSV: one line per (label, slice) with all cells.
pub fn scoreboard_csv(rows: &[LabeledScoreboard]) -> String {
    let mut out = String::from("label,kp,tf_acc,mc_acc,fitb_acc,fitb_f1,oa,n_tf,n_mc,n_fitb\n");
    for r in rows {
        let slices = std::iter::once(("ALL".to_string(), &r.scoreboard.overall))
            .chain(r.scoreboard.breakdown.iter().map(|(k, c)| (k.to_string(), c)));
        for (name, c) in slices {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                csv_escape(&r.label),
                name,
                csv_cell(c.tf_acc),
                csv_cell(c.mc_acc),
                csv_cell(c.fitb_acc),
                csv_cell(c.fitb_f1),
                csv_cell(c.oa),
                c.n.tf,
                c.n.mc,
                c.n.fitb
            );
        }
    }
    out
}

/// Wide CSV for checkpoint curves: a row per knowledge point (plus the
/// overall row), a column per label, OA values.
pub fn series_csv(rows: &[LabeledScoreboard]) -> String {
    let mut out = String::from("kp");
    for r in rows {
        out.push(',');
        out.push_str(&csv_escape(&r.label));
    }
    out.push('\n');
    out.push_str("ALL");
    for r in rows {
        let _ = write!(out, ",{}", csv_cell(r.scoreboard.overall.oa));
    }
    out.push('\n');
    for kp in KP_COLUMNS {
        out.push_str(kp.abbr());
        for r in rows {
            let _ = write!(out, ",{}", csv_cell(r.scoreboard.breakdown.get(&kp).and_then(|c| c.oa)));
        }
        out.push('\n');
    }
    out
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
