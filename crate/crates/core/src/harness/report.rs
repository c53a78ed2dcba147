//! Aggregation of error reports into one table.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{method_label, ErrorReport};

fn time_key(t: Option<f64>) -> i64 {
    t.map_or(-1, |t| (t * 1e6).round() as i64)
}

/// Markdown table with one row per (problem, method, ε) and one column per
/// (quantity, time), `T_e` first, then time-ordered profiles.
pub fn report_table(reports: &[ErrorReport]) -> String {
    let rows: Vec<_> = reports.iter().flat_map(|r| r.rows.iter()).collect();
    let mut cols: BTreeSet<(u8, String, i64)> = BTreeSet::new();
    let mut keys: Vec<(String, &'static str, String)> = Vec::new();
    for r in &rows {
        let order = match r.quantity.as_str() {
            "T_e" => 0,
            "rho" => 1,
            "T" => 2,
            _ => 3,
        };
        cols.insert((order, r.quantity.clone(), time_key(r.time)));
        let key = (r.problem.name().to_string(), method_label(r.method), format!("{:e}", r.epsilon));
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let cols: Vec<_> = cols.into_iter().collect();
    let mut s = String::from("| problem | method | epsilon |");
    for (_, q, t) in &cols {
        if *t < 0 {
            let _ = write!(s, " {q} |");
        } else {
            let _ = write!(s, " {q} (t={}) |", *t as f64 / 1e6);
        }
    }
    s.push('\n');
    s.push_str(&"|---".repeat(3 + cols.len()));
    s.push_str("|\n");
    for (p, m, e) in &keys {
        let _ = write!(s, "| {p} | {m} | {e} |");
        for (_, q, t) in &cols {
            let v = rows.iter().find(|r| {
                r.problem.name() == p
                    && method_label(r.method) == *m
                    && format!("{:e}", r.epsilon) == *e
                    && &r.quantity == q
                    && time_key(r.time) == *t
            });
            match v {
                Some(r) => {
                    let _ = write!(s, " {:.2e} |", r.error);
                }
                None => s.push_str(" - |"),
            }
        }
        s.push('\n');
    }
    s
}
