//! Experiment tables in the layout of the pipe-flow benchmarks.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub alpha: f64,
    pub tau0: f64,
    pub nodes: usize,
    /// Relative error against the closed-form pipe solution, if defined.
    pub error_trs: Option<f64>,
    pub error_alg2: Option<f64>,
    /// `max |y|` of the TRS velocity.
    pub max_velocity: f64,
    pub iterations_trs: Option<usize>,
    pub iterations_alg2: Option<usize>,
    pub kkt_trs: Option<f64>,
    pub kkt_alg2: Option<f64>,
    pub cpu_time_trs: Option<f64>,
    pub cpu_time_alg2: Option<f64>,
    pub failed: bool,
}

impl Row {
    pub fn speedup(&self) -> Option<f64> {
        match (self.cpu_time_trs, self.cpu_time_alg2) {
            (Some(t), Some(a)) if t > 0.0 => Some(a / t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentTable {
    pub rows: Vec<Row>,
}

const HEADER: [&str; 14] = [
    "alpha",
    "tau0",
    "nodes",
    "error_trs",
    "error_alg2",
    "max_velocity",
    "iterations_trs",
    "iterations_alg2",
    "kkt_trs",
    "kkt_alg2",
    "cpu_time_trs",
    "cpu_time_alg2",
    "speedup",
    "status",
];

fn sci(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.2e}"))
}

fn secs(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.3}"))
}

fn count(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| v.to_string())
}

impl ExperimentTable {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.failed)
    }

    fn cells(&self) -> Vec<[String; 14]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    r.alpha.to_string(),
                    r.tau0.to_string(),
                    r.nodes.to_string(),
                    sci(r.error_trs),
                    sci(r.error_alg2),
                    sci(Some(r.max_velocity)),
                    count(r.iterations_trs),
                    count(r.iterations_alg2),
                    sci(r.kkt_trs),
                    sci(r.kkt_alg2),
                    secs(r.cpu_time_trs),
                    secs(r.cpu_time_alg2),
                    r.speedup()
                        .map_or_else(|| "-".to_owned(), |s| format!("{s:.1}")),
                    if r.failed { "FAILED" } else { "ok" }.to_owned(),
                ]
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = HEADER.join(",");
        out.push('\n');
        for row in self.cells() {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Right-aligned columns for the terminal.
    pub fn to_text(&self) -> String {
        let cells = self.cells();
        let mut widths = HEADER.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let mut line = |fields: &[&str]| {
            let padded: Vec<String> = fields
                .iter()
                .zip(&widths)
                .map(|(f, w)| format!("{f:>w$}"))
                .collect();
            writeln!(out, "{}", padded.join("  ")).unwrap();
        };
        line(&HEADER);
        for row in &cells {
            let refs: Vec<&str> = row.iter().map(String::as_str).collect();
            line(&refs);
        }
        out
    }
}
