//! CSV rows and the JSON summary shared by every experiment.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::eval::episode::Outcome;
use crate::eval::laps::LapReport;
use crate::eval::navigation::MatrixReport;
use crate::eval::perturb::DegradationReport;
use crate::scalar::Scalar;

pub const REPORT_FORMAT: &str = "tng-report/1";
pub const CSV_HEADER: &str = "run,src,dst,pa,distance,interventions,outcome";

fn outcome_label(o: &Outcome) -> String {
    match o {
        Outcome::Done => "done".into(),
        Outcome::Failed(r) => format!("failed:{r}"),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One run or cell as a CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RunRow<T> {
    pub run: String,
    pub src: String,
    pub dst: String,
    pub pa: Option<T>,
    pub distance: T,
    pub interventions: usize,
    pub outcome: String,
}

impl<T: Scalar> RunRow<T> {
    pub fn from_lap(run: impl Into<String>, r: &LapReport<T>) -> Self {
        Self {
            run: run.into(),
            src: r.trajectory.to_string(),
            dst: r.trajectory.to_string(),
            pa: Some(r.pa),
            distance: r.log.distance,
            interventions: r.log.interventions.len(),
            outcome: outcome_label(&r.log.outcome),
        }
    }

    fn csv_line(&self) -> String {
        let pa = self.pa.map(|p| format!("{p:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{:.6},{},{}",
            csv_field(&self.run),
            csv_field(&self.src),
            csv_field(&self.dst),
            pa,
            self.distance,
            self.interventions,
            csv_field(&self.outcome)
        )
    }
}

pub fn matrix_rows<T: Scalar>(m: &MatrixReport<T>) -> Vec<RunRow<T>> {
    m.cells
        .iter()
        .map(|c| RunRow {
            run: "navigate".into(),
            src: c.src.to_string(),
            dst: c.dst.to_string(),
            pa: c.pa,
            distance: c.distance,
            interventions: c.interventions,
            outcome: match &c.flag {
                Some(f) => format!("flagged:{f}"),
                None => outcome_label(&c.outcome),
            },
        })
        .collect()
}

pub fn to_csv<T: Scalar>(rows: &[RunRow<T>]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Lap PA per controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LapSummary<T> {
    pub controller: String,
    pub trajectory: u32,
    pub laps_completed: usize,
    pub pa: T,
    pub interventions: usize,
}

/// Source by destination PA and distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MatrixSummary<T> {
    pub size: usize,
    pub pa: Vec<Vec<Option<T>>>,
    pub distance: Vec<Vec<Option<T>>>,
    pub mean_pa: T,
    pub total_distance: T,
    pub done: usize,
    pub flagged: Vec<[usize; 2]>,
}

impl<T: Scalar> From<&MatrixReport<T>> for MatrixSummary<T> {
    fn from(m: &MatrixReport<T>) -> Self {
        Self {
            size: m.size,
            pa: m.pa.clone(),
            distance: m.distance.clone(),
            mean_pa: m.mean_pa,
            total_distance: m.total_distance,
            done: m.done,
            flagged: m
                .cells
                .iter()
                .filter(|c| c.flag.is_some())
                .map(|c| [c.src, c.dst])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Report<T> {
    pub format: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub laps: Vec<LapSummary<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSummary<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation: Option<DegradationReport<T>>,
}

impl<T: Scalar> Report<T> {
    pub fn new(seed: u64) -> Self {
        Self {
            format: REPORT_FORMAT.into(),
            seed,
            laps: Vec::new(),
            matrix: None,
            degradation: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| TngError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if r.format != REPORT_FORMAT {
            return Err(TngError::Parse {
                location: "field `format`".into(),
                message: format!("expected \"{REPORT_FORMAT}\", found \"{}\"", r.format),
            });
        }
        Ok(r)
    }

    /// Merges the sections present in `other`; later sections win.
    pub fn merge(&mut self, other: Report<T>) {
        self.laps.extend(other.laps);
        if other.matrix.is_some() {
            self.matrix = other.matrix;
        }
        if other.degradation.is_some() {
            self.degradation = other.degradation;
        }
    }

    /// Plain-text tables.
    pub fn render(&self) -> String {
        let mut s = String::new();
        if !self.laps.is_empty() {
            let _ = writeln!(s, "laps");
            let _ = writeln!(
                s,
                "  {:<14} {:>5} {:>6} {:>8} {:>6}",
                "controller", "traj", "laps", "PA", "ints"
            );
            for l in &self.laps {
                let _ = writeln!(
                    s,
                    "  {:<14} {:>5} {:>6} {:>8.2} {:>6}",
                    l.controller, l.trajectory, l.laps_completed, l.pa, l.interventions
                );
            }
        }
        if let Some(d) = &self.degradation {
            let _ = writeln!(s, "degradation (trajectory {})", d.trajectory);
            let mut head = format!("  {:<14}", "controller");
            for m in &d.magnitudes {
                head += &format!(" {:>9}", format!("PA@{m:.2}"));
            }
            for m in d.magnitudes.iter().skip(1) {
                head += &format!(" {:>9}", format!("d@{m:.2}"));
            }
            let _ = writeln!(s, "{head}");
            for r in &d.rows {
                let mut line = format!("  {:<14}", r.controller);
                for p in &r.pa {
                    line += &format!(" {p:>9.2}");
                }
                for p in r.delta.iter().skip(1) {
                    line += &format!(" {p:>+9.2}");
                }
                let _ = writeln!(s, "{line}");
            }
        }
        if let Some(m) = &self.matrix {
            let _ = writeln!(s, "navigation PA (row = source, column = destination)");
            for row in &m.pa {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| {
                        c.map(|p| format!("{p:>7.1}"))
                            .unwrap_or_else(|| format!("{:>7}", "-"))
                    })
                    .collect();
                let _ = writeln!(s, "  {}", cells.join(" "));
            }
            let _ = writeln!(s, "navigation distance (m)");
            for row in &m.distance {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| {
                        c.map(|p| format!("{p:>7.1}"))
                            .unwrap_or_else(|| format!("{:>7}", "-"))
                    })
                    .collect();
                let _ = writeln!(s, "  {}", cells.join(" "));
            }
            let _ = writeln!(
                s,
                "  mean PA {:.2}, total distance {:.1} m, done {}/{}",
                m.mean_pa,
                m.total_distance,
                m.done,
                m.size * (m.size - 1)
            );
            if !m.flagged.is_empty() {
                let _ = writeln!(s, "  flagged cells: {:?}", m.flagged);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_awkward_fields() {
        let rows = vec![RunRow::<f64> {
            run: "a,b".into(),
            src: "0".into(),
            dst: "1".into(),
            pa: None,
            distance: 1.5,
            interventions: 2,
            outcome: "failed:say \"hi\"".into(),
        }];
        let text = to_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("\"a,b\",0,1,,1.500000,2,\"failed:say \"\"hi\"\"\"")
        );
    }

    #[test]
    fn report_round_trip_and_format_check() {
        let mut r = Report::<f64>::new(7);
        r.laps.push(LapSummary {
            controller: "regression".into(),
            trajectory: 0,
            laps_completed: 10,
            pa: 99.5,
            interventions: 1,
        });
        let back = Report::<f64>::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.render().contains("regression"));
        let bad = r.to_json().replace(REPORT_FORMAT, "tng-report/0");
        assert!(Report::<f64>::from_json(&bad).is_err());
    }
}
