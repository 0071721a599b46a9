//! Long-format CSV: one row per (scope, variant, metric).
//!
//! Scope `all` rows aggregate across rounds (count = rounds); other rows
//! describe a single trial or held-out token (count = test samples).

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use super::{mean, sd, EvalError, Metric, Report};

pub const CSV_HEADER: &str = "protocol,scope,variant,metric,mean,sd,count,flags";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub protocol: String,
    pub scope: String,
    pub variant: String,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
    pub flags: String,
}

impl Report {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut out = Vec::new();
        let protocol = self.protocol.as_str().to_string();
        for &v in &self.variants {
            for m in Metric::ALL {
                let (mu, s, n) = self.aggregate(v, m);
                let skipped = self.rounds.iter().filter(|r| r.variant == v && r.scores.is_empty()).count();
                out.push(ReportRow {
                    protocol: protocol.clone(),
                    scope: "all".into(),
                    variant: v.as_str().into(),
                    metric: m.as_str().into(),
                    mean: mu,
                    sd: s,
                    count: n,
                    flags: if skipped > 0 { format!("skipped={skipped}") } else { String::new() },
                });
            }
            for r in self.rounds.iter().filter(|r| r.variant == v) {
                for m in Metric::ALL {
                    let values = r.scores.values(m);
                    out.push(ReportRow {
                        protocol: protocol.clone(),
                        scope: r.scope.clone(),
                        variant: v.as_str().into(),
                        metric: m.as_str().into(),
                        mean: mean(values),
                        sd: sd(values),
                        count: values.len(),
                        flags: r.flags.join(";"),
                    });
                }
            }
        }
        out
    }
}

pub fn write_report_csv(report: &Report, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in report.rows() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.protocol, r.scope, r.variant, r.metric, r.mean, r.sd, r.count, r.flags
        )?;
    }
    w.flush()
}

pub fn emit_report(report: &Report, path: impl AsRef<Path>) -> Result<(), EvalError> {
    let path = path.as_ref();
    let io = |source| EvalError::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io)?;
    write_report_csv(report, BufWriter::new(file)).map_err(io)
}

pub fn parse_report_csv(r: impl BufRead) -> Result<Vec<ReportRow>, EvalError> {
    let mut lines = r.lines();
    let bad = |line: usize, reason: String| EvalError::MalformedReport { line, reason };
    let io = |source| EvalError::Io { path: String::new(), source };
    let header = lines.next().transpose().map_err(io)?;
    if header.as_deref() != Some(CSV_HEADER) {
        return Err(bad(1, "missing header".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line.map_err(io)?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(n, format!("{} fields", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(n, e.to_string()));
        out.push(ReportRow {
            protocol: f[0].into(),
            scope: f[1].into(),
            variant: f[2].into(),
            metric: f[3].into(),
            mean: num(f[4])?,
            sd: num(f[5])?,
            count: f[6].parse().map_err(|e: std::num::ParseIntError| bad(n, e.to_string()))?,
            flags: f[7].into(),
        });
    }
    Ok(out)
}
