use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};

use super::config::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReportFormat {
    #[default]
    #[serde(rename = "table")]
    HumanTable,
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "jsonl")]
    JsonLines,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::HumanTable),
            "csv" => Ok(ReportFormat::Csv),
            "jsonl" => Ok(ReportFormat::JsonLines),
            other => Err(Error::Config(format!(
                "unknown report format {other:?} (expected table, csv or jsonl)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub index: usize,
    pub seed: u64,
    pub mwd: f64,
    pub mae: f64,
    /// Wall-clock seconds of the fit: clustering or kernel build plus solve.
    pub seconds: f64,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: Method,
    pub n: usize,
    /// Target noise of a synthetic source; `None` for file data.
    pub sigma_eps: Option<f64>,
    pub delta: f64,
    pub master_seed: u64,
    /// The resolved configuration as TOML.
    pub config: String,
    pub records: Vec<RepetitionRecord>,
}

impl RunReport {
    pub fn mwd(&self) -> Summary {
        Summary::of(&self.records.iter().map(|r| r.mwd).collect::<Vec<_>>())
    }

    pub fn mae(&self) -> Summary {
        Summary::of(&self.records.iter().map(|r| r.mae).collect::<Vec<_>>())
    }

    pub fn seconds(&self) -> Summary {
        Summary::of(&self.records.iter().map(|r| r.seconds).collect::<Vec<_>>())
    }

    /// Same report without wall-clock values, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for rec in &mut r.records {
            rec.seconds = 0.0;
        }
        r
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        write_table(self, &mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

pub fn emit_report<W: Write>(report: &RunReport, format: ReportFormat, writer: &mut W) -> Result<()> {
    if report.records.is_empty() {
        return Err(Error::Report("report has no repetitions; nothing to emit".into()));
    }
    match format {
        ReportFormat::HumanTable => write_table(report, writer)?,
        ReportFormat::Csv => write_csv(report, writer)?,
        ReportFormat::JsonLines => write_jsonl(report, writer)?,
    }
    writer.flush()?;
    Ok(())
}

fn sigma_text(s: Option<f64>) -> String {
    s.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn write_table<W: Write>(r: &RunReport, w: &mut W) -> std::io::Result<()> {
    writeln!(
        w,
        "{:<14} {:>8} {:>10} {:>7} {:>5} {:>12} {:>12} {:>11}",
        "method", "n", "sigma_eps", "delta", "rep", "MWD", "MAE", "time (sec)"
    )?;
    let prefix = format!(
        "{:<14} {:>8} {:>10} {:>7}",
        r.method.as_str(),
        r.n,
        sigma_text(r.sigma_eps),
        r.delta
    );
    for rec in &r.records {
        writeln!(
            w,
            "{prefix} {:>5} {:>12.6} {:>12.6} {:>11.3}",
            rec.index, rec.mwd, rec.mae, rec.seconds
        )?;
    }
    let (mwd, mae, secs) = (r.mwd(), r.mae(), r.seconds());
    writeln!(
        w,
        "{prefix} {:>5} {:>12.6} {:>12.6} {:>11.3}   (std {:.6} / {:.6} / {:.3}, {} reps)",
        "mean",
        mwd.mean,
        mae.mean,
        secs.mean,
        mwd.std,
        mae.std,
        secs.std,
        r.records.len()
    )
}

const CONFIG_PREFIX: &str = "# config | ";
const CSV_HEADER: &str = "repetition,seed,mwd,mae,seconds";

fn write_csv<W: Write>(r: &RunReport, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "# method = {}", r.method)?;
    writeln!(w, "# n = {}", r.n)?;
    writeln!(w, "# sigma_eps = {}", sigma_text(r.sigma_eps))?;
    writeln!(w, "# delta = {}", r.delta)?;
    writeln!(w, "# master_seed = {}", r.master_seed)?;
    for line in r.config.lines() {
        writeln!(w, "{CONFIG_PREFIX}{line}")?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    for rec in &r.records {
        writeln!(w, "{},{},{},{},{}", rec.index, rec.seed, rec.mwd, rec.mae, rec.seconds)?;
    }
    let (mwd, mae, secs) = (r.mwd(), r.mae(), r.seconds());
    writeln!(w, "mean,,{},{},{}", mwd.mean, mae.mean, secs.mean)?;
    writeln!(w, "std,,{},{},{}", mwd.std, mae.std, secs.std)
}

fn write_jsonl<W: Write>(r: &RunReport, w: &mut W) -> std::io::Result<()> {
    let header = json!({
        "type": "config",
        "method": r.method,
        "n": r.n,
        "sigma_eps": r.sigma_eps,
        "delta": r.delta,
        "master_seed": r.master_seed,
        "config": r.config,
    });
    writeln!(w, "{header}")?;
    for rec in &r.records {
        let mut line = serde_json::to_value(rec).expect("plain record");
        line["type"] = json!("repetition");
        writeln!(w, "{line}")?;
    }
    let aggregate = json!({
        "type": "aggregate",
        "repetitions": r.records.len(),
        "mwd": r.mwd(),
        "mae": r.mae(),
        "seconds": r.seconds(),
    });
    writeln!(w, "{aggregate}")
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Report(format!("line {line}: {}", message.into()))
}

fn parse_num<T: FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what} value {s:?}")))
}

/// Reads a report written in the CSV format. Aggregate rows are checked
/// against the repetition rows.
pub fn parse_report_csv<R: BufRead>(reader: R) -> Result<RunReport> {
    let mut method = None;
    let mut n = None;
    let mut sigma_eps = None;
    let mut delta = None;
    let mut master_seed = None;
    let mut config = String::new();
    let mut records = Vec::new();
    let mut aggregates = Vec::new();
    let mut seen_header = false;

    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        if let Some(rest) = line.strip_prefix(CONFIG_PREFIX) {
            config.push_str(rest);
            config.push('\n');
        } else if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) = rest
                .split_once(" = ")
                .ok_or_else(|| parse_err(lineno, "malformed metadata line"))?;
            match key {
                "method" => method = Some(value.parse::<Method>()?),
                "n" => n = Some(parse_num(value, lineno, "n")?),
                "sigma_eps" => {
                    sigma_eps = Some(if value == "-" {
                        None
                    } else {
                        Some(parse_num(value, lineno, "sigma_eps")?)
                    })
                }
                "delta" => delta = Some(parse_num(value, lineno, "delta")?),
                "master_seed" => master_seed = Some(parse_num(value, lineno, "master_seed")?),
                other => return Err(parse_err(lineno, format!("unknown metadata key {other:?}"))),
            }
        } else if line == CSV_HEADER {
            seen_header = true;
        } else if !line.is_empty() {
            if !seen_header {
                return Err(parse_err(lineno, "data row before header"));
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(parse_err(lineno, format!("expected 5 fields, found {}", fields.len())));
            }
            match fields[0] {
                "mean" | "std" => {
                    let vals = (2..5)
                        .map(|c| parse_num::<f64>(fields[c], lineno, fields[0]))
                        .collect::<Result<Vec<_>>>()?;
                    aggregates.push((fields[0].to_string(), vals, lineno));
                }
                idx => records.push(RepetitionRecord {
                    index: parse_num(idx, lineno, "repetition")?,
                    seed: parse_num(fields[1], lineno, "seed")?,
                    mwd: parse_num(fields[2], lineno, "mwd")?,
                    mae: parse_num(fields[3], lineno, "mae")?,
                    seconds: parse_num(fields[4], lineno, "seconds")?,
                }),
            }
        }
    }
    let missing = |what: &str| Error::Report(format!("missing {what} metadata"));
    let report = RunReport {
        method: method.ok_or_else(|| missing("method"))?,
        n: n.ok_or_else(|| missing("n"))?,
        sigma_eps: sigma_eps.ok_or_else(|| missing("sigma_eps"))?,
        delta: delta.ok_or_else(|| missing("delta"))?,
        master_seed: master_seed.ok_or_else(|| missing("master_seed"))?,
        config,
        records,
    };
    for (kind, vals, lineno) in aggregates {
        let want = [report.mwd(), report.mae(), report.seconds()];
        for (got, s) in vals.iter().zip(want) {
            let expect = if kind == "mean" { s.mean } else { s.std };
            if (got - expect).abs() > 1e-9 * (1.0 + expect.abs()) {
                return Err(parse_err(lineno, format!("{kind} row disagrees with repetition rows")));
            }
        }
    }
    Ok(report)
}
