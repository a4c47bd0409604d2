//! `report.json` and `report.csv` output.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use ddbound::bounds::BoundConstants;

use crate::config::ScenarioConfig;
use crate::runner::BoundReport;

/// Contents of `report.json`. `generated_at` is the only field that differs
/// between identical runs.
#[derive(Debug, Serialize)]
pub struct ReportFile<'a> {
    pub generated_at: String,
    pub scenario: &'a ScenarioConfig,
    pub constants: &'a BoundConstants,
    pub report: &'a BoundReport,
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn report_json(
    scenario: &ScenarioConfig,
    constants: &BoundConstants,
    report: &BoundReport,
) -> String {
    let file = ReportFile {
        generated_at: timestamp(),
        scenario,
        constants,
        report,
    };
    serde_json::to_string_pretty(&file).expect("report serializes")
}

pub fn write_json(
    path: &Path,
    scenario: &ScenarioConfig,
    constants: &BoundConstants,
    report: &BoundReport,
) -> Result<()> {
    std::fs::write(path, report_json(scenario, constants, report) + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

/// Appends one row, writing the header first when the file is new or empty.
/// An existing file must carry the same header.
pub fn append_csv(path: &Path, report: &BoundReport) -> Result<()> {
    let fields = report.csv_fields();
    let header: Vec<&str> = fields.iter().map(|(k, _)| k.as_str()).collect();
    append_row(path, &header, fields.iter().map(|(_, v)| v.as_str()))
}

pub(crate) fn append_row<'a>(
    path: &Path,
    header: &[&str],
    row: impl IntoIterator<Item = &'a str>,
) -> Result<()> {
    let existing = existing_header(path)?;
    match &existing {
        Some(h) if h != header => bail!(
            "{} has a different column layout; refusing to append",
            path.display()
        ),
        _ => {}
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    if existing.is_none() {
        w.write_record(header)?;
    }
    w.write_record(row)?;
    w.flush()?;
    Ok(())
}

fn existing_header(path: &Path) -> Result<Option<Vec<String>>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e).with_context(|| format!("opening {}", path.display())),
    };
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first)?;
    if first.trim().is_empty() {
        return Ok(None);
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(first.as_bytes());
    let record = r.records().next().transpose()?.unwrap_or_default();
    Ok(Some(record.iter().map(str::to_string).collect()))
}

/// Prints the per-check summary of a report.
pub fn print_summary(out: &mut impl Write, report: &BoundReport) -> std::io::Result<()> {
    writeln!(
        out,
        "J = {:.6e}, beta = {:.6e}, T*J = {:.6e}, m = {}",
        report.j, report.beta, report.tj, report.m
    )?;
    for (name, check) in report.checks.entries() {
        match check {
            Some(c) => writeln!(
                out,
                "{:<16} {}  actual {:.6e}  bound {:.6e}  margin {:+.3e}{}",
                name,
                if c.pass { "pass" } else { "FAIL" },
                c.actual,
                c.bound,
                c.margin,
                if c.vacuous { "  (vacuous)" } else { "" }
            )?,
            None => writeln!(out, "{name:<16} n/a")?,
        }
    }
    if !report.notes.is_empty() {
        writeln!(out, "notes: {}", report.notes)?;
    }
    Ok(())
}
