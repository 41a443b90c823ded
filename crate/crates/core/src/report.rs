//! Run metrics: per-statement events, per-kind statistics, the compile
//! attempt histogram and the text/JSON report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::canonical::to_canonical_json;
use crate::engine::manifest::CensusSummary;
use crate::engine::{Outcome, RunManifest, StatementResult};
use crate::statement::StatementKind;

/// Row order of the per-kind table.
pub const KIND_ORDER: [StatementKind; 6] = [
    StatementKind::Definition,
    StatementKind::Theorem,
    StatementKind::Lemma,
    StatementKind::Proposition,
    StatementKind::Remark,
    StatementKind::Corollary,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatementEvent {
    pub statement_id: String,
    pub kind: StatementKind,
    pub outcome: Outcome,
    /// Every build invocation: main loop, axiom phase and stub.
    pub compile_attempts: u32,
    /// Main-loop builds only.
    pub main_attempts: u32,
    pub wall_ms: u64,
    pub declarations_added: usize,
    pub axioms_added: usize,
}

impl From<&StatementResult> for StatementEvent {
    fn from(r: &StatementResult) -> Self {
        StatementEvent {
            statement_id: r.statement_id.to_string(),
            kind: r.kind,
            outcome: r.outcome,
            compile_attempts: r.compile_attempts() as u32,
            main_attempts: r.attempts.len() as u32,
            wall_ms: r.total_wall_ms,
            declarations_added: r.introduced_declarations,
            axioms_added: r.axioms().count(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KindStats {
    pub count: usize,
    pub total_wall_ms: u64,
    pub total_compiles: u64,
    pub total_main_attempts: u64,
    pub axiomatized: usize,
    pub failed: usize,
    /// Mean wall time, whole seconds.
    pub mean_wall_s: u64,
    /// Mean compile attempts, one decimal.
    pub mean_compiles: f64,
    pub mean_main_attempts: f64,
}

impl KindStats {
    fn add(&mut self, e: &StatementEvent) {
        self.count += 1;
        self.total_wall_ms += e.wall_ms;
        self.total_compiles += u64::from(e.compile_attempts);
        self.total_main_attempts += u64::from(e.main_attempts);
        self.axiomatized += usize::from(e.outcome == Outcome::Axiomatized);
        self.failed += usize::from(e.outcome == Outcome::Failed);
    }

    fn finish(&mut self) {
        if self.count == 0 {
            return;
        }
        let n = self.count as f64;
        self.mean_wall_s = (self.total_wall_ms as f64 / n / 1000.0).round() as u64;
        self.mean_compiles = round1(self.total_compiles as f64 / n);
        self.mean_main_attempts = round1(self.total_main_attempts as f64 / n);
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TypeStats {
    pub per_kind: BTreeMap<StatementKind, KindStats>,
    pub overall: KindStats,
}

/// Exact per-kind and overall statistics; overall means are event-weighted.
pub fn aggregate_stats(events: &[StatementEvent]) -> TypeStats {
    let mut stats = TypeStats::default();
    for e in events {
        stats.per_kind.entry(e.kind).or_default().add(e);
        stats.overall.add(e);
    }
    stats.per_kind.values_mut().for_each(KindStats::finish);
    stats.overall.finish();
    stats
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistogramSpec {
    /// Inclusive `(low, high)` bins over main-loop attempts.
    pub bins: Vec<(u32, u32)>,
    pub per_kind: BTreeMap<StatementKind, Vec<usize>>,
    pub totals: Vec<usize>,
}

impl HistogramSpec {
    /// Bins of `width` covering `1..=max`.
    pub fn uniform(width: u32, max: u32) -> HistogramSpec {
        let width = width.max(1);
        let bins = (0..max.div_ceil(width)).map(|i| (i * width + 1, ((i + 1) * width).min(max))).collect();
        HistogramSpec { bins, per_kind: BTreeMap::new(), totals: Vec::new() }
    }
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec::uniform(5, 30)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("data error: {0}")]
    Data(String),
}

/// Bins every event by main-loop attempts.
pub fn histogram(events: &[StatementEvent], spec: &HistogramSpec) -> Result<HistogramSpec, ReportError> {
    let mut out = HistogramSpec { bins: spec.bins.clone(), per_kind: BTreeMap::new(), totals: vec![0; spec.bins.len()] };
    for e in events {
        let bin = spec.bins.iter().position(|&(lo, hi)| (lo..=hi).contains(&e.main_attempts)).ok_or_else(|| {
            ReportError::Data(format!(
                "{} has {} main-loop attempts, outside the histogram range",
                e.statement_id, e.main_attempts
            ))
        })?;
        out.per_kind.entry(e.kind).or_insert_with(|| vec![0; spec.bins.len()])[bin] += 1;
        out.totals[bin] += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub name: String,
    pub statements: usize,
    pub lines_of_lean: usize,
    pub declarations: usize,
    pub formalization_ms: u64,
    pub extraction_ms: u64,
    pub axioms: usize,
}

impl RunRow {
    pub fn total_ms(&self) -> u64 {
        self.formalization_ms + self.extraction_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub runs: Vec<RunRow>,
    pub total: RunRow,
    pub stats: TypeStats,
    pub histogram: HistogramSpec,
    pub events: Vec<StatementEvent>,
}

impl Report {
    /// Builds the report over named run manifests.
    pub fn from_runs(runs: &[(String, &RunManifest)]) -> Result<Report, ReportError> {
        let mut rows = Vec::new();
        let mut events = Vec::new();
        for (name, m) in runs {
            let census = m.census.clone().unwrap_or_else(|| CensusSummary {
                sorry_count: 0,
                axiom_names: Vec::new(),
                declaration_counts: BTreeMap::new(),
                total_declarations: 0,
                total_lines: 0,
            });
            rows.push(RunRow {
                name: name.clone(),
                statements: m.results.len(),
                lines_of_lean: census.total_lines,
                declarations: census.total_declarations,
                formalization_ms: m.formalization_wall_ms,
                extraction_ms: m.extraction_wall_ms.unwrap_or(0),
                axioms: census.axiom_names.len(),
            });
            events.extend(m.results.iter().map(StatementEvent::from));
        }
        // bins cover the largest configured attempt limit
        let max = runs.iter().map(|(_, m)| m.loop_config.max_attempts).max().unwrap_or(30).max(30);
        Report::from_parts_with(rows, events, &HistogramSpec::uniform(5, max.div_ceil(5) * 5))
    }

    pub fn from_parts(runs: Vec<RunRow>, events: Vec<StatementEvent>) -> Result<Report, ReportError> {
        Report::from_parts_with(runs, events, &HistogramSpec::default())
    }

    pub fn from_parts_with(runs: Vec<RunRow>, events: Vec<StatementEvent>, spec: &HistogramSpec) -> Result<Report, ReportError> {
        let total = RunRow {
            name: "Total".to_string(),
            statements: runs.iter().map(|r| r.statements).sum(),
            lines_of_lean: runs.iter().map(|r| r.lines_of_lean).sum(),
            declarations: runs.iter().map(|r| r.declarations).sum(),
            formalization_ms: runs.iter().map(|r| r.formalization_ms).sum(),
            extraction_ms: runs.iter().map(|r| r.extraction_ms).sum(),
            axioms: runs.iter().map(|r| r.axioms).sum(),
        };
        let stats = aggregate_stats(&events);
        let histogram = histogram(&events, spec)?;
        Ok(Report { runs, total, stats, histogram, events })
    }
}

/// `20h 4m`, rounded to the minute.
pub fn format_hm(ms: u64) -> String {
    let minutes = (ms + 30_000) / 60_000;
    format!("{}h {}m", minutes / 60, minutes % 60)
}

/// `21m 54s`; hours are added when needed.
pub fn format_ms(seconds: u64) -> String {
    let (h, m, s) = (seconds / 3600, seconds % 3600 / 60, seconds % 60);
    if h > 0 {
        format!("{h}h {m}m {s}s")
    } else {
        format!("{m}m {s}s")
    }
}

fn with_commas(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            let pad = w - cell.chars().count();
            if i == 0 {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

/// Deterministic rendering of `report`.
pub fn render_report(report: &Report, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => to_canonical_json(report).expect("report serializes"),
        ReportFormat::Text => render_text(report).into_bytes(),
    }
}

fn render_text(r: &Report) -> String {
    let mut out = String::new();
    let run_row = |row: &RunRow| {
        vec![
            row.name.clone(),
            row.statements.to_string(),
            with_commas(row.lines_of_lean),
            with_commas(row.declarations),
            format_hm(row.formalization_ms),
            format_hm(row.extraction_ms),
            format_hm(row.total_ms()),
            row.axioms.to_string(),
        ]
    };
    let mut rows: Vec<Vec<String>> = r.runs.iter().map(run_row).collect();
    if !r.runs.is_empty() {
        rows.push(run_row(&r.total));
    }
    out.push_str("Runs\n");
    out.push_str(&table(
        &["Run", "Statements", "Lines of Lean", "Declarations", "Time", "Extraction", "Total time", "Axioms"],
        &rows,
    ));

    let kind_row = |name: String, k: &KindStats| {
        vec![
            name,
            k.count.to_string(),
            format_ms(k.mean_wall_s),
            format!("{:.1}", k.mean_compiles),
            format!("{:.1}", k.mean_main_attempts),
            k.axiomatized.to_string(),
            k.failed.to_string(),
        ]
    };
    let mut rows: Vec<Vec<String>> = KIND_ORDER
        .iter()
        .filter_map(|kind| r.stats.per_kind.get(kind).map(|k| kind_row(kind.title().to_string(), k)))
        .collect();
    if r.stats.overall.count > 0 {
        rows.push(kind_row("Total/Avg".to_string(), &r.stats.overall));
    }
    out.push_str("\nStatement types\n");
    out.push_str(&table(
        &["Type", "Count", "Avg. Time", "Avg. Compiles", "Avg. Main-loop", "Axiomatized", "Failed"],
        &rows,
    ));

    let mut header = vec!["Type".to_string()];
    header.extend(r.histogram.bins.iter().map(|(lo, hi)| format!("{lo}-{hi}")));
    let mut rows: Vec<Vec<String>> = KIND_ORDER
        .iter()
        .filter_map(|kind| {
            r.histogram.per_kind.get(kind).map(|counts| {
                let mut row = vec![kind.title().to_string()];
                row.extend(counts.iter().map(usize::to_string));
                row
            })
        })
        .collect();
    if !r.events.is_empty() {
        let mut row = vec!["Total".to_string()];
        row.extend(r.histogram.totals.iter().map(usize::to_string));
        rows.push(row);
    }
    out.push_str("\nMain-loop compile attempts\n");
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.push_str(&table(&header, &rows));
    let _ = writeln!(out, "\nStatements: {}  Declarations: {}", r.total.statements, with_commas(r.total.declarations));
    out
}
