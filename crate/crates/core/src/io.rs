//! CSV readers and writers for every file the pipeline exchanges.
//!
//! Data files (detector, vendor, truth, conflated fields) carry values at
//! full precision so they round-trip exactly; report files print two
//! decimals. Missing values are written as empty fields.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDateTime;

use crate::corridor::EvaluationPointSet;
use crate::detector::DetectorSample;
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpaceTimeField};
use crate::grid::{format_timestamp, parse_timestamp, TimeGrid};
use crate::measures::{ErrorMetrics, Improvement, Method, PerfReport, Totals};
use crate::ttfuse::LinkTravelTime;

pub const DETECTOR_HEADER: [&str; 5] = ["timestamp", "vds_id", "lane", "count", "occupancy"];
pub const VENDOR_HEADER: [&str; 4] = ["timestamp", "link_id", "travel_time_seconds", "probe_count"];
pub const TRUTH_HEADER: [&str; 5] = ["timestamp", "position_mi", "flow", "speed", "density"];
pub const MEASURES_HEADER: [&str; 4] = ["measure", "method", "scenario", "value"];
pub const SUMMARY_HEADER: [&str; 5] = ["scenario", "method", "vmt", "vht", "vhd"];
pub const BREAKDOWN_HEADER: [&str; 8] = ["scenario", "method", "point", "position_mi", "timestamp", "vmt", "vht", "vhd"];
pub const FIELD_HEADER: [&str; 5] = ["timestamp", "position_mi", "flow", "speed", "density"];
pub const CONFLATION_METRICS_HEADER: [&str; 6] = ["scenario", "method", "quantity", "mae", "mape", "n"];
pub const IMPROVEMENT_HEADER: [&str; 5] =
    ["scenario", "measure", "traditional_error_pct", "hybrid_error_pct", "improvement_pct"];

fn input_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Input {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| input_err(path, e.to_string()))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(input_err(
            path,
            format!("expected header `{}`, found `{}`", header.join(","), got.join(",")),
        ));
    }
    Ok(r)
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn two(v: f64) -> String {
    format!("{v:.2}")
}

struct Row<'a> {
    path: &'a Path,
    line: u64,
    rec: csv::StringRecord,
}

impl Row<'_> {
    fn err(&self, col: &str, why: impl std::fmt::Display) -> Error {
        input_err(self.path, format!("line {}: column `{col}`: {why}", self.line))
    }

    fn text(&self, i: usize, col: &str) -> Result<&str> {
        self.rec.get(i).ok_or_else(|| self.err(col, "missing"))
    }

    fn f64(&self, i: usize, col: &str) -> Result<f64> {
        let s = self.text(i, col)?;
        s.parse().map_err(|_| self.err(col, format!("`{s}` is not a number")))
    }

    fn opt_f64(&self, i: usize, col: &str) -> Result<Option<f64>> {
        let s = self.text(i, col)?;
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| self.err(col, format!("`{s}` is not a number")))
    }

    fn ts(&self, i: usize, col: &str) -> Result<NaiveDateTime> {
        let s = self.text(i, col)?;
        parse_timestamp(s).map_err(|e| self.err(col, format!("`{s}`: {e}")))
    }
}

fn rows<'a>(path: &'a Path, r: &mut csv::Reader<File>) -> Result<Vec<Row<'a>>> {
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        out.push(Row {
            path,
            line: k as u64 + 2,
            rec: rec?,
        });
    }
    Ok(out)
}

/// Lanes are numbered from 1 in the file.
pub fn write_detector_csv(path: &Path, grid: &TimeGrid, samples: &[DetectorSample]) -> Result<()> {
    let mut w = writer(path, &DETECTOR_HEADER)?;
    for s in samples {
        w.write_record([
            format_timestamp(grid.timestamp(s.interval)),
            s.vds_id.clone(),
            (s.lane + 1).to_string(),
            num(s.count),
            num(s.occupancy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows whose timestamp falls outside `grid` are skipped and counted.
pub fn read_detector_csv(path: &Path, grid: &TimeGrid) -> Result<(Vec<DetectorSample>, usize)> {
    let mut r = reader(path, &DETECTOR_HEADER)?;
    let mut out = Vec::new();
    let mut skipped = 0;
    for row in rows(path, &mut r)? {
        let ts = row.ts(0, "timestamp")?;
        let lane = row.text(2, "lane")?;
        let lane: usize = lane
            .parse()
            .ok()
            .filter(|&l| l >= 1)
            .ok_or_else(|| row.err("lane", format!("`{lane}` is not a lane number starting at 1")))?;
        let count = row.f64(3, "count")?;
        let occupancy = row.f64(4, "occupancy")?;
        if !(0.0..=1.0).contains(&occupancy) {
            return Err(row.err("occupancy", format!("{occupancy} is not a fraction in [0, 1]")));
        }
        let Some(interval) = grid.index_of(ts) else {
            skipped += 1;
            continue;
        };
        out.push(DetectorSample {
            vds_id: row.text(1, "vds_id")?.to_string(),
            lane: lane - 1,
            interval,
            count,
            occupancy,
        });
    }
    Ok((out, skipped))
}

pub fn write_vendor_csv(path: &Path, grid: &TimeGrid, records: &[LinkTravelTime]) -> Result<()> {
    let mut w = writer(path, &VENDOR_HEADER)?;
    for r in records {
        w.write_record([
            format_timestamp(grid.timestamp(r.interval)),
            r.link_id.clone(),
            num(r.travel_time_s),
            r.probe_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vendor_csv(path: &Path, grid: &TimeGrid) -> Result<(Vec<LinkTravelTime>, usize)> {
    let mut r = reader(path, &VENDOR_HEADER)?;
    let mut out = Vec::new();
    let mut skipped = 0;
    for row in rows(path, &mut r)? {
        let ts = row.ts(0, "timestamp")?;
        let tt = row.f64(2, "travel_time_seconds")?;
        let pc = row.text(3, "probe_count")?;
        let probe_count = pc
            .parse()
            .map_err(|_| row.err("probe_count", format!("`{pc}` is not a count")))?;
        let Some(interval) = grid.index_of(ts) else {
            skipped += 1;
            continue;
        };
        out.push(LinkTravelTime {
            link_id: row.text(1, "link_id")?.to_string(),
            interval,
            travel_time_s: tt,
            probe_count,
        });
    }
    Ok((out, skipped))
}

/// Ground-truth fields on the simulator's cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthData {
    pub window: TimeGrid,
    /// Cell midpoints, mi.
    pub positions: Vec<f64>,
    pub dx: f64,
    pub flow: SpaceTimeField,
    pub speed: SpaceTimeField,
    pub density: SpaceTimeField,
}

impl TruthData {
    pub fn from_ground_truth(t: &crate::sim::GroundTruth) -> Self {
        Self {
            window: t.window.clone(),
            positions: (0..t.n_cells()).map(|i| t.cell_midpoint(i)).collect(),
            dx: t.dx,
            flow: t.flow.clone(),
            speed: t.speed.clone(),
            density: t.density.clone(),
        }
    }

    pub fn cell_of(&self, x: f64) -> usize {
        ((x / self.dx).floor().max(0.0) as usize).min(self.positions.len() - 1)
    }
}

pub fn write_truth_csv(path: &Path, t: &TruthData) -> Result<()> {
    let mut w = writer(path, &TRUTH_HEADER)?;
    for i in 0..t.window.n_intervals() {
        let ts = format_timestamp(t.window.timestamp(i));
        for (c, &x) in t.positions.iter().enumerate() {
            w.write_record([
                ts.clone(),
                num(x),
                opt(t.flow.get(c, i)),
                opt(t.speed.get(c, i)),
                opt(t.density.get(c, i)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds the fields from a truth file. Cells must be equally spaced from
/// milepost 0 and minutes consecutive.
pub fn read_truth_csv(path: &Path) -> Result<TruthData> {
    let mut r = reader(path, &TRUTH_HEADER)?;
    let rows = rows(path, &mut r)?;
    if rows.is_empty() {
        return Err(input_err(path, "no data rows"));
    }
    let mut parsed = Vec::with_capacity(rows.len());
    let mut stamps = BTreeSet::new();
    let mut xs: Vec<f64> = Vec::new();
    for row in &rows {
        let ts = row.ts(0, "timestamp")?;
        let x = row.f64(1, "position_mi")?;
        stamps.insert(ts);
        xs.push(x);
        parsed.push((ts, x, row.opt_f64(2, "flow")?, row.opt_f64(3, "speed")?, row.opt_f64(4, "density")?));
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let stamps: Vec<NaiveDateTime> = stamps.into_iter().collect();
    let start = stamps[0];
    let step = if stamps.len() > 1 {
        (stamps[1] - stamps[0]).num_seconds() as f64
    } else {
        60.0
    };
    let window = TimeGrid::new(start, step, stamps.len()).map_err(|e| input_err(path, e.to_string()))?;
    if stamps.iter().enumerate().any(|(i, &t)| window.timestamp(i) != t) {
        return Err(input_err(path, "timestamps are not evenly spaced"));
    }
    // cells start at milepost 0, so the first midpoint is half a cell
    let dx = 2.0 * xs[0];
    if xs.iter().enumerate().any(|(c, &x)| (x - (c as f64 + 0.5) * dx).abs() > 1e-9) {
        return Err(input_err(path, "cell positions are not equally spaced from milepost 0"));
    }
    let n = xs.len();
    let mut flow = SpaceTimeField::masked(FieldKind::Flow, n, stamps.len());
    let mut speed = SpaceTimeField::masked(FieldKind::Speed, n, stamps.len());
    let mut density = SpaceTimeField::masked(FieldKind::Density, n, stamps.len());
    for (ts, x, q, v, k) in parsed {
        let c = xs.partition_point(|&p| p < x);
        let i = window.index_of(ts).expect("timestamp is on the grid");
        flow.put(c, i, q);
        speed.put(c, i, v);
        density.put(c, i, k);
    }
    Ok(TruthData {
        window,
        positions: xs,
        dx,
        flow,
        speed,
        density,
    })
}

/// Conflated fields on the evaluation points, one row per point and minute.
pub fn write_field_csv(
    path: &Path,
    grid: &TimeGrid,
    eps: &EvaluationPointSet,
    flow: &SpaceTimeField,
    speed: &SpaceTimeField,
    density: &SpaceTimeField,
) -> Result<()> {
    let mut w = writer(path, &FIELD_HEADER)?;
    for i in 0..grid.n_intervals() {
        let ts = format_timestamp(grid.timestamp(i));
        for (k, p) in eps.points().iter().enumerate() {
            w.write_record([
                ts.clone(),
                num(p.position),
                opt(flow.get(k, i)),
                opt(speed.get(k, i)),
                opt(density.get(k, i)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows of a field file as `(timestamp, position, flow, speed, density)`.
pub type FieldRow = (NaiveDateTime, f64, Option<f64>, Option<f64>, Option<f64>);

pub fn read_field_csv(path: &Path) -> Result<Vec<FieldRow>> {
    let mut r = reader(path, &FIELD_HEADER)?;
    rows(path, &mut r)?
        .iter()
        .map(|row| {
            Ok((
                row.ts(0, "timestamp")?,
                row.f64(1, "position_mi")?,
                row.opt_f64(2, "flow")?,
                row.opt_f64(3, "speed")?,
                row.opt_f64(4, "density")?,
            ))
        })
        .collect()
}

/// One row of the `scenario,method,vmt,vht,vhd` summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: Method,
    pub totals: Totals,
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(path, &SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.method.name().to_string(),
            two(r.totals.vmt),
            two(r.totals.vht),
            two(r.totals.vhd),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = reader(path, &SUMMARY_HEADER)?;
    rows(path, &mut r)?
        .iter()
        .map(|row| {
            let m = row.text(1, "method")?;
            Ok(SummaryRow {
                scenario: row.text(0, "scenario")?.to_string(),
                method: Method::parse(m).ok_or_else(|| row.err("method", format!("unknown method `{m}`")))?,
                totals: Totals {
                    vmt: row.f64(2, "vmt")?,
                    vht: row.f64(3, "vht")?,
                    vhd: row.f64(4, "vhd")?,
                },
            })
        })
        .collect()
}

/// Long form of the summary: `measure,method,scenario,value`.
pub fn write_measures_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(path, &MEASURES_HEADER)?;
    for r in rows {
        for (m, v) in [("vmt", r.totals.vmt), ("vht", r.totals.vht), ("vhd", r.totals.vhd)] {
            w.write_record([m.to_string(), r.method.name().to_string(), r.scenario.clone(), two(v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_measures_csv(path: &Path) -> Result<Vec<(String, Method, String, f64)>> {
    let mut r = reader(path, &MEASURES_HEADER)?;
    rows(path, &mut r)?
        .iter()
        .map(|row| {
            let m = row.text(1, "method")?;
            Ok((
                row.text(0, "measure")?.to_string(),
                Method::parse(m).ok_or_else(|| row.err("method", format!("unknown method `{m}`")))?,
                row.text(2, "scenario")?.to_string(),
                row.f64(3, "value")?,
            ))
        })
        .collect()
}

/// Per-segment, per-minute contributions of one report.
pub fn write_breakdown_csv(path: &Path, scenario: &str, grid: &TimeGrid, reports: &[&PerfReport]) -> Result<()> {
    let mut w = writer(path, &BREAKDOWN_HEADER)?;
    for r in reports {
        for c in &r.contributions {
            w.write_record([
                scenario.to_string(),
                r.method.name().to_string(),
                c.point.to_string(),
                num(c.position),
                format_timestamp(grid.timestamp(c.interval)),
                num(c.vmt),
                num(c.vht),
                num(c.vhd),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConflationMetricRow {
    pub scenario: String,
    pub method: String,
    pub quantity: String,
    pub metrics: ErrorMetrics,
}

pub fn write_conflation_metrics_csv(path: &Path, rows: &[ConflationMetricRow]) -> Result<()> {
    let mut w = writer(path, &CONFLATION_METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.method.clone(),
            r.quantity.clone(),
            two(r.metrics.mae),
            two(r.metrics.mape),
            r.metrics.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_conflation_metrics_csv(path: &Path) -> Result<Vec<ConflationMetricRow>> {
    let mut r = reader(path, &CONFLATION_METRICS_HEADER)?;
    rows(path, &mut r)?
        .iter()
        .map(|row| {
            let n = row.text(5, "n")?;
            Ok(ConflationMetricRow {
                scenario: row.text(0, "scenario")?.to_string(),
                method: row.text(1, "method")?.to_string(),
                quantity: row.text(2, "quantity")?.to_string(),
                metrics: ErrorMetrics {
                    mae: row.f64(3, "mae")?,
                    mape: row.f64(4, "mape")?,
                    n: n.parse().map_err(|_| row.err("n", format!("`{n}` is not a count")))?,
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementRow {
    pub scenario: String,
    pub measure: String,
    pub traditional_error_pct: Option<f64>,
    pub hybrid_error_pct: Option<f64>,
    pub improvement_pct: Option<f64>,
}

impl ImprovementRow {
    pub fn from_totals(scenario: &str, trad: &Totals, hyb: &Totals, truth: &Totals) -> Vec<Self> {
        let imp: Improvement = crate::measures::improvement(trad, hyb, truth);
        let err = |e: f64, t: f64| crate::measures::percent_error(e, t);
        vec![
            Self {
                scenario: scenario.to_string(),
                measure: "vmt".into(),
                traditional_error_pct: err(trad.vmt, truth.vmt),
                hybrid_error_pct: err(hyb.vmt, truth.vmt),
                improvement_pct: imp.vmt,
            },
            Self {
                scenario: scenario.to_string(),
                measure: "vht".into(),
                traditional_error_pct: err(trad.vht, truth.vht),
                hybrid_error_pct: err(hyb.vht, truth.vht),
                improvement_pct: imp.vht,
            },
            Self {
                scenario: scenario.to_string(),
                measure: "vhd".into(),
                traditional_error_pct: err(trad.vhd, truth.vhd),
                hybrid_error_pct: err(hyb.vhd, truth.vhd),
                improvement_pct: imp.vhd,
            },
        ]
    }
}

pub fn write_improvement_csv(path: &Path, rows: &[ImprovementRow]) -> Result<()> {
    let mut w = writer(path, &IMPROVEMENT_HEADER)?;
    let o2 = |v: Option<f64>| v.map(two).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.measure.clone(),
            o2(r.traditional_error_pct),
            o2(r.hybrid_error_pct),
            o2(r.improvement_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_improvement_csv(path: &Path) -> Result<Vec<ImprovementRow>> {
    let mut r = reader(path, &IMPROVEMENT_HEADER)?;
    rows(path, &mut r)?
        .iter()
        .map(|row| {
            Ok(ImprovementRow {
                scenario: row.text(0, "scenario")?.to_string(),
                measure: row.text(1, "measure")?.to_string(),
                traditional_error_pct: row.opt_f64(2, "traditional_error_pct")?,
                hybrid_error_pct: row.opt_f64(3, "hybrid_error_pct")?,
                improvement_pct: row.opt_f64(4, "improvement_pct")?,
            })
        })
        .collect()
}

/// Writes `text` to `path` in one go.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
