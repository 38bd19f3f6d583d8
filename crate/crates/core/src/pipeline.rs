//! One scenario run end to end: simulate, estimate with both methods,
//! score against ground truth.

use crate::config::{Config, GFactorSource};
use crate::conflate::{conflate_onto_points, ConflationMethod, Quantity, VdsSeries};
use crate::corridor::{derive_evaluation_points, EvaluationPointSet, PointKind};
use crate::detector::{aggregate_vds, calibrate_g, Calibration, CalibrationSeries, DetectorSample, GFactorSet, LaneSeries, VdsMeasurements};
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpaceTimeField};
use crate::grid::TimeGrid;
use crate::io::TruthData;
use crate::measures::{
    error_metrics, field_error_metrics, hybrid_report, segment_report, traditional_report, ErrorMetrics, Method,
    PerfReport, Totals,
};
use crate::sim::{emulate_detectors, generate_probe_tts, run_ground_truth, GroundTruth, ScenarioSpec};
use crate::ttfuse::{blend_vendors, conflate_vendor, FusionFlags, LinkTravelTime, VendorData};

/// Everything the estimators consume for one run, as written to disk.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub scenario: String,
    pub seed: u64,
    pub grid: TimeGrid,
    pub samples: Vec<DetectorSample>,
    pub vendor: Vec<LinkTravelTime>,
    pub truth: TruthData,
}

/// Runs the simulator and both data generators for one seed.
pub fn simulate(cfg: &Config, spec: &ScenarioSpec, seed: u64) -> Result<(GroundTruth, RunInputs)> {
    let s = &cfg.simulation;
    let truth = run_ground_truth(&cfg.corridor, spec, &s.fd, seed, &s.grid, s.demand_noise)?;
    let samples = emulate_detectors(&truth, &cfg.corridor, &s.g_true, &s.detector_noise, seed)?;
    let probes = generate_probe_tts(&truth.history, cfg.corridor.links(), &s.probes, seed, spec.duration_min)?;
    let inputs = RunInputs {
        scenario: spec.name.clone(),
        seed,
        grid: truth.window.clone(),
        samples,
        vendor: probes.records,
        truth: TruthData::from_ground_truth(&truth),
    };
    Ok((truth, inputs))
}

/// Conflated fields of one reconstruction method on the evaluation points.
#[derive(Debug, Clone)]
pub struct ConflatedFields {
    pub method: ConflationMethod,
    pub flow: SpaceTimeField,
    pub speed: SpaceTimeField,
    pub density: SpaceTimeField,
    /// Flow error against truth at the cell boundaries.
    pub flow_error: Option<ErrorMetrics>,
    pub speed_error: Option<ErrorMetrics>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    pub grid: TimeGrid,
    pub eps: EvaluationPointSet,
    pub g_factors: GFactorSet,
    pub calibration: Vec<Calibration>,
    pub measurements: VdsMeasurements,
    /// Detector speeds against the true speed at each station.
    pub detector_speed_error: Option<ErrorMetrics>,
    pub truth: PerfReport,
    pub traditional: PerfReport,
    pub hybrid: PerfReport,
    pub gasm: ConflatedFields,
    pub cgasm: ConflatedFields,
    pub fusion_flags: FusionFlags,
}

impl RunResult {
    pub fn report(&self, m: Method) -> &PerfReport {
        match m {
            Method::GroundTruth => &self.truth,
            Method::Traditional => &self.traditional,
            Method::Hybrid => &self.hybrid,
        }
    }

    pub fn fields(&self, m: ConflationMethod) -> &ConflatedFields {
        match m {
            ConflationMethod::Gasm => &self.gasm,
            ConflationMethod::Cgasm => &self.cgasm,
        }
    }
}

/// True speed at each station, `[vds][interval]`.
fn truth_at_vds(cfg: &Config, truth: &TruthData) -> Vec<Vec<Option<f64>>> {
    cfg.corridor
        .vds()
        .iter()
        .map(|v| truth.speed.row(truth.cell_of(v.position)))
        .collect()
}

/// Per-lane calibration against ground-truth station speeds.
pub fn calibrate_lanes(cfg: &Config, lanes: &LaneSeries, truth: &TruthData, grid: &TimeGrid) -> Result<(GFactorSet, Vec<Calibration>)> {
    let true_speeds = truth_at_vds(cfg, truth);
    let n_lanes = lanes.data.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(n_lanes);
    for l in 0..n_lanes {
        let series: Vec<CalibrationSeries> = lanes
            .data
            .iter()
            .zip(&true_speeds)
            .filter(|(station, _)| l < station.len())
            .map(|(station, t)| CalibrationSeries {
                samples: station[l].clone(),
                true_speeds: t.clone(),
            })
            .collect();
        let c = calibrate_g(&series, grid.step_seconds(), cfg.detector.smoothing_a, cfg.detector.calibration)
            .map_err(|e| Error::Calibration(format!("lane {}: {e}", l + 1)))?;
        out.push(c);
    }
    let g = GFactorSet::new(out.iter().map(|c| c.g_ft).collect())?;
    Ok((g, out))
}

/// Truth values at the evaluation points (fine cell holding each point).
pub fn truth_on_points(truth: &TruthData, eps: &EvaluationPointSet, kind: FieldKind) -> SpaceTimeField {
    let src = match kind {
        FieldKind::Flow => &truth.flow,
        FieldKind::Speed => &truth.speed,
        FieldKind::Density => &truth.density,
        _ => unreachable!("no truth for {kind:?}"),
    };
    let rows: Vec<Vec<Option<f64>>> = eps.points().iter().map(|p| src.row(truth.cell_of(p.position))).collect();
    SpaceTimeField::from_rows(kind, &rows)
}

/// Ground-truth measures on the simulator cells.
pub fn truth_report(truth: &TruthData, cfg: &Config) -> PerfReport {
    let counts = truth.flow.map(FieldKind::Count, |q| q * truth.window.step_hours());
    let lengths = vec![truth.dx; truth.positions.len()];
    segment_report(Method::GroundTruth, &lengths, &truth.positions, &counts, &truth.speed, &cfg.measures)
}

fn conflate_all(
    cfg: &Config,
    series: &VdsSeries,
    eps: &EvaluationPointSet,
    method: ConflationMethod,
    truth: &TruthData,
) -> ConflatedFields {
    let flow = conflate_onto_points(series, Quantity::Flow, eps, &cfg.smoothing, method);
    let speed = conflate_onto_points(series, Quantity::Speed, eps, &cfg.smoothing, method);
    let density = conflate_onto_points(series, Quantity::Density, eps, &cfg.smoothing, method);
    let cells: Vec<usize> = eps
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.kind == PointKind::CellBoundary)
        .map(|(k, _)| k)
        .collect();
    let flow_error = field_error_metrics(&flow, &truth_on_points(truth, eps, FieldKind::Flow), &cells).ok();
    let speed_error = field_error_metrics(&speed, &truth_on_points(truth, eps, FieldKind::Speed), &cells).ok();
    ConflatedFields {
        method,
        flow,
        speed,
        density,
        flow_error,
        speed_error,
    }
}

/// Estimates the performance measures with both methods and scores them.
pub fn evaluate(cfg: &Config, inputs: &RunInputs) -> Result<RunResult> {
    let geom = &cfg.corridor;
    let grid = &inputs.grid;
    let n = grid.n_intervals();
    let eps = derive_evaluation_points(geom);
    let lanes = LaneSeries::collect(&inputs.samples, geom, n);

    let (g_factors, calibration) = match &cfg.detector.g_factors {
        GFactorSource::Fixed(g) => (g.clone(), Vec::new()),
        GFactorSource::Calibrate => calibrate_lanes(cfg, &lanes, &inputs.truth, grid)?,
    };
    let measurements = aggregate_vds(&lanes, &g_factors, grid, cfg.detector.smoothing_a);

    let true_speeds = truth_at_vds(cfg, &inputs.truth);
    let (mut est, mut tru) = (Vec::new(), Vec::new());
    for (j, row) in true_speeds.iter().enumerate() {
        for (i, t) in row.iter().enumerate() {
            if let (Some(e), Some(t)) = (measurements.speeds.get(j, i), t) {
                est.push(e);
                tru.push(*t);
            }
        }
    }
    let detector_speed_error = error_metrics(&est, &tru).ok();

    let traditional = traditional_report(&measurements.counts, &measurements.speeds, geom, &cfg.measures);

    let series = VdsSeries::from_measurements(geom, &measurements, grid)?;
    let gasm = conflate_all(cfg, &series, &eps, ConflationMethod::Gasm, &inputs.truth);
    let cgasm = conflate_all(cfg, &series, &eps, ConflationMethod::Cgasm, &inputs.truth);
    let chosen = match cfg.flow_method {
        ConflationMethod::Gasm => &gasm,
        ConflationMethod::Cgasm => &cgasm,
    };

    let mut flags = FusionFlags::default();
    let mut per_vendor = Vec::with_capacity(cfg.fusion.vendors.len());
    for vid in &cfg.fusion.vendors {
        let records: Vec<LinkTravelTime> = inputs
            .vendor
            .iter()
            .filter(|r| geom.link_index(&r.link_id).is_some_and(|l| geom.links()[l].vendor_id == *vid))
            .cloned()
            .collect();
        let data = VendorData::from_records(vid, &records, geom, n);
        let (tt, f) = conflate_vendor(geom, &eps, &chosen.density, &data, &cfg.fusion.params);
        flags.interpolated += f.interpolated;
        flags.free_flow += f.free_flow;
        flags.length_fallback += f.length_fallback;
        per_vendor.push(
            (0..eps.len())
                .flat_map(|k| (0..n).map(move |i| (k, i)))
                .map(|(k, i)| tt.get(k, i))
                .collect::<Vec<_>>(),
        );
    }
    let blended = blend_vendors(&per_vendor, &cfg.fusion.weights)?;
    let rows: Vec<Vec<Option<f64>>> = blended.chunks(n).map(<[Option<f64>]>::to_vec).collect();
    let cell_tt = SpaceTimeField::from_rows(FieldKind::TravelTime, &rows);
    let hybrid = hybrid_report(&chosen.flow, &cell_tt, &eps, grid, &cfg.measures, cfg.fusion.params.speed_cap_mph);

    Ok(RunResult {
        scenario: inputs.scenario.clone(),
        seed: inputs.seed,
        grid: grid.clone(),
        eps,
        g_factors,
        calibration,
        measurements,
        detector_speed_error,
        truth: truth_report(&inputs.truth, cfg),
        traditional,
        hybrid,
        gasm,
        cgasm,
        fusion_flags: flags,
    })
}

/// Simulates and evaluates one seed in memory.
pub fn run(cfg: &Config, spec: &ScenarioSpec, seed: u64) -> Result<(GroundTruth, RunResult)> {
    let (truth, inputs) = simulate(cfg, spec, seed)?;
    let result = evaluate(cfg, &inputs)?;
    Ok((truth, result))
}

/// Seed-averaged totals of one method.
pub fn mean_totals(results: &[&RunResult], m: Method) -> Totals {
    Totals::mean(&results.iter().map(|r| r.report(m).totals).collect::<Vec<_>>())
}
