//! Single-loop speed estimation with g-factors.
//!
//! Each loop reports a per-interval count and occupancy. The preliminary speed
//! is `g * q / o`, which is then passed through an exponential filter whose
//! weight grows with the number of vehicles observed in the interval. Lane
//! speeds at a station are averaged into the station (VDS) speed.

use std::collections::HashMap;

use crate::corridor::CorridorGeometry;
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpaceTimeField};
use crate::grid::TimeGrid;
use crate::units::{feet_to_miles, SECONDS_PER_HOUR};

/// Default filter constant, vehicles per one-minute interval.
pub const DEFAULT_SMOOTHING_A: f64 = 10.0;

/// Per-lane g-factors in feet, leftmost lane first. These are also the
/// effective lengths the simulator assigns to each lane by default.
pub const REFERENCE_G_FACTORS_FT: [f64; 6] = [22.0, 22.0, 26.0, 25.0, 24.0, 23.0];

#[derive(Debug, Clone, PartialEq)]
pub struct GFactorSet(Vec<f64>);

impl GFactorSet {
    pub fn new(feet: Vec<f64>) -> Result<Self> {
        if feet.is_empty() {
            return Err(Error::Parameter("g-factor set is empty".into()));
        }
        if let Some(g) = feet.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::Parameter(format!("g-factor must be positive, got {g}")));
        }
        Ok(Self(feet))
    }

    pub fn reference() -> Self {
        Self(REFERENCE_G_FACTORS_FT.to_vec())
    }

    /// g-factor for a 0-based lane; stations with more lanes than the set
    /// reuse the last value.
    pub fn lane(&self, lane: usize) -> f64 {
        self.0[lane.min(self.0.len() - 1)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Whether every value lies in the plausible 10..=40 ft band.
    pub fn is_plausible(&self) -> bool {
        self.0.iter().all(|g| (10.0..=40.0).contains(g))
    }
}

/// One lane-interval of loop data. `lane` is 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSample {
    pub vds_id: String,
    pub lane: usize,
    pub interval: usize,
    /// Vehicles in the interval.
    pub count: f64,
    /// Fraction of the interval the loop was occupied.
    pub occupancy: f64,
}

/// `s = g q / o` in mph, with `g` in feet and `q` vehicles per `step_seconds`.
///
/// Zero flow yields zero speed. Positive flow over an unoccupied loop is
/// physically inconsistent and rejected.
pub fn preliminary_speed(g_ft: f64, count: f64, occupancy: f64, step_seconds: f64) -> Result<f64> {
    if count == 0.0 {
        return Ok(0.0);
    }
    if occupancy <= 0.0 {
        return Err(Error::InvalidSample { count });
    }
    let flow_per_hour = count * SECONDS_PER_HOUR / step_seconds;
    Ok(feet_to_miles(g_ft) * flow_per_hour / occupancy)
}

/// Exponential filter state for one loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopFilterState {
    pub v_prev: Option<f64>,
    pub a: f64,
}

impl LoopFilterState {
    pub fn new(a: f64) -> Self {
        assert!(a > 0.0, "smoothing constant must be positive");
        Self { v_prev: None, a }
    }

    pub fn initialized(a: f64, v_prev: f64) -> Self {
        Self { v_prev: Some(v_prev), a }
    }
}

/// One filter update. An uninitialized state adopts `s` directly.
pub fn smooth_speed(state: LoopFilterState, s: f64, q: f64) -> (f64, LoopFilterState) {
    let v = match state.v_prev {
        None => s,
        Some(prev) => {
            let w = q / (q + state.a);
            w * s + (1.0 - w) * prev
        }
    };
    (v, LoopFilterState { v_prev: Some(v), ..state })
}

/// Filtered speeds for one loop. `samples[i]` is `(count, occupancy)` or
/// `None` when the row is missing.
///
/// Intervals before the first valid positive preliminary speed are missing;
/// so are missing rows and rows with flow over a zero occupancy. The filter
/// state is held across missing intervals.
pub fn loop_speeds(g_ft: f64, samples: &[Option<(f64, f64)>], step_seconds: f64, a: f64) -> Vec<Option<f64>> {
    let mut state = LoopFilterState::new(a);
    samples
        .iter()
        .map(|sample| {
            let (q, o) = (*sample)?;
            let s = preliminary_speed(g_ft, q, o, step_seconds).ok()?;
            if state.v_prev.is_none() && !(s > 0.0) {
                return None;
            }
            let (v, next) = smooth_speed(state, s, q);
            state = next;
            Some(v)
        })
        .collect()
}

/// Unweighted mean of the valid lane speeds.
pub fn vds_speed(lane_speeds: &[Option<f64>]) -> Option<f64> {
    let valid: Vec<f64> = lane_speeds.iter().flatten().copied().collect();
    if valid.is_empty() {
        None
    } else {
        Some(valid.iter().sum::<f64>() / valid.len() as f64)
    }
}

/// Samples regrouped per station and lane.
#[derive(Debug, Clone)]
pub struct LaneSeries {
    /// `[vds][lane][interval]`
    pub data: Vec<Vec<Vec<Option<(f64, f64)>>>>,
}

impl LaneSeries {
    /// Groups samples by the corridor's VDS order; unknown stations and
    /// out-of-range lanes or intervals are ignored.
    pub fn collect(samples: &[DetectorSample], geom: &CorridorGeometry, n_intervals: usize) -> Self {
        let index: HashMap<&str, usize> = geom
            .vds()
            .iter()
            .enumerate()
            .map(|(j, v)| (v.id.as_str(), j))
            .collect();
        let mut data: Vec<Vec<Vec<Option<(f64, f64)>>>> = geom
            .vds()
            .iter()
            .map(|v| vec![vec![None; n_intervals]; v.lanes as usize])
            .collect();
        for s in samples {
            let Some(&j) = index.get(s.vds_id.as_str()) else { continue };
            if s.lane < data[j].len() && s.interval < n_intervals {
                data[j][s.lane][s.interval] = Some((s.count, s.occupancy));
            }
        }
        Self { data }
    }
}

/// Per-station counts (veh/interval) and filtered speeds (mph).
#[derive(Debug, Clone)]
pub struct VdsMeasurements {
    pub counts: SpaceTimeField,
    pub speeds: SpaceTimeField,
}

/// Station totals and speeds from lane data.
///
/// The station count is the sum over lanes; when some lanes are missing the
/// present lanes are scaled up to the full lane count. A station-interval with
/// no lane data is missing.
pub fn aggregate_vds(lanes: &LaneSeries, g: &GFactorSet, grid: &TimeGrid, a: f64) -> VdsMeasurements {
    let n = grid.n_intervals();
    let mut counts = SpaceTimeField::masked(FieldKind::Count, lanes.data.len(), n);
    let mut speeds = SpaceTimeField::masked(FieldKind::Speed, lanes.data.len(), n);
    for (j, station) in lanes.data.iter().enumerate() {
        let lane_speeds: Vec<Vec<Option<f64>>> = station
            .iter()
            .enumerate()
            .map(|(l, series)| loop_speeds(g.lane(l), series, grid.step_seconds(), a))
            .collect();
        for i in 0..n {
            let present: Vec<f64> = station.iter().filter_map(|s| s[i].map(|(q, _)| q)).collect();
            if !present.is_empty() {
                let scale = station.len() as f64 / present.len() as f64;
                counts.set(j, i, present.iter().sum::<f64>() * scale);
            }
            let at_i: Vec<Option<f64>> = lane_speeds.iter().map(|s| s[i]).collect();
            speeds.put(j, i, vds_speed(&at_i));
        }
    }
    VdsMeasurements { counts, speeds }
}

/// One loop's data paired with ground-truth speeds, for calibration.
#[derive(Debug, Clone)]
pub struct CalibrationSeries {
    pub samples: Vec<Option<(f64, f64)>>,
    pub true_speeds: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationGrid {
    pub min_ft: f64,
    pub max_ft: f64,
    pub step_ft: f64,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        Self {
            min_ft: 14.0,
            max_ft: 34.0,
            step_ft: 0.5,
        }
    }
}

impl CalibrationGrid {
    pub fn candidates(&self) -> Vec<f64> {
        let n = ((self.max_ft - self.min_ft) / self.step_ft + 1e-9).floor() as usize;
        (0..=n).map(|k| self.min_ft + k as f64 * self.step_ft).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub g_ft: f64,
    /// Median of (calculated - true) at the chosen g.
    pub median_error: f64,
    /// |#over - #under| at the chosen g.
    pub imbalance: usize,
    pub samples: usize,
}

pub const MIN_CALIBRATION_SAMPLES: usize = 100;

/// Grid search for the g-factor of one lane across all its loops.
///
/// Picks the candidate whose speed errors have the median closest to zero,
/// breaking ties by the smallest imbalance between over- and
/// under-estimates, then by the smaller g.
pub fn calibrate_g(
    series: &[CalibrationSeries],
    step_seconds: f64,
    a: f64,
    search: CalibrationGrid,
) -> Result<Calibration> {
    let usable = series
        .iter()
        .flat_map(|s| s.samples.iter().zip(&s.true_speeds))
        .filter(|(smp, truth)| matches!(smp, Some((_, o)) if *o > 0.0) && truth.is_some())
        .count();
    if usable < MIN_CALIBRATION_SAMPLES {
        return Err(Error::Calibration(format!(
            "{usable} samples with positive occupancy, need at least {MIN_CALIBRATION_SAMPLES}"
        )));
    }
    let mut best: Option<Calibration> = None;
    for g in search.candidates() {
        let mut errors = Vec::with_capacity(usable);
        for s in series {
            let est = loop_speeds(g, &s.samples, step_seconds, a);
            for (v, t) in est.iter().zip(&s.true_speeds) {
                if let (Some(v), Some(t)) = (v, t) {
                    errors.push(v - t);
                }
            }
        }
        if errors.is_empty() {
            continue;
        }
        let over = errors.iter().filter(|e| **e > 0.0).count();
        let under = errors.iter().filter(|e| **e < 0.0).count();
        let cand = Calibration {
            g_ft: g,
            median_error: median(&mut errors),
            imbalance: over.abs_diff(under),
            samples: errors.len(),
        };
        let better = match &best {
            None => true,
            Some(b) => {
                let (m, mb) = (cand.median_error.abs(), b.median_error.abs());
                m < mb - 1e-12 || ((m - mb).abs() <= 1e-12 && cand.imbalance < b.imbalance)
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| Error::Calibration("no candidate produced any speed estimate".into()))
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
