//! Vehicle miles traveled, vehicle hours traveled and vehicle hours of delay.
//!
//! For a segment of length `L` with `q_i` vehicles and speed `v_i` in
//! interval `i`:
//!
//! ```text
//! VMT = sum L q_i
//! VHT = sum L q_i / v_i
//! VHD = sum q_i (L / v_i - L / b)
//! ```
//!
//! with `b` the threshold speed. Delay is clamped at zero per segment and
//! interval unless configured otherwise.

use crate::corridor::{CorridorGeometry, EvaluationPointSet};
use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::grid::TimeGrid;
use crate::ttfuse::cell_speed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureConfig {
    /// Threshold speed, mph.
    pub threshold_mph: f64,
    pub clamp_delay: bool,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            threshold_mph: 65.0,
            clamp_delay: true,
        }
    }
}

impl MeasureConfig {
    /// Delay of one segment-interval, in vehicle-hours.
    pub fn delay(&self, length: f64, count: f64, speed: f64) -> f64 {
        let d = count * (length / speed - length / self.threshold_mph);
        if self.clamp_delay {
            d.max(0.0)
        } else {
            d
        }
    }
}

pub fn vmt(length: f64, counts: &[f64]) -> f64 {
    counts.iter().map(|q| length * q).sum()
}

/// Sum over the intervals that can be evaluated, and the interval indices
/// that were excluded because vehicles were present without a speed.
#[derive(Debug, Clone, PartialEq)]
pub struct Partial {
    pub value: f64,
    pub excluded: Vec<usize>,
}

fn fold_with_speed(counts: &[f64], speeds: &[Option<f64>], f: impl Fn(f64, f64) -> f64) -> Partial {
    assert_eq!(counts.len(), speeds.len());
    let mut value = 0.0;
    let mut excluded = Vec::new();
    for (i, (&q, v)) in counts.iter().zip(speeds).enumerate() {
        if q == 0.0 {
            continue;
        }
        match v {
            Some(v) if *v > 0.0 => value += f(q, *v),
            _ => excluded.push(i),
        }
    }
    Partial { value, excluded }
}

pub fn vht(length: f64, counts: &[f64], speeds: &[Option<f64>]) -> Partial {
    fold_with_speed(counts, speeds, |q, v| length * q / v)
}

pub fn vhd(length: f64, counts: &[f64], speeds: &[Option<f64>], cfg: &MeasureConfig) -> Partial {
    fold_with_speed(counts, speeds, |q, v| cfg.delay(length, q, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Traditional,
    Hybrid,
    GroundTruth,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Traditional => "traditional",
            Method::Hybrid => "hybrid",
            Method::GroundTruth => "ground_truth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "traditional" => Some(Method::Traditional),
            "hybrid" => Some(Method::Hybrid),
            "ground_truth" | "truth" | "sgt" => Some(Method::GroundTruth),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Totals {
    pub vmt: f64,
    pub vht: f64,
    pub vhd: f64,
}

impl Totals {
    pub fn scaled(self, s: f64) -> Self {
        Self {
            vmt: self.vmt * s,
            vht: self.vht * s,
            vhd: self.vhd * s,
        }
    }

    pub fn add(self, o: Self) -> Self {
        Self {
            vmt: self.vmt + o.vmt,
            vht: self.vht + o.vht,
            vhd: self.vhd + o.vhd,
        }
    }

    /// Mean of several totals (e.g. replications).
    pub fn mean(all: &[Totals]) -> Totals {
        let n = all.len().max(1) as f64;
        all.iter().fold(Totals::default(), |acc, t| acc.add(*t)).scaled(1.0 / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub point: usize,
    pub interval: usize,
    /// Segment or span midpoint position, miles.
    pub position: f64,
    pub vmt: f64,
    pub vht: f64,
    pub vhd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerfReport {
    pub method: Method,
    pub totals: Totals,
    /// Row-major over (point, interval).
    pub contributions: Vec<Contribution>,
    /// (point, interval) pairs with vehicles but no usable speed.
    pub excluded: Vec<(usize, usize)>,
    /// (point, interval) pairs with no count at all.
    pub coverage_gaps: Vec<(usize, usize)>,
    /// Hybrid only: cell-intervals whose speed hit the cap.
    pub capped: usize,
}

impl PerfReport {
    fn from_contributions(method: Method, contributions: Vec<Contribution>) -> Self {
        let totals = contributions.iter().fold(Totals::default(), |acc, c| Totals {
            vmt: acc.vmt + c.vmt,
            vht: acc.vht + c.vht,
            vhd: acc.vhd + c.vhd,
        });
        Self {
            method,
            totals,
            contributions,
            excluded: Vec::new(),
            coverage_gaps: Vec::new(),
            capped: 0,
        }
    }

    /// Totals over intervals `[from, to)`.
    pub fn totals_over(&self, from: usize, to: usize) -> Totals {
        self.contributions
            .iter()
            .filter(|c| (from..to).contains(&c.interval))
            .fold(Totals::default(), |acc, c| Totals {
                vmt: acc.vmt + c.vmt,
                vht: acc.vht + c.vht,
                vhd: acc.vhd + c.vhd,
            })
    }
}

/// One contribution per (segment, interval) from counts and speeds.
pub fn segment_report(
    method: Method,
    lengths: &[f64],
    positions: &[f64],
    counts: &SpaceTimeField,
    speeds: &SpaceTimeField,
    cfg: &MeasureConfig,
) -> PerfReport {
    let n = counts.n_intervals();
    let mut contributions = Vec::with_capacity(lengths.len() * n);
    let mut excluded = Vec::new();
    let mut gaps = Vec::new();
    for (p, &len) in lengths.iter().enumerate() {
        for i in 0..n {
            let Some(q) = counts.get(p, i) else {
                gaps.push((p, i));
                continue;
            };
            let mut c = Contribution {
                point: p,
                interval: i,
                position: positions[p],
                vmt: len * q,
                vht: 0.0,
                vhd: 0.0,
            };
            if q > 0.0 {
                match speeds.get(p, i) {
                    Some(v) if v > 0.0 => {
                        c.vht = len * q / v;
                        c.vhd = cfg.delay(len, q, v);
                    }
                    _ => excluded.push((p, i)),
                }
            }
            contributions.push(c);
        }
    }
    let mut r = PerfReport::from_contributions(method, contributions);
    r.excluded = excluded;
    r.coverage_gaps = gaps;
    r
}

/// Detector-only estimate: each VDS represents the stretch between the
/// midpoints to its neighbours.
pub fn traditional_report(
    counts: &SpaceTimeField,
    speeds: &SpaceTimeField,
    geom: &CorridorGeometry,
    cfg: &MeasureConfig,
) -> PerfReport {
    let segs = EvaluationPointSet::vds_segments(geom);
    let lengths: Vec<f64> = segs.points().iter().map(|p| p.span_length()).collect();
    segment_report(Method::Traditional, &lengths, &segs.positions(), counts, speeds, cfg)
}

/// Cell-based estimate from conflated flow (veh/hr) and conflated cell
/// travel time (hours) on the evaluation points.
pub fn hybrid_report(
    flow: &SpaceTimeField,
    cell_tt_hours: &SpaceTimeField,
    eps: &EvaluationPointSet,
    grid: &TimeGrid,
    cfg: &MeasureConfig,
    speed_cap_mph: f64,
) -> PerfReport {
    let n = flow.n_intervals();
    let counts = flow.map(crate::field::FieldKind::Count, |q| q * grid.step_hours());
    let mut speeds = SpaceTimeField::masked(crate::field::FieldKind::Speed, eps.len(), n);
    let mut capped = 0;
    for (k, pt) in eps.points().iter().enumerate() {
        for i in 0..n {
            if let Some(tt) = cell_tt_hours.get(k, i) {
                if let Ok(s) = cell_speed(tt * 3600.0, pt.span_length(), speed_cap_mph) {
                    capped += usize::from(s.capped);
                    speeds.set(k, i, s.mph);
                }
            }
        }
    }
    let lengths: Vec<f64> = eps.points().iter().map(|p| p.span_length()).collect();
    let mut r = segment_report(Method::Hybrid, &lengths, &eps.positions(), &counts, &speeds, cfg);
    r.capped = capped;
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub mae: f64,
    /// Percent.
    pub mape: f64,
    pub n: usize,
}

/// MAE over all pairs, MAPE (in percent) over pairs whose truth is positive.
pub fn error_metrics(estimate: &[f64], truth: &[f64]) -> Result<ErrorMetrics> {
    if estimate.len() != truth.len() {
        return Err(Error::Undefined(format!(
            "{} estimates vs {} truth values",
            estimate.len(),
            truth.len()
        )));
    }
    if estimate.is_empty() {
        return Err(Error::Undefined("no overlapping values".into()));
    }
    let mae = estimate.iter().zip(truth).map(|(e, t)| (e - t).abs()).sum::<f64>() / estimate.len() as f64;
    let rel: Vec<f64> = estimate
        .iter()
        .zip(truth)
        .filter(|(_, t)| **t > 0.0)
        .map(|(e, t)| (e - t).abs() / t)
        .collect();
    if rel.is_empty() {
        return Err(Error::Undefined("no positive truth values for MAPE".into()));
    }
    Ok(ErrorMetrics {
        mae,
        mape: 100.0 * rel.iter().sum::<f64>() / rel.len() as f64,
        n: estimate.len(),
    })
}

/// Error metrics over the entries present in both fields, restricted to
/// `points`.
pub fn field_error_metrics(estimate: &SpaceTimeField, truth: &SpaceTimeField, points: &[usize]) -> Result<ErrorMetrics> {
    let mut e = Vec::new();
    let mut t = Vec::new();
    for &p in points {
        for i in 0..estimate.n_intervals().min(truth.n_intervals()) {
            if let (Some(a), Some(b)) = (estimate.get(p, i), truth.get(p, i)) {
                e.push(a);
                t.push(b);
            }
        }
    }
    error_metrics(&e, &t)
}

/// Absolute percent error of `est` against `truth`; `None` when truth is 0.
pub fn percent_error(est: f64, truth: f64) -> Option<f64> {
    (truth > 0.0).then(|| 100.0 * (est - truth).abs() / truth)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub vmt: Option<f64>,
    pub vht: Option<f64>,
    pub vhd: Option<f64>,
}

/// Percentage-point reduction in absolute percent error going from the
/// traditional to the hybrid estimate, per measure.
pub fn improvement(traditional: &Totals, hybrid: &Totals, truth: &Totals) -> Improvement {
    let f = |t: f64, h: f64, g: f64| Some(percent_error(t, g)? - percent_error(h, g)?);
    Improvement {
        vmt: f(traditional.vmt, hybrid.vmt, truth.vmt),
        vht: f(traditional.vht, hybrid.vht, truth.vht),
        vhd: f(traditional.vhd, hybrid.vhd, truth.vhd),
    }
}
