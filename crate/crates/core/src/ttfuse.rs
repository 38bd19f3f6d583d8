//! Vendor link travel times spread over the evaluation-point spans.
//!
//! Interior evaluation points cut a link into parts. Each part's share of
//! the link travel time is proportional to the vehicles on it (conflated
//! density times part length). Parts are then re-cut at span boundaries and
//! summed per span, which conserves the total travel time along the corridor.

use crate::corridor::{CorridorGeometry, EvaluationPointSet, LinkDef};
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpaceTimeField};
use crate::units::SECONDS_PER_HOUR;

const POSITION_EPS: f64 = 1e-9;

/// One per-minute vendor record.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTravelTime {
    pub link_id: String,
    pub interval: usize,
    pub travel_time_s: f64,
    pub probe_count: u32,
}

/// Vendor blend weights, one per vendor, summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct VendorWeights(Vec<f64>);

impl VendorWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Parameter("no vendor weights".into()));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Parameter(format!("vendor weights must lie in [0, 1]: {weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("vendor weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn single() -> Self {
        Self(vec![1.0])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A piece of a link between consecutive cut points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPart {
    pub start: f64,
    pub end: f64,
    /// Evaluation point whose density represents the part.
    pub governing_point: usize,
}

impl LinkPart {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// The `G` evaluation points strictly inside the link cut it into `G + 1`
/// parts. A part is represented by the point at its upstream end; the first
/// part uses the point nearest the link start.
pub fn link_parts(link: &LinkDef, eps: &EvaluationPointSet) -> Vec<LinkPart> {
    let interior: Vec<(usize, f64)> = eps
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.position > link.start + POSITION_EPS && p.position < link.end - POSITION_EPS)
        .map(|(k, p)| (k, p.position))
        .collect();
    let mut parts = Vec::with_capacity(interior.len() + 1);
    let mut start = link.start;
    let mut governing = eps.nearest(link.start);
    for &(k, x) in &interior {
        parts.push(LinkPart {
            start,
            end: x,
            governing_point: governing,
        });
        start = x;
        governing = k;
    }
    parts.push(LinkPart {
        start,
        end: link.end,
        governing_point: governing,
    });
    parts
}

/// Vehicles on each part at `interval`: density (veh/mi) at the governing
/// point times part length.
pub fn part_vehicle_counts(density: &SpaceTimeField, parts: &[LinkPart], interval: usize) -> Vec<Option<f64>> {
    parts
        .iter()
        .map(|p| density.get(p.governing_point, interval).map(|k| k * p.length()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub part_tt: Vec<f64>,
    /// Counts were unusable and the split fell back to part lengths.
    pub length_fallback: bool,
}

/// `tt_part = TT * c_part / sum(c)`; when counts are missing or sum to zero
/// the split is proportional to part length instead.
pub fn distribute_link_tt(tt: f64, counts: &[Option<f64>], lengths: &[f64]) -> Distribution {
    assert_eq!(counts.len(), lengths.len());
    let usable: Option<Vec<f64>> = counts.iter().copied().collect();
    if let Some(c) = usable {
        let total: f64 = c.iter().sum();
        if total > 0.0 {
            return Distribution {
                part_tt: c.iter().map(|ci| tt * ci / total).collect(),
                length_fallback: false,
            };
        }
    }
    let total: f64 = lengths.iter().sum();
    Distribution {
        part_tt: lengths.iter().map(|l| tt * l / total).collect(),
        length_fallback: true,
    }
}

/// A part with its travel time (seconds), or `None` where the link had no data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPart {
    pub start: f64,
    pub end: f64,
    pub tt_s: Option<f64>,
}

/// Sums part travel times over each span, cutting parts pro rata by length.
/// A span is masked unless every stretch of it is covered by a timed part.
pub fn stitch_cell_tt(parts: &[TimedPart], eps: &EvaluationPointSet) -> Vec<Option<f64>> {
    eps.points()
        .iter()
        .map(|pt| {
            let (a, b) = pt.span;
            let mut tt = 0.0;
            let mut covered = 0.0;
            let mut missing = false;
            let first = parts.partition_point(|p| p.end <= a);
            for p in parts[first..].iter().take_while(|p| p.start < b) {
                let overlap = p.end.min(b) - p.start.max(a);
                if overlap <= 0.0 {
                    continue;
                }
                match p.tt_s {
                    Some(t) => {
                        tt += t * overlap / (p.end - p.start);
                        covered += overlap;
                    }
                    None => missing = true,
                }
            }
            (!missing && covered >= (b - a) - POSITION_EPS).then_some(tt)
        })
        .collect()
}

/// Weighted sum over the vendors present at a cell, renormalising the
/// weights of the vendors that are there.
pub fn blend_vendors(per_vendor: &[Vec<Option<f64>>], weights: &VendorWeights) -> Result<Vec<Option<f64>>> {
    if per_vendor.len() != weights.as_slice().len() {
        return Err(Error::Parameter(format!(
            "{} vendor series but {} weights",
            per_vendor.len(),
            weights.as_slice().len()
        )));
    }
    let n = per_vendor.first().map_or(0, Vec::len);
    Ok((0..n)
        .map(|x| {
            let mut sum = 0.0;
            let mut wsum = 0.0;
            for (series, &w) in per_vendor.iter().zip(weights.as_slice()) {
                if let Some(tt) = series[x] {
                    sum += w * tt;
                    wsum += w;
                }
            }
            (wsum > 0.0).then(|| sum / wsum)
        })
        .collect())
}

pub const DEFAULT_SPEED_CAP_MPH: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSpeed {
    pub mph: f64,
    pub capped: bool,
}

/// `span / tt`, limited to `cap_mph`.
pub fn cell_speed(tt_s: f64, span_mi: f64, cap_mph: f64) -> Result<CellSpeed> {
    if !(tt_s > 0.0) {
        return Err(Error::Parameter(format!("cell travel time must be positive, got {tt_s} s")));
    }
    let v = span_mi / (tt_s / SECONDS_PER_HOUR);
    Ok(if v > cap_mph {
        CellSpeed { mph: cap_mph, capped: true }
    } else {
        CellSpeed { mph: v, capped: false }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillFlag {
    Observed,
    Interpolated,
    FreeFlow,
}

/// Fills missing vendor minutes: linear interpolation between the nearest
/// observations on both sides within `horizon` intervals, the single nearest
/// observation when only one side is in reach, otherwise `free_flow_tt_s`.
pub fn fill_missing(series: &[Option<f64>], horizon: usize, free_flow_tt_s: f64) -> (Vec<f64>, Vec<FillFlag>) {
    let n = series.len();
    let mut out = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for i in 0..n {
        if let Some(v) = series[i] {
            out.push(v);
            flags.push(FillFlag::Observed);
            continue;
        }
        let before = (1..=horizon.min(i)).find_map(|d| series[i - d].map(|v| (d, v)));
        let after = (1..=horizon).take_while(|d| i + d < n).find_map(|d| series[i + d].map(|v| (d, v)));
        let (v, flag) = match (before, after) {
            (Some((db, vb)), Some((da, va))) => {
                let w = db as f64 / (db + da) as f64;
                (vb + w * (va - vb), FillFlag::Interpolated)
            }
            (Some((_, v)), None) | (None, Some((_, v))) => (v, FillFlag::Interpolated),
            (None, None) => (free_flow_tt_s, FillFlag::FreeFlow),
        };
        out.push(v);
        flags.push(flag);
    }
    (out, flags)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtFuseParams {
    pub speed_cap_mph: f64,
    pub fill_horizon: usize,
    /// Speed used to build free-flow travel times for unfillable gaps.
    pub fallback_speed_mph: f64,
}

/// Per-link, per-interval vendor travel time in seconds (`None` = absent).
#[derive(Debug, Clone, PartialEq)]
pub struct VendorData {
    pub vendor_id: String,
    /// `[link][interval]`, links in corridor order.
    pub tt_s: Vec<Vec<Option<f64>>>,
}

impl VendorData {
    pub fn from_records(vendor_id: &str, records: &[LinkTravelTime], geom: &CorridorGeometry, n_intervals: usize) -> Self {
        let mut tt_s = vec![vec![None; n_intervals]; geom.links().len()];
        for r in records {
            if let Some(l) = geom.link_index(&r.link_id) {
                if r.interval < n_intervals && r.travel_time_s > 0.0 {
                    tt_s[l][r.interval] = Some(r.travel_time_s);
                }
            }
        }
        Self {
            vendor_id: vendor_id.to_string(),
            tt_s,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FusionFlags {
    pub interpolated: usize,
    pub free_flow: usize,
    pub length_fallback: usize,
}

/// Cell travel times (hours) on the evaluation points for one vendor.
pub fn conflate_vendor(
    geom: &CorridorGeometry,
    eps: &EvaluationPointSet,
    density: &SpaceTimeField,
    vendor: &VendorData,
    params: &TtFuseParams,
) -> (SpaceTimeField, FusionFlags) {
    let n = density.n_intervals();
    let mut flags = FusionFlags::default();
    let links: Vec<&LinkDef> = geom.links().iter().filter(|l| l.vendor_id == vendor.vendor_id).collect();
    let filled: Vec<Vec<f64>> = geom
        .links()
        .iter()
        .zip(&vendor.tt_s)
        .filter(|(l, _)| l.vendor_id == vendor.vendor_id)
        .map(|(l, s)| {
            let ff = l.length() / params.fallback_speed_mph * SECONDS_PER_HOUR;
            let (v, f) = fill_missing(s, params.fill_horizon, ff);
            flags.interpolated += f.iter().filter(|x| **x == FillFlag::Interpolated).count();
            flags.free_flow += f.iter().filter(|x| **x == FillFlag::FreeFlow).count();
            v
        })
        .collect();
    let parts: Vec<Vec<LinkPart>> = links.iter().map(|l| link_parts(l, eps)).collect();
    let mut out = SpaceTimeField::masked(FieldKind::TravelTime, eps.len(), n);
    for i in 0..n {
        let mut timed = Vec::new();
        for (l, link_parts) in parts.iter().enumerate() {
            let counts = part_vehicle_counts(density, link_parts, i);
            let lengths: Vec<f64> = link_parts.iter().map(LinkPart::length).collect();
            let d = distribute_link_tt(filled[l][i], &counts, &lengths);
            if d.length_fallback {
                flags.length_fallback += 1;
            }
            timed.extend(link_parts.iter().zip(&d.part_tt).map(|(p, &t)| TimedPart {
                start: p.start,
                end: p.end,
                tt_s: Some(t),
            }));
        }
        for (k, tt) in stitch_cell_tt(&timed, eps).into_iter().enumerate() {
            out.put(k, i, tt.map(|s| s / SECONDS_PER_HOUR));
        }
    }
    (out, flags)
}
