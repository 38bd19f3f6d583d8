//! Linear-referenced corridor geometry and the evaluation points (VDS
//! locations plus cell boundaries) that the hybrid method works on.
//!
//! Positions are mileposts measured from the upstream end of the corridor.

use crate::error::{Error, Result};
use crate::units::feet_to_miles;

const POSITION_EPS: f64 = 1e-9;

/// A detector station: the co-located per-lane loops at one milepost.
#[derive(Debug, Clone, PartialEq)]
pub struct VdsLocation {
    pub id: String,
    pub position: f64,
    pub lanes: u32,
}

/// A stretch of freeway for which a vendor reports travel times.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDef {
    pub id: String,
    pub start: f64,
    pub end: f64,
    pub vendor_id: String,
}

impl LinkDef {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Lane count from `start` until the next section begins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneSection {
    pub start: f64,
    pub lanes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorridorGeometry {
    length: f64,
    lane_sections: Vec<LaneSection>,
    vds: Vec<VdsLocation>,
    links: Vec<LinkDef>,
    cell_spacing: f64,
    suppression_radius_ft: f64,
}

impl CorridorGeometry {
    /// Validates and builds a geometry. `lane_sections` must start at 0.
    pub fn new(
        length: f64,
        lane_sections: Vec<LaneSection>,
        vds: Vec<VdsLocation>,
        links: Vec<LinkDef>,
        cell_spacing: f64,
        suppression_radius_ft: f64,
    ) -> Result<Self> {
        let geom = Self {
            length,
            lane_sections,
            vds,
            links,
            cell_spacing,
            suppression_radius_ft,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Corridor with a single lane count throughout.
    pub fn uniform(
        length: f64,
        lanes: u32,
        vds: Vec<VdsLocation>,
        links: Vec<LinkDef>,
        cell_spacing: f64,
        suppression_radius_ft: f64,
    ) -> Result<Self> {
        Self::new(
            length,
            vec![LaneSection { start: 0.0, lanes }],
            vds,
            links,
            cell_spacing,
            suppression_radius_ft,
        )
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Geometry(m));
        if !(self.length > 0.0) || !self.length.is_finite() {
            return bad(format!("length must be positive, got {}", self.length));
        }
        if !(self.cell_spacing > 0.0) {
            return bad(format!("cell spacing must be positive, got {}", self.cell_spacing));
        }
        if !(self.suppression_radius_ft >= 0.0) {
            return bad("suppression radius must be non-negative".into());
        }
        match self.lane_sections.first() {
            Some(s) if s.start == 0.0 => {}
            _ => return bad("lane sections must start at milepost 0".into()),
        }
        for w in self.lane_sections.windows(2) {
            if w[1].start <= w[0].start || w[1].start >= self.length {
                return bad("lane sections must be strictly increasing inside the corridor".into());
            }
        }
        if self.lane_sections.iter().any(|s| s.lanes == 0) {
            return bad("lane counts must be at least 1".into());
        }
        if self.vds.is_empty() {
            return bad("at least one VDS is required".into());
        }
        for v in &self.vds {
            if v.lanes == 0 {
                return bad(format!("VDS {} has no lanes", v.id));
            }
            if !(0.0..=self.length).contains(&v.position) {
                return bad(format!("VDS {} at {} mi lies outside [0, {}]", v.id, v.position, self.length));
            }
        }
        for w in self.vds.windows(2) {
            if w[1].position <= w[0].position {
                return bad(format!(
                    "VDS positions must be strictly increasing ({} at {} then {} at {})",
                    w[0].id, w[0].position, w[1].id, w[1].position
                ));
            }
        }
        if !self.links.is_empty() {
            for l in &self.links {
                if !(l.end > l.start) {
                    return bad(format!("link {} has end <= start", l.id));
                }
            }
            if self.links[0].start.abs() > POSITION_EPS {
                return bad("links must start at milepost 0".into());
            }
            for w in self.links.windows(2) {
                if (w[1].start - w[0].end).abs() > POSITION_EPS {
                    return bad(format!("links {} and {} leave a gap or overlap", w[0].id, w[1].id));
                }
            }
            let last = self.links.last().unwrap();
            if (last.end - self.length).abs() > POSITION_EPS {
                return bad(format!("links end at {} but corridor is {} mi", last.end, self.length));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn vds(&self) -> &[VdsLocation] {
        &self.vds
    }

    pub fn links(&self) -> &[LinkDef] {
        &self.links
    }

    pub fn lane_sections(&self) -> &[LaneSection] {
        &self.lane_sections
    }

    pub fn cell_spacing(&self) -> f64 {
        self.cell_spacing
    }

    pub fn suppression_radius_ft(&self) -> f64 {
        self.suppression_radius_ft
    }

    pub fn suppression_radius_mi(&self) -> f64 {
        feet_to_miles(self.suppression_radius_ft)
    }

    pub fn lanes_at(&self, x: f64) -> u32 {
        self.lane_sections
            .iter()
            .take_while(|s| s.start <= x)
            .last()
            .map_or(self.lane_sections[0].lanes, |s| s.lanes)
    }

    pub fn vds_index(&self, id: &str) -> Option<usize> {
        self.vds.iter().position(|v| v.id == id)
    }

    pub fn link_index(&self, id: &str) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    /// Index into the corridor's VDS list.
    Vds(usize),
    CellBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationPoint {
    pub position: f64,
    pub kind: PointKind,
    /// Coverage `[from, to)` between the midpoints to the neighbouring points.
    pub span: (f64, f64),
}

impl EvaluationPoint {
    pub fn span_length(&self) -> f64 {
        self.span.1 - self.span.0
    }

    pub fn is_vds(&self) -> bool {
        matches!(self.kind, PointKind::Vds(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationPointSet {
    points: Vec<EvaluationPoint>,
    length: f64,
}

impl EvaluationPointSet {
    /// Builds spans midpoint-to-midpoint; the end spans run to the corridor ends.
    pub fn from_sorted(raw: Vec<(f64, PointKind)>, length: f64) -> Self {
        debug_assert!(raw.windows(2).all(|w| w[0].0 < w[1].0));
        let n = raw.len();
        let mut points = Vec::with_capacity(n);
        for (k, &(position, kind)) in raw.iter().enumerate() {
            let from = if k == 0 { 0.0 } else { 0.5 * (raw[k - 1].0 + position) };
            let to = if k + 1 == n { length } else { 0.5 * (position + raw[k + 1].0) };
            points.push(EvaluationPoint {
                position,
                kind,
                span: (from, to),
            });
        }
        Self { points, length }
    }

    /// Traditional-method segmentation: one span per VDS.
    pub fn vds_segments(geom: &CorridorGeometry) -> Self {
        let raw = geom
            .vds()
            .iter()
            .enumerate()
            .map(|(j, v)| (v.position, PointKind::Vds(j)))
            .collect();
        Self::from_sorted(raw, geom.length())
    }

    pub fn points(&self) -> &[EvaluationPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn corridor_length(&self) -> f64 {
        self.length
    }

    pub fn positions(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.points.iter().filter(|p| !p.is_vds()).count()
    }

    /// Index of the point whose position is closest to `x` (lower index on ties).
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (k, p) in self.points.iter().enumerate() {
            if (p.position - x).abs() < (self.points[best].position - x).abs() {
                best = k;
            }
        }
        best
    }

    /// Index of the point whose span contains `x`.
    pub fn span_containing(&self, x: f64) -> usize {
        let k = self.points.partition_point(|p| p.span.1 <= x);
        k.min(self.points.len() - 1)
    }
}

/// Cell boundaries every `cell_spacing` over `[0, length)`, with any candidate
/// within the suppression radius of a VDS replaced by the VDS itself.
pub fn derive_evaluation_points(geom: &CorridorGeometry) -> EvaluationPointSet {
    let radius = geom.suppression_radius_mi();
    let spacing = geom.cell_spacing();
    let mut raw: Vec<(f64, PointKind)> = geom
        .vds()
        .iter()
        .enumerate()
        .map(|(j, v)| (v.position, PointKind::Vds(j)))
        .collect();
    let mut k = 0u64;
    loop {
        let x = k as f64 * spacing;
        if x >= geom.length() - POSITION_EPS {
            break;
        }
        let suppressed = geom
            .vds()
            .iter()
            .any(|v| (v.position - x).abs() <= radius + POSITION_EPS);
        if !suppressed {
            raw.push((x, PointKind::CellBoundary));
        }
        k += 1;
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    EvaluationPointSet::from_sorted(raw, geom.length())
}

pub fn span_lengths(eps: &EvaluationPointSet) -> Vec<f64> {
    eps.points().iter().map(EvaluationPoint::span_length).collect()
}

/// VDS mileposts of the default 16-mile acceptance corridor. Spacings fall
/// between 0.3 and 0.8 mi; nine stations sit within 200 ft of a quarter-mile
/// candidate, which leaves 55 cell boundaries.
pub const DEFAULT_VDS_POSITIONS: [f64; 33] = [
    0.25, 0.72, 1.10, 1.48, 2.05, 2.48, 2.83, 3.40, 3.95, 4.30, 4.78, 5.35, 5.70, 6.18, 6.62,
    7.05, 7.60, 8.00, 8.45, 9.05, 9.48, 9.92, 10.30, 10.85, 11.30, 11.70, 12.25, 12.80, 13.15,
    13.73, 14.20, 14.85, 15.55,
];

/// Vendor link boundaries of the default corridor (links of 0.5 to 1.5 mi).
pub const DEFAULT_LINK_BOUNDARIES: [f64; 17] = [
    0.0, 0.9, 2.1, 2.7, 3.9, 5.2, 6.0, 7.3, 8.1, 9.0, 10.4, 11.0, 12.2, 13.5, 14.3, 15.1, 16.0,
];

pub const DEFAULT_LANES: u32 = 6;

/// The 16-mile, 6-lane, 33-VDS corridor used by the acceptance scenarios.
pub fn default_corridor() -> CorridorGeometry {
    let vds = DEFAULT_VDS_POSITIONS
        .iter()
        .enumerate()
        .map(|(j, &position)| VdsLocation {
            id: format!("vds{:02}", j + 1),
            position,
            lanes: DEFAULT_LANES,
        })
        .collect();
    CorridorGeometry::uniform(16.0, DEFAULT_LANES, vds, links_from_boundaries(&DEFAULT_LINK_BOUNDARIES, "A"), 0.25, 200.0)
        .expect("default corridor is valid")
}

pub fn links_from_boundaries(bounds: &[f64], vendor: &str) -> Vec<LinkDef> {
    bounds
        .windows(2)
        .enumerate()
        .map(|(k, w)| LinkDef {
            id: format!("link{:02}", k + 1),
            start: w[0],
            end: w[1],
            vendor_id: vendor.to_string(),
        })
        .collect()
}
