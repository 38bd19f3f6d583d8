use rand::Rng;
use rand_distr::StandardNormal;

use super::ctm::GroundTruth;
use super::{rng, Stream};
use crate::corridor::CorridorGeometry;
use crate::detector::{DetectorSample, GFactorSet};
use crate::error::{Error, Result};
use crate::units::FEET_PER_MILE;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorNoise {
    /// Relative standard deviation of lane counts.
    pub count_sigma: f64,
    /// Standard deviation of the per-sample effective vehicle length, ft.
    pub length_sigma_ft: f64,
}

impl Default for DetectorNoise {
    fn default() -> Self {
        Self {
            count_sigma: 0.05,
            length_sigma_ft: 2.0,
        }
    }
}

impl DetectorNoise {
    pub fn none() -> Self {
        Self {
            count_sigma: 0.0,
            length_sigma_ft: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.count_sigma >= 0.0) {
            return Err(Error::config("detectors.count_sigma", "must be non-negative"));
        }
        if !(self.length_sigma_ft >= 0.0) {
            return Err(Error::config("detectors.length_sigma", "must be non-negative"));
        }
        Ok(())
    }
}

/// Fine cell of the ground truth that holds each VDS.
fn vds_cells(truth: &GroundTruth, geom: &CorridorGeometry) -> Vec<usize> {
    geom.vds().iter().map(|v| truth.cell_of(v.position)).collect()
}

/// Per-lane counts and occupancies for every VDS and minute of the window.
/// Flow is shared equally among lanes; occupancy is lane density times a
/// sampled effective length.
pub fn emulate_detectors(
    truth: &GroundTruth,
    geom: &CorridorGeometry,
    g_true: &GFactorSet,
    noise: &DetectorNoise,
    seed: u64,
) -> Result<Vec<DetectorSample>> {
    noise.validate()?;
    let mut r = rng(seed, Stream::Detectors);
    let step_h = truth.window.step_hours();
    let mut out = Vec::new();
    for (vds, cell) in geom.vds().iter().zip(vds_cells(truth, geom)) {
        let lanes = vds.lanes as usize;
        if g_true.as_slice().len() < lanes {
            return Err(Error::config(
                "detectors.g_true",
                format!("{} lanes at {} but only {} g-factors", lanes, vds.id, g_true.as_slice().len()),
            ));
        }
        for i in 0..truth.window.n_intervals() {
            let q = truth.flow.get(cell, i).unwrap_or(0.0);
            let k = truth.density.get(cell, i).unwrap_or(0.0);
            for lane in 0..lanes {
                let zc: f64 = r.sample(StandardNormal);
                let zg: f64 = r.sample(StandardNormal);
                let count = (q * step_h / lanes as f64 * (1.0 + noise.count_sigma * zc)).max(0.0);
                let g = (g_true.lane(lane) + noise.length_sigma_ft * zg).max(0.0);
                let occupancy = (k / lanes as f64 * g / FEET_PER_MILE).clamp(0.0, 1.0);
                out.push(DetectorSample {
                    vds_id: vds.id.clone(),
                    lane,
                    interval: i,
                    count,
                    occupancy,
                });
            }
        }
    }
    Ok(out)
}

/// Space-mean speed of the fine cell holding each VDS, `[vds][minute]`.
pub fn true_vds_speeds(truth: &GroundTruth, geom: &CorridorGeometry) -> Vec<Vec<f64>> {
    vds_cells(truth, geom)
        .into_iter()
        .map(|c| (0..truth.window.n_intervals()).map(|i| truth.speed.get(c, i).unwrap_or(0.0)).collect())
        .collect()
}

/// Flow of the fine cell holding each VDS, veh/hr, `[vds][minute]`.
pub fn true_vds_flows(truth: &GroundTruth, geom: &CorridorGeometry) -> Vec<Vec<f64>> {
    vds_cells(truth, geom)
        .into_iter()
        .map(|c| (0..truth.window.n_intervals()).map(|i| truth.flow.get(c, i).unwrap_or(0.0)).collect())
        .collect()
}
