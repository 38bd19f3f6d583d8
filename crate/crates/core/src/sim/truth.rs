use super::ctm::{GroundTruth, SpeedHistory};
use super::vehicles::{trace_vehicles, VehiclePath};
use crate::field::FieldKind;
use crate::measures::{segment_report, MeasureConfig, Method, PerfReport, Totals};

/// VMT/VHT/VHD evaluated on the fine simulation cells from space-mean speeds.
pub fn ground_truth_measures(truth: &GroundTruth, cfg: &MeasureConfig) -> PerfReport {
    let n = truth.n_cells();
    let counts = truth.flow.map(FieldKind::Count, |q| q * truth.window.step_hours());
    let lengths = vec![truth.dx; n];
    let positions: Vec<f64> = (0..n).map(|i| truth.cell_midpoint(i)).collect();
    segment_report(Method::GroundTruth, &lengths, &positions, &counts, &truth.speed, cfg)
}

fn path_totals(path: &VehiclePath, from_s: f64, to_s: f64, cfg: &MeasureConfig) -> Totals {
    let mut t = Totals::default();
    for w in path.points.windows(2) {
        let ((t0, x0), (t1, x1)) = (w[0], w[1]);
        let (a, b) = (t0.max(from_s), t1.min(to_s));
        if b <= a || t1 <= t0 {
            continue;
        }
        let dist = (x1 - x0) * (b - a) / (t1 - t0);
        let hours = (b - a) / 3600.0;
        t.vmt += dist;
        t.vht += hours;
        let delay = hours - dist / cfg.threshold_mph;
        t.vhd += if cfg.clamp_delay { delay.max(0.0) } else { delay };
    }
    t
}

/// Sums of per-vehicle distance and time inside the corridor during the
/// first `n_minutes` of the analysis window. Delay is accumulated piece by
/// piece along each trajectory.
pub fn trajectory_measures(history: &SpeedHistory, n_minutes: usize, cfg: &MeasureConfig) -> Totals {
    let to_s = n_minutes as f64 * 60.0;
    trace_vehicles(history, |_, p| path_totals(p, 0.0, to_s, cfg))
        .into_iter()
        .fold(Totals::default(), Totals::add)
}
