use rand::Rng;
use rayon::prelude::*;

use super::ctm::SpeedHistory;
use super::{rng, Stream};
use crate::corridor::LinkDef;
use crate::error::{Error, Result};
use crate::ttfuse::LinkTravelTime;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec {
    /// Fraction of vehicles reporting, in `(0, 1]`.
    pub penetration: f64,
    /// Share of the link length at each end in which a probe must be seen.
    pub margin: f64,
    /// Seconds between position reports of one probe.
    pub observation_interval_s: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            penetration: 0.05,
            margin: 0.10,
            observation_interval_s: 0.2,
        }
    }
}

impl ProbeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.penetration > 0.0 && self.penetration <= 1.0) {
            return Err(Error::config("probes.penetration", "must lie in (0, 1]"));
        }
        if !(0.0..0.5).contains(&self.margin) {
            return Err(Error::config("probes.margin", "must lie in [0, 0.5)"));
        }
        if !(self.observation_interval_s > 0.0) {
            return Err(Error::config("probes.observation_interval", "must be positive"));
        }
        Ok(())
    }
}

/// Piecewise-linear trajectory `(t seconds, x mi)` of one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehiclePath {
    pub points: Vec<(f64, f64)>,
    /// Whether the vehicle left the corridor before the run ended.
    pub exited: bool,
}

impl VehiclePath {
    pub fn entry_time(&self) -> f64 {
        self.points[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn position_at(&self, t: f64) -> Option<f64> {
        if t < self.entry_time() || t > self.end_time() {
            return None;
        }
        let j = self.points.partition_point(|p| p.0 < t);
        if j == 0 {
            return Some(self.points[0].1);
        }
        let (t0, x0) = self.points[j - 1];
        let (t1, x1) = self.points[j];
        if t1 == t0 {
            return Some(x1);
        }
        Some(x0 + (x1 - x0) * (t - t0) / (t1 - t0))
    }

    /// First time the vehicle is at `x`.
    pub fn time_at(&self, x: f64) -> Option<f64> {
        let last = self.points[self.points.len() - 1].1;
        if x < self.points[0].1 || x > last {
            return None;
        }
        let j = self.points.partition_point(|p| p.1 < x);
        if j == 0 {
            return Some(self.points[0].0);
        }
        let (t0, x0) = self.points[j - 1];
        let (t1, x1) = self.points[j];
        Some(t0 + (t1 - t0) * (x - x0) / (x1 - x0))
    }
}

/// Moves one vehicle entering at `t_entry` through the speed history.
pub fn trace_vehicle(h: &SpeedHistory, t_entry: f64) -> VehiclePath {
    let mut t = t_entry;
    let mut x = 0.0;
    let mut cell = 0;
    let mut points = vec![(t, x)];
    let n_steps = h.n_steps();
    let mut step = (((t - h.t0_s) / h.dt_s).floor().max(0.0) as usize).min(n_steps);
    while step < n_steps {
        let step_end = h.t0_s + (step + 1) as f64 * h.dt_s;
        loop {
            let v = h.speed(step, cell) / 3600.0;
            let boundary = (cell + 1) as f64 * h.dx;
            let need = (boundary - x) / v;
            if t + need <= step_end {
                t += need;
                x = boundary;
                cell += 1;
                points.push((t, x));
                if cell == h.n_cells {
                    return VehiclePath { points, exited: true };
                }
            } else {
                x += v * (step_end - t);
                t = step_end;
                points.push((t, x));
                break;
            }
        }
        step += 1;
    }
    VehiclePath { points, exited: false }
}

/// Number of vehicles released by the entry curve. Vehicle `n` (1-based)
/// enters when the cumulative count reaches `n - 0.5`.
pub fn vehicle_count(h: &SpeedHistory) -> usize {
    (h.total_entries() + 0.5).floor() as usize
}

/// Traces every vehicle and maps each path through `f`, in vehicle order.
pub fn trace_vehicles<T, F>(h: &SpeedHistory, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &VehiclePath) -> T + Sync,
{
    (1..=vehicle_count(h))
        .into_par_iter()
        .filter_map(|n| h.entry_time(n as f64 - 0.5).map(|t| f(n, &trace_vehicle(h, t))))
        .collect()
}

/// One qualifying link traversal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub link: usize,
    pub minute: usize,
    pub travel_time_s: f64,
}

fn minute_of(mid_s: f64, n_minutes: usize) -> Option<usize> {
    let m = (mid_s / 60.0).floor();
    (m >= 0.0 && (m as usize) < n_minutes).then_some(m as usize)
}

/// Crossings as seen through periodic position reports: the first report
/// must fall in the first `margin` of the link and the last in the final
/// `margin`. The time between them is assigned to the minute of its midpoint.
pub fn observed_crossings(path: &VehiclePath, links: &[LinkDef], spec: &ProbeSpec, n_minutes: usize) -> Vec<Crossing> {
    let dt = spec.observation_interval_s;
    let t_in = path.entry_time();
    let obs = |k: f64| t_in + k * dt;
    let mut out = Vec::new();
    for (li, link) in links.iter().enumerate() {
        let Some(ta) = path.time_at(link.start) else { continue };
        let tb = path.time_at(link.end).unwrap_or(path.end_time());
        let k_first = ((ta - t_in) / dt).ceil();
        let k_last = ((tb - t_in) / dt).floor();
        if k_first > k_last {
            continue;
        }
        let (t_first, t_last) = (obs(k_first), obs(k_last));
        let (Some(x_first), Some(x_last)) = (path.position_at(t_first), path.position_at(t_last)) else {
            continue;
        };
        let m = spec.margin * link.length();
        if x_first > link.start + m || x_last < link.end - m || t_last <= t_first {
            continue;
        }
        if let Some(minute) = minute_of(0.5 * (t_first + t_last), n_minutes) {
            out.push(Crossing {
                link: li,
                minute,
                travel_time_s: t_last - t_first,
            });
        }
    }
    out
}

/// Exact traversals of links the vehicle completes.
pub fn exact_crossings(path: &VehiclePath, links: &[LinkDef], n_minutes: usize) -> Vec<Crossing> {
    links
        .iter()
        .enumerate()
        .filter_map(|(li, link)| {
            let ta = path.time_at(link.start)?;
            let tb = path.time_at(link.end)?;
            minute_of(0.5 * (ta + tb), n_minutes).map(|minute| Crossing {
                link: li,
                minute,
                travel_time_s: tb - ta,
            })
        })
        .collect()
}

/// Probe output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRun {
    pub records: Vec<LinkTravelTime>,
    pub vehicles: usize,
    pub probes: usize,
}

fn per_minute_means(crossings: impl Iterator<Item = Crossing>, links: &[LinkDef], n_minutes: usize) -> Vec<LinkTravelTime> {
    let mut sum = vec![vec![(0.0, 0u32); n_minutes]; links.len()];
    for c in crossings {
        let cell = &mut sum[c.link][c.minute];
        cell.0 += c.travel_time_s;
        cell.1 += 1;
    }
    let mut out = Vec::new();
    for (li, row) in sum.iter().enumerate() {
        for (m, &(s, n)) in row.iter().enumerate() {
            if n > 0 {
                out.push(LinkTravelTime {
                    link_id: links[li].id.clone(),
                    interval: m,
                    travel_time_s: s / n as f64,
                    probe_count: n,
                });
            }
        }
    }
    out
}

/// Marks each vehicle as a probe with the configured penetration and
/// reports per-minute mean link travel times. Minutes without a
/// qualifying probe are absent.
pub fn generate_probe_tts(
    h: &SpeedHistory,
    links: &[LinkDef],
    spec: &ProbeSpec,
    seed: u64,
    n_minutes: usize,
) -> Result<ProbeRun> {
    spec.validate()?;
    let n = vehicle_count(h);
    let mut r = rng(seed, Stream::Probes);
    let probes: Vec<usize> = (1..=n).filter(|_| r.random::<f64>() < spec.penetration).collect();
    let crossings: Vec<Vec<Crossing>> = probes
        .par_iter()
        .filter_map(|&v| h.entry_time(v as f64 - 0.5))
        .map(|t| observed_crossings(&trace_vehicle(h, t), links, spec, n_minutes))
        .collect();
    Ok(ProbeRun {
        records: per_minute_means(crossings.into_iter().flatten(), links, n_minutes),
        vehicles: n,
        probes: probes.len(),
    })
}

/// Full-population reference: every vehicle, exact crossing times.
pub fn crossing_oracle(h: &SpeedHistory, links: &[LinkDef], n_minutes: usize) -> Vec<LinkTravelTime> {
    let all = trace_vehicles(h, |_, p| exact_crossings(p, links, n_minutes));
    per_minute_means(all.into_iter().flatten(), links, n_minutes)
}
