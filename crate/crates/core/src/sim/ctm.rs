use rand::Rng;
use rand_distr::StandardNormal;

use super::fd::FundamentalDiagram;
use super::scenario::ScenarioSpec;
use super::{rng, Stream};
use crate::corridor::CorridorGeometry;
use crate::error::{Error, Result};
use crate::field::{FieldKind, SpaceTimeField};
use crate::grid::TimeGrid;
use crate::units::SECONDS_PER_HOUR;

/// Lowest speed reported for an occupied cell, mph.
pub const MIN_SPEED_MPH: f64 = 0.01;

/// Discretization of the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    /// Target cell length, mi. The corridor is split into the fewest equal
    /// cells no longer than this.
    pub dx: f64,
    /// Step, seconds. Must divide one minute.
    pub dt_s: f64,
    /// Minutes simulated before the analysis window opens.
    pub warmup_min: usize,
}

impl Default for SimGrid {
    fn default() -> Self {
        Self {
            dx: 0.05,
            dt_s: 2.0,
            warmup_min: 20,
        }
    }
}

impl SimGrid {
    pub fn validate(&self, fd: &FundamentalDiagram) -> Result<()> {
        if !(self.dx > 0.0) || !self.dx.is_finite() {
            return Err(Error::config("simulation.cell_length", "must be positive"));
        }
        if !(self.dt_s > 0.0) || (60.0 / self.dt_s).fract() != 0.0 {
            return Err(Error::config(
                "simulation.time_step",
                format!("must divide one minute, got {} s", self.dt_s),
            ));
        }
        let dt_h = self.dt_s / SECONDS_PER_HOUR;
        let fastest = fd.free_flow_speed.max(fd.wave_speed);
        let reach = fastest * dt_h;
        if reach > self.dx * (1.0 + 1e-12) {
            return Err(Error::Cfl {
                v_ff: fastest,
                reach,
                dx: self.dx,
            });
        }
        Ok(())
    }

    pub fn steps_per_minute(&self) -> usize {
        (60.0 / self.dt_s).round() as usize
    }
}

/// Per-step cell speeds kept for vehicle tracing. Times are seconds
/// relative to the start of the analysis window; step 0 starts at
/// `-warmup`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedHistory {
    pub dx: f64,
    pub dt_s: f64,
    pub n_cells: usize,
    pub t0_s: f64,
    /// `[step * n_cells + cell]`, mph.
    pub speeds: Vec<f64>,
    /// Cumulative vehicles entered at each step boundary (`n_steps + 1` values).
    pub entries: Vec<f64>,
}

impl SpeedHistory {
    /// Uniform speed everywhere, with vehicles entering at `rate` veh/hr.
    pub fn constant(length: f64, dx: f64, dt_s: f64, t0_s: f64, n_steps: usize, speed: f64, rate: f64) -> Self {
        let n_cells = (length / dx - 1e-9).ceil().max(1.0) as usize;
        let dx = length / n_cells as f64;
        let per_step = rate * dt_s / SECONDS_PER_HOUR;
        Self {
            dx,
            dt_s,
            n_cells,
            t0_s,
            speeds: vec![speed; n_steps * n_cells],
            entries: (0..=n_steps).map(|s| s as f64 * per_step).collect(),
        }
    }

    pub fn n_steps(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn length(&self) -> f64 {
        self.dx * self.n_cells as f64
    }

    pub fn end_s(&self) -> f64 {
        self.t0_s + self.n_steps() as f64 * self.dt_s
    }

    pub fn speed(&self, step: usize, cell: usize) -> f64 {
        self.speeds[step * self.n_cells + cell]
    }

    pub fn total_entries(&self) -> f64 {
        self.entries[self.entries.len() - 1]
    }

    /// Time at which the cumulative entry count reaches `n`.
    pub fn entry_time(&self, n: f64) -> Option<f64> {
        if n > self.total_entries() || n <= self.entries[0] {
            return None;
        }
        let s = self.entries.partition_point(|&e| e < n) - 1;
        let (e0, e1) = (self.entries[s], self.entries[s + 1]);
        Some(self.t0_s + self.dt_s * (s as f64 + (n - e0) / (e1 - e0)))
    }
}

/// Vehicle bookkeeping over the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservationLog {
    pub entered: f64,
    pub exited: f64,
    pub stored: f64,
    /// Vehicles still waiting at the entrance.
    pub queued: f64,
    /// Largest per-step `|stored' - stored - in + out|` relative to the
    /// vehicles entered so far (at least one vehicle).
    pub max_relative_residual: f64,
}

/// Ground truth of one run on the fine grid, per minute of the analysis window.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub scenario: String,
    pub seed: u64,
    pub window: TimeGrid,
    pub dx: f64,
    pub lanes: Vec<u32>,
    /// Cell outflow, veh/hr.
    pub flow: SpaceTimeField,
    pub speed: SpaceTimeField,
    /// veh/mi, all lanes.
    pub density: SpaceTimeField,
    pub history: SpeedHistory,
    pub conservation: ConservationLog,
}

impl GroundTruth {
    pub fn n_cells(&self) -> usize {
        self.lanes.len()
    }

    pub fn cell_midpoint(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.dx
    }

    pub fn cell_of(&self, x: f64) -> usize {
        ((x / self.dx).floor().max(0.0) as usize).min(self.n_cells() - 1)
    }
}

/// Integrates the cell-transmission model for one scenario and seed.
pub fn run_ground_truth(
    geom: &CorridorGeometry,
    scenario: &ScenarioSpec,
    fd: &FundamentalDiagram,
    seed: u64,
    grid: &SimGrid,
    demand_noise: f64,
) -> Result<GroundTruth> {
    fd.validate()?;
    grid.validate(fd)?;
    scenario.validate(grid.warmup_min as f64)?;
    if !(demand_noise >= 0.0) {
        return Err(Error::config("simulation.demand_noise", "must be non-negative"));
    }

    let length = geom.length();
    let n = (length / grid.dx - 1e-9).ceil().max(1.0) as usize;
    let dx = length / n as f64;
    let dt_h = grid.dt_s / SECONDS_PER_HOUR;
    let lanes: Vec<u32> = (0..n).map(|i| geom.lanes_at((i as f64 + 0.5) * dx)).collect();
    let qmax: Vec<f64> = lanes.iter().map(|&l| fd.capacity() * l as f64).collect();
    let kjam: Vec<f64> = lanes.iter().map(|&l| fd.jam_density * l as f64).collect();

    let bottleneck = match &scenario.bottleneck {
        Some(b) => {
            let boundary = (b.position / dx).round() as usize;
            if boundary == 0 || boundary >= n {
                return Err(Error::config(
                    format!("scenario.{}.bottleneck.position", scenario.name),
                    format!("{} mi is not an interior point of the corridor", b.position),
                ));
            }
            let cap = (1.0 - b.capacity_drop) * qmax[boundary - 1].min(qmax[boundary]);
            Some((boundary, cap, b))
        }
        None => None,
    };

    let spm = grid.steps_per_minute();
    let warm_steps = grid.warmup_min * spm;
    let n_steps = (grid.warmup_min + scenario.duration_min) * spm;
    let t0_s = -(grid.warmup_min as f64) * 60.0;
    let mut demand_rng = rng(seed, Stream::Demand);

    let mut k = vec![0.0; n];
    let mut f = vec![0.0; n + 1];
    let mut queue = 0.0;
    let mut log = ConservationLog::default();
    let mut speeds = Vec::with_capacity(n_steps * n);
    let mut entries = Vec::with_capacity(n_steps + 1);
    entries.push(0.0);

    let window = TimeGrid::minutes(scenario.start, scenario.duration_min)?;
    let mut flow = SpaceTimeField::masked(FieldKind::Flow, n, scenario.duration_min);
    let mut speed = SpaceTimeField::masked(FieldKind::Speed, n, scenario.duration_min);
    let mut density = SpaceTimeField::masked(FieldKind::Density, n, scenario.duration_min);
    let mut q_acc = vec![0.0; n];
    let mut k_acc = vec![0.0; n];

    let mut factor = 1.0;
    for step in 0..n_steps {
        if step % spm == 0 && demand_noise > 0.0 {
            let z: f64 = demand_rng.sample(StandardNormal);
            factor = (1.0 + demand_noise * z).max(0.0);
        }
        let t_min = (t0_s + step as f64 * grid.dt_s) / 60.0;
        let demand = scenario.demand_at(t_min) * factor;

        let send = |i: usize, k: &[f64]| (fd.free_flow_speed * k[i]).min(qmax[i]);
        let recv = |i: usize, k: &[f64]| qmax[i].min(fd.wave_speed * (kjam[i] - k[i])).max(0.0);

        f[0] = (demand + queue / dt_h).min(recv(0, &k));
        for b in 1..n {
            let mut flux = send(b - 1, &k).min(recv(b, &k));
            if let Some((at, cap, spec)) = bottleneck {
                if at == b && spec.active_at(t_min) {
                    flux = flux.min(cap);
                }
            }
            f[b] = flux;
        }
        f[n] = send(n - 1, &k);

        let stored_before: f64 = k.iter().sum::<f64>() * dx;
        let k_before = k.clone();
        for i in 0..n {
            k[i] += (f[i] - f[i + 1]) * dt_h / dx;
        }
        queue = (queue + (demand - f[0]) * dt_h).max(0.0);
        let inflow = f[0] * dt_h;
        let outflow = f[n] * dt_h;
        log.entered += inflow;
        log.exited += outflow;
        let stored_after: f64 = k.iter().sum::<f64>() * dx;
        let residual = (stored_after - stored_before - inflow + outflow).abs() / log.entered.max(1.0);
        log.max_relative_residual = log.max_relative_residual.max(residual);
        entries.push(log.entered);

        for i in 0..n {
            let v = if k_before[i] * dx > 1e-9 {
                (f[i + 1] / k_before[i]).clamp(MIN_SPEED_MPH, fd.free_flow_speed)
            } else {
                fd.free_flow_speed
            };
            speeds.push(v);
        }

        if step >= warm_steps {
            for i in 0..n {
                q_acc[i] += f[i + 1];
                k_acc[i] += k_before[i];
            }
            if (step + 1) % spm == 0 {
                let minute = (step + 1 - warm_steps) / spm - 1;
                for i in 0..n {
                    let q = q_acc[i] / spm as f64;
                    let kk = k_acc[i] / spm as f64;
                    let v = if kk * dx > 1e-9 {
                        (q / kk).clamp(MIN_SPEED_MPH, fd.free_flow_speed)
                    } else {
                        fd.free_flow_speed
                    };
                    flow.set(i, minute, q);
                    density.set(i, minute, kk);
                    speed.set(i, minute, v);
                }
                q_acc.iter_mut().for_each(|x| *x = 0.0);
                k_acc.iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }
    log.stored = k.iter().sum::<f64>() * dx;
    log.queued = queue;

    Ok(GroundTruth {
        scenario: scenario.name.clone(),
        seed,
        window,
        dx,
        lanes,
        flow,
        speed,
        density,
        history: SpeedHistory {
            dx,
            dt_s: grid.dt_s,
            n_cells: n,
            t0_s,
            speeds,
            entries,
        },
        conservation: log,
    })
}
