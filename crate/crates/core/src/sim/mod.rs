//! Deterministic synthetic corridor: a cell-transmission model produces the
//! ground-truth fields, from which loop detectors and probe-vehicle travel
//! times are emulated.

pub mod ctm;
pub mod detectors;
pub mod fd;
pub mod scenario;
pub mod truth;
pub mod vehicles;

pub use ctm::{run_ground_truth, GroundTruth, SimGrid, SpeedHistory};
pub use detectors::{emulate_detectors, DetectorNoise};
pub use fd::FundamentalDiagram;
pub use scenario::{Bottleneck, ScenarioName, ScenarioSpec};
pub use truth::{ground_truth_measures, trajectory_measures};
pub use vehicles::{generate_probe_tts, trace_vehicles, ProbeSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from one run seed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Demand = 1,
    Detectors = 2,
    Probes = 3,
}

pub(crate) fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}
