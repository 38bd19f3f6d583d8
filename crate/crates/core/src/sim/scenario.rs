use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

use crate::error::{Error, Result};

/// The five analysis periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioName {
    BeforeMorningPeak,
    MorningPeak,
    Noon,
    AfternoonPeak,
    NightOffpeak,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::BeforeMorningPeak,
        ScenarioName::MorningPeak,
        ScenarioName::Noon,
        ScenarioName::AfternoonPeak,
        ScenarioName::NightOffpeak,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::BeforeMorningPeak => "before_morning_peak",
            ScenarioName::MorningPeak => "morning_peak",
            ScenarioName::Noon => "noon",
            ScenarioName::AfternoonPeak => "afternoon_peak",
            ScenarioName::NightOffpeak => "night_offpeak",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.as_str() == s)
    }

    /// Hour at which the one-hour analysis window starts.
    pub fn start_hour(self) -> u32 {
        match self {
            ScenarioName::BeforeMorningPeak => 6,
            ScenarioName::MorningPeak => 7,
            ScenarioName::Noon => 13,
            ScenarioName::AfternoonPeak => 17,
            ScenarioName::NightOffpeak => 20,
        }
    }
}

/// Capacity restriction at one point of the corridor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bottleneck {
    /// Milepost of the restricted boundary.
    pub position: f64,
    /// Fraction of capacity removed, in `[0, 1)`.
    pub capacity_drop: f64,
    /// Active window in minutes relative to the analysis start (may be negative).
    pub start_min: f64,
    pub end_min: f64,
}

impl Bottleneck {
    pub fn active_at(&self, minute: f64) -> bool {
        minute >= self.start_min && minute < self.end_min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub start: NaiveDateTime,
    /// Analysis window length in minutes.
    pub duration_min: usize,
    /// Breakpoints `(minute, veh/hr)`, linear in between and held constant
    /// outside. Minutes are relative to the analysis start.
    pub demand: Vec<(f64, f64)>,
    pub bottleneck: Option<Bottleneck>,
    pub seeds: Vec<u64>,
}

pub const DEFAULT_SEEDS: [u64; 2] = [1, 2];

fn reference_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 7, 1).expect("valid date")
}

impl ScenarioSpec {
    pub fn validate(&self, warmup_min: f64) -> Result<()> {
        let key = |k: &str| format!("scenario.{}.{k}", self.name);
        if self.duration_min == 0 {
            return Err(Error::config(key("duration"), "must be at least one minute"));
        }
        if self.demand.is_empty() {
            return Err(Error::config(key("demand"), "needs at least one breakpoint"));
        }
        if self.demand.iter().any(|&(_, q)| !(q >= 0.0) || !q.is_finite()) {
            return Err(Error::config(key("demand"), "demand must be non-negative"));
        }
        if self.demand.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::config(key("demand"), "breakpoint minutes must increase"));
        }
        if let Some(b) = &self.bottleneck {
            if !(0.0..1.0).contains(&b.capacity_drop) {
                return Err(Error::config(key("bottleneck.capacity_drop"), "must lie in [0, 1)"));
            }
            if b.start_min < -warmup_min || b.end_min > self.duration_min as f64 || b.end_min <= b.start_min {
                return Err(Error::config(
                    key("bottleneck"),
                    format!(
                        "active window [{}, {}) must lie within [-{warmup_min}, {}] minutes",
                        b.start_min, b.end_min, self.duration_min
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Demand in veh/hr at `minute` (relative to the analysis start).
    pub fn demand_at(&self, minute: f64) -> f64 {
        let d = &self.demand;
        if minute <= d[0].0 {
            return d[0].1;
        }
        for w in d.windows(2) {
            if minute <= w[1].0 {
                let f = (minute - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + f * (w[1].1 - w[0].1);
            }
        }
        d[d.len() - 1].1
    }

    /// Stylized default for one of the five periods on a corridor with the
    /// given total capacity (veh/hr). Peaks run close to capacity and the
    /// bottleneck activates as the peak hour opens; the night runs at a
    /// quarter of capacity.
    pub fn preset(name: ScenarioName, capacity: f64, bottleneck_at: f64) -> Self {
        let frac = |pts: &[(f64, f64)]| pts.iter().map(|&(m, f)| (m, f * capacity)).collect::<Vec<_>>();
        let (demand, bottleneck) = match name {
            ScenarioName::BeforeMorningPeak => (
                frac(&[(-20.0, 0.66), (30.0, 0.84), (60.0, 0.88)]),
                Some((0.25, 30.0, 60.0)),
            ),
            ScenarioName::MorningPeak => (frac(&[(-20.0, 0.86), (10.0, 0.92), (60.0, 0.90)]), Some((0.35, 0.0, 60.0))),
            ScenarioName::Noon => (frac(&[(-20.0, 0.70), (60.0, 0.74)]), Some((0.30, 10.0, 40.0))),
            ScenarioName::AfternoonPeak => (
                frac(&[(-20.0, 0.82), (20.0, 0.90), (60.0, 0.88)]),
                Some((0.30, 0.0, 60.0)),
            ),
            ScenarioName::NightOffpeak => (frac(&[(-20.0, 0.27), (60.0, 0.23)]), None),
        };
        Self {
            name: name.as_str().to_string(),
            start: reference_date().and_time(NaiveTime::from_hms_opt(name.start_hour(), 0, 0).expect("valid hour")),
            duration_min: 60,
            demand,
            bottleneck: bottleneck.map(|(drop, start, end)| Bottleneck {
                position: bottleneck_at,
                capacity_drop: drop,
                start_min: start,
                end_min: end,
            }),
            seeds: DEFAULT_SEEDS.to_vec(),
        }
    }

    /// Constant demand without bottleneck, for steady-state checks.
    pub fn constant(name: &str, demand: f64, duration_min: usize) -> Self {
        Self {
            name: name.to_string(),
            start: reference_date().and_time(NaiveTime::from_hms_opt(12, 0, 0).expect("valid hour")),
            duration_min,
            demand: vec![(0.0, demand)],
            bottleneck: None,
            seeds: DEFAULT_SEEDS.to_vec(),
        }
    }
}
