use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};
use crate::units::SECONDS_PER_HOUR;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Uniform aggregation intervals `[start + i*step, start + (i+1)*step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    start: NaiveDateTime,
    step_seconds: f64,
    n_intervals: usize,
}

impl TimeGrid {
    pub fn new(start: NaiveDateTime, step_seconds: f64, n_intervals: usize) -> Result<Self> {
        if !(step_seconds > 0.0) || step_seconds.fract() != 0.0 {
            return Err(Error::Parameter(format!(
                "time step must be a positive whole number of seconds, got {step_seconds}"
            )));
        }
        if n_intervals == 0 {
            return Err(Error::Parameter("time grid needs at least one interval".into()));
        }
        Ok(Self {
            start,
            step_seconds,
            n_intervals,
        })
    }

    /// One-minute grid.
    pub fn minutes(start: NaiveDateTime, n_intervals: usize) -> Result<Self> {
        Self::new(start, 60.0, n_intervals)
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn step_seconds(&self) -> f64 {
        self.step_seconds
    }

    pub fn step_minutes(&self) -> f64 {
        self.step_seconds / 60.0
    }

    pub fn step_hours(&self) -> f64 {
        self.step_seconds / SECONDS_PER_HOUR
    }

    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::seconds((i as f64 * self.step_seconds) as i64)
    }

    /// Interval containing `ts`, if inside the grid.
    pub fn index_of(&self, ts: NaiveDateTime) -> Option<usize> {
        let offset = (ts - self.start).num_milliseconds() as f64 / 1000.0;
        if offset < 0.0 {
            return None;
        }
        let i = (offset / self.step_seconds).floor() as usize;
        (i < self.n_intervals).then_some(i)
    }

    /// Sub-grid covering intervals `[from, to)`.
    pub fn window(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.n_intervals {
            return Err(Error::Parameter(format!(
                "window [{from}, {to}) outside grid of {} intervals",
                self.n_intervals
            )));
        }
        Self::new(self.timestamp(from), self.step_seconds, to - from)
    }
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime, chrono::ParseError> {
    NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT)
}
