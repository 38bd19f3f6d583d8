//! TOML run configuration.
//!
//! Every distance, speed, duration and density is written as a string with
//! a unit suffix (`"16 mi"`, `"0.8 km"`, `"200 ft"`, `"100 km/h"`,
//! `"1 min"`). Environment variables named `PMFUSE_<SECTION>__<KEY>`
//! override file values; nested sections are joined with `__`, for example
//! `PMFUSE_SIMULATION__PROBES__PENETRATION=0.1`.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDateTime;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::conflate::{ConflationMethod, SmoothingParams};
use crate::corridor::{
    links_from_boundaries, CorridorGeometry, LaneSection, LinkDef, VdsLocation, DEFAULT_LANES, DEFAULT_LINK_BOUNDARIES,
    DEFAULT_VDS_POSITIONS,
};
use crate::detector::{CalibrationGrid, GFactorSet, DEFAULT_SMOOTHING_A};
use crate::error::{Error, Result};
use crate::grid::parse_timestamp;
use crate::measures::MeasureConfig;
use crate::sim::{Bottleneck, DetectorNoise, FundamentalDiagram, ProbeSpec, ScenarioName, ScenarioSpec, SimGrid};
use crate::ttfuse::{TtFuseParams, VendorWeights, DEFAULT_SPEED_CAP_MPH};
use crate::units::{parse_quantity, Dimension};

pub const ENV_PREFIX: &str = "PMFUSE_";

/// Where the detector g-factors come from.
#[derive(Debug, Clone, PartialEq)]
pub enum GFactorSource {
    /// Fitted per lane against ground-truth speeds.
    Calibrate,
    Fixed(GFactorSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub smoothing_a: f64,
    pub g_factors: GFactorSource,
    pub calibration: CalibrationGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub params: TtFuseParams,
    pub vendors: Vec<String>,
    pub weights: VendorWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: SimGrid,
    pub fd: FundamentalDiagram,
    pub demand_noise: f64,
    pub detector_noise: DetectorNoise,
    pub g_true: GFactorSet,
    pub probes: ProbeSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub corridor: CorridorGeometry,
    pub detector: DetectorConfig,
    pub smoothing: SmoothingParams,
    /// Reconstruction used for the hybrid flow field.
    pub flow_method: ConflationMethod,
    pub fusion: FusionConfig,
    pub measures: MeasureConfig,
    pub simulation: SimConfig,
    pub scenarios: Vec<ScenarioSpec>,
    /// SHA-256 of the effective configuration (file plus overrides), hex.
    pub hash: String,
}

impl Default for Config {
    fn default() -> Self {
        Config::parse("", std::iter::empty()).expect("built-in defaults are valid")
    }
}

impl Config {
    /// Reads `path` and applies overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input {
            path: path.to_path_buf(),
            reason: format!("cannot read configuration: {e}"),
        })?;
        Self::parse(&text, std::env::vars())
    }

    /// Parses `text`, applying `PMFUSE_*` pairs from `env`.
    pub fn parse(text: &str, env: impl Iterator<Item = (String, String)>) -> Result<Self> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(error_key(&e), e.message().to_string()))?;
        apply_env(&mut table, env)?;
        let canonical = toml::to_string(&table).map_err(|e| Error::config("<root>", e.to_string()))?;
        let hash = Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        build(&table, hash)
    }
}

fn error_key(e: &toml::de::Error) -> String {
    match e.span() {
        Some(s) => format!("<syntax at byte {}>", s.start),
        None => "<syntax>".into(),
    }
}

fn apply_env(table: &mut Table, env: impl Iterator<Item = (String, String)>) -> Result<()> {
    let mut vars: Vec<(String, String)> = env.filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (k, raw) in vars {
        let path: Vec<String> = k[ENV_PREFIX.len()..].split("__").map(|s| s.to_ascii_lowercase()).collect();
        if path.iter().any(String::is_empty) {
            return Err(Error::config(k, "malformed override name"));
        }
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or(Value::String(raw));
        let mut cur = &mut *table;
        for seg in &path[..path.len() - 1] {
            let entry = cur.entry(seg.clone()).or_insert_with(|| Value::Table(Table::new()));
            cur = match entry {
                Value::Table(t) => t,
                _ => return Err(Error::config(path.join("."), "override descends into a non-table value")),
            };
        }
        cur.insert(path[path.len() - 1].clone(), value);
    }
    Ok(())
}

/// Reader over one table that tracks the dotted key path and consumed keys.
struct Section<'a> {
    path: String,
    table: Option<&'a Table>,
    used: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(path: &str, table: Option<&'a Table>) -> Self {
        Self {
            path: path.to_string(),
            table,
            used: BTreeSet::new(),
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn raw(&mut self, k: &str) -> Option<&'a Value> {
        self.used.insert(k.to_string());
        self.table.and_then(|t| t.get(k))
    }

    fn sub(&mut self, k: &str) -> Result<Section<'a>> {
        let key = self.key(k);
        match self.raw(k) {
            None => Ok(Section::new(&key, None)),
            Some(Value::Table(t)) => Ok(Section::new(&key, Some(t))),
            Some(_) => Err(Error::config(key, "expected a table")),
        }
    }

    fn quantity(&mut self, k: &str, dim: Dimension, default: f64) -> Result<f64> {
        match self.raw(k) {
            None => Ok(default),
            Some(v) => quantity_of(v, dim, &self.key(k)),
        }
    }

    fn opt_quantity(&mut self, k: &str, dim: Dimension) -> Result<Option<f64>> {
        match self.raw(k) {
            None => Ok(None),
            Some(v) => quantity_of(v, dim, &self.key(k)).map(Some),
        }
    }

    fn quantities(&mut self, k: &str, dim: Dimension) -> Result<Option<Vec<f64>>> {
        let key = self.key(k);
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, v)| quantity_of(v, dim, &format!("{key}[{i}]")))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::config(key, format!("expected a list of {dim} strings"))),
        }
    }

    fn float(&mut self, k: &str, default: f64) -> Result<f64> {
        match self.raw(k) {
            None => Ok(default),
            Some(v) => number_of(v).ok_or_else(|| Error::config(self.key(k), "expected a number")),
        }
    }

    fn floats(&mut self, k: &str) -> Result<Option<Vec<f64>>> {
        let key = self.key(k);
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| number_of(v).ok_or_else(|| Error::config(key.clone(), "expected a list of numbers")))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::config(key, "expected a list of numbers")),
        }
    }

    fn uint(&mut self, k: &str, default: u64) -> Result<u64> {
        match self.raw(k) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(_) => Err(Error::config(self.key(k), "expected a non-negative integer")),
        }
    }

    fn uints(&mut self, k: &str) -> Result<Option<Vec<u64>>> {
        let key = self.key(k);
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                    _ => Err(Error::config(key.clone(), "expected a list of non-negative integers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::config(key, "expected a list of non-negative integers")),
        }
    }

    fn boolean(&mut self, k: &str, default: bool) -> Result<bool> {
        match self.raw(k) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(Error::config(self.key(k), "expected true or false")),
        }
    }

    fn string(&mut self, k: &str) -> Result<Option<String>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(Error::config(self.key(k), "expected a string")),
        }
    }

    fn strings(&mut self, k: &str) -> Result<Option<Vec<String>>> {
        let key = self.key(k);
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(Error::config(key.clone(), "expected a list of strings")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::config(key, "expected a list of strings")),
        }
    }

    fn tables(&mut self, k: &str) -> Result<Vec<Section<'a>>> {
        let key = self.key(k);
        match self.raw(k) {
            None => Ok(Vec::new()),
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    Value::Table(t) => Ok(Section::new(&format!("{key}[{i}]"), Some(t))),
                    _ => Err(Error::config(format!("{key}[{i}]"), "expected a table")),
                })
                .collect(),
            Some(_) => Err(Error::config(key, "expected an array of tables")),
        }
    }

    /// Errors on keys that were never read.
    fn finish(self) -> Result<()> {
        if let Some(t) = self.table {
            if let Some(k) = t.keys().find(|k| !self.used.contains(*k)) {
                return Err(Error::config(self.key(k), "unknown key"));
            }
        }
        Ok(())
    }
}

fn number_of(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn quantity_of(v: &Value, dim: Dimension, key: &str) -> Result<f64> {
    match v {
        Value::String(s) => parse_quantity(s, dim).map_err(|e| Error::config(key, e)),
        _ => Err(Error::config(key, format!("expected a {dim} with a unit suffix, such as \"1.5 mi\""))),
    }
}

fn geometry_err(e: Error) -> Error {
    match e {
        Error::Geometry(m) => Error::config("corridor", m),
        other => other,
    }
}

fn build(root: &Table, hash: String) -> Result<Config> {
    let mut top = Section::new("", Some(root));

    let mut c = top.sub("corridor")?;
    let length = c.quantity("length", Dimension::Length, 16.0)?;
    let lanes = c.uint("lanes", DEFAULT_LANES as u64)? as u32;
    let cell_spacing = c.quantity("cell_length", Dimension::Length, 0.25)?;
    let radius_ft = c.quantity("suppression_radius", Dimension::ShortLength, 200.0)?;
    let vendor = c.string("vendor")?.unwrap_or_else(|| "A".into());
    let vds_positions = c.quantities("vds_positions", Dimension::Length)?;
    let link_bounds = c.quantities("link_boundaries", Dimension::Length)?;
    let mut sections = Vec::new();
    for mut s in c.tables("lane_section")? {
        sections.push(LaneSection {
            start: s.quantity("start", Dimension::Length, 0.0)?,
            lanes: s.uint("lanes", lanes as u64)? as u32,
        });
        s.finish()?;
    }
    if sections.is_empty() {
        sections.push(LaneSection { start: 0.0, lanes });
    }
    let mut vds = Vec::new();
    for (j, mut s) in c.tables("vds")?.into_iter().enumerate() {
        let key = s.key("position");
        let position = s
            .opt_quantity("position", Dimension::Length)?
            .ok_or_else(|| Error::config(key, "missing"))?;
        vds.push(VdsLocation {
            id: s.string("id")?.unwrap_or_else(|| format!("vds{:02}", j + 1)),
            position,
            lanes: s.uint("lanes", lanes as u64)? as u32,
        });
        s.finish()?;
    }
    if vds.is_empty() {
        let positions = vds_positions.unwrap_or_else(|| DEFAULT_VDS_POSITIONS.to_vec());
        let lanes_at = |x: f64| sections.iter().rev().find(|s| s.start <= x).map_or(lanes, |s| s.lanes);
        vds = positions
            .iter()
            .enumerate()
            .map(|(j, &position)| VdsLocation {
                id: format!("vds{:02}", j + 1),
                position,
                lanes: lanes_at(position),
            })
            .collect();
    } else if vds_positions.is_some() {
        return Err(Error::config("corridor.vds_positions", "give either vds_positions or [[corridor.vds]], not both"));
    }
    let mut links = Vec::new();
    for (k, mut s) in c.tables("link")?.into_iter().enumerate() {
        let (ks, ke) = (s.key("start"), s.key("end"));
        let start = s.opt_quantity("start", Dimension::Length)?.ok_or_else(|| Error::config(ks, "missing"))?;
        let end = s.opt_quantity("end", Dimension::Length)?.ok_or_else(|| Error::config(ke, "missing"))?;
        links.push(LinkDef {
            id: s.string("id")?.unwrap_or_else(|| format!("link{:02}", k + 1)),
            start,
            end,
            vendor_id: s.string("vendor")?.unwrap_or_else(|| vendor.clone()),
        });
        s.finish()?;
    }
    if links.is_empty() {
        let bounds = link_bounds.unwrap_or_else(|| DEFAULT_LINK_BOUNDARIES.to_vec());
        links = links_from_boundaries(&bounds, &vendor);
    } else if link_bounds.is_some() {
        return Err(Error::config("corridor.link_boundaries", "give either link_boundaries or [[corridor.link]], not both"));
    }
    c.finish()?;
    let corridor = CorridorGeometry::new(length, sections, vds, links, cell_spacing, radius_ft).map_err(geometry_err)?;

    let mut d = top.sub("detector")?;
    let smoothing_a = d.float("smoothing_a", DEFAULT_SMOOTHING_A)?;
    if !(smoothing_a > 0.0) {
        return Err(Error::config("detector.smoothing_a", "must be positive"));
    }
    let g_factors = match d.raw("g_factors") {
        None => GFactorSource::Calibrate,
        Some(Value::String(s)) if s == "calibrate" => GFactorSource::Calibrate,
        Some(Value::Array(_)) => {
            d.used.remove("g_factors");
            let feet = d.quantities("g_factors", Dimension::ShortLength)?.unwrap_or_default();
            GFactorSource::Fixed(GFactorSet::new(feet).map_err(|e| Error::config("detector.g_factors", e.to_string()))?)
        }
        Some(_) => {
            return Err(Error::config(
                "detector.g_factors",
                "expected \"calibrate\" or a list of lengths such as [\"22 ft\", \"24 ft\"]",
            ))
        }
    };
    let dg = CalibrationGrid::default();
    let calibration = CalibrationGrid {
        min_ft: d.quantity("calibration_min", Dimension::ShortLength, dg.min_ft)?,
        max_ft: d.quantity("calibration_max", Dimension::ShortLength, dg.max_ft)?,
        step_ft: d.quantity("calibration_step", Dimension::ShortLength, dg.step_ft)?,
    };
    if !(calibration.step_ft > 0.0) || !(calibration.max_ft >= calibration.min_ft) || !(calibration.min_ft > 0.0) {
        return Err(Error::config("detector.calibration_step", "calibration range must be positive and non-empty"));
    }
    d.finish()?;

    let mut s = top.sub("conflation")?;
    let ds = SmoothingParams::default();
    let smoothing = SmoothingParams {
        delta: s.quantity("delta", Dimension::Length, ds.delta)?,
        mu: s.quantity("mu", Dimension::Duration, ds.mu * 60.0)? / 60.0,
        v_ff: s.quantity("v_ff", Dimension::Speed, ds.v_ff)?,
        v_cong: s.quantity("v_cong", Dimension::Speed, ds.v_cong)?,
        v_cr: s.quantity("v_cr", Dimension::Speed, ds.v_cr)?,
        delta_v: s.quantity("delta_v", Dimension::Speed, ds.delta_v)?,
        truncation: s.float("truncation", ds.truncation)?,
    };
    smoothing.validate()?;
    let flow_method = match s.string("method")?.as_deref() {
        None | Some("cgasm") => ConflationMethod::Cgasm,
        Some("gasm") => ConflationMethod::Gasm,
        Some(other) => return Err(Error::config("conflation.method", format!("`{other}` is not gasm or cgasm"))),
    };
    s.finish()?;

    let mut f = top.sub("fusion")?;
    let params = TtFuseParams {
        speed_cap_mph: f.quantity("speed_cap", Dimension::Speed, DEFAULT_SPEED_CAP_MPH)?,
        fill_horizon: (f.quantity("fill_horizon", Dimension::Duration, 600.0)? / 60.0).round() as usize,
        fallback_speed_mph: f.quantity("fallback_speed", Dimension::Speed, smoothing.v_ff)?,
    };
    if !(params.speed_cap_mph > 0.0) || !(params.fallback_speed_mph > 0.0) {
        return Err(Error::config("fusion.speed_cap", "speeds must be positive"));
    }
    let mut vendors = Vec::new();
    let mut weights = Vec::new();
    for mut v in f.tables("vendor")? {
        let key = v.key("id");
        vendors.push(v.string("id")?.ok_or_else(|| Error::config(key, "missing"))?);
        weights.push(v.float("weight", 1.0)?);
        v.finish()?;
    }
    if vendors.is_empty() {
        let mut ids: Vec<String> = corridor.links().iter().map(|l| l.vendor_id.clone()).collect();
        ids.sort();
        ids.dedup();
        weights = vec![1.0 / ids.len() as f64; ids.len()];
        vendors = ids;
    }
    let weights = VendorWeights::new(weights).map_err(|e| Error::config("fusion.vendor", e.to_string()))?;
    f.finish()?;

    let mut m = top.sub("measures")?;
    let measures = MeasureConfig {
        threshold_mph: m.quantity("threshold", Dimension::Speed, 65.0)?,
        clamp_delay: m.boolean("clamp_delay", true)?,
    };
    if !(measures.threshold_mph > 0.0) {
        return Err(Error::config("measures.threshold", "must be positive"));
    }
    m.finish()?;

    let mut sim = top.sub("simulation")?;
    let dgrid = SimGrid::default();
    let dfd = FundamentalDiagram::default();
    let grid = SimGrid {
        dx: sim.quantity("cell_length", Dimension::Length, dgrid.dx)?,
        dt_s: sim.quantity("time_step", Dimension::Duration, dgrid.dt_s)?,
        warmup_min: (sim.quantity("warmup", Dimension::Duration, dgrid.warmup_min as f64 * 60.0)? / 60.0).round()
            as usize,
    };
    let fd = FundamentalDiagram {
        free_flow_speed: sim.quantity("free_flow_speed", Dimension::Speed, dfd.free_flow_speed)?,
        wave_speed: sim.quantity("wave_speed", Dimension::Speed, dfd.wave_speed)?,
        jam_density: sim.quantity("jam_density", Dimension::Density, dfd.jam_density)?,
    };
    fd.validate()?;
    grid.validate(&fd)?;
    let demand_noise = sim.float("demand_noise", 0.03)?;
    if !(demand_noise >= 0.0) {
        return Err(Error::config("simulation.demand_noise", "must be non-negative"));
    }
    let mut sd = sim.sub("detectors")?;
    let dn = DetectorNoise::default();
    let detector_noise = DetectorNoise {
        count_sigma: sd.float("count_sigma", dn.count_sigma)?,
        length_sigma_ft: sd.quantity("length_sigma", Dimension::ShortLength, dn.length_sigma_ft)?,
    };
    detector_noise.validate()?;
    let g_true = match sd.quantities("g_true", Dimension::ShortLength)? {
        Some(v) => GFactorSet::new(v).map_err(|e| Error::config("simulation.detectors.g_true", e.to_string()))?,
        None => GFactorSet::reference(),
    };
    sd.finish()?;
    let mut sp = sim.sub("probes")?;
    let dp = ProbeSpec::default();
    let probes = ProbeSpec {
        penetration: sp.float("penetration", dp.penetration)?,
        margin: sp.float("margin", dp.margin)?,
        observation_interval_s: sp.quantity("observation_interval", Dimension::Duration, dp.observation_interval_s)?,
    };
    probes.validate()?;
    sp.finish()?;
    sim.finish()?;

    let mut sc = top.sub("scenarios")?;
    let names = sc
        .strings("run")?
        .unwrap_or_else(|| ScenarioName::ALL.iter().map(|n| n.as_str().to_string()).collect());
    if names.is_empty() {
        return Err(Error::config("scenarios.run", "at least one scenario is required"));
    }
    let seeds = sc.uints("seeds")?.unwrap_or_else(|| crate::sim::scenario::DEFAULT_SEEDS.to_vec());
    if seeds.is_empty() {
        return Err(Error::config("scenarios.seeds", "at least one seed is required"));
    }
    let default_bn = sc.quantity("bottleneck_position", Dimension::Length, 11.2_f64.min(0.7 * length))?;
    let capacity = fd.capacity() * lanes as f64;
    let mut scenarios = Vec::new();
    for name in &names {
        let Some(preset) = ScenarioName::parse(name) else {
            return Err(Error::config(
                "scenarios.run",
                format!(
                    "`{name}` is not one of {}",
                    ScenarioName::ALL.map(|n| n.as_str()).join(", ")
                ),
            ));
        };
        let noon_default = if preset == ScenarioName::Noon { 0.4 * length } else { default_bn };
        let mut o = sc.sub(name)?;
        let bn_at = o.quantity("bottleneck_position", Dimension::Length, noon_default)?;
        let mut spec = ScenarioSpec::preset(preset, capacity, bn_at);
        spec.seeds = seeds.clone();
        if let Some(start) = o.string("start")? {
            spec.start = parse_timestamp(&start)
                .map_err(|e| Error::config(o.key("start"), format!("`{start}`: {e}")))?;
        }
        let dur = o.quantity("duration", Dimension::Duration, spec.duration_min as f64 * 60.0)? / 60.0;
        spec.duration_min = dur.round() as usize;
        let minutes = o.quantities("demand_times", Dimension::Duration)?;
        let fractions = o.floats("demand_fraction")?;
        match (minutes, fractions) {
            (Some(t), Some(f)) if t.len() == f.len() => {
                spec.demand = t.iter().zip(&f).map(|(t, f)| (t / 60.0, f * capacity)).collect();
            }
            (None, None) => {}
            _ => {
                return Err(Error::config(
                    o.key("demand_fraction"),
                    "demand_times and demand_fraction must be given together with equal lengths",
                ))
            }
        }
        let drop = o.float("capacity_drop", spec.bottleneck.map_or(0.0, |b| b.capacity_drop))?;
        let b_start = o.opt_quantity("bottleneck_start", Dimension::Duration)?;
        let b_end = o.opt_quantity("bottleneck_end", Dimension::Duration)?;
        spec.bottleneck = if drop > 0.0 {
            let base = spec.bottleneck.unwrap_or(Bottleneck {
                position: bn_at,
                capacity_drop: drop,
                start_min: 0.0,
                end_min: spec.duration_min as f64,
            });
            Some(Bottleneck {
                position: bn_at,
                capacity_drop: drop,
                start_min: b_start.map_or(base.start_min, |s| s / 60.0),
                end_min: b_end.map_or(base.end_min.min(spec.duration_min as f64), |s| s / 60.0),
            })
        } else {
            None
        };
        o.finish()?;
        spec.validate(grid.warmup_min as f64)?;
        if let Some(b) = &spec.bottleneck {
            if !(b.position > 0.0 && b.position < length) {
                return Err(Error::config(format!("scenarios.{name}.bottleneck_position"), "must lie inside the corridor"));
            }
        }
        scenarios.push(spec);
    }
    sc.finish()?;
    top.finish()?;

    Ok(Config {
        corridor,
        detector: DetectorConfig {
            smoothing_a,
            g_factors,
            calibration,
        },
        smoothing,
        flow_method,
        fusion: FusionConfig {
            params,
            vendors,
            weights,
        },
        measures,
        simulation: SimConfig {
            grid,
            fd,
            demand_noise,
            detector_noise,
            g_true,
            probes,
        },
        scenarios,
        hash,
    })
}

impl Config {
    pub fn scenario(&self, name: &str) -> Option<&ScenarioSpec> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    /// Analysis window start of `name` as configured.
    pub fn scenario_start(&self, name: &str) -> Option<NaiveDateTime> {
        self.scenario(name).map(|s| s.start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config> {
        Config::parse(text, std::iter::empty())
    }

    #[test]
    fn defaults_describe_the_acceptance_setup() {
        let c = Config::default();
        assert_eq!(c.corridor.vds().len(), 33);
        assert_eq!(c.corridor.links().len(), 16);
        assert_eq!(c.scenarios.len(), 5);
        assert!(c.scenarios.iter().all(|s| s.seeds == vec![1, 2]));
        assert_eq!(c.detector.g_factors, GFactorSource::Calibrate);
        assert_eq!(c.flow_method, ConflationMethod::Cgasm);
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn units_are_converted() {
        let c = parse(
            r#"
            [conflation]
            delta = "800 m"
            mu = "60 s"
            v_ff = "100 km/h"
            [corridor]
            suppression_radius = "60.96 m"
            "#,
        )
        .unwrap();
        let d = SmoothingParams::default();
        assert!((c.smoothing.delta - d.delta).abs() < 1e-12);
        assert!((c.smoothing.mu - 1.0).abs() < 1e-12);
        assert!((c.corridor.suppression_radius_ft() - 200.0).abs() < 1e-9);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("[corridor]\nlength = 16", "corridor.length"),
            ("[corridor]\nlength = \"16 mph\"", "corridor.length"),
            ("[conflation]\nbogus = 1", "conflation.bogus"),
            ("[simulation.probes]\npenetration = 0.0", "probes.penetration"),
            ("[scenarios]\nrun = [\"rush\"]", "scenarios.run"),
            ("[simulation]\ntime_step = \"7 s\"", "simulation.time_step"),
        ];
        for (text, key) in cases {
            match parse(text).unwrap_err() {
                Error::Config { key: k, .. } => assert!(k.contains(key), "{k} vs {key}"),
                e => panic!("{text}: {e}"),
            }
        }
    }

    #[test]
    fn env_overrides_apply_and_change_the_hash() {
        let env = vec![
            ("PMFUSE_SIMULATION__PROBES__PENETRATION".to_string(), "0.1".to_string()),
            ("PMFUSE_CONFLATION__DELTA".to_string(), "0.5 mi".to_string()),
            ("HOME".to_string(), "/x".to_string()),
        ];
        let c = Config::parse("", env.into_iter()).unwrap();
        assert_eq!(c.simulation.probes.penetration, 0.1);
        assert_eq!(c.smoothing.delta, 0.5);
        assert_ne!(c.hash, Config::default().hash);
        let bad = vec![("PMFUSE_MEASURES__THRESHOLD".to_string(), "fast".to_string())];
        match Config::parse("", bad.into_iter()).unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "measures.threshold"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn scenario_overrides() {
        let c = parse(
            r#"
            [scenarios]
            run = ["night_offpeak", "noon"]
            seeds = [5, 6]
            [scenarios.night_offpeak]
            demand_times = ["0 min"]
            demand_fraction = [0.1]
            [scenarios.noon]
            capacity_drop = 0.0
            "#,
        )
        .unwrap();
        assert_eq!(c.scenarios.len(), 2);
        assert_eq!(c.scenarios[0].seeds, vec![5, 6]);
        assert!((c.scenarios[0].demand_at(30.0) - 0.1 * 2100.0 * 6.0).abs() < 1e-9);
        assert!(c.scenarios[1].bottleneck.is_none());
    }

    #[test]
    fn fixed_g_factors() {
        let c = parse("[detector]\ng_factors = [\"20 ft\", \"21 ft\"]").unwrap();
        assert_eq!(c.detector.g_factors, GFactorSource::Fixed(GFactorSet::new(vec![20.0, 21.0]).unwrap()));
    }
}
