//! Structured hydrothermal system data, validation diagnostics, and the
//! versioned JSON document format (`gep-system/1`).

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const SYSTEM_SCHEMA: &str = "gep-system/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitStatus {
    Existing,
    Candidate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bus {
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Line {
    pub name: String,
    pub from_bus: usize,
    pub to_bus: usize,
    /// MW per radian of angle difference.
    pub susceptance: f64,
    pub limit_mw: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThermalUnit {
    pub name: String,
    pub bus: usize,
    pub capacity_mw: f64,
    pub variable_cost: f64,
    pub ramp_mw_per_hour: f64,
    pub status: UnitStatus,
    /// Annualized; ignored for existing units.
    pub investment_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenewableUnit {
    pub name: String,
    pub bus: usize,
    pub capacity_mw: f64,
    pub status: UnitStatus,
    pub investment_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reservoir {
    pub min_storage_hm3: f64,
    pub max_storage_hm3: f64,
    pub initial_storage_hm3: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HydroUnit {
    pub name: String,
    pub bus: usize,
    pub capacity_mw: f64,
    pub reservoir: Reservoir,
    /// Average MW sustained per hm3/month of turbined outflow.
    pub productivity: f64,
    pub max_turbining_hm3: f64,
    pub max_spillage_hm3: f64,
    /// Indices of hydros directly upstream (their releases arrive here).
    pub upstream: Vec<usize>,
    pub status: UnitStatus,
    pub investment_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage {
    /// Total hours in the month.
    pub month_hours: f64,
    /// Hours of the month assigned to each typical day; sums to
    /// `month_hours`.
    pub day_weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemData {
    pub schema: String,
    pub name: String,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub thermals: Vec<ThermalUnit>,
    pub renewables: Vec<RenewableUnit>,
    pub hydros: Vec<HydroUnit>,
    pub day_types: Vec<String>,
    pub hours_per_day: usize,
    pub stages: Vec<Stage>,
    /// MW, `[bus][stage][day][hour]`.
    pub demand_mw: Vec<Vec<Vec<Vec<f64>>>>,
    pub deficit_cost: f64,
    #[serde(default)]
    pub reference_bus: usize,
}

/// A named validation finding; an empty diagnostics list means the system
/// satisfies every invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub entity: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.message)
    }
}

impl SystemData {
    pub fn n_units(&self) -> usize {
        self.thermals.len() + self.renewables.len() + self.hydros.len()
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn n_days(&self) -> usize {
        self.day_types.len()
    }

    /// Hours of the month each modeled hour of `(stage, day)` stands for.
    pub fn hour_weight(&self, stage: usize, day: usize) -> f64 {
        self.stages[stage].day_weights[day] / self.hours_per_day as f64
    }

    pub fn hydro_names(&self) -> Vec<String> {
        self.hydros.iter().map(|h| h.name.clone()).collect()
    }

    pub fn renewable_names(&self) -> Vec<String> {
        self.renewables.iter().map(|r| r.name.clone()).collect()
    }

    pub fn bus_names(&self) -> Vec<String> {
        self.buses.iter().map(|b| b.name.clone()).collect()
    }

    pub fn to_json_file<P: AsRef<Path>>(&self, path: P) -> std::io::Result<()> {
        let out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(out, self).map_err(std::io::Error::other)
    }

    pub fn from_json_file<P: AsRef<Path>>(path: P) -> std::io::Result<Self> {
        let input = BufReader::new(File::open(path)?);
        let system: SystemData = serde_json::from_reader(input).map_err(std::io::Error::other)?;
        if system.schema != SYSTEM_SCHEMA {
            return Err(std::io::Error::other(format!(
                "unsupported system schema '{}', expected '{}'",
                system.schema, SYSTEM_SCHEMA
            )));
        }
        Ok(system)
    }
}

/// Checks every structural invariant of the system; returns one diagnostic
/// per violation, naming the offending entity.
pub fn validate(system: &SystemData) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |entity: &str, message: String| {
        out.push(Diagnostic { entity: entity.to_string(), message });
    };

    if system.buses.is_empty() {
        push("system", "no buses".into());
    }
    if system.stages.is_empty() {
        push("system", "no stages".into());
    }
    if system.day_types.is_empty() {
        push("system", "no typical days".into());
    }
    if system.hours_per_day == 0 {
        push("system", "hours_per_day is zero".into());
    }
    if !(system.deficit_cost >= 0.0) {
        push("system", format!("deficit cost {} negative", system.deficit_cost));
    }
    if system.reference_bus >= system.buses.len() && !system.buses.is_empty() {
        push("system", format!("reference bus {} does not exist", system.reference_bus));
    }

    // Unique names across all entities referenced by scenarios.
    let mut seen = std::collections::HashSet::new();
    for name in system
        .buses
        .iter()
        .map(|b| &b.name)
        .chain(system.hydros.iter().map(|h| &h.name))
        .chain(system.renewables.iter().map(|r| &r.name))
        .chain(system.thermals.iter().map(|t| &t.name))
    {
        if !seen.insert(name.clone()) {
            push(name, "duplicate entity name".into());
        }
    }

    for line in &system.lines {
        if line.from_bus >= system.buses.len() || line.to_bus >= system.buses.len() {
            push(&line.name, "endpoint bus does not exist".into());
        } else if line.from_bus == line.to_bus {
            push(&line.name, "connects a bus to itself".into());
        }
        if !(line.susceptance > 0.0) {
            push(&line.name, format!("susceptance {} not positive", line.susceptance));
        }
        if !(line.limit_mw >= 0.0) {
            push(&line.name, format!("flow limit {} negative", line.limit_mw));
        }
    }

    for t in &system.thermals {
        if t.bus >= system.buses.len() {
            push(&t.name, "bus does not exist".into());
        }
        for (label, v) in [
            ("capacity", t.capacity_mw),
            ("variable cost", t.variable_cost),
            ("ramp", t.ramp_mw_per_hour),
            ("investment cost", t.investment_cost),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                push(&t.name, format!("{} {} negative or not finite", label, v));
            }
        }
    }
    for r in &system.renewables {
        if r.bus >= system.buses.len() {
            push(&r.name, "bus does not exist".into());
        }
        if !(r.capacity_mw >= 0.0) {
            push(&r.name, format!("capacity {} negative", r.capacity_mw));
        }
        if !(r.investment_cost >= 0.0) {
            push(&r.name, format!("investment cost {} negative", r.investment_cost));
        }
    }
    for (i, h) in system.hydros.iter().enumerate() {
        if h.bus >= system.buses.len() {
            push(&h.name, "bus does not exist".into());
        }
        if !(h.productivity > 0.0) {
            push(&h.name, format!("productivity {} not positive", h.productivity));
        }
        for (label, v) in [
            ("capacity", h.capacity_mw),
            ("max turbining", h.max_turbining_hm3),
            ("max spillage", h.max_spillage_hm3),
            ("investment cost", h.investment_cost),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                push(&h.name, format!("{} {} negative or not finite", label, v));
            }
        }
        let r = &h.reservoir;
        if !(r.min_storage_hm3 >= 0.0)
            || r.min_storage_hm3 > r.max_storage_hm3
            || r.initial_storage_hm3 < r.min_storage_hm3
            || r.initial_storage_hm3 > r.max_storage_hm3
        {
            push(
                &h.name,
                format!(
                    "reservoir bounds inconsistent (min {}, initial {}, max {})",
                    r.min_storage_hm3, r.initial_storage_hm3, r.max_storage_hm3
                ),
            );
        }
        for &up in &h.upstream {
            if up >= system.hydros.len() {
                push(&h.name, format!("upstream hydro {} does not exist", up));
            } else if up == i {
                push(&h.name, "is upstream of itself".into());
            }
        }
    }

    // Cascade topology must be acyclic. Depth-first search over the
    // upstream edges, reporting one representative hydro per cycle.
    {
        let n = system.hydros.len();
        let mut color = vec![0u8; n]; // 0 white, 1 gray, 2 black
        fn dfs(i: usize, hydros: &[HydroUnit], color: &mut [u8]) -> Option<usize> {
            color[i] = 1;
            for &up in &hydros[i].upstream {
                if up >= hydros.len() || up == i {
                    continue; // already reported above
                }
                match color[up] {
                    1 => return Some(up),
                    0 => {
                        if let Some(c) = dfs(up, hydros, color) {
                            return Some(c);
                        }
                    }
                    _ => {}
                }
            }
            color[i] = 2;
            None
        }
        for i in 0..n {
            if color[i] == 0 {
                if let Some(c) = dfs(i, &system.hydros, &mut color) {
                    push(&system.hydros[c].name, "is part of a cascade cycle".into());
                }
            }
        }
    }

    for (t, stage) in system.stages.iter().enumerate() {
        if stage.day_weights.len() != system.day_types.len() {
            push(
                "system",
                format!(
                    "stage {} has {} day weights for {} day types",
                    t,
                    stage.day_weights.len(),
                    system.day_types.len()
                ),
            );
            continue;
        }
        let total: f64 = stage.day_weights.iter().sum();
        if (total - stage.month_hours).abs() > 1e-6 * (1.0 + stage.month_hours) {
            push(
                "system",
                format!(
                    "stage {} day weights sum to {} hours but the month has {}",
                    t, total, stage.month_hours
                ),
            );
        }
        for w in &stage.day_weights {
            if !(*w >= 0.0) {
                push("system", format!("stage {} has negative day weight {}", t, w));
            }
        }
    }

    if system.demand_mw.len() != system.buses.len() {
        push(
            "system",
            format!(
                "demand has {} bus entries for {} buses",
                system.demand_mw.len(),
                system.buses.len()
            ),
        );
    } else {
        for (b, per_bus) in system.demand_mw.iter().enumerate() {
            let bus_name = &system.buses[b].name;
            if per_bus.len() != system.stages.len() {
                push(bus_name, format!("demand has {} stage entries", per_bus.len()));
                continue;
            }
            for per_stage in per_bus {
                if per_stage.len() != system.day_types.len() {
                    push(bus_name, "demand day count mismatch".into());
                    continue;
                }
                for per_day in per_stage {
                    if per_day.len() != system.hours_per_day {
                        push(bus_name, "demand hour count mismatch".into());
                        continue;
                    }
                    for v in per_day {
                        if !(*v >= 0.0) || !v.is_finite() {
                            push(bus_name, format!("demand value {} invalid", v));
                        }
                    }
                }
            }
        }
    }

    out
}
