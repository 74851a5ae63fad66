//! Synthetic operating scenarios: monthly hydro inflows, hourly renewable
//! capacity factors and demand multipliers, generated from a compact spec
//! or loaded from CSV.
//!
//! Determinism: generation uses the ChaCha8 stream cipher as the PRNG
//! (fixed, named algorithm; identical streams on every platform for the
//! same seed) and draws in a fixed order: per scenario, inflow innovations
//! hydro-by-hydro and stage-by-stage, then renewable noise, then demand
//! noise. Physical values are rounded to 12 significant digits at
//! generation so the CSV round trip is value-identical.
//!
//! Inflows follow a lognormal AR(1): per hydro, `z_t = phi z_{t-1} +
//! sigma eps_t` on the log scale with a stationary start and a mean
//! correction so the expectation matches the seasonal mean exactly.
//! Renewable capacity factors are the diurnal shape perturbed by
//! logit-scale noise correlated with the stage's average inflow
//! innovation; demand multipliers are mean-one lognormal noise.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
    #[error("csv schema violation at row {row}: {msg}")]
    Schema { row: usize, msg: String },
    #[error("csv schema violation: {0}")]
    SchemaGlobal(String),
    #[error("split error: {0}")]
    Split(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Lognormal AR(1) inflow parameters for one hydro.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InflowParams {
    /// Mean inflow in hm3/month before seasonal shaping.
    pub mean: f64,
    /// Coefficient of variation of the stationary inflow distribution.
    pub cv: f64,
    /// Autocorrelation of the log-inflow process, in `[0, 1)`.
    pub phi: f64,
}

/// Generator parameters. Inflow entries align with the system's hydro
/// order; shapes are cycled over stages / indexed by hour of day.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub inflow: Vec<InflowParams>,
    /// Multiplicative seasonal shape, cycled over stages (empty = flat).
    pub seasonal_shape: Vec<f64>,
    /// Base capacity factor per hour of a typical day, in (0, 1).
    pub diurnal_shape: Vec<f64>,
    /// Logit-scale noise dispersion for renewable capacity factors.
    pub renewable_noise_cv: f64,
    /// Coefficient of variation of the mean-one demand multiplier.
    pub demand_noise_cv: f64,
    /// Correlation between renewable noise and the stage's average
    /// standardized inflow innovation, in `[-1, 1]`.
    pub inflow_renewable_correlation: f64,
}

impl ScenarioSpec {
    pub fn check(&self) -> Result<(), ScenarioError> {
        for (i, p) in self.inflow.iter().enumerate() {
            if !(p.mean >= 0.0) || !p.mean.is_finite() {
                return Err(ScenarioError::InvalidSpec(format!(
                    "inflow mean of hydro {} is {}",
                    i, p.mean
                )));
            }
            if !(p.cv >= 0.0) || !p.cv.is_finite() {
                return Err(ScenarioError::InvalidSpec(format!(
                    "inflow cv of hydro {} is {}",
                    i, p.cv
                )));
            }
            if !(0.0..1.0).contains(&p.phi) {
                return Err(ScenarioError::InvalidSpec(format!(
                    "inflow autocorrelation of hydro {} is {} (need [0, 1))",
                    i, p.phi
                )));
            }
        }
        for (t, s) in self.seasonal_shape.iter().enumerate() {
            if !(*s > 0.0) || !s.is_finite() {
                return Err(ScenarioError::InvalidSpec(format!(
                    "seasonal shape entry {} is {}",
                    t, s
                )));
            }
        }
        for (h, s) in self.diurnal_shape.iter().enumerate() {
            if !(*s > 0.0 && *s < 1.0) {
                return Err(ScenarioError::InvalidSpec(format!(
                    "diurnal shape entry {} is {} (need (0, 1))",
                    h, s
                )));
            }
        }
        if !(self.renewable_noise_cv >= 0.0) || !self.renewable_noise_cv.is_finite() {
            return Err(ScenarioError::InvalidSpec("renewable noise cv negative".into()));
        }
        if !(self.demand_noise_cv >= 0.0) || !self.demand_noise_cv.is_finite() {
            return Err(ScenarioError::InvalidSpec("demand noise cv negative".into()));
        }
        if self.inflow_renewable_correlation.abs() > 1.0 {
            return Err(ScenarioError::InvalidSpec(format!(
                "inflow-renewable correlation {} outside [-1, 1]",
                self.inflow_renewable_correlation
            )));
        }
        Ok(())
    }
}

/// One scenario's realization, aligned with the entity name lists of the
/// owning [`ScenarioSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// hm3/month, `[hydro][stage]`.
    pub inflow: Vec<Vec<f64>>,
    /// In `[0, 1]`, `[renewable][stage][day][hour]`.
    pub capacity_factor: Vec<Vec<Vec<Vec<f64>>>>,
    /// Positive, `[bus][stage][day][hour]`.
    pub demand_multiplier: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub hydro_names: Vec<String>,
    pub renewable_names: Vec<String>,
    pub bus_names: Vec<String>,
    pub n_stages: usize,
    pub n_days: usize,
    pub n_hours: usize,
    pub probability: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    pub seed: u64,
    pub fingerprint: String,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Type invariants: probabilities sum to one, inflows nonnegative,
    /// factors in `[0, 1]`, multipliers positive, shapes consistent.
    pub fn check(&self) -> Result<(), ScenarioError> {
        if self.scenarios.len() != self.probability.len() {
            return Err(ScenarioError::SchemaGlobal(format!(
                "{} scenarios but {} probabilities",
                self.scenarios.len(),
                self.probability.len()
            )));
        }
        let total: f64 = self.probability.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ScenarioError::SchemaGlobal(format!(
                "probabilities sum to {} (need 1 within 1e-12)",
                total
            )));
        }
        for (w, s) in self.scenarios.iter().enumerate() {
            if s.inflow.len() != self.hydro_names.len()
                || s.capacity_factor.len() != self.renewable_names.len()
                || s.demand_multiplier.len() != self.bus_names.len()
            {
                return Err(ScenarioError::SchemaGlobal(format!(
                    "scenario {} entity counts disagree with name lists",
                    w
                )));
            }
            for (h, by_stage) in s.inflow.iter().enumerate() {
                if by_stage.len() != self.n_stages {
                    return Err(ScenarioError::SchemaGlobal(format!(
                        "scenario {} hydro {} has {} stages, expected {}",
                        w,
                        self.hydro_names[h],
                        by_stage.len(),
                        self.n_stages
                    )));
                }
                for v in by_stage {
                    if !(*v >= 0.0) || !v.is_finite() {
                        return Err(ScenarioError::SchemaGlobal(format!(
                            "scenario {} hydro {} has inflow {}",
                            w, self.hydro_names[h], v
                        )));
                    }
                }
            }
            check_grid(&s.capacity_factor, self.n_stages, self.n_days, self.n_hours, w, |v| {
                (0.0..=1.0).contains(&v)
            })?;
            check_grid(&s.demand_multiplier, self.n_stages, self.n_days, self.n_hours, w, |v| {
                v > 0.0 && v.is_finite()
            })?;
        }
        Ok(())
    }
}

fn check_grid(
    grid: &[Vec<Vec<Vec<f64>>>],
    n_stages: usize,
    n_days: usize,
    n_hours: usize,
    scenario: usize,
    ok: impl Fn(f64) -> bool,
) -> Result<(), ScenarioError> {
    for per_entity in grid {
        if per_entity.len() != n_stages {
            return Err(ScenarioError::SchemaGlobal(format!(
                "scenario {} hourly grid has {} stages, expected {}",
                scenario,
                per_entity.len(),
                n_stages
            )));
        }
        for per_stage in per_entity {
            if per_stage.len() != n_days {
                return Err(ScenarioError::SchemaGlobal(format!(
                    "scenario {} hourly grid has {} days, expected {}",
                    scenario,
                    per_stage.len(),
                    n_days
                )));
            }
            for per_day in per_stage {
                if per_day.len() != n_hours {
                    return Err(ScenarioError::SchemaGlobal(format!(
                        "scenario {} hourly grid has {} hours, expected {}",
                        scenario,
                        per_day.len(),
                        n_hours
                    )));
                }
                for &v in per_day {
                    if !ok(v) {
                        return Err(ScenarioError::SchemaGlobal(format!(
                            "scenario {} hourly grid value {} out of range",
                            scenario, v
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Rounds to 12 significant digits; the result's shortest decimal form is
/// at most 12 digits, so writing it with `{}` round-trips exactly.
pub(crate) fn quantize12(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.11e}", v).parse().unwrap()
}

/// Shape of the system the generator needs; avoids a dependency cycle with
/// the model module.
pub struct GeneratorDims<'a> {
    pub hydro_names: &'a [String],
    pub renewable_names: &'a [String],
    pub bus_names: &'a [String],
    pub n_stages: usize,
    pub n_days: usize,
    pub n_hours: usize,
}

pub fn generate(
    spec: &ScenarioSpec,
    dims: &GeneratorDims,
    n: usize,
    seed: u64,
) -> Result<ScenarioSet, ScenarioError> {
    spec.check()?;
    if n == 0 {
        return Err(ScenarioError::InvalidSpec("need at least one scenario".into()));
    }
    if spec.inflow.len() != dims.hydro_names.len() {
        return Err(ScenarioError::InvalidSpec(format!(
            "{} inflow parameter sets for {} hydros",
            spec.inflow.len(),
            dims.hydro_names.len()
        )));
    }
    if !dims.renewable_names.is_empty() && spec.diurnal_shape.len() != dims.n_hours {
        return Err(ScenarioError::InvalidSpec(format!(
            "diurnal shape has {} hours, system day has {}",
            spec.diurnal_shape.len(),
            dims.n_hours
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_hydro = dims.hydro_names.len();
    let rho = spec.inflow_renewable_correlation;
    let sigma_d = (1.0 + spec.demand_noise_cv * spec.demand_noise_cv).ln().sqrt();

    let mut scenarios = Vec::with_capacity(n);
    for _ in 0..n {
        // Inflows first; their standardized innovations drive the
        // renewable correlation.
        let mut inflow = vec![vec![0.0; dims.n_stages]; n_hydro];
        let mut innovation_mean = vec![0.0; dims.n_stages];
        for (h, p) in spec.inflow.iter().enumerate() {
            let sigma_stat2 = (1.0 + p.cv * p.cv).ln();
            let sigma_stat = sigma_stat2.sqrt();
            let sigma_step = sigma_stat * (1.0 - p.phi * p.phi).sqrt();
            let mut z = 0.0;
            for t in 0..dims.n_stages {
                let eps: f64 = rng.sample(StandardNormal);
                innovation_mean[t] += eps / n_hydro.max(1) as f64;
                z = if t == 0 {
                    sigma_stat * eps
                } else {
                    p.phi * z + sigma_step * eps
                };
                let seasonal = if spec.seasonal_shape.is_empty() {
                    1.0
                } else {
                    spec.seasonal_shape[t % spec.seasonal_shape.len()]
                };
                let v = p.mean * seasonal * (z - 0.5 * sigma_stat2).exp();
                inflow[h][t] = quantize12(v);
            }
        }

        let mut capacity_factor = Vec::with_capacity(dims.renewable_names.len());
        for _ in 0..dims.renewable_names.len() {
            let mut per_stage = Vec::with_capacity(dims.n_stages);
            for t in 0..dims.n_stages {
                let mut per_day = Vec::with_capacity(dims.n_days);
                for _ in 0..dims.n_days {
                    let mut per_hour = Vec::with_capacity(dims.n_hours);
                    for h in 0..dims.n_hours {
                        let base = spec.diurnal_shape[h].clamp(1e-6, 1.0 - 1e-6);
                        let indep: f64 = rng.sample(StandardNormal);
                        let eta = rho * innovation_mean[t] + (1.0 - rho * rho).sqrt() * indep;
                        let logit = (base / (1.0 - base)).ln() + spec.renewable_noise_cv * eta;
                        let f = 1.0 / (1.0 + (-logit).exp());
                        per_hour.push(quantize12(f.clamp(0.0, 1.0)));
                    }
                    per_day.push(per_hour);
                }
                per_stage.push(per_day);
            }
            capacity_factor.push(per_stage);
        }

        let mut demand_multiplier = Vec::with_capacity(dims.bus_names.len());
        for _ in 0..dims.bus_names.len() {
            let mut per_stage = Vec::with_capacity(dims.n_stages);
            for _ in 0..dims.n_stages {
                let mut per_day = Vec::with_capacity(dims.n_days);
                for _ in 0..dims.n_days {
                    let mut per_hour = Vec::with_capacity(dims.n_hours);
                    for _ in 0..dims.n_hours {
                        let xi: f64 = rng.sample(StandardNormal);
                        let mult = (sigma_d * xi - 0.5 * sigma_d * sigma_d).exp();
                        per_hour.push(quantize12(mult));
                    }
                    per_day.push(per_hour);
                }
                per_stage.push(per_day);
            }
            demand_multiplier.push(per_stage);
        }

        scenarios.push(Scenario { inflow, capacity_factor, demand_multiplier });
    }

    let probability = vec![1.0 / n as f64; n];
    let fingerprint = fingerprint_of(spec, dims, n, seed);
    let set = ScenarioSet {
        hydro_names: dims.hydro_names.to_vec(),
        renewable_names: dims.renewable_names.to_vec(),
        bus_names: dims.bus_names.to_vec(),
        n_stages: dims.n_stages,
        n_days: dims.n_days,
        n_hours: dims.n_hours,
        probability,
        scenarios,
        seed,
        fingerprint,
    };
    set.check()?;
    Ok(set)
}

fn fingerprint_of(spec: &ScenarioSpec, dims: &GeneratorDims, n: usize, seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(spec).unwrap().as_bytes());
    hasher.update(format!(
        "|{:?}|{:?}|{:?}|{}|{}|{}|{}|{}",
        dims.hydro_names, dims.renewable_names, dims.bus_names, dims.n_stages, dims.n_days,
        dims.n_hours, n, seed
    ));
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{:02x}", b)).collect()
}

/// Splits into disjoint in-sample / out-of-sample parts. Membership is
/// drawn with a seeded Fisher-Yates pass; probabilities are reset to
/// uniform within each part.
pub fn split(
    set: &ScenarioSet,
    n_in: usize,
    seed: u64,
) -> Result<(ScenarioSet, ScenarioSet), ScenarioError> {
    let n = set.len();
    if n_in == 0 || n_in >= n {
        return Err(ScenarioError::Split(format!(
            "cannot take {} in-sample scenarios from a set of {}",
            n_in, n
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let pick = |idx: &[usize]| -> ScenarioSet {
        let scenarios: Vec<Scenario> = idx.iter().map(|&i| set.scenarios[i].clone()).collect();
        ScenarioSet {
            hydro_names: set.hydro_names.clone(),
            renewable_names: set.renewable_names.clone(),
            bus_names: set.bus_names.clone(),
            n_stages: set.n_stages,
            n_days: set.n_days,
            n_hours: set.n_hours,
            probability: vec![1.0 / idx.len() as f64; idx.len()],
            scenarios,
            seed: set.seed,
            fingerprint: format!("{}-split{}", set.fingerprint, seed),
        }
    };
    let mut in_idx = order[..n_in].to_vec();
    let mut out_idx = order[n_in..].to_vec();
    in_idx.sort_unstable();
    out_idx.sort_unstable();
    Ok((pick(&in_idx), pick(&out_idx)))
}

// ---- CSV persistence ----
//
// One file, header `kind,scenario,entity,stage,day,hour,value`, one row per
// (scenario, entity, stage[, day, hour]). Kinds: `probability` (entity and
// indices empty), `inflow` (stage only), `capacity_factor` and
// `demand_multiplier` (stage, day, hour). Decimal point, comma separator,
// UTF-8. Every (scenario, entity, index) combination must appear exactly
// once.

pub fn save_csv<P: AsRef<Path>>(set: &ScenarioSet, path: P) -> Result<(), ScenarioError> {
    set.check()?;
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "kind,scenario,entity,stage,day,hour,value")?;
    for (w, p) in set.probability.iter().enumerate() {
        writeln!(out, "probability,{},,,,,{}", w, p)?;
    }
    for (w, s) in set.scenarios.iter().enumerate() {
        for (h, name) in set.hydro_names.iter().enumerate() {
            for t in 0..set.n_stages {
                writeln!(out, "inflow,{},{},{},,,{}", w, name, t, s.inflow[h][t])?;
            }
        }
        for (r, name) in set.renewable_names.iter().enumerate() {
            for t in 0..set.n_stages {
                for d in 0..set.n_days {
                    for hh in 0..set.n_hours {
                        writeln!(
                            out,
                            "capacity_factor,{},{},{},{},{},{}",
                            w, name, t, d, hh, s.capacity_factor[r][t][d][hh]
                        )?;
                    }
                }
            }
        }
        for (b, name) in set.bus_names.iter().enumerate() {
            for t in 0..set.n_stages {
                for d in 0..set.n_days {
                    for hh in 0..set.n_hours {
                        writeln!(
                            out,
                            "demand_multiplier,{},{},{},{},{},{}",
                            w, name, t, d, hh, s.demand_multiplier[b][t][d][hh]
                        )?;
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Probability,
    Inflow,
    CapacityFactor,
    DemandMultiplier,
}

pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<ScenarioSet, ScenarioError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(File::open(path)?));
    {
        let headers = reader.headers()?;
        let expect = ["kind", "scenario", "entity", "stage", "day", "hour", "value"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expect {
            return Err(ScenarioError::SchemaGlobal(format!(
                "bad header {:?}, expected {:?}",
                got, expect
            )));
        }
    }

    struct Row {
        kind: Kind,
        scenario: usize,
        entity: String,
        stage: usize,
        day: usize,
        hour: usize,
        value: f64,
        line: usize,
    }
    let mut rows: Vec<Row> = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let rec = rec?;
        if rec.len() != 7 {
            return Err(ScenarioError::Schema {
                row: line,
                msg: format!("expected 7 fields, got {}", rec.len()),
            });
        }
        let kind = match &rec[0] {
            "probability" => Kind::Probability,
            "inflow" => Kind::Inflow,
            "capacity_factor" => Kind::CapacityFactor,
            "demand_multiplier" => Kind::DemandMultiplier,
            other => {
                return Err(ScenarioError::Schema {
                    row: line,
                    msg: format!("unknown kind '{}'", other),
                })
            }
        };
        let parse_idx = |field: &str, name: &str, required: bool| -> Result<usize, ScenarioError> {
            if field.is_empty() {
                if required {
                    Err(ScenarioError::Schema { row: line, msg: format!("missing {}", name) })
                } else {
                    Ok(0)
                }
            } else {
                field.parse().map_err(|_| ScenarioError::Schema {
                    row: line,
                    msg: format!("bad {} '{}'", name, field),
                })
            }
        };
        let scenario = parse_idx(&rec[1], "scenario", true)?;
        let needs_day = matches!(kind, Kind::CapacityFactor | Kind::DemandMultiplier);
        let stage = parse_idx(&rec[3], "stage", kind != Kind::Probability)?;
        let day = parse_idx(&rec[4], "day", needs_day)?;
        let hour = parse_idx(&rec[5], "hour", needs_day)?;
        let value: f64 = rec[6].parse().map_err(|_| ScenarioError::Schema {
            row: line,
            msg: format!("bad value '{}'", &rec[6]),
        })?;
        if kind != Kind::Probability && rec[2].is_empty() {
            return Err(ScenarioError::Schema { row: line, msg: "missing entity".into() });
        }
        rows.push(Row {
            kind,
            scenario,
            entity: rec[2].to_string(),
            stage,
            day,
            hour,
            value,
            line,
        });
    }
    if rows.is_empty() {
        return Err(ScenarioError::SchemaGlobal("file contains no data rows".into()));
    }

    let n = rows.iter().map(|r| r.scenario).max().unwrap() + 1;
    let mut probability = vec![f64::NAN; n];
    let mut hydro_names: Vec<String> = Vec::new();
    let mut renewable_names: Vec<String> = Vec::new();
    let mut bus_names: Vec<String> = Vec::new();
    let mut n_stages = 0usize;
    let mut n_days = 0usize;
    let mut n_hours = 0usize;
    for r in &rows {
        match r.kind {
            Kind::Probability => {}
            Kind::Inflow => {
                if !hydro_names.contains(&r.entity) {
                    hydro_names.push(r.entity.clone());
                }
                n_stages = n_stages.max(r.stage + 1);
            }
            Kind::CapacityFactor => {
                if !renewable_names.contains(&r.entity) {
                    renewable_names.push(r.entity.clone());
                }
                n_stages = n_stages.max(r.stage + 1);
                n_days = n_days.max(r.day + 1);
                n_hours = n_hours.max(r.hour + 1);
            }
            Kind::DemandMultiplier => {
                if !bus_names.contains(&r.entity) {
                    bus_names.push(r.entity.clone());
                }
                n_stages = n_stages.max(r.stage + 1);
                n_days = n_days.max(r.day + 1);
                n_hours = n_hours.max(r.hour + 1);
            }
        }
    }
    if n_days == 0 {
        n_days = 1;
    }
    if n_hours == 0 {
        n_hours = 1;
    }

    let blank = Scenario {
        inflow: vec![vec![f64::NAN; n_stages]; hydro_names.len()],
        capacity_factor: vec![
            vec![vec![vec![f64::NAN; n_hours]; n_days]; n_stages];
            renewable_names.len()
        ],
        demand_multiplier: vec![
            vec![vec![vec![f64::NAN; n_hours]; n_days]; n_stages];
            bus_names.len()
        ],
    };
    let mut scenarios = vec![blank; n];
    let index_of = |names: &[String], name: &str| names.iter().position(|x| x == name).unwrap();
    for r in &rows {
        let fill = |slot: &mut f64| -> Result<(), ScenarioError> {
            if !slot.is_nan() {
                return Err(ScenarioError::Schema {
                    row: r.line,
                    msg: format!("duplicate entry for {} scenario {}", r.entity, r.scenario),
                });
            }
            *slot = r.value;
            Ok(())
        };
        match r.kind {
            Kind::Probability => fill(&mut probability[r.scenario])?,
            Kind::Inflow => {
                let h = index_of(&hydro_names, &r.entity);
                fill(&mut scenarios[r.scenario].inflow[h][r.stage])?
            }
            Kind::CapacityFactor => {
                let e = index_of(&renewable_names, &r.entity);
                fill(&mut scenarios[r.scenario].capacity_factor[e][r.stage][r.day][r.hour])?
            }
            Kind::DemandMultiplier => {
                let b = index_of(&bus_names, &r.entity);
                fill(&mut scenarios[r.scenario].demand_multiplier[b][r.stage][r.day][r.hour])?
            }
        }
    }
    for (w, p) in probability.iter().enumerate() {
        if p.is_nan() {
            return Err(ScenarioError::SchemaGlobal(format!(
                "missing probability row for scenario {}",
                w
            )));
        }
    }
    for (w, s) in scenarios.iter().enumerate() {
        let missing = s.inflow.iter().flatten().any(|v| v.is_nan())
            || s.capacity_factor.iter().flatten().flatten().flatten().any(|v| v.is_nan())
            || s.demand_multiplier.iter().flatten().flatten().flatten().any(|v| v.is_nan());
        if missing {
            return Err(ScenarioError::SchemaGlobal(format!(
                "scenario {} is missing grid entries (incomplete file)",
                w
            )));
        }
    }

    let mut hasher = Sha256::new();
    for r in &rows {
        hasher.update(format!(
            "{:?}|{}|{}|{}|{}|{}|{}\n",
            r.kind, r.scenario, r.entity, r.stage, r.day, r.hour, r.value
        ));
    }
    let digest = hasher.finalize();
    let set = ScenarioSet {
        hydro_names,
        renewable_names,
        bus_names,
        n_stages,
        n_days,
        n_hours,
        probability,
        scenarios,
        seed: 0,
        fingerprint: digest.iter().take(8).map(|b| format!("{:02x}", b)).collect(),
    };
    set.check()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_spec(n_hydro: usize, cv: f64, phi: f64) -> ScenarioSpec {
        ScenarioSpec {
            inflow: (0..n_hydro)
                .map(|_| InflowParams { mean: 80.0, cv, phi })
                .collect(),
            seasonal_shape: vec![1.2, 0.9, 0.9],
            diurnal_shape: vec![0.2, 0.5, 0.6, 0.3],
            renewable_noise_cv: 0.4,
            demand_noise_cv: 0.05,
            inflow_renewable_correlation: -0.5,
        }
    }

    fn dims<'a>(
        hydros: &'a [String],
        renewables: &'a [String],
        buses: &'a [String],
    ) -> GeneratorDims<'a> {
        GeneratorDims {
            hydro_names: hydros,
            renewable_names: renewables,
            bus_names: buses,
            n_stages: 3,
            n_days: 2,
            n_hours: 4,
        }
    }

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{}{}", prefix, i)).collect()
    }

    #[test]
    fn degenerate_spec_hits_seasonal_mean_exactly() {
        let hydros = names("h", 1);
        let renews = names("r", 1);
        let buses = names("b", 1);
        let spec = toy_spec(1, 0.0, 0.0);
        let set = generate(&spec, &dims(&hydros, &renews, &buses), 5, 1).unwrap();
        for s in &set.scenarios {
            assert!((s.inflow[0][0] - 80.0 * 1.2).abs() < 1e-9);
            assert!((s.inflow[0][1] - 80.0 * 0.9).abs() < 1e-9);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let hydros = names("h", 2);
        let renews = names("r", 1);
        let buses = names("b", 2);
        let spec = toy_spec(2, 0.4, 0.3);
        let a = generate(&spec, &dims(&hydros, &renews, &buses), 7, 42).unwrap();
        let b = generate(&spec, &dims(&hydros, &renews, &buses), 7, 42).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec, &dims(&hydros, &renews, &buses), 7, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_mean_tracks_spec_mean() {
        let hydros = names("h", 1);
        let renews = vec![];
        let buses = names("b", 1);
        let mut spec = toy_spec(1, 0.5, 0.4);
        spec.seasonal_shape = vec![];
        let set = generate(&spec, &dims(&hydros, &renews, &buses), 400, 5).unwrap();
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in &set.scenarios {
            for v in &s.inflow[0] {
                sum += v;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!(
            (mean - 80.0).abs() < 8.0,
            "sample mean {} strays from 80 by more than 10%",
            mean
        );
    }

    #[test]
    fn lag1_autocorrelation_matches_phi() {
        let hydros = names("h", 1);
        let renews = vec![];
        let buses = vec![];
        let mut spec = toy_spec(1, 0.6, 0.5);
        spec.seasonal_shape = vec![];
        let d = GeneratorDims {
            hydro_names: &hydros,
            renewable_names: &renews,
            bus_names: &buses,
            n_stages: 12,
            n_days: 1,
            n_hours: 1,
        };
        let set = generate(&spec, &d, 10_000, 9).unwrap();
        // Pooled lag-1 autocorrelation of log inflows across scenarios.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &set.scenarios {
            let logs: Vec<f64> = s.inflow[0].iter().map(|v| v.ln()).collect();
            for t in 1..logs.len() {
                xs.push(logs[t - 1]);
                ys.push(logs[t]);
            }
        }
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
        let vy: f64 = ys.iter().map(|b| (b - my) * (b - my)).sum();
        let corr = cov / (vx.sqrt() * vy.sqrt());
        assert!(
            (0.45..=0.55).contains(&corr),
            "lag-1 autocorrelation {} outside [0.45, 0.55]",
            corr
        );
    }

    #[test]
    fn csv_round_trip_is_value_identical() {
        let hydros = names("h", 2);
        let renews = names("r", 1);
        let buses = names("b", 2);
        let spec = toy_spec(2, 0.4, 0.3);
        let set = generate(&spec, &dims(&hydros, &renews, &buses), 4, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenarios.csv");
        save_csv(&set, &path).unwrap();
        let loaded = load_csv(&path).unwrap();
        assert_eq!(set.scenarios, loaded.scenarios);
        assert_eq!(set.probability, loaded.probability);
        assert_eq!(set.hydro_names, loaded.hydro_names);
        // A second save of the loaded set is byte-identical.
        let path2 = dir.path().join("scenarios2.csv");
        save_csv(&loaded, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn empty_and_malformed_files_are_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        assert!(load_csv(&path).is_err());

        let path = dir.path().join("headeronly.csv");
        std::fs::write(&path, "kind,scenario,entity,stage,day,hour,value\n").unwrap();
        assert!(matches!(load_csv(&path), Err(ScenarioError::SchemaGlobal(_))));

        let path = dir.path().join("badkind.csv");
        std::fs::write(
            &path,
            "kind,scenario,entity,stage,day,hour,value\nweird,0,,,,,1\n",
        )
        .unwrap();
        match load_csv(&path) {
            Err(ScenarioError::Schema { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected schema error with row, got {:?}", other.err()),
        }
    }

    #[test]
    fn split_partitions_and_renormalizes() {
        let hydros = names("h", 1);
        let renews = names("r", 1);
        let buses = names("b", 1);
        let spec = toy_spec(1, 0.3, 0.2);
        let set = generate(&spec, &dims(&hydros, &renews, &buses), 60, 3).unwrap();
        let (ins, oos) = split(&set, 50, 17).unwrap();
        assert_eq!(ins.len(), 50);
        assert_eq!(oos.len(), 10);
        assert!((ins.probability.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((oos.probability.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Union of parts equals the original multiset.
        let mut all: Vec<String> =
            ins.scenarios.iter().chain(&oos.scenarios).map(|s| format!("{:?}", s)).collect();
        let mut orig: Vec<String> = set.scenarios.iter().map(|s| format!("{:?}", s)).collect();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
        assert!(split(&set, 60, 1).is_err());
        assert!(split(&set, 0, 1).is_err());
    }

    #[test]
    fn invariants_hold_for_random_specs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..20 {
            let n_hydro = rng.gen_range(0..3);
            let hydros = names("h", n_hydro);
            let renews = names("r", rng.gen_range(0..3));
            let buses = names("b", rng.gen_range(1..3));
            let spec = ScenarioSpec {
                inflow: (0..n_hydro)
                    .map(|_| InflowParams {
                        mean: rng.gen_range(0.0..200.0),
                        cv: rng.gen_range(0.0..1.5),
                        phi: rng.gen_range(0.0..0.95),
                    })
                    .collect(),
                seasonal_shape: vec![rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5)],
                diurnal_shape: vec![
                    rng.gen_range(0.05..0.95),
                    rng.gen_range(0.05..0.95),
                    rng.gen_range(0.05..0.95),
                    rng.gen_range(0.05..0.95),
                ],
                renewable_noise_cv: rng.gen_range(0.0..1.0),
                demand_noise_cv: rng.gen_range(0.0..0.3),
                inflow_renewable_correlation: rng.gen_range(-1.0..1.0),
            };
            let set = generate(&spec, &dims(&hydros, &renews, &buses), 10, trial).unwrap();
            set.check().unwrap();
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        let hydros = names("h", 1);
        let renews = names("r", 1);
        let buses = names("b", 1);
        let mut bad = toy_spec(1, 0.2, 0.2);
        bad.inflow[0].phi = 1.0;
        assert!(generate(&bad, &dims(&hydros, &renews, &buses), 3, 1).is_err());
        let mut bad = toy_spec(1, 0.2, 0.2);
        bad.inflow_renewable_correlation = 1.5;
        assert!(generate(&bad, &dims(&hydros, &renews, &buses), 3, 1).is_err());
        let good = toy_spec(1, 0.2, 0.2);
        assert!(generate(&good, &dims(&hydros, &renews, &buses), 0, 1).is_err());
    }
}
