//! Model builders: the compact two-stage form (shared first stage, one
//! operational block per scenario, coupling rows carrying first-stage
//! coefficients) and an independent direct builder for the deterministic
//! equivalent. The two construction paths are deliberately separate so
//! they can cross-check each other.
//!
//! First stage `x`: one investment variable per unit (existing units are
//! fixed to 1 through bounds), then decision-rule intercepts per
//! (hydro, stage), then decision-rule slopes per (hydro, source hydro,
//! stage) mapping current-stage inflows to turbined outflow.
//!
//! Per scenario the operational block carries, in order: investment/
//! availability limits on every unit's hourly generation (coupling),
//! decision-rule rows tying turbined outflow to the rule (coupling, with
//! elastic relief so any first-stage choice stays feasible), reservoir
//! balances with a penalized overflow release, the cyclic end-of-horizon
//! storage floor, monthly hydro energy coupling, hourly bus balances with
//! deficit variables, thermal ramp limits and line flow limits.

use serde::{Deserialize, Serialize};

use super::system::{validate, SystemData, UnitStatus};
use crate::lp::{LpError, LpInstance, MilpInstance, RowSense};
use crate::scenario::ScenarioSet;

/// Hard box on decision-rule slope coefficients.
pub const LDR_SLOPE_BOUND: f64 = 10.0;

/// Elastic penalties are priced at this multiple of the maximum energy
/// value a unit of water could ever displace, so they never activate in an
/// optimum unless the block would otherwise be infeasible.
const RELIEF_FACTOR: f64 = 1.5;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid system ({} diagnostics):\n{}", .0.len(), .0.iter().map(|d| format!("  - {}", d)).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<super::system::Diagnostic>),
    #[error("scenario data mismatch: {0}")]
    Scenario(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Index ranges inside the flat first-stage vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstStageLayout {
    pub n_units: usize,
    pub n_hydros: usize,
    pub n_stages: usize,
    pub ldr0_start: usize,
    pub ldrw_start: usize,
    pub n_x: usize,
}

impl FirstStageLayout {
    pub fn new(n_units: usize, n_hydros: usize, n_stages: usize) -> Self {
        let ldr0_start = n_units;
        let ldrw_start = ldr0_start + n_hydros * n_stages;
        let n_x = ldrw_start + n_hydros * n_hydros * n_stages;
        Self { n_units, n_hydros, n_stages, ldr0_start, ldrw_start, n_x }
    }

    pub fn inv(&self, unit: usize) -> usize {
        unit
    }

    pub fn ldr0(&self, hydro: usize, stage: usize) -> usize {
        self.ldr0_start + hydro * self.n_stages + stage
    }

    /// Slope of `hydro`'s outflow with respect to `source`'s inflow.
    pub fn ldrw(&self, hydro: usize, source: usize, stage: usize) -> usize {
        self.ldrw_start + (hydro * self.n_hydros + source) * self.n_stages + stage
    }

    pub fn inv_range(&self) -> std::ops::Range<usize> {
        0..self.n_units
    }

    pub fn ldr_range(&self) -> std::ops::Range<usize> {
        self.ldr0_start..self.n_x
    }
}

/// One scenario normalized to the system's entity order, with demand
/// multipliers already applied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioData {
    /// hm3/month, `[hydro][stage]`.
    pub inflow: Vec<Vec<f64>>,
    /// `[renewable][stage][day][hour]`.
    pub capacity_factor: Vec<Vec<Vec<Vec<f64>>>>,
    /// Final MW after multipliers, `[bus][stage][day][hour]`.
    pub demand_mw: Vec<Vec<Vec<Vec<f64>>>>,
}

/// Variable index map of one operational block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YLayout {
    pub n_units: usize,
    pub n_buses: usize,
    pub n_hydros: usize,
    pub n_stages: usize,
    pub n_days: usize,
    pub n_hours: usize,
    pub has_ldr: bool,
    g_start: usize,
    theta_start: usize,
    deficit_start: usize,
    v_start: usize,
    u_start: usize,
    s_start: usize,
    relief_start: usize,
    excess_start: usize,
    pub n_y: usize,
}

impl YLayout {
    fn new(system: &SystemData, has_ldr: bool) -> Self {
        let n_units = system.n_units();
        let n_buses = system.buses.len();
        let n_hydros = system.hydros.len();
        let n_stages = system.n_stages();
        let n_days = system.n_days();
        let n_hours = system.hours_per_day;
        let hourly = n_stages * n_days * n_hours;
        let g_start = 0;
        let theta_start = g_start + n_units * hourly;
        let deficit_start = theta_start + n_buses * hourly;
        let v_start = deficit_start + n_buses * hourly;
        let u_start = v_start + n_hydros * n_stages;
        let s_start = u_start + n_hydros * n_stages;
        let relief_start = s_start + n_hydros * n_stages;
        let excess_start =
            relief_start + if has_ldr { 2 * n_hydros * n_stages } else { 0 };
        let n_y = excess_start + n_hydros * n_stages;
        Self {
            n_units,
            n_buses,
            n_hydros,
            n_stages,
            n_days,
            n_hours,
            has_ldr,
            g_start,
            theta_start,
            deficit_start,
            v_start,
            u_start,
            s_start,
            relief_start,
            excess_start,
            n_y,
        }
    }

    fn hourly(&self, start: usize, e: usize, t: usize, d: usize, h: usize) -> usize {
        start + ((e * self.n_stages + t) * self.n_days + d) * self.n_hours + h
    }

    pub fn g(&self, unit: usize, t: usize, d: usize, h: usize) -> usize {
        self.hourly(self.g_start, unit, t, d, h)
    }

    pub fn theta(&self, bus: usize, t: usize, d: usize, h: usize) -> usize {
        self.hourly(self.theta_start, bus, t, d, h)
    }

    pub fn deficit(&self, bus: usize, t: usize, d: usize, h: usize) -> usize {
        self.hourly(self.deficit_start, bus, t, d, h)
    }

    pub fn v(&self, hydro: usize, t: usize) -> usize {
        self.v_start + hydro * self.n_stages + t
    }

    pub fn turbined(&self, hydro: usize, t: usize) -> usize {
        self.u_start + hydro * self.n_stages + t
    }

    pub fn spill(&self, hydro: usize, t: usize) -> usize {
        self.s_start + hydro * self.n_stages + t
    }

    /// Elastic deviation below/above the decision rule (nonanticipative
    /// blocks only).
    pub fn relief(&self, hydro: usize, t: usize, positive: bool) -> usize {
        debug_assert!(self.has_ldr);
        self.relief_start + (hydro * self.n_stages + t) * 2 + usize::from(positive)
    }

    /// Overflow release that leaves the cascade entirely.
    pub fn excess(&self, hydro: usize, t: usize) -> usize {
        self.excess_start + hydro * self.n_stages + t
    }
}

/// A row coupling the block to the first stage: the block LP carries the
/// `W y` part and the plain rhs `h`; `t_coefs` holds the first-stage
/// coefficients `T` of `W y - T x (sense) h`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingRow {
    pub row: usize,
    pub t_coefs: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadBalanceTag {
    pub row: usize,
    pub bus: usize,
    pub stage: usize,
    pub day: usize,
    pub hour: usize,
    pub hour_weight: f64,
    pub demand_mw: f64,
}

/// One scenario's operational feasibility block plus its coupling rows.
#[derive(Debug, Clone)]
pub struct ScenarioBlock {
    pub lp: LpInstance,
    pub coupling: Vec<CouplingRow>,
    pub load_balance: Vec<LoadBalanceTag>,
    pub y: YLayout,
}

/// The standard two-stage form: first-stage costs and box, binary marker
/// set, probabilities, and one operational block per scenario. The source
/// system is retained so blocks can be instantiated for unseen scenarios.
#[derive(Debug, Clone)]
pub struct CompactTwoStage {
    pub system: SystemData,
    pub layout: FirstStageLayout,
    pub first_stage_cost: Vec<f64>,
    pub x_lower: Vec<Option<f64>>,
    pub x_upper: Vec<Option<f64>>,
    pub x_names: Vec<String>,
    pub binaries: Vec<usize>,
    pub probability: Vec<f64>,
    pub scenario_data: Vec<ScenarioData>,
    pub blocks: Vec<ScenarioBlock>,
    pub anticipative: bool,
}

fn unit_fields(system: &SystemData, unit: usize) -> (String, usize, f64, f64, UnitStatus, f64) {
    // (name, bus, capacity, variable cost, status, investment cost)
    let nt = system.thermals.len();
    let nr = system.renewables.len();
    if unit < nt {
        let t = &system.thermals[unit];
        (t.name.clone(), t.bus, t.capacity_mw, t.variable_cost, t.status, t.investment_cost)
    } else if unit < nt + nr {
        let r = &system.renewables[unit - nt];
        (r.name.clone(), r.bus, r.capacity_mw, 0.0, r.status, r.investment_cost)
    } else {
        let h = &system.hydros[unit - nt - nr];
        (h.name.clone(), h.bus, h.capacity_mw, 0.0, h.status, h.investment_cost)
    }
}

fn hydro_unit_index(system: &SystemData, hydro: usize) -> usize {
    system.thermals.len() + system.renewables.len() + hydro
}

fn relief_cost(system: &SystemData, hydro: usize) -> f64 {
    let max_hours = system.stages.iter().fold(0.0f64, |a, s| a.max(s.month_hours));
    RELIEF_FACTOR * system.deficit_cost * system.hydros[hydro].productivity * max_hours
}

/// Aligns a scenario set to the system by entity name and applies demand
/// multipliers to the base demand.
pub fn normalize_scenarios(
    system: &SystemData,
    set: &ScenarioSet,
) -> Result<Vec<ScenarioData>, ModelError> {
    if set.is_empty() {
        return Err(ModelError::Scenario("scenario set is empty".into()));
    }
    if set.n_stages != system.n_stages()
        || set.n_days != system.n_days()
        || set.n_hours != system.hours_per_day
    {
        return Err(ModelError::Scenario(format!(
            "scenario grid {}x{}x{} (stages x days x hours) does not match system {}x{}x{}",
            set.n_stages,
            set.n_days,
            set.n_hours,
            system.n_stages(),
            system.n_days(),
            system.hours_per_day
        )));
    }
    let position = |names: &[String], wanted: &str, kind: &str| -> Result<usize, ModelError> {
        names.iter().position(|n| n == wanted).ok_or_else(|| {
            ModelError::Scenario(format!("{} '{}' missing from scenario set", kind, wanted))
        })
    };
    let hydro_map: Vec<usize> = system
        .hydros
        .iter()
        .map(|h| position(&set.hydro_names, &h.name, "hydro"))
        .collect::<Result<_, _>>()?;
    let renew_map: Vec<usize> = system
        .renewables
        .iter()
        .map(|r| position(&set.renewable_names, &r.name, "renewable"))
        .collect::<Result<_, _>>()?;
    let bus_map: Vec<usize> = system
        .buses
        .iter()
        .map(|b| position(&set.bus_names, &b.name, "bus"))
        .collect::<Result<_, _>>()?;

    let mut out = Vec::with_capacity(set.len());
    for s in &set.scenarios {
        let inflow: Vec<Vec<f64>> = hydro_map.iter().map(|&i| s.inflow[i].clone()).collect();
        let capacity_factor: Vec<_> =
            renew_map.iter().map(|&i| s.capacity_factor[i].clone()).collect();
        let mut demand_mw = Vec::with_capacity(system.buses.len());
        for (b, &src) in bus_map.iter().enumerate() {
            let mut per_stage = Vec::with_capacity(system.n_stages());
            for t in 0..system.n_stages() {
                let mut per_day = Vec::with_capacity(system.n_days());
                for d in 0..system.n_days() {
                    let mut per_hour = Vec::with_capacity(system.hours_per_day);
                    for h in 0..system.hours_per_day {
                        per_hour.push(
                            system.demand_mw[b][t][d][h] * s.demand_multiplier[src][t][d][h],
                        );
                    }
                    per_day.push(per_hour);
                }
                per_stage.push(per_day);
            }
            demand_mw.push(per_stage);
        }
        out.push(ScenarioData { inflow, capacity_factor, demand_mw });
    }
    Ok(out)
}

/// Builds one scenario's operational block.
pub fn build_block(system: &SystemData, data: &ScenarioData, anticipative: bool) -> ScenarioBlock {
    let y = YLayout::new(system, !anticipative);
    let mut lp = LpInstance::new();
    let n_units = system.n_units();
    let nt = system.thermals.len();

    // Columns, in layout order.
    for u in 0..n_units {
        let (name, _, _, var_cost, _, _) = unit_fields(system, u);
        for t in 0..y.n_stages {
            for d in 0..y.n_days {
                for h in 0..y.n_hours {
                    let c = var_cost * system.hour_weight(t, d);
                    lp.add_col(format!("g[{}][{}][{}][{}]", name, t, d, h), c, Some(0.0), None);
                }
            }
        }
    }
    for (b, bus) in system.buses.iter().enumerate() {
        for t in 0..y.n_stages {
            for d in 0..y.n_days {
                for h in 0..y.n_hours {
                    let (lo, hi) = if b == system.reference_bus {
                        (Some(0.0), Some(0.0))
                    } else {
                        (None, None)
                    };
                    lp.add_col(format!("theta[{}][{}][{}][{}]", bus.name, t, d, h), 0.0, lo, hi);
                }
            }
        }
    }
    for (b, bus) in system.buses.iter().enumerate() {
        let _ = b;
        for t in 0..y.n_stages {
            for d in 0..y.n_days {
                for h in 0..y.n_hours {
                    let c = system.deficit_cost * system.hour_weight(t, d);
                    lp.add_col(
                        format!("deficit[{}][{}][{}][{}]", bus.name, t, d, h),
                        c,
                        Some(0.0),
                        None,
                    );
                }
            }
        }
    }
    for (i, hydro) in system.hydros.iter().enumerate() {
        let _ = i;
        for t in 0..y.n_stages {
            lp.add_col(
                format!("v[{}][{}]", hydro.name, t),
                0.0,
                Some(hydro.reservoir.min_storage_hm3),
                Some(hydro.reservoir.max_storage_hm3),
            );
        }
    }
    for hydro in &system.hydros {
        for t in 0..y.n_stages {
            lp.add_col(
                format!("u[{}][{}]", hydro.name, t),
                0.0,
                Some(0.0),
                Some(hydro.max_turbining_hm3),
            );
        }
    }
    for hydro in &system.hydros {
        for t in 0..y.n_stages {
            lp.add_col(
                format!("s[{}][{}]", hydro.name, t),
                0.0,
                Some(0.0),
                Some(hydro.max_spillage_hm3),
            );
        }
    }
    if y.has_ldr {
        for (i, hydro) in system.hydros.iter().enumerate() {
            for t in 0..y.n_stages {
                let c = relief_cost(system, i);
                lp.add_col(format!("relief-[{}][{}]", hydro.name, t), c, Some(0.0), None);
                lp.add_col(format!("relief+[{}][{}]", hydro.name, t), c, Some(0.0), None);
            }
        }
    }
    for (i, hydro) in system.hydros.iter().enumerate() {
        for t in 0..y.n_stages {
            let c = relief_cost(system, i);
            lp.add_col(format!("overflow[{}][{}]", hydro.name, t), c, Some(0.0), None);
        }
    }
    debug_assert_eq!(lp.n_cols(), y.n_y);

    let layout = FirstStageLayout::new(n_units, y.n_hydros, y.n_stages);
    let mut coupling = Vec::new();
    let mut load_balance = Vec::new();

    // Availability limits: g <= capacity * factor * invested.
    for u in 0..n_units {
        let (name, _, cap, _, _, _) = unit_fields(system, u);
        let renewable_idx = if u >= nt && u < nt + system.renewables.len() {
            Some(u - nt)
        } else {
            None
        };
        for t in 0..y.n_stages {
            for d in 0..y.n_days {
                for h in 0..y.n_hours {
                    let factor = match renewable_idx {
                        Some(r) => data.capacity_factor[r][t][d][h],
                        None => 1.0,
                    };
                    let row = lp.add_row(
                        format!("avail[{}][{}][{}][{}]", name, t, d, h),
                        RowSense::Le,
                        0.0,
                        &[(y.g(u, t, d, h), 1.0)],
                    );
                    coupling.push(CouplingRow {
                        row,
                        t_coefs: vec![(layout.inv(u), cap * factor)],
                    });
                }
            }
        }
    }

    // Decision-rule rows: u + relief- - relief+ = x0 + sum_src a_src * w.
    if y.has_ldr {
        for (i, hydro) in system.hydros.iter().enumerate() {
            for t in 0..y.n_stages {
                let row = lp.add_row(
                    format!("rule[{}][{}]", hydro.name, t),
                    RowSense::Eq,
                    0.0,
                    &[
                        (y.turbined(i, t), 1.0),
                        (y.relief(i, t, false), 1.0),
                        (y.relief(i, t, true), -1.0),
                    ],
                );
                let mut t_coefs = vec![(layout.ldr0(i, t), 1.0)];
                for src in 0..y.n_hydros {
                    let a = data.inflow[src][t];
                    if a != 0.0 {
                        t_coefs.push((layout.ldrw(i, src, t), a));
                    }
                }
                coupling.push(CouplingRow { row, t_coefs });
            }
        }
    }

    // Reservoir balance; releases of upstream hydros arrive, the overflow
    // column leaves the cascade.
    for (i, hydro) in system.hydros.iter().enumerate() {
        for t in 0..y.n_stages {
            let mut coefs = vec![
                (y.v(i, t), 1.0),
                (y.turbined(i, t), 1.0),
                (y.spill(i, t), 1.0),
                (y.excess(i, t), 1.0),
            ];
            for &up in &hydro.upstream {
                coefs.push((y.turbined(up, t), -1.0));
                coefs.push((y.spill(up, t), -1.0));
            }
            let mut rhs = data.inflow[i][t];
            if t == 0 {
                rhs += hydro.reservoir.initial_storage_hm3;
            } else {
                coefs.push((y.v(i, t - 1), -1.0));
            }
            lp.add_row(format!("balance[{}][{}]", hydro.name, t), RowSense::Eq, rhs, &coefs);
        }
    }

    // Cyclic storage floor.
    for (i, hydro) in system.hydros.iter().enumerate() {
        lp.add_row(
            format!("cycle[{}]", hydro.name),
            RowSense::Ge,
            hydro.reservoir.initial_storage_hm3,
            &[(y.v(i, y.n_stages - 1), 1.0)],
        );
    }

    // Monthly energy from turbined water.
    for (i, hydro) in system.hydros.iter().enumerate() {
        let gu = hydro_unit_index(system, i);
        for t in 0..y.n_stages {
            let mut coefs = vec![(
                y.turbined(i, t),
                -hydro.productivity * system.stages[t].month_hours,
            )];
            for d in 0..y.n_days {
                let hw = system.hour_weight(t, d);
                for h in 0..y.n_hours {
                    coefs.push((y.g(gu, t, d, h), hw));
                }
            }
            lp.add_row(format!("energy[{}][{}]", hydro.name, t), RowSense::Eq, 0.0, &coefs);
        }
    }

    // Hourly bus balance with DC flows.
    for (b, bus) in system.buses.iter().enumerate() {
        for t in 0..y.n_stages {
            for d in 0..y.n_days {
                for h in 0..y.n_hours {
                    let mut coefs: Vec<(usize, f64)> = Vec::new();
                    for u in 0..n_units {
                        let (_, ub, _, _, _, _) = unit_fields(system, u);
                        if ub == b {
                            coefs.push((y.g(u, t, d, h), 1.0));
                        }
                    }
                    for line in &system.lines {
                        if line.to_bus == b {
                            coefs.push((y.theta(line.from_bus, t, d, h), line.susceptance));
                            coefs.push((y.theta(line.to_bus, t, d, h), -line.susceptance));
                        }
                        if line.from_bus == b {
                            coefs.push((y.theta(line.from_bus, t, d, h), -line.susceptance));
                            coefs.push((y.theta(line.to_bus, t, d, h), line.susceptance));
                        }
                    }
                    coefs.push((y.deficit(b, t, d, h), 1.0));
                    let demand = data.demand_mw[b][t][d][h];
                    let row = lp.add_row(
                        format!("load[{}][{}][{}][{}]", bus.name, t, d, h),
                        RowSense::Eq,
                        demand,
                        &coefs,
                    );
                    load_balance.push(LoadBalanceTag {
                        row,
                        bus: b,
                        stage: t,
                        day: d,
                        hour: h,
                        hour_weight: system.hour_weight(t, d),
                        demand_mw: demand,
                    });
                }
            }
        }
    }

    // Thermal ramps within each typical day; omitted when the ramp can
    // never bind.
    for (i, th) in system.thermals.iter().enumerate() {
        if th.ramp_mw_per_hour >= th.capacity_mw {
            continue;
        }
        for t in 0..y.n_stages {
            for d in 0..y.n_days {
                for h in 1..y.n_hours {
                    lp.add_row(
                        format!("rampup[{}][{}][{}][{}]", th.name, t, d, h),
                        RowSense::Le,
                        th.ramp_mw_per_hour,
                        &[(y.g(i, t, d, h), 1.0), (y.g(i, t, d, h - 1), -1.0)],
                    );
                    lp.add_row(
                        format!("rampdn[{}][{}][{}][{}]", th.name, t, d, h),
                        RowSense::Le,
                        th.ramp_mw_per_hour,
                        &[(y.g(i, t, d, h - 1), 1.0), (y.g(i, t, d, h), -1.0)],
                    );
                }
            }
        }
    }

    // Line flow limits in both directions.
    for line in &system.lines {
        for t in 0..y.n_stages {
            for d in 0..y.n_days {
                for h in 0..y.n_hours {
                    let fwd = [
                        (y.theta(line.from_bus, t, d, h), line.susceptance),
                        (y.theta(line.to_bus, t, d, h), -line.susceptance),
                    ];
                    lp.add_row(
                        format!("flow+[{}][{}][{}][{}]", line.name, t, d, h),
                        RowSense::Le,
                        line.limit_mw,
                        &fwd,
                    );
                    let rev = [
                        (y.theta(line.from_bus, t, d, h), -line.susceptance),
                        (y.theta(line.to_bus, t, d, h), line.susceptance),
                    ];
                    lp.add_row(
                        format!("flow-[{}][{}][{}][{}]", line.name, t, d, h),
                        RowSense::Le,
                        line.limit_mw,
                        &rev,
                    );
                }
            }
        }
    }

    ScenarioBlock { lp, coupling, load_balance, y }
}

fn first_stage_box(
    system: &SystemData,
    layout: &FirstStageLayout,
    anticipative: bool,
) -> (Vec<f64>, Vec<Option<f64>>, Vec<Option<f64>>, Vec<String>, Vec<usize>) {
    let mut cost = vec![0.0; layout.n_x];
    let mut lower = vec![None; layout.n_x];
    let mut upper = vec![None; layout.n_x];
    let mut names = vec![String::new(); layout.n_x];
    let mut binaries = Vec::new();
    for u in 0..layout.n_units {
        let (name, _, _, _, status, invest) = unit_fields(system, u);
        let j = layout.inv(u);
        names[j] = format!("invest[{}]", name);
        binaries.push(j);
        match status {
            UnitStatus::Existing => {
                lower[j] = Some(1.0);
                upper[j] = Some(1.0);
            }
            UnitStatus::Candidate => {
                lower[j] = Some(0.0);
                upper[j] = Some(1.0);
                cost[j] = invest;
            }
        }
    }
    for (i, hydro) in system.hydros.iter().enumerate() {
        for t in 0..layout.n_stages {
            let j0 = layout.ldr0(i, t);
            names[j0] = format!("ldr0[{}][{}]", hydro.name, t);
            if anticipative {
                lower[j0] = Some(0.0);
                upper[j0] = Some(0.0);
            } else {
                let b = hydro.reservoir.max_storage_hm3;
                lower[j0] = Some(-b);
                upper[j0] = Some(b);
            }
            for src in 0..layout.n_hydros {
                let jw = layout.ldrw(i, src, t);
                names[jw] = format!("ldrw[{}][{}][{}]", hydro.name, system.hydros[src].name, t);
                if anticipative {
                    lower[jw] = Some(0.0);
                    upper[jw] = Some(0.0);
                } else {
                    lower[jw] = Some(-LDR_SLOPE_BOUND);
                    upper[jw] = Some(LDR_SLOPE_BOUND);
                }
            }
        }
    }
    (cost, lower, upper, names, binaries)
}

fn compile_mode(
    system: &SystemData,
    set: &ScenarioSet,
    anticipative: bool,
) -> Result<CompactTwoStage, ModelError> {
    let diagnostics = validate(system);
    if !diagnostics.is_empty() {
        return Err(ModelError::Invalid(diagnostics));
    }
    let scenario_data = normalize_scenarios(system, set)?;
    let layout =
        FirstStageLayout::new(system.n_units(), system.hydros.len(), system.n_stages());
    let (cost, lower, upper, names, binaries) = first_stage_box(system, &layout, anticipative);
    let blocks: Vec<ScenarioBlock> = scenario_data
        .iter()
        .map(|d| build_block(system, d, anticipative))
        .collect();
    Ok(CompactTwoStage {
        system: system.clone(),
        layout,
        first_stage_cost: cost,
        x_lower: lower,
        x_upper: upper,
        x_names: names,
        binaries,
        probability: set.probability.clone(),
        scenario_data,
        blocks,
        anticipative,
    })
}

/// Compiles the nonanticipative two-stage form.
pub fn compile_compact(system: &SystemData, set: &ScenarioSet) -> Result<CompactTwoStage, ModelError> {
    compile_mode(system, set, false)
}

/// Compiles the anticipative relaxation: decision-rule rows dropped, each
/// scenario's turbined outflow free within its physical bounds, rule
/// coefficients pinned to zero.
pub fn compile_anticipative(
    system: &SystemData,
    set: &ScenarioSet,
) -> Result<CompactTwoStage, ModelError> {
    compile_mode(system, set, true)
}

impl CompactTwoStage {
    pub fn n_scenarios(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_x(&self) -> usize {
        self.layout.n_x
    }

    /// Builds the operational block of an arbitrary (possibly unseen)
    /// scenario under this model's policy mode.
    pub fn block_for(&self, data: &ScenarioData) -> ScenarioBlock {
        build_block(&self.system, data, self.anticipative)
    }

    /// First-stage investment cost of a point: `I' x`.
    pub fn investment_cost(&self, x: &[f64]) -> f64 {
        self.first_stage_cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Stacks first stage and every scenario block back into one
    /// deterministic-equivalent instance.
    pub fn assemble_de(&self) -> MilpInstance {
        let mut lp = LpInstance::new();
        for j in 0..self.layout.n_x {
            lp.add_col(
                self.x_names[j].clone(),
                self.first_stage_cost[j],
                self.x_lower[j],
                self.x_upper[j],
            );
        }
        for (w, block) in self.blocks.iter().enumerate() {
            let p = self.probability[w];
            let base = lp.n_cols();
            for j in 0..block.lp.n_cols() {
                lp.add_col(
                    format!("{}@s{}", block.lp.col_names[j], w),
                    p * block.lp.objective[j],
                    block.lp.lower[j],
                    block.lp.upper[j],
                );
            }
            let row_base = lp.n_rows();
            for r in 0..block.lp.n_rows() {
                lp.add_row(
                    format!("{}@s{}", block.lp.row_names[r], w),
                    block.lp.senses[r],
                    block.lp.rhs[r],
                    &[],
                );
            }
            for &(r, c, v) in &block.lp.entries {
                lp.entries.push((row_base + r, base + c, v));
            }
            for cr in &block.coupling {
                for &(xj, coef) in &cr.t_coefs {
                    // W y - T x (sense) h: first-stage part enters negated.
                    lp.entries.push((row_base + cr.row, xj, -coef));
                }
            }
        }
        MilpInstance { lp, binaries: self.binaries.clone() }
    }

    /// Rows/columns/nonzeros per block, in a printable report.
    pub fn statistics(&self) -> ModelStats {
        let per_block: Vec<(usize, usize, usize)> = self
            .blocks
            .iter()
            .map(|b| (b.lp.n_rows(), b.lp.n_cols(), b.lp.nnz()))
            .collect();
        let coupling: usize = self.blocks.iter().map(|b| b.coupling.len()).sum();
        ModelStats {
            first_stage_cols: self.layout.n_x,
            binaries: self.binaries.len(),
            scenarios: self.blocks.len(),
            per_block,
            coupling_rows: coupling,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelStats {
    pub first_stage_cols: usize,
    pub binaries: usize,
    pub scenarios: usize,
    pub per_block: Vec<(usize, usize, usize)>,
    pub coupling_rows: usize,
}

impl std::fmt::Display for ModelStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows: usize = self.per_block.iter().map(|b| b.0).sum();
        let cols: usize = self.per_block.iter().map(|b| b.1).sum();
        let nnz: usize = self.per_block.iter().map(|b| b.2).sum();
        writeln!(f, "first stage: {} columns ({} binary)", self.first_stage_cols, self.binaries)?;
        writeln!(f, "scenarios: {}", self.scenarios)?;
        for (w, (r, c, n)) in self.per_block.iter().enumerate() {
            writeln!(f, "  block {}: {} rows, {} cols, {} nonzeros", w, r, c, n)?;
        }
        writeln!(f, "coupling rows total: {}", self.coupling_rows)?;
        write!(
            f,
            "deterministic equivalent: {} rows, {} cols, {} nonzeros",
            rows,
            cols + self.first_stage_cols,
            nnz + self.coupling_rows
        )
    }
}

/// Builds the deterministic equivalent directly from the system, without
/// going through the compact form. Kept as an independent construction
/// path; `CompactTwoStage::assemble_de` must produce an instance with the
/// same optimum.
pub fn build_de(system: &SystemData, set: &ScenarioSet) -> Result<MilpInstance, ModelError> {
    let diagnostics = validate(system);
    if !diagnostics.is_empty() {
        return Err(ModelError::Invalid(diagnostics));
    }
    let scenario_data = normalize_scenarios(system, set)?;
    let layout =
        FirstStageLayout::new(system.n_units(), system.hydros.len(), system.n_stages());
    let (cost, lower, upper, names, binaries) = first_stage_box(system, &layout, false);

    let mut lp = LpInstance::new();
    for j in 0..layout.n_x {
        lp.add_col(names[j].clone(), cost[j], lower[j], upper[j]);
    }

    let nt = system.thermals.len();
    let n_units = system.n_units();
    let (n_stages, n_days, n_hours) = (system.n_stages(), system.n_days(), system.hours_per_day);

    for (w, data) in scenario_data.iter().enumerate() {
        let p = set.probability[w];
        let y = YLayout::new(system, true);
        let base = lp.n_cols();

        for u in 0..n_units {
            let (name, _, _, var_cost, _, _) = unit_fields(system, u);
            for t in 0..n_stages {
                for d in 0..n_days {
                    for h in 0..n_hours {
                        lp.add_col(
                            format!("g[{}][{}][{}][{}]@s{}", name, t, d, h, w),
                            p * var_cost * system.hour_weight(t, d),
                            Some(0.0),
                            None,
                        );
                    }
                }
            }
        }
        for (b, bus) in system.buses.iter().enumerate() {
            for t in 0..n_stages {
                for d in 0..n_days {
                    for h in 0..n_hours {
                        let (lo, hi) = if b == system.reference_bus {
                            (Some(0.0), Some(0.0))
                        } else {
                            (None, None)
                        };
                        lp.add_col(
                            format!("theta[{}][{}][{}][{}]@s{}", bus.name, t, d, h, w),
                            0.0,
                            lo,
                            hi,
                        );
                    }
                }
            }
        }
        for bus in &system.buses {
            for t in 0..n_stages {
                for d in 0..n_days {
                    for h in 0..n_hours {
                        lp.add_col(
                            format!("deficit[{}][{}][{}][{}]@s{}", bus.name, t, d, h, w),
                            p * system.deficit_cost * system.hour_weight(t, d),
                            Some(0.0),
                            None,
                        );
                    }
                }
            }
        }
        for hydro in &system.hydros {
            for t in 0..n_stages {
                lp.add_col(
                    format!("v[{}][{}]@s{}", hydro.name, t, w),
                    0.0,
                    Some(hydro.reservoir.min_storage_hm3),
                    Some(hydro.reservoir.max_storage_hm3),
                );
            }
        }
        for hydro in &system.hydros {
            for t in 0..n_stages {
                lp.add_col(
                    format!("u[{}][{}]@s{}", hydro.name, t, w),
                    0.0,
                    Some(0.0),
                    Some(hydro.max_turbining_hm3),
                );
            }
        }
        for hydro in &system.hydros {
            for t in 0..n_stages {
                lp.add_col(
                    format!("s[{}][{}]@s{}", hydro.name, t, w),
                    0.0,
                    Some(0.0),
                    Some(hydro.max_spillage_hm3),
                );
            }
        }
        for (i, hydro) in system.hydros.iter().enumerate() {
            for t in 0..n_stages {
                let c = p * relief_cost(system, i);
                lp.add_col(format!("relief-[{}][{}]@s{}", hydro.name, t, w), c, Some(0.0), None);
                lp.add_col(format!("relief+[{}][{}]@s{}", hydro.name, t, w), c, Some(0.0), None);
            }
        }
        for (i, hydro) in system.hydros.iter().enumerate() {
            for t in 0..n_stages {
                let c = p * relief_cost(system, i);
                lp.add_col(format!("overflow[{}][{}]@s{}", hydro.name, t, w), c, Some(0.0), None);
            }
        }

        let gy = |u: usize, t: usize, d: usize, h: usize| base + y.g(u, t, d, h);
        let thetay = |b: usize, t: usize, d: usize, h: usize| base + y.theta(b, t, d, h);
        let defy = |b: usize, t: usize, d: usize, h: usize| base + y.deficit(b, t, d, h);
        let vy = |i: usize, t: usize| base + y.v(i, t);
        let uy = |i: usize, t: usize| base + y.turbined(i, t);
        let sy = |i: usize, t: usize| base + y.spill(i, t);
        let reliefy = |i: usize, t: usize, pos: bool| base + y.relief(i, t, pos);
        let excessy = |i: usize, t: usize| base + y.excess(i, t);

        // Availability: g - cap * factor * invest <= 0.
        for u in 0..n_units {
            let (name, _, cap, _, _, _) = unit_fields(system, u);
            for t in 0..n_stages {
                for d in 0..n_days {
                    for h in 0..n_hours {
                        let factor = if u >= nt && u < nt + system.renewables.len() {
                            data.capacity_factor[u - nt][t][d][h]
                        } else {
                            1.0
                        };
                        lp.add_row(
                            format!("avail[{}][{}][{}][{}]@s{}", name, t, d, h, w),
                            RowSense::Le,
                            0.0,
                            &[(gy(u, t, d, h), 1.0), (layout.inv(u), -cap * factor)],
                        );
                    }
                }
            }
        }
        // Decision rule with elastic relief.
        for (i, hydro) in system.hydros.iter().enumerate() {
            for t in 0..n_stages {
                let mut coefs = vec![
                    (uy(i, t), 1.0),
                    (reliefy(i, t, false), 1.0),
                    (reliefy(i, t, true), -1.0),
                    (layout.ldr0(i, t), -1.0),
                ];
                for src in 0..system.hydros.len() {
                    let a = data.inflow[src][t];
                    if a != 0.0 {
                        coefs.push((layout.ldrw(i, src, t), -a));
                    }
                }
                lp.add_row(
                    format!("rule[{}][{}]@s{}", hydro.name, t, w),
                    RowSense::Eq,
                    0.0,
                    &coefs,
                );
            }
        }
        // Reservoir balance and cyclic floor.
        for (i, hydro) in system.hydros.iter().enumerate() {
            for t in 0..n_stages {
                let mut coefs = vec![
                    (vy(i, t), 1.0),
                    (uy(i, t), 1.0),
                    (sy(i, t), 1.0),
                    (excessy(i, t), 1.0),
                ];
                for &up in &hydro.upstream {
                    coefs.push((uy(up, t), -1.0));
                    coefs.push((sy(up, t), -1.0));
                }
                let mut rhs = data.inflow[i][t];
                if t == 0 {
                    rhs += hydro.reservoir.initial_storage_hm3;
                } else {
                    coefs.push((vy(i, t - 1), -1.0));
                }
                lp.add_row(
                    format!("balance[{}][{}]@s{}", hydro.name, t, w),
                    RowSense::Eq,
                    rhs,
                    &coefs,
                );
            }
            lp.add_row(
                format!("cycle[{}]@s{}", hydro.name, w),
                RowSense::Ge,
                hydro.reservoir.initial_storage_hm3,
                &[(vy(i, n_stages - 1), 1.0)],
            );
        }
        // Monthly hydro energy.
        for (i, hydro) in system.hydros.iter().enumerate() {
            let gu = hydro_unit_index(system, i);
            for t in 0..n_stages {
                let mut coefs =
                    vec![(uy(i, t), -hydro.productivity * system.stages[t].month_hours)];
                for d in 0..n_days {
                    let hw = system.hour_weight(t, d);
                    for h in 0..n_hours {
                        coefs.push((gy(gu, t, d, h), hw));
                    }
                }
                lp.add_row(
                    format!("energy[{}][{}]@s{}", hydro.name, t, w),
                    RowSense::Eq,
                    0.0,
                    &coefs,
                );
            }
        }
        // Bus balance.
        for (b, bus) in system.buses.iter().enumerate() {
            for t in 0..n_stages {
                for d in 0..n_days {
                    for h in 0..n_hours {
                        let mut coefs: Vec<(usize, f64)> = Vec::new();
                        for u in 0..n_units {
                            let (_, ub, _, _, _, _) = unit_fields(system, u);
                            if ub == b {
                                coefs.push((gy(u, t, d, h), 1.0));
                            }
                        }
                        for line in &system.lines {
                            if line.to_bus == b {
                                coefs.push((thetay(line.from_bus, t, d, h), line.susceptance));
                                coefs.push((thetay(line.to_bus, t, d, h), -line.susceptance));
                            }
                            if line.from_bus == b {
                                coefs.push((thetay(line.from_bus, t, d, h), -line.susceptance));
                                coefs.push((thetay(line.to_bus, t, d, h), line.susceptance));
                            }
                        }
                        coefs.push((defy(b, t, d, h), 1.0));
                        lp.add_row(
                            format!("load[{}][{}][{}][{}]@s{}", bus.name, t, d, h, w),
                            RowSense::Eq,
                            data.demand_mw[b][t][d][h],
                            &coefs,
                        );
                    }
                }
            }
        }
        // Ramps.
        for (i, th) in system.thermals.iter().enumerate() {
            if th.ramp_mw_per_hour >= th.capacity_mw {
                continue;
            }
            for t in 0..n_stages {
                for d in 0..n_days {
                    for h in 1..n_hours {
                        lp.add_row(
                            format!("rampup[{}][{}][{}][{}]@s{}", th.name, t, d, h, w),
                            RowSense::Le,
                            th.ramp_mw_per_hour,
                            &[(gy(i, t, d, h), 1.0), (gy(i, t, d, h - 1), -1.0)],
                        );
                        lp.add_row(
                            format!("rampdn[{}][{}][{}][{}]@s{}", th.name, t, d, h, w),
                            RowSense::Le,
                            th.ramp_mw_per_hour,
                            &[(gy(i, t, d, h - 1), 1.0), (gy(i, t, d, h), -1.0)],
                        );
                    }
                }
            }
        }
        // Line limits.
        for line in &system.lines {
            for t in 0..n_stages {
                for d in 0..n_days {
                    for h in 0..n_hours {
                        lp.add_row(
                            format!("flow+[{}][{}][{}][{}]@s{}", line.name, t, d, h, w),
                            RowSense::Le,
                            line.limit_mw,
                            &[
                                (thetay(line.from_bus, t, d, h), line.susceptance),
                                (thetay(line.to_bus, t, d, h), -line.susceptance),
                            ],
                        );
                        lp.add_row(
                            format!("flow-[{}][{}][{}][{}]@s{}", line.name, t, d, h, w),
                            RowSense::Le,
                            line.limit_mw,
                            &[
                                (thetay(line.from_bus, t, d, h), -line.susceptance),
                                (thetay(line.to_bus, t, d, h), line.susceptance),
                            ],
                        );
                    }
                }
            }
        }
    }

    Ok(MilpInstance { lp, binaries })
}
