//! Built-in study systems: the three-bus reference instance `d1` used
//! throughout the test suite and the examples, and a seeded factory for
//! small randomized instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    Bus, HydroUnit, Line, RenewableUnit, Reservoir, Stage, SystemData, ThermalUnit, UnitStatus,
    SYSTEM_SCHEMA,
};
use crate::scenario::{
    generate, GeneratorDims, InflowParams, ScenarioError, ScenarioSet, ScenarioSpec,
};

/// Generates a scenario set shaped for `system`.
pub fn generate_for(
    system: &SystemData,
    spec: &ScenarioSpec,
    n: usize,
    seed: u64,
) -> Result<ScenarioSet, ScenarioError> {
    let hydro_names = system.hydro_names();
    let renewable_names = system.renewable_names();
    let bus_names = system.bus_names();
    let dims = GeneratorDims {
        hydro_names: &hydro_names,
        renewable_names: &renewable_names,
        bus_names: &bus_names,
        n_stages: system.n_stages(),
        n_days: system.n_days(),
        n_hours: system.hours_per_day,
    };
    generate(spec, &dims, n, seed)
}

/// Reference instance: 3 buses, 2 lines, 2 existing units plus 4
/// candidates (2 thermal, 1 reservoir hydro, 1 renewable), 3 monthly
/// stages with 2 typical days of 4 hours, 3 scenarios.
pub fn d1_system() -> SystemData {
    let hour_shape = |t: usize, d: usize, base: f64| -> Vec<f64> {
        let growth = [1.0, 1.05, 1.1][t];
        let day_shape: [f64; 4] = if d == 0 {
            [0.75, 1.0, 0.95, 0.6]
        } else {
            [0.7, 0.85, 0.8, 0.55]
        };
        day_shape.iter().map(|s| base * s * growth).collect()
    };
    let demand_for = |base: f64| -> Vec<Vec<Vec<f64>>> {
        (0..3)
            .map(|t| (0..2).map(|d| hour_shape(t, d, base)).collect())
            .collect()
    };
    SystemData {
        schema: SYSTEM_SCHEMA.to_string(),
        name: "d1".to_string(),
        buses: vec![
            Bus { name: "north".into() },
            Bus { name: "center".into() },
            Bus { name: "south".into() },
        ],
        lines: vec![
            Line {
                name: "north-center".into(),
                from_bus: 0,
                to_bus: 1,
                susceptance: 50.0,
                limit_mw: 70.0,
            },
            Line {
                name: "center-south".into(),
                from_bus: 1,
                to_bus: 2,
                susceptance: 50.0,
                limit_mw: 70.0,
            },
        ],
        thermals: vec![
            ThermalUnit {
                name: "steam_old".into(),
                bus: 0,
                capacity_mw: 120.0,
                variable_cost: 45.0,
                ramp_mw_per_hour: 40.0,
                status: UnitStatus::Existing,
                investment_cost: 0.0,
            },
            ThermalUnit {
                name: "gas_a".into(),
                bus: 1,
                capacity_mw: 90.0,
                variable_cost: 18.0,
                ramp_mw_per_hour: 90.0,
                status: UnitStatus::Candidate,
                investment_cost: 2_800_000.0,
            },
            ThermalUnit {
                name: "gas_b".into(),
                bus: 2,
                capacity_mw: 60.0,
                variable_cost: 75.0,
                ramp_mw_per_hour: 30.0,
                status: UnitStatus::Candidate,
                investment_cost: 600_000.0,
            },
        ],
        renewables: vec![
            RenewableUnit {
                name: "wind_old".into(),
                bus: 2,
                capacity_mw: 45.0,
                status: UnitStatus::Existing,
                investment_cost: 0.0,
            },
            RenewableUnit {
                name: "solar_a".into(),
                bus: 0,
                capacity_mw: 70.0,
                status: UnitStatus::Candidate,
                investment_cost: 900_000.0,
            },
        ],
        hydros: vec![HydroUnit {
            name: "river_a".into(),
            bus: 1,
            capacity_mw: 80.0,
            reservoir: Reservoir {
                min_storage_hm3: 60.0,
                max_storage_hm3: 420.0,
                initial_storage_hm3: 140.0,
            },
            productivity: 0.32,
            max_turbining_hm3: 260.0,
            max_spillage_hm3: 400.0,
            upstream: vec![],
            status: UnitStatus::Candidate,
            investment_cost: 1_500_000.0,
        }],
        day_types: vec!["week".into(), "weekend".into()],
        hours_per_day: 4,
        stages: vec![
            Stage { month_hours: 720.0, day_weights: vec![480.0, 240.0] },
            Stage { month_hours: 720.0, day_weights: vec![480.0, 240.0] },
            Stage { month_hours: 720.0, day_weights: vec![480.0, 240.0] },
        ],
        demand_mw: vec![demand_for(60.0), demand_for(75.0), demand_for(65.0)],
        deficit_cost: 1000.0,
        reference_bus: 0,
    }
}

pub fn d1_spec() -> ScenarioSpec {
    ScenarioSpec {
        inflow: vec![InflowParams { mean: 150.0, cv: 0.45, phi: 0.5 }],
        seasonal_shape: vec![1.25, 0.8, 0.95],
        diurnal_shape: vec![0.15, 0.55, 0.65, 0.25],
        renewable_noise_cv: 0.5,
        demand_noise_cv: 0.04,
        inflow_renewable_correlation: -0.4,
    }
}

pub const D1_SEED: u64 = 20_240_501;

pub fn d1_scenarios() -> ScenarioSet {
    generate_for(&d1_system(), &d1_spec(), 3, D1_SEED).expect("d1 scenario generation")
}

/// A randomized small instance plus the generator spec it was drawn with.
pub struct RandomInstance {
    pub system: SystemData,
    pub spec: ScenarioSpec,
    pub scenarios: ScenarioSet,
}

/// Seeded random instance: at most 4 buses, 6 candidates and 5 scenarios,
/// always at least one reservoir hydro so the decision rule matters.
/// `storage_tight` shrinks reservoirs and widens inflow dispersion so the
/// operating policy drives value.
pub fn random_instance(seed: u64, n_scenarios: usize, storage_tight: bool) -> RandomInstance {
    assert!((1..=5).contains(&n_scenarios));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n_buses = rng.gen_range(2..=3usize);
    let n_stages = rng.gen_range(2..=3usize);
    let n_days = rng.gen_range(1..=2usize);
    let n_hours = rng.gen_range(2..=3usize);
    let month_hours = 720.0;

    let buses: Vec<Bus> = (0..n_buses).map(|b| Bus { name: format!("b{}", b) }).collect();
    let mut lines = Vec::new();
    for b in 1..n_buses {
        lines.push(Line {
            name: format!("l{}-{}", b - 1, b),
            from_bus: b - 1,
            to_bus: b,
            susceptance: rng.gen_range(30.0..80.0),
            limit_mw: rng.gen_range(45.0..110.0),
        });
    }

    let base_demand: Vec<f64> = (0..n_buses).map(|_| rng.gen_range(45.0..85.0)).collect();
    let peak_total: f64 = base_demand.iter().sum();

    // One expensive existing thermal keeps the lights on; candidates
    // compete on investment-versus-operation tradeoffs that differ by
    // scenario.
    let base_capacity = peak_total * rng.gen_range(0.75..0.95);
    let mut thermals = vec![ThermalUnit {
        name: "t_base".into(),
        bus: 0,
        capacity_mw: base_capacity,
        variable_cost: rng.gen_range(65.0..95.0),
        ramp_mw_per_hour: base_capacity,
        status: UnitStatus::Existing,
        investment_cost: 0.0,
    }];

    let horizon_hours = month_hours * n_stages as f64;
    let n_cand_thermal = rng.gen_range(1..=2usize);
    for i in 0..n_cand_thermal {
        let capacity = rng.gen_range(25.0..70.0);
        let var_cost = rng.gen_range(12.0..45.0);
        let saving = (thermals[0].variable_cost - var_cost).max(5.0);
        thermals.push(ThermalUnit {
            name: format!("t_c{}", i),
            bus: rng.gen_range(0..n_buses),
            capacity_mw: capacity,
            variable_cost: var_cost,
            ramp_mw_per_hour: if rng.gen_bool(0.5) { capacity } else { capacity * 0.5 },
            status: UnitStatus::Candidate,
            investment_cost: capacity * saving * horizon_hours * rng.gen_range(0.35..0.9),
        });
    }

    let mut renewables = Vec::new();
    if rng.gen_bool(0.7) {
        let capacity = rng.gen_range(20.0..60.0);
        renewables.push(RenewableUnit {
            name: "r_c0".into(),
            bus: rng.gen_range(0..n_buses),
            capacity_mw: capacity,
            status: UnitStatus::Candidate,
            investment_cost: capacity
                * thermals[0].variable_cost
                * horizon_hours
                * rng.gen_range(0.1..0.35),
        });
    }

    let n_hydro = rng.gen_range(1..=2usize);
    let mut hydros = Vec::new();
    for i in 0..n_hydro {
        let capacity = rng.gen_range(30.0..70.0);
        let productivity = rng.gen_range(0.2..0.5);
        let mean_inflow = rng.gen_range(0.5..1.1) * capacity / productivity;
        let v0 = if storage_tight {
            mean_inflow * rng.gen_range(0.2..0.5)
        } else {
            mean_inflow * rng.gen_range(0.8..2.0)
        };
        let vmax = if storage_tight {
            v0 + mean_inflow * rng.gen_range(0.25..0.6)
        } else {
            v0 + mean_inflow * rng.gen_range(1.0..2.5)
        };
        hydros.push(HydroUnit {
            name: format!("h{}", i),
            bus: rng.gen_range(0..n_buses),
            capacity_mw: capacity,
            reservoir: Reservoir {
                min_storage_hm3: v0 * rng.gen_range(0.1..0.5),
                max_storage_hm3: vmax,
                initial_storage_hm3: v0,
            },
            productivity,
            max_turbining_hm3: mean_inflow * rng.gen_range(1.2..2.0),
            max_spillage_hm3: mean_inflow * 4.0,
            upstream: if i == 1 && rng.gen_bool(0.5) { vec![0] } else { vec![] },
            status: if i == 0 { UnitStatus::Candidate } else { UnitStatus::Existing },
            investment_cost: if i == 0 {
                capacity * thermals[0].variable_cost * horizon_hours * rng.gen_range(0.25..0.7)
            } else {
                0.0
            },
        });
    }

    let mut demand_mw = Vec::with_capacity(n_buses);
    for base in &base_demand {
        let mut per_stage = Vec::with_capacity(n_stages);
        for t in 0..n_stages {
            let growth = 1.0 + 0.05 * t as f64;
            let mut per_day = Vec::with_capacity(n_days);
            for d in 0..n_days {
                let day_level = if d == 0 { 1.0 } else { 0.85 };
                let mut per_hour = Vec::with_capacity(n_hours);
                for h in 0..n_hours {
                    let shape = 0.7 + 0.3 * ((h as f64 + 1.0) / n_hours as f64);
                    per_hour.push(base * growth * day_level * shape);
                }
                per_day.push(per_hour);
            }
            per_stage.push(per_day);
        }
        demand_mw.push(per_stage);
    }

    let system = SystemData {
        schema: SYSTEM_SCHEMA.to_string(),
        name: format!("rand-{}", seed),
        buses,
        lines,
        thermals,
        renewables,
        hydros: hydros.clone(),
        day_types: (0..n_days).map(|d| format!("day{}", d)).collect(),
        hours_per_day: n_hours,
        stages: (0..n_stages)
            .map(|_| {
                let mut weights = vec![month_hours / n_days as f64; n_days];
                if n_days == 2 {
                    weights = vec![month_hours * 2.0 / 3.0, month_hours / 3.0];
                }
                Stage { month_hours, day_weights: weights }
            })
            .collect(),
        demand_mw,
        deficit_cost: 1000.0,
        reference_bus: 0,
    };

    let spec = ScenarioSpec {
        inflow: hydros
            .iter()
            .map(|h| InflowParams {
                mean: {
                    let _ = h;
                    0.0 // replaced below; the mean ties to each hydro
                },
                cv: 0.0,
                phi: 0.0,
            })
            .collect(),
        seasonal_shape: vec![rng.gen_range(0.9..1.3), rng.gen_range(0.7..1.1)],
        diurnal_shape: (0..n_hours).map(|_| rng.gen_range(0.15..0.7)).collect(),
        renewable_noise_cv: rng.gen_range(0.2..0.7),
        demand_noise_cv: rng.gen_range(0.02..0.1),
        inflow_renewable_correlation: rng.gen_range(-0.7..0.3),
    };
    let mut spec = spec;
    for (i, h) in system.hydros.iter().enumerate() {
        let mean = h.max_turbining_hm3 / rng.gen_range(1.2..2.0);
        spec.inflow[i] = InflowParams {
            mean,
            cv: if storage_tight { rng.gen_range(0.6..1.0) } else { rng.gen_range(0.25..0.6) },
            phi: rng.gen_range(0.3..0.7),
        };
    }

    let scenarios = generate_for(&system, &spec, n_scenarios, seed.wrapping_mul(2654435761))
        .expect("random instance scenario generation");
    RandomInstance { system, spec, scenarios }
}
