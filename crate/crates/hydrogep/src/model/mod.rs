//! Hydrothermal generation-expansion data model and the builders that turn
//! it into solvable instances.

mod build;
mod system;
#[cfg(test)]
mod tests;

pub use build::{
    build_block, build_de, compile_anticipative, compile_compact, normalize_scenarios,
    CompactTwoStage, CouplingRow, FirstStageLayout, LoadBalanceTag, ModelError, ModelStats,
    ScenarioBlock, ScenarioData, YLayout, LDR_SLOPE_BOUND,
};
pub use system::{
    validate, Bus, Diagnostic, HydroUnit, Line, RenewableUnit, Reservoir, Stage, SystemData,
    ThermalUnit, UnitStatus, SYSTEM_SCHEMA,
};
