//! Stochastic hydrothermal generation-expansion planning.
//!
//! The crate co-optimizes binary investment decisions and a nonanticipative
//! reservoir operating policy (linear decision rules over current-stage
//! inflows) against hourly operation on typical days, under inflow,
//! renewable and demand uncertainty, and solves the resulting two-stage
//! problem four ways:
//!
//! - `de`: the deterministic equivalent as one mixed-binary program;
//! - `tbd`: multi-cut Benders decomposition;
//! - `bdmm`: Benders with one master per scenario, each strengthened by
//!   that scenario's full second-stage block (a primal cut), sharing every
//!   cut generated from every master's trial point;
//! - `abdmm`: `bdmm` accelerated by progressive-hedging consensus penalties.
//!
//! It also evaluates fixed plans out of sample and quantifies the value of
//! planning with a nonanticipative policy instead of an anticipative one.
//!
//! Everything solves through the self-contained [`lp`] toolkit (revised
//! simplex with exact duals plus branch-and-bound); no external solver is
//! involved. See the `examples/` directory for one runnable program per
//! capability and the README for the file formats.

pub mod lp;
pub mod scenario;
