//! Convergence metrics, empirical order checks, Cramér–Wold projections and
//! the scenario catalog.

pub mod metrics;
pub mod report;
pub mod scenarios;
pub mod stoch;
pub mod wold;

pub use report::{ConvergenceReport, McRecord, Verdict};
pub use scenarios::{
    cdf_overlay, run_scenario, scenario_ids, scenario_info, McConfig, Params, ScenarioInfo,
    SCENARIOS,
};
