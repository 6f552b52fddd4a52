//! Modelling toolkit for the high-gain voltage-multiplier quadratic boost
//! converter (HGVM-QBC): closed-form steady state, switched time-domain
//! simulation, component sizing, topology comparison and PI voltage control.

pub mod analysis;
pub mod circuit;
pub mod comparator;
pub mod controller;
pub mod designer;
pub mod error;
pub mod model;
pub mod simulator;

pub use analysis::{
    gain_ccm, steady_state_point, verify_operating_point_identities, BalanceReport, OperatingPoint,
};
pub use comparator::{catalog, crossover, sweep, topology, ComparisonTable, Metric, TopologyModel};
pub use controller::{
    pi_update, run_closed_loop, step_metrics, ClosedLoopOutput, PiConfig, PiState, StepMetrics,
    StepScenario,
};
pub use designer::{
    design_to_params, size_components, solve_duty, ComponentChoice, DesignResult, DesignSpec,
};
pub use error::{Error, ErrorCategory, Result};
pub use model::{ConverterParams, Mode, State};
pub use simulator::{
    balance_report, mode_derivative, periodic_orbit, periodic_steady_state, simulate, warm_start,
    waveform_metrics, EventCause, ModeEvent, PeriodSummary, SimConfig, SimOutput, Trace,
};
