//! Multi-robot path planning on grids, cast as QUBO problems and solved window by window.

pub mod bench;
pub mod classical;
pub mod grid;
pub mod multi;
pub mod oracle;
pub mod penalty;
pub mod postprocess;
pub mod preprocess;
pub mod qubo;
pub mod render;
pub mod scenario;
pub mod solver;
pub mod window;

pub use grid::{manhattan, Cell, Connectivity, GridError, GridMap, LayerMode, ReachabilityTable};
pub use multi::{allocate_offsets, plan_multi, GlobalClock, RobotSpec};
pub use penalty::{
    ApproxMetric, GoalMode, PenaltyBuilder, PenaltyWeights, RobotWindow, WindowSpec,
};
pub use preprocess::{fix_logical, fix_numeric_diagonal, fold, FixReport, Folded};
pub use qubo::{Assignment, QuboError, QuboModel, VarIndex, VarLayout};
pub use solver::{Backend, SampleSet, Sampler, SolverConfig, SolverError};
pub use window::{plan_single, validate_plan, Plan, PlanError, PlanStatus, WindowConfig};
