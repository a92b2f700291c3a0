//! Cooperative (Dicke) contribution of an NV ensemble to the trap stiffness.

mod coarse;
mod dicke;
mod steady;
mod stiffness;
mod table;

pub use coarse::{coarse_grain, mean_occupied_domain_size, CollectiveDomain, Nanodiamond};
pub use dicke::{
    build_liouvillian, DickeOperators, DomainDrive, Liouvillian, SparseOp, DEFAULT_DOMAIN_CAP,
};
pub use steady::{
    smallest_singular_values, steady_state, steady_state_dense, CollectiveSteadyState,
    SteadyStateChecks,
};
pub use stiffness::{
    domain_drive, domain_stiffness, ensemble_quantum_stiffness, exact_stiffness,
    extrapolate_stiffness, CollectiveConfig, DephasingMapping, Extrapolant, ExtrapolationModel,
    PolynomialFit,
};
pub use table::{StiffnessTable, TableSpec};
