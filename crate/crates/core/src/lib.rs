//! Copy budgets for hop-independent Werner recovery.
//!
//! Raw end-to-end Werner pairs produced over an `ℓ`-link path have quality
//! `w0^ℓ`. This crate computes how many such copies a recursive all-in
//! purification schedule needs to return at least one pair of quality `w0`
//! with a prescribed probability, and sweeps that budget over grids of
//! operating points.

pub mod error;
pub mod montecarlo;
pub mod protocols;
pub mod schedule;
pub mod search;
pub mod sweep;
pub mod werner;

pub use error::{Error, Result};
pub use protocols::{
    apply_map, bbpssw_step, load_registry, Family, ProtocolRegistry, PurificationMap, RationalMap,
};
pub use schedule::{
    all_in_success, blocks, dp_step, evolve_trace, survivor_distribution, CopyDistribution,
    ScheduleConfig, ScheduleTrace,
};
pub use search::{
    fixed_target, fixed_target_budget, min_copy_search, tie_break, SearchResult, SearchSpace,
    SearchStatus, Selection,
};
pub use sweep::{run_sweep, GridSpec, SweepPoint, SweepSummary};
pub use werner::{
    boundary_w0, fidelity_from_werner, raw_werner, werner_from_fidelity, Fidelity, PathSpec,
    WernerParameter,
};
