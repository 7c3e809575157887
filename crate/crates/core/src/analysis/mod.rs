//! Numerical counterparts of the model's structural guarantees: metrics
//! between empirical and limit measures, the spaceless dominating branching
//! process with Wald's identity, extinction bounds, martingale
//! quadratic-variation scaling, and the transport-semigroup probe.

pub mod convergence;
pub mod dict;
pub mod dominating;
pub mod extinction;
pub mod metrics;
pub mod ou;
pub mod qv;

pub use convergence::{convergence_study, ConvergenceRow, ConvergenceTable};
pub use dict::{DictFn, TestFunctionDictionary};
pub use dominating::{dominating_process, sample_z, wald_check, DomRun, DominatingParams, WaldReport};
pub use extinction::extinction_bound;
pub use metrics::{pair, weak_metric, weighted_tv, MeasureRef};
pub use ou::{gradient_vs_fd, ou_bounds_sweep, semigroup_value};
pub use qv::{martingale_qv, QvEstimates};
