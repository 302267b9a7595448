//! Maximal operators of OU semigroups: semigroup application, time sets, the
//! local/global split and grid certification of the kernel bounds behind the
//! weak type (1, 1) estimates.

pub mod certify;
pub mod grid;
pub mod polynomial;
pub mod regions;
pub mod report;
pub mod semigroup;
pub mod timeset;
pub mod weak;

pub use certify::{
    certify_comparison, certify_global_periodic, certify_global_small_time, certify_local_bound,
    comparison_bound_t, comparison_shape, ComparisonGrid, Envelope, GlobalGrid, LocalGrid,
    PeriodicOptions, PlaneGrid,
};
pub use grid::Axis;
pub use polynomial::{polynomial_certificates, PolyOptions, PolyRegion};
pub use regions::{classify_region_five, classify_region_three, local_region, RegionLabel};
pub use report::{CertificationReport, GridRecord, STABILITY_TOL};
pub use semigroup::{apply_semigroup, maximal_scan, split_maximal, GaussianBump, ScanResult, Semigroup, SplitScan};
pub use timeset::{period_of, translate_schedule, Schedule, ScheduleKind, TimeSet, TimeSetKind};
pub use weak::{l1_unboundedness_probe, weak_type_ratio, L1Probe, WeakTypeOptions, WeakTypeResult};
