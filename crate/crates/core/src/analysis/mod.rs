//! Post-processing: hotspot detection, regression fits, burglary counts and
//! model-to-model comparison.

mod burglary;
mod compare;
mod fit;
mod hotspots;

pub use burglary::{burglary_counts, BurglaryAccumulator};
pub use compare::{compare_fields, lattice_to_mesh, FieldComparison};
pub use fit::{fit_hotspot_count, fit_hotspot_diameter, FitModel, FitResult};
pub use hotspots::{detect_hotspots, emergence_time, HotspotReport, EMERGENCE_WINDOW};
