//! Alignment and comparison of two specs of the same format.

pub mod align;
pub mod equiv;
pub mod report;

pub use align::{align_fields, flatten, Alignment, AlignmentGroup, FlatField, FlatSpec};
pub use equiv::{constraints_equivalent, Equivalence, Method, Relation};
pub use report::{diff_specs, render_text, Details, Discrepancy, Kind, Side, SpecRef, ValidationReport, Witness};
