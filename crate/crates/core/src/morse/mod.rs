//! Critical points of f and of f on the boundary, the adapted pseudo-gradient
//! field, flow lines and unstable cells, and the Thom-Smale complex with its
//! homology.

mod cells;
mod complex;
mod critical;
mod field;
mod flow;
mod function;
mod homology;

pub use cells::{check_linearization, unstable_manifold, CellGeometry, UnstableCell};
pub use complex::{
    build_thom_smale_complex, complex_json, connection_count, morse_complex, ComplexSettings, Connection,
    ConnectionOptions, MorseComplexData, ThomSmaleComplex,
};
pub use critical::{
    find_critical_points, morse_counts, normalize_direction, CriticalKind, CriticalPoint, CriticalScan, MorseCounts,
};
pub use field::{adapted_field, FieldCheck, PseudoGradientField};
pub use flow::{trace_flow, Direction, FlowLimit, FlowLine, FlowOptions};
pub use function::MorseFunction;
pub use homology::{homology_ranks, morse_inequalities, smith_invariants, HomologyRanks, InequalityRow, MorseInequalities};
