//! On-disk formats: the cohort JSON manifest, little-endian f32 matrices and
//! grids with JSON sidecars, and versioned model snapshots.

mod cohort;
mod grid;
mod matrix;
mod snapshot;

pub use cohort::{read_cohort, write_cohort, CohortEntry, LoadedCohort};
pub use grid::{read_heatmap, read_mask, write_heatmap, write_mask, GridSidecar};
pub use matrix::{list_sidecars, read_matrix, read_matrix_sidecar, write_matrix, MatrixSidecar};
pub use snapshot::{
    read_ensemble, read_snapshot, write_ensemble, write_snapshot, ModelSnapshot, SnapshotHeader,
};
