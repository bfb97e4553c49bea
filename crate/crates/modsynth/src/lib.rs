//! File formats, URDF export, CSV reports and parallel evaluation for
//! [`modsynth_core`].
//!
//! Every JSON document carries a `format_version`; files use meters,
//! kilograms and degrees, everything in memory uses radians.

pub mod error;
pub mod library_file;
pub mod parallel;
pub mod report;
pub mod result_file;
pub mod task_file;
pub mod urdf;

pub use error::FileError;
pub use library_file::{load_library, resolve_library, LIBRARY_ENV};
pub use parallel::ParallelEvaluator;
pub use result_file::{CompositionDocument, ResultDocument};
pub use task_file::{load_task, save_task, LoadedTask, TaskDocument};
pub use urdf::{chain_from_urdf, emit_urdf};

/// Version written to and accepted from every JSON document.
pub const FORMAT_VERSION: u32 = 1;
