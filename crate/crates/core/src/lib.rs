//! A finite-dimensional laboratory for Laplacian-type Dirichlet forms.
//!
//! The crate builds symmetric forms over grids and graphs with Neumann,
//! Dirichlet, Robin and nonlocal Robin boundary conditions, computes their
//! semigroups exp(-t M^-1 A) spectrally, decomposes forms into jump and
//! killing parts, and runs executable verifiers: entrywise semigroup
//! domination, the Dirichlet/Neumann sandwich, recovery of the boundary
//! measure, locality from domination, eventual positivity, randomized
//! sweeps and continuum eigenvalue convergence.

pub mod bdl;
pub mod domain;
pub mod error;
pub mod forms;
pub mod semigroup;
pub mod verify;

pub use bdl::{bdl_decompose, bdl_reconstruct, classify_locality, BdlParts, Locality};
pub use domain::{build_graph, build_interval, build_rectangle, unit_three_path, Domain};
pub use error::{Error, Result};
pub use forms::{
    cross_form_energy, dirichlet_form, is_markovian, neumann_form, nonlocal_robin_form,
    ouhabaz_gap, robin_form, BoundaryMeasure, BoundaryOperator, FormMatrix, Markovianity,
};
pub use semigroup::{
    default_time_grid, dominates, eventually_positive, expm, is_positivity_preserving,
    min_entry_profile, DominationReport, EventualPositivity, PositivityReport, Propagator,
    SemigroupSnapshot,
};
pub use verify::{
    add_offstencil_jump, check_sandwich, eigen_convergence, example_aw45,
    extract_boundary_measure, locality_from_domination, robin_reference_roots, sweep_random,
    verify_characterization, Aw45Report, BoundaryKind, CharacterizationReport, ConvergenceTable,
    ExtractionVerdict, LocalityReport, LocalityVerdict, MeasureExtraction, SandwichReport,
    SweepConfig, SweepGenerator, SweepReport,
};
