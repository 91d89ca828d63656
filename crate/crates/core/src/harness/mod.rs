//! Randomized verification of the geometric identities and figure export.

pub mod figure;
pub mod generate;
pub mod suite;

pub use figure::{
    emit_figure_data, star_search, FigureId, FigureKind, FigureOptions, FigureSummary, StarSearch,
    StarWitness,
};
pub use generate::{box_point, generate_instance, GenerateKind};
pub use suite::{
    replay, run_check, run_suite, CheckId, CheckSummary, FailureRecord, Limit, SuiteConfig,
    SuiteReport,
};
