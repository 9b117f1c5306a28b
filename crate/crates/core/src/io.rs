//! File formats, configuration, plot bundles and the analysis pipeline.
//!
//! All tables are comma separated with a single `#` header line. Floats are
//! written in shortest round-trip form, so emit/ingest cycles are lossless.

pub mod bundle;
pub mod config;
pub mod formats;
pub mod pipeline;

pub use bundle::{write_atomic, PlotBundle, Provenance, Table, TableManifest};
pub use config::AnalysisConfig;
pub use formats::{
    ingest_resonances, ingest_sparams, write_resonances, write_sparams, ResonanceFormat, ResonanceRow,
    ResonanceTable, SParamRow, SParamTable,
};
pub use pipeline::{run_pipeline, Subcommand};
