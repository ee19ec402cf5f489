//! Principal components of frozen-encoder embeddings and their signed R²
//! against graph-level metrics.

mod correlation;
mod pca;
mod report;

pub use correlation::{metric_columns, r2_correlations, signed_r2, CorrelationTable, MetricColumn};
pub use pca::{pca, tensor_rows, PcaResult};
pub use report::{
    analyze, correlation_rows, correlations_csv, emit_report, graph_embeddings, parse_correlations_csv, Analysis,
    CorrelationRow,
};
