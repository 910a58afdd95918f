//! Experiment runners reproducing the simulation figures, plus config
//! parsing and CSV / SVG output.
//!
//! Every random quantity is drawn from a stream derived from
//! `(seed, experiment, purpose, grid index, replicate)`, and rows are sorted
//! before writing, so equal configs give byte-identical files regardless of
//! the thread count.

mod config;
mod output;
mod runners;

pub use config::{ExperimentConfig, ExperimentKind, SPLIT_LAMBDA};
pub use output::{emit_chart, emit_csv, emit_metadata, read_csv, sort_rows, Method, ResultRow};
pub use runners::{run, run_counterexample, run_fig_a, run_fig_b, run_fig_c, run_rates};

use std::path::PathBuf;

use crate::Result;

/// Paths written by [`write_outputs`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub chart: Option<PathBuf>,
    pub metadata: PathBuf,
}

/// Writes the CSV, the metadata echo and, unless disabled, the chart into
/// `config.output_dir`.
pub fn write_outputs(
    config: &ExperimentConfig,
    rows: &[ResultRow],
    chart: bool,
) -> Result<OutputPaths> {
    let csv = config.csv_path();
    emit_csv(rows, &csv)?;
    let metadata = config.metadata_path();
    emit_metadata(config, &metadata)?;
    let chart = if chart {
        let path = config.chart_path();
        emit_chart(rows, &path, config.log_scale)?;
        Some(path)
    } else {
        None
    };
    Ok(OutputPaths {
        csv,
        chart,
        metadata,
    })
}
