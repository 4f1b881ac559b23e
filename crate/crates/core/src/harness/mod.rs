//! Experiment sweeps: run many hashing systems over one corpus, persist the
//! hashes and per-system reports in a resumable store, and emit plot data.
//!
//! Store layout:
//!
//! ```text
//! <output_dir>/manifest.json            config, its digest, tool version
//! <output_dir>/corpus/                  loads.csv + manifest.json
//! <output_dir>/systems/<id>/hashes.csv  system_id,load_index,readouts...
//! <output_dir>/systems/<id>/report.json or failure.json
//! <output_dir>/table1.csv, fig4_curves.csv, fig5_scatter.csv, confusion_inputs.csv
//! ```

mod config;
mod report;
mod store;

pub use config::{
    all_systems, system_seed, ExperimentConfig, MetricOutput, SystemSpec, BUILTIN_CUSTOM, DESK_N,
    PAPER_MESH_H, PAPER_N,
};
pub use report::{
    confusion_csv, curves_csv, emit_report, emit_report_at, rect_mean_curve, scatter_csv,
    table1_csv, CONFUSION_FILE, CURVES_FILE, DIRECT_ROW, RECT_MEAN_ROW, SCATTER_FILE, TABLE_FILE,
};
pub use store::{
    compute_system, compute_system_seeded, evaluate_system, hashes_to_csv, parse_hashes_csv,
    read_hashes, run_experiment, system_dir, ResultStore, RunOptions, RunSummary, StoreManifest,
    SupportRecord, SystemFailure, SystemHashes, SystemReport, CORPUS_DIR, FAILURE_FILE,
    HASHES_FILE, MANIFEST_FILE, REPORT_FILE, SUPPORTS_FILE, SYSTEMS_DIR,
};
