//! Experiment configuration, cell layout, drivers and result emission.
//!
//! Rates are mutual-information estimates without channel coding, so a
//! "BPCU" figure is the estimated MI per channel use.

mod config;
mod emit;
mod experiments;
mod layout;

pub use config::{
    Cat3Decoder, Experiment, LayoutConfig, LutConfig, LutLookup, MimoChannel, MimoConfig, OmaMode, OutputConfig, OutputFormat, RadioConfig,
    SchedConfig, Scheme, SimConfig, SweepConfig,
};
pub use emit::{emit, read_jsonl, write_csv, write_jsonl, Columns, ResultRecord, SCHEMA_VERSION};
pub use experiments::{
    build_config_lut, cluster_rates, empirical_cdf, mimo_drop_channels, mimo_drop_min_rates, mimo_min_rates,
    oma_constellation, percentile, run_fairness_sweep, run_mimo_cdf, run_sched, stream_rng, SchedOutcome, SchedRound,
    FAIRNESS_COLUMNS, MIMO_COLUMNS, SCHED_COLUMNS,
};
pub use layout::{drop_cells, Layout, UeDrop};
