//! Synthetic power-law experiments, configuration and CSV/SVG output.

pub mod config;
pub mod data;
pub mod figure1;
pub mod io;
pub mod svg;

pub use config::{ExperimentConfig, ZVariance, SEED_ENV};
pub use data::{gen_powerlaw_data, powerlaw_covariance};
pub use figure1::{log_spaced, run_figure1, write_figure1, Figure1Panel, Figure1Run};
pub use io::{
    read_matrix, read_risk_curve, read_summary, read_vector, write_risk_curve, write_summary, write_table, RiskRow,
    SummaryRow,
};
pub use svg::{plot_svg, render_svg, Panel};
