//! Fits, budgets, sweeps and run summaries.

pub mod budget;
pub mod report;
pub mod scan;
pub mod sweep;
pub mod visibility;

pub use budget::{budget_table, link_budget, ArmBudget, ArmLosses, BudgetTable, LinkBudget};
pub use report::{experiment_report, BasisCurve, ExperimentReport};
pub use scan::{detuning_grid, scan_wavelength_channels, ChannelScanRow, ScanModel};
pub use sweep::{angle_grid, visibility_sweep, write_curves_csv, CurvePoints, SweepResult};
pub use visibility::{fit_visibility, fit_visibility_with_floor, VisibilityFit};
