//! Construction and evaluation of betting-against-beta style long-short
//! equity factors: VAR-based news decomposition, real-time beta estimation,
//! tercile and 3x3 double-sort portfolio formation, low-frequency
//! transaction-cost estimation, and factor-regression analytics.

pub mod align;
pub mod analytics;
pub mod beta;
pub mod calendar;
pub mod config;
pub mod error;
pub mod io;
pub mod panel;
pub mod pipeline;
pub mod portfolio;
pub mod rng;
pub mod synth;
pub mod tcost;
pub mod var_news;

pub use align::{align, AlignedDataset};
pub use beta::{build_beta_panel, BetaKind, BetaPanel, BetaSpec};
pub use calendar::{Frequency, TradingCalendar};
pub use error::{Error, Result};
pub use panel::{AuxSeries, DailyMicroPanel, ReturnPanel, StateSeries};
pub use portfolio::{run_backtest, BacktestConfig, BacktestOutput, FactorSeries, SortScheme};
pub use synth::{generate_synthetic, GroundTruth, SynthConfig};
pub use tcost::{build_cost_panel, CostPanel, CostSpec};
pub use var_news::{estimate_var, expanding_news, news_decompose, NewsSeries, VarModel};
