//! Core data containers: return panels, state series, auxiliary factor series
//! and the daily microstructure panel.
//!
//! All panels are date-major matrices with an availability mask. Values are
//! simple returns as decimal fractions per period unless noted otherwise.

use chrono::NaiveDate;
use ndarray::Array2;

use crate::calendar::Frequency;
use crate::error::{Error, Result};

/// Names of the state-series columns, in their fixed order. The first column
/// is the log excess market return; the remaining three are forecasting
/// variables (yield spread, CAPE, small-stock value spread).
pub const STATE_COLUMNS: [&str; 4] = ["mkt_excess_log", "yield_spread", "cape", "value_spread"];

/// Names of the auxiliary factor columns, in their fixed order.
pub const FACTOR_COLUMNS: [&str; 6] = ["mkt", "smb", "hml", "rmw", "cma", "umd"];

/// Date x asset matrix of simple returns with an availability mask.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    pub frequency: Frequency,
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub values: Array2<f64>,
    pub mask: Array2<bool>,
}

/// Equality compares masked cells only; values behind an unset mask are
/// placeholders and do not participate.
impl PartialEq for ReturnPanel {
    fn eq(&self, other: &Self) -> bool {
        self.frequency == other.frequency
            && self.dates == other.dates
            && self.assets == other.assets
            && self.mask == other.mask
            && self
                .mask
                .indexed_iter()
                .all(|(ix, &m)| !m || self.values[ix] == other.values[ix])
    }
}

impl ReturnPanel {
    pub fn validate(&self) -> Result<()> {
        let shape = (self.dates.len(), self.assets.len());
        if self.values.dim() != shape || self.mask.dim() != shape {
            return Err(Error::Schema {
                path: "return panel".into(),
                msg: "matrix dimensions disagree with calendar x assets".into(),
            });
        }
        for ((t, i), &ok) in self.mask.indexed_iter() {
            if ok {
                let v = self.values[(t, i)];
                if !v.is_finite() || v <= -1.0 {
                    return Err(Error::Validation {
                        path: "return panel".into(),
                        line: 0,
                        msg: format!(
                            "return {v} for asset {} on {} violates r > -1",
                            self.assets[i], self.dates[t]
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Rows up to and including `end_date`.
    pub fn through(&self, end_date: NaiveDate) -> ReturnPanel {
        let n = self.dates.partition_point(|d| *d <= end_date);
        ReturnPanel {
            frequency: self.frequency,
            dates: self.dates[..n].to_vec(),
            assets: self.assets.clone(),
            values: self.values.slice(ndarray::s![..n, ..]).to_owned(),
            mask: self.mask.slice(ndarray::s![..n, ..]).to_owned(),
        }
    }
}

/// Monthly state vector series feeding the first-order VAR. Column order is
/// fixed with the log excess market return first (see [`STATE_COLUMNS`]).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Array2<f64>,
}

impl StateSeries {
    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.dim() != (self.dates.len(), STATE_COLUMNS.len()) {
            return Err(Error::Schema {
                path: "state series".into(),
                msg: "state matrix must be dates x 4".into(),
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation {
                path: "state series".into(),
                line: 0,
                msg: "non-finite state value".into(),
            });
        }
        Ok(())
    }

    /// Observations up to and including `end_date`.
    pub fn through(&self, end_date: NaiveDate) -> StateSeries {
        let n = self.dates.partition_point(|d| *d <= end_date);
        StateSeries {
            dates: self.dates[..n].to_vec(),
            values: self.values.slice(ndarray::s![..n, ..]).to_owned(),
        }
    }
}

/// Monthly risk-free rate plus the six benchmark factor return columns
/// (see [`FACTOR_COLUMNS`]).
#[derive(Debug, Clone, PartialEq)]
pub struct AuxSeries {
    pub dates: Vec<NaiveDate>,
    pub risk_free: Vec<f64>,
    pub factors: Array2<f64>,
}

impl AuxSeries {
    pub fn validate(&self) -> Result<()> {
        if self.risk_free.len() != self.dates.len()
            || self.factors.dim() != (self.dates.len(), FACTOR_COLUMNS.len())
        {
            return Err(Error::Schema {
                path: "aux series".into(),
                msg: "aux matrix must be dates x 6 plus rf".into(),
            });
        }
        if self.risk_free.iter().any(|v| !v.is_finite())
            || self.factors.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Validation {
                path: "aux series".into(),
                line: 0,
                msg: "non-finite aux value".into(),
            });
        }
        Ok(())
    }

    pub fn factor_column(&self, name: &str) -> Option<ndarray::ArrayView1<'_, f64>> {
        FACTOR_COLUMNS
            .iter()
            .position(|c| *c == name)
            .map(|j| self.factors.column(j))
    }

    /// Rows up to and including `end_date`.
    pub fn through(&self, end_date: NaiveDate) -> AuxSeries {
        let n = self.dates.partition_point(|d| *d <= end_date);
        AuxSeries {
            dates: self.dates[..n].to_vec(),
            risk_free: self.risk_free[..n].to_vec(),
            factors: self.factors.slice(ndarray::s![..n, ..]).to_owned(),
        }
    }
}

/// Daily close/high/low/volume panel used by the spread estimators.
#[derive(Debug, Clone)]
pub struct DailyMicroPanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub close: Array2<f64>,
    pub high: Array2<f64>,
    pub low: Array2<f64>,
    pub volume: Array2<f64>,
    pub mask: Array2<bool>,
}

impl PartialEq for DailyMicroPanel {
    fn eq(&self, other: &Self) -> bool {
        let cells_eq = |a: &Array2<f64>, b: &Array2<f64>| {
            self.mask.indexed_iter().all(|(ix, &m)| !m || a[ix] == b[ix])
        };
        self.dates == other.dates
            && self.assets == other.assets
            && self.mask == other.mask
            && cells_eq(&self.close, &other.close)
            && cells_eq(&self.high, &other.high)
            && cells_eq(&self.low, &other.low)
            && cells_eq(&self.volume, &other.volume)
    }
}

impl DailyMicroPanel {
    pub fn validate(&self) -> Result<()> {
        let shape = (self.dates.len(), self.assets.len());
        for (name, m) in [
            ("close", &self.close),
            ("high", &self.high),
            ("low", &self.low),
            ("volume", &self.volume),
        ] {
            if m.dim() != shape {
                return Err(Error::Schema {
                    path: "daily panel".into(),
                    msg: format!("{name} matrix dimensions disagree with calendar x assets"),
                });
            }
        }
        if self.mask.dim() != shape {
            return Err(Error::Schema {
                path: "daily panel".into(),
                msg: "mask dimensions disagree".into(),
            });
        }
        for ((t, i), &ok) in self.mask.indexed_iter() {
            if !ok {
                continue;
            }
            let (c, h, l, v) = (
                self.close[(t, i)],
                self.high[(t, i)],
                self.low[(t, i)],
                self.volume[(t, i)],
            );
            if !(c > 0.0 && h > 0.0 && l > 0.0) || v < 0.0 {
                return Err(Error::Validation {
                    path: "daily panel".into(),
                    line: 0,
                    msg: format!(
                        "nonpositive price or negative volume for {} on {}",
                        self.assets[i], self.dates[t]
                    ),
                });
            }
            if l > c + 1e-12 * c || c > h + 1e-12 * h {
                return Err(Error::Validation {
                    path: "daily panel".into(),
                    line: 0,
                    msg: format!(
                        "low <= close <= high violated for {} on {}",
                        self.assets[i], self.dates[t]
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Rows up to and including `end_date`.
    pub fn through(&self, end_date: NaiveDate) -> DailyMicroPanel {
        let n = self.dates.partition_point(|d| *d <= end_date);
        DailyMicroPanel {
            dates: self.dates[..n].to_vec(),
            assets: self.assets.clone(),
            close: self.close.slice(ndarray::s![..n, ..]).to_owned(),
            high: self.high.slice(ndarray::s![..n, ..]).to_owned(),
            low: self.low.slice(ndarray::s![..n, ..]).to_owned(),
            volume: self.volume.slice(ndarray::s![..n, ..]).to_owned(),
            mask: self.mask.slice(ndarray::s![..n, ..]).to_owned(),
        }
    }
}
