//! Calendar and universe alignment.
//!
//! Builds the immutable dataset every downstream stage reads: monthly panel,
//! daily microstructure panel, state series and aux series restricted to a
//! common month calendar, with assets restricted to those present in both the
//! monthly and daily panels. Monthly observations are restamped on the last
//! trading day of each retained month. The close-to-close daily return matrix
//! and the equal-weighted daily market return are derived here once.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::Serialize;

use crate::calendar::{month_key, Frequency, TradingCalendar};
use crate::error::{Error, Result};
use crate::panel::{AuxSeries, DailyMicroPanel, ReturnPanel, StateSeries};

/// What alignment discarded, for the run report.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DropReport {
    pub dropped_months_monthly: usize,
    pub dropped_months_states: usize,
    pub dropped_months_aux: usize,
    pub dropped_daily_dates: usize,
    pub dropped_assets_monthly_only: Vec<String>,
    pub dropped_assets_daily_only: Vec<String>,
}

impl DropReport {
    pub fn is_clean(&self) -> bool {
        self.dropped_months_monthly == 0
            && self.dropped_months_states == 0
            && self.dropped_months_aux == 0
            && self.dropped_daily_dates == 0
            && self.dropped_assets_monthly_only.is_empty()
            && self.dropped_assets_daily_only.is_empty()
    }
}

/// Immutable aligned dataset. Safe to share across worker threads.
#[derive(Debug, Clone)]
pub struct AlignedDataset {
    pub calendar: TradingCalendar,
    pub assets: Vec<String>,
    pub monthly: ReturnPanel,
    pub daily: DailyMicroPanel,
    pub states: StateSeries,
    pub aux: AuxSeries,
    /// Close-to-close simple daily returns per asset; first valid day of each
    /// contiguous run is masked out.
    pub daily_returns: Array2<f64>,
    pub daily_returns_mask: Array2<bool>,
    /// Equal-weighted average of available asset daily returns, the market
    /// proxy fed to the daily beta estimators.
    pub market_daily: Vec<f64>,
    pub market_daily_mask: Vec<bool>,
    pub drops: DropReport,
}

impl AlignedDataset {
    /// Dataset restricted to the first `n_keep` months, re-aligned. Useful
    /// for verifying that real-time quantities ignore future data.
    pub fn truncate_months(&self, n_keep: usize) -> Result<AlignedDataset> {
        if n_keep == 0 || n_keep > self.calendar.n_months() {
            return Err(Error::Alignment(format!(
                "cannot keep {n_keep} of {} months",
                self.calendar.n_months()
            )));
        }
        let last = self.calendar.monthly_dates[n_keep - 1];
        align(
            &self.monthly.through(last),
            &self.daily.through(last),
            &self.states.through(last),
            &self.aux.through(last),
        )
    }
}

pub fn align(
    monthly: &ReturnPanel,
    daily: &DailyMicroPanel,
    states: &StateSeries,
    aux: &AuxSeries,
) -> Result<AlignedDataset> {
    if monthly.dates.is_empty() || daily.dates.is_empty() || states.dates.is_empty() || aux.dates.is_empty()
    {
        return Err(Error::Alignment("empty input series".into()));
    }
    if monthly.frequency != Frequency::Monthly {
        return Err(Error::Alignment("return panel must be monthly".into()));
    }

    // Retained months: intersection of the three monthly sources by (y, m).
    let mk_monthly: Vec<_> = monthly.dates.iter().map(|d| month_key(*d)).collect();
    let mk_states: BTreeSet<_> = states.dates.iter().map(|d| month_key(*d)).collect();
    let mk_aux: BTreeSet<_> = aux.dates.iter().map(|d| month_key(*d)).collect();
    let retained: BTreeSet<_> = mk_monthly
        .iter()
        .copied()
        .filter(|k| mk_states.contains(k) && mk_aux.contains(k))
        .collect();
    if retained.is_empty() {
        return Err(Error::Alignment(
            "no common months between monthly panel, states and aux".into(),
        ));
    }

    // Assets: intersection of monthly and daily universes, ordered.
    let monthly_assets: BTreeSet<_> = monthly.assets.iter().cloned().collect();
    let daily_assets: BTreeSet<_> = daily.assets.iter().cloned().collect();
    let assets: Vec<String> = monthly_assets.intersection(&daily_assets).cloned().collect();
    if assets.is_empty() {
        return Err(Error::Alignment(
            "no common assets between monthly and daily panels".into(),
        ));
    }

    let mut drops = DropReport {
        dropped_assets_monthly_only: monthly_assets.difference(&daily_assets).cloned().collect(),
        dropped_assets_daily_only: daily_assets.difference(&monthly_assets).cloned().collect(),
        ..Default::default()
    };

    // Daily dates restricted to retained months.
    let day_keep: Vec<usize> = (0..daily.dates.len())
        .filter(|&t| retained.contains(&month_key(daily.dates[t])))
        .collect();
    drops.dropped_daily_dates = daily.dates.len() - day_keep.len();
    let daily_dates: Vec<NaiveDate> = day_keep.iter().map(|&t| daily.dates[t]).collect();

    // Monthly stamp: last daily trading date of the month when one exists,
    // the monthly panel's stamp otherwise.
    let month_keep: Vec<usize> = (0..monthly.dates.len())
        .filter(|&t| retained.contains(&mk_monthly[t]))
        .collect();
    drops.dropped_months_monthly = monthly.dates.len() - month_keep.len();
    drops.dropped_months_states = states.dates.len()
        - states
            .dates
            .iter()
            .filter(|d| retained.contains(&month_key(**d)))
            .count();
    drops.dropped_months_aux = aux.dates.len()
        - aux
            .dates
            .iter()
            .filter(|d| retained.contains(&month_key(**d)))
            .count();

    let monthly_dates: Vec<NaiveDate> = month_keep
        .iter()
        .map(|&t| {
            let key = mk_monthly[t];
            daily_dates
                .iter()
                .rev()
                .find(|d| month_key(**d) == key)
                .copied()
                .unwrap_or(monthly.dates[t])
        })
        .collect();

    let calendar = TradingCalendar::new(monthly_dates.clone(), daily_dates.clone())?;

    // Column lookups in the source panels.
    let m_col: Vec<usize> = assets
        .iter()
        .map(|a| monthly.assets.iter().position(|b| b == a).unwrap())
        .collect();
    let d_col: Vec<usize> = assets
        .iter()
        .map(|a| daily.assets.iter().position(|b| b == a).unwrap())
        .collect();

    let n_m = month_keep.len();
    let n_d = day_keep.len();
    let n_a = assets.len();

    let mut m_values = Array2::from_elem((n_m, n_a), f64::NAN);
    let mut m_mask = Array2::from_elem((n_m, n_a), false);
    for (t, &src_t) in month_keep.iter().enumerate() {
        for (i, &src_i) in m_col.iter().enumerate() {
            if monthly.mask[(src_t, src_i)] {
                m_values[(t, i)] = monthly.values[(src_t, src_i)];
                m_mask[(t, i)] = true;
            }
        }
    }

    let mut close = Array2::from_elem((n_d, n_a), f64::NAN);
    let mut high = Array2::from_elem((n_d, n_a), f64::NAN);
    let mut low = Array2::from_elem((n_d, n_a), f64::NAN);
    let mut volume = Array2::from_elem((n_d, n_a), f64::NAN);
    let mut d_mask = Array2::from_elem((n_d, n_a), false);
    for (t, &src_t) in day_keep.iter().enumerate() {
        for (i, &src_i) in d_col.iter().enumerate() {
            if daily.mask[(src_t, src_i)] {
                close[(t, i)] = daily.close[(src_t, src_i)];
                high[(t, i)] = daily.high[(src_t, src_i)];
                low[(t, i)] = daily.low[(src_t, src_i)];
                volume[(t, i)] = daily.volume[(src_t, src_i)];
                d_mask[(t, i)] = true;
            }
        }
    }

    // State and aux rows for the retained months, restamped on the aligned
    // monthly dates.
    let mut s_values = Array2::zeros((n_m, 4));
    let mut a_rf = Vec::with_capacity(n_m);
    let mut a_factors = Array2::zeros((n_m, 6));
    for (t, &src_t) in month_keep.iter().enumerate() {
        let key = mk_monthly[src_t];
        let si = states
            .dates
            .iter()
            .position(|d| month_key(*d) == key)
            .expect("retained month present in states");
        let ai = aux
            .dates
            .iter()
            .position(|d| month_key(*d) == key)
            .expect("retained month present in aux");
        s_values.row_mut(t).assign(&states.values.row(si));
        a_rf.push(aux.risk_free[ai]);
        a_factors.row_mut(t).assign(&aux.factors.row(ai));
    }

    let monthly = ReturnPanel {
        frequency: Frequency::Monthly,
        dates: calendar.monthly_dates.clone(),
        assets: assets.clone(),
        values: m_values,
        mask: m_mask,
    };
    let daily = DailyMicroPanel {
        dates: calendar.daily_dates.clone(),
        assets: assets.clone(),
        close,
        high,
        low,
        volume,
        mask: d_mask,
    };
    let states = StateSeries {
        dates: calendar.monthly_dates.clone(),
        values: s_values,
    };
    let aux = AuxSeries {
        dates: calendar.monthly_dates.clone(),
        risk_free: a_rf,
        factors: a_factors,
    };

    let (daily_returns, daily_returns_mask) = close_to_close_returns(&daily);
    let (market_daily, market_daily_mask) = equal_weighted_market(&daily_returns, &daily_returns_mask);

    Ok(AlignedDataset {
        calendar,
        assets,
        monthly,
        daily,
        states,
        aux,
        daily_returns,
        daily_returns_mask,
        market_daily,
        market_daily_mask,
        drops,
    })
}

fn close_to_close_returns(daily: &DailyMicroPanel) -> (Array2<f64>, Array2<bool>) {
    let (n_d, n_a) = daily.close.dim();
    let mut ret = Array2::from_elem((n_d, n_a), f64::NAN);
    let mut mask = Array2::from_elem((n_d, n_a), false);
    for i in 0..n_a {
        for t in 1..n_d {
            if daily.mask[(t, i)] && daily.mask[(t - 1, i)] {
                ret[(t, i)] = daily.close[(t, i)] / daily.close[(t - 1, i)] - 1.0;
                mask[(t, i)] = true;
            }
        }
    }
    (ret, mask)
}

fn equal_weighted_market(ret: &Array2<f64>, mask: &Array2<bool>) -> (Vec<f64>, Vec<bool>) {
    let (n_d, n_a) = ret.dim();
    let mut market = vec![f64::NAN; n_d];
    let mut mmask = vec![false; n_d];
    for t in 0..n_d {
        let mut sum = 0.0;
        let mut n = 0usize;
        for i in 0..n_a {
            if mask[(t, i)] {
                sum += ret[(t, i)];
                n += 1;
            }
        }
        if n > 0 {
            market[t] = sum / n as f64;
            mmask[t] = true;
        }
    }
    (market, mmask)
}
