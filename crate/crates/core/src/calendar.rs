//! Trading calendars linking the daily and monthly grids.

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

/// Observation frequency of a return panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frequency {
    Monthly,
    Daily,
}

/// A (year, month) key used to match dates across sources that may stamp
/// month-end observations on different days.
pub fn month_key(d: NaiveDate) -> (i32, u32) {
    (d.year(), d.month())
}

/// Joint monthly/daily calendar. Monthly observations are stamped on the last
/// trading day of the month; every daily date maps to exactly one month.
#[derive(Debug, Clone)]
pub struct TradingCalendar {
    pub monthly_dates: Vec<NaiveDate>,
    pub daily_dates: Vec<NaiveDate>,
    /// Index into `monthly_dates` for each daily date.
    pub day_month: Vec<usize>,
    /// Half-open range of daily indices per month; empty when a month has no
    /// daily observations.
    pub month_days: Vec<(usize, usize)>,
}

impl TradingCalendar {
    pub fn new(monthly_dates: Vec<NaiveDate>, daily_dates: Vec<NaiveDate>) -> Result<Self> {
        check_strictly_increasing(&monthly_dates, "monthly calendar")?;
        check_strictly_increasing(&daily_dates, "daily calendar")?;
        let mut day_month = Vec::with_capacity(daily_dates.len());
        let mut month_days = vec![(0usize, 0usize); monthly_dates.len()];
        let mut m = 0usize;
        let mut open: Option<usize> = None;
        for (di, d) in daily_dates.iter().enumerate() {
            while m < monthly_dates.len() && month_key(monthly_dates[m]) < month_key(*d) {
                if open == Some(m) {
                    open = None;
                }
                m += 1;
            }
            if m >= monthly_dates.len() || month_key(monthly_dates[m]) != month_key(*d) {
                return Err(Error::Alignment(format!(
                    "daily date {d} does not fall in any retained month"
                )));
            }
            if open != Some(m) {
                month_days[m] = (di, di);
                open = Some(m);
            }
            month_days[m].1 = di + 1;
            day_month.push(m);
        }
        Ok(Self {
            monthly_dates,
            daily_dates,
            day_month,
            month_days,
        })
    }

    pub fn n_months(&self) -> usize {
        self.monthly_dates.len()
    }

    pub fn n_days(&self) -> usize {
        self.daily_dates.len()
    }

    /// Daily index range `[start, end)` for months up to and including `month_idx`.
    /// Used to cut real-time daily windows at a month end.
    pub fn days_through_month(&self, month_idx: usize) -> usize {
        let mut end = 0;
        for m in (0..=month_idx).rev() {
            let (s, e) = self.month_days[m];
            if e > s {
                end = e;
                break;
            }
        }
        end
    }
}

pub fn check_strictly_increasing(dates: &[NaiveDate], what: &str) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Schema {
                path: what.to_string(),
                msg: format!("dates not strictly increasing near {} / {}", w[0], w[1]),
            });
        }
    }
    Ok(())
}
