//! Real-time beta panels.
//!
//! Seven market-beta estimators (Frazzini-Pedersen, OLS on daily and
//! three-day overlapping returns, Dimson lag-corrected, Welch winsorized,
//! Vasicek cross-sectional shrinkage, and the shrunk-Dimson "standard"
//! signal) plus the cash-flow and discount-rate news betas. Every panel cell
//! at month t uses data strictly up to and including t.

pub mod estimators;

use chrono::NaiveDate;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::AlignedDataset;
use crate::error::{Error, Result};
use crate::var_news::NewsSeries;

pub use estimators::{
    beta_dimson, beta_fp, beta_news, beta_ols, beta_ols3d, beta_welch, correlation, ols_slope,
    three_day_sums, vasicek_shrink,
};

/// Which beta signal a panel holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BetaKind {
    Fp,
    Ols,
    Ols3d,
    Dimson,
    Welch,
    Vasicek,
    Standard,
    CashFlow,
    DiscountRate,
}

impl BetaKind {
    pub fn name(&self) -> &'static str {
        match self {
            BetaKind::Fp => "fp",
            BetaKind::Ols => "ols",
            BetaKind::Ols3d => "ols3d",
            BetaKind::Dimson => "dimson",
            BetaKind::Welch => "welch",
            BetaKind::Vasicek => "vasicek",
            BetaKind::Standard => "standard",
            BetaKind::CashFlow => "cf",
            BetaKind::DiscountRate => "dr",
        }
    }

    pub fn parse(s: &str) -> Result<BetaKind> {
        Ok(match s {
            "fp" => BetaKind::Fp,
            "ols" => BetaKind::Ols,
            "ols3d" => BetaKind::Ols3d,
            "dimson" => BetaKind::Dimson,
            "welch" => BetaKind::Welch,
            "vasicek" => BetaKind::Vasicek,
            "standard" => BetaKind::Standard,
            "cf" => BetaKind::CashFlow,
            "dr" => BetaKind::DiscountRate,
            other => return Err(Error::Config(format!("unknown beta kind {other:?}"))),
        })
    }

    /// All market-beta signals usable as a sort variable.
    pub fn market_kinds() -> [BetaKind; 7] {
        [
            BetaKind::Fp,
            BetaKind::Ols,
            BetaKind::Ols3d,
            BetaKind::Dimson,
            BetaKind::Welch,
            BetaKind::Vasicek,
            BetaKind::Standard,
        ]
    }
}

/// Estimator parameters. Defaults follow the conventional construction:
/// one-year volatility and five-year correlation windows for the
/// Frazzini-Pedersen beta, one lag for Dimson, 0.6 shrinkage toward 1 for
/// the "standard" signal, a three-year monthly window for the news betas,
/// and an 80% window-coverage eligibility floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaSpec {
    pub kind: BetaKind,
    /// One-year leg of the Frazzini-Pedersen estimator, in years.
    pub vol_window_years: f64,
    /// Correlation leg of the Frazzini-Pedersen estimator, in years.
    pub corr_window_years: f64,
    /// Overlapping-sum horizon (days) for the correlation leg.
    pub fp_overlap_days: usize,
    /// Window for the remaining daily estimators, in years.
    pub window_years: f64,
    pub dimson_lags: usize,
    pub shrink_weight: f64,
    pub shrink_target: f64,
    pub welch_delta: f64,
    pub cf_window_months: usize,
    pub cf_min_months: usize,
    /// Divide the news covariances by the unexpected-market variance over
    /// the full expanding news sample instead of the rolling window.
    pub cf_expanding_denominator: bool,
    pub min_coverage: f64,
    pub min_days_per_year: usize,
    pub days_per_year: usize,
    pub vasicek_min_assets: usize,
}

impl BetaSpec {
    pub fn new(kind: BetaKind) -> Self {
        let shrink_weight = match kind {
            BetaKind::Standard => 0.6,
            _ => 1.0,
        };
        BetaSpec {
            kind,
            vol_window_years: 1.0,
            corr_window_years: 5.0,
            fp_overlap_days: 3,
            window_years: 1.0,
            dimson_lags: 1,
            shrink_weight,
            shrink_target: 1.0,
            welch_delta: 3.0,
            cf_window_months: 36,
            cf_min_months: 30,
            cf_expanding_denominator: false,
            min_coverage: 0.8,
            min_days_per_year: 120,
            days_per_year: 252,
            vasicek_min_assets: 30,
        }
    }

    pub fn fp() -> Self {
        Self::new(BetaKind::Fp)
    }

    pub fn cash_flow() -> Self {
        Self::new(BetaKind::CashFlow)
    }

    fn window_days(&self) -> usize {
        let years = match self.kind {
            BetaKind::Fp => self.corr_window_years,
            _ => self.window_years,
        };
        (years * self.days_per_year as f64).round() as usize
    }

    fn one_year_days(&self) -> usize {
        (self.vol_window_years * self.days_per_year as f64).round() as usize
    }
}

/// Date x asset matrix of real-time betas for one estimator.
#[derive(Debug, Clone)]
pub struct BetaPanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub values: Array2<f64>,
    pub mask: Array2<bool>,
    pub spec: BetaSpec,
}

impl BetaPanel {
    /// Masked time-average per asset, used by the per-firm scatter export.
    pub fn asset_means(&self) -> Vec<Option<f64>> {
        (0..self.assets.len())
            .map(|i| {
                let mut sum = 0.0;
                let mut n = 0usize;
                for t in 0..self.dates.len() {
                    if self.mask[(t, i)] {
                        sum += self.values[(t, i)];
                        n += 1;
                    }
                }
                if n > 0 {
                    Some(sum / n as f64)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Build the full real-time panel for one estimator. Cells whose window or
/// coverage preconditions fail are masked out, never filled.
pub fn build_beta_panel(
    ds: &AlignedDataset,
    news: Option<&NewsSeries>,
    spec: &BetaSpec,
) -> Result<BetaPanel> {
    match spec.kind {
        BetaKind::CashFlow | BetaKind::DiscountRate => {
            let news = news.ok_or_else(|| {
                Error::Config("news series required for cash-flow/discount-rate betas".into())
            })?;
            build_news_panel(ds, news, spec)
        }
        BetaKind::Vasicek => build_vasicek_panel(ds, spec),
        _ => build_daily_panel(ds, spec),
    }
}

fn asset_daily_column(ds: &AlignedDataset, i: usize) -> (Vec<f64>, Vec<bool>) {
    let n_d = ds.calendar.n_days();
    let mut ret = Vec::with_capacity(n_d);
    let mut ok = Vec::with_capacity(n_d);
    for t in 0..n_d {
        ret.push(ds.daily_returns[(t, i)]);
        ok.push(ds.daily_returns_mask[(t, i)] && ds.market_daily_mask[t]);
    }
    (ret, ok)
}

fn window_counts(valid: &[bool]) -> usize {
    valid.iter().filter(|v| **v).count()
}

fn build_daily_panel(ds: &AlignedDataset, spec: &BetaSpec) -> Result<BetaPanel> {
    let n_m = ds.calendar.n_months();
    let n_a = ds.assets.len();
    let win = spec.window_days();
    let one_year = spec.one_year_days();

    let columns: Vec<Vec<Option<f64>>> = (0..n_a)
        .into_par_iter()
        .map(|i| {
            let (stock, valid) = asset_daily_column(ds, i);
            let mut col = vec![None; n_m];
            for t in 0..n_m {
                let end = ds.calendar.days_through_month(t);
                if end < win {
                    continue;
                }
                let start = end - win;
                let v = &valid[start..end];
                let s = &stock[start..end];
                let m = &ds.market_daily[start..end];
                let n_valid = window_counts(v);
                let years = win as f64 / spec.days_per_year as f64;
                if (n_valid as f64) < spec.min_coverage * win as f64
                    || n_valid < (spec.min_days_per_year as f64 * years) as usize
                {
                    continue;
                }
                if spec.kind == BetaKind::Fp {
                    // The one-year sub-window must clear coverage on its own.
                    let sub = &v[win - one_year..];
                    if (window_counts(sub) as f64) < spec.min_coverage * one_year as f64 {
                        continue;
                    }
                }
                let est = match spec.kind {
                    BetaKind::Fp => beta_fp(s, m, v, one_year, spec.fp_overlap_days),
                    BetaKind::Ols => beta_ols(s, m, v),
                    BetaKind::Ols3d => beta_ols3d(s, m, v),
                    BetaKind::Dimson => beta_dimson(
                        s,
                        m,
                        v,
                        spec.dimson_lags,
                        spec.shrink_weight,
                        spec.shrink_target,
                    ),
                    BetaKind::Welch => beta_welch(s, m, v, spec.welch_delta),
                    BetaKind::Standard => beta_dimson(
                        s,
                        m,
                        v,
                        spec.dimson_lags,
                        spec.shrink_weight,
                        spec.shrink_target,
                    ),
                    _ => unreachable!(),
                };
                if let Ok(b) = est {
                    if b.is_finite() {
                        col[t] = Some(b);
                    }
                }
            }
            col
        })
        .collect();

    Ok(assemble(ds, spec, columns, n_m, n_a))
}

fn build_vasicek_panel(ds: &AlignedDataset, spec: &BetaSpec) -> Result<BetaPanel> {
    let n_m = ds.calendar.n_months();
    let n_a = ds.assets.len();
    let win = (spec.window_years * spec.days_per_year as f64).round() as usize;

    // Raw one-year OLS betas and standard errors per asset.
    let raw_cols: Vec<Vec<Option<(f64, f64)>>> = (0..n_a)
        .into_par_iter()
        .map(|i| {
            let (stock, valid) = asset_daily_column(ds, i);
            let mut col = vec![None; n_m];
            for t in 0..n_m {
                let end = ds.calendar.days_through_month(t);
                if end < win {
                    continue;
                }
                let start = end - win;
                let v = &valid[start..end];
                if (window_counts(v) as f64) < spec.min_coverage * win as f64 {
                    continue;
                }
                if let Ok((b, se)) = ols_slope(&ds.market_daily[start..end], &stock[start..end], v)
                {
                    if b.is_finite() && se.is_finite() {
                        col[t] = Some((b, se));
                    }
                }
            }
            col
        })
        .collect();

    let mut values = Array2::from_elem((n_m, n_a), f64::NAN);
    let mut mask = Array2::from_elem((n_m, n_a), false);
    for t in 0..n_m {
        let mut idx = Vec::new();
        let mut raw = Vec::new();
        let mut se = Vec::new();
        for (i, col) in raw_cols.iter().enumerate() {
            if let Some((b, s)) = col[t] {
                idx.push(i);
                raw.push(b);
                se.push(s);
            }
        }
        if let Ok(shrunk) = vasicek_shrink(&raw, &se, spec.vasicek_min_assets) {
            for (pos, &i) in idx.iter().enumerate() {
                values[(t, i)] = shrunk[pos];
                mask[(t, i)] = true;
            }
        }
    }

    Ok(BetaPanel {
        dates: ds.calendar.monthly_dates.clone(),
        assets: ds.assets.clone(),
        values,
        mask,
        spec: spec.clone(),
    })
}

fn build_news_panel(ds: &AlignedDataset, news: &NewsSeries, spec: &BetaSpec) -> Result<BetaPanel> {
    let n_m = ds.calendar.n_months();
    let n_a = ds.assets.len();
    let win = spec.cf_window_months;

    // The news series is a suffix of the aligned monthly calendar.
    let offset = ds
        .calendar
        .monthly_dates
        .iter()
        .position(|d| !news.dates.is_empty() && *d == news.dates[0])
        .ok_or_else(|| Error::Alignment("news series does not start on a calendar month".into()))?;

    // Per calendar month: news values and availability.
    let mut news_vals = vec![f64::NAN; n_m];
    let mut unexpected = vec![f64::NAN; n_m];
    let mut news_ok = vec![false; n_m];
    for (k, date) in news.dates.iter().enumerate() {
        let t = offset + k;
        if t >= n_m || ds.calendar.monthly_dates[t] != *date {
            return Err(Error::Alignment("news dates disagree with calendar".into()));
        }
        if news.mask[k] {
            // The "good" beta follows the negative-of-discount-rate-news
            // convention, so bad + good add up to the plain covariance
            // beta: cov(r, n_cf) + cov(r, -n_dr) = cov(r, unexpected).
            news_vals[t] = match spec.kind {
                BetaKind::CashFlow => news.cash_flow[k],
                BetaKind::DiscountRate => -news.discount_rate[k],
                _ => unreachable!(),
            };
            unexpected[t] = news.unexpected_market[k];
            news_ok[t] = true;
        }
    }

    // Expanding-sample denominator: the variance of the unexpected market
    // return over every news month through t (when configured).
    let expanding_var: Vec<Option<f64>> = if spec.cf_expanding_denominator {
        let mut out = vec![None; n_m];
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for t in 0..n_m {
            if news_ok[t] {
                n += 1;
                sum += unexpected[t];
                sum2 += unexpected[t] * unexpected[t];
            }
            if n >= 2 {
                let mean = sum / n as f64;
                let var = (sum2 - sum * mean) / (n - 1) as f64;
                if var > 0.0 {
                    out[t] = Some(var);
                }
            }
        }
        out
    } else {
        Vec::new()
    };

    let columns: Vec<Vec<Option<f64>>> = (0..n_a)
        .into_par_iter()
        .map(|i| {
            // Monthly log returns for this asset.
            let mut logret = vec![f64::NAN; n_m];
            let mut has_ret = vec![false; n_m];
            for t in 0..n_m {
                if ds.monthly.mask[(t, i)] {
                    logret[t] = (1.0 + ds.monthly.values[(t, i)]).ln();
                    has_ret[t] = true;
                }
            }
            let mut col = vec![None; n_m];
            for t in 0..n_m {
                if t + 1 < win {
                    continue;
                }
                let start = t + 1 - win;
                let valid: Vec<bool> = (start..=t).map(|s| has_ret[s] && news_ok[s]).collect();
                let est = if spec.cf_expanding_denominator {
                    match (
                        windowed_covariance(
                            &logret[start..=t],
                            &news_vals[start..=t],
                            &valid,
                            spec.cf_min_months,
                        ),
                        expanding_var[t],
                    ) {
                        (Some(cov), Some(var)) => Ok(cov / var),
                        _ => Err(Error::UndefinedBeta("expanding denominator unavailable".into())),
                    }
                } else {
                    beta_news(
                        &logret[start..=t],
                        &news_vals[start..=t],
                        &unexpected[start..=t],
                        &valid,
                        spec.cf_min_months,
                    )
                };
                if let Ok(b) = est {
                    if b.is_finite() {
                        col[t] = Some(b);
                    }
                }
            }
            col
        })
        .collect();

    Ok(assemble(ds, spec, columns, n_m, n_a))
}

/// Sample covariance (ddof 1) over jointly valid entries; None below the
/// month floor.
fn windowed_covariance(x: &[f64], y: &[f64], valid: &[bool], min_n: usize) -> Option<f64> {
    let mut n = 0usize;
    let (mut sx, mut sy) = (0.0, 0.0);
    for k in 0..x.len() {
        if valid[k] {
            n += 1;
            sx += x[k];
            sy += y[k];
        }
    }
    if n < min_n.max(2) {
        return None;
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let mut cov = 0.0;
    for k in 0..x.len() {
        if valid[k] {
            cov += (x[k] - mx) * (y[k] - my);
        }
    }
    Some(cov / (n - 1) as f64)
}

fn assemble(
    ds: &AlignedDataset,
    spec: &BetaSpec,
    columns: Vec<Vec<Option<f64>>>,
    n_m: usize,
    n_a: usize,
) -> BetaPanel {
    let mut values = Array2::from_elem((n_m, n_a), f64::NAN);
    let mut mask = Array2::from_elem((n_m, n_a), false);
    for (i, col) in columns.into_iter().enumerate() {
        for (t, cell) in col.into_iter().enumerate() {
            if let Some(b) = cell {
                values[(t, i)] = b;
                mask[(t, i)] = true;
            }
        }
    }
    BetaPanel {
        dates: ds.calendar.monthly_dates.clone(),
        assets: ds.assets.clone(),
        values,
        mask,
        spec: spec.clone(),
    }
}
