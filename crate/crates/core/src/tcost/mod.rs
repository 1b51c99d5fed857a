//! Low-frequency effective-spread estimation and trading-cost accounting.
//!
//! Four daily-data proxies for the effective bid-ask spread — the Gibbs
//! sampler estimate, the Corwin-Schultz high-low spread, the Abdi-Ranaldo
//! close-high-low spread, and the volume-over-volatility measure — are
//! averaged per asset-month into a composite half-spread. Component panels
//! store full spreads; the composite is their mean halved.

pub mod gibbs;

use chrono::NaiveDate;
use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::align::AlignedDataset;
use crate::error::{Error, Result};
use crate::rng::stream_seed;

pub use gibbs::{gibbs_spread, GibbsConfig, GibbsEstimate};

/// Names of the component estimators in panel order.
pub const COST_COMPONENTS: [&str; 4] = ["gibbs", "cs", "chl", "vov"];

#[derive(Debug, Clone, Serialize)]
pub struct CostSpec {
    /// Trailing estimation window per monthly refresh.
    pub window_months: usize,
    pub gibbs_sweeps: usize,
    pub gibbs_burn: usize,
    /// Calibration constant of the volume-over-volatility power law.
    pub vov_scale: f64,
    /// Cells need at least this many component estimates.
    pub min_components: usize,
    /// Apply the overnight-gap adjustment inside the Corwin-Schultz pairs.
    pub cs_overnight_adjust: bool,
    pub min_gibbs_days: usize,
    pub min_pairs: usize,
    pub seed: u64,
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec {
            window_months: 12,
            gibbs_sweeps: 1000,
            gibbs_burn: 200,
            vov_scale: 8.0e3,
            min_components: 2,
            cs_overnight_adjust: false,
            min_gibbs_days: 60,
            min_pairs: 12,
            seed: 0,
        }
    }
}

/// Per-asset, per-month composite half-spreads with the four full-spread
/// component panels.
#[derive(Debug, Clone)]
pub struct CostPanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub half_spread: Array2<f64>,
    pub mask: Array2<bool>,
    /// Full-spread component estimates, one matrix per entry of
    /// [`COST_COMPONENTS`]; NaN where unavailable.
    pub components: [Array2<f64>; 4],
}

impl CostPanel {
    /// Cross-sectional median half-spread at one month, used as the
    /// fallback for missing cells in the drag accounting.
    pub fn month_median(&self, t: usize) -> Option<f64> {
        let mut v: Vec<f64> = (0..self.assets.len())
            .filter(|&i| self.mask[(t, i)])
            .map(|i| self.half_spread[(t, i)])
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        })
    }
}

/// Corwin-Schultz spread for one overlapping two-day pair (full spread,
/// floored at zero).
pub fn corwin_schultz_pair(h1: f64, l1: f64, h2: f64, l2: f64) -> f64 {
    let b1 = (h1 / l1).ln().powi(2);
    let b2 = (h2 / l2).ln().powi(2);
    let beta = b1 + b2;
    let h2d = h1.max(h2);
    let l2d = l1.min(l2);
    let gamma = (h2d / l2d).ln().powi(2);
    let k = 3.0 - 2.0 * std::f64::consts::SQRT_2;
    let alpha = ((2.0 * beta).sqrt() - beta.sqrt()) / k - (gamma / k).sqrt();
    let s = 2.0 * (alpha.exp() - 1.0) / (1.0 + alpha.exp());
    s.max(0.0)
}

/// Mean Corwin-Schultz pair spread over a window of daily highs and lows.
/// Pairs must be adjacent in the calendar and valid on both days.
pub fn corwin_schultz_spread(
    high: &[f64],
    low: &[f64],
    valid: &[bool],
    min_pairs: usize,
) -> Result<f64> {
    corwin_schultz_spread_with(high, low, None, valid, min_pairs, false)
}

/// As [`corwin_schultz_spread`], optionally shifting each second day's range
/// by the overnight gap against the prior close before the pair estimate
/// (the close-based variant of the original overnight adjustment).
pub fn corwin_schultz_spread_with(
    high: &[f64],
    low: &[f64],
    close: Option<&[f64]>,
    valid: &[bool],
    min_pairs: usize,
    overnight_adjust: bool,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in 1..high.len() {
        if !(valid[t] && valid[t - 1]) {
            continue;
        }
        if !(high[t] > 0.0 && low[t] > 0.0 && high[t - 1] > 0.0 && low[t - 1] > 0.0) {
            continue;
        }
        let (mut h2, mut l2) = (high[t], low[t]);
        if overnight_adjust {
            if let Some(close) = close {
                let prev_close = close[t - 1];
                if prev_close > 0.0 {
                    if l2 > prev_close {
                        let gap = l2 - prev_close;
                        h2 -= gap;
                        l2 -= gap;
                    } else if h2 < prev_close {
                        let gap = prev_close - h2;
                        h2 += gap;
                        l2 += gap;
                    }
                }
            }
        }
        sum += corwin_schultz_pair(high[t - 1], low[t - 1], h2, l2);
        n += 1;
    }
    if n < min_pairs {
        return Err(Error::InsufficientData {
            required: min_pairs,
            actual: n,
        });
    }
    Ok(sum / n as f64)
}

/// Abdi-Ranaldo close-high-low spread (full spread): with eta the mid-range
/// log price, 2 sqrt(max(mean[(c_t - eta_t)(c_t - eta_{t+1})], 0)).
pub fn abdi_ranaldo_spread(
    close: &[f64],
    high: &[f64],
    low: &[f64],
    valid: &[bool],
    min_pairs: usize,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in 0..close.len().saturating_sub(1) {
        if !(valid[t] && valid[t + 1]) {
            continue;
        }
        if !(high[t] > 0.0 && low[t] > 0.0 && high[t + 1] > 0.0 && low[t + 1] > 0.0 && close[t] > 0.0)
        {
            continue;
        }
        let eta_t = (high[t].ln() + low[t].ln()) / 2.0;
        let eta_next = (high[t + 1].ln() + low[t + 1].ln()) / 2.0;
        let c_t = close[t].ln();
        sum += (c_t - eta_t) * (c_t - eta_next);
        n += 1;
    }
    if n < min_pairs {
        return Err(Error::InsufficientData {
            required: min_pairs,
            actual: n,
        });
    }
    Ok(2.0 * (sum / n as f64).max(0.0).sqrt())
}

/// Volume-over-volatility spread (full spread): k (sigma_d^2 / DV)^(1/3)
/// with sigma_d the daily return stdev and DV the mean daily dollar volume.
pub fn vov_spread(
    volume: &[f64],
    close: &[f64],
    returns: &[f64],
    valid_ret: &[bool],
    valid_px: &[bool],
    scale: f64,
    min_days: usize,
) -> Result<f64> {
    let mut dv_sum = 0.0;
    let mut dv_n = 0usize;
    for t in 0..volume.len() {
        if valid_px[t] && volume[t] > 0.0 && close[t] > 0.0 {
            dv_sum += volume[t] * close[t];
            dv_n += 1;
        }
    }
    if dv_n < min_days {
        return Err(Error::InsufficientData {
            required: min_days,
            actual: dv_n,
        });
    }
    let dv = dv_sum / dv_n as f64;
    if !(dv > 0.0) {
        return Err(Error::Numeric("zero dollar volume".into()));
    }
    let mut n = 0usize;
    let mut sum = 0.0;
    for t in 0..returns.len() {
        if valid_ret[t] {
            n += 1;
            sum += returns[t];
        }
    }
    if n < min_days {
        return Err(Error::InsufficientData {
            required: min_days,
            actual: n,
        });
    }
    let mean = sum / n as f64;
    let mut var = returns
        .iter()
        .zip(valid_ret)
        .filter(|(_, v)| **v)
        .map(|(r, _)| (r - mean) * (r - mean))
        .sum::<f64>()
        / (n - 1) as f64;
    // A centered sum this small is rounding residue from a constant series.
    if var <= (mean.abs().max(f64::MIN_POSITIVE) * 1e-10).powi(2) {
        var = 0.0;
    }
    Ok(scale * (var / dv).cbrt())
}

/// Composite half-spread from available full-spread components: their mean
/// halved, provided enough components are present.
pub fn composite_half_spread(components: &[Option<f64>; 4], min_components: usize) -> Option<f64> {
    let avail: Vec<f64> = components.iter().flatten().copied().collect();
    if avail.len() < min_components {
        return None;
    }
    Some(avail.iter().sum::<f64>() / avail.len() as f64 / 2.0)
}

/// Build the per-asset monthly cost panel on trailing windows. Cells are
/// masked when fewer than `min_components` estimators produce a value; the
/// gibbs component is deterministic per (asset, month) given the configured seed.
pub fn build_cost_panel(ds: &AlignedDataset, spec: &CostSpec) -> CostPanel {
    let n_m = ds.calendar.n_months();
    let n_a = ds.assets.len();
    let gibbs_cfg = GibbsConfig {
        sweeps: spec.gibbs_sweeps,
        burn: spec.gibbs_burn,
        ..Default::default()
    };

    let columns: Vec<Vec<[Option<f64>; 4]>> = (0..n_a)
        .into_par_iter()
        .map(|i| {
            let mut col = vec![[None; 4]; n_m];
            for m in 0..n_m {
                if m + 1 < spec.window_months {
                    continue;
                }
                let start_month = m + 1 - spec.window_months;
                // First daily index of the window: the day after the end of
                // the month preceding it (robust to months without daily
                // observations).
                let start = if start_month == 0 {
                    0
                } else {
                    ds.calendar.days_through_month(start_month - 1)
                };
                let end = ds.calendar.days_through_month(m);
                if end <= start {
                    continue;
                }
                let close: Vec<f64> = (start..end).map(|d| ds.daily.close[(d, i)]).collect();
                let high: Vec<f64> = (start..end).map(|d| ds.daily.high[(d, i)]).collect();
                let low: Vec<f64> = (start..end).map(|d| ds.daily.low[(d, i)]).collect();
                let volume: Vec<f64> = (start..end).map(|d| ds.daily.volume[(d, i)]).collect();
                let valid: Vec<bool> = (start..end).map(|d| ds.daily.mask[(d, i)]).collect();
                let rets: Vec<f64> = (start..end).map(|d| ds.daily_returns[(d, i)]).collect();
                let rets_ok: Vec<bool> =
                    (start..end).map(|d| ds.daily_returns_mask[(d, i)]).collect();

                let valid_closes: Vec<f64> = close
                    .iter()
                    .zip(&valid)
                    .filter(|(_, v)| **v)
                    .map(|(c, _)| *c)
                    .collect();
                let g = if valid_closes.len() >= spec.min_gibbs_days {
                    let seed = stream_seed(spec.seed, "gibbs")
                        ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
                        ^ (m as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
                    gibbs_spread(&valid_closes, &gibbs_cfg, seed)
                        .ok()
                        .map(|e| 2.0 * e.half_spread)
                } else {
                    None
                };
                let cs = corwin_schultz_spread_with(
                    &high,
                    &low,
                    Some(&close),
                    &valid,
                    spec.min_pairs,
                    spec.cs_overnight_adjust,
                )
                .ok();
                let chl = abdi_ranaldo_spread(&close, &high, &low, &valid, spec.min_pairs).ok();
                let vov = vov_spread(
                    &volume,
                    &close,
                    &rets,
                    &rets_ok,
                    &valid,
                    spec.vov_scale,
                    spec.min_pairs,
                )
                .ok();
                col[m] = [g, cs, chl, vov];
            }
            col
        })
        .collect();

    let mut half_spread = Array2::from_elem((n_m, n_a), f64::NAN);
    let mut mask = Array2::from_elem((n_m, n_a), false);
    let mut components =
        [(); 4].map(|_| Array2::from_elem((n_m, n_a), f64::NAN));
    for (i, col) in columns.into_iter().enumerate() {
        for (m, cell) in col.into_iter().enumerate() {
            for (k, comp) in cell.iter().enumerate() {
                if let Some(v) = comp {
                    components[k][(m, i)] = *v;
                }
            }
            if let Some(h) = composite_half_spread(&cell, spec.min_components) {
                half_spread[(m, i)] = h;
                mask[(m, i)] = true;
            }
        }
    }

    CostPanel {
        dates: ds.calendar.monthly_dates.clone(),
        assets: ds.assets.clone(),
        half_spread,
        mask,
        components,
    }
}
