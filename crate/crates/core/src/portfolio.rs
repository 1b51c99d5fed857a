//! Long-short factor construction.
//!
//! Tercile and 3x3 double-sort assignments, equal-weighted leg aggregation,
//! the beta-neutral leveraged factor return
//! `beta_low^-1 (r_L - r_f) - beta_high^-1 (r_H - r_f)`, turnover
//! accounting, and the month-by-month backtest loop. Signals observed at
//! month t are paired with returns realized at t+1.

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::align::AlignedDataset;
use crate::beta::BetaPanel;
use crate::error::{Error, Result};
use crate::tcost::CostPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SortScheme {
    Tercile,
    Double3x3,
}

impl SortScheme {
    pub fn n_buckets(&self) -> usize {
        match self {
            SortScheme::Tercile => 3,
            SortScheme::Double3x3 => 9,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SortScheme::Tercile => "bab",
            SortScheme::Double3x3 => "babb",
        }
    }
}

/// Which 3x3 cells form the double-sort factor legs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BabbLegMode {
    /// Long cell (1,1), short cell (3,3).
    Corner,
    /// Long the whole low-beta row, short the whole high-beta row.
    RowUnion,
}

/// Bucket membership of every eligible asset at one rebalance date.
/// Buckets are 1-based; for the double sort, bucket = (beta tercile - 1) * 3
/// + bad-beta tercile, so 1 is low/low and 9 is high/high.
#[derive(Debug, Clone, Serialize)]
pub struct SortAssignment {
    pub date: NaiveDate,
    pub scheme: SortScheme,
    /// (asset index, bucket) pairs, one per eligible asset.
    pub members: Vec<(usize, u8)>,
    /// All sort values tied (breakpoints degenerate).
    pub degenerate: bool,
}

impl SortAssignment {
    /// Asset indices in the given buckets, each with its within-leg equal
    /// weight.
    pub fn leg_weights(&self, buckets: &[u8]) -> Vec<(usize, f64)> {
        let ids: Vec<usize> = self
            .members
            .iter()
            .filter(|(_, b)| buckets.contains(b))
            .map(|(i, _)| *i)
            .collect();
        let w = 1.0 / ids.len().max(1) as f64;
        ids.into_iter().map(|i| (i, w)).collect()
    }

    pub fn bucket_members(&self, bucket: u8) -> Vec<usize> {
        self.members
            .iter()
            .filter(|(_, b)| *b == bucket)
            .map(|(i, _)| *i)
            .collect()
    }
}

/// Rank-based tercile label (1..=3) for each entry of a cross-section, ties
/// broken by ascending asset index.
fn tercile_labels(values: &[(usize, f64)]) -> Vec<(usize, u8)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .1
            .partial_cmp(&values[b].1)
            .unwrap()
            .then(values[a].0.cmp(&values[b].0))
    });
    let n = values.len();
    let mut out = vec![(0usize, 0u8); n];
    for (rank, &pos) in order.iter().enumerate() {
        let bucket = (rank * 3 / n).min(2) as u8 + 1;
        out[pos] = (values[pos].0, bucket);
    }
    out
}

/// Univariate tercile sort on one signal cross-section.
pub fn tercile_sort(
    date: NaiveDate,
    betas: &[(usize, f64)],
    min_assets: usize,
) -> Result<SortAssignment> {
    if betas.len() < min_assets {
        return Err(Error::InsufficientBreadth {
            date: date.to_string(),
            required: min_assets,
            actual: betas.len(),
        });
    }
    let members = tercile_labels(betas);
    let first = betas[0].1;
    let degenerate = betas.iter().all(|(_, v)| *v == first);
    Ok(SortAssignment {
        date,
        scheme: SortScheme::Tercile,
        members,
        degenerate,
    })
}

/// Independent 3x3 double sort: tercile breakpoints computed separately on
/// each signal over the jointly eligible cross-section. With
/// `conditional = true` the bad-beta terciles are taken within each beta
/// tercile instead.
pub fn double_sort_3x3(
    date: NaiveDate,
    betas: &[(usize, f64)],
    bad_betas: &[(usize, f64)],
    min_assets: usize,
    conditional: bool,
) -> Result<SortAssignment> {
    if betas.len() != bad_betas.len() {
        return Err(Error::Numeric("sort cross-sections differ in length".into()));
    }
    if betas.len() < min_assets {
        return Err(Error::InsufficientBreadth {
            date: date.to_string(),
            required: min_assets,
            actual: betas.len(),
        });
    }
    let beta_terciles = tercile_labels(betas);
    let mut members = Vec::with_capacity(betas.len());
    if conditional {
        for outer in 1..=3u8 {
            let inner: Vec<(usize, f64)> = bad_betas
                .iter()
                .zip(&beta_terciles)
                .filter(|(_, (_, bt))| *bt == outer)
                .map(|((i, v), _)| (*i, *v))
                .collect();
            for (i, inner_bucket) in tercile_labels(&inner) {
                members.push((i, (outer - 1) * 3 + inner_bucket));
            }
        }
    } else {
        let bad_terciles = tercile_labels(bad_betas);
        for ((i, bt), (j, bbt)) in beta_terciles.iter().zip(&bad_terciles) {
            debug_assert_eq!(i, j);
            members.push((*i, (bt - 1) * 3 + bbt));
        }
    }
    members.sort_by_key(|(i, _)| *i);
    let degenerate = betas.iter().all(|(_, v)| *v == betas[0].1)
        || bad_betas.iter().all(|(_, v)| *v == bad_betas[0].1);
    Ok(SortAssignment {
        date,
        scheme: SortScheme::Double3x3,
        members,
        degenerate,
    })
}

/// Equal-weighted mean return and mean signal beta of a leg. Constituents
/// missing a realized return are dropped from that month's mean (their
/// weight is effectively redistributed).
pub fn leg_aggregate(
    leg: &[(usize, f64)],
    next_returns: impl Fn(usize) -> Option<f64>,
    betas_at_t: impl Fn(usize) -> f64,
    date: NaiveDate,
    leg_name: &str,
) -> Result<(f64, f64)> {
    if leg.is_empty() {
        return Err(Error::EmptyLeg {
            date: date.to_string(),
            leg: leg_name.to_string(),
        });
    }
    let mut ret_sum = 0.0;
    let mut ret_n = 0usize;
    let mut beta_sum = 0.0;
    for &(i, _) in leg {
        beta_sum += betas_at_t(i);
        if let Some(r) = next_returns(i) {
            ret_sum += r;
            ret_n += 1;
        }
    }
    if ret_n == 0 {
        return Err(Error::EmptyLeg {
            date: date.to_string(),
            leg: format!("{leg_name} (no realized returns)"),
        });
    }
    Ok((ret_sum / ret_n as f64, beta_sum / leg.len() as f64))
}

/// The beta-neutral long-short return.
pub fn factor_return(
    beta_low: f64,
    beta_high: f64,
    r_low: f64,
    r_high: f64,
    rf: f64,
    date: NaiveDate,
) -> Result<f64> {
    if beta_low <= 0.0 {
        return Err(Error::LeverageUndefined {
            date: date.to_string(),
            beta: beta_low,
        });
    }
    if beta_high <= 0.0 {
        return Err(Error::LeverageUndefined {
            date: date.to_string(),
            beta: beta_high,
        });
    }
    Ok((r_low - rf) / beta_low - (r_high - rf) / beta_high)
}

/// One-half the sum of absolute differences between new target weights and
/// previous weights drifted by the period's returns. `prev` and `next` are
/// (asset, weight) lists each summing to one; a missing drift return is
/// treated as zero.
pub fn leg_turnover(
    prev: &[(usize, f64)],
    next: &[(usize, f64)],
    drift_returns: impl Fn(usize) -> Option<f64>,
) -> f64 {
    use std::collections::BTreeMap;
    let mut drifted: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total = 0.0;
    for &(i, w) in prev {
        let g = w * (1.0 + drift_returns(i).unwrap_or(0.0));
        drifted.insert(i, g);
        total += g;
    }
    if total > 0.0 {
        for v in drifted.values_mut() {
            *v /= total;
        }
    }
    let mut turnover = 0.0;
    let mut seen = drifted.clone();
    for &(i, w) in next {
        let old = seen.remove(&i).unwrap_or(0.0);
        turnover += (w - old).abs();
    }
    for (_, old) in seen {
        turnover += old;
    }
    turnover / 2.0
}

/// Backtest controls; `min_assets` falls back to the scheme's conventional
/// floor (30 univariate, 90 double) when zero.
#[derive(Debug, Clone, Serialize)]
pub struct BacktestConfig {
    pub scheme: SortScheme,
    pub babb_legs: BabbLegMode,
    pub conditional_sort: bool,
    pub min_assets: usize,
    pub scale_drag_by_leverage: bool,
    /// Eligibility price floor applied to the last close at the signal
    /// month; zero disables it.
    pub min_price: f64,
    pub min_valid_months: usize,
}

impl BacktestConfig {
    pub fn new(scheme: SortScheme) -> Self {
        BacktestConfig {
            scheme,
            babb_legs: BabbLegMode::Corner,
            conditional_sort: false,
            min_assets: 0,
            scale_drag_by_leverage: true,
            min_price: 0.0,
            min_valid_months: 24,
        }
    }

    fn breadth_floor(&self) -> usize {
        if self.min_assets > 0 {
            self.min_assets
        } else {
            match self.scheme {
                SortScheme::Tercile => 30,
                SortScheme::Double3x3 => 90,
            }
        }
    }

    fn legs(&self) -> (Vec<u8>, Vec<u8>) {
        match (self.scheme, self.babb_legs) {
            (SortScheme::Tercile, _) => (vec![1], vec![3]),
            (SortScheme::Double3x3, BabbLegMode::Corner) => (vec![1], vec![9]),
            (SortScheme::Double3x3, BabbLegMode::RowUnion) => (vec![1, 2, 3], vec![7, 8, 9]),
        }
    }
}

/// Monthly factor series with per-leg diagnostics. Rows are stamped on the
/// realization month (signals one month earlier).
#[derive(Debug, Clone)]
pub struct FactorSeries {
    pub scheme: SortScheme,
    pub dates: Vec<NaiveDate>,
    pub mask: Vec<bool>,
    pub gross: Vec<f64>,
    pub net: Vec<f64>,
    pub cost_drag: Vec<f64>,
    pub leg_low_return: Vec<f64>,
    pub leg_high_return: Vec<f64>,
    pub beta_low: Vec<f64>,
    pub beta_high: Vec<f64>,
    pub leverage: Vec<f64>,
    pub turnover_low: Vec<f64>,
    pub turnover_high: Vec<f64>,
}

impl FactorSeries {
    fn empty(scheme: SortScheme, dates: Vec<NaiveDate>) -> Self {
        let n = dates.len();
        FactorSeries {
            scheme,
            dates,
            mask: vec![false; n],
            gross: vec![f64::NAN; n],
            net: vec![f64::NAN; n],
            cost_drag: vec![f64::NAN; n],
            leg_low_return: vec![f64::NAN; n],
            leg_high_return: vec![f64::NAN; n],
            beta_low: vec![f64::NAN; n],
            beta_high: vec![f64::NAN; n],
            leverage: vec![f64::NAN; n],
            turnover_low: vec![f64::NAN; n],
            turnover_high: vec![f64::NAN; n],
        }
    }

    pub fn n_valid(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Dates and returns of the valid months.
    pub fn valid_series(&self, net: bool) -> (Vec<NaiveDate>, Vec<f64>) {
        let mut dates = Vec::new();
        let mut rets = Vec::new();
        for t in 0..self.dates.len() {
            if self.mask[t] {
                dates.push(self.dates[t]);
                rets.push(if net { self.net[t] } else { self.gross[t] });
            }
        }
        (dates, rets)
    }
}

/// Issues accumulated over a run, echoed into the report.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunWarnings {
    pub degenerate_sorts: usize,
    pub masked_months: usize,
    pub empty_leg_months: usize,
    pub leverage_undefined_months: usize,
    pub missing_cost_cells: usize,
}

/// Everything a backtest produces: the factor series, per-bucket equal
/// weighted returns (for the sort regressions), membership diagnostics and
/// the assignments themselves.
#[derive(Debug, Clone)]
pub struct BacktestOutput {
    pub factor: FactorSeries,
    /// Realization-month x bucket matrix of equal-weighted bucket returns.
    pub bucket_returns: Array2<f64>,
    pub bucket_mask: Array2<bool>,
    /// Mean constituent count per bucket over valid months.
    pub bucket_counts: Vec<f64>,
    /// Mean one-sided turnover per bucket.
    pub bucket_turnover: Vec<f64>,
    /// Mean constituent half-spread per bucket (when costs supplied).
    pub bucket_half_spread: Vec<f64>,
    /// Assignment per signal month (None where the sort failed).
    pub assignments: Vec<Option<SortAssignment>>,
    pub warnings: RunWarnings,
}

/// Run the monthly rebalanced backtest. `bad_betas` is required for the
/// double-sort scheme; `costs` switches net-of-cost accounting on.
pub fn run_backtest(
    ds: &AlignedDataset,
    betas: &BetaPanel,
    bad_betas: Option<&BetaPanel>,
    costs: Option<&CostPanel>,
    cfg: &BacktestConfig,
) -> Result<BacktestOutput> {
    let n_m = ds.calendar.n_months();
    let n_a = ds.assets.len();
    if cfg.scheme == SortScheme::Double3x3 && bad_betas.is_none() {
        return Err(Error::Config("double sort requires a bad-beta panel".into()));
    }
    let n_buckets = cfg.scheme.n_buckets();
    let (low_leg, high_leg) = cfg.legs();
    let floor = cfg.breadth_floor();

    let mut warnings = RunWarnings::default();
    let mut assignments: Vec<Option<SortAssignment>> = vec![None; n_m];

    // Signal months: sort the eligible cross-section.
    for t in 0..n_m.saturating_sub(1) {
        let mut eligible: Vec<usize> = Vec::new();
        for i in 0..n_a {
            if !betas.mask[(t, i)] {
                continue;
            }
            if let Some(bb) = bad_betas {
                if !bb.mask[(t, i)] {
                    continue;
                }
            }
            if cfg.min_price > 0.0 && !passes_price_floor(ds, t, i, cfg.min_price) {
                continue;
            }
            eligible.push(i);
        }
        if eligible.len() < floor {
            continue;
        }
        let date = ds.calendar.monthly_dates[t];
        let signal: Vec<(usize, f64)> = eligible.iter().map(|&i| (i, betas.values[(t, i)])).collect();
        let sorted = match cfg.scheme {
            SortScheme::Tercile => tercile_sort(date, &signal, floor),
            SortScheme::Double3x3 => {
                let bb = bad_betas.unwrap();
                let bad: Vec<(usize, f64)> =
                    eligible.iter().map(|&i| (i, bb.values[(t, i)])).collect();
                double_sort_3x3(date, &signal, &bad, floor, cfg.conditional_sort)
            }
        };
        match sorted {
            Ok(a) => {
                if a.degenerate {
                    warnings.degenerate_sorts += 1;
                }
                assignments[t] = Some(a);
            }
            Err(_) => {
                warnings.masked_months += 1;
            }
        }
    }

    let mut factor = FactorSeries::empty(cfg.scheme, ds.calendar.monthly_dates.clone());
    let mut bucket_returns = Array2::from_elem((n_m, n_buckets), f64::NAN);
    let mut bucket_mask = Array2::from_elem((n_m, n_buckets), false);
    let mut bucket_count_sum = vec![0.0; n_buckets];
    let mut bucket_turnover_sum = vec![0.0; n_buckets];
    let mut bucket_turnover_n = vec![0usize; n_buckets];
    let mut bucket_spread_sum = vec![0.0; n_buckets];
    let mut bucket_spread_n = vec![0usize; n_buckets];
    let mut valid_assignment_months = 0usize;

    for t in 0..n_m.saturating_sub(1) {
        let Some(assign) = assignments[t].as_ref() else {
            continue;
        };
        let h = t + 1; // realization month
        let next_ret = |i: usize| -> Option<f64> {
            if ds.monthly.mask[(h, i)] {
                Some(ds.monthly.values[(h, i)])
            } else {
                None
            }
        };
        let beta_at_t = |i: usize| betas.values[(t, i)];

        valid_assignment_months += 1;

        // Per-bucket diagnostics and returns.
        for b in 1..=n_buckets as u8 {
            let members = assign.bucket_members(b);
            bucket_count_sum[(b - 1) as usize] += members.len() as f64;
            let mut sum = 0.0;
            let mut n = 0usize;
            for &i in &members {
                if let Some(r) = next_ret(i) {
                    sum += r;
                    n += 1;
                }
            }
            if n > 0 {
                bucket_returns[(h, (b - 1) as usize)] = sum / n as f64;
                bucket_mask[(h, (b - 1) as usize)] = true;
            }
            if let Some(cp) = costs {
                for &i in &members {
                    if cp.mask[(t, i)] {
                        bucket_spread_sum[(b - 1) as usize] += cp.half_spread[(t, i)];
                        bucket_spread_n[(b - 1) as usize] += 1;
                    }
                }
            }
            // Bucket turnover versus the previous assignment, drifted by
            // month-h returns.
            if let Some(prev) = t.checked_sub(1).and_then(|p| assignments[p].as_ref()) {
                let prev_w = prev.leg_weights(&[b]);
                let next_w = assign.leg_weights(&[b]);
                if !prev_w.is_empty() && !next_w.is_empty() {
                    let drift = |i: usize| -> Option<f64> {
                        if ds.monthly.mask[(t, i)] {
                            Some(ds.monthly.values[(t, i)])
                        } else {
                            None
                        }
                    };
                    bucket_turnover_sum[(b - 1) as usize] +=
                        leg_turnover(&prev_w, &next_w, drift);
                    bucket_turnover_n[(b - 1) as usize] += 1;
                }
            }
        }

        let low = assign.leg_weights(&low_leg);
        let high = assign.leg_weights(&high_leg);
        let date = assign.date;
        let (r_low, b_low) = match leg_aggregate(&low, next_ret, beta_at_t, date, "low") {
            Ok(v) => v,
            Err(_) => {
                warnings.empty_leg_months += 1;
                continue;
            }
        };
        let (r_high, b_high) = match leg_aggregate(&high, next_ret, beta_at_t, date, "high") {
            Ok(v) => v,
            Err(_) => {
                warnings.empty_leg_months += 1;
                continue;
            }
        };
        let rf = ds.aux.risk_free[h];
        let gross = match factor_return(b_low, b_high, r_low, r_high, rf, date) {
            Ok(v) => v,
            Err(_) => {
                warnings.leverage_undefined_months += 1;
                continue;
            }
        };

        // Turnover of each factor leg: trades executed at the start of month
        // h move the leg from the previous assignment (drifted through the
        // signal month) to the new one.
        let prev = t.checked_sub(1).and_then(|p| assignments[p].as_ref());
        let drift = |i: usize| -> Option<f64> {
            if ds.monthly.mask[(t, i)] {
                Some(ds.monthly.values[(t, i)])
            } else {
                None
            }
        };
        let (turn_low, turn_high) = match prev {
            Some(p) => (
                leg_turnover(&p.leg_weights(&low_leg), &low, drift),
                leg_turnover(&p.leg_weights(&high_leg), &high, drift),
            ),
            // Establishing the initial positions from cash trades the whole
            // book: turnover 1/2 per leg.
            None => (
                leg_turnover(&[], &low, drift),
                leg_turnover(&[], &high, drift),
            ),
        };

        // Cost drag: one-way half-spread cost on every traded weight, with
        // the trade sized to the levered leg when configured.
        let mut drag = 0.0;
        if let Some(cp) = costs {
            let (scale_low, scale_high) = if cfg.scale_drag_by_leverage {
                (1.0 / b_low, 1.0 / b_high)
            } else {
                (1.0, 1.0)
            };
            let prev_low = prev.map(|p| p.leg_weights(&low_leg)).unwrap_or_default();
            let prev_high = prev.map(|p| p.leg_weights(&high_leg)).unwrap_or_default();
            let (d_low, miss_low) = leg_drag(&prev_low, &low, drift, cp, t);
            let (d_high, miss_high) = leg_drag(&prev_high, &high, drift, cp, t);
            warnings.missing_cost_cells += miss_low + miss_high;
            drag = scale_low * d_low + scale_high * d_high;
        }

        factor.mask[h] = true;
        factor.gross[h] = gross;
        factor.net[h] = gross - drag;
        factor.cost_drag[h] = drag;
        factor.leg_low_return[h] = r_low;
        factor.leg_high_return[h] = r_high;
        factor.beta_low[h] = b_low;
        factor.beta_high[h] = b_high;
        factor.leverage[h] = b_high / b_low;
        factor.turnover_low[h] = turn_low;
        factor.turnover_high[h] = turn_high;
    }

    let n_valid = factor.n_valid();
    if n_valid < cfg.min_valid_months {
        return Err(Error::InsufficientData {
            required: cfg.min_valid_months,
            actual: n_valid,
        });
    }

    let denom = valid_assignment_months.max(1) as f64;
    Ok(BacktestOutput {
        factor,
        bucket_returns,
        bucket_mask,
        bucket_counts: bucket_count_sum.iter().map(|s| s / denom).collect(),
        bucket_turnover: bucket_turnover_sum
            .iter()
            .zip(&bucket_turnover_n)
            .map(|(s, &n)| if n > 0 { s / n as f64 } else { f64::NAN })
            .collect(),
        bucket_half_spread: bucket_spread_sum
            .iter()
            .zip(&bucket_spread_n)
            .map(|(s, &n)| if n > 0 { s / n as f64 } else { f64::NAN })
            .collect(),
        assignments,
        warnings,
    })
}

fn passes_price_floor(ds: &AlignedDataset, month: usize, asset: usize, floor: f64) -> bool {
    let end = ds.calendar.days_through_month(month);
    for d in (0..end).rev().take(25) {
        if ds.daily.mask[(d, asset)] {
            return ds.daily.close[(d, asset)] >= floor;
        }
    }
    false
}

/// Weight-change cost of one leg: sum over traded names of |weight change|
/// times the half-spread known at the signal month. Returns the drag and the
/// number of cells that fell back to the cross-sectional median.
fn leg_drag(
    prev: &[(usize, f64)],
    next: &[(usize, f64)],
    drift: impl Fn(usize) -> Option<f64>,
    costs: &CostPanel,
    t: usize,
) -> (f64, usize) {
    use std::collections::BTreeMap;
    let mut drifted: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total = 0.0;
    for &(i, w) in prev {
        let g = w * (1.0 + drift(i).unwrap_or(0.0));
        drifted.insert(i, g);
        total += g;
    }
    if total > 0.0 {
        for v in drifted.values_mut() {
            *v /= total;
        }
    }
    let median = costs.month_median(t);
    let mut missing = 0usize;
    let mut drag = 0.0;
    let mut spread_of = |i: usize| -> f64 {
        if costs.mask[(t, i)] {
            costs.half_spread[(t, i)]
        } else {
            missing += 1;
            median.unwrap_or(0.0)
        }
    };
    let mut seen = drifted.clone();
    for &(i, w) in next {
        let old = seen.remove(&i).unwrap_or(0.0);
        drag += (w - old).abs() * spread_of(i);
    }
    for (i, old) in seen {
        drag += old * spread_of(i);
    }
    (drag, missing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn d0() -> NaiveDate {
        NaiveDate::from_ymd_opt(2000, 1, 31).unwrap()
    }

    #[test]
    fn tercile_splits_three_assets() {
        let betas = vec![(0, 0.5), (1, 1.0), (2, 1.5)];
        let a = tercile_sort(d0(), &betas, 3).unwrap();
        assert_eq!(a.members, vec![(0, 1), (1, 2), (2, 3)]);
        assert!(!a.degenerate);
        assert_eq!(a.leg_weights(&[1]), vec![(0, 1.0)]);
    }

    #[test]
    fn tercile_splits_evenly_and_weights_match() {
        let betas: Vec<(usize, f64)> = (0..300).map(|i| (i, i as f64 * 0.01)).collect();
        let a = tercile_sort(d0(), &betas, 30).unwrap();
        for b in 1..=3u8 {
            let leg = a.leg_weights(&[b]);
            assert_eq!(leg.len(), 100);
            let total: f64 = leg.iter().map(|(_, w)| w).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
        // Monotone: mean beta increases across buckets.
        let mean = |b: u8| -> f64 {
            let ids = a.bucket_members(b);
            ids.iter().map(|&i| betas[i].1).sum::<f64>() / ids.len() as f64
        };
        assert!(mean(1) < mean(2) && mean(2) < mean(3));
    }

    #[test]
    fn tercile_tie_break_is_deterministic_and_flagged() {
        let betas: Vec<(usize, f64)> = (0..90).map(|i| (i, 1.0)).collect();
        let a = tercile_sort(d0(), &betas, 30).unwrap();
        assert!(a.degenerate);
        // Tie rule: ascending asset index fills buckets in order.
        assert!(a.bucket_members(1).iter().all(|&i| i < 30));
        assert!(a.bucket_members(3).iter().all(|&i| i >= 60));
    }

    #[test]
    fn tercile_requires_breadth() {
        let betas = vec![(0, 0.5), (1, 1.0)];
        assert!(matches!(
            tercile_sort(d0(), &betas, 30),
            Err(Error::InsufficientBreadth { .. })
        ));
    }

    #[test]
    fn double_sort_diagonal_when_rank_correlated() {
        let betas: Vec<(usize, f64)> = (0..120).map(|i| (i, i as f64)).collect();
        let bad: Vec<(usize, f64)> = (0..120).map(|i| (i, 10.0 + 2.0 * i as f64)).collect();
        let a = double_sort_3x3(d0(), &betas, &bad, 90, false).unwrap();
        for (_, b) in &a.members {
            assert!([1u8, 5, 9].contains(b), "off-diagonal bucket {b}");
        }
    }

    #[test]
    fn double_sort_cells_balanced_for_independent_signals() {
        let mut rng = crate::rng::stream_rng(44, "double-sort");
        let n = 9000;
        let betas: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.random::<f64>())).collect();
        let bad: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.random::<f64>())).collect();
        let a = double_sort_3x3(d0(), &betas, &bad, 90, false).unwrap();
        let mut counts = [0usize; 9];
        for (_, b) in &a.members {
            counts[(b - 1) as usize] += 1;
        }
        for (cell, &c) in counts.iter().enumerate() {
            assert!(
                (c as i64 - 1000).abs() <= 100,
                "cell {} holds {c} of 9000",
                cell + 1
            );
        }
    }

    #[test]
    fn double_sort_insufficient_breadth() {
        let betas = vec![(0, 0.5), (1, 1.0)];
        let bad = vec![(0, 0.2), (1, 0.9)];
        assert!(matches!(
            double_sort_3x3(d0(), &betas, &bad, 90, false),
            Err(Error::InsufficientBreadth { .. })
        ));
    }

    #[test]
    fn leg_aggregate_singleton_and_mean() {
        let leg = vec![(7usize, 1.0)];
        let (r, b) = leg_aggregate(&leg, |_| Some(0.04), |_| 1.3, d0(), "low").unwrap();
        assert_eq!(r, 0.04);
        assert_eq!(b, 1.3);

        let leg = vec![(0usize, 0.5), (1usize, 0.5)];
        let rets = [0.02, 0.04];
        let (r, _) = leg_aggregate(&leg, |i| Some(rets[i]), |_| 1.0, d0(), "low").unwrap();
        assert_abs_diff_eq!(r, 0.03, epsilon = 1e-15);
    }

    #[test]
    fn leg_aggregate_matches_bruteforce_loop() {
        let mut rng = crate::rng::stream_rng(9, "leg");
        let n = 57;
        let leg: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0 / n as f64)).collect();
        let rets: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 0.1 - 0.05).collect();
        let betas: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0).collect();
        let (r, b) =
            leg_aggregate(&leg, |i| Some(rets[i]), |i| betas[i], d0(), "low").unwrap();
        let mut rs = 0.0;
        let mut bs = 0.0;
        for i in 0..n {
            rs += rets[i];
            bs += betas[i];
        }
        assert_abs_diff_eq!(r, rs / n as f64, epsilon = 1e-14);
        assert_abs_diff_eq!(b, bs / n as f64, epsilon = 1e-14);
    }

    #[test]
    fn empty_leg_is_an_error() {
        assert!(matches!(
            leg_aggregate(&[], |_| Some(0.01), |_| 1.0, d0(), "low"),
            Err(Error::EmptyLeg { .. })
        ));
        // Members exist but none has a realized return.
        let leg = vec![(0usize, 1.0)];
        assert!(matches!(
            leg_aggregate(&leg, |_| None, |_| 1.0, d0(), "low"),
            Err(Error::EmptyLeg { .. })
        ));
    }

    #[test]
    fn conditional_sort_fills_all_cells_under_correlation() {
        // Perfectly rank-correlated signals: the independent sort stays on
        // the diagonal, the conditional sort spreads inner terciles within
        // each beta tercile and fills all nine cells.
        let betas: Vec<(usize, f64)> = (0..180).map(|i| (i, i as f64)).collect();
        let bad: Vec<(usize, f64)> = (0..180).map(|i| (i, 5.0 + 3.0 * i as f64)).collect();
        let independent = double_sort_3x3(d0(), &betas, &bad, 90, false).unwrap();
        let conditional = double_sort_3x3(d0(), &betas, &bad, 90, true).unwrap();
        let cells = |a: &SortAssignment| -> std::collections::BTreeSet<u8> {
            a.members.iter().map(|(_, b)| *b).collect()
        };
        assert_eq!(cells(&independent).len(), 3);
        assert_eq!(cells(&conditional).len(), 9);
        // Each conditional cell holds a ninth of the universe.
        for b in 1..=9u8 {
            assert_eq!(conditional.bucket_members(b).len(), 20);
        }
    }

    #[test]
    fn row_union_legs_cover_the_beta_rows() {
        let betas: Vec<(usize, f64)> = (0..180).map(|i| (i, (i % 90) as f64)).collect();
        let bad: Vec<(usize, f64)> = (0..180).map(|i| (i, ((i * 7) % 180) as f64)).collect();
        let a = double_sort_3x3(d0(), &betas, &bad, 90, false).unwrap();
        let low_union = a.leg_weights(&[1, 2, 3]);
        let high_union = a.leg_weights(&[7, 8, 9]);
        assert_eq!(low_union.len(), 60);
        assert_eq!(high_union.len(), 60);
        let w: f64 = low_union.iter().map(|(_, w)| w).sum();
        assert_abs_diff_eq!(w, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn leg_drag_worked_example() {
        // Two assets, half replaced: turnover 0.5, so total traded weight is
        // 1.0; at a uniform half-spread of 0.002 and unit leverage the leg
        // drag is 0.002 (buys plus sells).
        let dates = vec![d0()];
        let assets: Vec<String> = (0..3).map(|i| format!("A{i}")).collect();
        let costs = CostPanel {
            dates,
            assets,
            half_spread: ndarray::Array2::from_elem((1, 3), 0.002),
            mask: ndarray::Array2::from_elem((1, 3), true),
            components: [(); 4].map(|_| ndarray::Array2::from_elem((1, 3), 0.004)),
        };
        let prev = vec![(0usize, 0.5), (1usize, 0.5)];
        let next = vec![(0usize, 0.5), (2usize, 0.5)];
        let turn = leg_turnover(&prev, &next, |_| Some(0.0));
        assert_abs_diff_eq!(turn, 0.5, epsilon = 1e-15);
        let (drag, missing) = leg_drag(&prev, &next, |_| Some(0.0), &costs, 0);
        assert_eq!(missing, 0);
        assert_abs_diff_eq!(drag, 2.0 * 0.5 * 0.002, epsilon = 1e-15);
        // No trades, no drag.
        let (idle, _) = leg_drag(&prev, &prev, |_| Some(0.0), &costs, 0);
        assert_eq!(idle, 0.0);
    }

    #[test]
    fn leg_drag_falls_back_to_month_median() {
        let dates = vec![d0()];
        let assets: Vec<String> = (0..3).map(|i| format!("A{i}")).collect();
        let mut mask = ndarray::Array2::from_elem((1, 3), true);
        mask[(0, 2)] = false; // missing cost cell for the incoming asset
        let mut spreads = ndarray::Array2::from_elem((1, 3), 0.002);
        spreads[(0, 2)] = f64::NAN;
        let costs = CostPanel {
            dates,
            assets,
            half_spread: spreads,
            mask,
            components: [(); 4].map(|_| ndarray::Array2::from_elem((1, 3), 0.004)),
        };
        let prev = vec![(0usize, 1.0)];
        let next = vec![(2usize, 1.0)];
        let (drag, missing) = leg_drag(&prev, &next, |_| Some(0.0), &costs, 0);
        assert_eq!(missing, 1);
        // Median of the two available cells is 0.002; full liquidation plus
        // full build trades weight 2.0.
        assert_abs_diff_eq!(drag, 2.0 * 0.002, epsilon = 1e-15);
    }

    #[test]
    fn factor_return_worked_example() {
        let r = factor_return(0.5, 2.0, 0.01, 0.02, 0.0, d0()).unwrap();
        assert_abs_diff_eq!(r, 0.01, epsilon = 1e-15);
        // Zero excess returns give a zero factor return.
        let r = factor_return(0.5, 2.0, 0.004, 0.004, 0.004, d0()).unwrap();
        assert_eq!(r, 0.0);
        // Ex-ante neutrality: scaled leg betas cancel identically (the
        // hedge divides each leg's beta by itself).
        let (bl, bh) = (0.73, 1.91);
        assert_eq!(bl / bl - bh / bh, 0.0);
    }

    #[test]
    fn factor_return_rejects_nonpositive_beta() {
        assert!(matches!(
            factor_return(0.0, 2.0, 0.01, 0.02, 0.0, d0()),
            Err(Error::LeverageUndefined { .. })
        ));
        assert!(matches!(
            factor_return(0.5, -0.3, 0.01, 0.02, 0.0, d0()),
            Err(Error::LeverageUndefined { .. })
        ));
    }

    #[test]
    fn turnover_identity_and_replacement() {
        let prev = vec![(0usize, 0.5), (1usize, 0.5)];
        // Identical membership, zero drift: no trades.
        assert_eq!(leg_turnover(&prev, &prev, |_| Some(0.0)), 0.0);
        // Complete replacement: full liquidation plus full build = 1.
        let next = vec![(2usize, 0.5), (3usize, 0.5)];
        assert_abs_diff_eq!(leg_turnover(&prev, &next, |_| Some(0.0)), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn turnover_matches_bruteforce_churn() {
        let mut rng = crate::rng::stream_rng(77, "churn");
        let n = 100usize;
        let prev: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0 / n as f64)).collect();
        let mut avg = 0.0;
        let trials = 200;
        for trial in 0..trials {
            // Replace 20% of the membership (distinct random positions) with
            // fresh ids, zero drift.
            let mut ids: Vec<usize> = (0..n).collect();
            let positions = rand::seq::index::sample(&mut rng, n, n / 5);
            for (k, pos) in positions.iter().enumerate() {
                ids[pos] = n * (1 + trial as usize) + k;
            }
            let next: Vec<(usize, f64)> = ids.iter().map(|&i| (i, 1.0 / n as f64)).collect();
            let got = leg_turnover(&prev, &next, |_| Some(0.0));
            // Brute force: direct weight differencing over the union.
            let mut union: std::collections::BTreeMap<usize, (f64, f64)> = Default::default();
            for &(i, w) in &prev {
                union.entry(i).or_insert((0.0, 0.0)).0 = w;
            }
            for &(i, w) in &next {
                union.entry(i).or_insert((0.0, 0.0)).1 = w;
            }
            let brute: f64 = union.values().map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            assert_abs_diff_eq!(got, brute, epsilon = 1e-12);
            avg += got;
        }
        avg /= trials as f64;
        assert!((avg - 0.2).abs() < 0.01, "mean churn turnover {avg}");
    }

    #[test]
    fn turnover_stays_in_unit_interval_under_drift() {
        let mut rng = crate::rng::stream_rng(5, "drift");
        for _ in 0..200 {
            let nit = 3 + rng.random_range(0..20);
            let prev: Vec<(usize, f64)> = (0..nit).map(|i| (i, 1.0 / nit as f64)).collect();
            let keep = rng.random_range(0..nit);
            let next: Vec<(usize, f64)> =
                (keep..keep + nit).map(|i| (i, 1.0 / nit as f64)).collect();
            let t = leg_turnover(&prev, &next, |i| Some(0.2 * ((i % 5) as f64 - 2.0) / 10.0));
            assert!((0.0..=1.0 + 1e-12).contains(&t), "turnover {t}");
        }
    }
}
