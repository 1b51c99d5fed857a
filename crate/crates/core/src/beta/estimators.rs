//! Per-asset beta estimators over fixed windows.
//!
//! Each function takes parallel stock/market return slices with a joint
//! validity mask covering one estimation window. Eligibility (window length,
//! coverage fractions) is enforced by the panel builder; here we only require
//! the minimum observations the arithmetic itself needs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A centered sum of squares at or below this is indistinguishable from a
/// constant series at double precision.
fn degenerate_floor(mean: f64, n: usize) -> f64 {
    let scale = mean.abs().max(f64::MIN_POSITIVE);
    n as f64 * (scale * 1e-10) * (scale * 1e-10)
}

/// Simple two-pass OLS of y on x with intercept: returns (slope, stderr).
pub fn ols_slope(x: &[f64], y: &[f64], valid: &[bool]) -> Result<(f64, f64)> {
    let mut n = 0usize;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for i in 0..x.len() {
        if valid[i] {
            n += 1;
            sx += x[i];
            sy += y[i];
        }
    }
    if n < 3 {
        return Err(Error::UndefinedBeta(format!("only {n} joint observations")));
    }
    let mx = sx / n as f64;
    let my = sy / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        if valid[i] {
            sxx += (x[i] - mx) * (x[i] - mx);
            sxy += (x[i] - mx) * (y[i] - my);
        }
    }
    if !(sxx > degenerate_floor(mx, n)) {
        return Err(Error::UndefinedBeta("zero market variance".into()));
    }
    let slope = sxy / sxx;
    let mut ssr = 0.0;
    for i in 0..x.len() {
        if valid[i] {
            let e = (y[i] - my) - slope * (x[i] - mx);
            ssr += e * e;
        }
    }
    let se = if n > 2 { (ssr / (n - 2) as f64 / sxx).sqrt() } else { f64::NAN };
    Ok((slope, se))
}

/// Pearson correlation over jointly valid entries.
pub fn correlation(x: &[f64], y: &[f64], valid: &[bool]) -> Result<f64> {
    let mut n = 0usize;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for i in 0..x.len() {
        if valid[i] {
            n += 1;
            sx += x[i];
            sy += y[i];
        }
    }
    if n < 3 {
        return Err(Error::UndefinedBeta(format!("only {n} joint observations")));
    }
    let mx = sx / n as f64;
    let my = sy / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        if valid[i] {
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
            sxy += (x[i] - mx) * (y[i] - my);
        }
    }
    if !(sxx > degenerate_floor(mx, n)) || !(syy > degenerate_floor(my, n)) {
        return Err(Error::UndefinedBeta("zero variance in correlation window".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Overlapping k-day summed returns. Entry t is valid when all k days
/// ending at t are jointly valid.
pub fn overlapping_sums(
    x: &[f64],
    y: &[f64],
    valid: &[bool],
    k: usize,
) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let n = x.len();
    let k = k.max(1);
    let mut xs = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut ok = vec![false; n];
    for t in k.saturating_sub(1)..n {
        if (0..k).all(|l| valid[t - l]) {
            let mut sx = 0.0;
            let mut sy = 0.0;
            for l in 0..k {
                sx += x[t - l];
                sy += y[t - l];
            }
            xs[t] = sx;
            ys[t] = sy;
            ok[t] = true;
        }
    }
    (xs, ys, ok)
}

/// Three-day overlapping summed returns.
pub fn three_day_sums(x: &[f64], y: &[f64], valid: &[bool]) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    overlapping_sums(x, y, valid, 3)
}

/// One-year OLS beta (slope of stock on market).
pub fn beta_ols(stock: &[f64], market: &[f64], valid: &[bool]) -> Result<f64> {
    ols_slope(market, stock, valid).map(|(b, _)| b)
}

/// OLS beta on three-day overlapping returns.
pub fn beta_ols3d(stock: &[f64], market: &[f64], valid: &[bool]) -> Result<f64> {
    let (xs, ys, ok) = three_day_sums(market, stock, valid);
    ols_slope(&xs, &ys, &ok).map(|(b, _)| b)
}

/// Lag-corrected beta: regress the stock on the contemporaneous market and
/// `lags` lagged market returns, sum the slopes, then shrink the sum toward
/// `shrink_target` with weight `shrink_weight` on the data.
pub fn beta_dimson(
    stock: &[f64],
    market: &[f64],
    valid: &[bool],
    lags: usize,
    shrink_weight: f64,
    shrink_target: f64,
) -> Result<f64> {
    let n = stock.len();
    let k = lags + 2; // intercept + contemporaneous + lags
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    for t in lags..n {
        if !valid[t] {
            continue;
        }
        let ok_lags = (1..=lags).all(|l| valid[t - l]);
        if !ok_lags {
            continue;
        }
        let mut row = Vec::with_capacity(k);
        row.push(1.0);
        row.push(market[t]);
        for l in 1..=lags {
            row.push(market[t - l]);
        }
        rows.push((stock[t], row));
    }
    if rows.len() < k + 1 {
        return Err(Error::UndefinedBeta(format!(
            "only {} usable observations for lag regression",
            rows.len()
        )));
    }
    let mut xtx: DMatrix<f64> = DMatrix::zeros(k, k);
    let mut xty: DVector<f64> = DVector::zeros(k);
    for (y, row) in &rows {
        for a in 0..k {
            xty[a] += row[a] * y;
            for b in 0..k {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::UndefinedBeta("collinear market regressors".into()))?;
    let l = chol.l();
    let dmax = (0..k).map(|i| l[(i, i)]).fold(0.0, f64::max);
    let dmin = (0..k).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(dmin > dmax * 1e-10) {
        return Err(Error::UndefinedBeta("collinear market regressors".into()));
    }
    let coef = chol.solve(&xty);
    let raw: f64 = (1..k).map(|i| coef[i]).sum();
    Ok(shrink_weight * raw + (1.0 - shrink_weight) * shrink_target)
}

/// Winsorized-return beta: the stock return is clamped day by day to the
/// interval bounded by (1 - delta) and (1 + delta) times the market return
/// before the OLS fit. A zero market return clamps the stock to zero.
pub fn beta_welch(stock: &[f64], market: &[f64], valid: &[bool], delta: f64) -> Result<f64> {
    // Only valid positions are transformed; masked cells may hold NaN
    // placeholders that must not reach clamp.
    let clamped: Vec<f64> = stock
        .iter()
        .zip(market)
        .zip(valid)
        .map(|((&y, &m), &ok)| {
            if !ok {
                return y;
            }
            let a = (1.0 - delta) * m;
            let b = (1.0 + delta) * m;
            y.clamp(a.min(b), a.max(b))
        })
        .collect();
    ols_slope(market, &clamped, valid).map(|(b, _)| b)
}

/// Frazzini-Pedersen beta: one-year OLS beta rescaled by the ratio of the
/// long-horizon correlation (on `overlap`-day overlapping returns, 3 by
/// convention) to the one-year correlation. The slices cover the long
/// window; `one_year` gives the length of its trailing one-year sub-window.
pub fn beta_fp(
    stock: &[f64],
    market: &[f64],
    valid: &[bool],
    one_year: usize,
    overlap: usize,
) -> Result<f64> {
    let n = stock.len();
    if one_year == 0 || one_year > n {
        return Err(Error::UndefinedBeta("one-year window exceeds data".into()));
    }
    let s1 = &stock[n - one_year..];
    let m1 = &market[n - one_year..];
    let v1 = &valid[n - one_year..];
    let beta1 = beta_ols(s1, m1, v1)?;
    let rho1 = correlation(m1, s1, v1)?;
    if rho1 == 0.0 {
        return Err(Error::UndefinedBeta("zero one-year correlation".into()));
    }
    let (xs, ys, ok) = overlapping_sums(market, stock, valid, overlap);
    let rho5 = correlation(&xs, &ys, &ok)?;
    Ok((rho5 / rho1) * beta1)
}

/// Cross-sectional shrinkage toward the mean: each raw beta is pulled toward
/// the cross-sectional average with weight sigma2_cross / (sigma2_cross +
/// se_i^2), where sigma2_cross is the dispersion of raw betas in excess of
/// average sampling variance, floored at zero.
pub fn vasicek_shrink(raw: &[f64], se: &[f64], min_assets: usize) -> Result<Vec<f64>> {
    let n = raw.len();
    if n < min_assets {
        return Err(Error::InsufficientCrossSection {
            required: min_assets,
            actual: n,
        });
    }
    let mean = raw.iter().sum::<f64>() / n as f64;
    let var_raw = raw.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (n - 1) as f64;
    let mean_se2 = se.iter().map(|s| s * s).sum::<f64>() / n as f64;
    let sigma2_cross = (var_raw - mean_se2).max(0.0);
    Ok(raw
        .iter()
        .zip(se)
        .map(|(&b, &s)| {
            let denom = sigma2_cross + s * s;
            let w = if denom > 0.0 { sigma2_cross / denom } else { 0.0 };
            w * b + (1.0 - w) * mean
        })
        .collect())
}

/// Covariance-ratio beta against a news series: cov(stock, news) over
/// var(unexpected market), with all moments taken over the same jointly
/// valid months.
pub fn beta_news(
    stock_log: &[f64],
    news: &[f64],
    unexpected: &[f64],
    valid: &[bool],
    min_months: usize,
) -> Result<f64> {
    let mut n = 0usize;
    let (mut sr, mut sn, mut su) = (0.0, 0.0, 0.0);
    for i in 0..stock_log.len() {
        if valid[i] {
            n += 1;
            sr += stock_log[i];
            sn += news[i];
            su += unexpected[i];
        }
    }
    if n < min_months {
        return Err(Error::UndefinedBeta(format!(
            "only {n} of {min_months} required months populated"
        )));
    }
    let (mr, mn, mu) = (sr / n as f64, sn / n as f64, su / n as f64);
    let mut cov = 0.0;
    let mut var_u = 0.0;
    for i in 0..stock_log.len() {
        if valid[i] {
            cov += (stock_log[i] - mr) * (news[i] - mn);
            var_u += (unexpected[i] - mu) * (unexpected[i] - mu);
        }
    }
    if var_u <= 0.0 {
        return Err(Error::UndefinedBeta("zero unexpected-market variance".into()));
    }
    Ok(cov / var_u)
}
