//! Python bindings exposing the engine's main operations: VAR news
//! decomposition, beta estimators, portfolio sorts, the beta-neutral factor
//! return, low-frequency spread estimators, factor regressions, performance
//! statistics and the full pipeline runner.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use badbeta_core::analytics;
use badbeta_core::beta::estimators;
use badbeta_core::config::RunConfig;
use badbeta_core::error::Error;
use badbeta_core::panel::StateSeries;
use badbeta_core::pipeline::Pipeline;
use badbeta_core::portfolio;
use badbeta_core::tcost;
use badbeta_core::var_news;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn month_dates(n: usize) -> Vec<NaiveDate> {
    (0..n)
        .map(|i| NaiveDate::from_ymd_opt(1900 + (i / 12) as i32, (i % 12) as u32 + 1, 28).unwrap())
        .collect()
}

fn state_series(states: Vec<Vec<f64>>) -> PyResult<StateSeries> {
    let n = states.len();
    if states.iter().any(|row| row.len() != 4) {
        return Err(PyValueError::new_err("each state row must have 4 entries"));
    }
    let flat: Vec<f64> = states.into_iter().flatten().collect();
    Ok(StateSeries {
        dates: month_dates(n),
        values: ndarray::Array2::from_shape_vec((n, 4), flat)
            .map_err(|e| PyValueError::new_err(e.to_string()))?,
    })
}

/// Fit the four-variable VAR(1) by OLS; returns (mu, gamma, dr_weights).
#[pyfunction]
#[pyo3(signature = (states, rho = 0.95, min_obs = 60))]
fn estimate_var(
    states: Vec<Vec<f64>>,
    rho: f64,
    min_obs: usize,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let s = state_series(states)?;
    let end = *s.dates.last().ok_or_else(|| PyValueError::new_err("empty states"))?;
    let model = var_news::estimate_var(&s, end, rho, min_obs).map_err(err)?;
    let gamma = (0..4)
        .map(|r| (0..4).map(|c| model.gamma[(r, c)]).collect())
        .collect();
    Ok((
        model.mu.iter().copied().collect(),
        gamma,
        model.dr_weights.iter().copied().collect(),
    ))
}

/// Full-sample news decomposition; returns (n_cf, n_dr, unexpected_market).
#[pyfunction]
#[pyo3(signature = (states, rho = 0.95, min_obs = 60))]
fn news_from_var(
    states: Vec<Vec<f64>>,
    rho: f64,
    min_obs: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let s = state_series(states)?;
    let end = *s.dates.last().ok_or_else(|| PyValueError::new_err("empty states"))?;
    let model = var_news::estimate_var(&s, end, rho, min_obs).map_err(err)?;
    let news = var_news::news_decompose(&model);
    Ok((news.cash_flow, news.discount_rate, news.unexpected_market))
}

/// One-year style OLS beta (slope of stock on market).
#[pyfunction]
fn beta_ols(stock: Vec<f64>, market: Vec<f64>) -> PyResult<f64> {
    let valid = vec![true; stock.len()];
    estimators::beta_ols(&stock, &market, &valid).map_err(err)
}

/// OLS beta on three-day overlapping returns.
#[pyfunction]
fn beta_ols3d(stock: Vec<f64>, market: Vec<f64>) -> PyResult<f64> {
    let valid = vec![true; stock.len()];
    estimators::beta_ols3d(&stock, &market, &valid).map_err(err)
}

/// Lag-corrected beta with optional shrinkage.
#[pyfunction]
#[pyo3(signature = (stock, market, lags = 1, shrink_weight = 1.0, shrink_target = 1.0))]
fn beta_dimson(
    stock: Vec<f64>,
    market: Vec<f64>,
    lags: usize,
    shrink_weight: f64,
    shrink_target: f64,
) -> PyResult<f64> {
    let valid = vec![true; stock.len()];
    estimators::beta_dimson(&stock, &market, &valid, lags, shrink_weight, shrink_target)
        .map_err(err)
}

/// Winsorized-return beta.
#[pyfunction]
#[pyo3(signature = (stock, market, delta = 3.0))]
fn beta_welch(stock: Vec<f64>, market: Vec<f64>, delta: f64) -> PyResult<f64> {
    let valid = vec![true; stock.len()];
    estimators::beta_welch(&stock, &market, &valid, delta).map_err(err)
}

/// Frazzini-Pedersen beta over the full slice with a trailing one-year
/// sub-window of `one_year` observations.
#[pyfunction]
#[pyo3(signature = (stock, market, one_year = 252, overlap = 3))]
fn beta_fp(stock: Vec<f64>, market: Vec<f64>, one_year: usize, overlap: usize) -> PyResult<f64> {
    let valid = vec![true; stock.len()];
    estimators::beta_fp(&stock, &market, &valid, one_year, overlap).map_err(err)
}

/// Vasicek cross-sectional shrinkage toward the mean.
#[pyfunction]
#[pyo3(signature = (raw, se, min_assets = 30))]
fn vasicek_shrink(raw: Vec<f64>, se: Vec<f64>, min_assets: usize) -> PyResult<Vec<f64>> {
    estimators::vasicek_shrink(&raw, &se, min_assets).map_err(err)
}

/// Tercile labels (1..3) per asset, ties broken by index order.
#[pyfunction]
#[pyo3(signature = (betas, min_assets = 3))]
fn tercile_sort(betas: Vec<f64>, min_assets: usize) -> PyResult<Vec<u32>> {
    let cross: Vec<(usize, f64)> = betas.iter().copied().enumerate().collect();
    let date = NaiveDate::from_ymd_opt(2000, 1, 31).unwrap();
    let assignment = portfolio::tercile_sort(date, &cross, min_assets).map_err(err)?;
    let mut out = vec![0u32; betas.len()];
    for (i, b) in assignment.members {
        out[i] = b as u32;
    }
    Ok(out)
}

/// Independent 3x3 double-sort labels (1..9; 1 = low/low, 9 = high/high).
#[pyfunction]
#[pyo3(signature = (betas, bad_betas, min_assets = 9, conditional = false))]
fn double_sort_3x3(
    betas: Vec<f64>,
    bad_betas: Vec<f64>,
    min_assets: usize,
    conditional: bool,
) -> PyResult<Vec<u32>> {
    let b: Vec<(usize, f64)> = betas.iter().copied().enumerate().collect();
    let bb: Vec<(usize, f64)> = bad_betas.iter().copied().enumerate().collect();
    let date = NaiveDate::from_ymd_opt(2000, 1, 31).unwrap();
    let assignment =
        portfolio::double_sort_3x3(date, &b, &bb, min_assets, conditional).map_err(err)?;
    let mut out = vec![0u32; betas.len()];
    for (i, bucket) in assignment.members {
        out[i] = bucket as u32;
    }
    Ok(out)
}

/// Beta-neutral long-short return: (r_low - rf)/beta_low - (r_high - rf)/beta_high.
#[pyfunction]
fn factor_return(beta_low: f64, beta_high: f64, r_low: f64, r_high: f64, rf: f64) -> PyResult<f64> {
    let date = NaiveDate::from_ymd_opt(2000, 1, 31).unwrap();
    portfolio::factor_return(beta_low, beta_high, r_low, r_high, rf, date).map_err(err)
}

/// Corwin-Schultz high-low estimate (full spread).
#[pyfunction]
fn corwin_schultz(high: Vec<f64>, low: Vec<f64>) -> PyResult<f64> {
    let valid = vec![true; high.len()];
    tcost::corwin_schultz_spread(&high, &low, &valid, 1).map_err(err)
}

/// Abdi-Ranaldo close-high-low estimate (full spread).
#[pyfunction]
fn abdi_ranaldo(close: Vec<f64>, high: Vec<f64>, low: Vec<f64>) -> PyResult<f64> {
    let valid = vec![true; close.len()];
    tcost::abdi_ranaldo_spread(&close, &high, &low, &valid, 1).map_err(err)
}

/// Gibbs sampler Roll-model estimate; returns (half_spread, posterior_sd,
/// converged). Deterministic for a given seed.
#[pyfunction]
#[pyo3(signature = (closes, sweeps = 1000, burn = 200, seed = 0))]
fn gibbs_spread(closes: Vec<f64>, sweeps: usize, burn: usize, seed: u64) -> PyResult<(f64, f64, bool)> {
    let cfg = tcost::GibbsConfig {
        sweeps,
        burn,
        ..Default::default()
    };
    let est = tcost::gibbs_spread(&closes, &cfg, seed).map_err(err)?;
    Ok((est.half_spread, est.posterior_sd, est.converged))
}

/// Volume-over-volatility estimate (full spread).
#[pyfunction]
#[pyo3(signature = (volume, close, returns, scale = 8.0e3, min_days = 1))]
fn vov_spread(
    volume: Vec<f64>,
    close: Vec<f64>,
    returns: Vec<f64>,
    scale: f64,
    min_days: usize,
) -> PyResult<f64> {
    let valid_ret = vec![true; returns.len()];
    let valid_px = vec![true; close.len()];
    tcost::vov_spread(&volume, &close, &returns, &valid_ret, &valid_px, scale, min_days)
        .map_err(err)
}

/// Intercept-included OLS with robust t-statistics; returns a dict with
/// names, coefficients, t_stats, r_squared and n_obs.
#[pyfunction]
#[pyo3(signature = (y, columns, names = None))]
fn ols_regress(
    py: Python<'_>,
    y: Vec<f64>,
    columns: Vec<Vec<f64>>,
    names: Option<Vec<String>>,
) -> PyResult<Py<PyDict>> {
    let names = names.unwrap_or_else(|| (0..columns.len()).map(|i| format!("x{i}")).collect());
    if names.len() != columns.len() {
        return Err(PyValueError::new_err("names and columns length mismatch"));
    }
    let cols: Vec<(&str, &[f64])> = names
        .iter()
        .map(|n| n.as_str())
        .zip(columns.iter().map(|c| c.as_slice()))
        .collect();
    let res = analytics::ols_regress(&y, &cols, analytics::SeType::White, "ols").map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("names", res.names)?;
    d.set_item("coefficients", res.coefficients)?;
    d.set_item("t_stats", res.t_stats)?;
    d.set_item("r_squared", res.r_squared)?;
    d.set_item("n_obs", res.n_obs)?;
    Ok(d.into())
}

/// Annualized performance summary of a monthly return series.
#[pyfunction]
fn perf_stats(py: Python<'_>, returns: Vec<f64>) -> PyResult<Py<PyDict>> {
    let s = analytics::perf_stats(&returns).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mean_ann", s.mean_ann)?;
    d.set_item("vol_ann", s.vol_ann)?;
    d.set_item("sharpe_ann", s.sharpe_ann)?;
    d.set_item("max_drawdown", s.max_drawdown)?;
    d.set_item("n_months", s.n_months)?;
    Ok(d.into())
}

/// Running product of (1 + r).
#[pyfunction]
fn cumulative_curve(returns: Vec<f64>) -> Vec<f64> {
    analytics::cumulative_curve(&returns)
}

/// Execute the full pipeline for a configuration file; returns the path of
/// the written report.json.
#[pyfunction]
#[pyo3(signature = (config_path, out_dir = None, seed = None))]
fn run_pipeline(config_path: PathBuf, out_dir: Option<PathBuf>, seed: Option<u64>) -> PyResult<String> {
    let mut cfg = RunConfig::from_file(&config_path).map_err(err)?;
    cfg.apply_overrides(seed, out_dir, None, None).map_err(err)?;
    let pipeline = Pipeline::new(cfg).map_err(err)?;
    pipeline.run().map_err(err)?;
    Ok(pipeline
        .out_dir()
        .join("report.json")
        .display()
        .to_string())
}

/// Write the configured synthetic dataset as input CSVs; returns the paths.
#[pyfunction]
#[pyo3(signature = (config_path, out_dir = None))]
fn generate_dataset(config_path: PathBuf, out_dir: Option<PathBuf>) -> PyResult<Vec<String>> {
    let cfg = RunConfig::from_file(&config_path).map_err(err)?;
    let dir = out_dir.unwrap_or_else(|| cfg.out_dir.join("dataset"));
    let pipeline = Pipeline::new(cfg).map_err(err)?;
    let files = pipeline.write_dataset(Path::new(&dir)).map_err(err)?;
    Ok(files.iter().map(|p| p.display().to_string()).collect())
}

#[pymodule]
fn badbeta(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(estimate_var, m)?)?;
    m.add_function(wrap_pyfunction!(news_from_var, m)?)?;
    m.add_function(wrap_pyfunction!(beta_ols, m)?)?;
    m.add_function(wrap_pyfunction!(beta_ols3d, m)?)?;
    m.add_function(wrap_pyfunction!(beta_dimson, m)?)?;
    m.add_function(wrap_pyfunction!(beta_welch, m)?)?;
    m.add_function(wrap_pyfunction!(beta_fp, m)?)?;
    m.add_function(wrap_pyfunction!(vasicek_shrink, m)?)?;
    m.add_function(wrap_pyfunction!(tercile_sort, m)?)?;
    m.add_function(wrap_pyfunction!(double_sort_3x3, m)?)?;
    m.add_function(wrap_pyfunction!(factor_return, m)?)?;
    m.add_function(wrap_pyfunction!(corwin_schultz, m)?)?;
    m.add_function(wrap_pyfunction!(abdi_ranaldo, m)?)?;
    m.add_function(wrap_pyfunction!(gibbs_spread, m)?)?;
    m.add_function(wrap_pyfunction!(vov_spread, m)?)?;
    m.add_function(wrap_pyfunction!(ols_regress, m)?)?;
    m.add_function(wrap_pyfunction!(perf_stats, m)?)?;
    m.add_function(wrap_pyfunction!(cumulative_curve, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    Ok(())
}
