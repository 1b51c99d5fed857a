//! Factor regressions and performance statistics.
//!
//! The regression ladder mirrors the usual benchmark sequence: CAPM, the
//! three-factor model, the four-factor (momentum) model, the five-factor
//! model, and all six factors. Intercepts are reported in percent per month
//! by the table exports. Standard errors default to heteroskedasticity
//! robust (White); plain and Newey-West are available.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{AuxSeries, FACTOR_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeType {
    Plain,
    White,
    NeweyWest { lags: usize },
}

impl Default for SeType {
    fn default() -> Self {
        SeType::White
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelId {
    Capm,
    Ff3,
    Carhart4,
    Ff5,
    Ff6,
}

impl ModelId {
    pub const ALL: [ModelId; 5] = [
        ModelId::Capm,
        ModelId::Ff3,
        ModelId::Carhart4,
        ModelId::Ff5,
        ModelId::Ff6,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelId::Capm => "capm",
            ModelId::Ff3 => "ff3",
            ModelId::Carhart4 => "carhart4",
            ModelId::Ff5 => "ff5",
            ModelId::Ff6 => "ff6",
        }
    }

    /// Factor columns the model regresses on, in order.
    pub fn factors(&self) -> &'static [&'static str] {
        match self {
            ModelId::Capm => &["mkt"],
            ModelId::Ff3 => &["mkt", "smb", "hml"],
            ModelId::Carhart4 => &["mkt", "smb", "hml", "umd"],
            ModelId::Ff5 => &["mkt", "smb", "hml", "rmw", "cma"],
            ModelId::Ff6 => &["mkt", "smb", "hml", "rmw", "cma", "umd"],
        }
    }
}

/// One fitted regression. `coefficients[0]` is the intercept; slope order
/// follows `names`.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionResult {
    pub model: &'static str,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub r_squared: f64,
    pub n_obs: usize,
}

impl RegressionResult {
    /// Intercept in percent per month (monthly decimal returns assumed).
    pub fn alpha_pct(&self) -> f64 {
        self.coefficients[0] * 100.0
    }
}

/// Intercept-included OLS of `y` on named columns.
pub fn ols_regress(
    y: &[f64],
    columns: &[(&str, &[f64])],
    se_type: SeType,
    model: &'static str,
) -> Result<RegressionResult> {
    let n = y.len();
    if n < 24 {
        return Err(Error::InsufficientData {
            required: 24,
            actual: n,
        });
    }
    for (name, col) in columns {
        if col.len() != n {
            return Err(Error::Numeric(format!(
                "column {name} has {} rows, y has {n}",
                col.len()
            )));
        }
    }
    let k = columns.len() + 1;
    let mut x = DMatrix::zeros(n, k);
    for r in 0..n {
        x[(r, 0)] = 1.0;
        for (j, (_, col)) in columns.iter().enumerate() {
            x[(r, 1 + j)] = col[r];
        }
    }
    let yv = DVector::from_column_slice(y);

    // Rank check by sequential orthogonalization: a column whose residual
    // against the earlier columns vanishes is named as collinear.
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut offenders: Vec<String> = Vec::new();
    for j in 0..k {
        let mut v = x.column(j).into_owned();
        let norm0 = v.norm();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        if v.norm() <= norm0.max(f64::MIN_POSITIVE) * 1e-10 {
            offenders.push(if j == 0 {
                "intercept".to_string()
            } else {
                columns[j - 1].0.to_string()
            });
        } else {
            let n2 = v.norm();
            basis.push(v / n2);
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Collinear { columns: offenders });
    }

    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &yv;
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Collinear {
            columns: vec!["(numerically singular design)".into()],
        })?;
    let beta = chol.solve(&xty);
    let fitted = &x * &beta;
    let resid = &yv - &fitted;

    let ssr: f64 = resid.iter().map(|e| e * e).sum();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let xtx_inv = chol.inverse();
    let cov = match se_type {
        SeType::Plain => {
            let sigma2 = ssr / (n - k) as f64;
            &xtx_inv * sigma2
        }
        SeType::White => {
            let mut meat: DMatrix<f64> = DMatrix::zeros(k, k);
            for t in 0..n {
                let e2 = resid[t] * resid[t];
                for a in 0..k {
                    for b in 0..k {
                        meat[(a, b)] += e2 * x[(t, a)] * x[(t, b)];
                    }
                }
            }
            let adj = n as f64 / (n - k) as f64;
            &xtx_inv * meat * &xtx_inv * adj
        }
        SeType::NeweyWest { lags } => {
            let mut meat: DMatrix<f64> = DMatrix::zeros(k, k);
            for t in 0..n {
                let e2 = resid[t] * resid[t];
                for a in 0..k {
                    for b in 0..k {
                        meat[(a, b)] += e2 * x[(t, a)] * x[(t, b)];
                    }
                }
            }
            for l in 1..=lags.min(n - 1) {
                let w = 1.0 - l as f64 / (lags + 1) as f64;
                for t in l..n {
                    let ee = resid[t] * resid[t - l];
                    for a in 0..k {
                        for b in 0..k {
                            let s = x[(t, a)] * x[(t - l, b)] + x[(t - l, a)] * x[(t, b)];
                            meat[(a, b)] += w * ee * s;
                        }
                    }
                }
            }
            let adj = n as f64 / (n - k) as f64;
            &xtx_inv * meat * &xtx_inv * adj
        }
    };

    let mut t_stats = Vec::with_capacity(k);
    for i in 0..k {
        let se = cov[(i, i)].max(0.0).sqrt();
        t_stats.push(if se > 0.0 { beta[i] / se } else { f64::INFINITY });
    }

    let mut names = vec!["alpha".to_string()];
    names.extend(columns.iter().map(|(n, _)| n.to_string()));
    Ok(RegressionResult {
        model,
        names,
        coefficients: beta.iter().copied().collect(),
        t_stats,
        r_squared,
        n_obs: n,
    })
}

/// Regress a dated monthly series on each benchmark model, matching rows by
/// date against the aux calendar. Validates that R-squared is monotone over
/// nested model pairs.
pub fn regression_table(
    dates: &[chrono::NaiveDate],
    returns: &[f64],
    aux: &AuxSeries,
    se_type: SeType,
) -> Result<Vec<RegressionResult>> {
    let rows: Vec<usize> = dates
        .iter()
        .map(|d| {
            aux.dates
                .binary_search(d)
                .map_err(|_| Error::Alignment(format!("factor month {d} missing from aux series")))
        })
        .collect::<Result<_>>()?;
    let y: Vec<f64> = returns.to_vec();
    let mut table = Vec::with_capacity(ModelId::ALL.len());
    for model in ModelId::ALL {
        let cols: Vec<(&str, Vec<f64>)> = model
            .factors()
            .iter()
            .map(|name| {
                let j = FACTOR_COLUMNS.iter().position(|c| c == name).unwrap();
                let col: Vec<f64> = rows.iter().map(|&r| aux.factors[(r, j)]).collect();
                (*name, col)
            })
            .collect();
        let col_refs: Vec<(&str, &[f64])> =
            cols.iter().map(|(n, c)| (*n, c.as_slice())).collect();
        table.push(ols_regress(&y, &col_refs, se_type, model.name())?);
    }
    // Nested-model R-squared monotonicity.
    let r2 = |m: ModelId| {
        table
            .iter()
            .find(|r| r.model == m.name())
            .map(|r| r.r_squared)
            .unwrap()
    };
    let tol = 1e-10;
    if r2(ModelId::Ff3) > r2(ModelId::Carhart4) + tol
        || r2(ModelId::Ff3) > r2(ModelId::Ff5) + tol
        || r2(ModelId::Ff5) > r2(ModelId::Ff6) + tol
        || r2(ModelId::Carhart4) > r2(ModelId::Ff6) + tol
        || r2(ModelId::Capm) > r2(ModelId::Ff3) + tol
    {
        return Err(Error::Numeric(
            "nested-model R-squared monotonicity violated".into(),
        ));
    }
    Ok(table)
}

/// Annualized performance summary of a monthly return series.
#[derive(Debug, Clone, Serialize)]
pub struct PerfStats {
    pub mean_ann: f64,
    pub vol_ann: f64,
    pub sharpe_ann: f64,
    pub max_drawdown: f64,
    pub n_months: usize,
}

pub fn perf_stats(returns: &[f64]) -> Result<PerfStats> {
    let n = returns.len();
    if n < 12 {
        return Err(Error::InsufficientData {
            required: 12,
            actual: n,
        });
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
    let mean_ann = 12.0 * mean;
    let vol_ann = (12.0 * var).sqrt();
    // Rounding residue from a constant series does not count as variance.
    if !(var > (mean.abs().max(f64::MIN_POSITIVE) * 1e-10).powi(2)) {
        return Err(Error::SharpeUndefined);
    }
    let curve = cumulative_curve(returns);
    let mut peak = 1.0f64;
    let mut max_dd = 0.0f64;
    for c in &curve {
        peak = peak.max(*c);
        max_dd = max_dd.max(1.0 - c / peak);
    }
    Ok(PerfStats {
        mean_ann,
        vol_ann,
        sharpe_ann: mean_ann / vol_ann,
        max_drawdown: max_dd,
        n_months: n,
    })
}

/// Running product of (1 + r), starting from the first return.
pub fn cumulative_curve(returns: &[f64]) -> Vec<f64> {
    let mut level = 1.0;
    returns
        .iter()
        .map(|r| {
            level *= 1.0 + r;
            level
        })
        .collect()
}

/// Performance stats per named series, in input order.
pub fn risk_return_table(series: &[(String, Vec<f64>)]) -> Vec<(String, Result<PerfStats>)> {
    series
        .iter()
        .map(|(name, rets)| (name.clone(), perf_stats(rets)))
        .collect()
}
