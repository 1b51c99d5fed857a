//! First-order VAR estimation and the news decomposition of unexpected
//! market returns.
//!
//! The state vector `x_t` has the log excess market return first. Each
//! equation of `x_{t+1} = mu + G x_t + u_{t+1}` is fit by OLS with intercept.
//! Discount-rate news is `w . u_{t+1}` where the weight vector solves
//! `w (I - rho G) = e1' rho G`; cash-flow news follows from the identity
//! `n_cf = unexpected + n_dr`, so the identity holds exactly by construction.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel::StateSeries;

/// Conventional log-linearization discount used when none is configured.
pub const DEFAULT_RHO: f64 = 0.95;

/// Shortest window over which the four-variable VAR is estimated.
pub const DEFAULT_MIN_OBS: usize = 60;

const N_STATES: usize = 4;

/// Estimated VAR(1) with the derived news-operator weights.
#[derive(Debug, Clone)]
pub struct VarModel {
    pub mu: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub rho: f64,
    /// Weights mapping a state innovation to discount-rate news; solves
    /// `w (I - rho G) = e1' rho G`.
    pub dr_weights: DVector<f64>,
    /// Innovation realized at each date in `residual_dates` (one row per
    /// date, starting at the second sample date).
    pub residuals: Array2<f64>,
    pub residual_dates: Vec<NaiveDate>,
    pub sample_end: NaiveDate,
}

/// Monthly cash-flow and discount-rate news with the unexpected market
/// return they decompose.
#[derive(Debug, Clone, PartialEq)]
pub struct NewsSeries {
    pub dates: Vec<NaiveDate>,
    pub mask: Vec<bool>,
    pub cash_flow: Vec<f64>,
    pub discount_rate: Vec<f64>,
    pub unexpected_market: Vec<f64>,
}

impl NewsSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Largest eigenvalue magnitude of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}

/// News weights for a given coefficient matrix: the solution of
/// `w (I - rho G) = e1' rho G`. Errors when `rho G` is nonstationary.
pub fn dr_weights_from(gamma: &DMatrix<f64>, rho: f64) -> Result<DVector<f64>> {
    let n = gamma.nrows();
    let rg = gamma * rho;
    let radius = spectral_radius(&rg);
    if radius >= 1.0 {
        return Err(Error::NonStationary { radius });
    }
    // Transposed system: (I - rho G)^T w^T = (rho G)^T e1.
    let a = (DMatrix::identity(n, n) - &rg).transpose();
    let b = rg.transpose().column(0).into_owned();
    let lu = a.lu();
    lu.solve(&b)
        .ok_or_else(|| Error::SingularFit("I - rho G is singular".into()))
}

/// Fit the VAR on observations up to and including `end_date`.
pub fn estimate_var(
    states: &StateSeries,
    end_date: NaiveDate,
    rho: f64,
    min_obs: usize,
) -> Result<VarModel> {
    let window = states.through(end_date);
    let n = window.n_obs();
    if n < min_obs {
        return Err(Error::InsufficientData {
            required: min_obs,
            actual: n,
        });
    }
    let t = n - 1;
    let k = N_STATES + 1;
    let mut x = DMatrix::zeros(t, k);
    let mut y = DMatrix::zeros(t, N_STATES);
    for r in 0..t {
        x[(r, 0)] = 1.0;
        for c in 0..N_STATES {
            x[(r, 1 + c)] = window.values[(r, c)];
            y[(r, c)] = window.values[(r + 1, c)];
        }
    }
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularFit("degenerate regressor matrix".into()))?;
    // Guard against numerically ill-conditioned (near-constant) regressors.
    let l = chol.l();
    let dmax = (0..k).map(|i| l[(i, i)]).fold(0.0, f64::max);
    let dmin = (0..k).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(dmin > dmax * 1e-12) {
        return Err(Error::SingularFit("degenerate regressor matrix".into()));
    }
    let beta = chol.solve(&xty); // k x 4

    let mut mu = DVector::zeros(N_STATES);
    let mut gamma = DMatrix::zeros(N_STATES, N_STATES);
    for j in 0..N_STATES {
        mu[j] = beta[(0, j)];
        for c in 0..N_STATES {
            gamma[(j, c)] = beta[(1 + c, j)];
        }
    }

    let fitted = &x * &beta;
    let mut residuals = Array2::zeros((t, N_STATES));
    for r in 0..t {
        for j in 0..N_STATES {
            residuals[(r, j)] = y[(r, j)] - fitted[(r, j)];
        }
    }

    let dr_weights = dr_weights_from(&gamma, rho)?;
    Ok(VarModel {
        mu,
        gamma,
        rho,
        dr_weights,
        residuals,
        residual_dates: window.dates[1..].to_vec(),
        sample_end: *window.dates.last().unwrap(),
    })
}

/// Decompose every stored innovation into news terms.
pub fn news_decompose(model: &VarModel) -> NewsSeries {
    let t = model.residuals.nrows();
    let mut cash_flow = Vec::with_capacity(t);
    let mut discount_rate = Vec::with_capacity(t);
    let mut unexpected = Vec::with_capacity(t);
    for r in 0..t {
        let u = model.residuals.row(r);
        let (dr, un) = decompose_innovation(&model.dr_weights, u.as_slice().unwrap());
        discount_rate.push(dr);
        unexpected.push(un);
        cash_flow.push(un + dr);
    }
    NewsSeries {
        dates: model.residual_dates.clone(),
        mask: vec![true; t],
        cash_flow,
        discount_rate,
        unexpected_market: unexpected,
    }
}

fn decompose_innovation(weights: &DVector<f64>, u: &[f64]) -> (f64, f64) {
    let dr: f64 = weights.iter().zip(u).map(|(w, v)| w * v).sum();
    (dr, u[0])
}

/// Real-time news: for every month at or after `first_estimation_date`, the
/// VAR is re-estimated on data through that month and the month's news is
/// taken from that model's final innovation. Months whose fit fails are
/// masked out rather than filled.
pub fn expanding_news(
    states: &StateSeries,
    first_estimation_date: NaiveDate,
    rho: f64,
    min_obs: usize,
) -> Result<NewsSeries> {
    let n = states.n_obs();
    let start = states.dates.partition_point(|d| *d < first_estimation_date);
    if start >= n {
        return Err(Error::InsufficientData {
            required: min_obs,
            actual: 0,
        });
    }
    if start + 1 < min_obs {
        return Err(Error::InsufficientData {
            required: min_obs,
            actual: start + 1,
        });
    }

    let per_month: Vec<Option<(f64, f64)>> = (start..n)
        .into_par_iter()
        .map(|t| {
            let model = estimate_var(states, states.dates[t], rho, min_obs).ok()?;
            let u = model.residuals.row(model.residuals.nrows() - 1);
            Some(decompose_innovation(
                &model.dr_weights,
                u.as_slice().unwrap(),
            ))
        })
        .collect();

    let m = n - start;
    let mut out = NewsSeries {
        dates: states.dates[start..].to_vec(),
        mask: vec![false; m],
        cash_flow: vec![f64::NAN; m],
        discount_rate: vec![f64::NAN; m],
        unexpected_market: vec![f64::NAN; m],
    };
    for (i, cell) in per_month.into_iter().enumerate() {
        if let Some((dr, un)) = cell {
            out.mask[i] = true;
            out.discount_rate[i] = dr;
            out.unexpected_market[i] = un;
            out.cash_flow[i] = un + dr;
        }
    }
    Ok(out)
}
