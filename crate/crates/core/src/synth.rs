//! Synthetic market generator with known ground truth.
//!
//! Produces a complete aligned dataset — monthly one-factor asset returns,
//! a VAR(1) state series, auxiliary factors, and daily prices with a
//! Roll-model bid-ask bounce — together with the planted betas, news and
//! half-spreads, so every estimator in the engine can be tested against an
//! exact oracle. Deterministic for a given seed.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::align::{align, AlignedDataset};
use crate::calendar::Frequency;
use crate::error::{Error, Result};
use crate::panel::{AuxSeries, DailyMicroPanel, ReturnPanel, StateSeries};
use crate::rng::stream_rng;
use crate::var_news::{dr_weights_from, spectral_radius, NewsSeries};

/// Configuration of the synthetic economy.
#[derive(Debug, Clone, Serialize)]
pub struct SynthConfig {
    pub n_assets: usize,
    pub n_months: usize,
    /// Trading days per month; capped at 28 so synthetic dates stay valid.
    pub days_per_month: usize,
    pub true_betas: Vec<f64>,
    /// Planted monthly alpha per asset.
    pub alpha_profile: Vec<f64>,
    /// Monthly stdev of the market log-return innovation.
    pub market_vol: f64,
    /// Monthly idiosyncratic stdev per asset.
    pub idio_vol: Vec<f64>,
    /// Effective half-spread per asset (decimal fraction of price).
    pub roll_half_spread: Vec<f64>,
    pub var_gamma: [[f64; 4]; 4],
    pub var_noise_cov: [[f64; 4]; 4],
    /// Log-linearization discount used for the ground-truth news operator.
    pub rho: f64,
    pub seed: u64,
    /// First simulated year.
    pub start_year: i32,
    /// Intraday random-walk steps per day; highs and lows come from this
    /// path, so more steps give more diffusive ranges.
    pub intraday_steps: usize,
}

impl SynthConfig {
    /// Coefficients with a persistent yield-spread style predictor block;
    /// suitable as an all-purpose stationary default.
    pub fn default_gamma() -> [[f64; 4]; 4] {
        [
            [0.05, 0.15, -0.10, 0.08],
            [0.00, 0.50, 0.00, 0.00],
            [0.00, 0.00, 0.60, 0.00],
            [0.00, 0.00, 0.00, 0.40],
        ]
    }

    pub fn default_noise_cov(market_vol: f64) -> [[f64; 4]; 4] {
        let m = market_vol * market_vol;
        [
            [m, 0.0, 0.0, 0.0],
            [0.0, 0.0025, 0.0, 0.0],
            [0.0, 0.0, 0.0025, 0.0],
            [0.0, 0.0, 0.0, 0.0025],
        ]
    }

    /// A balanced economy: betas evenly spread over [0.3, 1.7], zero alphas,
    /// heterogeneous spreads, no planted anomaly.
    pub fn default_market(n_assets: usize, n_months: usize, seed: u64) -> Self {
        let betas = linspace(0.3, 1.7, n_assets);
        let spreads = geomspace(0.002, 0.01, n_assets);
        let market_vol = 0.045;
        SynthConfig {
            n_assets,
            n_months,
            days_per_month: 21,
            true_betas: betas,
            alpha_profile: vec![0.0; n_assets],
            market_vol,
            idio_vol: vec![0.08; n_assets],
            roll_half_spread: spreads,
            var_gamma: Self::default_gamma(),
            var_noise_cov: Self::default_noise_cov(market_vol),
            rho: crate::var_news::DEFAULT_RHO,
            seed,
            start_year: 1980,
            intraday_steps: 8,
        }
    }

    /// Small instance for unit tests.
    pub fn small_test(n_assets: usize, n_months: usize, seed: u64) -> Self {
        Self::default_market(n_assets, n_months, seed)
    }

    /// Plant a low-beta anomaly: +alpha on the low-beta half of the
    /// universe, -alpha on the high-beta half.
    pub fn with_planted_anomaly(mut self, alpha_per_month: f64) -> Self {
        let median = median(&self.true_betas);
        self.alpha_profile = self
            .true_betas
            .iter()
            .map(|b| if *b <= median { alpha_per_month } else { -alpha_per_month })
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_assets == 0 || self.n_months < 2 {
            return Err(Error::Config("need at least 1 asset and 2 months".into()));
        }
        if !(1..=28).contains(&self.days_per_month) {
            return Err(Error::Config("days_per_month must be in 1..=28".into()));
        }
        for (name, v) in [
            ("true_betas", &self.true_betas),
            ("alpha_profile", &self.alpha_profile),
            ("idio_vol", &self.idio_vol),
            ("roll_half_spread", &self.roll_half_spread),
        ] {
            if v.len() != self.n_assets {
                return Err(Error::Config(format!(
                    "{name} has {} entries for {} assets",
                    v.len(),
                    self.n_assets
                )));
            }
        }
        if self.market_vol <= 0.0 || self.idio_vol.iter().any(|v| *v < 0.0) {
            return Err(Error::Config("volatilities must be positive".into()));
        }
        if self.roll_half_spread.iter().any(|s| *s < 0.0 || *s >= 0.5) {
            return Err(Error::Config("half-spreads must lie in [0, 0.5)".into()));
        }
        let gamma = self.gamma_matrix();
        let radius = spectral_radius(&gamma);
        if radius >= 1.0 {
            return Err(Error::Config(format!(
                "var_gamma spectral radius {radius:.4} >= 1 (nonstationary)"
            )));
        }
        Ok(())
    }

    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(4, 4, |r, c| self.var_gamma[r][c])
    }

    pub fn noise_cov_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(4, 4, |r, c| self.var_noise_cov[r][c])
    }
}

/// Planted quantities recorded alongside the generated dataset.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub true_betas: Vec<f64>,
    pub true_alphas: Vec<f64>,
    /// News computed from the true coefficient matrix and the simulated
    /// innovations (not from any estimate).
    pub news: NewsSeries,
    pub half_spreads: Vec<f64>,
}

/// Simulated single-asset Roll-model path used by the spread estimator tests.
#[derive(Debug, Clone)]
pub struct RollSim {
    pub mid: Vec<f64>,
    pub close: Vec<f64>,
    pub high: Vec<f64>,
    pub low: Vec<f64>,
    pub volume: Vec<f64>,
}

/// Walk one day's intraday mid path: `steps` increments that sum to
/// `day_log_return`, starting from `open_mid`. Returns (close_mid, high_mid,
/// low_mid) where the extremes cover the whole path including the open.
fn intraday_path(
    open_mid: f64,
    day_log_return: f64,
    step_vol: f64,
    steps: usize,
    normal: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> (f64, f64, f64) {
    let mut increments = [0.0f64; 64];
    let k = steps.clamp(1, 64);
    let mut sum = 0.0;
    for g in increments.iter_mut().take(k) {
        *g = step_vol * normal.sample(rng);
        sum += *g;
    }
    let shift = (day_log_return - sum) / k as f64;
    let mut level = open_mid;
    let mut high = open_mid;
    let mut low = open_mid;
    for g in increments.iter().take(k) {
        level *= (g + shift).exp();
        high = high.max(level);
        low = low.min(level);
    }
    (level, high, low)
}

/// Efficient mid follows a driftless geometric random walk with daily log
/// stdev `daily_vol`; the observed close bounces mid * (1 +/- half_spread);
/// the day's high and low wrap the intraday path extremes, spread included.
pub fn simulate_roll_model(
    n_days: usize,
    daily_vol: f64,
    half_spread: f64,
    base_volume: f64,
    rng: &mut ChaCha8Rng,
) -> RollSim {
    let steps = 8usize;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let step_vol = daily_vol / (steps as f64).sqrt();
    let mut mid = 50.0f64;
    let mut sim = RollSim {
        mid: Vec::with_capacity(n_days),
        close: Vec::with_capacity(n_days),
        high: Vec::with_capacity(n_days),
        low: Vec::with_capacity(n_days),
        volume: Vec::with_capacity(n_days),
    };
    for _ in 0..n_days {
        let day_ret = daily_vol * normal.sample(rng);
        let (close_mid, high_mid, low_mid) =
            intraday_path(mid, day_ret, step_vol, steps, &normal, rng);
        mid = close_mid;
        let q: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let close = mid * (1.0 + q * half_spread);
        let high = high_mid * (1.0 + half_spread);
        let low = low_mid * (1.0 - half_spread);
        let volume = base_volume * (0.3 * normal.sample(rng)).exp();
        sim.mid.push(mid);
        sim.close.push(close);
        sim.high.push(high);
        sim.low.push(low);
        sim.volume.push(volume);
    }
    sim
}

/// Generate the full synthetic dataset plus its ground truth.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(AlignedDataset, GroundTruth)> {
    cfg.validate()?;
    let n_m = cfg.n_months;
    let n_a = cfg.n_assets;
    let d_pm = cfg.days_per_month;

    let monthly_dates = month_dates(cfg.start_year, n_m, d_pm);
    let daily_dates = day_dates(cfg.start_year, n_m, d_pm);

    // State series from the true VAR(1), with burn-in; innovations recorded
    // for the ground-truth news.
    let gamma = cfg.gamma_matrix();
    let chol = cfg
        .noise_cov_matrix()
        .cholesky()
        .ok_or_else(|| Error::Config("var_noise_cov is not positive definite".into()))?;
    let noise_l = chol.l();
    let mut rng_states = stream_rng(cfg.seed, "states");
    let normal = Normal::new(0.0, 1.0).unwrap();
    let burn = 240usize;
    let mut x = DVector::zeros(4);
    let mut states_values = Array2::zeros((n_m, 4));
    let mut innovations = Array2::zeros((n_m, 4));
    for t in 0..burn + n_m {
        let z = DVector::from_fn(4, |_, _| normal.sample(&mut rng_states));
        let u = &noise_l * z;
        x = &gamma * &x + &u;
        if t >= burn {
            for j in 0..4 {
                states_values[(t - burn, j)] = x[j];
                innovations[(t - burn, j)] = u[j];
            }
        }
    }

    // Monthly asset returns: r_i = alpha_i + beta_i * R_mkt + eps_i with the
    // simple market excess return implied by the log state. The synthetic
    // risk-free rate is zero, so R_mkt is also the market's simple return.
    let mut rng_idio = stream_rng(cfg.seed, "idiosyncratic");
    let market_simple: Vec<f64> = (0..n_m).map(|t| states_values[(t, 0)].exp() - 1.0).collect();
    let mut monthly_values = Array2::zeros((n_m, n_a));
    for t in 0..n_m {
        for i in 0..n_a {
            let eps = cfg.idio_vol[i] * normal.sample(&mut rng_idio);
            let r = cfg.alpha_profile[i] + cfg.true_betas[i] * market_simple[t] + eps;
            monthly_values[(t, i)] = r.max(-0.99);
        }
    }

    // Auxiliary series: rf = 0, mkt echoes the simple market excess return,
    // the other five factors are independent noise so the regression
    // machinery has a full design to work with.
    let mut rng_factors = stream_rng(cfg.seed, "factors");
    let mut factors = Array2::zeros((n_m, 6));
    for t in 0..n_m {
        factors[(t, 0)] = market_simple[t];
        for j in 1..6 {
            factors[(t, j)] = 0.02 * normal.sample(&mut rng_factors);
        }
    }

    // Daily mids share the market factor so daily beta estimators have a
    // recoverable signal; per-month shifts make the mid path compound to the
    // monthly return exactly.
    let sqrt_d = (d_pm as f64).sqrt();
    let mkt_daily_vol = cfg.market_vol / sqrt_d;
    let mut rng_daily = stream_rng(cfg.seed, "daily");
    let n_d = n_m * d_pm;
    let mut close = Array2::zeros((n_d, n_a));
    let mut high = Array2::zeros((n_d, n_a));
    let mut low = Array2::zeros((n_d, n_a));
    let mut volume = Array2::zeros((n_d, n_a));
    let mask = Array2::from_elem((n_d, n_a), true);

    let base_volume: Vec<f64> = cfg
        .roll_half_spread
        .iter()
        .map(|s| (2e5 * (0.004f64 / s.max(1e-4)).powi(3)).clamp(1e3, 1e9))
        .collect();
    let start_price: Vec<f64> = (0..n_a)
        .map(|i| 20.0 + 60.0 * (i as f64 + 0.5) / n_a as f64)
        .collect();
    let mut mid = start_price.clone();

    let mut mkt_day = vec![0.0f64; d_pm];
    let mut asset_day = vec![0.0f64; d_pm];
    for t in 0..n_m {
        for v in mkt_day.iter_mut() {
            *v = mkt_daily_vol * normal.sample(&mut rng_daily);
        }
        let target_mkt = states_values[(t, 0)];
        let shift = (target_mkt - mkt_day.iter().sum::<f64>()) / d_pm as f64;
        for v in mkt_day.iter_mut() {
            *v += shift;
        }
        for i in 0..n_a {
            let idio_daily = cfg.idio_vol[i] / sqrt_d;
            for (d, v) in asset_day.iter_mut().enumerate() {
                *v = cfg.true_betas[i] * mkt_day[d] + idio_daily * normal.sample(&mut rng_daily);
            }
            let target = (1.0 + monthly_values[(t, i)]).ln();
            let shift = (target - asset_day.iter().sum::<f64>()) / d_pm as f64;
            let s = cfg.roll_half_spread[i];
            let daily_vol = (cfg.true_betas[i].powi(2) * cfg.market_vol.powi(2)
                + cfg.idio_vol[i].powi(2))
            .sqrt()
                / sqrt_d;
            let step_vol = daily_vol / (cfg.intraday_steps.max(1) as f64).sqrt();
            for d in 0..d_pm {
                let row = t * d_pm + d;
                let (close_mid, high_mid, low_mid) = intraday_path(
                    mid[i],
                    asset_day[d] + shift,
                    step_vol,
                    cfg.intraday_steps,
                    &normal,
                    &mut rng_daily,
                );
                mid[i] = close_mid;
                let q: f64 = if rng_daily.random::<bool>() { 1.0 } else { -1.0 };
                close[(row, i)] = mid[i] * (1.0 + q * s);
                high[(row, i)] = high_mid * (1.0 + s);
                low[(row, i)] = low_mid * (1.0 - s);
                volume[(row, i)] = base_volume[i] * (0.3 * normal.sample(&mut rng_daily)).exp();
            }
        }
    }

    let assets: Vec<String> = (0..n_a).map(|i| format!("A{:05}", i)).collect();
    let monthly = ReturnPanel {
        frequency: Frequency::Monthly,
        dates: monthly_dates.clone(),
        assets: assets.clone(),
        values: monthly_values,
        mask: Array2::from_elem((n_m, n_a), true),
    };
    let daily = DailyMicroPanel {
        dates: daily_dates,
        assets: assets.clone(),
        close,
        high,
        low,
        volume,
        mask,
    };
    let states = StateSeries {
        dates: monthly_dates.clone(),
        values: states_values,
    };
    let aux = AuxSeries {
        dates: monthly_dates,
        risk_free: vec![0.0; n_m],
        factors,
    };

    let dataset = align(&monthly, &daily, &states, &aux)?;

    // Ground-truth news from the true coefficients and recorded innovations.
    let weights = dr_weights_from(&gamma, cfg.rho)?;
    let mut news = NewsSeries {
        dates: dataset.calendar.monthly_dates.clone(),
        mask: vec![true; n_m],
        cash_flow: vec![0.0; n_m],
        discount_rate: vec![0.0; n_m],
        unexpected_market: vec![0.0; n_m],
    };
    for t in 0..n_m {
        let dr: f64 = (0..4).map(|j| weights[j] * innovations[(t, j)]).sum();
        let un = innovations[(t, 0)];
        news.discount_rate[t] = dr;
        news.unexpected_market[t] = un;
        news.cash_flow[t] = un + dr;
    }

    let truth = GroundTruth {
        true_betas: cfg.true_betas.clone(),
        true_alphas: cfg.alpha_profile.clone(),
        news,
        half_spreads: cfg.roll_half_spread.clone(),
    };
    Ok((dataset, truth))
}

fn month_dates(start_year: i32, n_months: usize, days_per_month: usize) -> Vec<NaiveDate> {
    (0..n_months)
        .map(|m| {
            let year = start_year + (m / 12) as i32;
            let month = (m % 12) as u32 + 1;
            NaiveDate::from_ymd_opt(year, month, days_per_month as u32).unwrap()
        })
        .collect()
}

fn day_dates(start_year: i32, n_months: usize, days_per_month: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n_months * days_per_month);
    for m in 0..n_months {
        let year = start_year + (m / 12) as i32;
        let month = (m % 12) as u32 + 1;
        for d in 1..=days_per_month {
            out.push(NaiveDate::from_ymd_opt(year, month, d as u32).unwrap());
        }
    }
    out
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo * hi).sqrt()];
    }
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn deterministic_given_seed() {
        let cfg = SynthConfig::small_test(6, 30, 99);
        let (a, _) = generate_synthetic(&cfg).unwrap();
        let (b, _) = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.monthly, b.monthly);
        assert_eq!(a.daily, b.daily);
        assert_eq!(a.states, b.states);
        assert_eq!(a.aux, b.aux);
    }

    #[test]
    fn monthly_return_matches_compounded_daily_mids() {
        let cfg = SynthConfig::small_test(5, 24, 7);
        let (ds, _) = generate_synthetic(&cfg).unwrap();
        // Recover mid prices by stripping the bounce is not possible from the
        // panel alone, so recompute from the generator's construction: the
        // product of (1 + daily mid return) must equal 1 + monthly return.
        // Here we verify via close prices with the bounce disabled.
        let mut cfg0 = cfg.clone();
        cfg0.roll_half_spread = vec![0.0; cfg.n_assets];
        let (ds0, _) = generate_synthetic(&cfg0).unwrap();
        let d_pm = cfg.days_per_month;
        for t in 1..cfg.n_months {
            for i in 0..cfg.n_assets {
                let start = ds0.daily.close[(t * d_pm - 1, i)];
                let end = ds0.daily.close[((t + 1) * d_pm - 1, i)];
                let compounded = end / start - 1.0;
                assert_abs_diff_eq!(compounded, ds.monthly.values[(t, i)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn zero_spread_keeps_price_ordering_and_kills_bounce() {
        let mut cfg = SynthConfig::small_test(1, 60, 3);
        cfg.roll_half_spread = vec![0.0];
        let (ds, _) = generate_synthetic(&cfg).unwrap();
        ds.daily.validate().unwrap();
        // Serial covariance of daily close changes should be near zero.
        let n = ds.daily.dates.len();
        let mut dp: Vec<f64> = Vec::new();
        for t in 1..n {
            dp.push(ds.daily.close[(t, 0)].ln() - ds.daily.close[(t - 1, 0)].ln());
        }
        let mean = dp.iter().sum::<f64>() / dp.len() as f64;
        let mut cov = 0.0;
        let mut var = 0.0;
        for t in 1..dp.len() {
            cov += (dp[t] - mean) * (dp[t - 1] - mean);
            var += (dp[t] - mean) * (dp[t] - mean);
        }
        assert!((cov / var).abs() < 0.1, "autocorrelation {}", cov / var);
    }

    #[test]
    fn degenerate_one_factor_economy() {
        let mut cfg = SynthConfig::small_test(4, 36, 5);
        cfg.true_betas = vec![1.0; 4];
        cfg.alpha_profile = vec![0.0; 4];
        cfg.idio_vol = vec![0.0; 4];
        let (ds, _) = generate_synthetic(&cfg).unwrap();
        for t in 0..cfg.n_months {
            let mkt = ds.states.values[(t, 0)].exp() - 1.0;
            for i in 0..4 {
                assert_abs_diff_eq!(ds.monthly.values[(t, i)], mkt, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_gamma_truth_has_no_discount_rate_news() {
        let mut cfg = SynthConfig::small_test(3, 48, 8);
        cfg.var_gamma = [[0.0; 4]; 4];
        let (_, truth) = generate_synthetic(&cfg).unwrap();
        assert!(truth.news.discount_rate.iter().all(|&v| v == 0.0));
        for t in 0..truth.news.len() {
            assert_eq!(truth.news.cash_flow[t], truth.news.unexpected_market[t]);
        }
    }

    #[test]
    fn nonstationary_gamma_is_a_config_error() {
        let mut cfg = SynthConfig::small_test(3, 48, 8);
        cfg.var_gamma[1][1] = 1.05;
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn truth_news_matches_estimated_news_on_long_sample() {
        // With T = 5000 the expanding-window estimates should track the
        // true-operator news closely.
        let mut cfg = SynthConfig::small_test(1, 5000, 13);
        cfg.days_per_month = 1; // keep the daily grid tiny
        let (ds, truth) = generate_synthetic(&cfg).unwrap();
        let end = *ds.states.dates.last().unwrap();
        let model = crate::var_news::estimate_var(&ds.states, end, cfg.rho, 60).unwrap();
        let est = crate::var_news::news_decompose(&model);
        // Align: estimated news starts at the second month.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (t, date) in est.dates.iter().enumerate() {
            let ti = truth.news.dates.iter().position(|d| d == date).unwrap();
            xs.push(est.cash_flow[t]);
            ys.push(truth.news.cash_flow[ti]);
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..xs.len() {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
            syy += (ys[i] - my) * (ys[i] - my);
        }
        let r = sxy / (sxx * syy).sqrt();
        assert!(r > 0.99, "true vs estimated news correlation {r}");
    }
}
