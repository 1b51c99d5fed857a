//! Bayesian Gibbs estimate of the Roll-model effective cost.
//!
//! Log closes follow p_t = m_t + c q_t with a random-walk efficient price
//! m and unobserved trade directions q in {-1, +1}; the half-spread c is
//! identified from the bid-ask bounce. The sampler alternates (i) trade
//! directions given (c, sigma2), (ii) c from a truncated-at-zero normal
//! regression draw, and (iii) the efficient-price variance from its
//! inverse-gamma full conditional. Deterministic for a given seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::{Distribution, Gamma};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GibbsConfig {
    pub sweeps: usize,
    pub burn: usize,
    /// Diffuse prior variance on the cost coefficient.
    pub cost_prior_var: f64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            sweeps: 1000,
            burn: 200,
            cost_prior_var: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GibbsEstimate {
    /// Posterior mean of the half-spread (decimal fraction).
    pub half_spread: f64,
    pub posterior_sd: f64,
    /// False when the posterior stdev exceeds the posterior mean.
    pub converged: bool,
}

/// Run the sampler on one window of daily closes.
pub fn gibbs_spread(closes: &[f64], cfg: &GibbsConfig, seed: u64) -> Result<GibbsEstimate> {
    if closes.len() < 60 {
        return Err(Error::InsufficientData {
            required: 60,
            actual: closes.len(),
        });
    }
    if closes.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::Numeric("nonpositive close in gibbs window".into()));
    }
    let p: Vec<f64> = closes.iter().map(|c| c.ln()).collect();
    let n = p.len();
    let dp: Vec<f64> = (1..n).map(|t| p[t] - p[t - 1]).collect();

    let dp_mean = dp.iter().sum::<f64>() / dp.len() as f64;
    let dp_var = dp.iter().map(|d| (d - dp_mean) * (d - dp_mean)).sum::<f64>() / dp.len() as f64;
    if dp_var < 1e-20 {
        // Constant prices carry no bounce information.
        return Ok(GibbsEstimate {
            half_spread: 0.0,
            posterior_sd: 0.0,
            converged: true,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    // Initial directions from the tick test; initial cost from the Roll
    // serial-covariance estimator.
    let mut q: Vec<f64> = Vec::with_capacity(n);
    q.push(1.0);
    for d in &dp {
        q.push(if *d > 0.0 {
            1.0
        } else if *d < 0.0 {
            -1.0
        } else {
            *q.last().unwrap()
        });
    }
    let mut serial = 0.0;
    for t in 1..dp.len() {
        serial += (dp[t] - dp_mean) * (dp[t - 1] - dp_mean);
    }
    serial /= (dp.len() - 1) as f64;
    let mut c = (-serial).max(0.0).sqrt();
    let mut sigma2 = (dp_var / 2.0).max(1e-12);

    // Inverse-gamma prior on the efficient variance.
    let a0 = 2.0;
    let b0 = 1e-4 * dp_var;

    let kept = cfg.sweeps.saturating_sub(cfg.burn).max(1);
    let mut sum_c = 0.0;
    let mut sum_c2 = 0.0;

    for sweep in 0..cfg.sweeps {
        // (i) Trade directions. q_t couples dp[t-1] and dp[t].
        for t in 0..n {
            let mut delta_e = 0.0;
            if t >= 1 {
                delta_e += -4.0 * c * (dp[t - 1] + c * q[t - 1]);
            }
            if t + 1 < n {
                delta_e += 4.0 * c * (dp[t] - c * q[t + 1]);
            }
            delta_e /= 2.0 * sigma2;
            let p_plus = 1.0 / (1.0 + delta_e.exp());
            q[t] = if rng.random::<f64>() < p_plus { 1.0 } else { -1.0 };
        }

        // (ii) Cost coefficient: truncated normal regression draw.
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for t in 0..dp.len() {
            let x = q[t + 1] - q[t];
            sxx += x * x;
            sxy += x * dp[t];
        }
        let prec = sxx / sigma2 + 1.0 / cfg.cost_prior_var;
        let mean = (sxy / sigma2) / prec;
        let sd = (1.0 / prec).sqrt();
        c = truncated_normal_at_zero(mean, sd, &std_normal, &mut rng);

        // (iii) Efficient-price variance: inverse gamma.
        let mut ssr = 0.0;
        for t in 0..dp.len() {
            let x = q[t + 1] - q[t];
            let e = dp[t] - c * x;
            ssr += e * e;
        }
        let shape = a0 + dp.len() as f64 / 2.0;
        let rate = b0 + ssr / 2.0;
        let g = Gamma::new(shape, 1.0 / rate).unwrap().sample(&mut rng);
        sigma2 = (1.0 / g).max(1e-20);

        if sweep >= cfg.burn {
            sum_c += c;
            sum_c2 += c * c;
        }
    }

    let mean_c = sum_c / kept as f64;
    let var_c = (sum_c2 / kept as f64 - mean_c * mean_c).max(0.0);
    let sd_c = var_c.sqrt();
    Ok(GibbsEstimate {
        half_spread: mean_c,
        posterior_sd: sd_c,
        converged: sd_c <= mean_c,
    })
}

/// Draw from N(mean, sd^2) truncated to [0, inf) by inverse-CDF sampling.
fn truncated_normal_at_zero(
    mean: f64,
    sd: f64,
    std_normal: &Normal,
    rng: &mut ChaCha8Rng,
) -> f64 {
    if sd <= 0.0 {
        return mean.max(0.0);
    }
    let alpha = std_normal.cdf(-mean / sd);
    let u: f64 = rng.random();
    let p = (alpha + u * (1.0 - alpha)).clamp(1e-15, 1.0 - 1e-15);
    (mean + sd * std_normal.inverse_cdf(p)).max(0.0)
}
