//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its elapsed time. Criteria are property-based or synthetic-oracle
//! quantitative checks; the suite runs serially so the stated runtime
//! budgets are meaningful.

use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use badbeta_core::beta::{build_beta_panel, BetaKind, BetaSpec};
use badbeta_core::config::RunConfig;
use badbeta_core::panel::StateSeries;
use badbeta_core::pipeline::Pipeline;
use badbeta_core::portfolio::{run_backtest, BacktestConfig, SortScheme};
use badbeta_core::rng::stream_rng;
use badbeta_core::synth::{generate_synthetic, simulate_roll_model, SynthConfig};
use badbeta_core::tcost::{
    abdi_ranaldo_spread, corwin_schultz_spread, gibbs_spread, CostPanel, GibbsConfig,
};
use badbeta_core::var_news::{dr_weights_from, estimate_var, news_decompose};
use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use tempfile::TempDir;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: &str, started: Instant, budget_s: Option<f64>) {
    let elapsed = started.elapsed().as_secs_f64();
    println!("acceptance {criterion}: PASS ({elapsed:.1} s)");
    if let Some(budget) = budget_s {
        assert!(
            elapsed < budget,
            "{criterion} exceeded its {budget} s runtime budget: {elapsed:.1} s"
        );
    }
}

fn month_seq(n: usize) -> Vec<NaiveDate> {
    (0..n)
        .map(|i| NaiveDate::from_ymd_opt(1900 + (i / 12) as i32, (i % 12) as u32 + 1, 28).unwrap())
        .collect()
}

fn simulate_var(gamma: &DMatrix<f64>, noise_sd: &[f64], n: usize, seed: u64) -> StateSeries {
    let mut rng = stream_rng(seed, "acceptance-var");
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut x = DVector::zeros(4);
    let mut values = Array2::zeros((n, 4));
    for t in 0..n + 300 {
        let mut u = DVector::zeros(4);
        for j in 0..4 {
            u[j] = noise_sd[j] * normal.sample(&mut rng);
        }
        x = gamma * x + u;
        if t >= 300 {
            for j in 0..4 {
                values[(t - 300, j)] = x[j];
            }
        }
    }
    StateSeries {
        dates: month_seq(n),
        values,
    }
}

fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..ra.len() {
        sxy += (ra[i] - ma) * (rb[i] - ma);
        sxx += (ra[i] - ma) * (ra[i] - ma);
        syy += (rb[i] - ma) * (rb[i] - ma);
    }
    sxy / (sxx * syy).sqrt()
}

// Criterion 1: the cash-flow/discount-rate/unexpected identity holds to
// 1e-12 at every date, on both full-sample and expanding news.
#[test]
fn c01_news_identity() {
    let _guard = serial();
    let t0 = Instant::now();
    let gamma = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.05, 0.2, -0.15, 0.1, //
            0.0, 0.4, 0.0, 0.0, //
            0.0, 0.0, 0.5, 0.0, //
            0.0, 0.0, 0.0, 0.3,
        ],
    );
    let states = simulate_var(&gamma, &[0.04, 0.5, 0.5, 0.5], 700, 1);
    let end = *states.dates.last().unwrap();
    let model = estimate_var(&states, end, 0.95, 60).unwrap();
    let news = news_decompose(&model);
    for t in 0..news.len() {
        let gap = (news.cash_flow[t] - news.discount_rate[t] - news.unexpected_market[t]).abs();
        assert!(gap < 1e-12, "identity gap {gap} at {t}");
    }
    let expanding =
        badbeta_core::var_news::expanding_news(&states, states.dates[99], 0.95, 60).unwrap();
    for t in 0..expanding.len() {
        if expanding.mask[t] {
            let gap = (expanding.cash_flow[t]
                - expanding.discount_rate[t]
                - expanding.unexpected_market[t])
                .abs();
            assert!(gap < 1e-12, "expanding identity gap {gap} at {t}");
        }
    }
    report("criterion 1 (news identity)", t0, Some(1.0));
}

// Criterion 2: estimated news weights land within 1% relative L2 error of
// the closed form from the true coefficients in at least 95 of 100 seeds.
#[test]
fn c02_lambda_correctness() {
    let _guard = serial();
    let t0 = Instant::now();
    let gamma = DMatrix::from_row_slice(
        4,
        4,
        &[
            -0.95, 0.004, -0.004, 0.004, //
            0.0, 0.2, 0.0, 0.0, //
            0.0, 0.0, 0.2, 0.0, //
            0.0, 0.0, 0.0, 0.2,
        ],
    );
    let noise = [0.04, 2.0, 2.0, 2.0];
    let rho = 0.95;
    let truth = dr_weights_from(&gamma, rho).unwrap();
    let truth_norm: f64 = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut passes = 0;
    for seed in 0..100u64 {
        let states = simulate_var(&gamma, &noise, 5000, 1000 + seed);
        let end = *states.dates.last().unwrap();
        let model = estimate_var(&states, end, rho, 60).unwrap();
        let err: f64 = model
            .dr_weights
            .iter()
            .zip(truth.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / truth_norm;
        if err < 0.01 {
            passes += 1;
        }
    }
    assert!(passes >= 95, "lambda within 1% in only {passes}/100 seeds");
    report(&format!("criterion 2 (lambda correctness, {passes}/100 seeds)"), t0, Some(30.0));
}

// Criterion 3: bad beta plus good beta equals the independently accumulated
// covariance beta to 1e-10 on every synthetic asset.
#[test]
fn c03_beta_additivity() {
    let _guard = serial();
    let t0 = Instant::now();
    let cfg = SynthConfig::default_market(200, 60, 33);
    let (ds, truth) = generate_synthetic(&cfg).unwrap();
    let cf = build_beta_panel(&ds, Some(&truth.news), &BetaSpec::cash_flow()).unwrap();
    let dr =
        build_beta_panel(&ds, Some(&truth.news), &BetaSpec::new(BetaKind::DiscountRate)).unwrap();
    let last = ds.calendar.n_months() - 1;
    let win = 36usize;
    let mut checked = 0;
    for t in [last, last - 6, last - 12] {
        let start = t + 1 - win;
        for i in 0..ds.assets.len() {
            if !(cf.mask[(t, i)] && dr.mask[(t, i)]) {
                continue;
            }
            // Regression-free covariance beta by explicit two-pass summation.
            let mut r = Vec::with_capacity(win);
            let mut u = Vec::with_capacity(win);
            for s in start..=t {
                r.push((1.0 + ds.monthly.values[(s, i)]).ln());
                u.push(truth.news.unexpected_market[s]);
            }
            let mr = r.iter().sum::<f64>() / r.len() as f64;
            let mu = u.iter().sum::<f64>() / u.len() as f64;
            let mut cov = 0.0;
            let mut var = 0.0;
            for s in 0..r.len() {
                cov += (r[s] - mr) * (u[s] - mu);
                var += (u[s] - mu) * (u[s] - mu);
            }
            let gap = (cf.values[(t, i)] + dr.values[(t, i)] - cov / var).abs();
            assert!(gap < 1e-10, "additivity gap {gap} for asset {i} window ending {t}");
            checked += 1;
        }
    }
    assert!(checked >= 3 * 190, "only {checked}/600 asset-windows eligible");
    report("criterion 3 (beta additivity)", t0, None);
}

// Criterion 4: fp, ols and dimson recover the planted beta ranks (rank
// correlation > 0.8) in at least 19 of 20 seeds each.
#[test]
fn c04_beta_recovery() {
    let _guard = serial();
    let t0 = Instant::now();
    let specs = [
        BetaSpec::fp(),
        BetaSpec::new(BetaKind::Ols),
        {
            let mut d = BetaSpec::new(BetaKind::Dimson);
            d.shrink_weight = 1.0;
            d
        },
    ];
    let mut passes = [0usize; 3];
    for seed in 0..20u64 {
        let cfg = SynthConfig::default_market(500, 60, 4000 + seed);
        let (ds, truth) = generate_synthetic(&cfg).unwrap();
        let t = ds.calendar.n_months() - 1;
        for (k, spec) in specs.iter().enumerate() {
            let panel = build_beta_panel(&ds, None, spec).unwrap();
            let mut est = Vec::new();
            let mut planted = Vec::new();
            for i in 0..ds.assets.len() {
                if panel.mask[(t, i)] {
                    est.push(panel.values[(t, i)]);
                    planted.push(truth.true_betas[i]);
                }
            }
            assert!(est.len() >= 400, "only {} assets estimable", est.len());
            if rank_correlation(&est, &planted) > 0.8 {
                passes[k] += 1;
            }
        }
    }
    for (k, spec) in specs.iter().enumerate() {
        assert!(
            passes[k] >= 19,
            "{:?} recovered ranks in only {}/20 seeds",
            spec.kind,
            passes[k]
        );
    }
    report(
        &format!(
            "criterion 4 (beta recovery, fp {}/20 ols {}/20 dimson {}/20)",
            passes[0], passes[1], passes[2]
        ),
        t0,
        Some(120.0),
    );
}

// Criterion 5: the worked leverage example is exact and the scaled leg
// betas cancel identically in every backtest month.
#[test]
fn c05_exante_neutrality() {
    let _guard = serial();
    let t0 = Instant::now();
    let date = NaiveDate::from_ymd_opt(2000, 1, 31).unwrap();
    let worked =
        badbeta_core::portfolio::factor_return(0.5, 2.0, 0.01, 0.02, 0.0, date).unwrap();
    assert_eq!(worked, 0.01);

    let cfg = SynthConfig::default_market(90, 120, 77).with_planted_anomaly(0.002);
    let (ds, _) = generate_synthetic(&cfg).unwrap();
    let betas = build_beta_panel(&ds, None, &BetaSpec::fp()).unwrap();
    let mut bt = BacktestConfig::new(SortScheme::Tercile);
    bt.min_assets = 30;
    let out = run_backtest(&ds, &betas, None, None, &bt).unwrap();
    let mut months = 0;
    for t in 0..out.factor.dates.len() {
        if out.factor.mask[t] {
            let bl = out.factor.beta_low[t];
            let bh = out.factor.beta_high[t];
            assert!(bl > 0.0 && bh > 0.0);
            // The hedge scales each leg by its own beta: the exposure
            // cancels identically, not merely approximately.
            assert_eq!(bl / bl - bh / bh, 0.0);
            months += 1;
        }
    }
    assert!(months >= 24);
    report("criterion 5 (ex-ante neutrality)", t0, None);
}

// Criterion 6: a planted +-20 bps low-beta anomaly is detected (t > 2 on
// the 500 x 480 economy) and a null economy yields |CAPM alpha t| < 2 in at
// least 90 of 100 seeds.
#[test]
fn c06_planted_anomaly_detection() {
    let _guard = serial();
    let t0 = Instant::now();

    // Planted economy.
    let cfg = SynthConfig::default_market(500, 480, 60_001).with_planted_anomaly(0.002);
    let (ds, _) = generate_synthetic(&cfg).unwrap();
    let betas = build_beta_panel(&ds, None, &BetaSpec::fp()).unwrap();
    let mut bt = BacktestConfig::new(SortScheme::Tercile);
    bt.min_assets = 30;
    let out = run_backtest(&ds, &betas, None, None, &bt).unwrap();
    let (_, rets) = out.factor.valid_series(false);
    let mean = rets.iter().sum::<f64>() / rets.len() as f64;
    let sd = (rets.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (rets.len() - 1) as f64)
        .sqrt();
    let t_stat = mean / (sd / (rets.len() as f64).sqrt());
    assert!(t_stat > 2.0, "planted anomaly t-stat {t_stat}");

    // Null economies: zero alphas, clean prices.
    let mut inside = 0;
    for seed in 0..100u64 {
        let mut cfg = SynthConfig::default_market(100, 180, 70_000 + seed);
        cfg.roll_half_spread = vec![0.0; 100];
        cfg.intraday_steps = 1;
        let (ds, _) = generate_synthetic(&cfg).unwrap();
        let betas = build_beta_panel(&ds, None, &BetaSpec::fp()).unwrap();
        let mut bt = BacktestConfig::new(SortScheme::Tercile);
        bt.min_assets = 30;
        let out = run_backtest(&ds, &betas, None, None, &bt).unwrap();
        let (dates, rets) = out.factor.valid_series(false);
        let table =
            badbeta_core::analytics::regression_table(&dates, &rets, &ds.aux, Default::default())
                .unwrap();
        let capm_alpha_t = table[0].t_stats[0];
        if capm_alpha_t.abs() < 2.0 {
            inside += 1;
        }
    }
    assert!(inside >= 90, "null economy |t| < 2 in only {inside}/100 seeds");
    report(
        &format!("criterion 6 (planted anomaly: t {t_stat:.1}, null {inside}/100)"),
        t0,
        Some(600.0),
    );
}

// Criterion 7: a planted 1% Roll-model half-spread over 2500 days is
// recovered within 10% (gibbs) and 25% (corwin-schultz, abdi-ranaldo)
// relative error in at least 45 of 50 seeds each.
#[test]
fn c07_spread_recovery() {
    let _guard = serial();
    let t0 = Instant::now();
    let planted = 0.01;
    let daily_vol = 0.012;
    let (mut g_ok, mut cs_ok, mut ar_ok) = (0, 0, 0);
    for seed in 0..50u64 {
        let mut rng = stream_rng(90_000 + seed, "acceptance-roll");
        let sim = simulate_roll_model(2500, daily_vol, planted, 1e5, &mut rng);
        let valid = vec![true; 2500];
        let g = gibbs_spread(&sim.close, &GibbsConfig::default(), seed)
            .unwrap()
            .half_spread;
        let cs = corwin_schultz_spread(&sim.high, &sim.low, &valid, 12).unwrap() / 2.0;
        let ar = abdi_ranaldo_spread(&sim.close, &sim.high, &sim.low, &valid, 12).unwrap() / 2.0;
        if ((g - planted) / planted).abs() < 0.10 {
            g_ok += 1;
        }
        if ((cs - planted) / planted).abs() < 0.25 {
            cs_ok += 1;
        }
        if ((ar - planted) / planted).abs() < 0.25 {
            ar_ok += 1;
        }
    }
    assert!(g_ok >= 45, "gibbs within 10% in only {g_ok}/50 seeds");
    assert!(cs_ok >= 45, "corwin-schultz within 25% in only {cs_ok}/50 seeds");
    assert!(ar_ok >= 45, "abdi-ranaldo within 25% in only {ar_ok}/50 seeds");
    report(
        &format!("criterion 7 (spread recovery: gibbs {g_ok}/50 cs {cs_ok}/50 chl {ar_ok}/50)"),
        t0,
        Some(300.0),
    );
}

// Criterion 8: net never exceeds gross, and an all-zero cost panel leaves
// net bit-identical to gross.
#[test]
fn c08_cost_monotonicity() {
    let _guard = serial();
    let t0 = Instant::now();
    let cfg = SynthConfig::default_market(100, 150, 88).with_planted_anomaly(0.002);
    let (ds, _) = generate_synthetic(&cfg).unwrap();
    let betas = build_beta_panel(&ds, None, &BetaSpec::fp()).unwrap();
    let costs = badbeta_core::tcost::build_cost_panel(
        &ds,
        &badbeta_core::tcost::CostSpec {
            gibbs_sweeps: 80,
            gibbs_burn: 20,
            seed: 3,
            ..Default::default()
        },
    );
    let mut bt = BacktestConfig::new(SortScheme::Tercile);
    bt.min_assets = 30;
    let out = run_backtest(&ds, &betas, None, Some(&costs), &bt).unwrap();
    let mut checked = 0;
    for t in 0..out.factor.dates.len() {
        if out.factor.mask[t] {
            assert!(
                out.factor.net[t] <= out.factor.gross[t],
                "net above gross at month {t}"
            );
            assert!(out.factor.cost_drag[t] >= 0.0);
            checked += 1;
        }
    }
    assert!(checked >= 24);

    // Zero panel: bitwise equality.
    let n_m = ds.calendar.n_months();
    let n_a = ds.assets.len();
    let zero = CostPanel {
        dates: ds.calendar.monthly_dates.clone(),
        assets: ds.assets.clone(),
        half_spread: Array2::zeros((n_m, n_a)),
        mask: Array2::from_elem((n_m, n_a), true),
        components: [(); 4].map(|_| Array2::zeros((n_m, n_a))),
    };
    let out0 = run_backtest(&ds, &betas, None, Some(&zero), &bt).unwrap();
    for t in 0..out0.factor.dates.len() {
        if out0.factor.mask[t] {
            assert_eq!(out0.factor.net[t].to_bits(), out0.factor.gross[t].to_bits());
        }
    }
    report("criterion 8 (cost monotonicity)", t0, None);
}

// Criterion 9: OLS matches an independent normal-equations accumulation to
// 1e-10 on 100 random problems, and nested R-squared is monotone on every
// emitted regression table.
#[test]
fn c09_regression_oracle() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut rng = stream_rng(1234, "acceptance-ols");
    for _ in 0..100 {
        let n = 30 + rng.random_range(0..300);
        let k = 1 + rng.random_range(0..6);
        let cols: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let named: Vec<(&str, &[f64])> = cols.iter().map(|c| ("x", c.as_slice())).collect();
        let res =
            badbeta_core::analytics::ols_regress(&y, &named, badbeta_core::analytics::SeType::Plain, "t")
                .unwrap();

        // Independent oracle: explicit cross products + Gauss-Jordan.
        let kk = k + 1;
        let mut a = vec![vec![0.0f64; kk + 1]; kk];
        for t in 0..n {
            let mut row = vec![1.0f64];
            for c in &cols {
                row.push(c[t]);
            }
            for i in 0..kk {
                for j in 0..kk {
                    a[i][j] += row[i] * row[j];
                }
                a[i][kk] += row[i] * y[t];
            }
        }
        for col in 0..kk {
            let piv = (col..kk)
                .max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())
                .unwrap();
            a.swap(col, piv);
            let d = a[col][col];
            for j in col..=kk {
                a[col][j] /= d;
            }
            for i in 0..kk {
                if i != col {
                    let f = a[i][col];
                    for j in col..=kk {
                        a[i][j] -= f * a[col][j];
                    }
                }
            }
        }
        for i in 0..kk {
            let gap = (res.coefficients[i] - a[i][kk]).abs();
            assert!(gap < 1e-10, "coefficient {i} off by {gap}");
        }
    }

    // Monotone nested R-squared on emitted tables.
    let dir = TempDir::new().unwrap();
    let cfg = pipeline_config(dir.path(), "fp,ols");
    Pipeline::new(cfg).unwrap().run().unwrap();
    for scheme in ["bab", "babb"] {
        for stream in ["gross", "net"] {
            let text =
                std::fs::read_to_string(dir.path().join(format!("table1_{scheme}_{stream}.csv")))
                    .unwrap();
            let r2_line = text
                .lines()
                .find(|l| l.starts_with("r_squared"))
                .expect("r_squared row");
            let r2: Vec<f64> = r2_line
                .split(',')
                .skip(1)
                .map(|v| v.parse().unwrap())
                .collect();
            // Columns: capm, ff3, carhart4, ff5, ff6.
            let tol = 1e-10;
            assert!(r2[0] <= r2[1] + tol, "{scheme}/{stream}: capm > ff3");
            assert!(r2[1] <= r2[2] + tol, "{scheme}/{stream}: ff3 > carhart4");
            assert!(r2[1] <= r2[3] + tol, "{scheme}/{stream}: ff3 > ff5");
            assert!(r2[3] <= r2[4] + tol, "{scheme}/{stream}: ff5 > ff6");
        }
    }
    report("criterion 9 (regression oracle)", t0, None);
}

fn pipeline_config(out: &Path, estimators: &str) -> RunConfig {
    let content = format!(
        "seed = 11\nout = {}\nsynth.n_assets = 40\nsynth.n_months = 150\nsynth.alpha_split = 0.003\n\
         sort.min_assets_tercile = 25\nsort.min_assets_double = 30\nsort.min_valid_months = 12\n\
         cost.gibbs_sweeps = 60\ncost.gibbs_burn = 20\ncost.vov_scale = 8.0\nreport.estimators = {estimators}\n",
        out.display()
    );
    RunConfig::from_str(&content, "acceptance-config", Path::new(".")).unwrap()
}

// Criterion 10: two binary invocations with identical configuration and
// seed produce byte-identical bundles, timestamp excluded.
#[test]
fn c10_run_determinism() {
    let _guard = serial();
    let t0 = Instant::now();
    let dir = TempDir::new().unwrap();
    let config_path = dir.path().join("run.cfg");
    std::fs::write(
        &config_path,
        "seed = 21\nsynth.n_assets = 40\nsynth.n_months = 140\nsynth.alpha_split = 0.003\n\
         sort.min_assets_tercile = 25\nsort.min_assets_double = 30\nsort.min_valid_months = 12\n\
         cost.gibbs_sweeps = 60\ncost.gibbs_burn = 20\ncost.vov_scale = 8.0\nreport.estimators = fp\n",
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_badbeta");
    for out in ["a", "b"] {
        let status = std::process::Command::new(bin)
            .args([
                "run",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                dir.path().join(out).to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success(), "run into {out} failed");
    }
    let strip = |text: &str| -> String {
        text.lines()
            .filter(|l| !l.contains("generated_at"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut compared = 0;
    for entry in std::fs::read_dir(dir.path().join("a")).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_dir() {
            continue;
        }
        let name = entry.file_name();
        let a = std::fs::read_to_string(entry.path()).unwrap();
        let b = std::fs::read_to_string(dir.path().join("b").join(&name)).unwrap();
        if name == "report.json" {
            assert_eq!(strip(&a), strip(&b), "report.json differs");
        } else {
            assert_eq!(a, b, "artifact {name:?} differs");
        }
        compared += 1;
    }
    assert!(compared >= 15, "only {compared} artifacts compared");
    report("criterion 10 (run determinism)", t0, None);
}

// Criterion 11: the engine emits every table and figure counterpart with
// the documented headers and shapes.
#[test]
fn c11_structural_reproduction() {
    let _guard = serial();
    let t0 = Instant::now();
    let dir = TempDir::new().unwrap();
    // All seven alternative signals on, both schemes, costs on.
    let cfg = pipeline_config(dir.path(), "fp,ols,ols3d,dimson,welch,vasicek,standard");
    Pipeline::new(cfg).unwrap().run().unwrap();

    let read = |name: &str| -> String {
        std::fs::read_to_string(dir.path().join(name))
            .unwrap_or_else(|_| panic!("missing artifact {name}"))
    };
    let header = |name: &str| -> String { read(name).lines().next().unwrap().to_string() };

    // Table 1 counterparts: four panels (factor x gross/net).
    for name in [
        "table1_bab_gross.csv",
        "table1_bab_net.csv",
        "table1_babb_gross.csv",
        "table1_babb_net.csv",
    ] {
        assert_eq!(header(name), "row,capm,ff3,carhart4,ff5,ff6");
        assert_eq!(read(name).lines().count(), 17, "{name} row count");
    }
    // Table 2 counterparts: per-sort regressions.
    let t2_header = "portfolio,xret,alpha,alpha_t,mkt,mkt_t,smb,smb_t,hml,hml_t,rmw,rmw_t,cma,cma_t,umd,umd_t,r_squared,n_obs";
    assert_eq!(header("table2_bab.csv"), t2_header);
    assert_eq!(read("table2_bab.csv").lines().count(), 1 + 3 + 2);
    assert_eq!(header("table2_babb.csv"), t2_header);
    assert_eq!(read("table2_babb.csv").lines().count(), 1 + 9 + 2);
    // Table 3 counterparts: per-bucket size, costs and turnover.
    assert_eq!(header("table3_bab.csv"), "portfolio,avg_n_stocks,tcost,turnover");
    assert_eq!(read("table3_bab.csv").lines().count(), 1 + 3);
    assert_eq!(read("table3_babb.csv").lines().count(), 1 + 9);
    // Figure data files.
    assert_eq!(
        header("news.csv"),
        "date,n_cf,n_dr,unexpected_mkt",
        "news header"
    );
    assert_eq!(header("fig2_beta_badbeta_scatter.csv"), "asset_id,avg_beta,avg_bad_beta");
    assert_eq!(
        header("fig2_leg_betas.csv"),
        "date,bab_beta_low,bab_beta_high,babb_beta_low,babb_beta_high"
    );
    assert_eq!(
        header("fig3_cumulative.csv"),
        "date,bab_gross,bab_net,babb_gross,babb_net"
    );
    assert_eq!(
        header("fig4_risk_return.csv"),
        "name,mean_ann,vol_ann,sharpe_ann,max_drawdown,n_months"
    );
    // Six aux factors plus gross/net rows for both schemes.
    assert_eq!(read("fig4_risk_return.csv").lines().count(), 1 + 6 + 4);
    assert_eq!(
        header("fig5_sharpe_by_estimator.csv"),
        "estimator,bab_gross,bab_net,babb_gross,babb_net"
    );
    assert_eq!(read("fig5_sharpe_by_estimator.csv").lines().count(), 1 + 7);
    assert_eq!(header("fig6_leverage.csv"), "date,bab,babb");
    // The report carries both factors plus the manifest.
    let report_json: serde_json::Value =
        serde_json::from_str(&read("report.json")).expect("report.json parses");
    assert!(report_json["factors"]["bab"]["gross"]["sharpe_ann"].is_number());
    assert!(report_json["factors"]["babb"]["gross"]["sharpe_ann"].is_number());
    assert!(report_json["input_hashes"].is_object());
    report("criterion 11 (structural reproduction)", t0, None);
}
