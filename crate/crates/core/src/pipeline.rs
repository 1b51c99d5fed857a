//! Stage orchestration: ingest -> news -> betas -> costs -> factor -> eval.
//!
//! Each stage writes its artifacts under the output directory next to a
//! `cache/<stage>.key` fingerprint (content hashes of the inputs, the
//! effective stage configuration, and the upstream keys). A stage whose key
//! matches is reloaded from disk; a stale key triggers a recompute with a
//! notice. Artifacts are plain CSV so cached and cold runs are
//! byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use ndarray::Array2;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::align::{align, AlignedDataset, DropReport};
use crate::analytics::{
    cumulative_curve, perf_stats, regression_table, PerfStats, RegressionResult,
};
use crate::beta::{build_beta_panel, BetaKind, BetaPanel};
use crate::config::{hex, DataMode, RunConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::panel::FACTOR_COLUMNS;
use crate::portfolio::{
    run_backtest, BacktestConfig, FactorSeries, RunWarnings, SortScheme,
};
use crate::synth::{generate_synthetic, GroundTruth};
use crate::tcost::{build_cost_panel, CostPanel};
use crate::var_news::{expanding_news, NewsSeries};

pub const STAGES: [&str; 5] = ["news", "betas", "costs", "factor", "eval"];

pub struct Pipeline {
    pub cfg: RunConfig,
    pub dataset: AlignedDataset,
    pub truth: Option<GroundTruth>,
    input_hashes: BTreeMap<String, String>,
}

/// Everything the factor stage hands to eval.
pub struct FactorArtifacts {
    pub factors: BTreeMap<String, FactorSeries>,
    pub bucket_returns: BTreeMap<String, (Vec<NaiveDate>, Array2<f64>, Array2<bool>)>,
    /// (estimator, scheme) -> factor series for the sharpe-by-estimator data.
    pub by_estimator: BTreeMap<(String, String), FactorSeries>,
    pub warnings: BTreeMap<String, RunWarnings>,
}

#[derive(Debug, Serialize)]
pub struct AlignmentSummary {
    pub months: usize,
    pub days: usize,
    pub assets: usize,
    pub drops: DropReport,
}

#[derive(Debug, Serialize)]
pub struct FactorReport {
    pub months: usize,
    pub gross: PerfStats,
    pub net: Option<PerfStats>,
    pub regressions_gross: Vec<RegressionResult>,
    pub regressions_net: Option<Vec<RegressionResult>>,
    pub mean_leverage: f64,
    pub mean_turnover_low: f64,
    pub mean_turnover_high: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub generated_at: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub input_hashes: BTreeMap<String, String>,
    pub aligned: AlignmentSummary,
    pub factors: BTreeMap<String, FactorReport>,
    pub warnings: BTreeMap<String, RunWarnings>,
    pub artifacts: Vec<String>,
}

impl Pipeline {
    /// Ingest and align the configured data source.
    pub fn new(cfg: RunConfig) -> Result<Pipeline> {
        let input_hashes = cfg.input_hashes()?;
        let (dataset, truth) = match &cfg.mode {
            DataMode::Files {
                monthly,
                daily,
                states,
                aux,
            } => {
                let monthly = io::load_return_panel(monthly, crate::calendar::Frequency::Monthly)?;
                let daily = io::load_daily_panel(daily)?;
                let states = io::load_state_series(states)?;
                let aux = io::load_aux_series(aux)?;
                (align(&monthly, &daily, &states, &aux)?, None)
            }
            DataMode::Synth(sc) => {
                let (ds, truth) = generate_synthetic(sc)?;
                (ds, Some(truth))
            }
        };
        Ok(Pipeline {
            cfg,
            dataset,
            truth,
            input_hashes,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.out_dir
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn key_path(&self, stage: &str) -> PathBuf {
        self.cfg.out_dir.join("cache").join(format!("{stage}.key"))
    }

    fn upstream(stage: &str) -> &'static [&'static str] {
        match stage {
            "news" => &[],
            "betas" => &["news"],
            "costs" => &[],
            "factor" => &["news", "betas", "costs"],
            "eval" => &["news", "betas", "costs", "factor"],
            _ => &[],
        }
    }

    fn cache_key(&self, stage: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(stage.as_bytes());
        hasher.update(self.cfg.stage_fingerprint(stage).as_bytes());
        for (name, h) in &self.input_hashes {
            hasher.update(name.as_bytes());
            hasher.update(h.as_bytes());
        }
        for up in Self::upstream(stage) {
            hasher.update(self.cache_key(up).as_bytes());
        }
        hex(&hasher.finalize())
    }

    /// True when the stage's key matches and all its artifacts exist.
    fn fresh(&self, stage: &str, artifacts: &[String]) -> bool {
        let key_file = self.key_path(stage);
        match std::fs::read_to_string(&key_file) {
            Ok(stored) => {
                if stored.trim() != self.cache_key(stage) {
                    eprintln!("stage {stage}: stale cache, recomputing");
                    return false;
                }
                artifacts.iter().all(|a| self.path(a).exists())
            }
            Err(_) => false,
        }
    }

    fn mark(&self, stage: &str) -> Result<()> {
        io::write_text(&self.key_path(stage), &self.cache_key(stage))
    }

    fn beta_kinds(&self) -> Vec<BetaKind> {
        let mut kinds = vec![self.cfg.beta_signal, BetaKind::CashFlow];
        for k in &self.cfg.report_estimators {
            kinds.push(*k);
        }
        kinds.sort();
        kinds.dedup();
        kinds
    }

    fn first_estimation_date(&self) -> NaiveDate {
        let months = &self.dataset.calendar.monthly_dates;
        let idx = if self.cfg.first_estimation_months > 0 {
            self.cfg.first_estimation_months - 1
        } else {
            self.cfg.var_min_obs - 1
        };
        months[idx.min(months.len() - 1)]
    }

    // ----- news ---------------------------------------------------------

    pub fn ensure_news(&self) -> Result<NewsSeries> {
        let artifacts = vec!["news.csv".to_string()];
        if self.fresh("news", &artifacts) {
            return io::load_news(&self.path("news.csv"));
        }
        let news = expanding_news(
            &self.dataset.states,
            self.first_estimation_date(),
            self.cfg.rho,
            self.cfg.var_min_obs,
        )?;
        io::write_news(&self.path("news.csv"), &news)?;
        self.mark("news")?;
        Ok(news)
    }

    // ----- betas --------------------------------------------------------

    fn beta_artifact(&self, kind: BetaKind) -> String {
        format!("betas_{}.csv", kind.name())
    }

    pub fn ensure_betas(&self) -> Result<BTreeMap<BetaKind, BetaPanel>> {
        let kinds = self.beta_kinds();
        let mut artifacts: Vec<String> = kinds.iter().map(|k| self.beta_artifact(*k)).collect();
        artifacts.push("fig2_beta_badbeta_scatter.csv".to_string());
        if self.fresh("betas", &artifacts) {
            let mut out = BTreeMap::new();
            for kind in kinds {
                let panel = io::load_beta_panel(
                    &self.path(&self.beta_artifact(kind)),
                    &self.dataset.calendar.monthly_dates,
                    &self.dataset.assets,
                    self.cfg.beta_spec(kind),
                )?;
                out.insert(kind, panel);
            }
            return Ok(out);
        }
        let news = self.ensure_news()?;
        let mut out = BTreeMap::new();
        for kind in kinds {
            let spec = self.cfg.beta_spec(kind);
            let panel = build_beta_panel(&self.dataset, Some(&news), &spec)?;
            io::write_beta_panel(&self.path(&self.beta_artifact(kind)), &panel)?;
            out.insert(kind, panel);
        }
        self.write_scatter(&out)?;
        self.mark("betas")?;
        Ok(out)
    }

    /// Per-firm average beta against average bad beta.
    fn write_scatter(&self, panels: &BTreeMap<BetaKind, BetaPanel>) -> Result<()> {
        let signal = panels.get(&self.cfg.beta_signal);
        let bad = panels.get(&BetaKind::CashFlow);
        let mut out = String::from("asset_id,avg_beta,avg_bad_beta\n");
        if let (Some(signal), Some(bad)) = (signal, bad) {
            let a = signal.asset_means();
            let b = bad.asset_means();
            for (i, asset) in self.dataset.assets.iter().enumerate() {
                if let (Some(x), Some(y)) = (a[i], b[i]) {
                    out.push_str(&format!("{asset},{x},{y}\n"));
                }
            }
        }
        io::write_text(&self.path("fig2_beta_badbeta_scatter.csv"), &out)
    }

    // ----- costs --------------------------------------------------------

    pub fn ensure_costs(&self) -> Result<Option<CostPanel>> {
        if !self.cfg.cost_enabled {
            return Ok(None);
        }
        let artifacts = vec!["costs.csv".to_string()];
        if self.fresh("costs", &artifacts) {
            return Ok(Some(io::load_cost_panel(
                &self.path("costs.csv"),
                &self.dataset.calendar.monthly_dates,
                &self.dataset.assets,
            )?));
        }
        let panel = build_cost_panel(&self.dataset, &self.cfg.cost);
        io::write_cost_panel(&self.path("costs.csv"), &panel)?;
        self.mark("costs")?;
        Ok(Some(panel))
    }

    // ----- factor -------------------------------------------------------

    fn factor_artifacts(&self) -> Vec<String> {
        let mut a = Vec::new();
        for scheme in &self.cfg.schemes {
            a.push(format!("{}.csv", scheme.name()));
            a.push(format!("bucket_returns_{}.csv", scheme.name()));
            a.push(format!("table3_{}.csv", scheme.name()));
        }
        if !self.cfg.report_estimators.is_empty() {
            a.push("factors_by_estimator.csv".to_string());
        }
        a.push("run_warnings.json".to_string());
        a
    }

    fn backtest_config(&self, scheme: SortScheme) -> BacktestConfig {
        let mut bt = BacktestConfig::new(scheme);
        bt.babb_legs = self.cfg.babb_legs;
        bt.conditional_sort = self.cfg.conditional_sort;
        bt.min_assets = match scheme {
            SortScheme::Tercile => self.cfg.min_assets_tercile,
            SortScheme::Double3x3 => self.cfg.min_assets_double,
        };
        bt.scale_drag_by_leverage = self.cfg.scale_drag_by_leverage;
        bt.min_price = self.cfg.min_price;
        bt.min_valid_months = self.cfg.min_valid_months;
        bt
    }

    pub fn ensure_factor(&self) -> Result<FactorArtifacts> {
        let artifacts = self.factor_artifacts();
        if self.fresh("factor", &artifacts) {
            return self.load_factor_artifacts();
        }
        let panels = self.ensure_betas()?;
        let costs = self.ensure_costs()?;
        let signal = &panels[&self.cfg.beta_signal];
        let bad = &panels[&BetaKind::CashFlow];

        let mut out = FactorArtifacts {
            factors: BTreeMap::new(),
            bucket_returns: BTreeMap::new(),
            by_estimator: BTreeMap::new(),
            warnings: BTreeMap::new(),
        };

        for scheme in &self.cfg.schemes {
            let bt = self.backtest_config(*scheme);
            // The univariate sort must not condition eligibility on the
            // bad-beta panel.
            let bad_opt = match scheme {
                SortScheme::Tercile => None,
                SortScheme::Double3x3 => Some(bad),
            };
            let result = run_backtest(&self.dataset, signal, bad_opt, costs.as_ref(), &bt)?;
            let name = scheme.name().to_string();
            io::write_factor_series(&self.path(&format!("{name}.csv")), &result.factor)?;
            let cols: Vec<String> = (1..=scheme.n_buckets())
                .map(|b| format!("bucket_{b}"))
                .collect();
            io::write_dated_matrix(
                &self.path(&format!("bucket_returns_{name}.csv")),
                &cols,
                &self.dataset.calendar.monthly_dates,
                &result.bucket_returns,
                Some(&result.bucket_mask),
            )?;
            self.write_table3(&name, &result)?;
            out.warnings.insert(name.clone(), result.warnings.clone());
            out.bucket_returns.insert(
                name.clone(),
                (
                    self.dataset.calendar.monthly_dates.clone(),
                    result.bucket_returns.clone(),
                    result.bucket_mask.clone(),
                ),
            );
            out.factors.insert(name, result.factor);
        }

        // Sharpe-by-estimator inputs: rebuild both schemes under each
        // requested market signal, reusing the bad-beta panel.
        if !self.cfg.report_estimators.is_empty() {
            let mut body = String::from("estimator,scheme,date,gross,net\n");
            for kind in &self.cfg.report_estimators {
                let est_panel = &panels[kind];
                for scheme in &self.cfg.schemes {
                    let bt = self.backtest_config(*scheme);
                    let bad_opt = match scheme {
                        SortScheme::Tercile => None,
                        SortScheme::Double3x3 => Some(bad),
                    };
                    let series = if *kind == self.cfg.beta_signal {
                        out.factors[scheme.name()].clone()
                    } else {
                        match run_backtest(&self.dataset, est_panel, bad_opt, costs.as_ref(), &bt)
                        {
                            Ok(r) => r.factor,
                            Err(_) => continue, // an estimator may lack breadth
                        }
                    };
                    for t in 0..series.dates.len() {
                        if series.mask[t] {
                            body.push_str(&format!(
                                "{},{},{},{},{}\n",
                                kind.name(),
                                scheme.name(),
                                series.dates[t],
                                series.gross[t],
                                series.net[t]
                            ));
                        }
                    }
                    out.by_estimator
                        .insert((kind.name().to_string(), scheme.name().to_string()), series);
                }
            }
            io::write_text(&self.path("factors_by_estimator.csv"), &body)?;
        }

        let warn_json = serde_json::to_string_pretty(&out.warnings)
            .map_err(|e| Error::Numeric(format!("warnings serialization: {e}")))?;
        io::write_text(&self.path("run_warnings.json"), &warn_json)?;
        self.mark("factor")?;
        Ok(out)
    }

    fn write_table3(&self, name: &str, result: &crate::portfolio::BacktestOutput) -> Result<()> {
        let mut out = String::from("portfolio,avg_n_stocks,tcost,turnover\n");
        for b in 0..result.bucket_counts.len() {
            let tc = result.bucket_half_spread[b];
            let tv = result.bucket_turnover[b];
            out.push_str(&format!(
                "{},{},{},{}\n",
                b + 1,
                result.bucket_counts[b],
                if tc.is_finite() { tc.to_string() } else { String::new() },
                if tv.is_finite() { tv.to_string() } else { String::new() },
            ));
        }
        io::write_text(&self.path(&format!("table3_{name}.csv")), &out)
    }

    fn load_factor_artifacts(&self) -> Result<FactorArtifacts> {
        let mut out = FactorArtifacts {
            factors: BTreeMap::new(),
            bucket_returns: BTreeMap::new(),
            by_estimator: BTreeMap::new(),
            warnings: BTreeMap::new(),
        };
        let months = &self.dataset.calendar.monthly_dates;
        for scheme in &self.cfg.schemes {
            let name = scheme.name().to_string();
            let series =
                io::load_factor_series(&self.path(&format!("{name}.csv")), *scheme, months)?;
            let (_, dates, values, mask) =
                io::load_dated_matrix(&self.path(&format!("bucket_returns_{name}.csv")))?;
            out.bucket_returns.insert(name.clone(), (dates, values, mask));
            out.factors.insert(name, series);
        }
        if !self.cfg.report_estimators.is_empty() {
            let text = std::fs::read_to_string(self.path("factors_by_estimator.csv")).map_err(
                |e| Error::Io {
                    path: "factors_by_estimator.csv".into(),
                    source: e,
                },
            )?;
            let mut grouped: BTreeMap<(String, String), Vec<(NaiveDate, f64, f64)>> =
                BTreeMap::new();
            for line in text.lines().skip(1) {
                if line.trim().is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(Error::Schema {
                        path: "factors_by_estimator.csv".into(),
                        msg: format!("bad row {line:?}"),
                    });
                }
                let date = NaiveDate::parse_from_str(f[2], "%Y-%m-%d").map_err(|_| Error::Schema {
                    path: "factors_by_estimator.csv".into(),
                    msg: format!("bad date {:?}", f[2]),
                })?;
                grouped
                    .entry((f[0].to_string(), f[1].to_string()))
                    .or_default()
                    .push((
                        date,
                        f[3].parse().unwrap_or(f64::NAN),
                        f[4].parse().unwrap_or(f64::NAN),
                    ));
            }
            for ((est, scheme_name), rows) in grouped {
                let scheme = if scheme_name == "bab" {
                    SortScheme::Tercile
                } else {
                    SortScheme::Double3x3
                };
                let n = months.len();
                let mut series = FactorSeries {
                    scheme,
                    dates: months.clone(),
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
                };
                for (date, gross, net) in rows {
                    if let Ok(t) = months.binary_search(&date) {
                        series.mask[t] = true;
                        series.gross[t] = gross;
                        series.net[t] = net;
                    }
                }
                out.by_estimator.insert((est, scheme_name), series);
            }
        }
        let warn_text =
            std::fs::read_to_string(self.path("run_warnings.json")).map_err(|e| Error::Io {
                path: "run_warnings.json".into(),
                source: e,
            })?;
        out.warnings = serde_json::from_str(&warn_text)
            .map_err(|e| Error::Numeric(format!("warnings deserialization: {e}")))?;
        Ok(out)
    }

    // ----- eval ---------------------------------------------------------

    /// Run everything and produce the report bundle.
    pub fn run(&self) -> Result<Report> {
        let factor = self.ensure_factor()?;
        self.evaluate(&factor)
    }

    /// Run a single stage (computing missing upstream stages on demand).
    pub fn run_stage(&self, stage: &str) -> Result<()> {
        match stage {
            "news" => self.ensure_news().map(|_| ()),
            "betas" => self.ensure_betas().map(|_| ()),
            "costs" => self.ensure_costs().map(|_| ()),
            "factor" => self.ensure_factor().map(|_| ()),
            "eval" => self.run().map(|_| ()),
            other => Err(Error::Config(format!(
                "unknown stage {other:?}; expected one of {STAGES:?}"
            ))),
        }
    }

    fn evaluate(&self, fa: &FactorArtifacts) -> Result<Report> {
        let aux = &self.dataset.aux;
        let mut factors_report = BTreeMap::new();
        let mut artifacts = self.factor_artifacts();
        artifacts.extend([
            "news.csv".to_string(),
            "fig2_beta_badbeta_scatter.csv".to_string(),
        ]);

        for (name, series) in &fa.factors {
            let (dates_g, gross) = series.valid_series(false);
            let (_, net) = series.valid_series(true);
            let gross_stats = perf_stats(&gross)?;
            let reg_gross = regression_table(&dates_g, &gross, aux, self.cfg.se_type)?;
            let (net_stats, reg_net) = if self.cfg.cost_enabled {
                (
                    Some(perf_stats(&net)?),
                    Some(regression_table(&dates_g, &net, aux, self.cfg.se_type)?),
                )
            } else {
                (None, None)
            };

            self.write_table1(name, "gross", &reg_gross)?;
            artifacts.push(format!("table1_{name}_gross.csv"));
            if let Some(rn) = &reg_net {
                self.write_table1(name, "net", rn)?;
                artifacts.push(format!("table1_{name}_net.csv"));
            }
            self.write_table2(name, series, fa)?;
            artifacts.push(format!("table2_{name}.csv"));

            let masked_mean = |v: &[f64]| -> f64 {
                let mut s = 0.0;
                let mut n = 0usize;
                for t in 0..v.len() {
                    if series.mask[t] && v[t].is_finite() {
                        s += v[t];
                        n += 1;
                    }
                }
                if n > 0 {
                    s / n as f64
                } else {
                    f64::NAN
                }
            };
            factors_report.insert(
                name.clone(),
                FactorReport {
                    months: series.n_valid(),
                    gross: gross_stats,
                    net: net_stats,
                    regressions_gross: reg_gross,
                    regressions_net: reg_net,
                    mean_leverage: masked_mean(&series.leverage),
                    mean_turnover_low: masked_mean(&series.turnover_low),
                    mean_turnover_high: masked_mean(&series.turnover_high),
                },
            );
        }

        self.write_fig2(fa)?;
        self.write_fig3(fa)?;
        self.write_fig4(fa)?;
        self.write_fig5(fa)?;
        self.write_fig6(fa)?;
        artifacts.extend(
            [
                "fig2_leg_betas.csv",
                "fig3_cumulative.csv",
                "fig4_risk_return.csv",
                "fig5_sharpe_by_estimator.csv",
                "fig6_leverage.csv",
                "regression_tables.json",
                "report.json",
            ]
            .map(String::from),
        );
        artifacts.sort();
        artifacts.dedup();

        let regressions: BTreeMap<&String, &FactorReport> = factors_report.iter().collect();
        let reg_json = serde_json::to_string_pretty(&regressions)
            .map_err(|e| Error::Numeric(format!("regression serialization: {e}")))?;
        io::write_text(&self.path("regression_tables.json"), &reg_json)?;

        // Execution-environment keys (output location, worker count) do not
        // affect results and are omitted so identical runs from different
        // directories produce identical reports.
        let mut config_echo = self.cfg.raw.clone();
        config_echo.remove("out");
        config_echo.remove("threads");

        let report = Report {
            generated_at: chrono::Utc::now().to_rfc3339(),
            seed: self.cfg.seed,
            config: config_echo,
            input_hashes: self.input_hashes.clone(),
            aligned: AlignmentSummary {
                months: self.dataset.calendar.n_months(),
                days: self.dataset.calendar.n_days(),
                assets: self.dataset.assets.len(),
                drops: self.dataset.drops.clone(),
            },
            factors: factors_report,
            warnings: fa.warnings.clone(),
            artifacts,
        };
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Numeric(format!("report serialization: {e}")))?;
        io::write_text(&self.path("report.json"), &json)?;
        self.mark("eval")?;
        Ok(report)
    }

    /// Table-1-style panel: coefficient rows by model columns, alpha in
    /// percent per month, blanks where a factor is not in the model.
    fn write_table1(&self, name: &str, stream: &str, table: &[RegressionResult]) -> Result<()> {
        let mut out = String::from("row");
        for r in table {
            out.push(',');
            out.push_str(r.model);
        }
        out.push('\n');
        let mut push_row = |label: &str, cell: &dyn Fn(&RegressionResult) -> Option<f64>| {
            out.push_str(label);
            for r in table {
                out.push(',');
                if let Some(v) = cell(r) {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        };
        push_row("alpha", &|r| Some(r.alpha_pct()));
        push_row("alpha_t", &|r| Some(r.t_stats[0]));
        for factor in FACTOR_COLUMNS {
            let coef = move |r: &RegressionResult| {
                r.names.iter().position(|n| n == factor).map(|i| r.coefficients[i])
            };
            let tstat = move |r: &RegressionResult| {
                r.names.iter().position(|n| n == factor).map(|i| r.t_stats[i])
            };
            push_row(factor, &coef);
            push_row(&format!("{factor}_t"), &tstat);
        }
        push_row("r_squared", &|r| Some(r.r_squared));
        push_row("n_obs", &|r| Some(r.n_obs as f64));
        io::write_text(&self.path(&format!("table1_{name}_{stream}.csv")), &out)
    }

    /// Table-2-style sort regressions: per-bucket six-factor fits plus the
    /// factor itself gross and net.
    fn write_table2(&self, name: &str, series: &FactorSeries, fa: &FactorArtifacts) -> Result<()> {
        let aux = &self.dataset.aux;
        let (dates, values, mask) = &fa.bucket_returns[name];
        let mut out = String::from(
            "portfolio,xret,alpha,alpha_t,mkt,mkt_t,smb,smb_t,hml,hml_t,rmw,rmw_t,cma,cma_t,umd,umd_t,r_squared,n_obs\n",
        );
        let n_buckets = values.ncols();
        let mut write_row = |label: String, dates: &[NaiveDate], rets: &[f64]| -> Result<()> {
            if rets.len() < 24 {
                out.push_str(&format!("{label},,,,,,,,,,,,,,,,,\n"));
                return Ok(());
            }
            let mean_pct = 100.0 * rets.iter().sum::<f64>() / rets.len() as f64;
            let table = regression_table(dates, rets, aux, self.cfg.se_type)?;
            let ff6 = table.last().unwrap();
            out.push_str(&format!("{label},{mean_pct}"));
            out.push_str(&format!(",{},{}", ff6.alpha_pct(), ff6.t_stats[0]));
            for factor in FACTOR_COLUMNS {
                let idx = ff6.names.iter().position(|n| n == factor).unwrap();
                out.push_str(&format!(",{},{}", ff6.coefficients[idx], ff6.t_stats[idx]));
            }
            out.push_str(&format!(",{},{}\n", ff6.r_squared, ff6.n_obs));
            Ok(())
        };
        for b in 0..n_buckets {
            let mut ds = Vec::new();
            let mut rs = Vec::new();
            for t in 0..dates.len() {
                if mask[(t, b)] {
                    // Excess bucket return over the month's risk-free rate.
                    let ai = aux.dates.binary_search(&dates[t]).map_err(|_| {
                        Error::Alignment(format!("bucket month {} missing from aux", dates[t]))
                    })?;
                    ds.push(dates[t]);
                    rs.push(values[(t, b)] - aux.risk_free[ai]);
                }
            }
            write_row(format!("{}", b + 1), &ds, &rs)?;
        }
        let (dg, gross) = series.valid_series(false);
        write_row(format!("{name}_gross"), &dg, &gross)?;
        if self.cfg.cost_enabled {
            let (dn, net) = series.valid_series(true);
            write_row(format!("{name}_net"), &dn, &net)?;
        }
        io::write_text(&self.path(&format!("table2_{name}.csv")), &out)
    }

    fn scheme_columns(&self) -> Vec<String> {
        self.cfg.schemes.iter().map(|s| s.name().to_string()).collect()
    }

    fn write_fig2(&self, fa: &FactorArtifacts) -> Result<()> {
        let months = &self.dataset.calendar.monthly_dates;
        let schemes = self.scheme_columns();
        let mut cols = Vec::new();
        for s in &schemes {
            cols.push(format!("{s}_beta_low"));
            cols.push(format!("{s}_beta_high"));
        }
        let mut values = Array2::from_elem((months.len(), cols.len()), f64::NAN);
        let mut mask = Array2::from_elem((months.len(), cols.len()), false);
        for (si, s) in schemes.iter().enumerate() {
            let series = &fa.factors[s];
            for t in 0..months.len() {
                if series.mask[t] {
                    values[(t, 2 * si)] = series.beta_low[t];
                    values[(t, 2 * si + 1)] = series.beta_high[t];
                    mask[(t, 2 * si)] = true;
                    mask[(t, 2 * si + 1)] = true;
                }
            }
        }
        io::write_dated_matrix(
            &self.path("fig2_leg_betas.csv"),
            &cols,
            months,
            &values,
            Some(&mask),
        )
    }

    fn write_fig3(&self, fa: &FactorArtifacts) -> Result<()> {
        let months = &self.dataset.calendar.monthly_dates;
        let schemes = self.scheme_columns();
        let mut cols = Vec::new();
        for s in &schemes {
            cols.push(format!("{s}_gross"));
            cols.push(format!("{s}_net"));
        }
        let mut values = Array2::from_elem((months.len(), cols.len()), f64::NAN);
        let mut mask = Array2::from_elem((months.len(), cols.len()), false);
        for (si, s) in schemes.iter().enumerate() {
            let series = &fa.factors[s];
            for (net, col) in [(false, 2 * si), (true, 2 * si + 1)] {
                let (dates, rets) = series.valid_series(net);
                let curve = cumulative_curve(&rets);
                for (k, d) in dates.iter().enumerate() {
                    if let Ok(t) = months.binary_search(d) {
                        values[(t, col)] = curve[k];
                        mask[(t, col)] = true;
                    }
                }
            }
        }
        io::write_dated_matrix(
            &self.path("fig3_cumulative.csv"),
            &cols,
            months,
            &values,
            Some(&mask),
        )
    }

    fn write_fig4(&self, fa: &FactorArtifacts) -> Result<()> {
        let mut out = String::from("name,mean_ann,vol_ann,sharpe_ann,max_drawdown,n_months\n");
        let mut push = |name: &str, stats: Result<PerfStats>| {
            match stats {
                Ok(s) => out.push_str(&format!(
                    "{name},{},{},{},{},{}\n",
                    s.mean_ann, s.vol_ann, s.sharpe_ann, s.max_drawdown, s.n_months
                )),
                Err(_) => out.push_str(&format!("{name},,,,,\n")),
            };
        };
        for (j, factor) in FACTOR_COLUMNS.iter().enumerate() {
            let col: Vec<f64> = (0..self.dataset.aux.dates.len())
                .map(|t| self.dataset.aux.factors[(t, j)])
                .collect();
            push(factor, perf_stats(&col));
        }
        for (name, series) in &fa.factors {
            let (_, gross) = series.valid_series(false);
            push(&format!("{name}_gross"), perf_stats(&gross));
            if self.cfg.cost_enabled {
                let (_, net) = series.valid_series(true);
                push(&format!("{name}_net"), perf_stats(&net));
            }
        }
        io::write_text(&self.path("fig4_risk_return.csv"), &out)
    }

    fn write_fig5(&self, fa: &FactorArtifacts) -> Result<()> {
        let mut out = String::from("estimator,bab_gross,bab_net,babb_gross,babb_net\n");
        for kind in &self.cfg.report_estimators {
            let mut row = vec![kind.name().to_string()];
            for scheme in ["bab", "babb"] {
                for net in [false, true] {
                    let cell = fa
                        .by_estimator
                        .get(&(kind.name().to_string(), scheme.to_string()))
                        .and_then(|s| {
                            let (_, rets) = s.valid_series(net);
                            perf_stats(&rets).ok().map(|p| p.sharpe_ann)
                        });
                    row.push(cell.map(|v| v.to_string()).unwrap_or_default());
                }
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        io::write_text(&self.path("fig5_sharpe_by_estimator.csv"), &out)
    }

    fn write_fig6(&self, fa: &FactorArtifacts) -> Result<()> {
        let months = &self.dataset.calendar.monthly_dates;
        let cols = self.scheme_columns();
        let mut values = Array2::from_elem((months.len(), cols.len()), f64::NAN);
        let mut mask = Array2::from_elem((months.len(), cols.len()), false);
        for (si, s) in cols.iter().enumerate() {
            let series = &fa.factors[s];
            for t in 0..months.len() {
                if series.mask[t] {
                    values[(t, si)] = series.leverage[t];
                    mask[(t, si)] = true;
                }
            }
        }
        io::write_dated_matrix(
            &self.path("fig6_leverage.csv"),
            &cols,
            months,
            &values,
            Some(&mask),
        )
    }

    /// Emit the aligned dataset (and ground truth when synthetic) as the
    /// documented input CSVs.
    pub fn write_dataset(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
            let p = dir.join(name);
            f(&p)?;
            written.push(p);
            Ok(())
        };
        emit("monthly.csv", &|p| {
            io::write_return_panel(p, &self.dataset.monthly)
        })?;
        emit("daily.csv", &|p| io::write_daily_panel(p, &self.dataset.daily))?;
        emit("states.csv", &|p| {
            io::write_state_series(p, &self.dataset.states)
        })?;
        emit("aux.csv", &|p| io::write_aux_series(p, &self.dataset.aux))?;
        if let Some(truth) = &self.truth {
            emit("truth_news.csv", &|p| io::write_news(p, &truth.news))?;
            let mut betas = String::from("asset_id,true_beta,true_alpha,true_half_spread\n");
            for (i, asset) in self.dataset.assets.iter().enumerate() {
                betas.push_str(&format!(
                    "{asset},{},{},{}\n",
                    truth.true_betas[i], truth.true_alphas[i], truth.half_spreads[i]
                ));
            }
            emit("truth_assets.csv", &|p| io::write_text(p, &betas))?;
        }
        Ok(written)
    }
}
