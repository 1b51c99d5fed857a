//! Run configuration.
//!
//! A run is described by a flat key-value text file with dotted section
//! keys (`section.key = value`, `#` comments). Exactly one data source is
//! configured: the four input CSV paths, or a synthetic economy.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::analytics::SeType;
use crate::beta::{BetaKind, BetaSpec};
use crate::error::{Error, Result};
use crate::portfolio::{BabbLegMode, SortScheme};
use crate::synth::SynthConfig;
use crate::tcost::CostSpec;

const KNOWN_KEYS: &[&str] = &[
    "mode",
    "seed",
    "out",
    "threads",
    "rho",
    "data.monthly",
    "data.daily",
    "data.states",
    "data.aux",
    "synth.n_assets",
    "synth.n_months",
    "synth.days_per_month",
    "synth.market_vol",
    "synth.idio_vol",
    "synth.beta_min",
    "synth.beta_max",
    "synth.alpha_split",
    "synth.spread_min",
    "synth.spread_max",
    "synth.intraday_steps",
    "synth.start_year",
    "var.min_obs",
    "var.first_estimation_months",
    "beta.signal",
    "beta.vol_window_years",
    "beta.corr_window_years",
    "beta.fp_overlap_days",
    "beta.window_years",
    "beta.dimson_lags",
    "beta.shrink_weight",
    "beta.shrink_target",
    "beta.welch_delta",
    "beta.cf_window_months",
    "beta.cf_min_months",
    "beta.cf_denominator",
    "beta.min_coverage",
    "beta.days_per_year",
    "sort.scheme",
    "sort.conditional",
    "sort.babb_legs",
    "sort.min_assets_tercile",
    "sort.min_assets_double",
    "sort.min_valid_months",
    "eligibility.min_price",
    "cost.enabled",
    "cost.window_months",
    "cost.gibbs_sweeps",
    "cost.gibbs_burn",
    "cost.vov_scale",
    "cost.min_components",
    "cost.cs_overnight_adjust",
    "cost.scale_by_leverage",
    "report.estimators",
    "report.se",
    "report.newey_west_lags",
];

/// Where the data comes from.
#[derive(Debug, Clone)]
pub enum DataMode {
    Files {
        monthly: PathBuf,
        daily: PathBuf,
        states: PathBuf,
        aux: PathBuf,
    },
    Synth(SynthConfig),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Raw parsed entries (echoed into the report manifest).
    pub raw: BTreeMap<String, String>,
    pub mode: DataMode,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub rho: f64,
    pub var_min_obs: usize,
    /// Months of burn-in before the first expanding-window estimate; zero
    /// means "as soon as var.min_obs allows".
    pub first_estimation_months: usize,
    pub beta_signal: BetaKind,
    pub beta_params: BetaParams,
    pub schemes: Vec<SortScheme>,
    pub conditional_sort: bool,
    pub babb_legs: BabbLegMode,
    pub min_assets_tercile: usize,
    pub min_assets_double: usize,
    pub min_valid_months: usize,
    pub min_price: f64,
    pub cost_enabled: bool,
    pub cost: CostSpec,
    pub scale_drag_by_leverage: bool,
    pub report_estimators: Vec<BetaKind>,
    pub se_type: SeType,
}

/// Estimator knobs shared by every beta spec this run builds.
#[derive(Debug, Clone)]
pub struct BetaParams {
    pub vol_window_years: f64,
    pub corr_window_years: f64,
    pub fp_overlap_days: usize,
    pub window_years: f64,
    pub dimson_lags: usize,
    pub shrink_weight: f64,
    pub shrink_target: f64,
    pub welch_delta: f64,
    pub cf_window_months: usize,
    pub cf_min_months: usize,
    pub cf_expanding_denominator: bool,
    pub min_coverage: f64,
    pub days_per_year: usize,
}

impl Default for BetaParams {
    fn default() -> Self {
        let d = BetaSpec::new(BetaKind::Standard);
        BetaParams {
            vol_window_years: d.vol_window_years,
            corr_window_years: d.corr_window_years,
            fp_overlap_days: d.fp_overlap_days,
            window_years: d.window_years,
            dimson_lags: d.dimson_lags,
            shrink_weight: d.shrink_weight,
            shrink_target: d.shrink_target,
            welch_delta: d.welch_delta,
            cf_window_months: d.cf_window_months,
            cf_min_months: d.cf_min_months,
            cf_expanding_denominator: d.cf_expanding_denominator,
            min_coverage: d.min_coverage,
            days_per_year: d.days_per_year,
        }
    }
}

/// Parse a flat key-value file into an ordered map.
pub fn parse_kv(content: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw_line) in content.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{origin}:{}: expected `key = value`, got {line:?}",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "{origin}:{}: unknown key {key:?}",
                lineno + 1
            )));
        }
        if out.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!(
                "{origin}:{}: duplicate key {key:?}",
                lineno + 1
            )));
        }
    }
    Ok(out)
}

struct Getter<'a> {
    map: &'a BTreeMap<String, String>,
}

impl<'a> Getter<'a> {
    fn str(&self, key: &str) -> Option<&'a str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("invalid value for {key}: {v:?}"))),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.map.get(key).map(|s| s.as_str()) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") | Some("on") => Ok(true),
            Some("false") | Some("0") | Some("no") | Some("off") => Ok(false),
            Some(v) => Err(Error::Config(format!("invalid boolean for {key}: {v:?}"))),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&content, &path.display().to_string(), base)
    }

    pub fn from_str(content: &str, origin: &str, base_dir: &Path) -> Result<RunConfig> {
        let raw = parse_kv(content, origin)?;
        let g = Getter { map: &raw };

        let seed: u64 = g.parse("seed", 0)?;
        let rho: f64 = g.parse("rho", crate::var_news::DEFAULT_RHO)?;
        if !(0.0 < rho && rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {rho}")));
        }

        let resolve = |p: &str| -> PathBuf {
            let pb = PathBuf::from(p);
            if pb.is_absolute() {
                pb
            } else {
                base_dir.join(pb)
            }
        };

        let file_keys = ["data.monthly", "data.daily", "data.states", "data.aux"];
        let has_files = file_keys.iter().any(|k| raw.contains_key(*k));
        let mode_key = g.str("mode").unwrap_or(if has_files { "files" } else { "synth" });
        let mode = match mode_key {
            "files" => {
                let mut paths = Vec::new();
                for k in file_keys {
                    let v = g
                        .str(k)
                        .ok_or_else(|| Error::Config(format!("files mode requires {k}")))?;
                    paths.push(resolve(v));
                }
                DataMode::Files {
                    monthly: paths[0].clone(),
                    daily: paths[1].clone(),
                    states: paths[2].clone(),
                    aux: paths[3].clone(),
                }
            }
            "synth" => {
                if has_files {
                    return Err(Error::Config(
                        "synth mode must not set data.* paths (exactly one source)".into(),
                    ));
                }
                let n_assets: usize = g.parse("synth.n_assets", 120)?;
                let n_months: usize = g.parse("synth.n_months", 240)?;
                let mut sc = SynthConfig::default_market(n_assets, n_months, seed);
                sc.days_per_month = g.parse("synth.days_per_month", sc.days_per_month)?;
                sc.market_vol = g.parse("synth.market_vol", sc.market_vol)?;
                sc.var_noise_cov = SynthConfig::default_noise_cov(sc.market_vol);
                let idio: f64 = g.parse("synth.idio_vol", 0.08)?;
                sc.idio_vol = vec![idio; n_assets];
                let beta_min: f64 = g.parse("synth.beta_min", 0.3)?;
                let beta_max: f64 = g.parse("synth.beta_max", 1.7)?;
                sc.true_betas = (0..n_assets)
                    .map(|i| {
                        if n_assets == 1 {
                            (beta_min + beta_max) / 2.0
                        } else {
                            beta_min + (beta_max - beta_min) * i as f64 / (n_assets - 1) as f64
                        }
                    })
                    .collect();
                let alpha_split: f64 = g.parse("synth.alpha_split", 0.0)?;
                if alpha_split != 0.0 {
                    sc = sc.with_planted_anomaly(alpha_split);
                }
                let s_min: f64 = g.parse("synth.spread_min", 0.002)?;
                let s_max: f64 = g.parse("synth.spread_max", 0.01)?;
                sc.roll_half_spread = (0..n_assets)
                    .map(|i| {
                        if n_assets == 1 {
                            (s_min * s_max).sqrt()
                        } else {
                            s_min * (s_max / s_min).powf(i as f64 / (n_assets - 1) as f64)
                        }
                    })
                    .collect();
                sc.intraday_steps = g.parse("synth.intraday_steps", sc.intraday_steps)?;
                sc.start_year = g.parse("synth.start_year", sc.start_year)?;
                sc.rho = rho;
                sc.seed = seed;
                DataMode::Synth(sc)
            }
            other => {
                return Err(Error::Config(format!(
                    "mode must be `files` or `synth`, got {other:?}"
                )))
            }
        };

        let beta_signal = BetaKind::parse(g.str("beta.signal").unwrap_or("fp"))?;
        let defaults = BetaParams::default();
        let beta_params = BetaParams {
            vol_window_years: g.parse("beta.vol_window_years", defaults.vol_window_years)?,
            corr_window_years: g.parse("beta.corr_window_years", defaults.corr_window_years)?,
            fp_overlap_days: g.parse("beta.fp_overlap_days", defaults.fp_overlap_days)?,
            window_years: g.parse("beta.window_years", defaults.window_years)?,
            dimson_lags: g.parse("beta.dimson_lags", defaults.dimson_lags)?,
            shrink_weight: g.parse("beta.shrink_weight", defaults.shrink_weight)?,
            shrink_target: g.parse("beta.shrink_target", defaults.shrink_target)?,
            welch_delta: g.parse("beta.welch_delta", defaults.welch_delta)?,
            cf_window_months: g.parse("beta.cf_window_months", defaults.cf_window_months)?,
            cf_min_months: g.parse("beta.cf_min_months", defaults.cf_min_months)?,
            cf_expanding_denominator: match g.str("beta.cf_denominator").unwrap_or("window") {
                "window" => false,
                "expanding" => true,
                other => {
                    return Err(Error::Config(format!(
                        "beta.cf_denominator must be window or expanding, got {other:?}"
                    )))
                }
            },
            min_coverage: g.parse("beta.min_coverage", defaults.min_coverage)?,
            days_per_year: g.parse("beta.days_per_year", defaults.days_per_year)?,
        };
        if !(0.0..=1.0).contains(&beta_params.shrink_weight) {
            return Err(Error::Config("beta.shrink_weight must lie in [0, 1]".into()));
        }

        let schemes = match g.str("sort.scheme").unwrap_or("both") {
            "bab" => vec![SortScheme::Tercile],
            "babb" => vec![SortScheme::Double3x3],
            "both" => vec![SortScheme::Tercile, SortScheme::Double3x3],
            other => {
                return Err(Error::Config(format!(
                    "sort.scheme must be bab, babb or both, got {other:?}"
                )))
            }
        };
        let babb_legs = match g.str("sort.babb_legs").unwrap_or("corner") {
            "corner" => BabbLegMode::Corner,
            "row_union" => BabbLegMode::RowUnion,
            other => {
                return Err(Error::Config(format!(
                    "sort.babb_legs must be corner or row_union, got {other:?}"
                )))
            }
        };

        let cost = CostSpec {
            window_months: g.parse("cost.window_months", 12)?,
            gibbs_sweeps: g.parse("cost.gibbs_sweeps", 1000)?,
            gibbs_burn: g.parse("cost.gibbs_burn", 200)?,
            vov_scale: g.parse("cost.vov_scale", 8.0e3)?,
            min_components: g.parse("cost.min_components", 2)?,
            cs_overnight_adjust: g.bool("cost.cs_overnight_adjust", false)?,
            min_gibbs_days: 60,
            min_pairs: 12,
            seed,
        };

        let estimators = match g.str("report.estimators") {
            None => BetaKind::market_kinds().to_vec(),
            Some("none") | Some("") => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|s| BetaKind::parse(s.trim()))
                .collect::<Result<Vec<_>>>()?,
        };
        for e in &estimators {
            if matches!(e, BetaKind::CashFlow | BetaKind::DiscountRate) {
                return Err(Error::Config(
                    "report.estimators lists market-beta signals only".into(),
                ));
            }
        }

        let se_type = match g.str("report.se").unwrap_or("white") {
            "white" => SeType::White,
            "plain" => SeType::Plain,
            "newey_west" => SeType::NeweyWest {
                lags: g.parse("report.newey_west_lags", 6)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "report.se must be white, plain or newey_west, got {other:?}"
                )))
            }
        };

        let cfg = RunConfig {
            mode,
            seed,
            out_dir: resolve(g.str("out").unwrap_or("out")),
            threads: g.parse("threads", 0)?,
            rho,
            var_min_obs: g.parse("var.min_obs", crate::var_news::DEFAULT_MIN_OBS)?,
            first_estimation_months: g.parse("var.first_estimation_months", 0)?,
            beta_signal,
            beta_params,
            schemes,
            conditional_sort: g.bool("sort.conditional", false)?,
            babb_legs,
            min_assets_tercile: g.parse("sort.min_assets_tercile", 30)?,
            min_assets_double: g.parse("sort.min_assets_double", 90)?,
            min_valid_months: g.parse("sort.min_valid_months", 24)?,
            min_price: g.parse("eligibility.min_price", 0.0)?,
            cost_enabled: g.bool("cost.enabled", true)?,
            cost,
            scale_drag_by_leverage: g.bool("cost.scale_by_leverage", true)?,
            report_estimators: estimators,
            se_type,
            raw,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply command-line overrides on top of the parsed file.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        out: Option<PathBuf>,
        scheme: Option<&str>,
        costs: Option<bool>,
    ) -> Result<()> {
        if let Some(seed) = seed {
            self.seed = seed;
            self.cost.seed = seed;
            if let DataMode::Synth(sc) = &mut self.mode {
                sc.seed = seed;
            }
            self.raw.insert("seed".into(), seed.to_string());
        }
        if let Some(out) = out {
            self.out_dir = out;
        }
        if let Some(scheme) = scheme {
            self.schemes = match scheme {
                "bab" => vec![SortScheme::Tercile],
                "babb" => vec![SortScheme::Double3x3],
                "both" => vec![SortScheme::Tercile, SortScheme::Double3x3],
                other => {
                    return Err(Error::Config(format!(
                        "--scheme must be bab, babb or both, got {other:?}"
                    )))
                }
            };
            self.raw.insert("sort.scheme".into(), scheme.to_string());
        }
        if let Some(costs) = costs {
            self.cost_enabled = costs;
            self.raw.insert("cost.enabled".into(), costs.to_string());
        }
        self.validate()
    }

    /// Static checks: the data source is coherent and referenced paths exist.
    pub fn validate(&self) -> Result<()> {
        match &self.mode {
            DataMode::Files {
                monthly,
                daily,
                states,
                aux,
            } => {
                for p in [monthly, daily, states, aux] {
                    if !p.exists() {
                        return Err(Error::Config(format!(
                            "input file does not exist: {}",
                            p.display()
                        )));
                    }
                }
            }
            DataMode::Synth(sc) => sc.validate()?,
        }
        if self.var_min_obs < 8 {
            return Err(Error::Config("var.min_obs must be at least 8".into()));
        }
        Ok(())
    }

    /// Beta spec for one estimator kind under this run's parameters.
    pub fn beta_spec(&self, kind: BetaKind) -> BetaSpec {
        let mut spec = BetaSpec::new(kind);
        let p = &self.beta_params;
        spec.vol_window_years = p.vol_window_years;
        spec.corr_window_years = p.corr_window_years;
        spec.fp_overlap_days = p.fp_overlap_days;
        spec.window_years = p.window_years;
        spec.dimson_lags = p.dimson_lags;
        spec.shrink_target = p.shrink_target;
        spec.welch_delta = p.welch_delta;
        spec.cf_window_months = p.cf_window_months;
        spec.cf_min_months = p.cf_min_months;
        spec.cf_expanding_denominator = p.cf_expanding_denominator;
        spec.min_coverage = p.min_coverage;
        spec.days_per_year = p.days_per_year;
        if kind == BetaKind::Standard {
            spec.shrink_weight = p.shrink_weight;
        }
        spec
    }

    /// Canonical strings describing the effective settings of each stage;
    /// stage cache keys hash these.
    pub fn stage_fingerprint(&self, stage: &str) -> String {
        match stage {
            "news" => format!(
                "rho={};min_obs={};first={}",
                self.rho, self.var_min_obs, self.first_estimation_months
            ),
            "betas" => {
                let p = &self.beta_params;
                format!(
                    "signal={};vol={};corr={};olap={};win={};lags={};w={};target={};delta={};cfw={};cfmin={};cfden={};cov={};dpy={};report={}",
                    self.beta_signal.name(),
                    p.vol_window_years,
                    p.corr_window_years,
                    p.fp_overlap_days,
                    p.window_years,
                    p.dimson_lags,
                    p.shrink_weight,
                    p.shrink_target,
                    p.welch_delta,
                    p.cf_window_months,
                    p.cf_min_months,
                    p.cf_expanding_denominator,
                    p.min_coverage,
                    p.days_per_year,
                    self.report_estimators
                        .iter()
                        .map(|k| k.name())
                        .collect::<Vec<_>>()
                        .join("+"),
                )
            }
            "costs" => format!(
                "enabled={};window={};sweeps={};burn={};vov={};min={};on={};seed={}",
                self.cost_enabled,
                self.cost.window_months,
                self.cost.gibbs_sweeps,
                self.cost.gibbs_burn,
                self.cost.vov_scale,
                self.cost.min_components,
                self.cost.cs_overnight_adjust,
                self.seed
            ),
            "factor" => format!(
                "schemes={};conditional={};legs={:?};min_t={};min_d={};min_months={};price={};lev={}",
                self.schemes.iter().map(|s| s.name()).collect::<Vec<_>>().join("+"),
                self.conditional_sort,
                self.babb_legs,
                self.min_assets_tercile,
                self.min_assets_double,
                self.min_valid_months,
                self.min_price,
                self.scale_drag_by_leverage
            ),
            "eval" => format!("se={:?}", self.se_type),
            other => panic!("unknown stage {other}"),
        }
    }

    /// The single source fingerprint: file bytes or the synthetic spec.
    pub fn input_hashes(&self) -> Result<BTreeMap<String, String>> {
        use sha2::{Digest, Sha256};
        let mut out = BTreeMap::new();
        match &self.mode {
            DataMode::Files {
                monthly,
                daily,
                states,
                aux,
            } => {
                for (name, p) in [
                    ("monthly", monthly),
                    ("daily", daily),
                    ("states", states),
                    ("aux", aux),
                ] {
                    let bytes = std::fs::read(p).map_err(|e| Error::Io {
                        path: p.display().to_string(),
                        source: e,
                    })?;
                    out.insert(name.to_string(), hex(&Sha256::digest(&bytes)));
                }
            }
            DataMode::Synth(sc) => {
                let canon = serde_json::to_string(sc)
                    .map_err(|e| Error::Config(format!("synth spec serialization: {e}")))?;
                out.insert("synth".to_string(), hex(&Sha256::digest(canon.as_bytes())));
            }
        }
        Ok(out)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
