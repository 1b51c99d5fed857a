//! CSV ingestion and export.
//!
//! All files are UTF-8, comma-delimited, `.` decimal separator. Input rows
//! must be sorted by date (rows sharing a date may appear in any asset
//! order); duplicate (date, asset) rows are rejected. Loaders report parse
//! failures with the offending line number.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;

use crate::calendar::Frequency;
use crate::error::{Error, Result};
use crate::panel::{AuxSeries, DailyMicroPanel, ReturnPanel, StateSeries, FACTOR_COLUMNS, STATE_COLUMNS};

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let f = File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    // Line numbers are 1-based and include the header.
    Ok(BufReader::new(f).lines().enumerate().map(|(i, l)| (i + 1, l)))
}

fn parse_date(s: &str, path: &Path, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| Error::Parse {
        path: path.display().to_string(),
        line,
        msg: format!("invalid date {s:?}, expected YYYY-MM-DD"),
    })
}

fn parse_num(s: &str, field: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        line,
        msg: format!("invalid {field} value {s:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Validation {
            path: path.display().to_string(),
            line,
            msg: format!("non-finite {field} value {s:?}"),
        });
    }
    Ok(v)
}

fn split_row<'a>(row: &'a str, n: usize, path: &Path, line: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != n {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line,
            msg: format!("expected {n} fields, got {}", fields.len()),
        });
    }
    Ok(fields)
}

fn check_header(row: &str, expected: &str, path: &Path) -> Result<()> {
    if row.trim() != expected {
        return Err(Error::Schema {
            path: path.display().to_string(),
            msg: format!("expected header {expected:?}, got {:?}", row.trim()),
        });
    }
    Ok(())
}

/// Accumulates long-format rows into a dense date x asset layout.
struct LongBuilder {
    dates: Vec<NaiveDate>,
    assets: BTreeMap<String, usize>,
    // (date idx, asset idx) -> row values
    cells: BTreeMap<(usize, usize), Vec<f64>>,
    // presence flag per cell (a cell may exist with missing numeric fields)
    present: BTreeMap<(usize, usize), bool>,
    path: String,
}

impl LongBuilder {
    fn new(path: &Path) -> Self {
        Self {
            dates: Vec::new(),
            assets: BTreeMap::new(),
            cells: BTreeMap::new(),
            present: BTreeMap::new(),
            path: path.display().to_string(),
        }
    }

    fn push(
        &mut self,
        date: NaiveDate,
        asset: &str,
        values: Vec<f64>,
        present: bool,
        line: usize,
    ) -> Result<()> {
        let ti = match self.dates.last() {
            None => {
                self.dates.push(date);
                0
            }
            Some(last) if date == *last => self.dates.len() - 1,
            Some(last) if date > *last => {
                self.dates.push(date);
                self.dates.len() - 1
            }
            Some(last) => {
                return Err(Error::Schema {
                    path: self.path.clone(),
                    msg: format!("unsorted dates at line {line}: {date} after {last}"),
                });
            }
        };
        let next_asset = self.assets.len();
        let ai = *self.assets.entry(asset.to_string()).or_insert(next_asset);
        if self.cells.insert((ti, ai), values).is_some() {
            return Err(Error::Schema {
                path: self.path.clone(),
                msg: format!("duplicate (date, asset) row at line {line}: {date}, {asset}"),
            });
        }
        self.present.insert((ti, ai), present);
        Ok(())
    }

    /// Sorted asset ids and a lookup from insertion index to sorted index.
    fn finish(self) -> (Vec<NaiveDate>, Vec<String>, BTreeMap<(usize, usize), Vec<f64>>, BTreeMap<(usize, usize), bool>) {
        let mut names: Vec<(String, usize)> = self.assets.into_iter().collect();
        names.sort();
        let mut remap = vec![0usize; names.len()];
        for (sorted_idx, (_, orig)) in names.iter().enumerate() {
            remap[*orig] = sorted_idx;
        }
        let assets: Vec<String> = names.into_iter().map(|(n, _)| n).collect();
        let cells = self
            .cells
            .into_iter()
            .map(|((t, a), v)| ((t, remap[a]), v))
            .collect();
        let present = self
            .present
            .into_iter()
            .map(|((t, a), v)| ((t, remap[a]), v))
            .collect();
        (self.dates, assets, cells, present)
    }
}

/// Load a long-format return panel (`date,asset_id,ret`). A blank `ret`
/// field leaves the cell masked out.
pub fn load_return_panel(path: &Path, frequency: Frequency) -> Result<ReturnPanel> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines.next().ok_or_else(|| Error::Schema {
        path: path.display().to_string(),
        msg: "empty file".into(),
    })?;
    let header = header.map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    check_header(&header, "date,asset_id,ret", path)?;

    let mut b = LongBuilder::new(path);
    for (line, row) in lines {
        let row = row.map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if row.trim().is_empty() {
            continue;
        }
        let fields = split_row(&row, 3, path, line)?;
        let date = parse_date(fields[0], path, line)?;
        let asset = fields[1].trim();
        if asset.is_empty() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                msg: "empty asset_id".into(),
            });
        }
        if fields[2].trim().is_empty() {
            b.push(date, asset, vec![f64::NAN], false, line)?;
        } else {
            let r = parse_num(fields[2], "ret", path, line)?;
            if r <= -1.0 {
                return Err(Error::Validation {
                    path: path.display().to_string(),
                    line,
                    msg: format!("return {r} for {asset} on {date} violates r > -1"),
                });
            }
            b.push(date, asset, vec![r], true, line)?;
        }
    }
    let (dates, assets, cells, present) = b.finish();
    if dates.is_empty() {
        return Err(Error::Schema {
            path: path.display().to_string(),
            msg: "no data rows".into(),
        });
    }
    let mut values = Array2::from_elem((dates.len(), assets.len()), f64::NAN);
    let mut mask = Array2::from_elem((dates.len(), assets.len()), false);
    for (key, v) in cells {
        if present[&key] {
            values[key] = v[0];
            mask[key] = true;
        }
    }
    let panel = ReturnPanel {
        frequency,
        dates,
        assets,
        values,
        mask,
    };
    panel.validate()?;
    Ok(panel)
}

/// Write a return panel in the long `date,asset_id,ret` schema. Only masked
/// cells are emitted; floats use the shortest round-trip representation so a
/// reload reproduces the panel bit-exactly.
pub fn write_return_panel(path: &Path, panel: &ReturnPanel) -> Result<()> {
    let mut out = String::from("date,asset_id,ret\n");
    for (t, date) in panel.dates.iter().enumerate() {
        for (i, asset) in panel.assets.iter().enumerate() {
            if panel.mask[(t, i)] {
                out.push_str(&format!("{date},{asset},{}\n", panel.values[(t, i)]));
            }
        }
    }
    write_text(path, &out)
}

/// Load the daily microstructure panel (`date,asset_id,close,high,low,volume`).
/// A row with any blank price field leaves the cell masked.
pub fn load_daily_panel(path: &Path) -> Result<DailyMicroPanel> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines.next().ok_or_else(|| Error::Schema {
        path: path.display().to_string(),
        msg: "empty file".into(),
    })?;
    let header = header.map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    check_header(&header, "date,asset_id,close,high,low,volume", path)?;

    let mut b = LongBuilder::new(path);
    for (line, row) in lines {
        let row = row.map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if row.trim().is_empty() {
            continue;
        }
        let fields = split_row(&row, 6, path, line)?;
        let date = parse_date(fields[0], path, line)?;
        let asset = fields[1].trim();
        if fields[2..].iter().any(|f| f.trim().is_empty()) {
            b.push(date, asset, vec![f64::NAN; 4], false, line)?;
            continue;
        }
        let close = parse_num(fields[2], "close", path, line)?;
        let high = parse_num(fields[3], "high", path, line)?;
        let low = parse_num(fields[4], "low", path, line)?;
        let volume = parse_num(fields[5], "volume", path, line)?;
        if close <= 0.0 || high <= 0.0 || low <= 0.0 {
            return Err(Error::Validation {
                path: path.display().to_string(),
                line,
                msg: format!("nonpositive price for {asset} on {date}"),
            });
        }
        if volume < 0.0 {
            return Err(Error::Validation {
                path: path.display().to_string(),
                line,
                msg: format!("negative volume for {asset} on {date}"),
            });
        }
        if low > close || close > high {
            return Err(Error::Validation {
                path: path.display().to_string(),
                line,
                msg: format!("low <= close <= high violated for {asset} on {date}"),
            });
        }
        b.push(date, asset, vec![close, high, low, volume], true, line)?;
    }
    let (dates, assets, cells, present) = b.finish();
    if dates.is_empty() {
        return Err(Error::Schema {
            path: path.display().to_string(),
            msg: "no data rows".into(),
        });
    }
    let shape = (dates.len(), assets.len());
    let mut close = Array2::from_elem(shape, f64::NAN);
    let mut high = Array2::from_elem(shape, f64::NAN);
    let mut low = Array2::from_elem(shape, f64::NAN);
    let mut volume = Array2::from_elem(shape, f64::NAN);
    let mut mask = Array2::from_elem(shape, false);
    for (key, v) in cells {
        if present[&key] {
            close[key] = v[0];
            high[key] = v[1];
            low[key] = v[2];
            volume[key] = v[3];
            mask[key] = true;
        }
    }
    let panel = DailyMicroPanel {
        dates,
        assets,
        close,
        high,
        low,
        volume,
        mask,
    };
    panel.validate()?;
    Ok(panel)
}

pub fn write_daily_panel(path: &Path, panel: &DailyMicroPanel) -> Result<()> {
    let mut out = String::from("date,asset_id,close,high,low,volume\n");
    for (t, date) in panel.dates.iter().enumerate() {
        for (i, asset) in panel.assets.iter().enumerate() {
            if panel.mask[(t, i)] {
                out.push_str(&format!(
                    "{date},{asset},{},{},{},{}\n",
                    panel.close[(t, i)],
                    panel.high[(t, i)],
                    panel.low[(t, i)],
                    panel.volume[(t, i)]
                ));
            }
        }
    }
    write_text(path, &out)
}

/// Load the monthly state series (`date,mkt_excess_log,yield_spread,cape,value_spread`).
pub fn load_state_series(path: &Path) -> Result<StateSeries> {
    let expected = format!("date,{}", STATE_COLUMNS.join(","));
    let (dates, rows) = load_wide(path, &expected, STATE_COLUMNS.len())?;
    let values = Array2::from_shape_vec((dates.len(), STATE_COLUMNS.len()), rows).unwrap();
    let s = StateSeries { dates, values };
    s.validate()?;
    Ok(s)
}

pub fn write_state_series(path: &Path, s: &StateSeries) -> Result<()> {
    let mut out = format!("date,{}\n", STATE_COLUMNS.join(","));
    for (t, date) in s.dates.iter().enumerate() {
        let row: Vec<String> = s.values.row(t).iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{date},{}\n", row.join(",")));
    }
    write_text(path, &out)
}

/// Load the auxiliary series (`date,rf,mkt,smb,hml,rmw,cma,umd`).
pub fn load_aux_series(path: &Path) -> Result<AuxSeries> {
    let expected = format!("date,rf,{}", FACTOR_COLUMNS.join(","));
    let (dates, rows) = load_wide(path, &expected, 1 + FACTOR_COLUMNS.len())?;
    let n = dates.len();
    let mut risk_free = Vec::with_capacity(n);
    let mut factors = Array2::zeros((n, FACTOR_COLUMNS.len()));
    for t in 0..n {
        risk_free.push(rows[t * 7]);
        for j in 0..FACTOR_COLUMNS.len() {
            factors[(t, j)] = rows[t * 7 + 1 + j];
        }
    }
    let a = AuxSeries {
        dates,
        risk_free,
        factors,
    };
    a.validate()?;
    Ok(a)
}

pub fn write_aux_series(path: &Path, a: &AuxSeries) -> Result<()> {
    let mut out = format!("date,rf,{}\n", FACTOR_COLUMNS.join(","));
    for (t, date) in a.dates.iter().enumerate() {
        let row: Vec<String> = a.factors.row(t).iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{date},{},{}\n", a.risk_free[t], row.join(",")));
    }
    write_text(path, &out)
}

/// Wide-format loader shared by the state and aux schemas: a date column
/// followed by `n_cols` numeric columns, strictly increasing dates.
fn load_wide(path: &Path, expected_header: &str, n_cols: usize) -> Result<(Vec<NaiveDate>, Vec<f64>)> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines.next().ok_or_else(|| Error::Schema {
        path: path.display().to_string(),
        msg: "empty file".into(),
    })?;
    let header = header.map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    check_header(&header, expected_header, path)?;
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for (line, row) in lines {
        let row = row.map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if row.trim().is_empty() {
            continue;
        }
        let fields = split_row(&row, n_cols + 1, path, line)?;
        let date = parse_date(fields[0], path, line)?;
        if let Some(last) = dates.last() {
            if date <= *last {
                return Err(Error::Schema {
                    path: path.display().to_string(),
                    msg: format!("unsorted or duplicate dates at line {line}: {date}"),
                });
            }
        }
        dates.push(date);
        for (j, f) in fields[1..].iter().enumerate() {
            rows.push(parse_num(f, &format!("column {}", j + 2), path, line)?);
        }
    }
    if dates.is_empty() {
        return Err(Error::Schema {
            path: path.display().to_string(),
            msg: "no data rows".into(),
        });
    }
    Ok((dates, rows))
}

/// News export: one row per month, blank fields where the month is masked.
pub fn write_news(path: &Path, news: &crate::var_news::NewsSeries) -> Result<()> {
    let mut out = String::from("date,n_cf,n_dr,unexpected_mkt\n");
    for t in 0..news.len() {
        if news.mask[t] {
            out.push_str(&format!(
                "{},{},{},{}\n",
                news.dates[t], news.cash_flow[t], news.discount_rate[t], news.unexpected_market[t]
            ));
        } else {
            out.push_str(&format!("{},,,\n", news.dates[t]));
        }
    }
    write_text(path, &out)
}

pub fn load_news(path: &Path) -> Result<crate::var_news::NewsSeries> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines.next().ok_or_else(|| Error::Schema {
        path: path.display().to_string(),
        msg: "empty file".into(),
    })?;
    let header = header.map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    check_header(&header, "date,n_cf,n_dr,unexpected_mkt", path)?;
    let mut news = crate::var_news::NewsSeries {
        dates: Vec::new(),
        mask: Vec::new(),
        cash_flow: Vec::new(),
        discount_rate: Vec::new(),
        unexpected_market: Vec::new(),
    };
    for (line, row) in lines {
        let row = row.map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if row.trim().is_empty() {
            continue;
        }
        let fields = split_row(&row, 4, path, line)?;
        let date = parse_date(fields[0], path, line)?;
        if let Some(last) = news.dates.last() {
            if date <= *last {
                return Err(Error::Schema {
                    path: path.display().to_string(),
                    msg: format!("unsorted dates at line {line}"),
                });
            }
        }
        news.dates.push(date);
        if fields[1..].iter().all(|f| f.trim().is_empty()) {
            news.mask.push(false);
            news.cash_flow.push(f64::NAN);
            news.discount_rate.push(f64::NAN);
            news.unexpected_market.push(f64::NAN);
        } else {
            news.mask.push(true);
            news.cash_flow.push(parse_num(fields[1], "n_cf", path, line)?);
            news.discount_rate.push(parse_num(fields[2], "n_dr", path, line)?);
            news
                .unexpected_market
                .push(parse_num(fields[3], "unexpected_mkt", path, line)?);
        }
    }
    Ok(news)
}

/// Beta panel export: masked cells only.
pub fn write_beta_panel(path: &Path, panel: &crate::beta::BetaPanel) -> Result<()> {
    let mut out = String::from("date,asset_id,beta\n");
    for (t, date) in panel.dates.iter().enumerate() {
        for (i, asset) in panel.assets.iter().enumerate() {
            if panel.mask[(t, i)] {
                out.push_str(&format!("{date},{asset},{}\n", panel.values[(t, i)]));
            }
        }
    }
    write_text(path, &out)
}

/// Rebuild a beta panel from its export, on the given calendar and universe.
pub fn load_beta_panel(
    path: &Path,
    dates: &[NaiveDate],
    assets: &[String],
    spec: crate::beta::BetaSpec,
) -> Result<crate::beta::BetaPanel> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines.next().ok_or_else(|| Error::Schema {
        path: path.display().to_string(),
        msg: "empty file".into(),
    })?;
    let header = header.map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    check_header(&header, "date,asset_id,beta", path)?;
    let mut values = Array2::from_elem((dates.len(), assets.len()), f64::NAN);
    let mut mask = Array2::from_elem((dates.len(), assets.len()), false);
    for (line, row) in lines {
        let row = row.map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if row.trim().is_empty() {
            continue;
        }
        let fields = split_row(&row, 3, path, line)?;
        let date = parse_date(fields[0], path, line)?;
        let t = dates.binary_search(&date).map_err(|_| Error::Schema {
            path: path.display().to_string(),
            msg: format!("date {date} not on the calendar (line {line})"),
        })?;
        let asset = fields[1].trim();
        let i = assets
            .binary_search_by(|a| a.as_str().cmp(asset))
            .map_err(|_| Error::Schema {
                path: path.display().to_string(),
                msg: format!("asset {asset} not in the universe (line {line})"),
            })?;
        values[(t, i)] = parse_num(fields[2], "beta", path, line)?;
        mask[(t, i)] = true;
    }
    Ok(crate::beta::BetaPanel {
        dates: dates.to_vec(),
        assets: assets.to_vec(),
        values,
        mask,
        spec,
    })
}

/// Cost panel export: rows for cells with any component; blank fields for
/// unavailable components, blank composite when the cell is masked.
pub fn write_cost_panel(path: &Path, panel: &crate::tcost::CostPanel) -> Result<()> {
    let mut out = String::from("date,asset_id,half_spread,gibbs,cs,chl,vov\n");
    let fmt = |v: f64| -> String {
        if v.is_nan() {
            String::new()
        } else {
            v.to_string()
        }
    };
    for (t, date) in panel.dates.iter().enumerate() {
        for (i, asset) in panel.assets.iter().enumerate() {
            let comps: Vec<f64> = (0..4).map(|k| panel.components[k][(t, i)]).collect();
            if panel.mask[(t, i)] || comps.iter().any(|v| !v.is_nan()) {
                let half = if panel.mask[(t, i)] {
                    panel.half_spread[(t, i)].to_string()
                } else {
                    String::new()
                };
                out.push_str(&format!(
                    "{date},{asset},{half},{},{},{},{}\n",
                    fmt(comps[0]),
                    fmt(comps[1]),
                    fmt(comps[2]),
                    fmt(comps[3])
                ));
            }
        }
    }
    write_text(path, &out)
}

pub fn load_cost_panel(
    path: &Path,
    dates: &[NaiveDate],
    assets: &[String],
) -> Result<crate::tcost::CostPanel> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines.next().ok_or_else(|| Error::Schema {
        path: path.display().to_string(),
        msg: "empty file".into(),
    })?;
    let header = header.map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    check_header(&header, "date,asset_id,half_spread,gibbs,cs,chl,vov", path)?;
    let shape = (dates.len(), assets.len());
    let mut half = Array2::from_elem(shape, f64::NAN);
    let mut mask = Array2::from_elem(shape, false);
    let mut components = [(); 4].map(|_| Array2::from_elem(shape, f64::NAN));
    for (line, row) in lines {
        let row = row.map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if row.trim().is_empty() {
            continue;
        }
        let fields = split_row(&row, 7, path, line)?;
        let date = parse_date(fields[0], path, line)?;
        let t = dates.binary_search(&date).map_err(|_| Error::Schema {
            path: path.display().to_string(),
            msg: format!("date {date} not on the calendar (line {line})"),
        })?;
        let asset = fields[1].trim();
        let i = assets
            .binary_search_by(|a| a.as_str().cmp(asset))
            .map_err(|_| Error::Schema {
                path: path.display().to_string(),
                msg: format!("asset {asset} not in the universe (line {line})"),
            })?;
        if !fields[2].trim().is_empty() {
            half[(t, i)] = parse_num(fields[2], "half_spread", path, line)?;
            mask[(t, i)] = true;
        }
        for k in 0..4 {
            let f = fields[3 + k];
            if !f.trim().is_empty() {
                components[k][(t, i)] = parse_num(f, "component", path, line)?;
            }
        }
    }
    Ok(crate::tcost::CostPanel {
        dates: dates.to_vec(),
        assets: assets.to_vec(),
        half_spread: half,
        mask,
        components,
    })
}

/// Factor series export in the documented column order; valid months only.
pub fn write_factor_series(path: &Path, f: &crate::portfolio::FactorSeries) -> Result<()> {
    let mut out =
        String::from("date,gross,net,beta_low,beta_high,leverage,turnover_low,turnover_high,cost_drag\n");
    for t in 0..f.dates.len() {
        if f.mask[t] {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                f.dates[t],
                f.gross[t],
                f.net[t],
                f.beta_low[t],
                f.beta_high[t],
                f.leverage[t],
                f.turnover_low[t],
                f.turnover_high[t],
                f.cost_drag[t]
            ));
        }
    }
    write_text(path, &out)
}

pub fn load_factor_series(
    path: &Path,
    scheme: crate::portfolio::SortScheme,
    dates: &[NaiveDate],
) -> Result<crate::portfolio::FactorSeries> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines.next().ok_or_else(|| Error::Schema {
        path: path.display().to_string(),
        msg: "empty file".into(),
    })?;
    let header = header.map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    check_header(
        &header,
        "date,gross,net,beta_low,beta_high,leverage,turnover_low,turnover_high,cost_drag",
        path,
    )?;
    let n = dates.len();
    let mut f = crate::portfolio::FactorSeries {
        scheme,
        dates: dates.to_vec(),
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
    for (line, row) in lines {
        let row = row.map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if row.trim().is_empty() {
            continue;
        }
        let fields = split_row(&row, 9, path, line)?;
        let date = parse_date(fields[0], path, line)?;
        let t = dates.binary_search(&date).map_err(|_| Error::Schema {
            path: path.display().to_string(),
            msg: format!("date {date} not on the calendar (line {line})"),
        })?;
        f.mask[t] = true;
        f.gross[t] = parse_num(fields[1], "gross", path, line)?;
        f.net[t] = parse_num(fields[2], "net", path, line)?;
        f.beta_low[t] = parse_num(fields[3], "beta_low", path, line)?;
        f.beta_high[t] = parse_num(fields[4], "beta_high", path, line)?;
        f.leverage[t] = parse_num(fields[5], "leverage", path, line)?;
        f.turnover_low[t] = parse_num(fields[6], "turnover_low", path, line)?;
        f.turnover_high[t] = parse_num(fields[7], "turnover_high", path, line)?;
        f.cost_drag[t] = parse_num(fields[8], "cost_drag", path, line)?;
    }
    Ok(f)
}

/// Generic wide matrix export with a date column; used for bucket returns
/// and plot data. Blank cells where the mask is unset.
pub fn write_dated_matrix(
    path: &Path,
    header_cols: &[String],
    dates: &[NaiveDate],
    values: &Array2<f64>,
    mask: Option<&Array2<bool>>,
) -> Result<()> {
    let mut out = format!("date,{}\n", header_cols.join(","));
    for (t, date) in dates.iter().enumerate() {
        let row: Vec<String> = (0..values.ncols())
            .map(|j| {
                let visible = mask.map(|m| m[(t, j)]).unwrap_or(true);
                if visible && values[(t, j)].is_finite() {
                    values[(t, j)].to_string()
                } else {
                    String::new()
                }
            })
            .collect();
        out.push_str(&format!("{date},{}\n", row.join(",")));
    }
    write_text(path, &out)
}

/// Load a wide dated matrix written by [`write_dated_matrix`].
pub fn load_dated_matrix(path: &Path) -> Result<(Vec<String>, Vec<NaiveDate>, Array2<f64>, Array2<bool>)> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines.next().ok_or_else(|| Error::Schema {
        path: path.display().to_string(),
        msg: "empty file".into(),
    })?;
    let header = header.map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let cols: Vec<String> = header.trim().split(',').skip(1).map(String::from).collect();
    let mut dates = Vec::new();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (line, row) in lines {
        let row = row.map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if row.trim().is_empty() {
            continue;
        }
        let fields = split_row(&row, cols.len() + 1, path, line)?;
        dates.push(parse_date(fields[0], path, line)?);
        let mut r = Vec::with_capacity(cols.len());
        for f in &fields[1..] {
            if f.trim().is_empty() {
                r.push(None);
            } else {
                r.push(Some(parse_num(f, "value", path, line)?));
            }
        }
        rows.push(r);
    }
    let mut values = Array2::from_elem((dates.len(), cols.len()), f64::NAN);
    let mut mask = Array2::from_elem((dates.len(), cols.len()), false);
    for (t, r) in rows.into_iter().enumerate() {
        for (j, cell) in r.into_iter().enumerate() {
            if let Some(v) = cell {
                values[(t, j)] = v;
                mask[(t, j)] = true;
            }
        }
    }
    Ok((cols, dates, values, mask))
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
    }
    let mut f = File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    f.write_all(content.as_bytes()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write_tmp(dir: &TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn loads_three_row_panel() {
        let dir = TempDir::new().unwrap();
        let p = write_tmp(
            &dir,
            "m.csv",
            "date,asset_id,ret\n2000-01-31,AAA,0.01\n2000-02-29,AAA,-0.02\n2000-03-31,AAA,0.005\n",
        );
        let panel = load_return_panel(&p, Frequency::Monthly).unwrap();
        assert_eq!(panel.dates.len(), 3);
        assert_eq!(panel.assets, vec!["AAA"]);
        assert!(panel.mask.iter().all(|&m| m));
        assert_eq!(panel.values[(0, 0)], 0.01);
        assert_eq!(panel.values[(1, 0)], -0.02);
        assert_eq!(panel.values[(2, 0)], 0.005);
    }

    #[test]
    fn blank_cell_is_masked() {
        let dir = TempDir::new().unwrap();
        let p = write_tmp(
            &dir,
            "m.csv",
            "date,asset_id,ret\n2000-01-31,AAA,0.01\n2000-01-31,BBB,\n2000-02-29,AAA,0.02\n2000-02-29,BBB,0.03\n",
        );
        let panel = load_return_panel(&p, Frequency::Monthly).unwrap();
        assert!(panel.mask[(0, 0)]);
        assert!(!panel.mask[(0, 1)]);
        assert!(panel.mask[(1, 1)]);
        assert_eq!(panel.values[(1, 1)], 0.03);
    }

    #[test]
    fn sub_minus_one_return_names_row() {
        let dir = TempDir::new().unwrap();
        let p = write_tmp(
            &dir,
            "m.csv",
            "date,asset_id,ret\n2000-01-31,AAA,0.01\n2000-02-29,AAA,-1.5\n",
        );
        match load_return_panel(&p, Frequency::Monthly) {
            Err(Error::Validation { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_row_names_line() {
        let dir = TempDir::new().unwrap();
        let p = write_tmp(&dir, "m.csv", "date,asset_id,ret\n2000-01-31,AAA,abc\n");
        match load_return_panel(&p, Frequency::Monthly) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_unsorted_rejected() {
        let dir = TempDir::new().unwrap();
        let dup = write_tmp(
            &dir,
            "dup.csv",
            "date,asset_id,ret\n2000-01-31,AAA,0.01\n2000-01-31,AAA,0.02\n",
        );
        assert!(matches!(
            load_return_panel(&dup, Frequency::Monthly),
            Err(Error::Schema { .. })
        ));
        let unsorted = write_tmp(
            &dir,
            "uns.csv",
            "date,asset_id,ret\n2000-02-29,AAA,0.01\n2000-01-31,AAA,0.02\n",
        );
        assert!(matches!(
            load_return_panel(&unsorted, Frequency::Monthly),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = TempDir::new().unwrap();
        let p = write_tmp(
            &dir,
            "m.csv",
            "date,asset_id,ret\n2000-01-31,AAA,0.010000000000000002\n2000-01-31,BBB,-0.5\n2000-02-29,AAA,1e-17\n",
        );
        let panel = load_return_panel(&p, Frequency::Monthly).unwrap();
        let q = dir.path().join("rt.csv");
        write_return_panel(&q, &panel).unwrap();
        let reloaded = load_return_panel(&q, Frequency::Monthly).unwrap();
        assert_eq!(panel, reloaded);
    }

    #[test]
    fn daily_panel_checks_price_ordering() {
        let dir = TempDir::new().unwrap();
        let p = write_tmp(
            &dir,
            "d.csv",
            "date,asset_id,close,high,low,volume\n2000-01-03,AAA,10.0,9.0,8.0,100\n",
        );
        assert!(matches!(load_daily_panel(&p), Err(Error::Validation { .. })));
    }

    #[test]
    fn state_and_aux_round_trip() {
        let dir = TempDir::new().unwrap();
        let s = write_tmp(
            &dir,
            "s.csv",
            "date,mkt_excess_log,yield_spread,cape,value_spread\n2000-01-31,0.01,0.02,25.5,1.5\n2000-02-29,-0.03,0.021,25.1,1.48\n",
        );
        let states = load_state_series(&s).unwrap();
        assert_eq!(states.values[(1, 0)], -0.03);
        let sp = dir.path().join("s2.csv");
        write_state_series(&sp, &states).unwrap();
        assert_eq!(states, load_state_series(&sp).unwrap());

        let a = write_tmp(
            &dir,
            "a.csv",
            "date,rf,mkt,smb,hml,rmw,cma,umd\n2000-01-31,0.004,0.01,0.002,0.001,0.0,0.003,-0.01\n",
        );
        let aux = load_aux_series(&a).unwrap();
        assert_eq!(aux.risk_free[0], 0.004);
        assert_eq!(aux.factors[(0, 5)], -0.01);
        let ap = dir.path().join("a2.csv");
        write_aux_series(&ap, &aux).unwrap();
        assert_eq!(aux, load_aux_series(&ap).unwrap());
    }
}
