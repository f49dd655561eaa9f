//! Panel ingestion, per-series transformations, standardization and
//! expanding-window planning.
//!
//! Dates are plain `(year, quarter)` pairs. The CSV layout is one header row
//! of series ids with the date in the first column; FRED-QD style metadata
//! rows (`factors`, `transform`) directly below the header are skipped.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Quarter {
    pub year: i32,
    /// 1..=4
    pub quarter: u8,
}

impl Quarter {
    pub fn new(year: i32, quarter: u8) -> Self {
        assert!((1..=4).contains(&quarter), "quarter must be in 1..=4");
        Quarter { year, quarter }
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        Quarter {
            year: ord.div_euclid(4) as i32,
            quarter: (ord.rem_euclid(4) + 1) as u8,
        }
    }

    /// Shifts by a signed number of quarters.
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, quarters: i64) -> Self {
        Self::from_ordinal(self.ordinal() + quarters)
    }

    pub fn next(self) -> Self {
        self.add(1)
    }

    pub fn prev(self) -> Self {
        self.add(-1)
    }

    /// Signed number of quarters from `self` to `other`.
    pub fn quarters_until(self, other: Quarter) -> i64 {
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

impl From<Quarter> for String {
    fn from(q: Quarter) -> String {
        q.to_string()
    }
}

impl TryFrom<String> for Quarter {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for Quarter {
    type Err = Error;

    /// Accepts `1960Q1`, `1960-Q1`, `1960:1`, ISO `1960-03-01` and FRED's `3/1/1960`.
    fn from_str(s: &str) -> Result<Self> {
        let raw = s.trim();
        let bad = || Error::UnparseableDate(raw.to_string());
        let upper = raw.to_ascii_uppercase();
        let month_to_quarter = |m: u32| -> Result<u8> {
            if (1..=12).contains(&m) {
                Ok(((m - 1) / 3 + 1) as u8)
            } else {
                Err(bad())
            }
        };
        if let Some(pos) = upper.find('Q') {
            let year: i32 = upper[..pos].trim_end_matches(['-', ' ']).parse().map_err(|_| bad())?;
            let q: u8 = upper[pos + 1..].parse().map_err(|_| bad())?;
            if !(1..=4).contains(&q) {
                return Err(bad());
            }
            return Ok(Quarter { year, quarter: q });
        }
        if let Some((y, q)) = upper.split_once(':') {
            let year: i32 = y.parse().map_err(|_| bad())?;
            let q: u8 = q.parse().map_err(|_| bad())?;
            if !(1..=4).contains(&q) {
                return Err(bad());
            }
            return Ok(Quarter { year, quarter: q });
        }
        let parts: Vec<&str> = upper.split(['-', '/']).collect();
        if parts.len() == 3 {
            if upper.contains('/') {
                // month/day/year
                let m: u32 = parts[0].parse().map_err(|_| bad())?;
                let year: i32 = parts[2].parse().map_err(|_| bad())?;
                return Ok(Quarter { year, quarter: month_to_quarter(m)? });
            }
            let year: i32 = parts[0].parse().map_err(|_| bad())?;
            let m: u32 = parts[1].parse().map_err(|_| bad())?;
            return Ok(Quarter { year, quarter: month_to_quarter(m)? });
        }
        Err(bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransformCode {
    NoTransform,
    Log,
    DiffLog100,
}

impl FromStr for TransformCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "notransform" | "level" | "1" => Ok(TransformCode::NoTransform),
            "log" | "4" => Ok(TransformCode::Log),
            "difflog100" | "dlog" | "5" => Ok(TransformCode::DiffLog100),
            other => Err(Error::InvalidConfig(format!("unknown transform code {other:?}"))),
        }
    }
}

/// Rectangular quarterly panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub names: Vec<String>,
    pub times: Vec<Quarter>,
    /// n x p
    pub values: DMatrix<f64>,
    pub transform: Vec<TransformCode>,
    /// Per-series `(mean, sd)` if the values are standardized.
    pub standardization: Option<Vec<(f64, f64)>>,
}

impl Panel {
    pub fn new(
        names: Vec<String>,
        times: Vec<Quarter>,
        values: DMatrix<f64>,
        transform: Vec<TransformCode>,
    ) -> Result<Self> {
        if values.nrows() != times.len() || values.ncols() != names.len() || transform.len() != names.len() {
            return Err(Error::DimensionMismatch(format!(
                "panel values {}x{}, {} dates, {} names, {} transforms",
                values.nrows(),
                values.ncols(),
                times.len(),
                names.len(),
                transform.len()
            )));
        }
        for w in times.windows(2) {
            if w[0].quarters_until(w[1]) != 1 {
                return Err(Error::RaggedPanel(format!("dates {} and {} are not consecutive quarters", w[0], w[1])));
            }
        }
        Ok(Panel { names, times, values, transform, standardization: None })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn index_of(&self, date: Quarter) -> Option<usize> {
        let first = *self.times.first()?;
        let idx = first.quarters_until(date);
        (idx >= 0 && (idx as usize) < self.n()).then_some(idx as usize)
    }

    /// Rows `start..=end` as a new panel (standardization dropped).
    pub fn slice_rows(&self, start: usize, end: usize) -> Panel {
        let rows = end + 1 - start;
        Panel {
            names: self.names.clone(),
            times: self.times[start..=end].to_vec(),
            values: self.values.rows(start, rows).into_owned(),
            transform: self.transform.clone(),
            standardization: None,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (t, date) in self.times.iter().enumerate() {
            let mut row = vec![date.to_string()];
            row.extend((0..self.p()).map(|j| format!("{:?}", self.values[(t, j)])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a panel written by [`Panel::write_csv`]; all series are taken as-is.
    pub fn read_csv<R: Read>(reader: R) -> Result<Panel> {
        let (names, times, cols) = read_columns(reader)?;
        let p = names.len();
        let transform = vec![TransformCode::NoTransform; p];
        let spec: Vec<(String, TransformCode)> = names.iter().cloned().zip(transform).collect();
        balanced_panel(&names, &times, &cols, &spec)
    }
}

type Columns = (Vec<String>, Vec<Quarter>, Vec<Vec<Option<f64>>>);

fn read_columns<R: Read>(reader: R) -> Result<Columns> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<String> = headers.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut times = Vec::new();
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for record in rdr.records() {
        let record = record?;
        let first = record.get(0).unwrap_or("").trim();
        if first.is_empty() {
            continue;
        }
        let lower = first.to_ascii_lowercase();
        if lower == "factors" || lower == "transform" {
            continue;
        }
        times.push(first.parse::<Quarter>()?);
        for (j, col) in cols.iter_mut().enumerate() {
            let cell = record.get(j + 1).unwrap_or("").trim();
            let v = match cell {
                "" | "NA" | "NaN" | "nan" | "." => None,
                s => Some(s.parse::<f64>().map_err(|_| {
                    Error::RaggedPanel(format!("unparseable value {s:?} in column {}", names[j]))
                })?),
            };
            col.push(v.filter(|x| x.is_finite()));
        }
    }
    Ok((names, times, cols))
}

fn balanced_panel(
    names: &[String],
    times: &[Quarter],
    cols: &[Vec<Option<f64>>],
    spec: &[(String, TransformCode)],
) -> Result<Panel> {
    if spec.is_empty() {
        return Err(Error::MissingSeries("no series requested".into()));
    }
    let mut selected = Vec::with_capacity(spec.len());
    for (id, _) in spec {
        let j = names
            .iter()
            .position(|n| n == id)
            .ok_or_else(|| Error::MissingSeries(id.clone()))?;
        selected.push(j);
    }
    let row_complete = |t: usize| selected.iter().all(|&j| cols[j][t].is_some());
    let first = (0..times.len()).find(|&t| row_complete(t));
    let last = (0..times.len()).rev().find(|&t| row_complete(t));
    let (first, last) = match (first, last) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::RaggedPanel("no complete row".into())),
    };
    if let Some(t) = (first..=last).find(|&t| !row_complete(t)) {
        return Err(Error::RaggedPanel(format!("missing value inside sample at {}", times[t])));
    }
    let n = last + 1 - first;
    let values = DMatrix::from_fn(n, selected.len(), |t, k| cols[selected[k]][first + t].unwrap());
    Panel::new(
        spec.iter().map(|(id, _)| id.clone()).collect(),
        times[first..=last].to_vec(),
        values,
        spec.iter().map(|(_, c)| *c).collect(),
    )
}

/// Loads the requested series (in `spec` order) as a raw, untransformed panel.
pub fn load_csv_panel(path: impl AsRef<Path>, spec: &[(String, TransformCode)]) -> Result<Panel> {
    if spec.is_empty() {
        return Err(Error::MissingSeries("no series requested".into()));
    }
    let file = std::fs::File::open(path)?;
    let (names, times, cols) = read_columns(file)?;
    balanced_panel(&names, &times, &cols, spec)
}

pub fn apply_transform(series: &[f64], code: TransformCode) -> Result<Vec<f64>> {
    let check_positive = || -> Result<()> {
        match series.iter().find(|&&x| !(x > 0.0)) {
            Some(&x) => Err(Error::NonPositiveValue { series: String::new(), value: x }),
            None => Ok(()),
        }
    };
    match code {
        TransformCode::NoTransform => Ok(series.to_vec()),
        TransformCode::Log => {
            check_positive()?;
            Ok(series.iter().map(|x| x.ln()).collect())
        }
        TransformCode::DiffLog100 => {
            check_positive()?;
            Ok(series.windows(2).map(|w| 100.0 * (w[1].ln() - w[0].ln())).collect())
        }
    }
}

/// Inverse of `DiffLog100` given the first level.
pub fn undo_diff_log100(growth: &[f64], anchor: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(growth.len() + 1);
    out.push(anchor);
    let mut log_level = anchor.ln();
    for g in growth {
        log_level += g / 100.0;
        out.push(log_level.exp());
    }
    out
}

/// Applies each series' transform code. If any series is differenced, the
/// first observation is dropped from all series so the panel stays balanced.
pub fn transform_panel(panel: &Panel) -> Result<Panel> {
    let drop_first = panel.transform.contains(&TransformCode::DiffLog100);
    let offset = usize::from(drop_first);
    let n = panel.n() - offset;
    let mut values = DMatrix::zeros(n, panel.p());
    for (j, code) in panel.transform.iter().enumerate() {
        let col: Vec<f64> = panel.values.column(j).iter().copied().collect();
        let out = apply_transform(&col, *code).map_err(|e| match e {
            Error::NonPositiveValue { value, .. } => Error::NonPositiveValue { series: panel.names[j].clone(), value },
            other => other,
        })?;
        let skip = out.len() - n;
        for t in 0..n {
            values[(t, j)] = out[t + skip];
        }
    }
    Ok(Panel {
        names: panel.names.clone(),
        times: panel.times[offset..].to_vec(),
        values,
        transform: panel.transform.clone(),
        standardization: None,
    })
}

pub fn column_mean_sd(col: &[f64]) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Centers and scales each column (sample sd, n-1 denominator).
pub fn standardize_panel(panel: &Panel) -> Result<Panel> {
    let mut out = panel.clone();
    let mut stats = Vec::with_capacity(panel.p());
    for j in 0..panel.p() {
        let col: Vec<f64> = panel.values.column(j).iter().copied().collect();
        let (mean, sd) = column_mean_sd(&col);
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::ConstantSeries(panel.names[j].clone()));
        }
        for t in 0..panel.n() {
            out.values[(t, j)] = (panel.values[(t, j)] - mean) / sd;
        }
        stats.push((mean, sd));
    }
    out.standardization = Some(stats);
    Ok(out)
}

/// Undoes [`standardize_panel`]; a panel without recorded statistics is returned unchanged.
pub fn destandardize_panel(panel: &Panel) -> Panel {
    let mut out = panel.clone();
    if let Some(stats) = &panel.standardization {
        for (j, &(mean, sd)) in stats.iter().enumerate() {
            for t in 0..panel.n() {
                out.values[(t, j)] = mean + sd * panel.values[(t, j)];
            }
        }
    }
    out.standardization = None;
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub start: Quarter,
    pub first_origin: Quarter,
    pub origins: Vec<Quarter>,
    pub horizons: Vec<usize>,
    /// Last date with a realized observation.
    pub last: Quarter,
}

impl WindowPlan {
    /// Horizons with a realized target for the given origin.
    pub fn scored_horizons(&self, origin: Quarter) -> Vec<usize> {
        let room = origin.quarters_until(self.last);
        self.horizons.iter().copied().filter(|&h| (h as i64) <= room).collect()
    }

    pub fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }
}

pub fn plan_expanding_windows(panel: &Panel, first_origin: Quarter, max_horizon: usize) -> Result<WindowPlan> {
    if max_horizon == 0 {
        return Err(Error::InvalidConfig("max_horizon must be at least 1".into()));
    }
    let (start, last) = match (panel.times.first(), panel.times.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::OriginOutOfRange("empty panel".into())),
    };
    if first_origin < start || first_origin >= last {
        return Err(Error::OriginOutOfRange(format!(
            "first origin {first_origin} must lie in [{start}, {})",
            last
        )));
    }
    let count = first_origin.quarters_until(last) as usize;
    let origins = (0..count).map(|i| first_origin.add(i as i64)).collect();
    Ok(WindowPlan {
        start,
        first_origin,
        origins,
        horizons: (1..=max_horizon).collect(),
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(y: i32, k: u8) -> Quarter {
        Quarter::new(y, k)
    }

    #[test]
    fn parses_date_formats() {
        assert_eq!("1960Q1".parse::<Quarter>().unwrap(), q(1960, 1));
        assert_eq!("1999-Q4".parse::<Quarter>().unwrap(), q(1999, 4));
        assert_eq!("2024-09-01".parse::<Quarter>().unwrap(), q(2024, 3));
        assert_eq!("6/1/1960".parse::<Quarter>().unwrap(), q(1960, 2));
        assert!(matches!("not a date".parse::<Quarter>(), Err(Error::UnparseableDate(_))));
        assert!(matches!("1960Q5".parse::<Quarter>(), Err(Error::UnparseableDate(_))));
    }

    #[test]
    fn quarter_arithmetic() {
        assert_eq!(q(1999, 4).next(), q(2000, 1));
        assert_eq!(q(2000, 1).prev(), q(1999, 4));
        assert_eq!(q(1960, 1).quarters_until(q(1999, 4)), 159);
    }

    #[test]
    fn transforms() {
        assert_eq!(apply_transform(&[100.0, 100.0], TransformCode::DiffLog100).unwrap(), vec![0.0]);
        let g = apply_transform(&[100.0, 102.0], TransformCode::DiffLog100).unwrap();
        // 100 * ln(1.02) = 1.980262729617971...
        assert!((g[0] - 1.980_262_729_617_971).abs() < 1e-12);
        let l = apply_transform(&[1.0, std::f64::consts::E], TransformCode::Log).unwrap();
        assert!(l[0].abs() < 1e-15 && (l[1] - 1.0).abs() < 1e-15);
        assert!(matches!(
            apply_transform(&[1.0, 0.0], TransformCode::Log),
            Err(Error::NonPositiveValue { .. })
        ));
        assert!(matches!(
            apply_transform(&[-1.0, 2.0], TransformCode::DiffLog100),
            Err(Error::NonPositiveValue { .. })
        ));
        let x = [3.0, 1.5];
        assert_eq!(apply_transform(&x, TransformCode::NoTransform).unwrap(), x.to_vec());
    }

    fn panel_from(cols: &[&[f64]]) -> Panel {
        let n = cols[0].len();
        let values = DMatrix::from_fn(n, cols.len(), |t, j| cols[j][t]);
        let times = (0..n).map(|t| q(2000, 1).add(t as i64)).collect();
        let names = (0..cols.len()).map(|j| format!("s{j}")).collect();
        Panel::new(names, times, values, vec![TransformCode::NoTransform; cols.len()]).unwrap()
    }

    #[test]
    fn standardize_small_column() {
        let p = standardize_panel(&panel_from(&[&[1.0, 2.0, 3.0]])).unwrap();
        let got: Vec<f64> = p.values.column(0).iter().copied().collect();
        assert_eq!(got, vec![-1.0, 0.0, 1.0]);
        assert_eq!(p.standardization.as_ref().unwrap()[0], (2.0, 1.0));
        let again = standardize_panel(&p).unwrap();
        let (m, s) = again.standardization.as_ref().unwrap()[0];
        assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
        assert!((&again.values - &p.values).amax() < 1e-12);
        assert!(matches!(
            standardize_panel(&panel_from(&[&[5.0, 5.0, 5.0]])),
            Err(Error::ConstantSeries(_))
        ));
    }

    #[test]
    fn window_plan_boundaries() {
        let panel = panel_from(&[&[0.0; 8]]);
        let last = *panel.times.last().unwrap();
        let plan = plan_expanding_windows(&panel, last.prev(), 1).unwrap();
        assert_eq!(plan.origins.len(), 1);
        assert!(matches!(
            plan_expanding_windows(&panel, last.next(), 1),
            Err(Error::OriginOutOfRange(_))
        ));
        let plan = plan_expanding_windows(&panel, panel.times[2], 4).unwrap();
        assert_eq!(plan.scored_horizons(last.add(-2)), vec![1, 2]);
        assert_eq!(plan.scored_horizons(panel.times[2]), vec![1, 2, 3, 4]);
    }

    #[test]
    fn load_trims_and_orders() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "sasdate,A,B,C").unwrap();
        writeln!(f, "factors,1,0,1").unwrap();
        writeln!(f, "transform,5,1,1").unwrap();
        writeln!(f, "3/1/1960,,1,7").unwrap();
        writeln!(f, "6/1/1960,2,2,7").unwrap();
        writeln!(f, "9/1/1960,3,3,7").unwrap();
        writeln!(f, "12/1/1960,4,,7").unwrap();
        f.flush().unwrap();
        let spec = vec![("B".to_string(), TransformCode::NoTransform), ("A".to_string(), TransformCode::Log)];
        let p = load_csv_panel(f.path(), &spec).unwrap();
        assert_eq!(p.names, vec!["B", "A"]);
        assert_eq!(p.times, vec![q(1960, 2), q(1960, 3)]);
        assert_eq!(p.values[(0, 1)], 2.0);
        assert!(matches!(
            load_csv_panel(f.path(), &[("Z".to_string(), TransformCode::Log)]),
            Err(Error::MissingSeries(_))
        ));
        assert!(matches!(load_csv_panel(f.path(), &[]), Err(Error::MissingSeries(_))));
    }

    #[test]
    fn ragged_inside_sample_is_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "date,A").unwrap();
        writeln!(f, "2000Q1,1").unwrap();
        writeln!(f, "2000Q2,").unwrap();
        writeln!(f, "2000Q3,3").unwrap();
        f.flush().unwrap();
        let r = load_csv_panel(f.path(), &[("A".to_string(), TransformCode::NoTransform)]);
        assert!(matches!(r, Err(Error::RaggedPanel(_))));
    }
}
