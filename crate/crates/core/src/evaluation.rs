//! Forecast loss aggregation and comparison: cumulative losses, percentage
//! gains over a benchmark, Diebold-Mariano tests and the model confidence set.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data_io::Quarter;
use crate::dist::{rng_for_stream, std_normal_cdf};
use crate::error::{Error, Result};
use crate::forecast::ForecastResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossMode {
    /// Squared forecast errors; inputs are forecast errors and get squared.
    Sfe,
    /// Log predictive likelihood; inputs are log densities summed as is.
    Lpl,
}

/// Running sum of the per-period losses.
pub fn cumulative_series(values: &[f64], mode: LossMode) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut acc = 0.0;
    Ok(values
        .iter()
        .map(|v| {
            acc += match mode {
                LossMode::Sfe => v * v,
                LossMode::Lpl => *v,
            };
            acc
        })
        .collect())
}

/// Model running sum minus the benchmark running sum (zero line = benchmark).
pub fn relative_cumulative_series(values: &[f64], benchmark: &[f64], mode: LossMode) -> Result<Vec<f64>> {
    if values.len() != benchmark.len() {
        return Err(Error::LengthMismatch(values.len(), benchmark.len()));
    }
    let m = cumulative_series(values, mode)?;
    let b = cumulative_series(benchmark, mode)?;
    Ok(m.iter().zip(&b).map(|(x, y)| x - y).collect())
}

/// `100 (1 - model / benchmark)`; positive when the model has the smaller loss.
pub fn percentage_gain(csfe_model: f64, csfe_benchmark: f64) -> Result<f64> {
    if !(csfe_benchmark > 0.0) {
        return Err(Error::ZeroBenchmark(csfe_benchmark));
    }
    Ok(100.0 * (1.0 - csfe_model / csfe_benchmark))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    /// One-sided p-value against "model loss < benchmark loss".
    pub p_value: f64,
}

pub const DM_MIN_LEN: usize = 10;

/// Diebold-Mariano test on `d = loss_model - loss_benchmark` with a
/// Bartlett-weighted long-run variance truncated at lag `horizon - 1`.
///
/// With `harvey`, the statistic is rescaled by the small-sample correction
/// and referred to a Student t with `n - 1` degrees of freedom.
pub fn dm_test(loss_model: &[f64], loss_benchmark: &[f64], horizon: usize, harvey: bool) -> Result<DmResult> {
    let n = loss_model.len();
    if n != loss_benchmark.len() {
        return Err(Error::LengthMismatch(n, loss_benchmark.len()));
    }
    if n < DM_MIN_LEN {
        return Err(Error::TooShortTrace { len: n, min: DM_MIN_LEN });
    }
    let h = horizon.max(1);
    let d: Vec<f64> = loss_model.iter().zip(loss_benchmark).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let autocov = |k: usize| (k..n).map(|t| (d[t] - mean) * (d[t - k] - mean)).sum::<f64>() / nf;
    let mut lrv = autocov(0);
    for k in 1..h.min(n) {
        lrv += 2.0 * (1.0 - k as f64 / h as f64) * autocov(k);
    }
    if !(lrv > 0.0) || !lrv.is_finite() {
        return Err(Error::DegenerateDifferential);
    }
    let mut stat = mean / (lrv / nf).sqrt();
    let p_value = if harvey {
        let hf = h as f64;
        stat *= ((nf + 1.0 - 2.0 * hf + hf * (hf - 1.0) / nf) / nf).sqrt();
        StudentsT::new(0.0, 1.0, nf - 1.0).expect("n >= 10").cdf(stat)
    } else {
        std_normal_cdf(stat)
    };
    Ok(DmResult { statistic: stat, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsOptions {
    pub alpha: f64,
    pub n_boot: usize,
    /// Moving-block length; `None` uses `ceil(n^(1/3))`.
    pub block_len: Option<usize>,
    pub seed: u64,
}

impl Default for McsOptions {
    fn default() -> Self {
        McsOptions { alpha: 0.1, n_boot: 5000, block_len: None, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsResult {
    /// MCS p-value per model, in input order.
    pub p_values: Vec<f64>,
    /// Whether each model (input order) is in the confidence set.
    pub included: Vec<bool>,
    /// Model indices in elimination order; survivors come last.
    pub elimination_order: Vec<usize>,
}

fn bootstrap_indices<R: Rng + ?Sized>(rng: &mut R, n: usize, block: usize) -> Vec<usize> {
    let mut idx = Vec::with_capacity(n);
    while idx.len() < n {
        let start = rng.random_range(0..n);
        for s in 0..block {
            if idx.len() == n {
                break;
            }
            idx.push((start + s) % n);
        }
    }
    idx
}

/// Model confidence set with the `T_max` statistic and a circular moving-block
/// bootstrap. `losses[m]` is the loss series of model `m` (smaller is better).
pub fn model_confidence_set(losses: &[Vec<f64>], opts: &McsOptions) -> Result<McsResult> {
    let m = losses.len();
    if m < 2 {
        return Err(Error::InsufficientModels(m));
    }
    let n = losses[0].len();
    if let Some(bad) = losses.iter().find(|l| l.len() != n) {
        return Err(Error::LengthMismatch(n, bad.len()));
    }
    if n == 0 {
        return Err(Error::EmptyTrace);
    }
    let block = opts.block_len.unwrap_or_else(|| (n as f64).cbrt().ceil() as usize).max(1);
    let nb = opts.n_boot.max(1);
    // Bootstrap means of each model's losses; differentials are linear in them.
    let means: Vec<f64> = losses.iter().map(|l| l.iter().sum::<f64>() / n as f64).collect();
    let boot_means: Vec<Vec<f64>> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for_stream(opts.seed, b as u64);
            let idx = bootstrap_indices(&mut rng, n, block);
            losses.iter().map(|l| idx.iter().map(|&t| l[t]).sum::<f64>() / n as f64).collect()
        })
        .collect();

    let mut alive: Vec<usize> = (0..m).collect();
    let mut order = Vec::with_capacity(m);
    let mut p_running: f64 = 0.0;
    let mut p_values = vec![1.0; m];
    while alive.len() > 1 {
        let k = alive.len() as f64;
        let avg = |v: &[f64]| alive.iter().map(|&j| v[j]).sum::<f64>() / k;
        // d_i = mean_i - average over the set, for data and each replicate
        let base = avg(&means);
        let d: Vec<f64> = alive.iter().map(|&i| means[i] - base).collect();
        let centred: Vec<Vec<f64>> = boot_means
            .iter()
            .map(|bm| {
                let bb = avg(bm);
                alive.iter().zip(&d).map(|(&i, di)| bm[i] - bb - di).collect()
            })
            .collect();
        let var: Vec<f64> =
            (0..alive.len()).map(|a| centred.iter().map(|c| c[a] * c[a]).sum::<f64>() / nb as f64).collect();
        let scale = means.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if var.iter().all(|v| *v <= 1e-24 * scale * scale) && d.iter().all(|v| v.abs() <= 1e-12 * scale) {
            // no differential at all: every remaining model is equivalent
            break;
        }
        let t = |a: usize, x: f64| if var[a] > 0.0 { x / var[a].sqrt() } else if x > 0.0 { f64::INFINITY } else { 0.0 };
        let (worst, t_max) = (0..alive.len())
            .map(|a| (a, t(a, d[a])))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let exceed = centred
            .iter()
            .filter(|c| (0..alive.len()).map(|a| t(a, c[a])).fold(f64::NEG_INFINITY, f64::max) >= t_max)
            .count();
        let p = exceed as f64 / nb as f64;
        p_running = p_running.max(p);
        let gone = alive.remove(worst);
        p_values[gone] = p_running;
        order.push(gone);
    }
    order.extend(alive.iter().copied());
    let included = p_values.iter().map(|p| *p > opts.alpha).collect();
    Ok(McsResult { p_values, included, elimination_order: order })
}

/// Aligned losses of several models on a common (origin, horizon, variable) support.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    pub models: Vec<String>,
    pub keys: Vec<(Quarter, usize, String)>,
    /// `sq_error[m][r]` for model `m` and key `r`.
    pub sq_error: Vec<Vec<f64>>,
    pub log_density: Vec<Vec<f64>>,
}

impl LossTable {
    pub fn from_results(results: &[(String, ForecastResult)]) -> Result<Self> {
        let Some((_, first)) = results.first() else {
            return Err(Error::InsufficientModels(0));
        };
        let mut keys: Vec<(Quarter, usize, String)> =
            first.records.iter().map(|r| (r.origin, r.horizon, r.variable.clone())).collect();
        keys.sort();
        let pos: BTreeMap<_, usize> = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let mut sq_error = Vec::new();
        let mut log_density = Vec::new();
        for (name, res) in results {
            if res.records.len() != keys.len() {
                return Err(Error::InvalidConfig(format!("model {name} has a different forecast support")));
            }
            let mut se = vec![f64::NAN; keys.len()];
            let mut ld = vec![f64::NAN; keys.len()];
            for r in &res.records {
                let key = (r.origin, r.horizon, r.variable.clone());
                let i = *pos
                    .get(&key)
                    .ok_or_else(|| Error::InvalidConfig(format!("model {name} has a different forecast support")))?;
                se[i] = r.sq_error;
                ld[i] = r.log_pred_density;
            }
            if se.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidConfig(format!("model {name} repeats forecast keys")));
            }
            sq_error.push(se);
            log_density.push(ld);
        }
        Ok(LossTable { models: results.iter().map(|(n, _)| n.clone()).collect(), keys, sq_error, log_density })
    }

    pub fn model_index(&self, name: &str) -> Result<usize> {
        self.models.iter().position(|m| m == name).ok_or_else(|| Error::MissingSeries(name.to_string()))
    }

    pub fn variables(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for k in &self.keys {
            if !v.contains(&k.2) {
                v.push(k.2.clone());
            }
        }
        v
    }

    pub fn horizons(&self) -> Vec<usize> {
        let mut h: Vec<usize> = self.keys.iter().map(|k| k.1).collect();
        h.sort_unstable();
        h.dedup();
        h
    }

    /// Row positions for one (variable, horizon), in origin order.
    pub fn rows(&self, variable: &str, horizon: usize) -> Vec<usize> {
        (0..self.keys.len()).filter(|&r| self.keys[r].1 == horizon && self.keys[r].2 == variable).collect()
    }

    fn pick(v: &[f64], rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&r| v[r]).collect()
    }

    /// Percentage CSFE gains: one row per variable, one column per model, at `horizon`.
    pub fn gain_table(&self, benchmark: &str, horizon: usize) -> Result<Vec<(String, Vec<f64>)>> {
        let b = self.model_index(benchmark)?;
        self.variables()
            .into_iter()
            .map(|var| {
                let rows = self.rows(&var, horizon);
                let csfe = |m: usize| Self::pick(&self.sq_error[m], &rows).iter().sum::<f64>();
                let bench = csfe(b);
                let gains = (0..self.models.len()).map(|m| percentage_gain(csfe(m), bench)).collect::<Result<Vec<_>>>()?;
                Ok((var, gains))
            })
            .collect()
    }

    /// DM tests (squared-error loss) of every model against the benchmark.
    pub fn dm_table(&self, benchmark: &str, horizon: usize, harvey: bool) -> Result<Vec<DmRow>> {
        let b = self.model_index(benchmark)?;
        let mut out = Vec::new();
        for var in self.variables() {
            let rows = self.rows(&var, horizon);
            let lb = Self::pick(&self.sq_error[b], &rows);
            for m in (0..self.models.len()).filter(|&m| m != b) {
                let lm = Self::pick(&self.sq_error[m], &rows);
                let res = dm_test(&lm, &lb, horizon, harvey).ok();
                out.push(DmRow {
                    variable: var.clone(),
                    horizon,
                    model: self.models[m].clone(),
                    statistic: res.map_or(f64::NAN, |r| r.statistic),
                    p_value: res.map_or(f64::NAN, |r| r.p_value),
                });
            }
        }
        Ok(out)
    }

    /// MCS per variable at `horizon` on squared errors or negative log densities.
    pub fn mcs_table(&self, horizon: usize, mode: LossMode, opts: &McsOptions) -> Result<Vec<McsRow>> {
        let mut out = Vec::new();
        for var in self.variables() {
            let rows = self.rows(&var, horizon);
            let losses: Vec<Vec<f64>> = (0..self.models.len())
                .map(|m| match mode {
                    LossMode::Sfe => Self::pick(&self.sq_error[m], &rows),
                    LossMode::Lpl => Self::pick(&self.log_density[m], &rows).iter().map(|v| -v).collect(),
                })
                .collect();
            let res = model_confidence_set(&losses, opts)?;
            for (m, name) in self.models.iter().enumerate() {
                out.push(McsRow {
                    variable: var.clone(),
                    horizon,
                    model: name.clone(),
                    p_value: res.p_values[m],
                    included: res.included[m],
                });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmRow {
    pub variable: String,
    pub horizon: usize,
    pub model: String,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsRow {
    pub variable: String,
    pub horizon: usize,
    pub model: String,
    pub p_value: f64,
    pub included: bool,
}

/// Writes a variable-by-model table as CSV.
pub fn write_wide_table<W: Write>(writer: W, models: &[String], rows: &[(String, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["variable".to_string()];
    header.extend(models.iter().cloned());
    w.write_record(&header)?;
    for (var, vals) in rows {
        let mut rec = vec![var.clone()];
        rec.extend(vals.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
