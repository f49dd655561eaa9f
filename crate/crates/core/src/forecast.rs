//! Posterior predictive distributions and the expanding-window backtest.
//!
//! Given a posterior draw and a simulated future volatility path, the model
//! is a linear Gaussian VAR(1) in
//!
//! ```text
//! z_t = (y_t', y_{t-1}', ..., y_{t-L+1}', f_{t+1}')'
//! ```
//!
//! so predictive moments follow from the forward recursion
//! `m_{s+1} = c_s + A m_s`, `P_{s+1} = A P_s A' + Sigma_s`. The predictive
//! density is the equally weighted mixture of these Gaussians over draws and
//! paths.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{column_mean_sd, Panel, Quarter, WindowPlan};
use crate::dist::{rng_for_stream, std_normal, LN_2PI};
use crate::error::{Error, Result};
use crate::mcmc::{run_chain, ChainConfig, DrawSet};
use crate::model::{InMean, LsvvarParams, ModelConfig, ModelData, Params, PriorHyper};

/// Predictive (mean, covariance) of y per horizon.
type Moments = Vec<(DVector<f64>, DMatrix<f64>)>;

/// Log-volatility parameters for forward simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityLaw {
    pub mu: Vec<f64>,
    pub phi: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl From<&Params> for VolatilityLaw {
    fn from(p: &Params) -> Self {
        VolatilityLaw { mu: p.mu.clone(), phi: p.phi.clone(), sigma2: p.sigma2.clone() }
    }
}

impl From<&LsvvarParams> for VolatilityLaw {
    fn from(p: &LsvvarParams) -> Self {
        VolatilityLaw { mu: p.mu.clone(), phi: p.phi.clone(), sigma2: p.sigma2.clone() }
    }
}

/// `k` future log-volatility vectors after `h_now`, as a k x dim matrix.
pub fn simulate_volatility_path<R: Rng + ?Sized>(h_now: &[f64], law: &VolatilityLaw, k: usize, rng: &mut R) -> DMatrix<f64> {
    let d = h_now.len();
    let mut out = DMatrix::zeros(k, d);
    let mut cur = h_now.to_vec();
    for s in 0..k {
        for i in 0..d {
            let z = std_normal(rng);
            cur[i] = law.mu[i] + law.phi[i] * (cur[i] - law.mu[i]) + law.sigma2[i].sqrt() * z;
            out[(s, i)] = cur[i];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompanionSystem {
    pub dim: usize,
    pub intercept: DVector<f64>,
    pub a: DMatrix<f64>,
    pub noise: DMatrix<f64>,
}

/// One step of the factor model in companion form.
///
/// `h_y` holds the log-volatilities dated with the new observation,
/// `h_f` those dated with the new factor (one period later).
pub fn build_companion(cfg: &ModelConfig, params: &Params, h_y: &[f64], h_f: &[f64]) -> Result<CompanionSystem> {
    let (p, q, lags) = (cfg.p, cfg.q, cfg.lags);
    if h_y.len() != cfg.k() || h_f.len() != cfg.k() {
        return Err(Error::DimensionMismatch(format!("volatility rows must have {} entries", cfg.k())));
    }
    let dim = p * lags + q;
    let fo = p * lags;
    let mut a = DMatrix::zeros(dim, dim);
    a.view_mut((0, 0), (p, p * lags)).copy_from(&params.bbar);
    a.view_mut((0, fo), (p, q)).copy_from(&params.loadings);
    for l in 1..lags {
        for i in 0..p {
            a[(l * p + i, (l - 1) * p + i)] = 1.0;
        }
    }
    for j in 0..q {
        a[(fo + j, fo + j)] = params.psi[j];
    }
    let mut intercept = DVector::zeros(dim);
    let mut noise = DMatrix::zeros(dim, dim);
    for i in 0..p {
        if cfg.in_mean == InMean::Observation {
            intercept[i] = params.beta[i] * (0.5 * h_y[i]).exp();
        }
        noise[(i, i)] = h_y[i].exp();
    }
    for j in 0..q {
        let i = p + j;
        intercept[fo + j] = (1.0 - params.psi[j]) * params.gamma[j];
        if cfg.in_mean == InMean::Factor {
            intercept[fo + j] += params.beta[j] * (0.5 * h_f[i]).exp();
        }
        noise[(fo + j, fo + j)] = h_f[i].exp();
    }
    Ok(CompanionSystem { dim, intercept, a, noise })
}

/// One step of the benchmark VAR in companion form (`z_t` without factors).
pub fn build_lsvvar_companion(params: &LsvvarParams, h_y: &[f64], lags: usize) -> Result<CompanionSystem> {
    let p = params.b.len();
    if h_y.len() != p {
        return Err(Error::DimensionMismatch(format!("volatility rows must have {p} entries")));
    }
    let inv = params
        .b0
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularCovariance("B0 is not invertible".into()))?;
    let dim = p * lags;
    let mut a = DMatrix::zeros(dim, dim);
    a.view_mut((0, 0), (p, dim)).copy_from(&(&inv * &params.bbar));
    for l in 1..lags {
        for i in 0..p {
            a[(l * p + i, (l - 1) * p + i)] = 1.0;
        }
    }
    let mut intercept = DVector::zeros(dim);
    intercept.rows_mut(0, p).copy_from(&(&inv * DVector::from_vec(params.b.clone())));
    let d = DMatrix::from_diagonal(&DVector::from_iterator(p, h_y.iter().map(|h| h.exp())));
    let mut noise = DMatrix::zeros(dim, dim);
    noise.view_mut((0, 0), (p, p)).copy_from(&(&inv * d * inv.transpose()));
    Ok(CompanionSystem { dim, intercept, a, noise })
}

/// Means and covariances of the first `p` state entries after each step.
pub fn predictive_moments(
    z_mean: &DVector<f64>,
    z_cov: &DMatrix<f64>,
    systems: &[CompanionSystem],
    p: usize,
) -> Vec<(DVector<f64>, DMatrix<f64>)> {
    let mut m = z_mean.clone();
    let mut c = z_cov.clone();
    systems
        .iter()
        .map(|s| {
            m = &s.intercept + &s.a * &m;
            c = &s.a * &c * s.a.transpose() + &s.noise;
            (m.rows(0, p).into_owned(), c.view((0, 0), (p, p)).into_owned())
        })
        .collect()
}

/// Stacked lags `(y_T, ..., y_{T-L+1})` of the last rows of `data`.
fn lag_stack(data: &ModelData) -> DVector<f64> {
    let (n, p, lags) = (data.n(), data.p(), data.lags);
    // x row T+1 would be (y_T, ..., y_{T-L+1}); build it from y and x row T.
    DVector::from_fn(p * lags, |c, _| {
        let l = c / p;
        let j = c % p;
        if l == 0 {
            data.y[(n - 1, j)]
        } else {
            data.x[(n - 1, (l - 1) * p + j)]
        }
    })
}

/// Conditional predictive moments for one draw and one volatility path,
/// horizons `1..=k`, in model (standardized) units.
pub fn draw_moments<R: Rng + ?Sized>(
    draws: &DrawSet,
    index: usize,
    data: &ModelData,
    k: usize,
    rng: &mut R,
) -> Result<Vec<(DVector<f64>, DMatrix<f64>)>> {
    let cfg = &draws.model;
    let lags = cfg.lags;
    let p = cfg.p;
    let h_now = &draws.last_h[index];
    let ys = lag_stack(data);
    if cfg.benchmark_lsvvar {
        let params = &draws.lsvvar[index];
        let path = simulate_volatility_path(h_now, &VolatilityLaw::from(params), k, rng);
        let systems = (0..k)
            .map(|s| build_lsvvar_companion(params, &path.row(s).iter().copied().collect::<Vec<_>>(), lags))
            .collect::<Result<Vec<_>>>()?;
        let dim = p * lags;
        return Ok(predictive_moments(&ys, &DMatrix::zeros(dim, dim), &systems, p));
    }
    let params = &draws.params[index];
    let q = cfg.q;
    // h_{T+1..T+k+1}: the last row dates the factor of the final step.
    let path = simulate_volatility_path(h_now, &VolatilityLaw::from(params), k + 1, rng);
    let row = |s: usize| -> Vec<f64> { path.row(s).iter().copied().collect() };
    let systems = (0..k).map(|s| build_companion(cfg, params, &row(s), &row(s + 1))).collect::<Result<Vec<_>>>()?;
    let dim = p * lags + q;
    let mut z = DVector::zeros(dim);
    z.rows_mut(0, p * lags).copy_from(&ys);
    let mut zc = DMatrix::zeros(dim, dim);
    let h1 = row(0);
    let f_now = &draws.last_f[index];
    for j in 0..q {
        let i = p + j;
        let mut m = params.gamma[j] + params.psi[j] * (f_now[j] - params.gamma[j]);
        if cfg.in_mean == InMean::Factor {
            m += params.beta[j] * (0.5 * h1[i]).exp();
        }
        z[p * lags + j] = m;
        zc[(p * lags + j, p * lags + j)] = h1[i].exp();
    }
    Ok(predictive_moments(&z, &zc, &systems, p))
}

/// Log of the equally weighted mixture of `N(mean_c, var_c)` at `x`.
pub fn mixture_log_density(x: f64, comps: &[(f64, f64)]) -> f64 {
    let logs: Vec<f64> = comps.iter().map(|&(m, v)| -0.5 * (LN_2PI + v.ln() + (x - m) * (x - m) / v)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + (logs.iter().map(|l| (l - top).exp()).sum::<f64>() / comps.len() as f64).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictive {
    /// k x p point forecasts in original units.
    pub point: DMatrix<f64>,
    /// k x p log predictive densities at the realizations, when supplied.
    pub log_density: Option<DMatrix<f64>>,
    /// Per horizon, per variable mixture components `(mean, var)` in original units.
    pub components: Vec<Vec<Vec<(f64, f64)>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveOptions {
    pub paths_per_draw: usize,
    pub seed: u64,
}

impl Default for PredictiveOptions {
    fn default() -> Self {
        PredictiveOptions { paths_per_draw: 1, seed: 1 }
    }
}

/// Predictive mixture over all retained draws and volatility paths.
///
/// `scale` maps model units to original units per variable as `(mean, sd)`;
/// `realized` (k x p, original units, NaN where missing) enables density scoring.
pub fn posterior_predictive(
    draws: &DrawSet,
    data: &ModelData,
    k: usize,
    scale: Option<&[(f64, f64)]>,
    realized: Option<&DMatrix<f64>>,
    opts: &PredictiveOptions,
) -> Result<Predictive> {
    if draws.is_empty() {
        return Err(Error::NoDraws);
    }
    let p = draws.model.p;
    let paths = opts.paths_per_draw.max(1);
    let per_draw: Vec<Vec<Moments>> = (0..draws.len())
        .into_par_iter()
        .map(|d| {
            let mut rng = rng_for_stream(opts.seed, d as u64);
            (0..paths).map(|_| draw_moments(draws, d, data, k, &mut rng)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let (off, sd): (Vec<f64>, Vec<f64>) = match scale {
        Some(s) => s.iter().copied().unzip(),
        None => (vec![0.0; p], vec![1.0; p]),
    };
    let mut components = vec![vec![Vec::with_capacity(draws.len() * paths); p]; k];
    for draw in &per_draw {
        for path in draw {
            for (s, (m, c)) in path.iter().enumerate() {
                for i in 0..p {
                    components[s][i].push((off[i] + sd[i] * m[i], sd[i] * sd[i] * c[(i, i)]));
                }
            }
        }
    }
    let point = DMatrix::from_fn(k, p, |s, i| {
        components[s][i].iter().map(|c| c.0).sum::<f64>() / components[s][i].len() as f64
    });
    let log_density = realized.map(|r| {
        DMatrix::from_fn(k, p, |s, i| {
            let x = r[(s, i)];
            if x.is_nan() {
                f64::NAN
            } else {
                mixture_log_density(x, &components[s][i])
            }
        })
    });
    Ok(Predictive { point, log_density, components })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub origin: Quarter,
    pub horizon: usize,
    pub variable: String,
    pub point: f64,
    pub realized: f64,
    pub sq_error: f64,
    pub log_pred_density: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastResult {
    pub records: Vec<ForecastRecord>,
}

impl ForecastResult {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(ForecastRecordRow::from(r))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let mut records = Vec::new();
        for row in rd.deserialize::<ForecastRecordRow>() {
            records.push(row?.try_into()?);
        }
        Ok(ForecastResult { records })
    }

    /// Distinct origins, horizons and variables, each in first-seen order.
    pub fn support(&self) -> (Vec<Quarter>, Vec<usize>, Vec<String>) {
        let mut o = Vec::new();
        let mut h = Vec::new();
        let mut v = Vec::new();
        for r in &self.records {
            if !o.contains(&r.origin) {
                o.push(r.origin);
            }
            if !h.contains(&r.horizon) {
                h.push(r.horizon);
            }
            if !v.contains(&r.variable) {
                v.push(r.variable.clone());
            }
        }
        (o, h, v)
    }
}

#[derive(Serialize, Deserialize)]
struct ForecastRecordRow {
    origin: String,
    horizon: usize,
    variable: String,
    point: f64,
    realized: f64,
    sq_error: f64,
    log_pred_density: f64,
}

impl From<&ForecastRecord> for ForecastRecordRow {
    fn from(r: &ForecastRecord) -> Self {
        ForecastRecordRow {
            origin: r.origin.to_string(),
            horizon: r.horizon,
            variable: r.variable.clone(),
            point: r.point,
            realized: r.realized,
            sq_error: r.sq_error,
            log_pred_density: r.log_pred_density,
        }
    }
}

impl TryFrom<ForecastRecordRow> for ForecastRecord {
    type Error = Error;
    fn try_from(r: ForecastRecordRow) -> Result<Self> {
        Ok(ForecastRecord {
            origin: r.origin.parse()?,
            horizon: r.horizon,
            variable: r.variable,
            point: r.point,
            realized: r.realized,
            sq_error: r.sq_error,
            log_pred_density: r.log_pred_density,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestOptions {
    pub priors: PriorHyper,
    pub predictive: PredictiveOptions,
}

/// Standardized model data for the window ending at `end` (inclusive), plus
/// the in-window `(mean, sd)` per series.
pub fn window_data(panel: &Panel, start: usize, end: usize, lags: usize) -> Result<(ModelData, Vec<(f64, f64)>)> {
    let p = panel.p();
    let rows = end + 1 - start;
    let mut stats = Vec::with_capacity(p);
    let mut y = DMatrix::zeros(rows, p);
    for j in 0..p {
        let col: Vec<f64> = (start..=end).map(|t| panel.values[(t, j)]).collect();
        let (m, s) = column_mean_sd(&col);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::ConstantSeries(panel.names[j].clone()));
        }
        for (t, v) in col.iter().enumerate() {
            y[(t, j)] = (v - m) / s;
        }
        stats.push((m, s));
    }
    Ok((ModelData::from_full(&y, lags)?, stats))
}

/// Fits and scores one window. Chain seed `chain.seed + w`, predictive seed
/// `opts.predictive.seed + w` for window index `w`.
pub fn backtest_window(
    cfg: &ModelConfig,
    chain: &ChainConfig,
    panel: &Panel,
    plan: &WindowPlan,
    w: usize,
    opts: &BacktestOptions,
) -> Result<Vec<ForecastRecord>> {
    let origin = plan.origins[w];
    let start = panel.index_of(plan.start).ok_or_else(|| Error::OriginOutOfRange(format!("{}", plan.start)))?;
    let end = panel.index_of(origin).ok_or_else(|| Error::OriginOutOfRange(format!("{origin}")))?;
    let (data, stats) = window_data(panel, start, end, cfg.lags)?;
    let chain_w = ChainConfig { seed: chain.seed.wrapping_add(w as u64), ..*chain };
    let draws = run_chain(cfg, &chain_w, &data, &opts.priors)?;
    let scored = plan.scored_horizons(origin);
    let k = scored.iter().copied().max().unwrap_or(0);
    if k == 0 {
        return Ok(Vec::new());
    }
    let realized = DMatrix::from_fn(k, panel.p(), |s, i| panel.values[(end + s + 1, i)]);
    let popts = PredictiveOptions { seed: opts.predictive.seed.wrapping_add(w as u64), ..opts.predictive };
    let pred = posterior_predictive(&draws, &data, k, Some(&stats), Some(&realized), &popts)?;
    let ld = pred.log_density.expect("realizations supplied");
    let mut out = Vec::with_capacity(scored.len() * panel.p());
    for &h in &scored {
        for i in 0..panel.p() {
            let (pt, re) = (pred.point[(h - 1, i)], realized[(h - 1, i)]);
            out.push(ForecastRecord {
                origin,
                horizon: h,
                variable: panel.names[i].clone(),
                point: pt,
                realized: re,
                sq_error: (pt - re) * (pt - re),
                log_pred_density: ld[(h - 1, i)],
            });
        }
    }
    Ok(out)
}

/// Expanding-window backtest; windows run in parallel and are merged in origin order.
pub fn run_backtest(
    cfg: &ModelConfig,
    chain: &ChainConfig,
    panel: &Panel,
    plan: &WindowPlan,
    opts: &BacktestOptions,
) -> Result<ForecastResult> {
    let per_window = (0..plan.origins.len())
        .into_par_iter()
        .map(|w| backtest_window(cfg, chain, panel, plan, w, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(ForecastResult { records: per_window.into_iter().flatten().collect() })
}
