use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use dfsvm::data_io::{
    load_csv_panel, plan_expanding_windows, standardize_panel, transform_panel, Panel, Quarter, TransformCode,
};
use dfsvm::evaluation::{write_rows_csv, write_wide_table, LossMode, LossTable, McsOptions};
use dfsvm::forecast::{posterior_predictive, run_backtest, BacktestOptions, ForecastResult, PredictiveOptions};
use dfsvm::mcmc::{posterior_summary, run_chain_checkpointed, CheckpointSpec, DrawSet};
use dfsvm::model::{simulate_model, InMean, ModelConfig, ModelData, Params};
use dfsvm::{Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{DataSection, RunConfig};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(create(path)?, value)?;
    Ok(())
}

/// Loads, transforms and trims the panel in the original (unstandardized) units.
pub fn load_panel(ds: &DataSection) -> Result<Panel> {
    let mut panel = if ds.series.is_empty() {
        Panel::read_csv(File::open(&ds.path)?)?
    } else {
        let spec: Vec<(String, TransformCode)> = ds.series.iter().map(|s| (s.id.clone(), s.transform)).collect();
        transform_panel(&load_csv_panel(&ds.path, &spec)?)?
    };
    if ds.start.is_some() || ds.end.is_some() {
        let locate = |q: Quarter| panel.index_of(q).ok_or_else(|| Error::OriginOutOfRange(format!("{q} is outside the data")));
        let a = ds.start.map(locate).transpose()?.unwrap_or(0);
        let b = ds.end.map(locate).transpose()?.unwrap_or(panel.n() - 1);
        if a > b {
            return Err(Error::InvalidConfig("data start lies after end".into()));
        }
        panel = panel.slice_rows(a, b);
    }
    Ok(panel)
}

/// Panel as the model sees it, with the `(mean, sd)` used to map back.
type ModelInput = (Panel, ModelConfig, ModelData, Option<Vec<(f64, f64)>>);

fn model_input(cfg: &RunConfig) -> Result<ModelInput> {
    let ds = cfg.data()?;
    let raw = load_panel(ds)?;
    let scaled = if ds.standardize { standardize_panel(&raw)? } else { raw.clone() };
    let model = cfg.model.build(raw.p())?;
    let data = ModelData::from_full(&scaled.values, model.lags)?;
    Ok((raw, model, data, scaled.standardization))
}

/// Fixed illustrative parameters used when `simulate` has no parameter file.
pub fn illustrative_params(cfg: &ModelConfig) -> Params {
    let mut p = Params::default_for(cfg);
    for i in 0..cfg.p {
        p.bbar[(i, i)] = 0.3;
        p.mu[i] = -1.0;
        for j in 0..cfg.q.min(i + 1) {
            p.loadings[(i, j)] = 0.7;
        }
    }
    if cfg.factor_dynamics {
        p.psi.iter_mut().for_each(|x| *x = 0.5);
    }
    if cfg.in_mean != InMean::None {
        p.beta.iter_mut().for_each(|x| *x = -0.3);
    }
    for i in 0..cfg.k() {
        if cfg.leverage_active(i) {
            p.rho[i] = -0.3;
        }
    }
    p
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let sim = cfg.simulate.as_ref().ok_or_else(|| Error::InvalidConfig("missing `simulate` section".into()))?;
    let model = cfg.model.build(sim.p)?;
    if model.benchmark_lsvvar {
        return Err(Error::InvalidConfig("simulate supports the factor variants only".into()));
    }
    let params = match &sim.params {
        Some(path) => serde_json::from_reader(BufReader::new(File::open(path)?))
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?,
        None => illustrative_params(&model),
    };
    let (y, lat) = simulate_model(&model, &params, sim.n, cfg.chain.seed, None)?;
    let times: Vec<Quarter> = (0..sim.n).map(|t| sim.start.add(t as i64)).collect();
    let names: Vec<String> = (1..=sim.p).map(|i| format!("y{i}")).collect();
    let out = cfg.out_dir();
    Panel::new(names, times.clone(), y, vec![TransformCode::NoTransform; sim.p])?.write_csv(create(&out.join("y.csv"))?)?;
    let (q, k) = (lat.f.ncols(), lat.h.ncols());
    let mut lat_names: Vec<String> = (1..=q).map(|j| format!("f{j}")).collect();
    lat_names.extend((1..=k).map(|i| format!("h{i}")));
    let values = DMatrix::from_fn(sim.n, q + k, |t, c| if c < q { lat.f[(t, c)] } else { lat.h[(t, c - q)] });
    Panel::new(lat_names, times, values, vec![TransformCode::NoTransform; q + k])?
        .write_csv(create(&out.join("latents.csv"))?)?;
    write_json(&out.join("params.json"), &params)
}

#[derive(Serialize)]
struct SummaryRow {
    parameter: String,
    mean: f64,
    q025: f64,
    q975: f64,
    prob_positive: f64,
    inefficiency: Option<f64>,
}

fn summary_rows(draws: &DrawSet) -> Result<Vec<SummaryRow>> {
    draws
        .traces()
        .into_iter()
        .map(|(name, trace)| {
            let s = posterior_summary(&trace)?;
            Ok(SummaryRow {
                parameter: name,
                mean: s.mean,
                q025: s.q025,
                q975: s.q975,
                prob_positive: s.prob_positive,
                inefficiency: s.inefficiency,
            })
        })
        .collect()
}

fn run_fit(cfg: &RunConfig, model: &ModelConfig, data: &ModelData) -> Result<DrawSet> {
    let spec = cfg.checkpoint.as_ref().map(|c| CheckpointSpec { dir: c.dir.clone(), every: c.every, stop_after: None });
    run_chain_checkpointed(model, &cfg.chain, data, &cfg.priors, spec.as_ref())
}

pub fn fit(cfg: &RunConfig) -> Result<()> {
    let (_, model, data, _) = model_input(cfg)?;
    let draws = run_fit(cfg, &model, &data)?;
    let out = cfg.out_dir();
    write_json(&out.join("draws.json"), &draws)?;
    write_rows_csv(create(&out.join("summary.csv"))?, &summary_rows(&draws)?)
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let path = cfg
        .forecast
        .draws
        .clone()
        .unwrap_or_else(|| cfg.out_dir().join("draws.json"));
    let draws: DrawSet = serde_json::from_reader(BufReader::new(File::open(&path)?))?;
    let rows = summary_rows(&draws)?;
    write_rows_csv(create(&cfg.out_dir().join("summary.csv"))?, &rows)?;
    println!("{} ({} retained draws)", draws.model.name(), draws.len());
    println!("{:<14} {:>9} {:>9} {:>9} {:>7} {:>7}", "parameter", "mean", "2.5%", "97.5%", "Pr(+)", "IF");
    for r in rows {
        let inef = r.inefficiency.map_or("-".to_string(), |v| format!("{v:.1}"));
        println!(
            "{:<14} {:>9.3} {:>9.3} {:>9.3} {:>7.3} {:>7}",
            r.parameter, r.mean, r.q025, r.q975, r.prob_positive, inef
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct PointRow {
    origin: Quarter,
    horizon: usize,
    variable: String,
    point: f64,
}

pub fn forecast(cfg: &RunConfig) -> Result<()> {
    let (raw, model, data, scale) = model_input(cfg)?;
    let draws = match &cfg.forecast.draws {
        Some(path) => {
            let d: DrawSet = serde_json::from_reader(BufReader::new(File::open(path)?))?;
            if d.model != model || d.latent_mean.n() != data.n() {
                return Err(Error::InvalidConfig(format!("{} was fitted to a different model or sample", path.display())));
            }
            d
        }
        None => run_fit(cfg, &model, &data)?,
    };
    let opts = PredictiveOptions { paths_per_draw: cfg.forecast.paths_per_draw, seed: cfg.forecast.seed };
    let pred = posterior_predictive(&draws, &data, cfg.forecast.horizon, scale.as_deref(), None, &opts)?;
    let origin = *raw.times.last().expect("nonempty panel");
    let mut rows = Vec::new();
    for h in 1..=cfg.forecast.horizon {
        for (i, name) in raw.names.iter().enumerate() {
            rows.push(PointRow { origin, horizon: h, variable: name.clone(), point: pred.point[(h - 1, i)] });
        }
    }
    write_rows_csv(create(&cfg.out_dir().join("forecast.csv"))?, &rows)
}

pub fn backtest(cfg: &RunConfig) -> Result<()> {
    let bt = cfg.backtest.as_ref().ok_or_else(|| Error::InvalidConfig("missing `backtest` section".into()))?;
    let panel = load_panel(cfg.data()?)?;
    let model = cfg.model.build(panel.p())?;
    let plan = plan_expanding_windows(&panel, bt.first_origin, bt.max_horizon)?;
    let opts = BacktestOptions {
        priors: cfg.priors.clone(),
        predictive: PredictiveOptions { paths_per_draw: cfg.forecast.paths_per_draw, seed: cfg.forecast.seed },
    };
    let result = run_backtest(&model, &cfg.chain, &panel, &plan, &opts)?;
    result.write_csv(create(&cfg.out_dir().join("forecasts.csv"))?)
}

#[derive(Serialize)]
struct EvaluationJson {
    benchmark: String,
    models: Vec<String>,
    gains: Vec<GainBlock>,
    dm: Vec<dfsvm::evaluation::DmRow>,
    mcs_sfe: Vec<dfsvm::evaluation::McsRow>,
    mcs_lpl: Vec<dfsvm::evaluation::McsRow>,
}

#[derive(Serialize)]
struct GainBlock {
    horizon: usize,
    rows: Vec<(String, Vec<f64>)>,
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let ev = cfg.evaluate.as_ref().ok_or_else(|| Error::InvalidConfig("missing `evaluate` section".into()))?;
    if !ev.results.contains_key(&ev.benchmark) {
        return Err(Error::MissingSeries(format!("benchmark {} has no forecast file", ev.benchmark)));
    }
    let results = ev
        .results
        .iter()
        .map(|(name, path)| Ok((name.clone(), ForecastResult::read_csv(File::open(path)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let table = LossTable::from_results(&results)?;
    let horizons = if ev.horizons.is_empty() { table.horizons() } else { ev.horizons.clone() };
    let mcs = McsOptions { alpha: ev.alpha, n_boot: ev.n_boot, block_len: ev.block_len, seed: ev.seed };
    let out = cfg.out_dir();
    let mut summary = EvaluationJson {
        benchmark: ev.benchmark.clone(),
        models: table.models.clone(),
        gains: Vec::new(),
        dm: Vec::new(),
        mcs_sfe: Vec::new(),
        mcs_lpl: Vec::new(),
    };
    for &h in &horizons {
        let gains = table.gain_table(&ev.benchmark, h)?;
        write_wide_table(create(&out.join(format!("gains_h{h}.csv")))?, &table.models, &gains)?;
        summary.gains.push(GainBlock { horizon: h, rows: gains });
        summary.dm.extend(table.dm_table(&ev.benchmark, h, ev.harvey)?);
        summary.mcs_sfe.extend(table.mcs_table(h, LossMode::Sfe, &mcs)?);
        summary.mcs_lpl.extend(table.mcs_table(h, LossMode::Lpl, &mcs)?);
    }
    write_rows_csv(create(&out.join("dm.csv"))?, &summary.dm)?;
    write_rows_csv(create(&out.join("mcs_sfe.csv"))?, &summary.mcs_sfe)?;
    write_rows_csv(create(&out.join("mcs_lpl.csv"))?, &summary.mcs_lpl)?;
    write_json(&out.join("evaluation.json"), &summary)
}
