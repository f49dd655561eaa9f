//! Posterior sampler for the factor models and the benchmark VAR.

pub mod blocks;
pub mod checkpoint;
pub mod diagnostics;
pub mod geweke;
pub mod lsvvar;
pub mod minnesota;
pub mod sv;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{rng_from_seed, SimRng};
use crate::error::{Error, Result};
use crate::model::{InMean, LatentPaths, LsvvarParams, ModelConfig, ModelData, Params, PriorHyper};

pub use blocks::{
    beta_conditional, factor_state_space, gamma_conditional, raw_residuals, sample_beta, sample_factors, sample_gamma,
    sample_psi, sample_var_coeffs, var_row_conditional, var_row_prior,
};
pub use checkpoint::CheckpointSpec;
pub use diagnostics::{credible_interval, inefficiency_factor, posterior_summary, quantile, PosteriorSummary};
pub use minnesota::{estimate_ar_residual_variance, minnesota_prior_covariance, sample_shrinkage};
pub use sv::{sample_sv_block, SvOptions, SvPrior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub n_draws: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Keep every retained latent path, not only the terminal states and the running mean.
    pub store_latents: bool,
    /// Nominal block length of the volatility path update.
    pub sv_block_size: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { n_draws: 5000, n_burnin: 1000, thin: 1, seed: 1, store_latents: false, sv_block_size: 40 }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 || self.thin == 0 || self.sv_block_size == 0 {
            return Err(Error::InvalidConfig("n_draws, thin and sv_block_size must be positive".into()));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.n_draws / self.thin
    }

    pub fn total_iterations(&self) -> usize {
        self.n_burnin + self.n_draws
    }

    fn keeps(&self, iteration: usize) -> bool {
        iteration >= self.n_burnin && (iteration - self.n_burnin + 1).is_multiple_of(self.thin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Factor(Params),
    Lsvvar(LsvvarParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub params: ModelParams,
    pub latents: LatentPaths,
    pub pi: (f64, f64),
}

/// Running Metropolis-Hastings acceptance counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub sweeps: usize,
    pub h_blocks: usize,
    pub h_accepted: usize,
    pub phi_accepted: usize,
    pub sigma2_accepted: usize,
    pub rho_accepted: usize,
    pub psi_accepted: usize,
}

impl Acceptance {
    pub fn h_rate(&self) -> f64 {
        self.h_accepted as f64 / self.h_blocks.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawSet {
    pub model: ModelConfig,
    pub chain: ChainConfig,
    /// Minnesota scale variances used by the chain.
    pub s2: Vec<f64>,
    pub params: Vec<Params>,
    pub lsvvar: Vec<LsvvarParams>,
    pub shrinkage: Vec<(f64, f64)>,
    /// Last-period log-volatilities of each retained draw.
    pub last_h: Vec<Vec<f64>>,
    /// Last-period factors of each retained draw.
    pub last_f: Vec<Vec<f64>>,
    /// Posterior mean of the latent paths over retained draws.
    pub latent_mean: LatentPaths,
    pub latents: Vec<LatentPaths>,
    pub acceptance: Acceptance,
}

impl DrawSet {
    fn new(model: ModelConfig, chain: ChainConfig, s2: Vec<f64>, n: usize) -> Self {
        let q = if model.benchmark_lsvvar { 0 } else { model.q };
        let k = if model.benchmark_lsvvar { model.p } else { model.k() };
        DrawSet {
            model,
            chain,
            s2,
            params: Vec::new(),
            lsvvar: Vec::new(),
            shrinkage: Vec::new(),
            last_h: Vec::new(),
            last_f: Vec::new(),
            latent_mean: LatentPaths { f: DMatrix::zeros(n, q), h: DMatrix::zeros(n, k) },
            latents: Vec::new(),
            acceptance: Acceptance::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.last_h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn record(&mut self, state: &ChainState) {
        let m = self.len() as f64;
        let w_old = m / (m + 1.0);
        let w_new = 1.0 / (m + 1.0);
        self.latent_mean.f = &self.latent_mean.f * w_old + &state.latents.f * w_new;
        self.latent_mean.h = &self.latent_mean.h * w_old + &state.latents.h * w_new;
        match &state.params {
            ModelParams::Factor(p) => self.params.push(p.clone()),
            ModelParams::Lsvvar(p) => self.lsvvar.push(p.clone()),
        }
        self.shrinkage.push(state.pi);
        let n = state.latents.n();
        let last = |mat: &DMatrix<f64>| -> Vec<f64> {
            if n == 0 {
                vec![0.0; mat.ncols()]
            } else {
                mat.row(n - 1).iter().copied().collect()
            }
        };
        self.last_h.push(last(&state.latents.h));
        self.last_f.push(last(&state.latents.f));
        if self.chain.store_latents {
            self.latents.push(state.latents.clone());
        }
    }

    /// Named traces of every free scalar parameter.
    pub fn traces(&self) -> Vec<(String, Vec<f64>)> {
        let mut out: Vec<(String, Vec<f64>)> = Vec::new();
        let mut add = |name: String, f: &dyn Fn(usize) -> f64, len: usize| {
            out.push((name, (0..len).map(f).collect()));
        };
        let cfg = &self.model;
        if cfg.benchmark_lsvvar {
            let d = &self.lsvvar;
            let p = cfg.p;
            for i in 0..p {
                for j in 0..i {
                    add(format!("B0[{i},{j}]"), &|s| d[s].b0[(i, j)], d.len());
                }
            }
            for i in 0..p {
                add(format!("b[{i}]"), &|s| d[s].b[i], d.len());
            }
            for i in 0..p {
                for c in 0..p * cfg.lags {
                    add(format!("Bbar[{i},{c}]"), &|s| d[s].bbar[(i, c)], d.len());
                }
            }
            for i in 0..p {
                add(format!("mu[{i}]"), &|s| d[s].mu[i], d.len());
                add(format!("Phi[{i}]"), &|s| d[s].phi[i], d.len());
                add(format!("Sigma_h[{i}]"), &|s| d[s].sigma2[i], d.len());
            }
            return out;
        }
        let d = &self.params;
        let (p, q) = (cfg.p, cfg.q);
        if cfg.in_mean != InMean::None {
            for j in 0..cfg.beta_len() {
                add(format!("beta[{j}]"), &|s| d[s].beta[j], d.len());
            }
        }
        for i in 0..p {
            for j in 0..q {
                add(format!("B[{i},{j}]"), &|s| d[s].loadings[(i, j)], d.len());
            }
        }
        for i in 0..p {
            for c in 0..p * cfg.lags {
                add(format!("Bbar[{i},{c}]"), &|s| d[s].bbar[(i, c)], d.len());
            }
        }
        for j in 0..q {
            add(format!("gamma[{j}]"), &|s| d[s].gamma[j], d.len());
            if cfg.factor_dynamics {
                add(format!("Psi[{j}]"), &|s| d[s].psi[j], d.len());
            }
        }
        for i in 0..cfg.k() {
            if i < p {
                add(format!("mu[{i}]"), &|s| d[s].mu[i], d.len());
            }
            add(format!("Phi[{i}]"), &|s| d[s].phi[i], d.len());
            add(format!("Sigma[{i}]"), &|s| d[s].sigma2[i], d.len());
            if cfg.leverage_active(i) {
                add(format!("rho[{i}]"), &|s| d[s].rho[i], d.len());
            }
        }
        out
    }

    pub fn trace(&self, name: &str) -> Option<Vec<f64>> {
        self.traces().into_iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

/// Minnesota scale variances: the configured ones or AR(L) fits per series.
pub fn resolve_s2(priors: &PriorHyper, data: &ModelData) -> Result<Vec<f64>> {
    if !priors.s2.is_empty() {
        return Ok(priors.s2.clone());
    }
    (0..data.p())
        .map(|i| {
            let col: Vec<f64> = data.y.column(i).iter().copied().collect();
            let v = estimate_ar_residual_variance(&col, data.lags)?;
            Ok(v.max(1e-8))
        })
        .collect()
}

/// Deterministic starting point: principal-component factors and loadings,
/// flat log-volatilities at the log residual variances.
pub fn initial_state(cfg: &ModelConfig, data: &ModelData, priors: &PriorHyper) -> ChainState {
    let (n, p) = (data.n(), cfg.p);
    let pi = (priors.minnesota_pi1, priors.minnesota_pi2);
    let col_var = |m: &DMatrix<f64>, i: usize| -> f64 {
        let c = m.column(i);
        let mean = c.mean();
        (c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n.max(2) - 1) as f64).max(1e-4)
    };
    if cfg.benchmark_lsvvar {
        let mut params = LsvvarParams::default_for(p, cfg.lags);
        let mut h = DMatrix::zeros(n, p);
        for i in 0..p {
            let lv = col_var(&data.y, i).ln();
            params.mu[i] = lv;
            h.column_mut(i).fill(lv);
        }
        return ChainState {
            params: ModelParams::Lsvvar(params),
            latents: LatentPaths { f: DMatrix::zeros(n, 0), h },
            pi,
        };
    }
    let q = cfg.q;
    let mut params = Params::default_for(cfg);
    let mean = DVector::from_fn(p, |i, _| data.y.column(i).mean());
    let centered = DMatrix::from_fn(n, p, |t, i| data.y[(t, i)] - mean[i]);
    let cov = centered.transpose() * &centered / (n.max(2) - 1) as f64;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut f = DMatrix::zeros(n, q);
    for (j, &o) in order.iter().take(q).enumerate() {
        let lam = eig.eigenvalues[o].max(1e-8);
        let mut v = eig.eigenvectors.column(o).into_owned();
        let (imax, _) = v.iter().enumerate().fold((0, 0.0), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
        if v[imax] < 0.0 {
            v = -v;
        }
        params.loadings.set_column(j, &(&v * lam.sqrt()));
        f.set_column(j, &(&centered * &v / lam.sqrt()));
    }
    let resid = &data.y - &f * params.loadings.transpose();
    let mut h = DMatrix::zeros(n, cfg.k());
    for i in 0..p {
        let lv = col_var(&resid, i).ln();
        params.mu[i] = lv;
        h.column_mut(i).fill(lv);
    }
    ChainState { params: ModelParams::Factor(params), latents: LatentPaths { f, h }, pi }
}

/// One sweep of the factor-model sampler in block order:
/// beta; (h, SV parameters) per index; (B, Bbar); Psi; gamma; f; shrinkage.
#[allow(clippy::too_many_arguments)]
pub fn sweep_factor_model<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ModelConfig,
    params: &mut Params,
    lat: &mut LatentPaths,
    pi: &mut (f64, f64),
    data: &ModelData,
    priors: &PriorHyper,
    s2: &[f64],
    block_size: usize,
    acc: &mut Acceptance,
) -> Result<()> {
    let (p, k) = (cfg.p, cfg.k());
    if cfg.in_mean != InMean::None {
        params.beta = sample_beta(rng, cfg, params, lat, data, priors)?;
    }
    let raw = raw_residuals(cfg, params, &lat.f, data);
    let svp = SvPrior::from(priors);
    for i in 0..k {
        let w: Vec<f64> = raw.column(i).iter().copied().collect();
        let mut h = lat.h_series(i);
        let mut sv = params.sv(i);
        let opts = SvOptions { mu_free: i < p, rho_free: cfg.leverage_active(i), block_size };
        let a = sample_sv_block(rng, &w, params.beta_for(cfg, i), &mut h, &mut sv, &svp, &opts)?;
        params.set_sv(i, sv);
        lat.h.set_column(i, &DVector::from_vec(h));
        acc.h_blocks += a.blocks;
        acc.h_accepted += a.blocks_accepted;
        acc.phi_accepted += a.phi_accepted as usize;
        acc.sigma2_accepted += a.sigma2_accepted as usize;
        acc.rho_accepted += a.rho_accepted as usize;
    }
    let (loadings, bbar) = sample_var_coeffs(rng, cfg, params, lat, data, priors, *pi, s2)?;
    params.loadings = loadings;
    params.bbar = bbar;
    if cfg.factor_dynamics {
        let new = sample_psi(rng, cfg, params, lat, priors)?;
        acc.psi_accepted += new.iter().zip(&params.psi).filter(|(a, b)| a != b).count();
        params.psi = new;
    }
    params.gamma = sample_gamma(rng, cfg, params, lat, priors)?;
    lat.f = sample_factors(rng, cfg, params, &lat.h, data)?;
    if priors.sample_shrinkage {
        *pi = sample_shrinkage(rng, *pi, &params.bbar, s2, cfg.lags, 0.3);
    }
    acc.sweeps += 1;
    Ok(())
}

/// One sweep of whichever sampler the state belongs to.
#[allow(clippy::too_many_arguments)]
pub fn sweep<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ModelConfig,
    state: &mut ChainState,
    data: &ModelData,
    priors: &PriorHyper,
    s2: &[f64],
    block_size: usize,
    acc: &mut Acceptance,
) -> Result<()> {
    match &mut state.params {
        ModelParams::Factor(params) => {
            sweep_factor_model(rng, cfg, params, &mut state.latents, &mut state.pi, data, priors, s2, block_size, acc)
        }
        ModelParams::Lsvvar(params) => lsvvar::sweep_lsvvar(
            rng,
            cfg.lags,
            params,
            &mut state.latents.h,
            &mut state.pi,
            data,
            priors,
            s2,
            block_size,
            acc,
        ),
    }
}

fn check_inputs(cfg: &ModelConfig, chain: &ChainConfig, data: &ModelData, priors: &PriorHyper) -> Result<()> {
    cfg.validate()?;
    chain.validate()?;
    priors.validate(cfg.p)?;
    if data.p() != cfg.p || data.lags != cfg.lags {
        return Err(Error::DimensionMismatch(format!(
            "data has p={} and L={}, model expects p={} and L={}",
            data.p(),
            data.lags,
            cfg.p,
            cfg.lags
        )));
    }
    if data.n() < 2 {
        return Err(Error::DimensionMismatch("need at least two observations after the presample".into()));
    }
    Ok(())
}

/// Runs a chain from the deterministic starting point.
pub fn run_chain(cfg: &ModelConfig, chain: &ChainConfig, data: &ModelData, priors: &PriorHyper) -> Result<DrawSet> {
    run_chain_checkpointed(cfg, chain, data, priors, None)
}

/// Benchmark VAR chain; `data.lags` sets the lag order.
pub fn run_lsvvar_chain(chain: &ChainConfig, data: &ModelData, priors: &PriorHyper) -> Result<DrawSet> {
    let cfg = ModelConfig::variant("LSVVAR", data.p(), 0, data.lags)?;
    run_chain(&cfg, chain, data, priors)
}

/// Runs a chain, resuming from and periodically writing a checkpoint when `ckpt` is given.
pub fn run_chain_checkpointed(
    cfg: &ModelConfig,
    chain: &ChainConfig,
    data: &ModelData,
    priors: &PriorHyper,
    ckpt: Option<&CheckpointSpec>,
) -> Result<DrawSet> {
    check_inputs(cfg, chain, data, priors)?;
    let s2 = resolve_s2(priors, data)?;
    let resumed = match ckpt {
        Some(spec) => checkpoint::load(spec, cfg, chain)?,
        None => None,
    };
    let (mut state, mut rng, mut draws, start) = match resumed {
        Some(c) => (c.state, c.rng, c.draws, c.iteration),
        None => (
            initial_state(cfg, data, priors),
            rng_from_seed(chain.seed),
            DrawSet::new(*cfg, *chain, s2.clone(), data.n()),
            0,
        ),
    };
    run_iterations(cfg, chain, data, priors, &s2, &mut state, &mut rng, &mut draws, start, ckpt)?;
    Ok(draws)
}

#[allow(clippy::too_many_arguments)]
fn run_iterations(
    cfg: &ModelConfig,
    chain: &ChainConfig,
    data: &ModelData,
    priors: &PriorHyper,
    s2: &[f64],
    state: &mut ChainState,
    rng: &mut SimRng,
    draws: &mut DrawSet,
    start: usize,
    ckpt: Option<&CheckpointSpec>,
) -> Result<()> {
    for it in start..chain.total_iterations() {
        let mut acc = draws.acceptance;
        sweep(rng, cfg, state, data, priors, s2, chain.sv_block_size, &mut acc)
            .map_err(|e| Error::Chain { iteration: it, source: Box::new(e) })?;
        draws.acceptance = acc;
        if chain.keeps(it) {
            draws.record(state);
        }
        if let Some(spec) = ckpt {
            let done = it + 1;
            if spec.every > 0 && done % spec.every == 0 && done < chain.total_iterations() {
                checkpoint::save(spec, cfg, chain, done, state, rng, draws)?;
            }
            if spec.stop_after.is_some_and(|s| done >= s) && done < chain.total_iterations() {
                return Err(Error::Interrupted(done));
            }
        }
    }
    Ok(())
}
